"""Combinatorial curves, curve-family specifications and their realizations on a cover.

A chain is a sequence of pieces where consecutive pieces are joined by an allowed move of
the cover. Its rho-length sums ``rho`` over the *set* of pieces it visits, so a family
is determined, for modulus purposes, by the supports of its chains. For the connector-type
families below these supports are exactly the move-connected piece sets that contain a
source piece and a target piece.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import chain as _chain
from typing import Iterable, Sequence, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from .cover import Cover
from .geometry import InputError

ENUMERATION_GUARD = 10**6


class EmptyFamily(Exception):
    """The family has no curves (its modulus is 0 by convention)."""


class UnsupportedFamily(InputError):
    pass


@dataclass(frozen=True)
class CombCurve:
    chain: tuple[int, ...]

    def __post_init__(self):
        if len(self.chain) == 0:
            raise InputError("a curve needs at least one piece")
        object.__setattr__(self, "chain", tuple(int(i) for i in self.chain))

    @property
    def support(self) -> frozenset[int]:
        return frozenset(self.chain)

    @property
    def support_array(self) -> np.ndarray:
        return np.array(sorted(self.support), dtype=np.int64)

    def length(self, rho) -> float:
        rho = np.asarray(rho, dtype=float)
        return float(rho[self.support_array].sum())

    def is_chain_in(self, cover: Cover) -> bool:
        nb = cover.move_neighbors
        return all(b in nb[a] or a == b for a, b in zip(self.chain, self.chain[1:]))


# ---------------------------------------------------------------- specifications


@dataclass(frozen=True)
class Explicit:
    curves: tuple[CombCurve, ...]

    @classmethod
    def of(cls, chains: Iterable[Sequence[int]]) -> "Explicit":
        return cls(tuple(CombCurve(tuple(c)) for c in chains))


Side = Union[str, tuple[int, ...]]


@dataclass(frozen=True)
class Connector:
    source: Side
    target: Side


@dataclass(frozen=True)
class TorusLoop:
    direction: str  # "e1" | "e2"


@dataclass(frozen=True)
class ThroughPiece:
    s0: int
    min_support: int = 2


FamilySpec = Union[Explicit, Connector, TorusLoop, ThroughPiece]


def spec_from_json(obj: dict) -> FamilySpec:
    """``{"variant": "connector", "source": "left", "target": "right"}`` and friends."""
    variant = obj.get("variant")
    if variant == "explicit":
        return Explicit.of(obj.get("chains", []))
    if variant == "connector":
        src, tgt = obj["source"], obj["target"]
        return Connector(src if isinstance(src, str) else tuple(src),
                         tgt if isinstance(tgt, str) else tuple(tgt))
    if variant in ("torus_loop", "torusloop"):
        return TorusLoop(obj["direction"])
    if variant in ("through_piece", "throughpiece"):
        return ThroughPiece(int(obj["s0"]), int(obj.get("min_support", 2)))
    raise InputError(f"unknown family variant {variant!r}")


def spec_to_json(spec: FamilySpec) -> dict:
    if isinstance(spec, Explicit):
        return {"variant": "explicit", "chains": [list(c.chain) for c in spec.curves]}
    if isinstance(spec, Connector):
        side = lambda s: s if isinstance(s, str) else list(s)  # noqa: E731
        return {"variant": "connector", "source": side(spec.source), "target": side(spec.target)}
    if isinstance(spec, TorusLoop):
        return {"variant": "torus_loop", "direction": spec.direction}
    return {"variant": "through_piece", "s0": spec.s0, "min_support": spec.min_support}


# ---------------------------------------------------------------- handles


class Family:
    """Realized family: membership, shortest-curve queries, candidate curves, enumeration."""

    cover: Cover

    def contains(self, curve: CombCurve) -> bool:
        raise NotImplementedError

    def shortest(self, rho) -> tuple[CombCurve, float]:
        raise NotImplementedError

    def candidates(self, rho, threshold: float) -> list[CombCurve]:
        """Curves of rho-length below ``threshold``; includes a shortest one when any is."""
        raise NotImplementedError

    def enumerate(self, max_support: int) -> list[CombCurve]:
        raise NotImplementedError

    def is_empty(self) -> bool:
        raise NotImplementedError


class ExplicitFamily(Family):
    def __init__(self, cover: Cover, curves: Sequence[CombCurve]):
        self.cover = cover
        for c in curves:
            if max(c.chain) >= cover.n_pieces or min(c.chain) < 0:
                raise InputError(f"curve {c.chain} names pieces outside the cover")
        self.curves = list(curves)
        self._supports = [c.support_array for c in self.curves]

    def is_empty(self) -> bool:
        return not self.curves

    def contains(self, curve: CombCurve) -> bool:
        return any(curve.support == c.support for c in self.curves)

    def _lengths(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        return np.array([rho[s].sum() for s in self._supports])

    def shortest(self, rho):
        if not self.curves:
            raise EmptyFamily()
        lengths = self._lengths(rho)
        best = min(range(len(self.curves)), key=lambda i: (lengths[i], self.curves[i].chain))
        return self.curves[best], float(lengths[best])

    def candidates(self, rho, threshold):
        if not self.curves:
            return []
        lengths = self._lengths(rho)
        return [c for c, l in zip(self.curves, lengths) if l < threshold]

    def enumerate(self, max_support):
        seen, out = set(), []
        for c in self.curves:
            if len(c.support) <= max_support and c.support not in seen:
                seen.add(c.support)
                out.append(c)
        return out


BACKWARD_TRACES = 8


class PathFamily(Family):
    """Chains starting in ``sources`` and ending in ``targets`` along the given moves."""

    def __init__(self, cover: Cover, sources, targets, moves: np.ndarray):
        self.cover = cover
        n = cover.n_pieces
        self.sources = np.unique(np.asarray(sources, dtype=np.int64))
        self.targets = np.unique(np.asarray(targets, dtype=np.int64))
        if self.sources.size == 0 or self.targets.size == 0:
            raise InputError("family has an empty source or target set")
        if self.sources.min() < 0 or self.sources.max() >= n or self.targets.min() < 0 \
                or self.targets.max() >= n:
            raise InputError("source/target ids outside the cover")
        pairs = np.sort(np.asarray(moves, dtype=np.int64).reshape(-1, 2), axis=1)
        pairs = pairs[pairs[:, 0] != pairs[:, 1]]
        pairs = np.unique(pairs, axis=0) if len(pairs) else pairs.reshape(0, 2)
        self.pairs = pairs
        self.is_target = np.zeros(n, dtype=bool)
        self.is_target[self.targets] = True
        self.is_source = np.zeros(n, dtype=bool)
        self.is_source[self.sources] = True

        # directed graphs on n + 1 nodes; node n is a super source feeding the roots
        # (targets for the forward search, sources for the backward one);
        # an edge u -> v carries the weight of v
        self._graphs = {True: self._rooted(pairs, self.targets, n),
                        False: self._rooted(pairs, self.sources, n)}
        # undirected neighbor lists for tracing and enumeration
        nb_rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
        nb_cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
        o = np.lexsort((nb_cols, nb_rows))
        self._nb_rows, self._nb_cols = nb_rows[o], nb_cols[o]
        self._nb_ptr = np.searchsorted(self._nb_rows, np.arange(n + 1))

    def is_empty(self) -> bool:
        return self._distances(np.ones(self.cover.n_pieces))[0][self.sources].min() == np.inf

    def neighbors(self, v: int) -> np.ndarray:
        return self._nb_cols[self._nb_ptr[v] : self._nb_ptr[v + 1]]

    def contains(self, curve: CombCurve) -> bool:
        ch = curve.chain
        if not (self.is_source[ch[0]] and self.is_target[ch[-1]]):
            return False
        return all(a == b or b in set(self.neighbors(a).tolist()) for a, b in zip(ch, ch[1:]))

    @staticmethod
    def _rooted(pairs, roots, n):
        rows = np.concatenate([pairs[:, 0], pairs[:, 1], np.full(roots.size, n)])
        cols = np.concatenate([pairs[:, 1], pairs[:, 0], roots])
        order = np.lexsort((cols, rows))
        cols = cols[order]
        indptr = np.searchsorted(rows[order], np.arange(n + 2)).astype(np.int64)
        return cols, indptr

    def _distances(self, rho, to_targets: bool = True):
        n = self.cover.n_pieces
        rho = np.asarray(rho, dtype=float)
        if rho.shape != (n,) or np.any(rho < 0):
            raise InputError("rho must be a nonnegative vector indexed by pieces")
        cols, indptr = self._graphs[to_targets]
        g = sp.csr_matrix((rho[cols], cols, indptr), shape=(n + 1, n + 1))
        dist, pred = dijkstra(g, directed=True, indices=n, return_predecessors=True)
        return dist[:n], pred[:n]

    def _next_pointers(self, rho, dist, pred) -> np.ndarray:
        """Step toward the targets: smallest-id tight neighbor that is shallower in the tree."""
        n = self.cover.n_pieces
        depth = _tree_depth(pred, n)
        u, v = self._nb_rows, self._nb_cols  # step u -> v
        tol = 1e-12 * np.maximum(1.0, dist[u])
        ok = (dist[v] + rho[u] <= dist[u] + tol) & (depth[v] < depth[u]) & np.isfinite(dist[u])
        nxt = np.full(n, -1, dtype=np.int64)
        # rows are sorted by (u, v): the first admissible v per u is the smallest id
        uu, vv = u[ok], v[ok]
        first = np.r_[True, uu[1:] != uu[:-1]] if uu.size else np.zeros(0, dtype=bool)
        nxt[uu[first]] = vv[first]
        return nxt

    def _trace(self, starts: np.ndarray, nxt: np.ndarray, stop=None) -> list[CombCurve]:
        stop = self.is_target if stop is None else stop
        paths = [[int(s)] for s in starts]
        cur = np.array(starts, dtype=np.int64)
        live = np.flatnonzero(~stop[cur])
        while live.size:
            step = nxt[cur[live]]
            if np.any(step < 0):
                raise RuntimeError("shortest-path tracing lost its predecessor chain")
            cur[live] = step
            for i, v in zip(live.tolist(), step.tolist()):
                paths[i].append(v)
            live = live[~stop[step]]
        return [CombCurve(tuple(p)) for p in paths]

    def shortest(self, rho):
        rho = np.asarray(rho, dtype=float)
        dist, pred = self._distances(rho)
        ds = dist[self.sources]
        L = ds.min()
        if not np.isfinite(L):
            raise EmptyFamily()
        tol = 1e-12 * max(1.0, L)
        start = self.sources[np.flatnonzero(ds <= L + tol)[0]]
        nxt = self._next_pointers(rho, dist, pred)
        curve = self._trace(np.array([start]), nxt)[0]
        return curve, curve.length(rho)

    def candidates(self, rho, threshold):
        rho = np.asarray(rho, dtype=float)
        dist, pred = self._distances(rho)
        ds = dist[self.sources]
        if not np.isfinite(ds.min()):
            return []
        starts = self.sources[ds < threshold]
        if starts.size == 0:
            return []
        nxt = self._next_pointers(rho, dist, pred)
        out = self._trace(starts, nxt)
        # a few more curves ending at the most violated targets, traced back to the sources
        dist_b, pred_b = self._distances(rho, to_targets=False)
        db = dist_b[self.targets]
        order = np.argsort(db, kind="stable")[:BACKWARD_TRACES]
        ends = self.targets[order[db[order] < threshold]]
        if ends.size:
            back = self._trace(ends, self._next_pointers(rho, dist_b, pred_b), self.is_source)
            out += [CombCurve(c.chain[::-1]) for c in back]
        return _dedupe(out)

    def enumerate(self, max_support):
        """Connected piece sets of size <= max_support holding a source and a target."""
        out, seen = [], set()
        frontier = {frozenset([int(s)]) for s in self.sources}
        visited = set(frontier)
        size = 1
        while frontier and size <= max_support:
            nxt_frontier = set()
            for S in sorted(frontier, key=sorted):
                if any(self.is_target[v] for v in S) and S not in seen:
                    seen.add(S)
                    out.append(CombCurve(self._walk(S)))
                if size == max_support:
                    continue
                for v in S:
                    for u in self.neighbors(v).tolist():
                        if u not in S:
                            T = S | {u}
                            if T not in visited:
                                visited.add(T)
                                nxt_frontier.add(T)
                                if len(visited) > ENUMERATION_GUARD:
                                    raise InputError(
                                        f"enumeration exceeds {ENUMERATION_GUARD} chains"
                                    )
            frontier = nxt_frontier
            size += 1
        return out

    def _walk(self, S: frozenset[int]) -> tuple[int, ...]:
        """A chain with support ``S``: the tree path from a source to a target, with
        out-and-back excursions into the remaining pieces."""
        start = min(v for v in S if self.is_source[v])
        goal = min(v for v in S if self.is_target[v])
        parent = {start: None}
        children: dict[int, list[int]] = {v: [] for v in S}
        queue = [start]
        for v in queue:
            for u in self.neighbors(v).tolist():
                if u in S and u not in parent:
                    parent[u] = v
                    children[v].append(u)
                    queue.append(u)
        path = []
        v = goal
        while v is not None:
            path.append(v)
            v = parent[v]
        path.reverse()
        on_path = set(path)
        walk: list[int] = []

        def excursion(v):
            walk.append(v)
            for u in children[v]:
                excursion(u)
                walk.append(v)

        for v in path:
            walk.append(v)
            for u in children[v]:
                if u not in on_path:
                    excursion(u)
                    walk.append(v)
        return tuple(walk)


def _tree_depth(pred: np.ndarray, n: int) -> np.ndarray:
    """Depth in the shortest-path tree rooted at the super source ``n`` (list ranking)."""
    jump = pred.astype(np.int64).copy()
    unreachable = jump < 0
    jump[unreachable] = n
    depth = np.where(unreachable, np.iinfo(np.int64).max // 4, 1).astype(np.int64)
    ext_jump = np.append(jump, n)
    ext_depth = np.append(depth, 0)
    ext_depth[np.append(unreachable, False)] = 0
    while True:
        active = ext_jump != n
        if not active.any():
            break
        j = ext_jump[active]
        ext_depth[active] += ext_depth[j]
        ext_jump[active] = ext_jump[j]
    out = ext_depth[:n]
    out[unreachable] = np.iinfo(np.int64).max // 4
    return out


class UnionFamily(Family):
    def __init__(self, members: Sequence[Family]):
        if not members:
            raise InputError("union of no families")
        self.members = list(members)
        self.cover = members[0].cover

    def is_empty(self):
        return all(m.is_empty() for m in self.members)

    def contains(self, curve):
        return any(m.contains(curve) for m in self.members)

    def shortest(self, rho):
        best = None
        for m in self.members:
            try:
                c, l = m.shortest(rho)
            except EmptyFamily:
                continue
            if best is None or (l, c.chain) < (best[1], best[0].chain):
                best = (c, l)
        if best is None:
            raise EmptyFamily()
        return best

    def candidates(self, rho, threshold):
        return _dedupe(list(_chain.from_iterable(m.candidates(rho, threshold) for m in self.members)))

    def enumerate(self, max_support):
        return _dedupe(list(_chain.from_iterable(m.enumerate(max_support) for m in self.members)))


def _dedupe(curves: Iterable[CombCurve]) -> list[CombCurve]:
    seen, out = set(), []
    for c in curves:
        if c.support not in seen:
            seen.add(c.support)
            out.append(c)
    return out


# ---------------------------------------------------------------- realization


def _side_ids(cover: Cover, side: Side) -> np.ndarray:
    if isinstance(side, str):
        return cover.side(side)
    return np.asarray(side, dtype=np.int64)


def loop_cut(cover: Cover, direction: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sources, targets and surviving moves after cutting the torus along ``x_i = 0``."""
    axis = {"e1": 0, "e2": 1}.get(direction)
    if axis is None:
        raise InputError(f"unknown loop direction {direction!r}")
    w = cover.move_wrap[:, axis]
    i, j = cover.moves[:, 0], cover.moves[:, 1]
    # lift of j next to i is center_j + wrap: wrap = +1 puts i left of the cut and j right of it
    sources = np.concatenate([j[w == 1], i[w == -1]])
    targets = np.concatenate([i[w == 1], j[w == -1]])
    kept = cover.moves[w == 0]
    return np.unique(sources), np.unique(targets), kept


def realize(spec: FamilySpec, cover: Cover) -> Family:
    if isinstance(spec, Explicit):
        return ExplicitFamily(cover, spec.curves)
    if isinstance(spec, Connector):
        src, tgt = _side_ids(cover, spec.source), _side_ids(cover, spec.target)
        if src.size == 0 or tgt.size == 0:
            raise InputError("connector source and target must be nonempty")
        if np.intersect1d(src, tgt).size:
            raise InputError("connector source and target must be disjoint")
        return PathFamily(cover, src, tgt, cover.moves)
    if isinstance(spec, TorusLoop):
        src, tgt, kept = loop_cut(cover, spec.direction)
        if src.size == 0 or tgt.size == 0:
            raise InputError(f"cover has no {spec.direction} loops to cut (too few pieces across)")
        # pieces on both sides of the cut wrap onto themselves: one-piece loops
        return PathFamily(cover, src, tgt, kept)
    if isinstance(spec, ThroughPiece):
        if spec.min_support < 2:
            raise InputError("ThroughPiece needs min_support >= 2")
        if not 0 <= spec.s0 < cover.n_pieces:
            raise InputError(f"piece {spec.s0} not in cover")
        hops = hop_distances(cover, spec.s0)
        far = np.flatnonzero(hops >= spec.min_support - 1)
        if far.size == 0:
            return ExplicitFamily(cover, [])
        return PathFamily(cover, [spec.s0], far, cover.moves)
    raise InputError(f"unknown family spec {spec!r}")


def hop_distances(cover: Cover, s0: int) -> np.ndarray:
    n = cover.n_pieces
    g = sp.csr_matrix(
        (np.ones(len(cover.moves)), (cover.moves[:, 0], cover.moves[:, 1])), shape=(n, n)
    )
    from scipy.sparse.csgraph import shortest_path

    return shortest_path(g, directed=False, unweighted=True, indices=s0)


def shortest_curve(handle: Family, rho) -> tuple[CombCurve, float]:
    return handle.shortest(rho)


def enumerate_small(handle: Family, max_support: int) -> list[CombCurve]:
    return handle.enumerate(max_support)


# ---------------------------------------------------------------- duals

_DUAL_SIDES = {"left": "bottom", "right": "top", "bottom": "left", "top": "right"}


def dual_connector(spec: FamilySpec, cover: Cover) -> FamilySpec:
    """The transversal family: left-right <-> bottom-top, e1 loops <-> e2 loops.

    The crossing property is checked on ``cover`` before returning.
    """
    if isinstance(spec, TorusLoop):
        dual = TorusLoop("e2" if spec.direction == "e1" else "e1")
    elif isinstance(spec, Connector):
        if cover.shape is None:
            raise UnsupportedFamily("dual connectors need a grid-like cover")
        src, tgt = spec.source, spec.target
        if not isinstance(src, str):
            src, tgt = _name_side(cover, src), _name_side(cover, tgt)
        if {src, tgt} not in ({"left", "right"}, {"bottom", "top"}):
            raise UnsupportedFamily("dual connectors need two opposite sides")
        dual = Connector(_DUAL_SIDES[src], _DUAL_SIDES[tgt])
    else:
        raise UnsupportedFamily(f"no dual for {type(spec).__name__}")
    witness = crossing_witness(realize(spec, cover), realize(dual, cover))
    if witness is not None:
        raise UnsupportedFamily(f"dual family misses curve {witness[0].chain} via {witness[1].chain}")
    return dual


def _name_side(cover: Cover, ids) -> str:
    ids = set(int(i) for i in ids)
    for name in ("left", "right", "bottom", "top"):
        if set(cover.side(name).tolist()) == ids:
            return name
    raise UnsupportedFamily("connector sides are not grid sides")


def sample_minimal(handle: Family, limit: int = 64) -> list[CombCurve]:
    """Minimal-support curves: full enumeration when small, else traced shortest curves."""
    n = handle.cover.n_pieces
    rho = np.ones(n)
    _, L = handle.shortest(rho)
    if n <= 16:
        return [c for c in handle.enumerate(int(round(L))) if len(c.support) == round(L)]
    return handle.candidates(rho, L + 0.5)[:limit]


def crossing_witness(a: Family, b: Family, curves_a: Sequence[CombCurve] | None = None):
    """A pair (curve of ``a``, curve of ``b``) with disjoint supports, or ``None``.

    For each listed curve of ``a`` the check covers every curve of ``b``: weight 1 on the
    curve's support, 0 elsewhere, and ask whether some curve of ``b`` has length 0.
    """
    n = a.cover.n_pieces
    for ca in curves_a if curves_a is not None else sample_minimal(a):
        rho = np.zeros(n)
        rho[ca.support_array] = 1.0
        try:
            cb, l = b.shortest(rho)
        except EmptyFamily:
            continue
        if l == 0:
            return ca, cb
    return None
