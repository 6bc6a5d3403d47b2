"""Finite covers of the torus (and of the unit square) with their nerves."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np
from scipy.optimize import minimize_scalar

from .geometry import (
    InputError,
    IntMatrix2,
    NotExpandingError,
    ParabolicMetric,
    Tag,
    classify,
    maximal_net,
    metric_for_matrix,
)

DEFAULT_PIECE_BUDGET = 200_000

FACE_STEPS = np.array([[1, 0], [0, 1]])
CORNER_STEPS = np.array([[1, 1], [1, -1]])


class BudgetError(InputError):
    def __init__(self, count: int, budget: int):
        super().__init__(f"cover needs {count} pieces, above the piece budget {budget}")
        self.count = count
        self.budget = budget


class QuasipackingError(AssertionError):
    """A constructed cover failed its quasipacking certificate (a bug, not a user error)."""


def piece_budget(budget: int | None = None) -> int:
    if budget is not None:
        return budget
    env = os.environ.get("CONFDIM_PIECE_BUDGET")
    return int(env) if env else DEFAULT_PIECE_BUDGET


@dataclass(frozen=True)
class Piece:
    id: int
    center: tuple[float, float]
    radius: float
    level: int


@dataclass(frozen=True, eq=False)
class Cover:
    """Pieces are closed; two pieces are adjacent in the nerve when their closures meet.

    ``moves`` lists the pairs a chain may step across: pieces sharing a face for cellular
    covers, every nerve edge for ball covers. A curve passing a cell corner meets every
    cell at that corner, so its support always contains a face-connected chain.
    ``move_wrap[e]`` is the integer vector with ``center[j] + wrap`` the lift of piece ``j``
    next to piece ``i`` for ``moves[e] = (i, j)``.
    """

    level: int
    kind: str
    centers: np.ndarray = field(repr=False)
    radius: np.ndarray = field(repr=False)
    adjacency: np.ndarray = field(repr=False)
    moves: np.ndarray = field(repr=False)
    move_wrap: np.ndarray = field(repr=False)
    metric: ParabolicMetric
    ambient: str = "torus"
    matrix: IntMatrix2 | None = None
    epsilon: float | None = None
    # (columns, rows) with id = row * columns + col, for grid-like covers
    shape: tuple[int, int] | None = None
    periodic: tuple[bool, bool] = (True, True)
    # maps the unit square onto one cell (cellular covers)
    cell_matrix: np.ndarray | None = field(default=None, repr=False)
    # subdivision bookkeeping: Hermite form (h11, h21, h22) of A^n and lattice index per piece
    hnf: tuple[int, int, int] | None = None
    lattice_index: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.centers)

    @property
    def n_pieces(self) -> int:
        return len(self.centers)

    @cached_property
    def pieces(self) -> list[Piece]:
        return [
            Piece(i, (float(c[0]), float(c[1])), float(r), self.level)
            for i, (c, r) in enumerate(zip(self.centers, self.radius))
        ]

    @cached_property
    def neighbors(self) -> list[set[int]]:
        out = [set() for _ in range(self.n_pieces)]
        for i, j in self.adjacency:
            out[i].add(int(j))
            out[j].add(int(i))
        return out

    def adjacent(self, i: int, j: int) -> bool:
        return j in self.neighbors[i]

    @cached_property
    def move_neighbors(self) -> list[set[int]]:
        out = [set() for _ in range(self.n_pieces)]
        for i, j in self.moves:
            out[i].add(int(j))
            out[j].add(int(i))
        return out

    def distance(self, x, y):
        return self.metric.distance(x, y, self.ambient)

    @cached_property
    def diameter(self) -> float:
        """Max piece diameter (the mesh)."""
        if self.n_pieces == 1:
            return self.metric.torus_diameter() if self.ambient == "torus" else 2 * float(self.radius[0])
        if self.cell_matrix is not None:
            return _cell_diameter(self.metric, self.cell_matrix)
        return float(2 * self.radius.max())

    def is_connected(self) -> bool:
        if self.n_pieces <= 1:
            return True
        seen = {0}
        stack = [0]
        while stack:
            v = stack.pop()
            for u in self.neighbors[v]:
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        return len(seen) == self.n_pieces

    # named sides of grid-like covers
    def side(self, name: str) -> np.ndarray:
        if self.shape is None:
            raise InputError(f"named side {name!r} needs a grid-like cover")
        cols, rows = self.shape
        ids = np.arange(cols * rows).reshape(rows, cols)
        sides = {"left": ids[:, 0], "right": ids[:, -1], "bottom": ids[0, :], "top": ids[-1, :]}
        if name not in sides:
            raise InputError(f"unknown side {name!r}; expected one of {sorted(sides)}")
        return sides[name].copy()

    def grid_id(self, col: int, row: int) -> int:
        cols, rows = self.shape
        return (row % rows) * cols + (col % cols)

    def exact_centers(self) -> list[tuple[Fraction, Fraction]] | None:
        """Rational centers of subdivision cells, reduced into [0, 1)."""
        if self.lattice_index is None:
            return None
        M = self.matrix.power(self.level)
        det = M[0][0] * M[1][1] - M[0][1] * M[1][0]
        adj = ((M[1][1], -M[0][1]), (-M[1][0], M[0][0]))
        out = []
        for k1, k2 in self.lattice_index.tolist():
            v1, v2 = 2 * k1 + 1, 2 * k2 + 1
            x = Fraction(adj[0][0] * v1 + adj[0][1] * v2, 2 * det)
            y = Fraction(adj[1][0] * v1 + adj[1][1] * v2, 2 * det)
            out.append((x - math.floor(x), y - math.floor(y)))
        return out

    def to_json(self) -> dict:
        if self.kind == "subdivision":
            kind = {"type": "subdivision", "matrix": self.matrix.literal()}
        elif self.kind == "net":
            kind = {"type": "net", "epsilon": self.epsilon}
        else:
            kind = {"type": "grid", "shape": list(self.shape), "periodic": list(self.periodic)}
        exact = self.exact_centers()
        pieces = []
        for i, (c, r) in enumerate(zip(self.centers.tolist(), self.radius.tolist())):
            rec = {"id": i, "center": c, "radius": r}
            if exact is not None:
                rec["center_exact"] = [str(v) for v in exact[i]]
            pieces.append(rec)
        return {
            "level": self.level,
            "kind": kind,
            "pieces": pieces,
            "adjacency": self.adjacency.tolist(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), separators=(",", ":"))


def _cell_corners(cell_matrix: np.ndarray) -> np.ndarray:
    """Corners of the cell relative to its center, in boundary order."""
    sq = np.array([[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]])
    return sq @ cell_matrix.T


def _edge_extremes(m: ParabolicMetric, a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Exact min and max of the metric norm on the segment ``[a, b]``.

    Between the zeros of the two coordinates the norm is a linear term plus a concave
    power, hence concave: the min sits at a breakpoint, the max is found by golden section.
    """
    ua, ub = m.coords(a), m.coords(b)
    du = ub - ua
    ts = [0.0, 1.0]
    for k in range(2):
        if du[k] != 0:
            t = -ua[k] / du[k]
            if 0 < t < 1:
                ts.append(float(t))
    ts.sort()
    f = lambda t: float(m.norm(a + t * (b - a)))  # noqa: E731
    lo = min(f(t) for t in ts)
    hi = max(f(t) for t in ts)
    for t0, t1 in zip(ts, ts[1:]):
        r = minimize_scalar(lambda t: -f(t), bounds=(t0, t1), method="bounded",
                            options={"xatol": 1e-13})
        hi = max(hi, -float(r.fun))
    return lo, hi


def _cell_radii(m: ParabolicMetric, cell_matrix: np.ndarray, scale: float = 1.0
                ) -> tuple[float, float]:
    """Inner and outer radius of the (scaled) cell about its center.

    The norm grows along rays, so balls are star-shaped and both extremes over the cell
    are attained on its boundary.
    """
    c = scale * _cell_corners(cell_matrix)
    ext = [_edge_extremes(m, c[k], c[(k + 1) % 4]) for k in range(4)]
    return min(e[0] for e in ext), max(e[1] for e in ext)


def _cell_diameter(m: ParabolicMetric, cell_matrix: np.ndarray) -> float:
    # difference set of a parallelogram P is 2 (P - center)
    return _cell_radii(m, cell_matrix, 2.0)[1]


def _hermite(M) -> tuple[int, int, int]:
    """Lower-triangular basis (h11, h21), (0, h22) of the column lattice of ``M``."""
    (m11, m12), (m21, m22) = M
    g, x, y = _xgcd(m11, m12)
    c1 = (g, x * m21 + y * m22)
    c2 = (0, (m12 // g) * m21 - (m11 // g) * m22)
    if c1[0] < 0:
        c1 = (-c1[0], -c1[1])
    h22 = abs(c2[1])
    return c1[0], c1[1] % h22, h22


def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    return a, x0, y0


def _reduce(k: np.ndarray, hnf: tuple[int, int, int]) -> np.ndarray:
    h11, h21, h22 = hnf
    k = np.array(k, dtype=np.int64)
    q1 = np.floor_divide(k[..., 0], h11)
    k[..., 0] -= q1 * h11
    k[..., 1] -= q1 * h21
    k[..., 1] = np.mod(k[..., 1], h22)
    return k


def _flat(k: np.ndarray, hnf) -> np.ndarray:
    return k[..., 0] * hnf[2] + k[..., 1]


def subdivision_cover(A: IntMatrix2, n: int, budget: int | None = None,
                      metric: ParabolicMetric | None = None) -> Cover:
    """Cells of the lattice ``A^{-n} Z^2`` on the torus; one piece per cell.

    Cell ``k`` is ``A^{-n}(k + [0,1]^2)`` for ``k`` in ``Z^2 / A^n Z^2``. Nerve adjacency
    joins cells sharing an edge or a corner, torus wrap included.
    """
    if classify(A).tag is Tag.NOT_EXPANDING:
        raise NotExpandingError(f"{A.literal()} is not expanding")
    if n < 0:
        raise InputError("level must be >= 0")
    count = abs(A.det) ** n
    budget = piece_budget(budget)
    if count > budget:
        raise BudgetError(count, budget)
    metric = metric or metric_for_matrix(A)
    M = A.power(n)
    hnf = _hermite(M)
    h11, h21, h22 = hnf
    Minv = np.linalg.inv(np.array(M, dtype=float))

    K1, K2 = np.meshgrid(np.arange(h11), np.arange(h22), indexing="ij")
    k = np.stack([K1.ravel(), K2.ravel()], axis=1).astype(np.int64)
    raw = (k + 0.5) @ Minv.T
    centers = raw - np.floor(raw)

    order = np.arange(count)
    shape = None
    if A.is_diagonal():
        cols, rows = abs(A.a) ** n, abs(A.d) ** n
        col = np.rint(centers[:, 0] * cols - 0.5).astype(np.int64) % cols
        row = np.rint(centers[:, 1] * rows - 0.5).astype(np.int64) % rows
        spatial = row * cols + col
        order = np.argsort(spatial, kind="stable")
        shape = (cols, rows)
    # id_of[flat hnf index] = piece id
    id_of = np.empty(count, dtype=np.int64)
    id_of[order] = np.arange(count)
    k = k[order]
    centers = centers[order]

    def neighbor_ids(steps):
        pairs, wraps = [], []
        for s in steps:
            nk = _reduce(k + s, hnf)
            j = id_of[_flat(nk, hnf)]
            lift = centers + Minv @ s
            w = np.rint(lift - centers[j]).astype(np.int64)
            pairs.append(np.stack([np.arange(count), j], 1))
            wraps.append(w)
        return np.concatenate(pairs), np.concatenate(wraps)

    face, face_wrap = neighbor_ids(FACE_STEPS)
    corner, _ = neighbor_ids(CORNER_STEPS)
    # a face step back onto the same cell is kept when it wraps: that cell is a one-piece loop
    keep = (face[:, 0] != face[:, 1]) | np.any(face_wrap != 0, axis=1)
    moves, move_wrap = face[keep], face_wrap[keep]
    adjacency = _undirected(np.concatenate([face, corner]))

    diam = _cell_diameter(metric, Minv) if count > 1 else metric.torus_diameter()
    return Cover(
        level=n,
        kind="subdivision",
        centers=centers,
        radius=np.full(count, diam / 2),
        adjacency=adjacency,
        moves=moves,
        move_wrap=move_wrap,
        metric=metric,
        ambient="torus",
        matrix=A,
        shape=shape,
        cell_matrix=Minv,
        hnf=hnf,
        lattice_index=k,
    )


def _undirected(pairs: np.ndarray) -> np.ndarray:
    pairs = np.sort(pairs, axis=1)
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    if len(pairs) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    return np.unique(pairs, axis=0)


def grid_cover(rows: int, cols: int, periodic: tuple[bool, bool] = (False, False),
               level: int = 0) -> Cover:
    """Rectangular ``rows x cols`` cells of the unit square, l1 metric.

    ``periodic = (x1, x2)`` glues opposite sides. Ids run row-major from the bottom-left.
    """
    if rows < 1 or cols < 1:
        raise InputError("grid dimensions must be positive")
    metric = ParabolicMetric(1.0)
    n = rows * cols
    R, C = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    R, C = R.ravel(), C.ravel()
    centers = np.stack([(C + 0.5) / cols, (R + 0.5) / rows], 1)
    ids = R * cols + C

    def steps(dc, dr):
        nc, nr = C + dc, R + dr
        wrap = np.zeros((n, 2), dtype=np.int64)
        ok = np.ones(n, dtype=bool)
        if periodic[0]:
            wrap[:, 0] = np.floor_divide(nc, cols)
            nc = nc % cols
        else:
            ok &= (nc >= 0) & (nc < cols)
        if periodic[1]:
            wrap[:, 1] = np.floor_divide(nr, rows)
            nr = nr % rows
        else:
            ok &= (nr >= 0) & (nr < rows)
        j = nr * cols + nc
        return np.stack([ids[ok], j[ok]], 1), wrap[ok]

    face = [steps(1, 0), steps(0, 1)]
    corner = [steps(1, 1), steps(1, -1)]
    moves = np.concatenate([f[0] for f in face])
    move_wrap = np.concatenate([f[1] for f in face])
    keep = moves[:, 0] != moves[:, 1]
    adjacency = _undirected(np.concatenate([p for p, _ in face + corner]))
    cell = np.diag([1.0 / cols, 1.0 / rows])
    return Cover(
        level=level,
        kind="grid",
        centers=centers,
        radius=np.full(n, 0.5 * (1.0 / cols + 1.0 / rows)),
        adjacency=adjacency,
        moves=moves[keep],
        move_wrap=move_wrap[keep],
        metric=metric,
        ambient="torus" if all(periodic) else "plane",
        shape=(cols, rows),
        periodic=tuple(periodic),
        cell_matrix=cell,
    )


def _pairwise_within(m: ParabolicMetric, pts: np.ndarray, bound: float, chunk: int = 256):
    out = []
    for s in range(0, len(pts), chunk):
        block = pts[s : s + chunk]
        d = m.torus_norm(pts[None, :, :] - block[:, None, :])
        ii, jj = np.nonzero(d <= bound)
        ii = ii + s
        keep = ii < jj
        out.append(np.stack([ii[keep], jj[keep]], 1))
    return np.concatenate(out) if out else np.zeros((0, 2), dtype=np.int64)


def net_cover(m: ParabolicMetric, n: int, budget: int | None = None) -> Cover:
    """Closed balls of radius ``2^-n`` centered on a maximal ``2^-n``-separated set."""
    eps = 2.0**-n
    net = maximal_net(m, eps)
    budget = piece_budget(budget)
    if len(net) > budget:
        raise BudgetError(len(net), budget)
    pts = net.points
    adjacency = _pairwise_within(m, pts, 2 * eps).astype(np.int64)
    delta = pts[adjacency[:, 1]] - pts[adjacency[:, 0]]
    delta = delta - np.round(delta)
    wrap = np.rint(pts[adjacency[:, 0]] + delta - pts[adjacency[:, 1]]).astype(np.int64)
    return Cover(
        level=n,
        kind="net",
        centers=pts,
        radius=np.full(len(pts), eps),
        adjacency=adjacency,
        moves=adjacency.copy(),
        move_wrap=wrap,
        metric=m,
        ambient="torus",
        epsilon=eps,
    )


def verify_quasipacking(c: Cover, m: ParabolicMetric | None = None) -> float:
    """Smallest ``K`` with ``B(x_s, r_s) in s in B(x_s, K r_s)`` and disjoint inner balls.

    For cellular covers the inner ball lies in its own cell and cells tile, so inner balls
    are disjoint by construction; for nets the centers are ``2 r``-separated.
    Raises :class:`QuasipackingError` naming the violating pair, or when ``K > 4``.
    """
    m = m or c.metric
    n = c.n_pieces
    if n == 1:
        return 1.0
    if c.kind == "net":
        inner = np.full(n, c.epsilon / 2)
        outer = np.full(n, c.epsilon)
        i, j = c.adjacency[:, 0], c.adjacency[:, 1]
        d = m.distance(c.centers[i], c.centers[j], c.ambient)
        slack = d - (inner[i] + inner[j])
        bad = np.flatnonzero(slack < -1e-12 * max(1.0, float(inner.max())))
        if bad.size:
            e = bad[0]
            raise QuasipackingError(
                f"inner balls of pieces {int(i[e])} and {int(j[e])} overlap by {-slack[e]:.3g}"
            )
    elif c.cell_matrix is not None:
        r_in, r_out = _cell_radii(m, c.cell_matrix)
        inner, outer = np.full(n, r_in), np.full(n, r_out)
    else:
        raise QuasipackingError(f"no quasipacking certificate for cover kind {c.kind!r}")
    K = float(np.max(outer / inner))
    if K > 4:
        raise QuasipackingError(f"quasipacking constant {K:.4g} exceeds 4")
    return K


@dataclass(frozen=True, eq=False)
class CoverMap:
    source: Cover
    target: Cover
    piece_map: np.ndarray = field(repr=False)
    degree: int

    def preimages(self) -> list[np.ndarray]:
        order = np.argsort(self.piece_map, kind="stable")
        bounds = np.searchsorted(self.piece_map[order], np.arange(self.target.n_pieces + 1))
        return [order[bounds[s] : bounds[s + 1]] for s in range(self.target.n_pieces)]

    def check(self) -> None:
        counts = np.bincount(self.piece_map, minlength=self.target.n_pieces)
        if counts.min() < 1 or counts.max() > self.degree:
            raise AssertionError(
                f"preimage counts in [{counts.min()}, {counts.max()}], degree {self.degree}"
            )
        for i, j in self.source.adjacency:
            a, b = int(self.piece_map[i]), int(self.piece_map[j])
            if a != b and not self.target.adjacent(a, b):
                raise AssertionError(f"adjacent source pieces {i},{j} map to non-adjacent {a},{b}")


def self_cover_map(A: IntMatrix2, n: int, budget: int | None = None) -> CoverMap:
    """The cell map of ``f_A`` from level ``n + 1`` onto level ``n``."""
    source = subdivision_cover(A, n + 1, budget)
    target = subdivision_cover(A, n, budget)
    k = _reduce(source.lattice_index, target.hnf)
    h11, h21, h22 = target.hnf
    id_of = np.empty(target.n_pieces, dtype=np.int64)
    id_of[_flat(target.lattice_index, target.hnf)] = np.arange(target.n_pieces)
    piece_map = id_of[_flat(k, target.hnf)]
    return CoverMap(source, target, piece_map, abs(A.det))


def identity_map(c: Cover) -> CoverMap:
    return CoverMap(c, c, np.arange(c.n_pieces), 1)


def fold_map(rows: int, cols: int) -> CoverMap:
    """Degree-2 map ``x_1 -> 2 x_1`` from a ``rows x 2cols`` cylinder grid onto ``rows x cols``."""
    source = grid_cover(rows, 2 * cols, periodic=(True, False))
    target = grid_cover(rows, cols, periodic=(True, False))
    ids = np.arange(source.n_pieces)
    r, c = divmod(ids, 2 * cols)
    return CoverMap(source, target, r * cols + c % cols, 2)
