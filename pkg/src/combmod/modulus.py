"""Combinatorial p-modulus: solver, optimality certificates and the modulus laws.

For a finite cover and ``p > 1`` the modulus is

    mod_p = min { sum_s rho(s)^p : rho >= 0, l_rho(gamma) >= 1 for every gamma },

with ``l_rho(gamma)`` the sum of ``rho`` over the pieces ``gamma`` visits. The solver keeps
a working set ``W`` of curves and maximizes the concave dual over multipliers on ``W``,

    g(lam) = sum(lam) - (p - 1) sum_s (a_s / p)^(p / (p - 1)),    a = sum_gamma lam_gamma 1_gamma,

whose maximizer gives ``rho = (a / p)^(1 / (p - 1))``. A node-weighted shortest-path query
either certifies ``rho`` feasible for the whole family or returns violated curves for ``W``.
Any ``lam >= 0`` gives ``g(lam) <= mod_p`` and any ``rho`` gives ``V_p(rho) / L^p >= mod_p``,
so every result carries a valid bracket.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.optimize import minimize
from scipy.sparse.linalg import minres

from .cover import Cover, CoverMap
from .curves import CombCurve, EmptyFamily, Family, ThroughPiece, crossing_witness, realize
from .geometry import InputError

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 10_000
DEFAULT_INNER_MAX_ITER = 100_000
TOL_INEQ = 1e-6
DENSE_LIMIT = 1500


class UnsupportedExponent(InputError):
    pass


@dataclass(frozen=True)
class AdmissibleMetric:
    rho: np.ndarray
    p: float

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        if self.p < 1:
            raise UnsupportedExponent(f"p must be >= 1, got {self.p}")
        if rho.ndim != 1 or np.any(rho < 0) or not np.all(np.isfinite(rho)):
            raise InputError("rho must be a finite nonnegative vector")
        if not np.any(rho > 0):
            raise InputError("rho vanishes identically (zero volume)")
        object.__setattr__(self, "rho", rho)

    @property
    def volume(self) -> float:
        return float(np.sum(self.rho**self.p))


def volume(rho, p: float) -> float:
    return float(np.sum(np.asarray(rho, dtype=float) ** p))


def modulus_of(metric: AdmissibleMetric, handle: Family) -> float:
    """``V_p(rho) / L_rho^p``: an upper bound on the modulus for every ``rho``."""
    try:
        _, L = handle.shortest(metric.rho)
    except EmptyFamily:
        return 0.0
    if L <= 0:
        return math.inf
    return metric.volume / L**metric.p


@dataclass
class ModulusResult:
    p: float
    value: float
    lower_bound: float
    upper_bound: float
    rho_opt: np.ndarray = field(repr=False)
    L: float
    active: list[CombCurve] = field(repr=False)
    multipliers: np.ndarray = field(repr=False)
    kkt_residual: float
    iterations: int
    converged: bool
    status: str = "converged"

    @property
    def gap(self) -> float:
        if self.upper_bound == 0:
            return 0.0
        return (self.upper_bound - self.lower_bound) / self.upper_bound

    @property
    def dual_sum(self) -> float:
        """``(1/p) sum lam``; equals the modulus at an optimum."""
        return float(self.multipliers.sum() / self.p)

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "value": self.value,
            "lower": self.lower_bound,
            "upper": self.upper_bound,
            "L": self.L,
            "kkt_residual": self.kkt_residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "status": self.status,
            "active": [list(c.chain) for c in self.active],
            "multipliers": self.multipliers.tolist(),
        }

    def csv_fields(self) -> list:
        return [self.p, self.value, self.lower_bound, self.upper_bound, self.kkt_residual,
                self.iterations]


def _dual_objective(lam, N, p):
    a = N.T @ lam
    q = p / (p - 1)
    return float(lam.sum() - (p - 1) * np.sum((a / p) ** q))


def _rho_from(lam, N, p):
    a = np.maximum(N.T @ lam, 0.0)
    return (a / p) ** (1.0 / (p - 1)), a


def _inner_solve(N: sp.csr_matrix, lam0: np.ndarray, p: float, scale: float,
                 max_iter: int) -> np.ndarray:
    """Maximize the dual over ``lam >= 0`` on the working set ``N`` (rows are curves)."""
    q = p / (p - 1)
    s_q = scale ** (q - 1)
    Nt = N.T.tocsr()

    # variables mu = lam / scale keep the problem O(1) for every cover size
    def f(mu):
        a = Nt @ mu
        r = (a / p) ** (1.0 / (p - 1))
        val = -mu.sum() + (p - 1) * s_q * np.sum((a / p) ** q)
        grad = -1.0 + s_q * (N @ r)
        return val, grad

    mu0 = lam0 / scale
    res = minimize(
        f, mu0, jac=True, method="L-BFGS-B",
        bounds=[(0.0, None)] * len(mu0),
        options={"maxiter": max_iter, "maxfun": 2 * max_iter, "ftol": 1e-15, "gtol": 1e-13,
                 "maxcor": 20},
    )
    mu = np.maximum(res.x, 0.0)
    return _active_set_polish(N, mu * scale, p)


def _active_set_polish(N: sp.csr_matrix, lam: np.ndarray, p: float, rounds: int = 10) -> np.ndarray:
    """Newton on the active set, re-admitting zero-multiplier curves that are still short."""
    for _ in range(rounds):
        lam = _newton_polish(N, lam, p)
        rho, _ = _rho_from(lam, N, p)
        short = (lam == 0) & (N @ rho < 1 - 1e-12)
        if not short.any() or not (lam > 0).any():
            break
        lam = lam.copy()
        lam[short] = 1e-3 * lam[lam > 0].mean()
    return lam


def _newton_polish(N: sp.csr_matrix, lam: np.ndarray, p: float, steps: int = 20) -> np.ndarray:
    """Newton on ``l_gamma(rho(lam)) = 1`` over curves with ``lam > 0``."""
    for _ in range(steps):
        act = np.flatnonzero(lam > 0)
        if act.size == 0:
            return lam
        NA = N[act]
        rho, a = _rho_from(lam, N, p)
        F = NA @ rho - 1.0
        if np.max(np.abs(F)) < 1e-14:
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            drho = np.where(a > 0, rho / ((p - 1) * a), 0.0)
        J = (NA.multiply(drho) @ NA.T).tocsr()
        step = _least_squares_step(J, -F)
        t = 1.0
        base = np.max(np.abs(F))
        improved = False
        for _ in range(30):
            trial = lam.copy()
            trial[act] = np.maximum(lam[act] + t * step, 0.0)
            r_t, _ = _rho_from(trial, N, p)
            Ft = N[act] @ r_t - 1.0
            if np.max(np.abs(Ft)) < (1 - 0.25 * t) * base:
                lam = trial
                improved = True
                break
            t *= 0.5
        if not improved:
            break
    return lam


def _least_squares_step(J: sp.csr_matrix, rhs: np.ndarray) -> np.ndarray:
    # rows of the working set are often dependent, so J may be singular
    if J.nnz == J.shape[0]:
        d = J.diagonal()
        return np.divide(rhs, d, out=np.zeros_like(rhs), where=d > 0)
    if J.shape[0] <= DENSE_LIMIT:
        return scipy.linalg.lstsq(J.toarray(), rhs, cond=1e-13)[0]
    return minres(J, rhs, rtol=1e-12, maxiter=500)[0]


def _support_matrix(supports: list[np.ndarray], n: int) -> sp.csr_matrix:
    if not supports:
        return sp.csr_matrix((0, n))
    indptr = np.cumsum([0] + [len(s) for s in supports])
    indices = np.concatenate(supports)
    return sp.csr_matrix((np.ones(len(indices)), indices, indptr), shape=(len(supports), n))


def _empty_result(p: float, n: int) -> ModulusResult:
    return ModulusResult(p, 0.0, 0.0, 0.0, np.zeros(n), math.inf, [], np.zeros(0), 0.0, 0,
                         True, "empty")


def solve(handle: Family, p: float, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
          inner_max_iter: int = DEFAULT_INNER_MAX_ITER) -> ModulusResult:
    """Combinatorial ``p``-modulus of ``handle`` by constraint generation.

    ``value`` is the midpoint of the certified bracket: ``upper_bound = V_p(rho_opt)`` with
    ``rho_opt`` normalized to ``L = 1``, ``lower_bound`` the dual value of the multipliers.
    The run is converged once the relative gap is <= tol; curves shorter than ``1 - tol/10``
    enter the working set until then.
    """
    if p <= 1:
        raise UnsupportedExponent(f"solve needs p > 1 (strict convexity), got {p}")
    if tol <= 0:
        raise InputError("tol must be positive")
    n = handle.cover.n_pieces
    try:
        _, L0 = handle.shortest(np.ones(n))
    except EmptyFamily:
        return _empty_result(p, n)
    rho = np.full(n, 1.0 / L0)
    scale = p * (1.0 / L0) ** (p - 1)
    threshold = 1.0 - 0.1 * tol

    supports: list[np.ndarray] = []
    curves: list[CombCurve] = []
    known: set = set()
    lam = np.zeros(0)
    N = _support_matrix([], n)
    converged = False
    stalls = 0
    it = 0
    for it in range(1, max_iter + 1):
        _, L = handle.shortest(rho)
        if supports:
            upper = volume(rho, p) / L**p if L > 0 else math.inf
            lower = _dual_objective(lam, N, p)
            if math.isfinite(upper) and upper - lower <= tol * upper:
                converged = True
                break
        cut = threshold if supports else L * (1 + 1e-9) + 1e-300
        new = [c for c in handle.candidates(rho, cut) if c.support not in known]
        if not new:
            # every short curve is already in W: the subproblem needs a sharper solve
            stalls += 1
            if stalls > 3:
                break
            lam = _inner_solve(N, lam, p, scale, inner_max_iter)
            rho, _ = _rho_from(lam, N, p)
            continue
        stalls = 0
        for c in new:
            known.add(c.support)
            curves.append(c)
            supports.append(c.support_array)
        N = _support_matrix(supports, n)
        if lam.size == 0:
            cover_count = np.asarray(N.sum(axis=0)).ravel()
            lam0 = np.full(len(supports), scale / max(1.0, cover_count.max()))
        else:
            lam0 = np.concatenate([lam, np.zeros(len(supports) - lam.size)])
        lam = _inner_solve(N, lam0, p, scale, inner_max_iter)
        rho, _ = _rho_from(lam, N, p)
        if not np.any(rho > 0):
            rho = np.full(n, 1.0 / L0)

    _, L = handle.shortest(rho)
    upper = volume(rho, p) / L**p if L > 0 else math.inf
    lower = _dual_objective(lam, N, p) if lam.size else 0.0
    return _finish(p, rho, L, lam, N, curves, upper, lower, it, converged)


def _finish(p, rho, L, lam, N, curves, upper, lower, iterations, converged) -> ModulusResult:
    rho_opt = rho / L if L > 0 else rho
    lam_n = lam / L ** (p - 1) if L > 0 else lam
    keep = np.flatnonzero(lam_n > 0)
    active = [curves[i] for i in keep]
    mult = lam_n[keep]
    kkt = _kkt_residual(p, rho_opt, N[keep] if len(keep) else N[:0], mult)
    lower = min(lower, upper)
    return ModulusResult(
        p=p,
        value=0.5 * (upper + max(lower, 0.0)),
        lower_bound=max(lower, 0.0),
        upper_bound=upper,
        rho_opt=rho_opt,
        L=float(L),
        active=active,
        multipliers=mult,
        kkt_residual=kkt,
        iterations=iterations,
        converged=converged,
        status="converged" if converged else "nonconverged",
    )


def _kkt_residual(p, rho, NA, mult) -> float:
    stationarity = np.abs(p * rho ** (p - 1) - NA.T @ mult) if NA.shape[0] else p * rho ** (p - 1)
    slack = np.abs(mult * (NA @ rho - 1.0)) if NA.shape[0] else np.zeros(1)
    return float(stationarity.max(initial=0.0) + slack.max(initial=0.0))


# ---------------------------------------------------------------- certificates


@dataclass(frozen=True)
class BeurlingReport:
    feasibility: float
    stationarity: float
    sign: float
    tightness: float
    identity: float

    @property
    def max_violation(self) -> float:
        return max(self.feasibility, self.stationarity, self.sign, self.tightness, self.identity)


def verify_beurling(result: ModulusResult, handle: Family) -> BeurlingReport:
    """Recompute every optimality condition for ``result`` from scratch; never raises."""
    p, rho, lam = result.p, np.asarray(result.rho_opt, dtype=float), result.multipliers
    n = handle.cover.n_pieces
    try:
        _, L = handle.shortest(rho)
    except EmptyFamily:
        return BeurlingReport(0.0, 0.0, 0.0, 0.0, 0.0)
    NA = _support_matrix([c.support_array for c in result.active], n)
    stat = float(np.max(np.abs(p * rho ** (p - 1) - NA.T @ lam))) if n else 0.0
    lengths = NA @ rho
    big = lam > 1e-9 * lam.max() if lam.size else np.zeros(0, dtype=bool)
    tight = float(np.max(np.abs(lengths[big] - L))) if big.any() else (0.0 if lam.size else 1.0)
    value = volume(rho, p) / L**p if L > 0 else math.inf
    ident = abs(value - lam.sum() / p) / value if value > 0 else 0.0
    return BeurlingReport(
        feasibility=max(0.0, 1.0 - L),
        stationarity=stat,
        sign=float(max(0.0, -lam.min())) if lam.size else 0.0,
        tightness=tight,
        identity=float(ident),
    )


# ---------------------------------------------------------------- modulus laws


@dataclass(frozen=True)
class InequalityVerdict:
    status: str  # "pass" | "fail" | "inconclusive" | "inapplicable"
    lhs: float
    rhs: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "pass"


def _leq(lhs: float, rhs: float, tol: float = TOL_INEQ) -> bool:
    return lhs <= rhs + tol * max(1.0, abs(rhs))


def check_subadditivity(handles, union_handle: Family, p: float, tol_ineq: float = TOL_INEQ,
                        **solve_kw) -> InequalityVerdict:
    """``mod(union) <= sum mod(parts)``, comparing the union's lower bound with the upper sum."""
    parts = [solve(h, p, **solve_kw) for h in handles]
    union = solve(union_handle, p, **solve_kw)
    if not all(r.converged for r in parts + [union]):
        return InequalityVerdict("inconclusive", union.lower_bound,
                                 sum(r.upper_bound for r in parts), "nonconverged solve")
    lhs, rhs = union.lower_bound, sum(r.upper_bound for r in parts)
    return InequalityVerdict("pass" if _leq(lhs, rhs, tol_ineq) else "fail", lhs, rhs)


def check_monotonicity(sub: Family, sup: Family, p: float, tol_ineq: float = TOL_INEQ,
                       **solve_kw) -> InequalityVerdict:
    """``mod(sub) <= mod(sup)`` for ``sub`` a subfamily of ``sup`` (membership checked)."""
    witness = _first_not_in(sub, sup)
    if witness is not None:
        return InequalityVerdict("inapplicable", math.nan, math.nan,
                                 f"curve {witness.chain} is not in the larger family")
    return _compare(sub, sup, p, tol_ineq, **solve_kw)


def check_overcurve(g1: Family, g2: Family, p: float, tol_ineq: float = TOL_INEQ,
                    **solve_kw) -> InequalityVerdict:
    """``mod(g1) <= mod(g2)`` when every curve of ``g1`` contains a curve of ``g2``."""
    for c in _sample(g1, solve(g1, p, **solve_kw)):
        if not _contains_curve_of(g2, c.support_array):
            return InequalityVerdict("inapplicable", math.nan, math.nan,
                                     f"curve {c.chain} contains no curve of the second family")
    return _compare(g1, g2, p, tol_ineq, **solve_kw)


def _compare(a: Family, b: Family, p, tol_ineq, **solve_kw) -> InequalityVerdict:
    ra, rb = solve(a, p, **solve_kw), solve(b, p, **solve_kw)
    if not (ra.converged and rb.converged):
        return InequalityVerdict("inconclusive", ra.lower_bound, rb.upper_bound, "nonconverged")
    return InequalityVerdict("pass" if _leq(ra.lower_bound, rb.upper_bound, tol_ineq) else "fail",
                             ra.lower_bound, rb.upper_bound)


def _first_not_in(sub: Family, sup: Family, max_support: int = 8):
    curves = list(getattr(sub, "curves", [])) or sub.enumerate(max_support)
    for c in curves:
        if not sup.contains(c):
            return c
    return None


def _contains_curve_of(fam: Family, support: np.ndarray) -> bool:
    """Whether ``fam`` has a curve inside the piece set ``support``."""
    w = np.ones(fam.cover.n_pieces)
    w[support] = 0.0
    try:
        _, l = fam.shortest(w)
    except EmptyFamily:
        return False
    return l == 0


def _sample(fam: Family, result: ModulusResult | None = None, max_support: int | None = None,
            limit: int = 200) -> list[CombCurve]:
    out = list(result.active) if result is not None else []
    if max_support is None:
        try:
            _, L = fam.shortest(np.ones(fam.cover.n_pieces))
        except EmptyFamily:
            return out
        max_support = int(round(L)) + 1
    if fam.cover.n_pieces <= 64:
        try:
            out += fam.enumerate(max_support)[:limit]
        except InputError:
            pass
    return out


def dim_compare_bound(mod_p_val: float, sup_point_mod_q: float, p: float, q: float,
                      eps: float) -> float:
    """``(eps^(q-p) + sup / eps^p) * mod_p``: an upper bound for ``mod_q``."""
    if not 1 <= p <= q:
        raise InputError("need 1 <= p <= q")
    if eps <= 0:
        raise InputError("eps must be positive")
    return (eps ** (q - p) + sup_point_mod_q / eps**p) * mod_p_val


def comb_dim_eps(sup_point_mod_q: float, p: float) -> float:
    return sup_point_mod_q ** (1.0 / (2 * p))


@dataclass(frozen=True)
class PointBound:
    eta: float
    expectation: float
    reach: int


def point_family_bound(cover: Cover, s0: int, delta: float, q: float) -> PointBound:
    """Upper bound on the ``q``-modulus of long curves through ``s0``.

    Test metric ``rho(s) = diam(s) / dist(x0, s)`` on pieces with ``0 < dist <= delta/2``
    (distances between centers), zero elsewhere, evaluated on the chains from ``s0`` that
    reach hop distance ``delta / (2 step)``, ``step`` the longest center-to-center move.
    """
    if q <= 1:
        raise UnsupportedExponent("q must exceed 1")
    x0 = cover.centers[s0]
    dist = np.asarray(cover.distance(x0, cover.centers), dtype=float)
    mv = cover.moves
    step = float(np.max(cover.distance(cover.centers[mv[:, 0]], cover.centers[mv[:, 1]])))
    reach = int(math.floor(delta / (2 * step) + 1e-9))
    r0 = float(cover.radius[s0])
    R = delta / 2
    expectation = 1.0 / math.log(R / r0) ** (q - 1) if R > r0 else math.inf
    if reach < 1:
        return PointBound(math.inf, expectation, reach)
    rho = np.zeros(cover.n_pieces)
    ring = (dist <= R) & (np.arange(cover.n_pieces) != s0) & (dist > 0)
    rho[ring] = 2 * cover.radius[ring] / dist[ring]
    fam = realize(ThroughPiece(s0, reach + 1), cover)
    if fam.is_empty():
        return PointBound(0.0, expectation, reach)
    if not np.any(rho > 0):
        return PointBound(math.inf, expectation, reach)
    return PointBound(modulus_of(AdmissibleMetric(rho, q), fam), expectation, reach)


@dataclass(frozen=True)
class TransportVerdict:
    status: str
    degree: int
    mod_source: ModulusResult
    mod_target: ModulusResult
    upper_rule: str  # mod' <= d mod: "pass" | "fail" | "inapplicable"
    lower_rule: str  # mod' >= mod / d^p
    metrics_ok: bool
    witness: tuple | None = None

    @property
    def passed(self) -> bool:
        return self.status == "pass"


def transport_check(cmap: CoverMap, fam_source: Family, fam_target: Family, p: float,
                    tol_ineq: float = TOL_INEQ, **solve_kw) -> TransportVerdict:
    """Check both transformation rules for a cover map of degree ``d``.

    Hypotheses are tested on the active curves of both solves and on enumerated short curves.
    """
    d = cmap.degree
    f = cmap.piece_map
    rs = solve(fam_source, p, **solve_kw)
    rt = solve(fam_target, p, **solve_kw)
    witness = None

    hyp_upper = True
    for c in _sample(fam_source, rs):
        if not _contains_curve_of(fam_target, np.unique(f[c.support_array])):
            hyp_upper, witness = False, ("image contains no target curve", c.chain)
            break
    hyp_lower = True
    for c in _sample(fam_target, rt):
        pre = np.flatnonzero(np.isin(f, c.support_array))
        if not _contains_curve_of(fam_source, pre):
            hyp_lower, witness = False, ("no source curve maps into", c.chain)
            break
    if not (hyp_upper or hyp_lower):
        return TransportVerdict("inapplicable", d, rs, rt, "inapplicable", "inapplicable", False,
                                witness)
    if not (rs.converged and rt.converged):
        return TransportVerdict("inconclusive", d, rs, rt, "inconclusive", "inconclusive", False,
                                witness)

    metrics_ok = True
    upper_rule = lower_rule = "inapplicable"
    if hyp_upper:
        upper_rule = "pass" if _leq(rs.lower_bound, d * rt.upper_bound, tol_ineq) else "fail"
        pulled = rt.rho_opt[f]
        _, Lp = fam_source.shortest(pulled)
        metrics_ok &= Lp >= 1 - tol_ineq
        metrics_ok &= _leq(volume(pulled, p), d * volume(rt.rho_opt, p), tol_ineq)
    if hyp_lower:
        lower_rule = "pass" if _leq(rt.lower_bound / d**p, rs.upper_bound, tol_ineq) else "fail"
        pushed = np.bincount(f, weights=rs.rho_opt**p, minlength=cmap.target.n_pieces) ** (1 / p)
        _, Lt = fam_target.shortest(pushed)
        _, Ls = fam_source.shortest(rs.rho_opt)
        metrics_ok &= Lt >= Ls / d * (1 - tol_ineq)
        metrics_ok &= abs(volume(pushed, p) - volume(rs.rho_opt, p)) <= tol_ineq * volume(
            rs.rho_opt, p)
    ok = "fail" not in (upper_rule, lower_rule) and metrics_ok
    return TransportVerdict("pass" if ok else "fail", d, rs, rt, upper_rule, lower_rule,
                            bool(metrics_ok), witness)


@dataclass(frozen=True)
class DualityVerdict:
    status: str
    product: float
    mod: ModulusResult | None
    mod_perp: ModulusResult | None
    witness: tuple | None = None

    @property
    def passed(self) -> bool:
        return self.status == "pass"


def duality_product(fam: Family, fam_perp: Family, tol: float = TOL_INEQ,
                    **solve_kw) -> DualityVerdict:
    """``mod_2(G) * mod_2(G_perp) <= 1`` for families whose curves pairwise share a piece.

    The crossing hypothesis is checked for every active curve of either solve against the
    whole other family.
    """
    r = solve(fam, 2.0, **solve_kw)
    rp = solve(fam_perp, 2.0, **solve_kw)
    w = crossing_witness(fam_perp, fam, rp.active) or crossing_witness(fam, fam_perp, r.active)
    if w is not None:
        return DualityVerdict("inapplicable", math.nan, r, rp, (w[0].chain, w[1].chain))
    if not (r.converged and rp.converged):
        return DualityVerdict("inconclusive", r.value * rp.value, r, rp)
    product = r.upper_bound * rp.upper_bound
    return DualityVerdict("pass" if product <= 1 + tol else "fail", product, r, rp)
