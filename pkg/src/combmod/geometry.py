"""Integer matrices, spectral classes, the parabolic metric and metric nets on the torus."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np


class InputError(ValueError):
    """Input rejected before any computation (singular matrix, bad literal, budget)."""


class NotExpandingError(InputError):
    """The matrix has an eigenvalue of modulus <= 1."""


@dataclass(frozen=True)
class IntMatrix2:
    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        for v in (self.a, self.b, self.c, self.d):
            if int(v) != v:
                raise InputError(f"matrix entries must be integers, got {v!r}")

    @classmethod
    def parse(cls, text: str) -> "IntMatrix2":
        """Parse the literal ``"a,b;c,d"``."""
        try:
            rows = [r.split(",") for r in text.strip().split(";")]
            if len(rows) != 2 or any(len(r) != 2 for r in rows):
                raise ValueError
            (a, b), (c, d) = [[int(v) for v in r] for r in rows]
        except ValueError:
            raise InputError(f"cannot parse matrix literal {text!r}; expected 'a,b;c,d'") from None
        return cls(a, b, c, d)

    @classmethod
    def diag(cls, a: int, d: int) -> "IntMatrix2":
        return cls(a, 0, 0, d)

    @property
    def det(self) -> int:
        return self.a * self.d - self.b * self.c

    @property
    def trace(self) -> int:
        return self.a + self.d

    def is_diagonal(self) -> bool:
        return self.b == 0 and self.c == 0

    def to_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=float)

    def power(self, n: int) -> tuple[tuple[int, int], tuple[int, int]]:
        """Exact integer power as nested tuples."""
        m = ((1, 0), (0, 1))
        base = ((self.a, self.b), (self.c, self.d))
        for _ in range(n):
            m = _matmul(m, base)
        return m

    def literal(self) -> str:
        return f"{self.a},{self.b};{self.c},{self.d}"

    def __neg__(self) -> "IntMatrix2":
        return IntMatrix2(-self.a, -self.b, -self.c, -self.d)


def _matmul(x, y):
    return (
        (x[0][0] * y[0][0] + x[0][1] * y[1][0], x[0][0] * y[0][1] + x[0][1] * y[1][1]),
        (x[1][0] * y[0][0] + x[1][1] * y[1][0], x[1][0] * y[0][1] + x[1][1] * y[1][1]),
    )


class Tag(str, Enum):
    NOT_EXPANDING = "NotExpanding"
    MULTIPLE_OF_IDENTITY = "MultipleOfIdentity"
    COMPLEX_PAIR = "ComplexPair"
    REAL_DISTINCT = "RealDistinct"
    REAL_REPEATED_NON_SEMISIMPLE = "RealRepeatedNonSemisimple"


@dataclass(frozen=True)
class SpectralClass:
    tag: Tag
    lam: float
    mu: float


def classify(A: IntMatrix2) -> SpectralClass:
    """Spectral class of ``A`` with eigenvalue moduli ``lam <= mu``.

    Expansion is decided exactly from the characteristic polynomial
    ``P(x) = x^2 - t x + D``: for real roots, some root lies in [-1, 1] iff
    ``P(1) P(-1) <= 0`` or both ``P(+-1) >= 0`` with the vertex ``t/2`` in [-1, 1].
    """
    t, D = A.trace, A.det
    if D == 0:
        raise InputError(f"singular matrix {A.literal()}")
    disc = t * t - 4 * D
    if disc < 0:
        mod = math.sqrt(D)
        tag = Tag.COMPLEX_PAIR if D > 1 else Tag.NOT_EXPANDING
        return SpectralClass(tag, mod, mod)
    if disc == 0:
        mod = abs(t) / 2
        if abs(t) <= 2:
            tag = Tag.NOT_EXPANDING
        elif A.b == 0 and A.c == 0 and A.a == A.d:
            tag = Tag.MULTIPLE_OF_IDENTITY
        else:
            tag = Tag.REAL_REPEATED_NON_SEMISIMPLE
        return SpectralClass(tag, mod, mod)
    p_plus, p_minus = 1 - t + D, 1 + t + D
    root_in_unit = p_plus * p_minus <= 0 or (p_plus >= 0 and p_minus >= 0 and abs(t) <= 2)
    s = math.sqrt(disc)
    lam, mu = sorted((abs((t - s) / 2), abs((t + s) / 2)))
    return SpectralClass(Tag.NOT_EXPANDING if root_in_unit else Tag.REAL_DISTINCT, lam, mu)


def confdim_oracle(cls: SpectralClass) -> tuple[float, bool]:
    """Closed-form Ahlfors-regular conformal dimension and whether it is attained."""
    if cls.tag is Tag.NOT_EXPANDING:
        raise NotExpandingError("not expanding: no conformal gauge (the map is not topologically cxc)")
    if cls.tag in (Tag.MULTIPLE_OF_IDENTITY, Tag.COMPLEX_PAIR):
        return 2.0, True
    if cls.tag is Tag.REAL_DISTINCT:
        return 1.0 + math.log(cls.mu) / math.log(cls.lam), True
    return 2.0, False


def _unit_eigvec(A: IntMatrix2, r: float) -> tuple[float, float]:
    if A.b != 0:
        v = (float(A.b), r - A.a)
    elif A.c != 0:
        v = (r - A.d, float(A.c))
    else:
        v = (1.0, 0.0) if abs(A.a - r) <= abs(A.d - r) else (0.0, 1.0)
    n = math.hypot(*v)
    v = (v[0] / n, v[1] / n)
    first = v[0] if v[0] != 0 else v[1]
    return v if first > 0 else (-v[0], -v[1])


def eigenbasis(A: IntMatrix2) -> tuple[tuple[float, float], tuple[float, float]]:
    """Basis (as a matrix with eigenvector columns v_lam, v_mu) for a RealDistinct matrix."""
    t, D = A.trace, A.det
    s = math.sqrt(t * t - 4 * D)
    r1, r2 = sorted(((t - s) / 2, (t + s) / 2), key=abs)
    if abs(r1) == abs(r2):
        return ((1.0, 0.0), (0.0, 1.0))
    v1, v2 = _unit_eigvec(A, r1), _unit_eigvec(A, r2)
    return ((v1[0], v2[0]), (v1[1], v2[1]))


IDENTITY = ((1.0, 0.0), (0.0, 1.0))


@dataclass(frozen=True)
class ParabolicMetric:
    """``d = |du_1| + |du_2|^alpha`` in coordinates ``u`` of the (eigen)basis."""

    alpha: float
    basis: tuple = IDENTITY
    lattice_search_radius: int = 2

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise InputError(f"alpha must lie in (0, 1], got {self.alpha}")
        if abs(np.linalg.det(np.asarray(self.basis, dtype=float))) < 1e-12:
            raise InputError("degenerate basis")

    @cached_property
    def _binv(self) -> np.ndarray:
        return np.linalg.inv(np.asarray(self.basis, dtype=float))

    @cached_property
    def _offsets(self) -> np.ndarray:
        R = self.lattice_search_radius
        k = np.arange(-R, R + 1, dtype=float)
        return np.stack(np.meshgrid(k, k, indexing="ij"), axis=-1).reshape(-1, 2)

    @property
    def is_identity(self) -> bool:
        return np.allclose(np.asarray(self.basis), np.eye(2), rtol=0, atol=0)

    @property
    def basis_det(self) -> float:
        return abs(float(np.linalg.det(np.asarray(self.basis, dtype=float))))

    def coords(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return v @ self._binv.T

    def norm(self, delta) -> np.ndarray:
        """Distance from 0 to ``delta`` in the plane."""
        u = self.coords(delta)
        return np.abs(u[..., 0]) + np.abs(u[..., 1]) ** self.alpha

    def torus_norm(self, delta) -> np.ndarray:
        delta = np.asarray(delta, dtype=float)
        delta = delta - np.round(delta)
        if self.is_identity:
            return np.abs(delta[..., 0]) + np.abs(delta[..., 1]) ** self.alpha
        shifted = delta[..., None, :] + self._offsets
        return self.norm(shifted).min(axis=-1)

    def distance(self, x, y, ambient: str = "plane"):
        delta = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
        if ambient == "plane":
            out = self.norm(delta)
        elif ambient == "torus":
            out = self.torus_norm(delta)
        else:
            raise InputError(f"unknown ambient {ambient!r}")
        return float(out) if np.ndim(out) == 0 else out

    def torus_diameter(self) -> float:
        if self.is_identity:
            return 0.5 + 0.5**self.alpha
        g = np.linspace(-0.5, 0.5, 201)
        pts = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
        return float(self.torus_norm(pts).max())


def metric_for_matrix(A: IntMatrix2) -> ParabolicMetric:
    """The minimal metric for RealDistinct matrices; the l1 metric (alpha = 1) otherwise."""
    cls = classify(A)
    if cls.tag is Tag.REAL_DISTINCT:
        return ParabolicMetric(math.log(cls.lam) / math.log(cls.mu), eigenbasis(A))
    return ParabolicMetric(1.0)


def dilation_check(A: IntMatrix2, m: ParabolicMetric, samples: int = 1000, seed: int = 0) -> float:
    """Max relative deviation of ``d(Av, Aw) / d(v, w)`` from the smaller eigenvalue modulus."""
    cls = classify(A)
    if cls.tag not in (Tag.REAL_DISTINCT, Tag.MULTIPLE_OF_IDENTITY):
        raise InputError(f"{cls.tag.value} matrices do not act as dilations of a parabolic metric")
    rng = np.random.default_rng(seed)
    v = rng.random((samples, 2))
    w = rng.random((samples, 2))
    M = A.to_array()
    d0 = m.norm(w - v)
    d1 = m.norm((w - v) @ M.T)
    keep = d0 > 0
    ratio = d1[keep] / d0[keep]
    return float(np.max(np.abs(ratio - cls.lam) / cls.lam))


def ball_measure(m: ParabolicMetric, x, r: float) -> float:
    """Lebesgue area of the open plane ball; independent of the center ``x``."""
    if r <= 0:
        raise InputError("radius must be positive")
    e = 1.0 + 1.0 / m.alpha
    return 4.0 * r**e / e * m.basis_det


def measure_torus_ball(m: ParabolicMetric, x, r: float, resolution: int = 64) -> float:
    """Area of the torus ball ``B(x, r)`` by midpoint grid counting.

    Counts over the parabolic bounding box ``|u_1| < r, |u_2| < r^(1/alpha)`` when that box
    embeds in the torus, and over the whole torus otherwise.
    """
    x = np.asarray(x, dtype=float)
    B = np.asarray(m.basis, dtype=float)
    half = np.array([r, r ** (1.0 / m.alpha)])
    extent = 2 * np.abs(B) @ half
    t = (np.arange(resolution) + 0.5) / resolution
    if np.all(extent < 1.0):
        grid = np.stack(np.meshgrid(t, t, indexing="ij"), axis=-1).reshape(-1, 2)
        u = (2 * grid - 1) * half
        y = x + u @ B.T
        area = 4 * half[0] * half[1] * m.basis_det
    else:
        grid = np.stack(np.meshgrid(t, t, indexing="ij"), axis=-1).reshape(-1, 2)
        y = grid
        area = 1.0
    inside = m.torus_norm(y - x) < r
    return float(inside.mean() * area)


@dataclass(frozen=True)
class AhlforsEstimate:
    ratio_min: float
    ratio_max: float
    threshold: float

    @property
    def spread(self) -> float:
        return self.ratio_max / self.ratio_min

    @property
    def regular(self) -> bool:
        return self.spread <= self.threshold


def ahlfors_estimate(
    m: ParabolicMetric,
    Q: float,
    radii,
    samples: int = 16,
    seed: int = 0,
    threshold: float = 16.0,
    resolution: int = 64,
) -> AhlforsEstimate:
    if Q <= 0:
        raise InputError("Q must be positive")
    rng = np.random.default_rng(seed)
    centers = rng.random((samples, 2))
    ratios = [
        measure_torus_ball(m, x, r, resolution) / r**Q for x in centers for r in radii
    ]
    return AhlforsEstimate(min(ratios), max(ratios), threshold)


@dataclass(frozen=True)
class Net:
    points: np.ndarray = field(repr=False)
    epsilon: float
    pitch: tuple[float, float]
    # metric length of one diagonal step of the candidate grid
    pitch_metric: float

    def __len__(self) -> int:
        return len(self.points)


NET_CANDIDATE_BUDGET = 4_000_000


def _step_for(m: ParabolicMetric, axis: int, target: float) -> float:
    """Largest torus step along ``axis`` whose metric length is <= target (bisection)."""
    e = np.zeros(2)
    e[axis] = 1.0
    lo, hi = 0.0, 1.0
    if m.norm(hi * e) <= target:
        return hi
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if m.norm(mid * e) <= target:
            lo = mid
        else:
            hi = mid
    return lo


def maximal_net(m: ParabolicMetric, epsilon: float, budget: int = NET_CANDIDATE_BUDGET) -> Net:
    """Greedy maximal ``epsilon``-separated set over a raster of candidate points.

    Candidates are cell midpoints of an odd-by-odd grid whose diagonal step has metric
    length <= epsilon/4, visited in row-major order; a candidate joins the net when every
    earlier net point is at distance >= epsilon.
    """
    if epsilon <= 0:
        raise InputError("epsilon must be positive")
    h = [_step_for(m, ax, epsilon / 8) for ax in (0, 1)]
    counts = [max(1, math.ceil(1.0 / hi)) for hi in h]
    counts = [c if c % 2 else c + 1 for c in counts]
    total = counts[0] * counts[1]
    if total > budget:
        raise InputError(
            f"epsilon={epsilon:g} needs {total} candidates, above the budget {budget}; "
            f"choose epsilon with candidate count <= {budget}"
        )
    n1, n2 = counts
    pitch = (1.0 / n1, 1.0 / n2)
    pitch_metric = float(m.norm(np.array(pitch)))

    # torus-coordinate half extents of the metric ball
    B = np.asarray(m.basis, dtype=float)
    ext = np.abs(B) @ np.array([epsilon, epsilon ** (1.0 / m.alpha)])
    w1 = min(n1 // 2, int(math.ceil(ext[0] * n1)) + 1)
    w2 = min(n2 // 2, int(math.ceil(ext[1] * n2)) + 1)
    di = np.arange(-w1, w1 + 1)
    dj = np.arange(-w2, w2 + 1)
    DI, DJ = np.meshgrid(di, dj, indexing="ij")
    DI, DJ = DI.ravel(), DJ.ravel()
    # window offsets whose candidates lie within epsilon of the window center
    dist = m.torus_norm(np.stack([DI * pitch[0], DJ * pitch[1]], axis=-1))
    near = dist < epsilon
    DI, DJ = DI[near], DJ[near]

    blocked = np.zeros((n1, n2), dtype=bool)
    flat = blocked.reshape(-1)
    chosen = []
    pos = 0
    while pos < total:
        free = np.flatnonzero(~flat[pos:])
        if free.size == 0:
            break
        idx = pos + int(free[0])
        i, j = divmod(idx, n2)
        chosen.append((i, j))
        blocked[(i + DI) % n1, (j + DJ) % n2] = True
        pos = idx + 1
    pts = np.array([((i + 0.5) * pitch[0], (j + 0.5) * pitch[1]) for i, j in chosen])
    return Net(pts, epsilon, pitch, pitch_metric)
