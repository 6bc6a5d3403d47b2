import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from combmod.cover import fold_map, grid_cover, identity_map, self_cover_map, subdivision_cover
from combmod.curves import (
    CombCurve,
    Connector,
    Explicit,
    ThroughPiece,
    TorusLoop,
    UnionFamily,
    realize,
)
from combmod.geometry import InputError, IntMatrix2
from combmod.modulus import (
    AdmissibleMetric,
    ModulusResult,
    UnsupportedExponent,
    check_monotonicity,
    check_overcurve,
    check_subadditivity,
    comb_dim_eps,
    dim_compare_bound,
    duality_product,
    modulus_of,
    point_family_bound,
    solve,
    transport_check,
    verify_beurling,
)

from oracles import brute_modulus, loop_supports, side_supports

M = IntMatrix2.parse
LR = Connector("left", "right")
BT = Connector("bottom", "top")


def lr(k, periodic=(False, False)):
    return realize(LR, grid_cover(k, k, periodic))


# ---------------------------------------------------------------- modulus_of


def test_modulus_of_single_curve():
    fam = realize(Explicit.of([[0, 1, 2, 3]]), grid_cover(2, 2))
    assert modulus_of(AdmissibleMetric(np.full(4, 0.25), 2), fam) == pytest.approx(0.25)


def test_modulus_of_uniform_half():
    assert modulus_of(AdmissibleMetric(np.full(4, 0.5), 2), lr(2)) == pytest.approx(1.0)


def test_modulus_of_empty_and_zero_length():
    c = grid_cover(2, 2)
    assert modulus_of(AdmissibleMetric(np.ones(4), 2), realize(Explicit(()), c)) == 0
    rho = np.array([0.0, 0.0, 1.0, 1.0])
    assert modulus_of(AdmissibleMetric(rho, 2), lr(2)) == math.inf


@pytest.mark.parametrize("rho", [np.zeros(4), -np.ones(4), np.array([1, np.nan, 1, 1])])
def test_admissible_metric_rejects(rho):
    with pytest.raises(InputError):
        AdmissibleMetric(rho, 2)


@given(st.lists(st.floats(0.01, 10), min_size=9, max_size=9),
       st.integers(-20, 20), st.floats(1.1, 6))
def test_scale_invariance_exact(rho, k, p):
    rho = np.array(rho)
    fam = lr(3)
    assert modulus_of(AdmissibleMetric(2.0**k * rho, p), fam) == pytest.approx(
        modulus_of(AdmissibleMetric(rho, p), fam), rel=1e-13)


@given(st.lists(st.floats(0.01, 10), min_size=9, max_size=9), st.floats(0.01, 100))
def test_modulus_of_bounds_solve(rho, c):
    fam = lr(3)
    res = solve(fam, 2.0)
    assert modulus_of(AdmissibleMetric(c * np.array(rho), 2.0), fam) >= res.lower_bound - 1e-12


# ---------------------------------------------------------------- solve


def test_single_curve_solve():
    fam = realize(Explicit.of([[0, 1, 2, 3]]), grid_cover(2, 2))
    r = solve(fam, 2.0)
    assert r.converged
    assert r.value == pytest.approx(0.25, rel=1e-9)
    assert np.allclose(r.rho_opt, 0.25)
    assert len(r.active) == 1
    assert r.dual_sum == pytest.approx(0.25, rel=1e-9)
    assert verify_beurling(r, fam).max_violation <= 1e-10


def test_two_by_two_lr():
    r = solve(lr(2), 2.0)
    assert r.value == pytest.approx(1.0, rel=1e-7)
    assert np.allclose(r.rho_opt, 0.5, atol=1e-7)
    assert {c.support for c in r.active} == {frozenset({0, 1}), frozenset({2, 3})}


@pytest.mark.parametrize("k, p, value", [(3, 2.0, 1.0), (3, 3.0, 1 / 3), (4, 2.0, 1.0),
                                         (4, 4.0, 1 / 16), (6, 1.5, 6**0.5)])
def test_grid_lr_values(k, p, value):
    r = solve(lr(k), p)
    assert r.converged
    assert r.value == pytest.approx(value, rel=1e-6)
    assert r.lower_bound <= r.value <= r.upper_bound


def test_empty_family_solve():
    r = solve(realize(Explicit(()), grid_cover(2, 2)), 2.0)
    assert r.value == 0 and r.converged


def test_zero_support_curve_is_rejected():
    with pytest.raises(InputError):
        CombCurve(())


@pytest.mark.parametrize("p", [1.0, 0.5, -2.0])
def test_unsupported_exponent(p):
    with pytest.raises(UnsupportedExponent):
        solve(lr(2), p)


def test_nonconverged_keeps_valid_bracket():
    fam = realize(TorusLoop("e1"), subdivision_cover(M("2,0;0,4"), 3))
    r = solve(fam, 2.5, max_iter=1)
    assert not r.converged
    exact = solve(fam, 2.5)
    assert r.lower_bound <= exact.upper_bound * (1 + 1e-9)
    assert r.upper_bound >= exact.lower_bound * (1 - 1e-9)


def test_determinism():
    fam = realize(TorusLoop("e2"), subdivision_cover(M("3,1;1,3"), 2))
    a, b = solve(fam, 2.75), solve(fam, 2.75)
    assert a.to_json() == b.to_json()
    assert np.array_equal(a.rho_opt, b.rho_opt)


# ---------------------------------------------------------------- oracle equivalence


def _random_family(seed, n):
    rng = np.random.default_rng(seed)
    chains = []
    for _ in range(rng.integers(1, 9)):
        size = rng.integers(1, n + 1)
        chains.append(rng.choice(n, size=size, replace=False).tolist())
    return chains


@pytest.mark.parametrize("seed", range(12))
@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_oracle_explicit(seed, p):
    n = 8
    chains = _random_family(seed, n)
    fam = realize(Explicit.of(chains), grid_cover(2, 4))
    r = solve(fam, p)
    ref = brute_modulus(n, [frozenset(c) for c in chains], p)
    assert r.converged
    assert r.value == pytest.approx(ref, rel=1e-6)
    # the conic oracle itself is accurate to about 1e-8 relative
    assert r.lower_bound <= ref * (1 + 1e-7) and ref <= r.upper_bound * (1 + 1e-7)


@pytest.mark.parametrize("rows, cols", [(2, 2), (3, 3), (3, 4), (2, 5)])
@pytest.mark.parametrize("sides", [("left", "right"), ("bottom", "top")])
@pytest.mark.parametrize("p", [1.25, 2.0, 3.5])
def test_oracle_grids(rows, cols, sides, p):
    c = grid_cover(rows, cols)
    r = solve(realize(Connector(*sides), c), p)
    ref = brute_modulus(c.n_pieces, side_supports(c, *sides), p)
    assert r.value == pytest.approx(ref, rel=1e-6)


@pytest.mark.parametrize("lit, n", [("2,0;0,2", 1), ("2,0;0,4", 1), ("3,1;1,3", 1),
                                    ("0,-2;1,0", 1), ("0,-2;1,0", 2), ("2,1;0,2", 1),
                                    ("3,0;0,3", 1)])
@pytest.mark.parametrize("direction", ["e1", "e2"])
@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_oracle_torus(lit, n, direction, p):
    c = subdivision_cover(M(lit), n)
    assert c.n_pieces <= 12
    r = solve(realize(TorusLoop(direction), c), p)
    ref = brute_modulus(c.n_pieces, loop_supports(c, direction), p)
    assert r.value == pytest.approx(ref, rel=1e-6)


# ---------------------------------------------------------------- certificates


@pytest.mark.parametrize("k", [2, 3, 5])
@pytest.mark.parametrize("p", [1.5, 2.0, 4.0])
def test_beurling_on_grids(k, p):
    fam = lr(k)
    assert verify_beurling(solve(fam, p), fam).max_violation <= 1e-6


def test_beurling_rejects_fake():
    fam = lr(2)
    rows = [CombCurve((0, 1)), CombCurve((2, 3))]
    fake = ModulusResult(2.0, 2.0, 2.0, 2.0, np.ones(4), 2.0, rows, np.array([1.0, 1.0]),
                         0.0, 0, True)
    assert verify_beurling(fake, fam).max_violation >= 0.5


# ---------------------------------------------------------------- laws


def test_monotonicity_top_row():
    c = grid_cover(3, 3)
    top = realize(Explicit.of([[6, 7, 8]]), c)
    v = check_monotonicity(top, realize(LR, c), 2.0)
    assert v.passed
    assert v.lhs == pytest.approx(1 / 3, rel=1e-7) and v.rhs == pytest.approx(1.0, rel=1e-7)


def test_monotonicity_detects_non_subfamily():
    c = grid_cover(3, 3)
    col = realize(Explicit.of([[0, 3, 6]]), c)
    assert check_monotonicity(col, realize(LR, c), 2.0).status == "inapplicable"


def test_union_with_itself():
    fam = lr(3)
    v = check_subadditivity([fam], UnionFamily([fam, fam]), 2.0)
    assert v.passed and v.lhs == pytest.approx(v.rhs, rel=1e-6)


def test_union_lr_tb():
    c = grid_cover(3, 3)
    a, b = realize(LR, c), realize(BT, c)
    v = check_subadditivity([a, b], UnionFamily([a, b]), 2.0)
    assert v.passed and v.lhs <= 2 + 1e-6


def test_overcurve():
    c = grid_cover(3, 3)
    # every left-right chain through piece 4 contains a left-right chain
    assert check_overcurve(realize(ThroughPiece(4, 2), c), realize(ThroughPiece(4, 2), c),
                           2.0).passed
    long = realize(Explicit.of([[0, 1, 2, 5]]), c)
    assert check_overcurve(long, realize(LR, c), 3.0).passed


@given(st.integers(0, 2**12 - 1), st.floats(1.2, 4.0))
@settings(max_examples=30)
def test_subadditivity_random_sides(mask, p):
    c = grid_cover(3, 4)
    s1 = tuple(i for i in range(12) if mask >> i & 1) or (0,)
    fams = [realize(Connector(s1 if 11 not in s1 else (0,), (11,)), c), realize(LR, c)]
    assert check_subadditivity(fams, UnionFamily(fams), p).passed


def test_bracket_and_p_monotonicity():
    fam = realize(TorusLoop("e1"), subdivision_cover(M("2,0;0,4"), 2))
    prev = None
    for p in [1.25, 1.75, 2.5, 3.5, 5.0]:
        r = solve(fam, p)
        assert r.converged and r.lower_bound <= r.upper_bound
        assert r.gap <= 10 * 1e-7
        if prev is not None and np.all(prev.rho_opt <= 1):
            assert r.lower_bound <= prev.upper_bound * (1 + 1e-9)
        prev = r


@given(st.integers(0, 10**6), st.floats(1.1, 5.0))
@settings(max_examples=40)
def test_bracket_validity_random(seed, p):
    chains = _random_family(seed, 6)
    fam = realize(Explicit.of(chains), grid_cover(2, 3))
    r = solve(fam, p)
    assert r.converged
    assert r.lower_bound <= r.upper_bound
    assert (r.upper_bound - r.lower_bound) <= 10 * 1e-7 * r.upper_bound


def test_dim_compare_arithmetic():
    assert dim_compare_bound(1.0, 0.1, 2, 3, 0.5) == pytest.approx(0.9)
    assert dim_compare_bound(2.0, 0.0, 2, 3, 1e-3) == pytest.approx(2e-3)
    assert comb_dim_eps(0.0625, 2) == pytest.approx(0.5)
    with pytest.raises(InputError):
        dim_compare_bound(1.0, 0.1, 3, 2, 0.5)


def test_dim_compare_pipeline():
    c = grid_cover(8, 8)
    fam = realize(LR, c)
    m2, m3 = solve(fam, 2.0), solve(fam, 3.0)
    sup = max(point_family_bound(c, s, 1.0, 3.0).eta for s in range(c.n_pieces))
    assert 0 < sup < math.inf
    bound = dim_compare_bound(m2.upper_bound, sup, 2, 3, comb_dim_eps(sup, 2))
    assert m3.lower_bound <= bound


def test_point_family_examples():
    c16, c32 = grid_cover(16, 16), grid_cover(32, 32)
    e16 = point_family_bound(c16, c16.grid_id(8, 8), 0.5, 2.0).eta
    e32 = point_family_bound(c32, c32.grid_id(16, 16), 0.5, 2.0).eta
    assert 0 < e16 <= 8 * math.log(16) / math.log(8) ** 2
    assert e32 < e16


def test_point_family_isolated():
    assert point_family_bound(grid_cover(1, 2), 0, 2.0, 2.0).eta == 0


# ---------------------------------------------------------------- transport and duality


def test_transport_identity():
    c = grid_cover(3, 3)
    fam = realize(LR, c)
    v = transport_check(identity_map(c), fam, fam, 2.0)
    assert v.passed and v.upper_rule == v.lower_rule == "pass"
    assert v.mod_source.value == pytest.approx(v.mod_target.value, rel=1e-9)


@pytest.mark.parametrize("p", [2.0, 3.0])
@pytest.mark.parametrize("direction", ["e1", "e2"])
def test_transport_doubling(p, direction):
    f = self_cover_map(M("2,0;0,2"), 1)
    v = transport_check(f, realize(TorusLoop(direction), f.source),
                        realize(TorusLoop(direction), f.target), p)
    assert v.passed and v.metrics_ok
    ms, mt = v.mod_source.value, v.mod_target.value
    assert mt / 4**p * (1 - 1e-6) <= ms <= 4 * mt * (1 + 1e-6)


def test_transport_fold():
    f = fold_map(3, 3)
    v = transport_check(f, realize(BT, f.source), realize(BT, f.target), 2.0)
    assert v.passed


def test_transport_inapplicable():
    c = grid_cover(3, 3)
    v = transport_check(identity_map(c), realize(LR, c), realize(BT, c), 2.0)
    assert v.status == "inapplicable" and v.witness is not None


@pytest.mark.parametrize("k", [2, 3, 4])
def test_duality_grids(k):
    c = grid_cover(k, k)
    v = duality_product(realize(LR, c), realize(BT, c))
    assert v.passed and v.product <= 1 + 1e-6
    assert v.product == pytest.approx(1.0, rel=1e-6)


def test_duality_torus_loops():
    c = subdivision_cover(M("2,0;0,4"), 2)
    v = duality_product(realize(TorusLoop("e1"), c), realize(TorusLoop("e2"), c))
    assert v.passed and v.product <= 1 + 1e-6


def test_duality_inapplicable():
    c = grid_cover(3, 3)
    v = duality_product(realize(LR, c), realize(LR, c))
    assert v.status == "inapplicable" and v.witness is not None
