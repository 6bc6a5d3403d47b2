import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from combmod import curves
from combmod.cover import grid_cover, subdivision_cover
from combmod.curves import (
    ENUMERATION_GUARD,
    CombCurve,
    Connector,
    EmptyFamily,
    Explicit,
    ThroughPiece,
    TorusLoop,
    UnsupportedFamily,
    crossing_witness,
    dual_connector,
    enumerate_small,
    realize,
    shortest_curve,
    spec_from_json,
    spec_to_json,
)
from combmod.geometry import InputError, IntMatrix2

from oracles import connected_supports, loop_supports, minimal, side_supports

LR = Connector("left", "right")
BT = Connector("bottom", "top")


def supports(curves):
    return {c.support for c in curves}


def test_two_by_two_minimal_chains():
    fam = realize(LR, grid_cover(2, 2))
    assert supports(enumerate_small(fam, 2)) == {frozenset({0, 1}), frozenset({2, 3})}


def test_two_by_two_detours():
    fam = realize(LR, grid_cover(2, 2))
    got = supports(enumerate_small(fam, 3))
    three = {frozenset(s) for s in ({0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3})}
    assert got == {frozenset({0, 1}), frozenset({2, 3})} | three


def test_max_support_one_is_empty():
    assert enumerate_small(realize(LR, grid_cover(3, 3)), 1) == []


def test_two_by_two_torus_grid_connector():
    fam = realize(LR, grid_cover(2, 2, periodic=(True, True)))
    assert supports(enumerate_small(fam, 2)) == {frozenset({0, 1}), frozenset({2, 3})}


@pytest.mark.parametrize("rows, cols", [(2, 2), (2, 3), (3, 3), (3, 4)])
@pytest.mark.parametrize("spec, sides", [(LR, ("left", "right")), (BT, ("bottom", "top"))])
def test_enumeration_matches_brute_force(rows, cols, spec, sides):
    c = grid_cover(rows, cols)
    got = supports(enumerate_small(realize(spec, c), c.n_pieces))
    assert got == set(side_supports(c, *sides))


@pytest.mark.parametrize("lit, n", [("2,0;0,2", 1), ("2,0;0,4", 1), ("3,1;1,3", 1),
                                    ("0,-2;1,0", 2), ("2,1;0,2", 1), ("2,0;0,2", 2)])
@pytest.mark.parametrize("direction", ["e1", "e2"])
def test_loop_family_matches_brute_force(lit, n, direction):
    c = subdivision_cover(IntMatrix2.parse(lit), n)
    if c.n_pieces > 16:
        pytest.skip("brute force too large")
    fam = realize(TorusLoop(direction), c)
    got = supports(enumerate_small(fam, c.n_pieces))
    assert got == set(loop_supports(c, direction))


def test_loop_e1_on_two_by_four():
    c = subdivision_cover(IntMatrix2.parse("2,0;0,4"), 1)
    fam = realize(TorusLoop("e1"), c)
    mins = minimal(supports(enumerate_small(fam, c.n_pieces)))
    assert mins and all(len(s) == 2 for s in mins)
    assert len(mins) == 4


def test_one_cell_wide_level_has_single_piece_loops():
    c = subdivision_cover(IntMatrix2.parse("0,-2;1,0"), 1)
    for d in ("e1", "e2"):
        fam = realize(TorusLoop(d), c)
        _, L = shortest_curve(fam, np.ones(c.n_pieces))
        assert L >= 1


@pytest.mark.parametrize("k", [2, 3, 5, 8])
def test_uniform_shortest_length_is_k(k):
    fam = realize(LR, grid_cover(k, k))
    curve, L = shortest_curve(fam, np.ones(k * k))
    assert L == k
    assert fam.contains(curve)


def test_zero_weight_gives_zero_length_deterministically():
    fam = realize(LR, grid_cover(4, 4))
    a = shortest_curve(fam, np.zeros(16))
    b = shortest_curve(fam, np.zeros(16))
    assert a == b and a[1] == 0
    assert fam.contains(a[0])


def test_zero_column_gives_zero_length_loop():
    c = grid_cover(4, 4, periodic=(True, True))
    rho = np.ones(16)
    rho[c.grid_id(2, np.arange(4))] = 0
    curve, L = shortest_curve(realize(TorusLoop("e2"), c), rho)
    assert L == 0
    assert curve.support == frozenset(c.grid_id(2, r) for r in range(4))


def test_through_piece_contains_s0():
    c = grid_cover(4, 4)
    fam = realize(ThroughPiece(5, 2), c)
    curves = enumerate_small(fam, 4)
    assert curves and all(5 in cv.support for cv in curves)
    rng = np.random.default_rng(1)
    for _ in range(20):
        curve, _ = shortest_curve(fam, rng.random(16))
        assert 5 in curve.support and len(curve.support) >= 2


def test_through_piece_isolated_is_empty():
    fam = realize(ThroughPiece(0, 2), grid_cover(1, 1))
    assert fam.is_empty()
    with pytest.raises(EmptyFamily):
        shortest_curve(fam, np.ones(1))


def test_explicit_family():
    c = grid_cover(2, 2)
    fam = realize(Explicit.of([[0, 1], [2, 3]]), c)
    curve, L = shortest_curve(fam, np.array([0.2, 0.3, 0.1, 0.1]))
    assert curve.chain == (2, 3) and L == pytest.approx(0.2)
    with pytest.raises(EmptyFamily):
        shortest_curve(realize(Explicit(()), c), np.ones(4))


@pytest.mark.parametrize(
    "spec", [Connector("left", "left"), Connector((), (1,)), TorusLoop("e3"), ThroughPiece(0, 1),
             ThroughPiece(99, 2)],
)
def test_bad_specs_rejected(spec):
    with pytest.raises(InputError):
        realize(spec, grid_cover(3, 3))


def test_bad_rho_rejected():
    fam = realize(LR, grid_cover(2, 2))
    with pytest.raises(InputError):
        shortest_curve(fam, -np.ones(4))
    with pytest.raises(InputError):
        shortest_curve(fam, np.ones(3))


def test_enumeration_guard(monkeypatch):
    assert ENUMERATION_GUARD == 10**6
    monkeypatch.setattr(curves, "ENUMERATION_GUARD", 1000)
    fam = realize(LR, grid_cover(6, 6))
    with pytest.raises(InputError):
        enumerate_small(fam, 144)


@pytest.mark.parametrize("spec", [LR, BT, Connector("right", "left"), TorusLoop("e1")])
def test_dual_is_involution(spec):
    c = grid_cover(3, 3, periodic=(True, True)) if isinstance(spec, TorusLoop) else grid_cover(3, 3)
    assert dual_connector(dual_connector(spec, c), c) == spec


def test_dual_examples():
    assert dual_connector(LR, grid_cover(4, 4)) == BT
    assert dual_connector(TorusLoop("e1"), grid_cover(2, 2, (True, True))) == TorusLoop("e2")
    with pytest.raises(UnsupportedFamily):
        dual_connector(Connector("left", "top"), grid_cover(3, 3))


def test_crossing_on_two_by_two():
    c = grid_cover(2, 2)
    rows = enumerate_small(realize(LR, c), 4)
    cols = enumerate_small(realize(BT, c), 4)
    assert all(r.support & k.support for r in rows for k in cols)
    assert crossing_witness(realize(LR, c), realize(BT, c)) is None
    assert crossing_witness(realize(LR, c), realize(LR, c), rows[:1]) is not None


@pytest.mark.parametrize("spec", [Explicit.of([[0, 1], [3]]), LR, TorusLoop("e2"),
                                  ThroughPiece(4, 3), Connector((0, 3), (2,))])
def test_spec_json_roundtrip(spec):
    assert spec_from_json(spec_to_json(spec)) == spec


# ---------------------------------------------------------------- properties

weights = st.lists(st.floats(0, 5, allow_nan=False), min_size=9, max_size=9).map(np.array)


@given(weights)
def test_oracle_dominance(rho):
    fam = realize(LR, grid_cover(3, 3))
    _, L = shortest_curve(fam, rho)
    assert all(L <= c.length(rho) + 1e-12 for c in enumerate_small(fam, 9))
    brute = min(rho[list(s)].sum() for s in side_supports(grid_cover(3, 3), "left", "right"))
    assert L == pytest.approx(brute, abs=1e-12)


@given(weights, weights)
def test_monotone_in_rho(rho, extra):
    fam = realize(TorusLoop("e1"), grid_cover(3, 3, (True, True)))
    assert shortest_curve(fam, rho)[1] <= shortest_curve(fam, rho + extra)[1] + 1e-12


@given(st.lists(st.integers(0, 8), min_size=1, max_size=20), weights)
def test_support_semantics(chain, rho):
    c = CombCurve(tuple(chain))
    dedup = CombCurve(tuple(dict.fromkeys(chain)))
    assert c.length(rho) == dedup.length(rho)
    assert c.length(rho) == rho[sorted(set(chain))].sum()


@given(st.integers(0, 2**16 - 1))
def test_connected_supports_agree_on_random_sides(mask):
    c = grid_cover(3, 3)
    src = tuple(i for i in range(9) if mask >> i & 1)
    tgt = tuple(i for i in range(9) if mask >> (i + 7) & 1 and i not in src)
    if not src or not tgt:
        return
    fam = realize(Connector(src, tgt), c)
    got = supports(enumerate_small(fam, 9))
    assert got == set(connected_supports(9, c.moves.tolist(), src, tgt))
