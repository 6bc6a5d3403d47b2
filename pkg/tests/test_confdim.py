import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from combmod.confdim import (
    DEFAULT_P_GRID,
    SweepRow,
    SweepTable,
    dumps,
    estimate_Q,
    report,
    sweep,
)
from combmod.geometry import InputError, IntMatrix2, NotExpandingError
from combmod.modulus import ModulusResult

M = IntMatrix2.parse


@pytest.fixture(scope="module")
def diag24():
    return sweep(M("2,0;0,4"), n_max=3)


@pytest.fixture(scope="module")
def diag22():
    return sweep(M("2,0;0,2"), n_max=3)


def test_doubling_values_are_one(diag22):
    for n in (1, 2, 3):
        assert diag22.value("e1", n, 2.25) > 0
    t = sweep(M("2,0;0,2"), directions=("e1",), p_grid=(2.0,), n_max=3)
    for n in (1, 2, 3):
        assert t.value("e1", n, 2.0) == pytest.approx(1.0, rel=1e-6)
    assert t.ratio("e1", 3, 2.0) == pytest.approx(1.0, rel=1e-6)


@pytest.mark.parametrize("p, factor", [(2.0, 2.0), (4.0, 0.5)])
def test_diag24_growth_per_level(p, factor):
    t = sweep(M("2,0;0,4"), directions=("e1",), p_grid=(p,), n_max=3)
    for n in (2, 3):
        assert t.ratio("e1", n, p) == pytest.approx(factor, rel=0.05)


def test_rows_are_ordered_and_complete(diag24):
    keys = [(r.direction, r.level, r.p) for r in diag24.rows]
    expected = [(d, n, p) for d in ("e1", "e2") for n in (1, 2, 3) for p in DEFAULT_P_GRID]
    assert keys == expected
    assert not diag24.flagged


def test_parallel_matches_serial():
    a = sweep(M("3,1;1,3"), n_max=2, threads=1)
    b = sweep(M("3,1;1,3"), n_max=2, threads=2)
    assert a.to_csv() == b.to_csv()


def test_csv_and_json(diag24):
    rows = list(csv.reader(io.StringIO(diag24.to_csv())))
    assert rows[0] == ["direction", "level", "p", "value", "lower", "upper", "ratio"]
    assert len(rows) == 1 + len(diag24.rows)
    first = rows[1]
    assert first[0] == "e1" and float(first[3]) == diag24.rows[0].result.value
    assert math.isnan(float(first[6]))
    obj = json.loads(dumps(diag24.to_json()))
    assert obj["levels"] == [1, 2, 3] and obj["rows"][0]["ratio"] is None


@pytest.mark.parametrize(
    "kwargs", [dict(p_grid=()), dict(p_grid=(1.0, 2.0)), dict(p_grid=(2.0, 1.5)),
               dict(directions=("e3",)), dict(n_min=0), dict(n_min=3, n_max=2)],
)
def test_sweep_rejects(kwargs):
    with pytest.raises(InputError):
        sweep(M("2,0;0,2"), **{"n_max": 2, **kwargs})


def test_sweep_rejects_non_expanding():
    with pytest.raises(NotExpandingError):
        sweep(M("2,1;1,1"), n_max=2)


def test_estimates_from_real_sweeps(diag24, diag22):
    e = estimate_Q(diag24)
    assert 2.7 <= e.Q_est <= 3.3 and e.direction == "e1"
    assert e.bracket[0] < e.Q_est < e.bracket[1]
    assert not e.warnings
    assert 1.7 <= estimate_Q(diag22).Q_est <= 2.3


def test_direction_maximum(diag24):
    per = {d.direction: d.Q for d in estimate_Q(diag24).per_direction}
    assert per["e1"] >= per["e2"]


def test_cross_exponent_consistency(diag24):
    e = estimate_Q(diag24)
    below = [p for p in diag24.p_grid if p < e.Q_est]
    above = [p for p in diag24.p_grid if p > e.Q_est]
    for p in below[-1:]:
        for q in above[:1]:
            r = [diag24.value(e.direction, n, q) / diag24.value(e.direction, n, p)
                 for n in diag24.levels]
            assert all(b < a for a, b in zip(r, r[1:]))


def test_needs_three_levels():
    t = sweep(M("2,0;0,2"), n_max=2)
    with pytest.raises(InputError):
        estimate_Q(t)
    with pytest.raises(InputError):
        estimate_Q(sweep(M("2,0;0,2"), n_max=3), span=3)


# ---------------------------------------------------------------- synthetic tables


def _fake(value):
    return ModulusResult(2.0, value, value, value, np.ones(1), 1.0, [], np.zeros(0), 0.0, 1, True)


def _synthetic(Q, grid, levels=(1, 2, 3), c=1.0, directions=("e1",)):
    rows = [SweepRow(d, n, p, _fake(c * 2.0 ** (n * (Q - p))))
            for d in directions for n in levels for p in grid]
    return SweepTable(M("2,0;0,4"), directions, tuple(grid), tuple(levels), rows)


@given(st.floats(1.3, 4.2), st.floats(0.01, 100))
def test_exact_recovery_on_power_law(Q, c):
    grid = DEFAULT_P_GRID
    e = estimate_Q(_synthetic(Q, grid, c=c))
    if any(abs(Q - p) < 1e-9 for p in grid):
        return
    assert e.Q_est == pytest.approx(Q, abs=1e-9)
    assert e.bracket[0] < e.Q_est <= e.bracket[1]


def test_half_open_brackets_warn():
    hi = estimate_Q(_synthetic(6.0, DEFAULT_P_GRID))
    assert hi.bracket == (DEFAULT_P_GRID[-1], math.inf) and hi.warnings
    lo = estimate_Q(_synthetic(1.1, DEFAULT_P_GRID))
    assert lo.bracket == (1.0, DEFAULT_P_GRID[0]) and lo.warnings


def test_span_two_uses_geometric_mean():
    grid = (1.5, 2.5)
    rows = []
    for n in (1, 2, 3, 4):
        for p in grid:
            wobble = 3.0 if n % 2 else 1 / 3
            rows.append(SweepRow("e1", n, p, _fake(wobble * 2.0 ** (n * (2 - p)))))
    t = SweepTable(M("0,-2;1,0"), ("e1",), grid, (1, 2, 3, 4), rows)
    assert estimate_Q(t, span=2).Q_est == pytest.approx(2.0, abs=1e-12)


def test_max_over_directions():
    grid = DEFAULT_P_GRID
    a = _synthetic(3.0, grid, directions=("e1",)).rows
    b = [SweepRow("e2", r.level, r.p, _fake(2.0 ** (r.level * (1.5 - r.p)))) for r in a]
    t = SweepTable(M("2,0;0,4"), ("e1", "e2"), grid, (1, 2, 3), a + b)
    e = estimate_Q(t)
    assert e.direction == "e1" and e.Q_est == pytest.approx(3.0)


# ---------------------------------------------------------------- report


def test_report_records(diag24):
    e = estimate_Q(diag24)
    rec = report(M("2,0;0,4"), e)
    assert rec["oracle"] == pytest.approx(3.0) and rec["attained"] is True
    assert rec["gap"] == pytest.approx(abs(e.Q_est - 3.0))
    assert rec["class"] == "RealDistinct"
    assert json.loads(dumps(rec)) == json.loads(dumps(rec))


def test_report_rotation_and_non_semisimple():
    fake = estimate_Q(_synthetic(2.0 + 1e-3, DEFAULT_P_GRID))
    rot = report(M("0,-2;1,0"), fake)
    assert rot["oracle"] == 2.0 and rot["attained"] is True
    jordan = report(M("2,1;0,2"), fake)
    assert jordan["attained"] is False
    assert any("not attained" in note for note in jordan["notes"])
