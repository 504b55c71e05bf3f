import math
import random

import numpy as np
import pytest
from conftest import random_curve

from cdtw import NormHandle, PolygonalCurve, cdtw_approx
from cdtw.cell import ContractError
from cdtw.norms import random_gauge
from cdtw.oracle import (
    GridConfig,
    NumericIntegrator,
    OracleMemoryError,
    UndefinedRatioError,
    grid_cdtw,
    lemma1_ratio,
    norm_array,
    path_cost_numeric,
    path_cost_numeric_with_error,
)

PHI = (1 + math.sqrt(5)) / 2
L1 = NormHandle.l1()
PARALLEL = (PolygonalCurve([(0, 0), (1, 0)]), PolygonalCurve([(0, 1), (1, 1)]))
CROSSING = (PolygonalCurve([(0, 0), (2, 0)]), PolygonalCurve([(1, -1), (1, 1)]))
GOLDEN = (PolygonalCurve([(0, 0), (PHI + 1, 0)]), PolygonalCurve([(PHI, 0), (2 * PHI + 1, 0)]))


@pytest.mark.parametrize("g", [2, 8, 32])
def test_grid_identical_curves(g):
    P = PolygonalCurve([(0, 0), (1, 2), (3, 1)])
    assert grid_cdtw(P, P, L1, GridConfig(g))[1] == pytest.approx(0.0, abs=1e-12)


def test_grid_examples():
    _, v = grid_cdtw(*PARALLEL, L1, GridConfig(64))
    assert 2.0 - 1e-12 <= v <= 2.05
    lo, v = grid_cdtw(*CROSSING, L1, GridConfig(256))
    assert 4.0 - 1e-12 <= v <= 4.05
    assert lo <= v


def test_grid_config_validation():
    with pytest.raises(ValueError):
        GridConfig(1)
    with pytest.raises(ValueError):
        NumericIntegrator(8)


def test_grid_refinement_does_not_increase_value():
    rng = random.Random(5)
    for _ in range(6):
        P, Q = random_curve(rng, rng.randint(1, 4)), random_curve(rng, rng.randint(1, 4))
        vals = [grid_cdtw(P, Q, L1, GridConfig(g))[1] for g in (8, 16, 32, 64)]
        for a, b in zip(vals, vals[1:]):
            assert b <= a + 1e-6 * max(1.0, a)


def test_memory_guard(monkeypatch):
    monkeypatch.setenv("CDTW_MEM_LIMIT_MB", "1")
    P = PolygonalCurve([(i, (-1) ** i) for i in range(10)])
    with pytest.raises(OracleMemoryError):
        grid_cdtw(P, P, L1, GridConfig(128))


def test_norm_array_matches_gauge_evaluation():
    rng = np.random.default_rng(0)
    for k in (4, 6, 10):
        K = random_gauge(rng, k)
        xy = rng.normal(size=(500, 2))
        got = norm_array(NormHandle.gauge(K), xy[:, 0], xy[:, 1])
        want = [K.brute(x, y) for x, y in xy]
        assert np.allclose(got, want, rtol=1e-12, atol=1e-12)


def test_numeric_path_examples():
    assert path_cost_numeric(*PARALLEL, [(0, 0), (1, 1)], L1, NumericIntegrator(10_000)) == pytest.approx(2.0, abs=1e-6)
    a = PHI + 1
    gxy = path_cost_numeric(*GOLDEN, [(0, 0), (0, a), (a, a)], L1)
    assert gxy == pytest.approx(7 * PHI + 4, abs=1e-5)
    assert path_cost_numeric(*PARALLEL, [(0.5, 0.5)], L1) == 0.0
    with pytest.raises(ValueError):
        path_cost_numeric(*PARALLEL, [(0.5, 0.5), (0.4, 0.9)], L1)


def test_numeric_error_estimate_is_honest():
    rng = random.Random(3)
    norm = NormHandle.gauge(random_gauge(np.random.default_rng(3), 8))
    for _ in range(10):
        P, Q = random_curve(rng, 3), random_curve(rng, 3)
        path = [(0, 0), (rng.uniform(0, 5), rng.uniform(0, 5)), (rng.uniform(5, 10), rng.uniform(5, 10))]
        fine, err = path_cost_numeric_with_error(P, Q, path, norm, NumericIntegrator(1024))
        finer = path_cost_numeric(P, Q, path, norm, NumericIntegrator(2048))
        assert abs(finer - fine) <= 4 * err + 1e-12


def test_richardson_ratio_on_smooth_segment():
    # 2-norm along a segment that stays away from zero is smooth, so the error drops by about 4
    P, Q = PolygonalCurve([(0, 0), (3, 1)]), PolygonalCurve([(0, 2), (1, 5)])
    path = [(0.0, 0.0), (2.0, 3.0)]
    L2 = NormHandle.l2()
    vals = [path_cost_numeric(P, Q, path, L2, NumericIntegrator(n)) for n in (32, 64, 128)]
    assert abs(vals[0] - vals[1]) >= 3 * abs(vals[1] - vals[2])


def test_bend_ratio_examples():
    P, Q = GOLDEN
    a = PHI + 1
    # x-then-y bend over y-then-x bend in the stated orientation
    r = lemma1_ratio(P, Q, (1, 1), (0, 0), (a, a))
    assert r == pytest.approx(1 / (2 * PHI + 1), abs=1e-6)
    r = lemma1_ratio(Q, P, (1, 1), (0, 0), (a, a))
    assert r == pytest.approx(2 * PHI + 1, abs=1e-4)
    # mirror-symmetric configuration
    P2, Q2 = PolygonalCurve([(0, 0), (2, 0)]), PolygonalCurve([(0, 0), (2, 0)])
    assert lemma1_ratio(P2, Q2, (1, 1), (0, 0), (2, 2)) == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(UndefinedRatioError):
        lemma1_ratio(P2, Q2, (1, 1), (1, 1), (1, 1))
    with pytest.raises(ValueError):
        lemma1_ratio(P2, Q2, (1, 1), (1.5, 1), (1, 2))


def test_sandwich_small():
    rng = random.Random(21)
    for _ in range(5):
        P, Q = random_curve(rng, rng.randint(1, 4)), random_curve(rng, rng.randint(1, 4))
        lo, hi = grid_cdtw(P, Q, L1, GridConfig(64))
        v, _ = cdtw_approx(P, Q, L1)
        assert lo - 1e-3 <= v <= 5 * (hi + 1e-3)
