import math
import random

import numpy as np
import pytest

from cdtw import NormHandle, PolygonalCurve, build_arc_table, norm_eval, point_at
from cdtw.cell import (
    E,
    N,
    S,
    W,
    ContractError,
    MonotonePath,
    ParameterSpace,
    cost_fn_fixed_start,
    opt_path_cost,
    rho_split,
    segment_cost,
)
from cdtw.norms import random_gauge
from cdtw.oracle import NumericIntegrator, lemma1_ratio, path_cost_numeric

PHI = (1 + math.sqrt(5)) / 2
L1 = NormHandle.l1()
FINE = NumericIntegrator(4096)


def single_cell(p, q, norm=L1):
    P, Q = PolygonalCurve(p), PolygonalCurve(q)
    return P, Q, ParameterSpace(P, Q, norm).cell(1, 1)


def crossing():
    return single_cell([(0, 0), (2, 0)], [(1, -1), (1, 1)])


def golden():
    return single_cell([(0, 0), (PHI + 1, 0)], [(PHI, 0), (2 * PHI + 1, 0)])


def norms_pool(seed=0):
    rng = np.random.default_rng(seed)
    return [L1, NormHandle.linf()] + [NormHandle.gauge(random_gauge(rng, k)) for k in (4, 6, 8, 12)]


def random_cell(rng: random.Random, norm):
    while True:
        p = [(rng.uniform(-5, 5), rng.uniform(-5, 5)) for _ in range(2)]
        q = [(rng.uniform(-5, 5), rng.uniform(-5, 5)) for _ in range(2)]
        if min(math.dist(*p), math.dist(*q)) > 0.1:
            return single_cell(p, q, norm)


def independent_dist(P, Q, norm):
    tp, tq = build_arc_table(P, norm), build_arc_table(Q, norm)

    def d(s, t):
        a, b = point_at(P, tp, s), point_at(Q, tq, t)
        return norm_eval(norm, (a[0] - b[0], a[1] - b[1]))

    return d


def random_monotone(rng, x, y, bends):
    us = sorted(rng.random() for _ in range(bends))
    vs = sorted(rng.random() for _ in range(bends))
    pts = [x] + [(x[0] + u * (y[0] - x[0]), x[1] + v * (y[1] - x[1])) for u, v in zip(us, vs)] + [y]
    return MonotonePath(pts)


def test_valley_examples():
    _, _, c = crossing()
    v = c.valley
    assert v.kind == "line" and v.slope == pytest.approx(1.0)
    assert v.side(1.0, 1.0) == pytest.approx(0.0, abs=1e-12)
    _, _, c = single_cell([(0, 0), (1, 0)], [(0, 1), (1, 1)])
    assert c.valley.slope == pytest.approx(1.0) and c.valley.side(0.3, 0.3) == pytest.approx(0.0, abs=1e-12)
    _, _, c = golden()
    # zero-distance diagonal s - t = phi
    assert c.valley.slope == pytest.approx(1.0)
    assert c.valley.side(PHI, 0.0) == pytest.approx(0.0, abs=1e-12)
    assert c.dist(PHI + 0.5, 0.5) == pytest.approx(0.0, abs=1e-12)


def test_valley_property_on_anti_diagonals():
    rng = random.Random(4)
    for norm in norms_pool():
        for _ in range(8):
            P, Q, c = random_cell(rng, norm)
            d = independent_dist(P, Q, norm)
            (s0, s1), (t0, t1) = c.s_range, c.t_range
            v = c.valley
            assert v.slope > 0 or v.kind == "degenerate"
            for cc in np.linspace(s0 + t0, s1 + t1, 100)[1:-1]:
                ss = np.linspace(max(s0, cc - t1), min(s1, cc - t0), 41)
                vals = [d(s, cc - s) for s in ss]
                sides = [v.side(s, cc - s) for s in ss]
                tol = 1e-7 * max(1.0, max(vals))
                for k in range(len(ss) - 1):
                    # above-left of the valley the distance falls towards it, below-right it rises
                    if sides[k] > 0 and sides[k + 1] > 0:
                        assert vals[k + 1] <= vals[k] + tol
                    if sides[k] < 0 and sides[k + 1] < 0:
                        assert vals[k + 1] >= vals[k] - tol


def test_segment_cost_examples(frozen):
    _, _, c = crossing()
    assert segment_cost(c, (0, 0), (2, 0)) == pytest.approx(frozen["crossing_cell"]["horizontal_0_to_2"], abs=1e-9)
    assert segment_cost(c, (0, 0), (2, 2)) == pytest.approx(frozen["crossing_cell"]["diagonal_0_to_2"], abs=1e-9)
    assert segment_cost(c, (1, 1), (1, 1)) == 0.0
    with pytest.raises(ContractError):
        segment_cost(c, (0, 0), (2, 1))
    with pytest.raises(ContractError):
        segment_cost(c, (1, 1), (0, 1))


def test_segment_cost_matches_numeric_integration():
    rng = random.Random(8)
    for norm in norms_pool(1):
        for _ in range(10):
            P, Q, c = random_cell(rng, norm)
            (s0, s1), (t0, t1) = c.s_range, c.t_range
            a = (rng.uniform(s0, s1), rng.uniform(t0, t1))
            for b in ((rng.uniform(a[0], s1), a[1]), (a[0], rng.uniform(a[1], t1))):
                want = path_cost_numeric(P, Q, [a, b], norm, FINE)
                assert segment_cost(c, a, b) == pytest.approx(want, rel=1e-6, abs=1e-9)


def test_golden_cell_bends(frozen):
    P, Q, c = golden()
    a = PHI + 1
    xy = segment_cost(c, (0, 0), (0, a)) + segment_cost(c, (0, a), (a, a))
    yx = segment_cost(c, (0, 0), (a, 0)) + segment_cost(c, (a, 0), (a, a))
    assert xy == pytest.approx(frozen["golden_cell"]["bend_at_x1_y2"], abs=1e-8)
    assert yx == pytest.approx(frozen["golden_cell"]["bend_at_y1_x2"], abs=1e-8)
    assert xy == pytest.approx(7 * PHI + 4, abs=1e-9)
    assert yx == pytest.approx(PHI + 2, abs=1e-9)
    assert xy / yx == pytest.approx(2 * PHI + 1, abs=1e-9)
    # the optimum follows the zero-distance valley
    cost, path = opt_path_cost(c, (0, 0), (a, a))
    assert cost == pytest.approx(PHI + 1, abs=1e-9)
    assert path.waypoints == pytest.approx([(0, 0), (PHI, 0), (a, 1), (a, a)])


def test_opt_path_examples():
    P, Q, c = crossing()
    cost, path = opt_path_cost(c, (0, 0), (2, 2))
    assert cost == pytest.approx(4.0, abs=1e-12)
    assert path.waypoints == ((0.0, 0.0), (2.0, 2.0))
    cost, path = opt_path_cost(c, (0.5, 0.7), (0.5, 0.7))
    assert cost == 0.0 and len(path.waypoints) == 1
    with pytest.raises(ContractError):
        opt_path_cost(c, (1, 1), (0, 2))


def test_opt_beats_random_monotone_paths():
    P, Q, c = crossing()
    rng = random.Random(1)
    best, _ = opt_path_cost(c, (0, 0), (2, 2))
    for _ in range(1000):
        path = random_monotone(rng, (0.0, 0.0), (2.0, 2.0), rng.randint(1, 4))
        assert best <= path_cost_numeric(P, Q, path, L1, NumericIntegrator(256)) + 1e-6


def test_opt_beats_random_paths_in_random_cells():
    rng = random.Random(2)
    for norm in norms_pool(2):
        for _ in range(5):
            P, Q, c = random_cell(rng, norm)
            (s0, s1), (t0, t1) = c.s_range, c.t_range
            x = (rng.uniform(s0, s1), rng.uniform(t0, t1))
            y = (rng.uniform(x[0], s1), rng.uniform(x[1], t1))
            best, path = opt_path_cost(c, x, y)
            assert path_cost_numeric(P, Q, path, norm, FINE) == pytest.approx(best, rel=1e-6, abs=1e-9)
            for _ in range(40):
                other = random_monotone(rng, x, y, rng.randint(1, 4))
                assert best <= path_cost_numeric(P, Q, other, norm, NumericIntegrator(512)) + 1e-6 * (1 + best)


def test_triangle_composition():
    rng = random.Random(3)
    for norm in norms_pool(3):
        for _ in range(20):
            _, _, c = random_cell(rng, norm)
            (s0, s1), (t0, t1) = c.s_range, c.t_range
            pts = sorted((rng.uniform(s0, s1), rng.uniform(t0, t1)) for _ in range(3))
            ss, ts = sorted(p[0] for p in pts), sorted(p[1] for p in pts)
            x, y, z = zip(ss, ts)
            assert c.opt_cost(x, z) <= c.opt_cost(x, y) + c.opt_cost(y, z) + 1e-9 * (1 + c.opt_cost(x, z))


def test_bend_ratio_bound_in_random_cells():
    rng = random.Random(6)
    pool = norms_pool(6)
    integ = NumericIntegrator(256)
    for k in range(1000):
        norm = pool[k % len(pool)]
        P, Q, c = random_cell(rng, norm)
        (s0, s1), (t0, t1) = c.s_range, c.t_range
        x = (rng.uniform(s0, s1), rng.uniform(t0, t1))
        y = (rng.uniform(x[0], s1), rng.uniform(x[1], t1))
        r = lemma1_ratio(P, Q, (1, 1), x, y, integ, norm=norm)
        assert 0.2 - 1e-6 <= r <= 5 + 1e-6


def test_fixed_start_function_matches_pointwise_optimum():
    _, _, c = crossing()
    f = cost_fn_fixed_start(c, c.border(S), 0.0, c.border(N))
    for t in np.linspace(0, 2, 10):
        assert f(t) == pytest.approx(opt_path_cost(c, (0, 0), (t, 2))[0], abs=1e-9)
    # from the shared corner of adjoining borders the function is the cost along the border
    g = cost_fn_fixed_start(c, c.border(W), 2.0, c.border(N))
    for t in np.linspace(0, 2, 10):
        assert g(t) == pytest.approx(segment_cost(c, (0, 2), (t, 2)), abs=1e-9)


def test_fixed_start_in_degenerate_cell():
    _, _, c = golden()
    f = cost_fn_fixed_start(c, c.border(S), 0.4, c.border(N))
    ts = np.linspace(f.lo, f.hi, 300)
    assert f.lo == pytest.approx(0.4)
    assert min(f(t) for t in ts) >= 0.0
    from cdtw.pwq import max_jump

    assert max_jump(f) < 1e-9


def test_rho_split_crossing():
    _, _, c = crossing()
    sp = rho_split(c, c.border(S), c.border(N))
    assert sp.rho_in(0.0) == pytest.approx(0.0, abs=1e-12)
    for s in np.linspace(0, 2, 5):
        for t in np.linspace(s, 2, 5):
            assert sp.rho_in(s) + sp.rho_out(t) == pytest.approx(c.opt_cost((s, 0), (t, 2)), abs=1e-6)
    with pytest.raises(ContractError):
        rho_split(c, c.border(W), c.border(N))


def test_rho_split_parallel_matches_numeric():
    P, Q, c = single_cell([(0, 0), (1, 0)], [(0, 1), (1, 1)])
    sp = rho_split(c, c.border(W), c.border(E))
    for s in np.linspace(0, 1, 5):
        for t in np.linspace(s, 1, 5):
            _, path = opt_path_cost(c, (0, s), (1, t))
            assert sp.rho_in(s) + sp.rho_out(t) == pytest.approx(path_cost_numeric(P, Q, path, L1, FINE), abs=1e-6)


def test_rho_split_random_cells():
    rng = random.Random(12)
    for norm in norms_pool(12):
        for _ in range(4):
            _, _, c = random_cell(rng, norm)
            for a_side, b_side in ((S, N), (W, E)):
                A, B = c.border(a_side), c.border(b_side)
                sp = rho_split(c, A, B)
                for _ in range(25):
                    s = rng.uniform(A.lo, A.hi)
                    t = rng.uniform(s, B.hi) if s <= B.hi else B.hi
                    t = max(t, B.lo)
                    if s > t:
                        continue
                    want = c.opt_cost(c.point(A, s), c.point(B, t))
                    assert sp.rho_in(s) + sp.rho_out(t) == pytest.approx(want, rel=1e-7, abs=1e-7)


def test_monotone_path_validation():
    MonotonePath([(0, 0), (1, 0), (1, 2)])
    with pytest.raises(ContractError):
        MonotonePath([(0, 0), (1, 0), (0.5, 2)])
    p = MonotonePath([(0, 0), (0, 0), (1, 1)])
    assert p.waypoints == ((0, 0), (1, 1))
