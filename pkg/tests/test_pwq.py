import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdtw import pwq
from cdtw.pwq import PiecewiseQuadratic as PQ
from cdtw.pwq import PWQDomainError


def random_pwq(rng: random.Random, lo=0.0, hi=10.0, max_pieces=50, curvature=3.0) -> PQ:
    """Continuous random function: each piece is the chord plus a random parabola vanishing at both ends."""
    k = rng.randint(1, max_pieces)
    inner = sorted(rng.uniform(lo, hi) for _ in range(k - 1))
    bps = [lo]
    for x in inner:
        if x - bps[-1] > 1e-3 * (hi - lo):
            bps.append(x)
    if hi - bps[-1] <= 1e-3 * (hi - lo):
        bps.pop()
    bps.append(hi)
    vals = [rng.uniform(-5, 5) for _ in bps]
    co = []
    for u, v, fu, fv in zip(bps, bps[1:], vals, vals[1:]):
        a = rng.uniform(-curvature, curvature)
        m = (fv - fu) / (v - u)
        # a (t-u)(t-v) + fu + m (t-u)
        co.append((a, -a * (u + v) + m, a * u * v + fu - m * u))
    return PQ(bps, co)


def samples(f, n=1000):
    return np.linspace(f.lo, f.hi, n)


def test_eval_examples():
    assert pwq.eval(PQ.quadratic(0, 2, 1, 0, 0), 1.5) == pytest.approx(2.25)
    step = PQ([0, 1, 2], [(1, 0, 0), (0, 0, 1)])
    assert pwq.eval(step, 1.0) == pytest.approx(1.0)
    assert pwq.eval(PQ.quadratic(0, 4, 0, 2, 3), 0.0) == pytest.approx(3.0)
    with pytest.raises(PWQDomainError):
        pwq.eval(step, 2.5)


def test_envelope_examples(frozen):
    f, g = PQ.quadratic(0, 2, 1, 0, 0), PQ.constant(0, 2, 1.0)
    e = pwq.lower_envelope(f, g)
    assert e.bps == pytest.approx([0, 1, 2])
    assert e.co[0] == pytest.approx((1, 0, 0)) and e.co[1] == pytest.approx((0, 0, 1))
    assert pwq.lower_envelope(f, f).co == f.co

    f = PQ.quadratic(0, 4, 1, -2, 1.5)  # (t-1)^2 + 0.5
    g = PQ.quadratic(0, 4, 1, -6, 9.5)  # (t-3)^2 + 0.5
    e = pwq.lower_envelope(f, g)
    assert e.n_pieces == 2
    assert e.bps[1] == pytest.approx(frozen["envelope_crossing"], abs=1e-12)
    assert e.co[0] == pytest.approx(f.co[0]) and e.co[1] == pytest.approx(g.co[0])
    for t in np.linspace(0, 4, 1000):
        assert e(t) == pytest.approx(min(f(t), g(t)), abs=1e-9)


def test_envelope_domain_mismatch():
    with pytest.raises(PWQDomainError):
        pwq.lower_envelope(PQ.constant(0, 1, 0), PQ.constant(0, 2, 0))


def test_envelope_of_two_quadratics_has_at_most_three_pieces():
    rng = random.Random(5)
    for _ in range(200):
        f = PQ.quadratic(0, 1, *(rng.uniform(-3, 3) for _ in range(3)))
        g = PQ.quadratic(0, 1, *(rng.uniform(-3, 3) for _ in range(3)))
        assert pwq.lower_envelope(f, g).n_pieces <= 3


def test_random_envelopes_match_pointwise_min():
    rng = random.Random(11)
    for _ in range(200):
        f, g = random_pwq(rng), random_pwq(rng)
        e = pwq.lower_envelope(f, g)
        e2 = pwq.lower_envelope(g, f)
        ts = samples(e)
        want = np.minimum([f(t) for t in ts], [g(t) for t in ts])
        assert np.max(np.abs(np.array([e(t) for t in ts]) - want)) <= 1e-9
        assert np.max(np.abs(np.array([e2(t) for t in ts]) - want)) <= 1e-9
        assert pwq.max_jump(e) < 1e-9
        ee = pwq.lower_envelope(e, e)
        assert np.allclose([ee(t) for t in ts], [e(t) for t in ts], atol=1e-12)


def dense_minima(f, step=1e-4):
    ts = np.linspace(f.lo, f.hi, int(round((f.hi - f.lo) / (step * (f.hi - f.lo)))) + 1)
    y = np.array([f(t) for t in ts])
    out = []
    if y[0] < y[1]:
        out.append(ts[0])
    for i in range(1, len(ts) - 1):
        if y[i] <= y[i - 1] and y[i] <= y[i + 1] and (y[i] < y[i - 1] or y[i] < y[i + 1]):
            out.append(ts[i])
    if y[-1] < y[-2]:
        out.append(ts[-1])
    return out


def test_minima_examples():
    m = pwq.semistrict_local_minima(PQ.quadratic(0, 3, 1, -2, 1))
    assert m.ts == pytest.approx([1.0]) and m.points[0][1] == pytest.approx(0.0)
    assert len(pwq.semistrict_local_minima(PQ.constant(0, 1, 5.0))) == 0
    v = PQ([0, 1, 2], [(0, -1, 2), (0, 1, 0)])
    assert [tuple(p) for p in pwq.semistrict_local_minima(v).points] == pytest.approx([(1.0, 1.0)])


def test_minima_at_domain_ends_and_plateau_edges():
    # rises from both ends of a plateau: the plateau ends are semistrict minima
    f = PQ([0, 1, 2, 3], [(0, -1, 1), (0, 0, 0), (0, 1, -2)])
    assert pwq.semistrict_local_minima(f).ts == pytest.approx([1.0, 2.0])
    g = PQ.quadratic(0, 1, 0, 1, 0)
    assert pwq.semistrict_local_minima(g).ts == pytest.approx([0.0])


def test_minima_match_dense_sampling():
    rng = random.Random(23)
    for _ in range(40):
        f = random_pwq(rng, max_pieces=20, curvature=20.0)
        got = pwq.semistrict_local_minima(f).ts
        want = dense_minima(f)
        tol = 1e-3 * (f.hi - f.lo)
        for t in want:
            assert min(abs(t - u) for u in got) <= tol, (t, got)
        for u in got:
            assert min(abs(t - u) for t in want) <= tol, (u, want)


def test_add_quadratic_examples():
    f = PQ.quadratic(0, 1, 1, 0, 0)
    assert pwq.add_quadratic(f, (0, 0, 3)).co[0] == pytest.approx((1, 0, 3))
    z = pwq.add_quadratic(f, (-1, 0, 0))
    assert z.co[0] == pytest.approx((0, 0, 0))
    g = PQ([0, 1, 2], [(0, 1, 0), (0, 0, 1)])
    h = pwq.add_quadratic(g, (1, 0, 0))
    assert h.bps == [0, 1, 2]
    assert h.co[0] == pytest.approx((1, 1, 0)) and h.co[1] == pytest.approx((1, 0, 1))


def test_merge_refine_examples():
    f = PQ.quadratic(0, 2, 1, 0, 0)
    g = pwq.merge_refine(f, [1.0])
    assert g.n_pieces == 2 and g(1.5) == pytest.approx(2.25)
    assert pwq.merge_refine(g, [1.0]).n_pieces == 2
    h = pwq.merge_refine(f, [0.5, 1.5])
    assert h.n_pieces == 3
    for t in np.linspace(0, 2, 20):
        assert h(t) == pytest.approx(f(t), abs=1e-12)


def test_json_round_trip():
    f = random_pwq(random.Random(2))
    d = f.to_json()
    assert set(d) == {"breakpoints", "pieces"}
    g = PQ.from_json(d)
    assert g.bps == f.bps and [tuple(c) for c in g.co] == [tuple(c) for c in f.co]


def test_argmin_prefers_smallest_t():
    f = PQ([0, 1, 2, 3], [(0, -1, 1), (0, 1, -1), (0, -1, 3)])
    # equal minima at t=1 and t=3
    assert pwq.argmin(f) == pytest.approx((1.0, 0.0))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**9))
def test_prefix_min_matches_running_minimum(seed):
    f = random_pwq(random.Random(seed), max_pieces=15)
    pm = pwq.prefix_min(f)
    # the running minimum can only drop at breakpoints or parabola vertices, so include them
    extra = list(f.bps)
    for (a, b, _), u, v in zip(f.co, f.bps, f.bps[1:]):
        if a > 0 and u < -b / (2 * a) < v:
            extra.append(-b / (2 * a))
    ts = np.unique(np.concatenate([np.linspace(f.lo, f.hi, 2001), extra]))
    vals = np.array([f(t) for t in ts])
    run = np.minimum.accumulate(vals)
    got = np.array([pm.fn(t) for t in ts])
    assert np.max(np.abs(got - run)) <= 1e-9
    # every recorded start is to the left of the point it serves and reproduces the value
    for lo, hi, start in pm.starts:
        t = 0.5 * (lo + hi)
        s = t if start is None else start
        assert s <= t + 1e-12
        assert f(s) == pytest.approx(pm.fn(t), abs=1e-9)


def test_clamp_and_repair():
    f = PQ.quadratic(0, 2, 1, -2, 0.5)  # dips to -0.5
    g = pwq.clamp_below(f, 0.0)
    ts = np.linspace(0, 2, 500)
    assert min(g(t) for t in ts) >= 0.0
    assert np.allclose([g(t) for t in ts], np.maximum([f(t) for t in ts], 0.0), atol=1e-12)
    jumpy = PQ([0, 1, 2], [(0, 0, 1.0), (0, 0, 1.0 + 1e-9)])
    fixed = pwq.repair_continuity(jumpy)
    assert pwq.max_jump(fixed) < 1e-12
    with pytest.raises(pwq.ContinuityError):
        pwq.repair_continuity(PQ([0, 1, 2], [(0, 0, 1.0), (0, 0, 2.0)]))


def test_fit_recovers_quadratic_pieces():
    f = random_pwq(random.Random(9), max_pieces=8)
    g = pwq.fit(f, f.lo, f.hi, breaks=f.bps)
    for t in np.linspace(f.lo, f.hi, 500):
        assert g(t) == pytest.approx(f(t), abs=1e-9)
    # missing breakpoints are found by bisection
    h = pwq.fit(f, f.lo, f.hi)
    for t in np.linspace(f.lo, f.hi, 500):
        assert h(t) == pytest.approx(f(t), abs=1e-7)
