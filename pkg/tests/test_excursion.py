import math
from fractions import Fraction

import numpy as np
import pytest
import sympy

from quadcusp.conepoints import ConeRegion, enumerate_isotropic
from quadcusp.dioph import chart_points, dw_values
from quadcusp.excursion import (ExcursionError, LinearPhi, cusp_depth_quadric, flow_and_record,
                                phi_correspondence, rbeta_event_summary, rbeta_predicted_dimension,
                                sl_depth_identity)
from quadcusp.forms import RatSymForm, suspend_form
from quadcusp.symspace import random_point_frame
from quadcusp.witt import default_frame

TWO_SQRT2 = 2 * math.sqrt(2)
CIRCLE = suspend_form(RatSymForm.identity(2))


def test_depth_on_frame_geodesic():
    fr = default_frame(CIRCLE)
    pool = enumerate_isotropic(CIRCLE, 20)
    for t in (0.5, 2.0, 6.0):
        # the ray toward v0 is G(-t): f_v0 = -t there
        depth, _ = cusp_depth_quadric(fr.G(-t), pool)
        assert depth >= t - 1e-9


def test_depth_identity_model():
    depth, v = cusp_depth_quadric(np.eye(4), [[1, 0, 0, 0], [0, 0, 0, 1]])
    assert depth == pytest.approx(0, abs=1e-15)


def test_depth_monotone_in_pool(rng):
    fr = default_frame(CIRCLE)
    small, big = enumerate_isotropic(CIRCLE, 64), enumerate_isotropic(CIRCLE, 128)
    for _ in range(20):
        Q = random_point_frame(fr, rng, 1.5)
        assert cusp_depth_quadric(Q, big)[0] >= cusp_depth_quadric(Q, small)[0] - 1e-12


def _pool(qmax):
    fr = default_frame(CIRCLE)
    pool = enumerate_isotropic(CIRCLE, qmax)
    pool = pool.select(pool.coords @ (CIRCLE.integer_matrix @ np.array(fr.v0.coords)) != 0)
    return fr, pool


def test_trace_matches_direct_depth():
    fr, pool = _pool(128)
    tr = flow_and_record(fr, [0.37], 6.0, 0.5, pool, 0.5)
    for t, d in zip(tr.t, tr.depth):
        g = fr.u([0.37])
        Q = g.T @ fr.G(t) @ g
        assert d == pytest.approx(cusp_depth_quadric(Q, pool)[0], abs=1e-9)


def test_cusp_points_persist():
    fr, pool = _pool(256)
    u, d = chart_points(pool, fr), dw_values(pool, fr)
    reg = ConeRegion.cube(fr, 1.0)
    idx = [i for i in np.argsort(d, kind="stable") if reg.contains(pool.coords[i])[0]][:4]
    traces = [flow_and_record(fr, u[i], 30.0, 0.1, pool, 0.75) for i in idx]
    assert all(tr.persistent() for tr in traces)
    assert rbeta_event_summary(traces, 0.75).persistent_count == len(traces)


def test_beta_zero_events():
    fr, pool = _pool(64)
    tr = flow_and_record(fr, [0.123], 10.0, 0.1, pool, 0.0)
    assert np.array_equal(tr.events, np.nonzero(tr.depth >= 0)[0])


def test_generic_events_stop():
    fr, pool = _pool(1024)
    rng = np.random.default_rng(9)
    counts = []
    for tmax in (20.0, 40.0):
        trs = [flow_and_record(fr, b, tmax, 0.05, pool, 0.99) for b in rng.uniform(-1, 1, size=(20, 1))]
        counts.append(rbeta_event_summary(trs, 0.99).persistent_count)
    assert counts[-1] == 0


def test_event_monotone_in_beta():
    fr, pool = _pool(128)
    tr = flow_and_record(fr, [0.31], 15.0, 0.05, pool, 0.3)
    assert set(tr.events_at(0.6)) <= set(tr.events_at(0.3))


def test_flow_validation():
    fr, pool = _pool(16)
    with pytest.raises(ExcursionError):
        flow_and_record(fr, [0.0], 1.0, 0.1, pool, 1.5)
    with pytest.raises(ExcursionError):
        flow_and_record(fr, [0.0], 1.0, 0.0, pool, 0.5)


def test_empty_summary():
    assert rbeta_event_summary([], 0.5).rows == []


def test_phi_correspondence():
    phi1, phi2 = phi_correspondence(LinearPhi(Fraction(1, 2)), 1.7, 1.0)
    x = 3.3
    assert phi1(x) == pytest.approx(1.7 * math.exp(-x / math.sqrt(2)))
    assert phi2(x) == pytest.approx(math.exp(-2 * (x + 1) / TWO_SQRT2))
    phi0, _ = phi_correspondence(LinearPhi(0), 2.0, 1.0)
    assert phi0(x) == pytest.approx(2.0 * math.exp(-x / TWO_SQRT2))
    # a nonlinear phi goes through numerical inversion
    f1, _ = phi_correspondence(lambda t: t - math.log1p(t) / 2, 1.0, 1.0)
    t = 4.0
    assert f1(t - math.log1p(t) / 2) == pytest.approx(math.exp(-t / TWO_SQRT2), rel=1e-8)
    with pytest.raises(ExcursionError):
        phi_correspondence(lambda t: 2 * t, 1.0, 1.0)


def test_phi_inverse_symbolic():
    t, x, beta = sympy.symbols("t x beta", positive=True)
    inv = sympy.solve(sympy.Eq((1 - beta) * t, x), t)[0]
    assert sympy.simplify(inv.subs(beta, sympy.Rational(1, 2)) - 2 * x) == 0
    phi = LinearPhi(Fraction(1, 2))
    assert phi.inverse(1.5) == pytest.approx(3.0)


def test_rbeta_dimension():
    for beta in (Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), Fraction(0)):
        for delta in (1, 2, 3):
            assert rbeta_predicted_dimension(beta, delta) == delta * (1 - beta)
    with pytest.raises(ExcursionError):
        LinearPhi(1)


def test_sl_identity_examples():
    r = sl_depth_identity([0.0, 0.0], [2, 3], 5, 0.0, 1)
    assert r.expression == pytest.approx(4 + 9 + 25)
    rng = np.random.default_rng(4)
    for slope_is_n in (False, True):
        for _ in range(1000):
            n = int(rng.integers(1, 5))
            x = np.array([float(Fraction(int(rng.integers(-9, 10)), int(rng.integers(1, 9)))) for _ in range(n)])
            p = rng.integers(-20, 21, size=n)
            q = int(rng.integers(1, 40))
            r = sl_depth_identity(x, p, q, float(rng.uniform(-3, 3)), n if slope_is_n else 1)
            assert r.discrepancy <= 1e-9


def test_sl_identity_validation():
    with pytest.raises(ExcursionError):
        sl_depth_identity([0.1, 0.2], [1], 1, 0.0, 1)
    with pytest.raises(ExcursionError):
        sl_depth_identity([0.1, 0.2, 0.3], [1, 2, 3], 1, 0.0, 2)
    with pytest.raises(ExcursionError):
        sl_depth_identity([0.1], [0], 0, 0.0, 1)
