import math
from fractions import Fraction

import numpy as np
import pytest

from quadcusp.conepoints import ConeRegion, enumerate_isotropic
from quadcusp.dioph import (DYADIC_T, ApproxFunction, HypothesisError, approximants, check_rigidity,
                            chart_dimension, chart_points, critical_exponent_upper, dw_values, dw_weight,
                            fit_inclusion_constants, inclusion_check, predicted_dimension,
                            random_quadric_points, stilde_count)
from quadcusp.forms import RatSymForm, suspend_form
from quadcusp.witt import default_frame

TWO_SQRT2 = 2 * math.sqrt(2)
Q2 = RatSymForm.identity(2)
CIRCLE = suspend_form(Q2)
SPHERE = suspend_form(RatSymForm.identity(3))


def test_approx_function_basics():
    psi = ApproxFunction.power(2)
    assert psi(10.0) == pytest.approx(0.01)
    assert psi.x_psi_to_zero and psi.decreasing
    assert psi.sigma == Fraction(1, 3)
    assert not ApproxFunction.power(1).x_psi_to_zero
    assert ApproxFunction.power(1, gamma=-1).x_psi_to_zero
    Psi = psi.to_depth()
    x = 3.7
    E = math.exp(x / TWO_SQRT2)
    assert Psi(x) == pytest.approx(psi(E) / E)
    assert Psi.log(x) == pytest.approx(math.log(Psi(x)))
    logf = ApproxFunction.power(2, gamma=3, coef=0.5)
    assert logf.log(50.0) == pytest.approx(math.log(logf(50.0)))


def test_exact_rational_point_is_approximant():
    pool = enumerate_isotropic(CIRCLE, 100)
    psi = ApproxFunction(Fraction(0), Fraction(0), 1e-9)  # tiny constant tolerance
    hits = approximants([0.6, 0.8], psi, 100, pool)
    assert ((3, 4), 5, 0.0) in hits
    assert all(e == 0 for _, _, e in hits)


def test_approximants_brute_force():
    x = np.array([0.6, 0.8])
    pool = enumerate_isotropic(CIRCLE, 100)
    psi = ApproxFunction.power(1)
    got = {(p, q) for p, q, _ in approximants(x, psi, 100, pool)}
    want = set()
    for row in pool.coords:
        p, q = tuple(int(v) for v in row[:-1]), int(row[-1])
        if max(abs(q * x[i] - p[i]) for i in range(2)) <= 1 / q:
            want.add((p, q))
    assert got == want


def test_generic_sphere_point_has_few_approximants():
    rng = np.random.default_rng(3)
    x = random_quadric_points(RatSymForm.identity(3), 1, rng)[0]
    pool = enumerate_isotropic(SPHERE, 2 ** 8)
    hits = approximants(x, ApproxFunction.power(2), 2 ** 8, pool)
    assert all(q < 50 for _, q, _ in hits)


def test_rigidity_rejects_bad_psi():
    with pytest.raises(HypothesisError):
        check_rigidity(Q2, ApproxFunction.power(0), 50, 2, 0)
    with pytest.raises(HypothesisError):
        check_rigidity(Q2, ApproxFunction.power(Fraction(1, 2)), 50, 2, 0)


def test_rigidity_holds_with_fast_decay():
    for q in (Q2, RatSymForm.identity(3), RatSymForm.diagonal([1, 2])):
        rep = check_rigidity(q, ApproxFunction.power(Fraction(3, 2)), 300, 4, 11)
        assert rep.passed
        assert all(o[1] < rep.empirical_q0 for o in rep.off_quadric)


def test_no_rational_points_no_late_approximants():
    q = RatSymForm.diagonal([Fraction(1, 3), Fraction(1, 3)])
    rep = check_rigidity(q, ApproxFunction.power(2), 300, 4, 5)
    assert rep.on_quadric == 0
    assert rep.passed


def test_dw_weight():
    fr = default_frame(CIRCLE)
    d1, _ = dw_weight(tuple(fr.w), fr)
    assert d1 == pytest.approx(0, abs=1e-12)
    d2, _ = dw_weight(tuple(3 * x for x in fr.w), fr)
    assert d2 - d1 == pytest.approx(TWO_SQRT2 * math.log(3))


def test_dw_deviation_bounded_on_cap():
    fr = default_frame(CIRCLE)
    devs = []
    for qmax in (256, 512, 1024):
        pool = enumerate_isotropic(CIRCLE, qmax)
        pool = pool.select(pool.coords @ (CIRCLE.integer_matrix @ np.array(fr.v0.coords)) != 0)
        reg = ConeRegion.cube(fr, 1.0)
        sub = pool.select(reg.contains(pool.coords))
        d = dw_values(sub, fr)
        devs.append(float(np.max(np.abs(d - TWO_SQRT2 * np.log(np.linalg.norm(sub.coords, axis=1))))))
    assert devs[2] == pytest.approx(devs[1], abs=0.05) and devs[1] == pytest.approx(devs[0], abs=0.1)


def _circle_pool(qmax):
    fr = default_frame(CIRCLE)
    pool = enumerate_isotropic(CIRCLE, qmax)
    mv = CIRCLE.integer_matrix @ np.array(fr.v0.coords)
    return fr, pool.select(pool.coords @ mv != 0)


def test_stilde_count():
    fr, pool = _circle_pool(256)
    u, d = chart_points(pool, fr), dw_values(pool, fr)
    Psi = ApproxFunction.power(2).to_depth()
    assert stilde_count(u[10], Psi, pool, fr) >= 1
    zero = ApproxFunction.depth_exp(1, 1e-300)
    assert stilde_count(np.array([0.123456789]), zero, pool, fr) == 0
    counts = [stilde_count(np.array([0.3]), Psi, pool.upto(q), fr) for q in (32, 64, 128, 256)]
    assert counts == sorted(counts)
    assert stilde_count(u[10], Psi, pool, fr, chart=u, dw=d) == stilde_count(u[10], Psi, pool, fr)


def test_inclusion_bracket():
    fr, pool = _circle_pool(2 ** 10)
    reg = ConeRegion.cube(fr, 1.0)
    rng = np.random.default_rng(2)
    bs = rng.uniform(-0.9, 0.9, size=(40, 1))
    pts = np.array([fr.chart_point(b) for b in bs])
    xs = pts[:, :-1] / pts[:, -1:]
    psi = ApproxFunction.power(2)
    consts = fit_inclusion_constants(fr, reg, pool)
    rep = inclusion_check(xs, psi, 2 ** 10, fr, reg, pool=pool, constants=consts)
    assert rep.violations == 0
    assert rep.lower_events <= rep.psi_events <= rep.upper_events
    # an exact rational point is an event at every scale
    exact = inclusion_check([[0.6, 0.8]], psi, 2 ** 10, fr, reg, pool=pool, constants=consts)
    assert exact.psi_events >= 1 and exact.upper_events >= 1
    # shrinking L1 far below the fit breaks the upper inclusion
    bad = inclusion_check(xs, ApproxFunction.power(Fraction(1, 2)), 2 ** 10, fr, reg, pool=pool,
                          constants=(consts[0], consts[1] * 1e-3))
    assert bad.upper_violations > 0


def test_predicted_dimension():
    assert predicted_dimension(ApproxFunction.power(2), 3) == Fraction(2, 3)
    assert predicted_dimension(ApproxFunction.power(2), 2) == Fraction(1, 3)
    assert predicted_dimension(ApproxFunction.power(10 ** 9), 3) < Fraction(1, 10 ** 8)
    with pytest.raises(HypothesisError):
        predicted_dimension(ApproxFunction.power(1), 3)
    assert chart_dimension(ApproxFunction.power(2).to_depth(), 1) == Fraction(1, 3)


def test_crossover_constant_psi_grows():
    fr, pool = _circle_pool(2 ** 12)
    reg = ConeRegion.cube(fr, 1.0)
    rep = critical_exponent_upper(pool, ApproxFunction.depth_exp(0), fr, DYADIC_T, [0.25, 0.5, 1.0], reg)
    assert set(rep.verdicts.values()) == {"growing"} and rep.crossover is None


def test_crossover_circle():
    fr, pool = _circle_pool(2 ** 12)
    reg = ConeRegion.cube(fr, 1.0)
    grid = [k / 100 for k in range(1, 101)]
    rep = critical_exponent_upper(pool, ApproxFunction.power(2).to_depth(), fr, DYADIC_T, grid, reg)
    assert abs(rep.crossover - 1 / 3) <= 0.15


def test_crossover_needs_depth():
    fr, pool = _circle_pool(16)
    with pytest.raises(ValueError):
        critical_exponent_upper(pool, ApproxFunction.power(2).to_depth(), fr, DYADIC_T, [0.5],
                                ConeRegion.cube(fr, 1.0))
