import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quadcusp.conepoints import ConeRegion, enumerate_isotropic
from quadcusp.dioph import DYADIC_T, ApproxFunction
from quadcusp.forms import RatSymForm, suspend_form
from quadcusp.ubiquity import (UbiquityError, UbiquitySpec, classify_numeric, cusp_system, divergence_classifier,
                               exp_rho, fit_kappa, local_ubiquity_estimate, measure_condition, u_regular_check)
from quadcusp.witt import default_frame

TWO_SQRT2 = 2 * math.sqrt(2)
CIRCLE = suspend_form(RatSymForm.identity(2))
SPHERE = suspend_form(RatSymForm.identity(3))
RHO = ApproxFunction.depth_exp(1)


def _spec(rho, lam=0.9, T=1.0):
    return UbiquitySpec(np.zeros((1, 1)), np.zeros(1), np.array([-1.0]), np.array([1.0]), 1, rho, T, lam)


def test_regularity_examples():
    T = DYADIC_T
    assert u_regular_check(_spec(exp_rho(2.0), math.exp(-T / TWO_SQRT2) * 1.01, T), 1)
    assert not u_regular_check(_spec(lambda x: 1 / math.log(x), 0.9, T), 2)
    with pytest.raises(UbiquityError):
        _spec(exp_rho(1.0), 1.0)


def test_huge_rho_covers_everything():
    pts = np.linspace(-1, 1, 21)[:, None]
    spec = UbiquitySpec(pts, np.zeros(21), np.array([-1.0]), np.array([1.0]), 1, lambda x: 10.0, 1.0, 0.5)
    rep = local_ubiquity_estimate(spec, 10, range(1, 4), 0)
    assert rep.kappa_hat == 1.0 and rep.unstable_balls == 0


def _system(L, qmax, width=1.0):
    fr = default_frame(L)
    pool = enumerate_isotropic(L, qmax)
    pool = pool.select(pool.coords @ (L.integer_matrix @ np.array(fr.v0.coords)) != 0)
    reg = ConeRegion.cube(fr, width)
    kappa = fit_kappa(pool, fr, reg, DYADIC_T)
    return cusp_system(pool, fr, reg, DYADIC_T, kappa=kappa)


def test_circle_ubiquity():
    spec = _system(CIRCLE, 2 ** 12)
    rep = local_ubiquity_estimate(spec, 50, range(spec.n_max - 5, spec.n_max + 1), 1)
    assert rep.kappa_hat > 0.05
    # a ball hugging the height-one point u_w = 0 fills in slowly, since rationals avoid it
    assert rep.unstable_balls <= 1
    assert u_regular_check(spec, 1)
    a, b = measure_condition(spec)
    assert 0 < a <= b


def test_sphere_ubiquity():
    spec = _system(SPHERE, 2 ** 8)
    rep = local_ubiquity_estimate(spec, 50, range(max(1, spec.n_max - 3), spec.n_max + 1), 1, mc_points=2000)
    assert rep.kappa_hat > 0.02


def test_pool_too_shallow():
    spec = _system(CIRCLE, 2 ** 8)
    with pytest.raises(UbiquityError):
        local_ubiquity_estimate(spec, 5, range(1, spec.n_max + 3), 0)


def test_classifier_trivial_sum():
    assert divergence_classifier(1, RHO, RHO, 1).verdict == "measure-infinite"


def test_classifier_circle_instance():
    Psi = ApproxFunction.power(2).to_depth()
    assert divergence_classifier(Fraction(3, 10), Psi, RHO, 1).verdict == "measure-infinite"
    assert divergence_classifier(Fraction(2, 5), Psi, RHO, 1).verdict == "measure-finite-cover"
    assert divergence_classifier(Fraction(1, 3), Psi, RHO, 1).verdict == "measure-infinite"


def test_classifier_domination_and_sign():
    Psi = ApproxFunction.power(2).to_depth()
    with pytest.raises(UbiquityError):
        divergence_classifier(2, Psi, RHO, 1)
    with pytest.raises(UbiquityError):
        divergence_classifier(0, Psi, RHO, 1)
    with pytest.raises(UbiquityError):
        divergence_classifier(Fraction(1, 2), ApproxFunction.power(2), RHO, 1)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(1, 3), st.integers(1, 60))
def test_classifier_critical_exponent(alpha, delta, num):
    Psi = ApproxFunction.power(alpha).to_depth()
    s = Fraction(num, 20)
    if s > delta:
        return
    crit = Fraction(delta, 1 + alpha)
    v = divergence_classifier(s, Psi, RHO, delta)
    assert (v.verdict == "measure-infinite") == (s <= crit)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(1, 19), st.floats(0.1, 10), st.floats(0.1, 10))
def test_classifier_rescaling_invariance(alpha, num, c1, c2):
    s = Fraction(num, 20)
    a = divergence_classifier(s, ApproxFunction(Fraction(alpha + 1), Fraction(0), 1.0, "depth", 0.0), RHO, 1)
    b = divergence_classifier(s, ApproxFunction(Fraction(alpha + 1), Fraction(0), c1, "depth", 0.0),
                              ApproxFunction.depth_exp(1, c2), 1)
    assert a.verdict == b.verdict


def test_classifier_monotone_in_psi():
    # psi1 <= psi2 eventually: a larger decay rate gives the smaller function
    for s in [Fraction(k, 10) for k in range(1, 11)]:
        v1 = divergence_classifier(s, ApproxFunction.power(3).to_depth(), RHO, 1)
        v2 = divergence_classifier(s, ApproxFunction.power(2).to_depth(), RHO, 1)
        if v1.verdict == "measure-infinite":
            assert v2.verdict == "measure-infinite"


def test_classifier_log_factor():
    # at the critical exponent a logarithmic factor decides
    Psi = ApproxFunction(Fraction(3), Fraction(-3), 1.0, "depth", 0.0)
    assert divergence_classifier(Fraction(1, 3), Psi, RHO, 1).verdict == "measure-infinite"
    Psi = ApproxFunction(Fraction(3), Fraction(-6), 1.0, "depth", 0.0)
    assert divergence_classifier(Fraction(1, 3), Psi, RHO, 1).verdict == "measure-finite-cover"


def test_symbolic_agrees_with_numeric():
    T = DYADIC_T
    for alpha in (1, 2, 3):
        Psi = ApproxFunction.power(alpha).to_depth()
        for s in (Fraction(1, 10), Fraction(3, 10), Fraction(7, 10), Fraction(1)):
            if s == Fraction(1, 1 + alpha):
                continue
            sym = divergence_classifier(s, Psi, RHO, 1).verdict
            num = classify_numeric(lambda x, s=s: x ** float(s), Psi, RHO, 1.0, T)
            assert sym == num
