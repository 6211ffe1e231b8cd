import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quadcusp.conepoints import (ConePoints, ConeRegion, CountingHistogram, counting_histogram,
                                 enumerate_isotropic, equidist_ratio, fit_exponent, parse_region,
                                 points_from_array, split_suspended)
from quadcusp.forms import FormError, RatSymForm, pz_normalize, suspend_form
from quadcusp.witt import default_frame

CIRCLE = suspend_form(RatSymForm.identity(2))
SPHERE = suspend_form(RatSymForm.identity(3))


def brute_force(qform, q_max):
    """Full box scan |x_i| <= 2q (enough for the forms used here): the enumeration oracle."""
    n = qform.dim
    A, N = qform.integer_matrix, qform.denominator
    out = set()
    for q in range(1, q_max + 1):
        r = np.arange(-2 * q, 2 * q + 1)
        x = np.stack(np.meshgrid(*[r] * n, indexing="ij"), axis=-1).reshape(-1, n)
        hit = x[np.einsum("ij,jk,ik->i", x, A, x) == N * q * q]
        out |= {(*map(int, h), q) for h in hit if math.gcd(*map(int, h), q) == 1}
    return out


def test_circle_small():
    pts = enumerate_isotropic(CIRCLE, 5)
    got = {tuple(int(v) for v in r) for r in pts.coords}
    assert len(got) == 12
    assert got == brute_force(RatSymForm.identity(2), 5)
    assert sum(1 for p in got if p[-1] == 1) == 4 and sum(1 for p in got if p[-1] == 5) == 8


def test_sphere_unit():
    pts = enumerate_isotropic(SPHERE, 1)
    assert len(pts) == 6
    assert {tuple(int(v) for v in r) for r in pts.coords} == {(1, 0, 0, 1), (-1, 0, 0, 1), (0, 1, 0, 1),
                                                               (0, -1, 0, 1), (0, 0, 1, 1), (0, 0, -1, 1)}


def test_no_points_for_three():
    q = RatSymForm.diagonal([Fraction(1, 3), Fraction(1, 3)])
    assert len(enumerate_isotropic(suspend_form(q), 200)) == 0


@pytest.mark.parametrize("q,qmax", [(RatSymForm.identity(2), 60), (RatSymForm.identity(3), 20),
                                    (RatSymForm.diagonal([1, 2]), 40), (RatSymForm.diagonal([2, 3, 6]), 14),
                                    (RatSymForm.from_polynomial(2, {(0, 0): 1, (0, 1): 1, (1, 1): 1}), 40)])
def test_enumeration_matches_brute_force(q, qmax):
    pts = enumerate_isotropic(suspend_form(q), qmax)
    got = [tuple(int(v) for v in r) for r in pts.coords]
    assert len(got) == len(set(got))
    assert set(got) == brute_force(q, qmax)


def test_points_are_valid_and_sorted():
    pts = enumerate_isotropic(SPHERE, 60)
    c = pts.coords
    assert np.all(np.sum(c[:, :-1] ** 2, axis=1) == c[:, -1] ** 2)
    assert np.all(np.gcd.reduce(np.abs(c), axis=1) == 1)
    assert all(pz_normalize(tuple(r)) == tuple(r) for r in c[:200])
    assert np.all(np.diff(c[:, -1]) >= 0)


def test_symmetry_closure():
    pts = enumerate_isotropic(SPHERE, 40)
    s = {tuple(int(v) for v in r) for r in pts.coords}
    for perm in ((1, 0, 2), (2, 1, 0)):
        for signs in ((-1, 1, 1), (1, -1, -1)):
            img = {tuple(signs[i] * p[perm[i]] for i in range(3)) + (p[3],) for p in s}
            assert img == s


def test_partition_consistency():
    full = enumerate_isotropic(SPHERE, 50).coords
    parts = [enumerate_isotropic(SPHERE, b, q_min=a).coords for a, b in ((1, 17), (18, 30), (31, 50))]
    assert np.array_equal(full, np.concatenate(parts))


def test_threads_match_serial():
    a = enumerate_isotropic(CIRCLE, 600).coords
    b = enumerate_isotropic(CIRCLE, 600, threads=2).coords
    assert np.array_equal(a, b)


def test_indefinite_needs_bound():
    L = suspend_form(RatSymForm.diagonal([1, -1]))
    with pytest.raises(FormError):
        enumerate_isotropic(L, 10)
    pts = enumerate_isotropic(L, 10, coord_bound=12)
    assert len(pts) > 0 and np.all(pts.coords[:, 0] ** 2 - pts.coords[:, 1] ** 2 == pts.coords[:, 2] ** 2)


def test_split_suspended_round_trip():
    q = RatSymForm.diagonal([1, Fraction(2, 3), 5])
    assert split_suspended(suspend_form(q)) == q
    with pytest.raises(FormError):
        split_suspended(RatSymForm.normal_form(4, 1))


# ---------------------------------------------------------------- histograms

def test_histogram_empty():
    pts = ConePoints(CIRCLE, np.zeros((0, 3), dtype=np.int64), 64)
    h = counting_histogram(pts, 2)
    assert set(h.bins.values()) == {0}


def test_histogram_totals_match_region_count():
    pts = enumerate_isotropic(SPHERE, 128)
    fr = default_frame(SPHERE)
    reg = ConeRegion.cube(fr, 1.0)
    h = counting_histogram(pts, 2, reg)
    assert sum(h.bins.values()) == int(np.sum(reg.contains(pts.coords)))
    h3 = counting_histogram(pts, Fraction(3, 2))
    for k, n in h3.bins.items():
        lo, hi = Fraction(3, 2) ** k, Fraction(3, 2) ** (k + 1)
        assert n == sum(1 for q in pts.heights if lo <= q < hi)


def test_fit_exact_exponential():
    bins = {k: 5 * 2 ** (2 * (k + 1)) for k in range(10)}
    h = CountingHistogram(Fraction(2), bins, 2 ** 10)
    slope, r2 = fit_exponent(h, 0)
    assert slope == pytest.approx(2.0, abs=1e-12) and r2 == pytest.approx(1.0, abs=1e-12)


def test_fit_needs_three_bins():
    h = CountingHistogram(Fraction(2), {0: 40, 1: 50, 2: 0}, 7)
    with pytest.raises(FormError):
        fit_exponent(h, 0)


def test_circle_and_sphere_slopes():
    circ = counting_histogram(enumerate_isotropic(CIRCLE, 2 ** 12), 2,
                              ConeRegion.cube(default_frame(CIRCLE), 1.0))
    assert 0.8 <= fit_exponent(circ)[0] <= 1.2
    sph = counting_histogram(enumerate_isotropic(SPHERE, 2 ** 8), 2, ConeRegion.cube(default_frame(SPHERE), 1.0))
    assert 1.8 <= fit_exponent(sph)[0] <= 2.2


def test_equidist_same_region_is_one():
    pts = enumerate_isotropic(SPHERE, 128)
    reg = ConeRegion.cube(default_frame(SPHERE), 0.5)
    assert equidist_ratio(pts, 6, reg, reg) == 1.0


def test_regions():
    fr = default_frame(SPHERE)
    assert parse_region(fr, "all") is None
    box = parse_region(fr, "box:-1,-2;1,2")
    assert box.chart_measure() == 8.0
    with pytest.raises(FormError):
        parse_region(fr, "ball:1")
    with pytest.raises(FormError):
        ConeRegion.box(fr, [0, 0], [0, 1])
    w = np.array([float(x) for x in fr.w])
    cap = ConeRegion.cap(fr, w, 0.2)
    assert cap.contains(w)[0]
    m = cap.chart_measure(samples=20000)
    assert 0 < m < math.inf


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40))
def test_prefix_property(a, b):
    lo, hi = sorted((a, b))
    small, big = enumerate_isotropic(CIRCLE, lo), enumerate_isotropic(CIRCLE, hi)
    assert np.array_equal(big.upto(lo).coords, small.coords)


def test_points_from_array_sorts():
    arr = [[3, 4, 5], [1, 0, 1], [0, 1, 1]]
    p = points_from_array(CIRCLE, arr)
    assert p.heights.tolist() == [1, 1, 5]
