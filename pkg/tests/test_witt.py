from fractions import Fraction

import numpy as np
import pytest
import sympy

from quadcusp.forms import FormError, RatSymForm, eval_bilinear, suspend_form
from quadcusp.witt import default_frame, witt_frame

FORMS = [
    RatSymForm.normal_form(4, 1),
    RatSymForm.normal_form(4, 2),
    RatSymForm.diagonal([-1, -1, -1, 1]),
    RatSymForm.diagonal([-1, -1, 1]),
    RatSymForm.diagonal([1, 1, -1, -1, 2]),
    suspend_form(RatSymForm.diagonal([1, 2, 5])),
    RatSymForm.from_polynomial(3, {(0, 1): 1, (2, 2): 3}),
]


def _is_normal_form(g: sympy.Matrix, pairs: int) -> bool:
    """Antidiagonal ones on the outer pairs, 0/+-1 middle with unit majorant."""
    s = g.shape[0]
    for i in range(s):
        for j in range(s):
            inner = pairs + 1 <= i < s - pairs - 1 and pairs + 1 <= j < s - pairs - 1
            if inner:
                continue
            want = 1 if i + j == s - 1 and (i <= pairs or i >= s - pairs - 1) else 0
            if g[i, j] != want:
                return False
    return True


def test_normal_form_is_identity_frame():
    L0 = RatSymForm.normal_form(4, 1)
    fr = witt_frame(L0, (1, 0, 0, 0))
    assert fr.Pi_rational == tuple(tuple(Fraction(int(i == j)) for j in range(4)) for i in range(4))


def test_hyperbolic_plane():
    L = RatSymForm.from_polynomial(2, {(0, 1): 2})
    fr = witt_frame(L, (1, 0))
    assert fr.delta == 0
    assert [list(r) for r in fr.Pi_rational] == [[1, 0], [0, 1]]


@pytest.mark.parametrize("L", FORMS)
def test_exact_congruence(L):
    fr = default_frame(L)
    P = sympy.Matrix([[sympy.Rational(x.numerator, x.denominator) for x in row] for row in fr.Pi_rational])
    M = sympy.Matrix([[sympy.Rational(x.numerator, x.denominator) for x in row] for row in L.entries])
    g = P.T * M * P
    assert P.det() != 0
    assert eval_bilinear(L, fr.v0.coords, fr.w) == 1
    assert L(fr.w) == 0
    # the middle block is diagonal up to the recorded norms
    if fr.exact:
        assert _is_normal_form(g, 0)
        assert g == sympy.Matrix([[int(x) for x in row] for row in fr.normal_form.entries])
    assert np.allclose(fr.gram, np.array(fr.normal_form.entries, float), atol=1e-12)


def test_sphere_frame_middle_block():
    fr = default_frame(RatSymForm.diagonal([-1, -1, -1, 1]))
    assert fr.delta == 2
    assert np.array_equal(fr.middle, -np.eye(2)) or np.array_equal(np.abs(fr.middle), np.eye(2))


def test_opposite_vector_is_used():
    L = RatSymForm.diagonal([-1, -1, -1, 1])
    fr = witt_frame(L, (-1, 0, 0, 1), opposite=(1, 0, 0, 1))
    w = np.array([float(x) for x in fr.w])
    assert np.allclose(w / w[-1], [1, 0, 0, 1])


def test_rejects_non_isotropic():
    with pytest.raises(FormError):
        witt_frame(RatSymForm.diagonal([-1, 1]), (1, 2))


def test_rejects_non_opposite():
    L = RatSymForm.diagonal([-1, -1, -1, 1])
    with pytest.raises(FormError):
        witt_frame(L, (-1, 0, 0, 1), opposite=(-1, 0, 0, 1))


def test_unipotent_preserves_form(rng):
    for L in FORMS:
        fr = default_frame(L)
        u = fr.u_frame(rng.normal(size=fr.delta))
        assert np.allclose(u.T @ fr.gram @ u, fr.gram, atol=1e-10)
        assert np.allclose(u[:, 0], np.eye(fr.s)[:, 0])
