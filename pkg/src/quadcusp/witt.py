"""Witt frames: a basis putting an isotropic form in hyperbolic normal form.

The frame basis has columns ``v0, u_1..u_k, d_1..d_m, z_k..z_1, w`` where
``(v0, w)`` and each ``(u_i, z_i)`` are hyperbolic pairs and the ``d_j`` span
the anisotropic kernel.  Columns whose square length is not a rational square
get a real rescaling factor; everything else is exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .forms import (
    FormError,
    IsotropicVector,
    RatSymForm,
    eval_bilinear,
    find_isotropic_seed,
    frac_inverse,
    frac_matmul,
    frac_nullspace,
    frac_transpose,
    symmetric_reduction,
    to_fraction,
)

SQRT2 = math.sqrt(2.0)
SEED_SEARCH_HEIGHT = 12


def _rational_sqrt(x: Fraction) -> Optional[Fraction]:
    if x < 0:
        return None
    n, d = math.isqrt(x.numerator), math.isqrt(x.denominator)
    if n * n == x.numerator and d * d == x.denominator:
        return Fraction(n, d)
    return None


def _bil(gram, v, w) -> Fraction:
    return sum((v[i] * gram[i][j] * w[j] for i in range(len(v)) for j in range(len(w))
                if gram[i][j] != 0 and v[i] != 0 and w[j] != 0), Fraction(0))


def _combine(basis, coeffs):
    """Linear combination of ambient vectors ``basis`` (rows) with ``coeffs``."""
    out = [Fraction(0)] * len(basis[0])
    for c, b in zip(coeffs, basis):
        if c:
            out = [o + c * x for o, x in zip(out, b)]
    return tuple(out)


def _hyperbolic_partner(gram, basis, u):
    """Isotropic ``z`` in span(basis) with b(u, z) = 1; ``u`` given in ambient coords."""
    for b in basis:
        c = _bil(gram, u, b)
        if c != 0:
            zq = _bil(gram, b, b)
            z = tuple(x - zq / (2 * c) * y for x, y in zip(b, u))
            return tuple(x / c for x in z)
    raise FormError("no hyperbolic partner: the subspace is degenerate")


def _find_isotropic_in(gram, basis) -> Optional[tuple]:
    """A nonzero rational isotropic vector in span(basis), or None."""
    for b in basis:
        if _bil(gram, b, b) == 0:
            return b
    k = len(basis)
    if k < 2:
        return None
    sub = [[_bil(gram, x, y) for y in basis] for x in basis]
    f = RatSymForm(tuple(map(tuple, sub)))
    pos, neg = f.signature
    if pos == 0 or neg == 0:
        return None
    seed = find_isotropic_seed(f, SEED_SEARCH_HEIGHT)
    if seed is None:
        return None
    return _combine(basis, [Fraction(c) for c in seed.coords])


@dataclass(frozen=True)
class CuspFrame:
    """Witt frame attached to the cusp point ``v0`` of ``L``."""

    L: RatSymForm
    v0: IsotropicVector
    basis: tuple[tuple[Fraction, ...], ...]  # columns of Pi, stored as rows
    norms: tuple[Fraction, ...]              # column k is rescaled by 1/sqrt(norms[k])
    n_pairs: int                             # hyperbolic pairs besides (v0, w)

    @cached_property
    def scales(self) -> tuple[float, ...]:
        return tuple(1.0 if n == 1 else 1.0 / math.sqrt(float(n)) for n in self.norms)

    @property
    def s(self) -> int:
        return self.L.dim

    @property
    def delta(self) -> int:
        return self.s - 2

    @property
    def w(self) -> tuple[Fraction, ...]:
        return self.basis[-1]

    @cached_property
    def exact(self) -> bool:
        return all(n == 1 for n in self.norms)

    @cached_property
    def Pi_rational(self):
        return frac_transpose(self.basis)

    @cached_property
    def Pi(self) -> np.ndarray:
        """Real frame matrix, columns scaled."""
        p = np.array([[float(x) for x in row] for row in self.Pi_rational])
        return p * np.array(self.scales)[None, :]

    @cached_property
    def Pi_inv(self) -> np.ndarray:
        inv = np.array([[float(x) for x in row] for row in frac_inverse(self.Pi_rational)])
        return inv / np.array(self.scales)[:, None]

    @cached_property
    def gram_rational(self):
        """``Pi^T M_L Pi`` on the unscaled rational basis."""
        return frac_matmul(frac_matmul(frac_transpose(self.Pi_rational), self.L.entries), self.Pi_rational)

    @cached_property
    def gram(self) -> np.ndarray:
        g = np.array([[float(x) for x in row] for row in self.gram_rational])
        sc = np.array(self.scales)
        return g * sc[:, None] * sc[None, :]

    @cached_property
    def middle(self) -> np.ndarray:
        """Middle Gram block L0' (unit majorant); empty when s = 2."""
        return np.rint(self.gram[1:-1, 1:-1]).astype(float)

    @cached_property
    def normal_form(self) -> RatSymForm:
        """The target form ``Pi^T M_L Pi`` as an exact form (entries 0, +-1)."""
        return RatSymForm(tuple(tuple(Fraction(int(round(x))) for x in row) for row in self.gram))

    # ---------------------------------------------------------------- coordinates

    def to_frame(self, x) -> np.ndarray:
        return self.Pi_inv @ np.asarray(x, dtype=float)

    def from_frame(self, y) -> np.ndarray:
        return self.Pi @ np.asarray(y, dtype=float)

    def pairing_v0(self, x) -> Fraction:
        """Exact ``b_L(v0, x)`` for rational ``x``."""
        return eval_bilinear(self.L, self.v0.coords, x)

    # ---------------------------------------------------------------- geodesic

    def G_frame(self, t: float) -> np.ndarray:
        d = np.ones(self.s)
        d[0] = math.exp(t / SQRT2)
        d[-1] = math.exp(-t / SQRT2)
        return np.diag(d)

    def G(self, t: float) -> np.ndarray:
        """Point of P_s(L) on the geodesic joining the cusps of ``w`` (t -> +inf) and ``v0``."""
        return self.Pi_inv.T @ self.G_frame(t) @ self.Pi_inv

    # ---------------------------------------------------------------- unipotent chart

    def u_frame(self, b) -> np.ndarray:
        """Unipotent element u(b) in frame coordinates; fixes e_1 and preserves L0."""
        b = np.asarray(b, dtype=float)
        s = self.s
        mb = self.middle @ b
        u = np.eye(s)
        u[0, 1:-1] = -mb
        u[0, -1] = -0.5 * float(b @ mb)
        u[1:-1, -1] = b
        return u

    def u(self, b) -> np.ndarray:
        """u(b) acting in the original coordinates."""
        return self.Pi @ self.u_frame(b) @ self.Pi_inv

    def chart_point_frame(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        return np.concatenate(([-0.5 * float(b @ self.middle @ b)], -b, [1.0]))

    def chart_point(self, b) -> np.ndarray:
        """Representative of the cone line u(-b) w (frame coefficient of w equal to 1)."""
        return self.Pi @ self.chart_point_frame(b)

    def chart_coords(self, x) -> np.ndarray:
        """Inverse chart; raises for lines inside ker b_L(v0, .)."""
        y = self.to_frame(x)
        scale = max(1.0, float(np.max(np.abs(y))))
        if abs(y[-1]) <= 1e-14 * scale:
            raise FormError("the line lies in ker b_L(v0, .): line at infinity of the chart")
        return -y[1:-1] / y[-1]

    def chart_coords_many(self, xs: np.ndarray) -> np.ndarray:
        y = np.asarray(xs, dtype=float) @ self.Pi_inv.T
        if np.any(y[:, -1] == 0):
            raise FormError("some line lies in ker b_L(v0, .)")
        return -y[:, 1:-1] / y[:, -1:]

    # ---------------------------------------------------------------- serialization

    def to_dict(self) -> dict:
        return {
            "L": [[str(x) for x in row] for row in self.L.entries],
            "v0": list(self.v0.coords),
            "basis_columns": [[str(x) for x in col] for col in self.basis],
            "column_norms": [str(x) for x in self.norms],
            "hyperbolic_pairs": self.n_pairs,
            "delta": self.delta,
        }


def witt_frame(L: RatSymForm, v0, opposite: Optional[Sequence] = None) -> CuspFrame:
    """Build a Witt frame with first vector ``v0``.

    ``opposite`` optionally fixes the direction of the last frame vector; it
    must be isotropic with ``b_L(v0, opposite) != 0`` and is rescaled so that
    ``b_L(v0, w) = 1``.
    """
    if not L.nondegenerate:
        raise FormError("L is degenerate")
    if not isinstance(v0, IsotropicVector):
        v0 = IsotropicVector.on(L, v0)
    v = tuple(Fraction(x) for x in v0.coords)
    if L(v) != 0:
        raise FormError(f"v0 = {v0.coords} is not isotropic")
    s = L.dim
    M = L.entries
    Mv = [sum((M[i][j] * v[j] for j in range(s)), Fraction(0)) for i in range(s)]

    if opposite is not None:
        w = tuple(to_fraction(x) for x in opposite)
        if L(w) != 0:
            raise FormError("opposite vector is not isotropic")
        c = eval_bilinear(L, v, w)
        if c == 0:
            raise FormError("b_L(v0, opposite) = 0: the cusps are not opposite")
    else:
        j = next(i for i in range(s) if Mv[i] != 0)
        w0 = tuple(Fraction(int(i == j)) for i in range(s))
        c = Mv[j]
        w = tuple(x - L(w0) / (2 * c) * y for x, y in zip(w0, v))
    w = tuple(x / c for x in w)

    Mw = [sum((M[i][j] * w[j] for j in range(s)), Fraction(0)) for i in range(s)]
    rest = frac_nullspace([Mv, Mw], s)

    firsts, partners = [], []
    while len(rest) >= 2:
        u = _find_isotropic_in(M, rest)
        if u is None:
            break
        z = _hyperbolic_partner(M, rest, u)
        firsts.append(u)
        partners.append(z)
        Mu = [sum((M[i][j] * u[j] for j in range(s)), Fraction(0)) for i in range(s)]
        Mz = [sum((M[i][j] * z[j] for j in range(s)), Fraction(0)) for i in range(s)]
        # complement of the plane inside span(rest), written in ambient coords
        cons = [[_bil_vec(Mu, r) for r in rest], [_bil_vec(Mz, r) for r in rest]]
        rest = [_combine(rest, k) for k in frac_nullspace(cons, len(rest))]

    diag_vecs, diag_norms = [], []
    if rest:
        sub = [[_bil(M, x, y) for y in rest] for x in rest]
        P, d = symmetric_reduction(sub)
        for col in range(len(rest)):
            vec = _combine(rest, [P[r][col] for r in range(len(rest))])
            root = _rational_sqrt(abs(d[col]))
            if root is not None:
                diag_vecs.append(tuple(x / root for x in vec))
                diag_norms.append(Fraction(1))
            else:
                diag_vecs.append(vec)
                diag_norms.append(abs(d[col]))
        # positive squares first keeps the middle block tidy
        order = sorted(range(len(d)), key=lambda i: (-(d[i] > 0), i))
        diag_vecs = [diag_vecs[i] for i in order]
        diag_norms = [diag_norms[i] for i in order]

    basis = [v] + firsts + diag_vecs + partners[::-1] + [w]
    norms = [Fraction(1)] * (1 + len(firsts)) + diag_norms + [Fraction(1)] * (len(partners) + 1)
    return CuspFrame(L, v0, tuple(basis), tuple(norms), len(firsts))


def _bil_vec(Mu, r) -> Fraction:
    return sum((a * b for a, b in zip(Mu, r) if a and b), Fraction(0))


def default_frame(L: RatSymForm, height_bound: int = 20) -> CuspFrame:
    seed = find_isotropic_seed(L, height_bound)
    if seed is None:
        raise FormError(f"no isotropic integer vector of height <= {height_bound}")
    return witt_frame(L, seed)
