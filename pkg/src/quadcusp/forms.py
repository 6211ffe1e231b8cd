"""Exact rational quadratic forms.

A form is stored by its symmetric Gram matrix ``M`` so that ``f(v) = v^T M v``.
All arithmetic is done with :class:`fractions.Fraction`; nothing here touches
floating point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, reduce
from typing import Iterable, Optional, Sequence

import numpy as np

Rational = Fraction
Matrix = tuple[tuple[Fraction, ...], ...]


class FormError(ValueError):
    """Raised for degenerate or malformed forms."""


def to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float):
        # floats are only accepted when they are exact dyadic values a user typed
        return Fraction(x).limit_denominator(10**12)
    return Fraction(x)


def _as_matrix(entries) -> Matrix:
    return tuple(tuple(to_fraction(x) for x in row) for row in entries)


def frac_det(m: Sequence[Sequence[Fraction]]) -> Fraction:
    """Exact determinant by fraction-valued Gaussian elimination."""
    a = [list(row) for row in m]
    n = len(a)
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            a[col], a[piv] = a[piv], a[col]
            det = -det
        p = a[col][col]
        det *= p
        for r in range(col + 1, n):
            if a[r][col] != 0:
                factor = a[r][col] / p
                a[r] = [x - factor * y for x, y in zip(a[r], a[col])]
    return det


def frac_inverse(m: Sequence[Sequence[Fraction]]) -> Matrix:
    n = len(m)
    a = [list(row) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(m)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            raise FormError("matrix is singular")
        a[col], a[piv] = a[piv], a[col]
        p = a[col][col]
        a[col] = [x / p for x in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                factor = a[r][col]
                a[r] = [x - factor * y for x, y in zip(a[r], a[col])]
    return tuple(tuple(row[n:]) for row in a)


def frac_matmul(a, b) -> Matrix:
    bt = list(zip(*b))
    return tuple(tuple(sum((x * y for x, y in zip(row, col)), Fraction(0)) for col in bt) for row in a)


def frac_transpose(a) -> Matrix:
    return tuple(zip(*a))


def frac_nullspace(rows: Sequence[Sequence[Fraction]], ncols: int) -> list[tuple[Fraction, ...]]:
    """Basis of the right null space, one vector per free column (RREF order)."""
    a = [list(r) for r in rows]
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(a)) if a[i][c] != 0), None)
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        p = a[r][c]
        a[r] = [x / p for x in a[r]]
        for i in range(len(a)):
            if i != r and a[i][c] != 0:
                factor = a[i][c]
                a[i] = [x - factor * y for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
        if r == len(a):
            break
    basis = []
    for free in (c for c in range(ncols) if c not in pivots):
        v = [Fraction(0)] * ncols
        v[free] = Fraction(1)
        for i, pc in enumerate(pivots):
            v[pc] = -a[i][free]
        basis.append(tuple(v))
    return basis


def symmetric_reduction(m: Sequence[Sequence[Fraction]]) -> tuple[Matrix, tuple[Fraction, ...]]:
    """Congruence-diagonalise a symmetric rational matrix.

    Returns ``(P, d)`` with ``P^T M P = diag(d)`` exactly and ``P`` invertible.
    Zero pivots are handled by the usual ``e_i + e_j`` trick.
    """
    n = len(m)
    a = [list(row) for row in m]
    # columns of P, kept as rows of pt for convenience
    pt = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]

    def add_to(i: int, j: int, c: Fraction) -> None:
        # basis change e_i <- e_i + c e_j applied as congruence
        for k in range(n):
            a[i][k] += c * a[j][k]
        for k in range(n):
            a[k][i] += c * a[k][j]
        pt[i] = [x + c * y for x, y in zip(pt[i], pt[j])]

    def swap(i: int, j: int) -> None:
        a[i], a[j] = a[j], a[i]
        for row in a:
            row[i], row[j] = row[j], row[i]
        pt[i], pt[j] = pt[j], pt[i]

    for k in range(n):
        if a[k][k] == 0:
            piv = next((i for i in range(k + 1, n) if a[i][i] != 0), None)
            if piv is not None:
                swap(k, piv)
            else:
                partner = next((j for j in range(k + 1, n) if a[k][j] != 0), None)
                if partner is None:
                    continue  # the whole row is zero: a null direction
                add_to(k, partner, Fraction(1))
        p = a[k][k]
        for i in range(k + 1, n):
            if a[i][k] != 0:
                add_to(i, k, -a[i][k] / p)
    return frac_transpose(pt), tuple(a[i][i] for i in range(n))


@dataclass(frozen=True)
class RatSymForm:
    """Symmetric rational bilinear/quadratic form of dimension ``dim``."""

    entries: Matrix

    def __post_init__(self):
        m = _as_matrix(self.entries)
        n = len(m)
        if n == 0 or any(len(row) != n for row in m):
            raise FormError("form matrix must be square and non-empty")
        for i in range(n):
            for j in range(i):
                if m[i][j] != m[j][i]:
                    raise FormError(f"entries[{i}][{j}] != entries[{j}][{i}]")
        object.__setattr__(self, "entries", m)

    @classmethod
    def diagonal(cls, values: Iterable) -> "RatSymForm":
        vals = [to_fraction(v) for v in values]
        n = len(vals)
        return cls(tuple(tuple(vals[i] if i == j else Fraction(0) for j in range(n)) for i in range(n)))

    @classmethod
    def identity(cls, n: int) -> "RatSymForm":
        return cls.diagonal([1] * n)

    @classmethod
    def from_polynomial(cls, n: int, coeffs: dict[tuple[int, int], object]) -> "RatSymForm":
        """Build from ``{(i, j): a_ij}`` meaning ``sum a_ij x_i x_j`` (0-based, i <= j)."""
        m = [[Fraction(0)] * n for _ in range(n)]
        for (i, j), c in coeffs.items():
            c = to_fraction(c)
            if i == j:
                m[i][i] += c
            else:
                m[i][j] += c / 2
                m[j][i] += c / 2
        return cls(tuple(map(tuple, m)))

    @classmethod
    def normal_form(cls, s: int, ell: int, eps: int = 1) -> "RatSymForm":
        """``2x_1x_s + ... + 2x_l x_{s-l+1} + eps (x_{l+1}^2 + ... + x_{s-l}^2)``."""
        if not 0 <= 2 * ell <= s or eps not in (1, -1):
            raise FormError("need 0 <= 2*ell <= s and eps in {1, -1}")
        m = [[Fraction(0)] * s for _ in range(s)]
        for i in range(ell):
            m[i][s - 1 - i] = m[s - 1 - i][i] = Fraction(1)
        for i in range(ell, s - ell):
            m[i][i] = Fraction(eps)
        return cls(tuple(map(tuple, m)))

    @property
    def dim(self) -> int:
        return len(self.entries)

    @cached_property
    def det(self) -> Fraction:
        return frac_det(self.entries)

    @cached_property
    def signature(self) -> tuple[int, int]:
        _, d = symmetric_reduction(self.entries)
        return sum(1 for x in d if x > 0), sum(1 for x in d if x < 0)

    @property
    def nondegenerate(self) -> bool:
        return self.det != 0

    @cached_property
    def denominator(self) -> int:
        """Smallest N with N*M integral; then ``f(Z^s)`` lies in ``(1/N) Z``."""
        return reduce(math.lcm, (x.denominator for row in self.entries for x in row), 1)

    @cached_property
    def integer_matrix(self) -> np.ndarray:
        """``N * M`` as an int64 array, N = :attr:`denominator`."""
        n = self.denominator
        return np.array([[int(x * n) for x in row] for row in self.entries], dtype=np.int64)

    def as_float(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.entries])

    def __call__(self, v) -> Fraction:
        return eval_bilinear(self, v, v)

    def congruent(self, b) -> "RatSymForm":
        """The form ``f[B]`` with matrix ``B^T M B``."""
        b = _as_matrix(b)
        return RatSymForm(frac_matmul(frac_matmul(frac_transpose(b), self.entries), b))

    def restrict(self, basis: Sequence[Sequence]) -> "RatSymForm":
        """Gram matrix of the form on the span of ``basis`` (vectors as rows)."""
        cols = frac_transpose(_as_matrix(basis))
        return self.congruent(cols)

    def __str__(self) -> str:
        return format_form(self)


def eval_bilinear(f: RatSymForm, v, w) -> Fraction:
    if len(v) != f.dim or len(w) != f.dim:
        raise FormError(f"dimension mismatch: form has dim {f.dim}, got {len(v)} and {len(w)}")
    v = [to_fraction(x) for x in v]
    w = [to_fraction(x) for x in w]
    return sum((v[i] * f.entries[i][j] * w[j] for i in range(f.dim) for j in range(f.dim)
                if f.entries[i][j] != 0), Fraction(0))


def signature(f: RatSymForm) -> tuple[int, int]:
    return f.signature


def suspend_form(q: RatSymForm) -> RatSymForm:
    """The form ``x_{n+1}^2 - q(x_1..x_n)`` on ``R^{n+1}``."""
    if not q.nondegenerate:
        raise FormError("q is degenerate (det = 0); the suspended form would be degenerate too")
    n = q.dim
    m = [[-q.entries[i][j] for j in range(n)] + [Fraction(0)] for i in range(n)]
    m.append([Fraction(0)] * n + [Fraction(1)])
    return RatSymForm(tuple(map(tuple, m)))


# ---------------------------------------------------------------- integer vectors

def pz_normalize(v: Sequence[int]) -> tuple[int, ...]:
    """Primitive representative whose last nonzero coordinate is positive."""
    v = [int(x) for x in v]
    g = reduce(math.gcd, v, 0)
    if g == 0:
        raise FormError("zero vector has no primitive representative")
    v = [x // g for x in v]
    last = next(x for x in reversed(v) if x != 0)
    if last < 0:
        v = [-x for x in v]
    return tuple(v)


def primitive_integer_multiple(v: Sequence) -> tuple[int, ...]:
    """Primitive PZ_+ integer vector on the rational line through ``v``."""
    fr = [to_fraction(x) for x in v]
    den = reduce(math.lcm, (x.denominator for x in fr), 1)
    return pz_normalize([int(x * den) for x in fr])


@dataclass(frozen=True)
class IsotropicVector:
    """Primitive PZ_+-normalised integer vector on the cone of a form."""

    coords: tuple[int, ...]
    form: Optional[RatSymForm] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        c = tuple(int(x) for x in self.coords)
        if pz_normalize(c) != c:
            raise FormError(f"{c} is not primitive with positive last nonzero coordinate")
        if self.form is not None and self.form(c) != 0:
            raise FormError(f"{c} is not isotropic for the given form")
        object.__setattr__(self, "coords", c)

    @classmethod
    def on(cls, form: RatSymForm, v: Sequence) -> "IsotropicVector":
        return cls(primitive_integer_multiple(v), form)

    @property
    def height(self) -> int:
        return max(abs(x) for x in self.coords)

    @property
    def eheight(self) -> float:
        return math.sqrt(sum(x * x for x in self.coords))

    def __len__(self):
        return len(self.coords)

    def __iter__(self):
        return iter(self.coords)

    def __getitem__(self, i):
        return self.coords[i]


def _shell(dim: int, h: int) -> np.ndarray:
    """All integer vectors with max-norm exactly h, in lexicographic order."""
    pieces = []
    for k in range(dim):
        # coordinate k is the first to reach |x_k| = h
        axes = [np.arange(-h + 1, h) if j < k else
                np.array([-h, h]) if j == k else np.arange(-h, h + 1) for j in range(dim)]
        pieces.append(np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim))
    out = np.concatenate(pieces)
    return out[np.lexsort(out.T[::-1])]


def find_isotropic_seed(L: RatSymForm, height_bound: int) -> Optional[IsotropicVector]:
    """Smallest-height primitive isotropic integer vector, ties broken lexicographically.

    Returns ``None`` when nothing exists with height <= ``height_bound``; that is
    only a statement about the searched box.
    """
    if not L.nondegenerate:
        raise FormError("L is degenerate")
    pos, neg = L.signature
    if pos == 0 or neg == 0:
        return None  # definite forms are anisotropic over R
    a = L.integer_matrix
    for h in range(1, height_bound + 1):
        cand = _shell(L.dim, h)
        vals = np.einsum("ij,jk,ik->i", cand, a, cand)
        hits = cand[vals == 0]
        if len(hits) == 0:
            continue
        g = np.gcd.reduce(np.abs(hits), axis=1)
        hits = hits[g == 1]
        # PZ_+: last nonzero coordinate positive
        last = np.array([row[np.nonzero(row)[0][-1]] for row in hits]) if len(hits) else np.array([])
        hits = hits[last > 0] if len(hits) else hits
        if len(hits):
            return IsotropicVector(tuple(int(x) for x in hits[0]), L)  # meshgrid order is lexicographic
    return None


def isotropic_vectors_in_box(L: RatSymForm, height: int) -> np.ndarray:
    """All primitive PZ_+ isotropic integer vectors of height <= ``height`` (rows)."""
    a = L.integer_matrix
    found = []
    for h in range(1, height + 1):
        cand = _shell(L.dim, h)
        cand = cand[np.einsum("ij,jk,ik->i", cand, a, cand) == 0]
        cand = cand[np.gcd.reduce(np.abs(cand), axis=1) == 1]
        if len(cand):
            last = np.array([row[np.nonzero(row)[0][-1]] for row in cand])
            found.append(cand[last > 0])
    return np.concatenate(found) if found else np.zeros((0, L.dim), dtype=np.int64)


# ---------------------------------------------------------------- text format

def format_form(f: RatSymForm) -> str:
    """Dimension on the first line, then the upper triangle row by row."""
    lines = [str(f.dim)]
    for i in range(f.dim):
        lines.append(" ".join(str(f.entries[i][j]) for j in range(i, f.dim)))
    return "\n".join(lines) + "\n"


def parse_form(text: str) -> RatSymForm:
    tokens = []
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        tokens.extend(line.replace(",", " ").split())
    if not tokens:
        raise FormError("empty form literal")
    try:
        n = int(tokens[0])
    except ValueError as exc:
        raise FormError(f"bad dimension token {tokens[0]!r}") from exc
    need = n * (n + 1) // 2
    if len(tokens) - 1 != need:
        raise FormError(f"dimension {n} needs {need} upper-triangular entries, got {len(tokens) - 1}")
    vals = iter(Fraction(t) for t in tokens[1:])
    m = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            m[i][j] = m[j][i] = next(vals)
    return RatSymForm(tuple(map(tuple, m)))


def read_form(path) -> RatSymForm:
    with open(path) as fh:
        return parse_form(fh.read())


def write_form(f: RatSymForm, path) -> None:
    with open(path, "w") as fh:
        fh.write(format_form(f))


NAMED_FORMS = {
    "circle": lambda: RatSymForm.identity(2),
    "sphere": lambda: RatSymForm.identity(3),
    "hyperboloid": lambda: RatSymForm.diagonal([1, 1, -1]),
    "nopoints": lambda: RatSymForm.diagonal([Fraction(1, 3), Fraction(1, 3)]),
}


def resolve_form(spec: str) -> RatSymForm:
    """A named quadric (``circle``, ``sphere``, ...) or a path to a form literal file."""
    if spec in NAMED_FORMS:
        return NAMED_FORMS[spec]()
    return read_form(spec)
