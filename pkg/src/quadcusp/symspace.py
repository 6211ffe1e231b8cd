"""Geometry of P_s and P_s(L): distances, Busemann functions, horoball traces."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import mpmath
import numpy as np
from scipy.linalg import eigh, expm
from scipy.optimize import brentq

from .forms import RatSymForm, eval_bilinear, frac_inverse, to_fraction
from .witt import CuspFrame, witt_frame

SQRT2 = math.sqrt(2.0)
SYM_TOL = 1e-12
DET_TOL = 1e-9


class GeometryError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PosDefForm:
    """A point of P_s (det_target 1) or of P_s(L) (det_target |det L|)."""

    entries: np.ndarray
    det_target: float = 1.0

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise GeometryError("PosDefForm needs a square matrix")
        scale = max(1.0, float(np.max(np.abs(a))))
        if np.max(np.abs(a - a.T)) > SYM_TOL * scale:
            raise GeometryError("matrix is not symmetric")
        a = 0.5 * (a + a.T)
        ev = np.linalg.eigvalsh(a)
        if ev[0] <= 0:
            raise GeometryError("matrix is not positive definite")
        det = float(np.prod(ev))
        if abs(det - self.det_target) > DET_TOL * self.det_target:
            raise GeometryError(f"determinant {det!r} differs from target {self.det_target!r}")
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __call__(self, v) -> float:
        v = np.asarray(v, dtype=float)
        return float(v @ self.entries @ v)

    def act(self, g) -> "PosDefForm":
        """The form Q[g] = g^T Q g; ``g`` must have |det g| = 1."""
        g = np.asarray(g, dtype=float)
        return PosDefForm(g.T @ self.entries @ g, self.det_target)


def _matrix(Q) -> np.ndarray:
    return Q.entries if isinstance(Q, PosDefForm) else np.asarray(Q, dtype=float)


# ---------------------------------------------------------------- metric

def relative_eigenvalues(Q1, Q2) -> np.ndarray:
    return eigh(_matrix(Q2), _matrix(Q1), eigvals_only=True)


def distance(Q1, Q2) -> float:
    a, b = _matrix(Q1), _matrix(Q2)
    if a.shape != b.shape:
        raise GeometryError("dimension mismatch")
    lam = relative_eigenvalues(a, b)
    if lam[0] <= 0:
        raise GeometryError("non positive definite input")
    return float(math.sqrt(float(np.sum(np.log(lam) ** 2))))


def _mp_matrix(a) -> mpmath.matrix:
    if isinstance(a, mpmath.matrix):
        return a
    a = _matrix(a)
    return mpmath.matrix([[mpmath.mpf(float(x)) for x in row] for row in a])


def distance_mp(Q1, Q2, dps: int = 60) -> mpmath.mpf:
    """High-precision distance; inputs may be mpmath matrices."""
    with mpmath.workdps(dps):
        a, b = _mp_matrix(Q1), _mp_matrix(Q2)
        c = mpmath.cholesky(a)
        ci = mpmath.inverse(c)
        m = ci * b * ci.T
        m = (m + m.T) / 2
        ev = mpmath.eigsy(m, eigvals_only=True)
        return mpmath.sqrt(sum(mpmath.log(x) ** 2 for x in ev))


# ---------------------------------------------------------------- Busemann functions

def busemann_vector(v, Q) -> float:
    """f_v(Q) = sqrt(2) ln Q(v) for an isotropic vector v."""
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        raise GeometryError("zero vector")
    val = float(v @ _matrix(Q) @ v)
    if val <= 0:
        raise GeometryError("Q(v) must be positive")
    return SQRT2 * math.log(val)


def busemann_ambient(i: int, Q) -> float:
    """Busemann function on P_s of the i-th diagonal ray (see :func:`ambient_ray`)."""
    a = _matrix(Q)
    s = a.shape[0]
    if not 1 <= i <= s - 1:
        raise GeometryError(f"wall index must lie in 1..{s - 1}")
    sign, logdet = np.linalg.slogdet(a[s - i:, s - i:])
    return math.sqrt(s / ((s - i) * i)) * logdet


def ambient_ray(i: int, s: int, mp: bool = False) -> Callable:
    """Unit speed ray diag(e^{l t} (s-i times), e^{-m t} (i times)) in P_s."""
    if not 1 <= i <= s - 1:
        raise GeometryError(f"wall index must lie in 1..{s - 1}")

    def ray(t):
        if mp:
            lam = mpmath.sqrt(mpmath.mpf(i) / (s * (s - i)))
            mu = mpmath.sqrt(mpmath.mpf(s - i) / (s * i))
            return mpmath.diag([mpmath.exp(lam * t)] * (s - i) + [mpmath.exp(-mu * t)] * i)
        lam = math.sqrt(i / (s * (s - i)))
        mu = math.sqrt((s - i) / (s * i))
        return np.diag([math.exp(lam * t)] * (s - i) + [math.exp(-mu * t)] * i)

    return ray


def _frame_pi_inv_mp(frame: CuspFrame) -> mpmath.matrix:
    inv = frac_inverse(frame.Pi_rational)
    rows = []
    for k, row in enumerate(inv):
        sc = mpmath.sqrt(mpmath.mpf(frame.norms[k].numerator) / frame.norms[k].denominator)
        rows.append([mpmath.mpf(x.numerator) / x.denominator * sc for x in row])
    return mpmath.matrix(rows)


def frame_ray(frame: CuspFrame, toward: str = "v0", mp: bool = False) -> Callable:
    """Unit speed geodesic ray along the frame geodesic converging to the cusp of v0 or w."""
    sgn = -1 if toward == "v0" else 1
    if toward not in ("v0", "w"):
        raise GeometryError("toward must be 'v0' or 'w'")
    if not mp:
        return lambda t: frame.G(sgn * t)

    def ray(t):
        pinv = _frame_pi_inv_mp(frame)
        d = [mpmath.mpf(1)] * frame.s
        d[0] = mpmath.exp(sgn * t / mpmath.sqrt(2))
        d[-1] = mpmath.exp(-sgn * t / mpmath.sqrt(2))
        return pinv.T * mpmath.diag(d) * pinv

    return ray


def busemann_limit_check(f_closed, ray: Callable, Q, T: float) -> float:
    """|(d(Q, r(T)) - T) - f(Q)|; high precision when ``ray`` returns mpmath matrices."""
    f = f_closed(Q) if callable(f_closed) else float(f_closed)
    with mpmath.workdps(60):
        r = ray(mpmath.mpf(T))
        if isinstance(r, mpmath.matrix):
            return abs(float(distance_mp(Q, r) - T) - f)
    return abs(distance(Q, r) - T - f)


def busemann_limit(Q, ray: Callable, T: float, dps: int = 60) -> float:
    """Limit of d(Q, r(t)) - t extrapolated from t = T and t = 2T.

    ``ray`` must return mpmath matrices.  Along a ray, d^2 = t^2 + 2 c t + c'
    up to exponentially small terms, so ``c`` (the limit) is recovered from two
    evaluations even when d - t itself converges like 1/t.
    """
    with mpmath.workdps(dps):
        T = mpmath.mpf(T)
        d1 = distance_mp(Q, ray(T), dps)
        d2 = distance_mp(Q, ray(2 * T), dps)
        c = ((d2 ** 2 - 4 * T ** 2) - (d1 ** 2 - T ** 2)) / (2 * T)
        return float(c)


# ---------------------------------------------------------------- oriented distance

def odist(v, w, L: RatSymForm) -> float:
    """Oriented distance between the horoballs of two opposite cusp vectors."""
    c = eval_bilinear(L, v, w)
    if c == 0:
        raise GeometryError("b_L(v, w) = 0: the horoballs are not opposite")
    return 2 * SQRT2 * math.log(abs(float(c))) if abs(c) < 2 ** 1000 else \
        2 * SQRT2 * (math.log(abs(c.numerator)) - math.log(c.denominator))


def odist_numeric(v, w, L: RatSymForm) -> float:
    """inf of f_v over the horoball of w, found on the geodesic joining the two cusps."""
    fr = witt_frame(L, v, opposite=w)
    wv = np.array([float(x) for x in w])
    vv = np.array([float(x) for x in fr.v0.coords])
    # v0 is the primitive normalisation of v; correct for the scale
    lam = _ratio(v, fr.v0.coords)

    def fw(t):
        return busemann_vector(wv, fr.G(t))

    lo, hi = -1.0, 1.0
    while fw(lo) < 0:
        lo *= 2
    while fw(hi) > 0:
        hi *= 2
    t0 = brentq(fw, lo, hi, xtol=1e-14, rtol=1e-15)
    return busemann_vector(vv, fr.G(t0)) + 2 * SQRT2 * math.log(abs(lam))


def _ratio(v, base) -> float:
    for a, b in zip(v, base):
        if b != 0:
            return float(to_fraction(a) / b)
    raise GeometryError("zero base vector")


# ---------------------------------------------------------------- random points

def random_point_ambient(s: int, rng: np.random.Generator, spread: float = 1.0) -> np.ndarray:
    a = rng.normal(scale=spread, size=(s, s))
    x = 0.5 * (a + a.T)
    x -= np.trace(x) / s * np.eye(s)
    return expm(x)


def random_point_frame(frame: CuspFrame, rng: np.random.Generator, spread: float = 1.0) -> np.ndarray:
    """Random point of P_s(L): G(0) moved by exp of a random element of so(L)."""
    s = frame.s
    a = rng.normal(scale=spread, size=(s, s))
    a = a - a.T
    g = expm(np.linalg.solve(frame.gram, a))
    q = frame.Pi_inv.T @ (g.T @ g) @ frame.Pi_inv
    return 0.5 * (q + q.T)


# ---------------------------------------------------------------- chart

def unipotent_point(frame: CuspFrame, b) -> np.ndarray:
    """Unit representative of the cone line with chart coordinate b."""
    x = frame.chart_point(b)
    return x / np.linalg.norm(x)


def line_to_unipotent(frame: CuspFrame, d) -> np.ndarray:
    return frame.chart_coords(d)


def chart_angle_constants(frame: CuspFrame, center, radius: float, pairs: int,
                          rng: np.random.Generator) -> tuple[float, float]:
    """Empirical bi-Lipschitz constants between |b1 - b2| and the angle of the lines."""
    center = np.asarray(center, dtype=float)
    k = frame.delta
    b1 = center + rng.uniform(-radius, radius, size=(pairs, k))
    b2 = center + rng.uniform(-radius, radius, size=(pairs, k))
    ratios = []
    for x, y in zip(b1, b2):
        eu = float(np.linalg.norm(x - y))
        if eu == 0:
            continue
        p, q = unipotent_point(frame, x), unipotent_point(frame, y)
        ang = math.acos(min(1.0, abs(float(p @ q))))
        ratios.append(ang / eu)
    return min(ratios), max(ratios)


# ---------------------------------------------------------------- horoball traces

@dataclass(frozen=True)
class TraceData:
    """Frame description of a cusp vector w: w = c * u(-center) e_s in frame coordinates."""

    c: float
    center: np.ndarray
    D: float


def trace_data(frame: CuspFrame, w) -> TraceData:
    y = frame.to_frame(w)
    exact = all(isinstance(x, (int, np.integer, Fraction)) for x in w)
    if exact and frame.L(tuple(Fraction(int(x)) if not isinstance(x, Fraction) else x for x in w)) != 0:
        raise GeometryError("w is not isotropic")
    c = float(frame.pairing_v0(w)) if exact else float(y[-1])
    if c == 0:
        raise GeometryError("w lies in ker b_L(v0, .): not opposite to v0")
    return TraceData(c, -y[1:-1] / y[-1], 2 * SQRT2 * math.log(abs(c)))


def _flowed_values(frame: CuspFrame, y: np.ndarray, t: float, b: np.ndarray) -> np.ndarray:
    """G(t)(u(b) w) in frame coordinates for a batch of chart points b (rows)."""
    m = frame.middle
    ys = y[-1]
    mid = y[1:-1][None, :] + b * ys
    mb = b @ m
    first = y[0] - mb @ y[1:-1] - 0.5 * np.einsum("ij,ij->i", b, mb) * ys
    return (math.exp(t / SQRT2) * first ** 2 + np.sum(mid ** 2, axis=1)
            + math.exp(-t / SQRT2) * ys ** 2)


def trace_membership(frame: CuspFrame, w, t: float, b) -> bool:
    """Whether G(t)[u(b)] lies in the horoball of w."""
    return bool(trace_membership_many(frame, w, t, np.atleast_2d(np.asarray(b, float)))[0])


def trace_membership_many(frame: CuspFrame, w, t: float, bs: np.ndarray) -> np.ndarray:
    y = frame.to_frame(w)
    if y[-1] == 0:
        raise GeometryError("w lies in ker b_L(v0, .): not opposite to v0")
    return _flowed_values(frame, y, t, np.asarray(bs, float)) <= 1.0


def trace_membership_closed(frame: CuspFrame, w, t: float, b) -> bool:
    """The explicit inequality after translating w to a multiple of e_s."""
    td = trace_data(frame, w)
    x = np.asarray(b, float) - td.center
    mx = float(x @ frame.middle @ x)
    lhs = 0.25 * math.exp(t / SQRT2) * mx ** 2 + float(x @ x) + math.exp(-t / SQRT2)
    return lhs <= math.exp(-td.D / SQRT2)


def trace_membership_matrix(frame: CuspFrame, w, t: float, b) -> bool:
    """Direct matrix route: f_w(G(t)[u(b)]) <= 0 in the original coordinates."""
    Q = frame.G(t)
    g = frame.u(b)
    return busemann_vector(np.asarray(w, float), g.T @ Q @ g) <= 0


def _ball_sample(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    x = rng.normal(size=(n, k))
    x /= np.linalg.norm(x, axis=1)[:, None]
    r = rng.uniform(size=n) ** (1.0 / k)
    return x * r[:, None]


def _ball_volume(k: int, r: float) -> float:
    return math.pi ** (k / 2) / math.gamma(k / 2 + 1) * r ** k


def trace_measure_mc(frame: CuspFrame, w, t: float, samples: int, seed: int,
                     kappa0: float = 1.0) -> tuple[float, float]:
    """Monte-Carlo chart measure of the trace of the horoball of w at time t."""
    pos, neg = frame.L.signature
    if min(pos, neg) < 2:
        raise GeometryError("trace measure law needs min(a, b) >= 2")
    td = trace_data(frame, w)
    k = frame.delta
    radius = kappa0 * math.exp(-td.D / (2 * SQRT2))
    rng = np.random.default_rng(seed)
    pts = td.center + radius * _ball_sample(rng, samples, k)
    hits = trace_membership_many(frame, w, t, pts)
    p = float(np.mean(hits))
    vol = _ball_volume(k, radius)
    return p * vol, math.sqrt(max(p * (1 - p), 0.0) / samples) * vol


def trace_inclusion_check(frame: CuspFrame, w, t: float, samples: int, seed: int,
                          box_factor: float = 1.5) -> dict:
    """Sample a box around u_w and compare members with the ball B(u_w, e^{-D/2sqrt2}).

    Returns the number of sampled members, the fitted kappa0 (largest normalised
    distance of a member) and the number of members outside the unit-kappa ball.
    """
    td = trace_data(frame, w)
    k = frame.delta
    r = math.exp(-td.D / (2 * SQRT2))
    rng = np.random.default_rng(seed)
    pts = td.center + rng.uniform(-box_factor * r, box_factor * r, size=(samples, k))
    hits = trace_membership_many(frame, w, t, pts)
    dist = np.linalg.norm(pts[hits] - td.center, axis=1) / r
    return {
        "samples": samples,
        "members": int(hits.sum()),
        "kappa0_fit": float(dist.max()) if len(dist) else 0.0,
        "violations": int(np.sum(dist > 1.0)),
    }
