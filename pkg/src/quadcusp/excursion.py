"""Cusp excursions of chart geodesics, R_beta events and ambient depth identities."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .conepoints import ConePoints
from .dioph import TWO_SQRT2, ApproxFunction, chart_dimension
from .forms import IsotropicVector, to_fraction
from .witt import CuspFrame

SQRT2 = math.sqrt(2.0)


class ExcursionError(ValueError):
    pass


def cusp_depth_quadric(Q, pool) -> tuple[float, IsotropicVector]:
    """-min over the pool of sqrt2 ln Q(v), with the minimising vector."""
    coords = pool.coords if isinstance(pool, ConePoints) else np.asarray(pool, dtype=np.int64)
    if len(coords) == 0:
        raise ExcursionError("empty pool")
    m = Q.entries if hasattr(Q, "entries") else np.asarray(Q, float)
    x = coords.astype(float)
    vals = np.einsum("ij,jk,ik->i", x, m, x)
    i = int(np.argmin(vals))
    return -SQRT2 * math.log(float(vals[i])), IsotropicVector(tuple(int(c) for c in coords[i]))


@dataclass
class ExcursionTrace:
    b: np.ndarray
    beta: float
    t: np.ndarray
    depth: np.ndarray
    witness: np.ndarray          # pool index realising the depth at each sample
    pool_qmax: int

    @property
    def events(self) -> np.ndarray:
        return np.nonzero(self.depth >= self.beta * self.t)[0]

    def events_at(self, beta: float) -> np.ndarray:
        return np.nonzero(self.depth >= beta * self.t)[0]

    def persistent(self, window: float = 0.1) -> bool:
        """An event occurs in the last ``window`` fraction of the time range."""
        ev = self.events
        if len(ev) == 0:
            return False
        t_end = self.t[-1]
        return bool(self.t[ev[-1]] >= t_end - window * (t_end - self.t[0]))

    def rows(self):
        for t, d, w in zip(self.t, self.depth, self.witness):
            yield repr(float(t)), repr(float(d)), int(w)


def _frame_pool(frame: CuspFrame, b, pool: ConePoints) -> np.ndarray:
    """u(b) Pi^{-1} v for every pool vector (rows)."""
    y = pool.coords.astype(float) @ frame.Pi_inv.T
    return y @ frame.u_frame(b).T


def depth_along(frame: CuspFrame, b, ts: np.ndarray, pool: ConePoints, chunk: int = 256):
    """(depth, witness index) along t -> G(t)[u(b)] for every t in ``ts``."""
    y = _frame_pool(frame, b, pool)
    a0, am, as_ = y[:, 0] ** 2, np.sum(y[:, 1:-1] ** 2, axis=1), y[:, -1] ** 2
    depth = np.empty(len(ts))
    wit = np.empty(len(ts), dtype=np.int64)
    for s in range(0, len(ts), chunk):
        tt = ts[s:s + chunk]
        # log of e^{t/sqrt2} a0 + am + e^{-t/sqrt2} as, computed stably
        e = tt[:, None] / SQRT2
        with np.errstate(divide="ignore"):
            la0, lam, las = np.log(a0)[None, :], np.log(am)[None, :], np.log(as_)[None, :]
            lv = np.logaddexp(np.logaddexp(e + la0, lam + 0 * e), -e + las)
        idx = np.argmin(lv, axis=1)
        depth[s:s + chunk] = -SQRT2 * lv[np.arange(len(tt)), idx]
        wit[s:s + chunk] = idx
    return depth, wit


def flow_and_record(frame: CuspFrame, b, t_max: float, dt: float, pool: ConePoints, beta: float) -> ExcursionTrace:
    if not 0 <= beta <= 1:
        raise ExcursionError("beta must lie in [0, 1]")
    if dt <= 0:
        raise ExcursionError("dt must be positive")
    steps = int(round(t_max / dt))
    ts = np.arange(steps + 1) * dt
    depth, wit = depth_along(frame, b, ts, pool)
    return ExcursionTrace(np.asarray(b, float), beta, ts, depth, wit, pool.q_max)


@dataclass
class EventSummary:
    rows: list = field(default_factory=list)

    @property
    def persistent_count(self) -> int:
        return sum(1 for r in self.rows if r["persistent"])

    def to_dict(self) -> dict:
        return {"traces": self.rows, "persistent": self.persistent_count}


def rbeta_event_summary(traces: Sequence[ExcursionTrace], beta: float, window: float = 0.1) -> EventSummary:
    rows = []
    for i, tr in enumerate(traces):
        ev = tr.events_at(beta)
        last = float(tr.t[ev[-1]]) if len(ev) else None
        t_end = tr.t[-1]
        rows.append({
            "trace": i,
            "b": [repr(float(x)) for x in tr.b],
            "events": int(len(ev)),
            "last_event": None if last is None else repr(float(last)),
            "persistent": bool(last is not None and last >= t_end - window * (t_end - tr.t[0])),
        })
    return EventSummary(rows)


# ---------------------------------------------------------------- phi correspondence

@dataclass(frozen=True)
class LinearPhi:
    """phi(t) = (1 - beta) t."""

    beta: Fraction

    def __post_init__(self):
        object.__setattr__(self, "beta", to_fraction(self.beta))
        if not 0 <= self.beta < 1:
            raise ExcursionError("need 0 <= beta < 1 so that phi is a bijection of [0, inf)")

    def __call__(self, t):
        return (1 - float(self.beta)) * np.asarray(t, float)

    def inverse(self, x):
        return np.asarray(x, float) / (1 - float(self.beta))


def _check_monotone(phi: Callable, grid: np.ndarray) -> None:
    v = np.array([float(phi(t)) for t in grid])
    if np.any(np.diff(v) <= 0) or np.any(np.diff(grid - v) < 0):
        raise ExcursionError("phi and id - phi must both be increasing")


def phi_correspondence(phi, kappa0: float, c: float):
    """(Phi1, Phi2) with Phi1(x) = kappa0 e^{-phi^{-1}(x)/2sqrt2}, Phi2(x) = c e^{-phi^{-1}(x+1)/2sqrt2}.

    For linear phi both are ApproxFunction objects in the depth variable.
    """
    if isinstance(phi, LinearPhi) or isinstance(phi, (int, float, Fraction, str)):
        phi = phi if isinstance(phi, LinearPhi) else LinearPhi(phi)
        rate = 1 / (1 - phi.beta)
        phi1 = ApproxFunction(rate, 0, kappa0, "depth", 0.0)
        phi2 = ApproxFunction(rate, 0, c * math.exp(-float(rate) / TWO_SQRT2), "depth", 0.0)
        return phi1, phi2
    _check_monotone(phi, np.linspace(0, 50, 501))

    def inv(x):
        hi = 1.0
        while phi(hi) < x:
            hi *= 2
        return brentq(lambda t: phi(t) - x, 0.0, hi)

    return (lambda x: kappa0 * math.exp(-inv(x) / TWO_SQRT2),
            lambda x: c * math.exp(-inv(x + 1) / TWO_SQRT2))


def rbeta_predicted_dimension(beta, delta: int) -> Fraction:
    """Dimension of R_beta predicted by feeding Phi1 through the chart-side dimension law."""
    phi1, _ = phi_correspondence(LinearPhi(beta), 1.0, 1.0)
    return chart_dimension(phi1, delta)


# ---------------------------------------------------------------- ambient depth identities

@dataclass(frozen=True)
class SLDepth:
    expression: float
    closed_form: float
    matrix_form: float

    @property
    def discrepancy(self) -> float:
        return abs(self.closed_form - self.matrix_form)

    def __iter__(self):
        return iter((self.closed_form, self.matrix_form))


def sl_depth_identity(x, p, q: int, t: float, slope: int) -> SLDepth:
    """Depth of r_slope(t)[u_x] against the cusp vector (p, q): closed form vs matrices.

    Both values are eta_n * ln(...) with eta_n = sqrt((n+1)/n).
    """
    x = np.asarray(x, float)
    p = np.asarray(p, float)
    n = len(x)
    if len(p) != n:
        raise ExcursionError("x and p must have the same length")
    if slope not in (1, n):
        raise ExcursionError(f"slope must be 1 or n={n}")
    if q == 0 and not np.any(p):
        raise ExcursionError("(p, q) must be nonzero")
    s = n + 1
    eta = math.sqrt((n + 1) / n)
    g = math.sqrt(n * (n + 1))
    if slope == 1:
        expr = math.exp(t / g) * float(np.sum((p + q * x) ** 2)) + math.exp(-n * t / g) * q * q
        r = np.diag([math.exp(t / g)] * n + [math.exp(-n * t / g)])
        u = np.eye(s)
        u[:n, n] = x
        Q = u.T @ r @ u
        v = np.concatenate([p, [q]])
        mat = float(v @ Q @ v)
    else:
        expr = math.exp(-n * t / g) * q * q + math.exp(t / g) * float(np.sum((p - q * x) ** 2))
        r = np.diag([math.exp(n * t / g)] + [math.exp(-t / g)] * n)
        u = np.eye(s)
        u[0, 1:] = x
        Q = u.T @ r @ u
        v = np.concatenate([[q], p])
        mat = float(v @ np.linalg.inv(Q) @ v)
    return SLDepth(expr, eta * math.log(expr), eta * math.log(mat))
