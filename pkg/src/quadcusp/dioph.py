"""Approximation on quadrics and its translation to the unipotent chart."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .conepoints import ConePoints, ConeRegion, enumerate_isotropic
from .forms import FormError, RatSymForm, to_fraction
from .witt import CuspFrame

SQRT2 = math.sqrt(2.0)
TWO_SQRT2 = 2 * SQRT2
DYADIC_T = TWO_SQRT2 * math.log(2.0)


class HypothesisError(ValueError):
    """An operation's standing hypothesis on the approximating function fails."""


@dataclass(frozen=True)
class ApproxFunction:
    """``coef * E^-alpha * (ln E)^gamma`` with ``E = x`` (height variable) or
    ``E = e^{x/2sqrt2}`` (depth variable)."""

    alpha: Fraction
    gamma: Fraction = Fraction(0)
    coef: float = 1.0
    variable: str = "height"
    x0: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", to_fraction(self.alpha))
        object.__setattr__(self, "gamma", to_fraction(self.gamma))
        if self.variable not in ("height", "depth"):
            raise ValueError("variable must be 'height' or 'depth'")
        if self.coef <= 0:
            raise ValueError("coef must be positive")

    @classmethod
    def power(cls, alpha, gamma=0, coef: float = 1.0) -> "ApproxFunction":
        return cls(to_fraction(alpha), to_fraction(gamma), coef)

    @classmethod
    def depth_exp(cls, rate, coef: float = 1.0) -> "ApproxFunction":
        """``coef * e^{-rate x / 2sqrt2}``."""
        return cls(to_fraction(rate), Fraction(0), coef, "depth", 0.0)

    def _E(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(x / TWO_SQRT2) if self.variable == "depth" else x

    def __call__(self, x):
        E = self._E(x)
        out = self.coef * E ** (-float(self.alpha))
        if self.gamma != 0:
            out = out * np.log(E) ** float(self.gamma)
        return out if np.ndim(out) else float(out)

    def log(self, x):
        """Natural log of the value, safe far into the tail."""
        x = np.asarray(x, dtype=float)
        lnE = x / TWO_SQRT2 if self.variable == "depth" else np.log(x)
        out = math.log(self.coef) - float(self.alpha) * lnE
        if self.gamma != 0:
            out = out + float(self.gamma) * np.log(lnE)
        return out

    @property
    def decreasing(self) -> bool:
        return self.alpha > 0 or (self.alpha == 0 and self.gamma < 0)

    @property
    def x_psi_to_zero(self) -> bool:
        """Whether x * psi(x) -> 0 (height variable)."""
        return self.alpha > 1 or (self.alpha == 1 and self.gamma < 0)

    @property
    def sigma(self) -> Fraction:
        """limsup ln x / (ln x - ln psi(x)); the log factor does not change it."""
        if self.variable != "height":
            raise HypothesisError("sigma is defined for height-variable functions")
        if self.alpha < 0 or (self.alpha == 0 and self.gamma >= 0):
            raise HypothesisError("sigma undefined: psi does not decay")
        return 1 / (1 + self.alpha)

    def to_depth(self) -> "ApproxFunction":
        """The chart-side function Psi(x) = psi(E)/E with E = e^{x/2sqrt2}."""
        if self.variable != "height":
            raise ValueError("already a depth function")
        return ApproxFunction(self.alpha + 1, self.gamma, self.coef, "depth", 0.0)

    def describe(self) -> dict:
        return {"alpha": str(self.alpha), "gamma": str(self.gamma),
                "coef": repr(float(self.coef)), "variable": self.variable}


# ---------------------------------------------------------------- approximants

def quadric_value(q: RatSymForm, x) -> float:
    x = np.asarray(x, dtype=float)
    return float(x @ q.as_float() @ x)


def random_quadric_points(q: RatSymForm, count: int, rng: np.random.Generator) -> np.ndarray:
    """Random real points with q(x) = 1 (definite or indefinite q)."""
    m = q.as_float()
    out = []
    while len(out) < count:
        v = rng.normal(size=q.dim)
        val = float(v @ m @ v)
        if val > 1e-3:
            out.append(v / math.sqrt(val))
    return np.array(out)


def approximants(x, psi: ApproxFunction, q_max: int, pool: ConePoints) -> list[tuple]:
    """Pool points (p, q) with ||q x - p||_inf <= psi(q), as (p, q, error) sorted by q."""
    x = np.asarray(x, dtype=float)
    pts = pool.coords[pool.heights <= q_max]
    if len(pts) == 0:
        return []
    qs = pts[:, -1].astype(float)
    err = np.max(np.abs(qs[:, None] * x[None, :] - pts[:, :-1]), axis=1)
    ok = err <= psi(qs)
    return [(tuple(int(a) for a in p[:-1]), int(p[-1]), float(e)) for p, e in zip(pts[ok], err[ok])]


def aprox_threshold(q: RatSymForm, psi: ApproxFunction, x, q_max: int) -> Optional[int]:
    """First q0 such that the error bound |q^2 - q(p)| < 1/N holds for all q0 <= q <= q_max."""
    m = q.as_float()
    a = float(np.sum(np.abs(m @ np.asarray(x, float))))
    b = float(np.sum(np.abs(m)))
    N = q.denominator
    qs = np.arange(1, q_max + 1, dtype=float)
    ps = psi(qs)
    ok = 2 * qs * ps * a + ps ** 2 * b < 1.0 / N
    if not ok[-1]:
        return None
    bad = np.nonzero(~ok)[0]
    return int(bad[-1] + 2) if len(bad) else 1


def _scan_rationals(q: RatSymForm, x: np.ndarray, psi: ApproxFunction, q_max: int):
    """All p in Z^n with ||q x - p||_inf <= psi(q), for every 1 <= q <= q_max (full box scan)."""
    A = q.integer_matrix
    N = q.denominator
    hits = []
    for qq in range(1, q_max + 1):
        r = psi(float(qq))
        lo = np.ceil(qq * x - r - 1e-12).astype(np.int64)
        hi = np.floor(qq * x + r + 1e-12).astype(np.int64)
        if np.any(hi < lo):
            continue
        axes = [np.arange(a, b + 1, dtype=np.int64) for a, b in zip(lo, hi)]
        cand = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, q.dim)
        err = np.max(np.abs(qq * x[None, :] - cand), axis=1)
        cand = cand[err <= r]
        vals = np.einsum("ij,jk,ik->i", cand, A, cand)
        for p, v in zip(cand, vals):
            hits.append((qq, tuple(int(t) for t in p), int(v) == N * qq * qq))
    return hits


@dataclass
class AproxReport:
    trials: int
    q_max: int
    off_quadric: list            # (trial, q, p) approximants with q(p) != q^2
    on_quadric: int
    empirical_q0: int            # one past the largest off-quadric q
    theoretical_q0: Optional[int]

    @property
    def passed(self) -> bool:
        t = self.theoretical_q0
        return t is not None and self.empirical_q0 <= t

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "q_max": self.q_max,
            "off_quadric_count": len(self.off_quadric),
            "largest_off_quadric_q": max((o[1] for o in self.off_quadric), default=0),
            "on_quadric_count": self.on_quadric,
            "empirical_q0": self.empirical_q0,
            "theoretical_q0": self.theoretical_q0,
            "passed": self.passed,
        }


def check_rigidity(q: RatSymForm, psi: ApproxFunction, q_max: int, trials: int, seed: int,
                      enforce_hypothesis: bool = True) -> AproxReport:
    """Scan all rationals close to random points of the quadric q = 1.

    Approximants with q >= q0 must lie on the quadric once x psi(x) -> 0.
    ``enforce_hypothesis=False`` runs the scan anyway, for diagnostics.
    """
    if enforce_hypothesis and not psi.x_psi_to_zero:
        raise HypothesisError(
            f"x*psi(x) does not tend to 0 for alpha={psi.alpha}, gamma={psi.gamma}")
    rng = np.random.default_rng(seed)
    xs = random_quadric_points(q, trials, rng)
    off, on = [], 0
    theo: Optional[int] = 0
    for i, x in enumerate(xs):
        for qq, p, good in _scan_rationals(q, x, psi, q_max):
            if good:
                on += 1
            else:
                off.append((i, qq, p))
        t = aprox_threshold(q, psi, x, q_max)
        theo = None if (t is None or theo is None) else max(theo, t)
    emp = max((o[1] for o in off), default=0) + 1
    return AproxReport(trials, q_max, off, on, emp, theo)


# ---------------------------------------------------------------- chart side

def dw_values(pool: ConePoints, frame: CuspFrame) -> np.ndarray:
    """d_w = 2 sqrt2 ln|b_L(v0, w)| for every pool vector (exact pairing, float log)."""
    Mv = frame.L.integer_matrix @ np.array(frame.v0.coords, dtype=np.int64)
    c = pool.coords @ Mv
    if np.any(c == 0):
        raise FormError("some pool vector lies in ker b_L(v0, .)")
    return TWO_SQRT2 * (np.log(np.abs(c).astype(float)) - math.log(frame.L.denominator))


def dw_weight(w, frame: CuspFrame) -> tuple[float, float]:
    """(d_w, |d_w - 2 sqrt2 ln ||w|| |)."""
    c = frame.pairing_v0(w)
    if c == 0:
        raise FormError("w lies in ker b_L(v0, .)")
    d = TWO_SQRT2 * math.log(abs(float(c)))
    norm = math.sqrt(sum(float(x) ** 2 for x in w))
    return d, abs(d - TWO_SQRT2 * math.log(norm))


def chart_points(pool: ConePoints, frame: CuspFrame) -> np.ndarray:
    return frame.chart_coords_many(pool.coords.astype(float))


def stilde_count(b, Psi: ApproxFunction, pool: ConePoints, frame: CuspFrame,
                 chart: Optional[np.ndarray] = None, dw: Optional[np.ndarray] = None) -> int:
    b = np.asarray(b, dtype=float)
    if len(pool) == 0:
        return 0
    u = chart_points(pool, frame) if chart is None else chart
    d = dw_values(pool, frame) if dw is None else dw
    return int(np.sum(np.linalg.norm(u - b[None, :], axis=1) <= Psi(d)))


def chart_lipschitz(frame: CuspFrame, region: ConeRegion, pairs: int, seed: int) -> tuple[float, float]:
    """Empirical constants with |x1 - x2|_inf <= A |b1 - b2| and |b1 - b2| <= B |x1 - x2|_inf
    for quadric points x and chart coordinates b inside a box region."""
    rng = np.random.default_rng(seed)
    k = frame.delta
    b1 = rng.uniform(region.lo, region.hi, size=(pairs, k))
    near = rng.normal(scale=1e-3, size=(pairs, k))
    b2 = np.where(np.arange(pairs)[:, None] % 2 == 0, rng.uniform(region.lo, region.hi, size=(pairs, k)),
                  np.clip(b1 + near, region.lo, region.hi))
    x1 = _quadric_from_chart(frame, b1)
    x2 = _quadric_from_chart(frame, b2)
    db = np.linalg.norm(b1 - b2, axis=1)
    dx = np.max(np.abs(x1 - x2), axis=1)
    ok = db > 0
    return float(np.max(dx[ok] / db[ok])), float(np.max(db[ok] / dx[ok]))


def _quadric_from_chart(frame: CuspFrame, b: np.ndarray) -> np.ndarray:
    mid = frame.middle
    y = np.column_stack([-0.5 * np.einsum("ij,jk,ik->i", b, mid, b), -b, np.ones(len(b))])
    x = y @ frame.Pi.T
    return x[:, :-1] / x[:, -1:]


@dataclass
class InclusionReport:
    L: float
    L1: float
    trials: int
    psi_events: int
    lower_events: int
    upper_events: int
    lower_violations: int      # Psi1 event without psi event
    upper_violations: int      # psi event without Psi2 event

    @property
    def violations(self) -> int:
        return self.lower_violations + self.upper_violations

    def to_dict(self) -> dict:
        return {k: (repr(float(v)) if isinstance(v, float) else v) for k, v in self.__dict__.items()}


def fit_inclusion_constants(frame: CuspFrame, region: ConeRegion, pool: ConePoints,
                            seed: int = 0, safety: float = 1.1) -> tuple[float, float]:
    """(L, L1): L bounds q / e^{d_w/2sqrt2} both ways over the patch, L1 = safety * Lip * L."""
    pts = pool.coords[region.contains(pool.coords)]
    if len(pts) == 0:
        raise FormError("no pool points in the region")
    sub = ConePoints(pool.L, pts, pool.q_max)
    E = np.exp(dw_values(sub, frame) / TWO_SQRT2)
    ratio = pts[:, -1] / E
    L = float(max(ratio.max(), (1 / ratio).max()))
    a, b = chart_lipschitz(frame, region, 20000, seed)
    return L, safety * max(a, b) * L


def inclusion_check(xs, psi: ApproxFunction, q_max: int, frame: CuspFrame, region: ConeRegion,
                    pool: Optional[ConePoints] = None, constants: Optional[tuple[float, float]] = None,
                    seed: int = 0) -> InclusionReport:
    """Check the per-vector bracket Psi1-event => psi-event => Psi2-event at finite truncation."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    if pool is None:
        pool = enumerate_isotropic(frame.L, q_max, region)
    pool = pool.upto(q_max).select(region.contains(pool.upto(q_max).coords))
    L, L1 = constants if constants is not None else fit_inclusion_constants(frame, region, pool, seed)
    u = chart_points(pool, frame)
    d = dw_values(pool, frame)
    E = np.exp(d / TWO_SQRT2)
    qs = pool.heights.astype(float)
    psi1 = psi(L * E) / (L1 * E)
    psi2 = L1 * psi(E / L) / E
    tot = dict(psi=0, lo=0, up=0, lov=0, upv=0)
    for x in xs:
        xl = np.concatenate([x, [1.0]])
        try:
            bx = frame.chart_coords(xl)
        except FormError as exc:
            raise FormError("point outside the chart") from exc
        if not region.contains(xl)[0]:
            raise FormError("point outside the patch")
        dist = np.linalg.norm(u - bx[None, :], axis=1)
        ev = np.max(np.abs(qs[:, None] * x[None, :] - pool.coords[:, :-1]), axis=1) <= psi(qs)
        lo = dist <= psi1
        up = dist <= psi2
        tot["psi"] += int(ev.sum())
        tot["lo"] += int(lo.sum())
        tot["up"] += int(up.sum())
        tot["lov"] += int(np.sum(lo & ~ev))
        tot["upv"] += int(np.sum(ev & ~up))
    return InclusionReport(L, L1, len(xs), tot["psi"], tot["lo"], tot["up"], tot["lov"], tot["upv"])


# ---------------------------------------------------------------- dimension

def predicted_dimension(psi: ApproxFunction, n: int) -> Fraction:
    """sigma * (n - 1); requires x psi(x) -> 0."""
    if not psi.x_psi_to_zero:
        raise HypothesisError("x*psi(x) does not tend to 0")
    return psi.sigma * (n - 1)


def chart_dimension(Psi: ApproxFunction, delta: int) -> Fraction:
    """Dimension of the chart limsup set for Psi = c e^{-a x/2sqrt2}: delta / a (a >= 1)."""
    if Psi.variable != "depth":
        raise HypothesisError("chart_dimension expects a depth-variable function")
    if Psi.alpha < 1:
        raise HypothesisError("decay rate below 1: the limsup set is the whole patch")
    return Fraction(delta) / Psi.alpha


@dataclass
class CrossoverReport:
    T: float
    shells: list                 # shell indices used
    shell_counts: list
    verdicts: dict               # s -> "bounded" | "growing"
    ratios: dict                 # s -> last increment ratios
    crossover: Optional[float]

    def to_dict(self) -> dict:
        return {
            "T": repr(float(self.T)),
            "shells": self.shells,
            "shell_counts": self.shell_counts,
            "verdicts": {format(s, ".6g"): v for s, v in self.verdicts.items()},
            "ratios": {format(s, ".6g"): [repr(float(r)) for r in rs] for s, rs in self.ratios.items()},
            "crossover": None if self.crossover is None else repr(float(self.crossover)),
        }


def covered_shells(pool: ConePoints, frame: CuspFrame, region: ConeRegion, T: float) -> tuple[np.ndarray, np.ndarray, int]:
    """(d_w, shell index, number of fully enumerated shells) for pool points in the region."""
    pts = pool.coords[region.contains(pool.coords)]
    sub = ConePoints(pool.L, pts, pool.q_max)
    d = dw_values(sub, frame)
    E = np.exp(d / TWO_SQRT2)
    K = float(np.max(pts[:, -1] / E)) if len(pts) else 1.0
    n_full = 0
    while K * math.exp((n_full + 1) * T / TWO_SQRT2) <= pool.q_max * (1 + 1e-12):
        n_full += 1
    return d, np.floor(d / T).astype(int), n_full


def critical_exponent_upper(pool: ConePoints, Psi: ApproxFunction, frame: CuspFrame, T: float,
                            s_grid: Sequence[float], region: ConeRegion,
                            ratio_threshold: float = 0.9, window: int = 4) -> CrossoverReport:
    """Smallest grid s whose shell increments of sum Psi(d_w)^s decay geometrically.

    An exponent is "bounded" when the increments over the last ``window``
    shells shrink by at least ``ratio_threshold`` per shell on average.
    """
    d, shell, n_full = covered_shells(pool, frame, region, T)
    shells = list(range(0, n_full))
    counts = [int(np.sum(shell == n)) for n in shells]
    if sum(1 for c in counts if c > 0) < 8:
        raise FormError(f"insufficient depth: {sum(1 for c in counts if c > 0)} nonempty covered shells, need 8")
    logpsi = Psi.log(d)
    verdicts, ratios = {}, {}
    for s in s_grid:
        inc = []
        for n in shells:
            sel = shell == n
            inc.append(float(np.sum(np.exp(s * logpsi[sel]))) if np.any(sel) else 0.0)
        tail = inc[-window:]
        rs = [b / a if a > 0 else math.inf for a, b in zip(inc[-window - 1:-1], tail)]
        ratios[s] = rs
        # geometric mean of the last increment ratios, i.e. (I_N / I_{N-window})^(1/window)
        mean = math.exp(sum(math.log(r) for r in rs) / len(rs)) if all(0 < r < math.inf for r in rs) else math.inf
        verdicts[s] = "bounded" if mean <= ratio_threshold else "growing"
    bounded = [s for s in s_grid if verdicts[s] == "bounded"]
    return CrossoverReport(T, shells, counts, verdicts, ratios, min(bounded) if bounded else None)
