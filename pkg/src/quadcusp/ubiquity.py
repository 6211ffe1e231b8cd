"""Local ubiquitous systems built from cusp points, and the divergence classifier."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .conepoints import ConePoints, ConeRegion
from .dioph import TWO_SQRT2, ApproxFunction, chart_points, covered_shells
from .forms import to_fraction
from .witt import CuspFrame


class UbiquityError(ValueError):
    pass


@dataclass
class UbiquitySpec:
    """Resonant points (chart coordinates) with weights inside a box patch."""

    points: np.ndarray
    weights: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    delta: int
    rho: Callable
    T: float
    lam: float = 0.9
    depth_limit: float = math.inf      # weights are complete up to this value
    kappa: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.lam < 1:
            raise UbiquityError("regularity factor must lie in (0, 1)")

    def u(self, n) -> float:
        return n * self.T

    @property
    def n_max(self) -> int:
        """Largest n with u_n inside the completely enumerated range."""
        return int(math.floor(self.depth_limit / self.T + 1e-12)) if math.isfinite(self.depth_limit) else 10 ** 6

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))


def exp_rho(kappa: float) -> Callable:
    """rho(x) = kappa e^{-x/2sqrt2}."""
    return lambda x: kappa * np.exp(-np.asarray(x, float) / TWO_SQRT2)


def cusp_system(pool: ConePoints, frame: CuspFrame, region: ConeRegion, T: float,
                kappa: float = 1.0, lam: Optional[float] = None) -> UbiquitySpec:
    """The resonant system of rational points: chart positions u_w with weights d_w."""
    if not region.is_box:
        raise UbiquityError("the ubiquity patch must be a chart box")
    d, _, n_full = covered_shells(pool, frame, region, T)
    pts = pool.coords[region.contains(pool.coords)]
    sub = ConePoints(pool.L, pts, pool.q_max)
    u = chart_points(sub, frame)
    if lam is None:
        lam = math.exp(-T / TWO_SQRT2) * 1.01
    return UbiquitySpec(u, d, region.lo, region.hi, frame.delta, exp_rho(kappa), T, lam,
                        depth_limit=n_full * T, kappa=kappa)


def u_regular_check(spec: UbiquitySpec, n_min: int, n_max: Optional[int] = None) -> bool:
    """rho(u_{n+1}) <= lam * rho(u_n) for every probed n >= n_min."""
    if not 0 < spec.lam < 1:
        raise UbiquityError("regularity factor must lie in (0, 1)")
    top = n_max if n_max is not None else n_min + 200
    for n in range(n_min, top):
        a, b = float(spec.rho(spec.u(n))), float(spec.rho(spec.u(n + 1)))
        if not b <= spec.lam * a:
            return False
    return True


# ---------------------------------------------------------------- coverage

def _coverage(spec: UbiquitySpec, n: int, samples: np.ndarray) -> float:
    """Fraction of sample points within rho(u_n) of a resonant point of weight <= u_n."""
    sel = spec.weights <= spec.u(n) + 1e-12
    if not np.any(sel):
        return 0.0
    tree = cKDTree(spec.points[sel])
    r = float(spec.rho(spec.u(n)))
    dist, _ = tree.query(samples, k=1, distance_upper_bound=r * (1 + 1e-12))
    return float(np.mean(dist <= r))


def _ball_points(rng, center, radius, k, count):
    x = rng.normal(size=(count, k))
    x /= np.linalg.norm(x, axis=1)[:, None]
    return center + radius * x * (rng.uniform(size=count) ** (1.0 / k))[:, None]


def fit_kappa(pool: ConePoints, frame: CuspFrame, region: ConeRegion, T: float,
              target: float = 0.5, samples: int = 20000, seed: int = 0) -> float:
    """Smallest kappa = 2^j (j >= -10) giving patch coverage >= target at the deepest level."""
    spec = cusp_system(pool, frame, region, T)
    rng = np.random.default_rng(seed)
    pts = rng.uniform(spec.lo, spec.hi, size=(samples, spec.delta))
    n = spec.n_max
    for j in range(-10, 20):
        kappa = 2.0 ** j
        spec.rho = exp_rho(kappa)
        if _coverage(spec, n, pts) >= target:
            return kappa
    raise UbiquityError("coverage target unreachable")


@dataclass
class KappaReport:
    kappa_hat: float
    balls: int
    n0: list
    per_ball_min: list
    unstable_balls: int

    def to_dict(self) -> dict:
        return {"kappa_hat": repr(float(self.kappa_hat)), "balls": self.balls, "n0": self.n0,
                "per_ball_min": [repr(float(x)) for x in self.per_ball_min],
                "unstable_balls": self.unstable_balls}


def local_ubiquity_estimate(spec: UbiquitySpec, ball_samples: int, n_range: Sequence[int], seed: int,
                            radius_range: tuple[float, float] = (0.05, 0.2),
                            mc_points: int = 4000) -> KappaReport:
    """Infimum over random balls B and n >= n0(B) of the covered fraction of B.

    n0(B) is the first n whose estimate agrees with the next one within 10%.
    """
    n_range = list(n_range)
    if max(n_range) > spec.n_max:
        raise UbiquityError(f"pool too shallow: n up to {max(n_range)} requested, {spec.n_max} available")
    rng = np.random.default_rng(seed)
    mins, n0s, unstable = [], [], 0
    for _ in range(ball_samples):
        R = rng.uniform(*radius_range)
        c = rng.uniform(spec.lo + R, spec.hi - R)
        pts = _ball_points(rng, c, R, spec.delta, mc_points)
        est = [_coverage(spec, n, pts) for n in n_range]
        n0 = None
        for i in range(len(est) - 1):
            if est[i] > 0 and abs(est[i + 1] - est[i]) <= 0.1 * est[i]:
                n0 = i
                break
        if n0 is None:
            unstable += 1
            n0 = len(est) - 1
        n0s.append(n_range[n0])
        mins.append(min(est[n0:]))
    return KappaReport(min(mins) if mins else 0.0, ball_samples, n0s, mins, unstable)


def measure_condition(spec: UbiquitySpec, balls: int = 200, radii: Sequence[float] = (0.02, 0.05, 0.1, 0.2, 0.4),
                      seed: int = 0, mc_points: int = 4000) -> tuple[float, float]:
    """Fitted (a, b) with a R^delta <= m(B) <= b R^delta, m = Lebesgue measure on the patch."""
    rng = np.random.default_rng(seed)
    k = spec.delta
    unit = math.pi ** (k / 2) / math.gamma(k / 2 + 1)
    ratios = []
    per = max(1, balls // len(radii))
    for R in radii:
        for _ in range(per):
            c = rng.uniform(spec.lo, spec.hi)
            pts = _ball_points(rng, c, R, k, mc_points)
            inside = np.all((pts >= spec.lo) & (pts <= spec.hi), axis=1)
            ratios.append(float(np.mean(inside)) * unit)
    return min(ratios), max(ratios)


# ---------------------------------------------------------------- classifier

@dataclass(frozen=True)
class ExpTerm:
    """``coef * e^{-rate x / 2sqrt2} * (x / 2sqrt2)^power`` in the depth variable."""

    rate: Fraction
    power: Fraction = Fraction(0)
    coef: float = 1.0

    @classmethod
    def from_function(cls, f: ApproxFunction) -> "ExpTerm":
        if f.variable != "depth":
            raise UbiquityError("classifier data must be depth-variable functions")
        return cls(f.alpha, f.gamma, f.coef)


@dataclass(frozen=True)
class Verdict:
    verdict: str
    exponent: Fraction          # growth rate of the summand in units of nT/2sqrt2
    power: Fraction             # polynomial order in n
    note: str = "conditional on the mass transference theorem for local ubiquity"

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "exponent": str(self.exponent), "power": str(self.power), "note": self.note}


def divergence_classifier(s, psi: ApproxFunction, rho: ApproxFunction, delta) -> Verdict:
    """Exact verdict for sum_n phi(psi(u_n)) rho(u_n)^{-delta} with phi(x) = x^s.

    Summand ~ exp(nT (delta*r - s*a)/2sqrt2) n^(s*gamma_psi - delta*gamma_rho);
    it diverges iff the exponent is positive, or zero with power >= -1.
    """
    s = to_fraction(s)
    delta = to_fraction(delta)
    if s <= 0:
        raise UbiquityError("dimension exponent must be positive")
    if s > delta:
        raise UbiquityError(f"x^{s} does not dominate x^{delta}")
    p, r = ExpTerm.from_function(psi), ExpTerm.from_function(rho)
    expo = delta * r.rate - s * p.rate
    power = s * p.power - delta * r.power
    diverges = expo > 0 or (expo == 0 and power >= -1)
    return Verdict("measure-infinite" if diverges else "measure-finite-cover", expo, power)


def classify_numeric(phi: Callable, psi: Callable, rho: Callable, delta: float, T: float,
                     n_terms: int = 100, window: int = 20, ratio_threshold: float = 0.999) -> str:
    """Partial-sum heuristic for general data: geometric decay of the last summands."""
    terms = []
    for n in range(1, n_terms + 1):
        x = n * T
        a, r = phi(psi(x)), rho(x)
        if a <= 0:
            return "measure-finite-cover"  # the summand underflowed: fast decay
        terms.append(math.log(a) - delta * math.log(r))
    tail = terms[-window:]
    slope = (tail[-1] - tail[0]) / (window - 1)
    if slope > math.log(ratio_threshold):
        return "measure-infinite"
    return "measure-finite-cover"
