"""Enumeration and counting of primitive integer points on isotropic cones."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional, Sequence

import numpy as np

from .forms import FormError, IsotropicVector, RatSymForm, frac_inverse
from .witt import CuspFrame


# ---------------------------------------------------------------- point sets

@dataclass(frozen=True, eq=False)
class ConePoints:
    """Array-backed, sorted list of primitive cone vectors (rows)."""

    L: RatSymForm
    coords: np.ndarray
    q_max: int

    def __len__(self) -> int:
        return len(self.coords)

    def __getitem__(self, i) -> IsotropicVector:
        return IsotropicVector(tuple(int(x) for x in self.coords[i]))

    def __iter__(self) -> Iterator[IsotropicVector]:
        return (self[i] for i in range(len(self)))

    @property
    def heights(self) -> np.ndarray:
        """The denominators q (last coordinate)."""
        return self.coords[:, -1]

    def upto(self, q_max: int) -> "ConePoints":
        return ConePoints(self.L, self.coords[self.heights <= q_max], q_max)

    def select(self, mask) -> "ConePoints":
        return ConePoints(self.L, self.coords[np.asarray(mask, bool)], self.q_max)


def split_suspended(L: RatSymForm) -> RatSymForm:
    """The form q with L = x_{n+1}^2 - q."""
    s = L.dim
    m = L.entries
    if m[-1][-1] != 1 or any(m[-1][j] != 0 for j in range(s - 1)):
        raise FormError("L must have the shape x_{n+1}^2 - q(x_1..x_n)")
    q = RatSymForm(tuple(tuple(-m[i][j] for j in range(s - 1)) for i in range(s - 1)))
    return q


def _axis_bounds(q: RatSymForm) -> Optional[np.ndarray]:
    """|x_i| <= bound_i * q on the ellipsoid q(x) = q^2, None when q is indefinite."""
    pos, neg = q.signature
    if neg != 0:
        return None
    inv = frac_inverse(q.entries)
    return np.array([math.sqrt(float(inv[i][i])) for i in range(q.dim)])


def _solve_block(A: np.ndarray, N: int, q_lo: int, q_hi: int, bounds, coord_bound) -> np.ndarray:
    n = A.shape[0]
    out = []
    ann = int(A[-1, -1])
    for qq in range(q_lo, q_hi + 1):
        target = N * qq * qq
        if bounds is not None:
            lims = [int(math.floor(b * qq + 1e-9)) for b in bounds]
        else:
            lims = [coord_bound] * n
        if n == 1:
            rest = np.zeros((1, 0), dtype=np.int64)
        else:
            axes = [np.arange(-lims[i], lims[i] + 1, dtype=np.int64) for i in range(n - 1)]
            rest = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n - 1)
        B = rest @ A[-1, :-1] if n > 1 else np.zeros(1, dtype=np.int64)
        C = np.einsum("ij,jk,ik->i", rest, A[:-1, :-1], rest) if n > 1 else np.zeros(1, dtype=np.int64)
        if ann != 0:
            disc = B * B - ann * (C - target)
            ok = disc >= 0
            rest, B, disc = rest[ok], B[ok], disc[ok]
            r = np.floor(np.sqrt(disc.astype(np.float64))).astype(np.int64)
            r += ((r + 1) * (r + 1) <= disc).astype(np.int64)
            r -= (r * r > disc).astype(np.int64)
            sq = r * r == disc
            rest, B, r = rest[sq], B[sq], r[sq]
            sols = []
            for sign in (1, -1):
                num = -B + sign * r
                good = num % ann == 0
                if sign == -1:
                    good &= r != 0
                sols.append(np.column_stack([rest[good], num[good] // ann]))
            cand = np.concatenate(sols) if sols else np.zeros((0, n), dtype=np.int64)
        else:
            lim = lims[-1]
            last = np.arange(-lim, lim + 1, dtype=np.int64)
            full = np.column_stack([np.repeat(rest, len(last), axis=0), np.tile(last, len(rest))])
            vals = np.einsum("ij,jk,ik->i", full, A, full)
            cand = full[vals == target]
            if bounds is not None:
                cand = cand[np.all(np.abs(cand) <= np.array(lims), axis=1)]
        if len(cand) == 0:
            continue
        g = np.gcd.reduce(np.abs(cand), axis=1)
        g = np.gcd(g, qq)
        cand = cand[g == 1]
        if len(cand):
            out.append(np.column_stack([cand, np.full(len(cand), qq, dtype=np.int64)]))
    if not out:
        return np.zeros((0, n + 1), dtype=np.int64)
    res = np.concatenate(out)
    return res


def _sort_points(pts: np.ndarray) -> np.ndarray:
    if len(pts) == 0:
        return pts
    keys = [pts[:, i] for i in range(pts.shape[1] - 2, -1, -1)] + [pts[:, -1]]
    order = np.lexsort(keys)
    out = pts[order]
    # drop duplicates (both roots coincide only when r = 0, handled, but be safe)
    keep = np.ones(len(out), bool)
    keep[1:] = np.any(out[1:] != out[:-1], axis=1)
    return out[keep]


def enumerate_isotropic(L: RatSymForm, q_max: int, region: Optional["ConeRegion"] = None,
                        q_min: int = 1, coord_bound: Optional[int] = None,
                        threads: int = 1) -> ConePoints:
    """All primitive (p, q) with q(p) = q^2 and q_min <= q <= q_max, sorted by (q, p)."""
    q = split_suspended(L)
    N = q.denominator
    A = q.integer_matrix
    bounds = _axis_bounds(q)
    if bounds is None and coord_bound is None:
        raise FormError("q is indefinite: pass coord_bound to make the search finite")
    if threads > 1 and q_max - q_min > 64:
        edges = np.linspace(q_min, q_max + 1, threads * 4 + 1).astype(int)
        jobs = [(A, N, int(a), int(b) - 1, bounds, coord_bound) for a, b in zip(edges[:-1], edges[1:]) if b > a]
        with ProcessPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(_solve_star, jobs))
        pts = np.concatenate(parts)
    else:
        pts = _solve_block(A, N, q_min, q_max, bounds, coord_bound)
    pts = _sort_points(pts)
    out = ConePoints(L, pts, q_max)
    if region is not None:
        out = out.select(region.contains(out.coords))
    return out


def _solve_star(args):
    return _solve_block(*args)


def points_from_array(L: RatSymForm, arr, q_max: Optional[int] = None) -> ConePoints:
    arr = np.asarray(arr, dtype=np.int64).reshape(-1, L.dim)
    return ConePoints(L, _sort_points(arr), int(arr[:, -1].max()) if q_max is None and len(arr) else (q_max or 0))


# ---------------------------------------------------------------- regions

@dataclass(frozen=True, eq=False)
class ConeRegion:
    """Box in chart coordinates, or an angular cap around a cone line."""

    frame: CuspFrame
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None
    center: Optional[np.ndarray] = None
    angle: Optional[float] = None

    def __post_init__(self):
        if self.lo is not None:
            lo, hi = np.asarray(self.lo, float), np.asarray(self.hi, float)
            if lo.shape != (self.frame.delta,) or hi.shape != lo.shape or np.any(hi <= lo):
                raise FormError("box needs lo < hi with one entry per chart coordinate")
            object.__setattr__(self, "lo", lo)
            object.__setattr__(self, "hi", hi)
        elif self.center is not None:
            c = np.asarray(self.center, float)
            c = c / np.linalg.norm(c)
            object.__setattr__(self, "center", c)
            if not 0 < self.angle < self.angle_to_infinity(c):
                raise FormError("cap must have positive angle and stay away from ker b_L(v0, .)")
        else:
            raise FormError("region needs a box or a cap")

    @classmethod
    def box(cls, frame: CuspFrame, lo, hi) -> "ConeRegion":
        return cls(frame, lo=lo, hi=hi)

    @classmethod
    def cube(cls, frame: CuspFrame, half_width: float, center=None) -> "ConeRegion":
        c = np.zeros(frame.delta) if center is None else np.asarray(center, float)
        return cls(frame, lo=c - half_width, hi=c + half_width)

    @classmethod
    def cap(cls, frame: CuspFrame, center, angle: float) -> "ConeRegion":
        return cls(frame, center=center, angle=angle)

    @property
    def is_box(self) -> bool:
        return self.lo is not None

    def angle_to_infinity(self, x) -> float:
        """Angle between the line of x and the hyperplane ker b_L(v0, .)."""
        normal = self.frame.L.as_float() @ np.array(self.frame.v0.coords, float)
        x = np.asarray(x, float)
        return math.asin(min(1.0, abs(float(normal @ x)) / (np.linalg.norm(normal) * np.linalg.norm(x))))

    def contains(self, coords) -> np.ndarray:
        x = np.atleast_2d(np.asarray(coords, dtype=float))
        if len(x) == 0:
            return np.zeros(0, bool)
        if self.is_box:
            y = x @ self.frame.Pi_inv.T
            ok = y[:, -1] != 0
            b = np.full((len(x), self.frame.delta), np.inf)
            b[ok] = -y[ok, 1:-1] / y[ok, -1:]
            return np.all((b >= self.lo) & (b <= self.hi), axis=1)
        cosang = np.abs(x @ self.center) / np.linalg.norm(x, axis=1)
        return cosang >= math.cos(self.angle)

    def chart_measure(self, samples: int = 200000, seed: int = 0) -> float:
        """Chart Lebesgue measure; exact for boxes, Monte-Carlo for caps."""
        if self.is_box:
            return float(np.prod(self.hi - self.lo))
        fr = self.frame
        c = fr.chart_coords(self.center)
        r = 0.5
        rng = np.random.default_rng(seed)
        while True:
            pts = c + rng.uniform(-r, r, size=(4000, fr.delta))
            edge = pts.copy()
            k = rng.integers(0, fr.delta, size=len(edge))
            edge[np.arange(len(edge)), k] = c[k] + r * np.sign(rng.uniform(-1, 1, size=len(edge)))
            if not np.any(self.contains(np.array([fr.chart_point(b) for b in edge]))):
                break
            r *= 2
        pts = c + rng.uniform(-r, r, size=(samples, fr.delta))
        xs = np.array([fr.chart_point(b) for b in pts])
        return float(np.mean(self.contains(xs))) * (2 * r) ** fr.delta

    def describe(self) -> dict:
        if self.is_box:
            return {"kind": "box", "lo": [repr(float(x)) for x in self.lo],
                    "hi": [repr(float(x)) for x in self.hi]}
        return {"kind": "cap", "center": [repr(float(x)) for x in self.center],
                "angle": repr(float(self.angle))}


def parse_region(frame: CuspFrame, text: Optional[str]) -> Optional[ConeRegion]:
    """``box:lo1,lo2;hi1,hi2`` | ``cube:h`` | ``cap:x1,..,xs;angle`` | ``all``/None."""
    if text is None or text == "all":
        return None
    kind, _, body = text.partition(":")
    if kind == "cube":
        return ConeRegion.cube(frame, float(body))
    if kind == "box":
        lo, hi = body.split(";")
        return ConeRegion.box(frame, [float(x) for x in lo.split(",")], [float(x) for x in hi.split(",")])
    if kind == "cap":
        c, a = body.split(";")
        return ConeRegion.cap(frame, [float(x) for x in c.split(",")], float(a))
    raise FormError(f"unknown region spec {text!r}")


# ---------------------------------------------------------------- counting

def _bin_index(qs: np.ndarray, base: Fraction) -> np.ndarray:
    """k with base^k <= q < base^(k+1), exactly for rational bases."""
    k = np.floor(np.log(qs.astype(float)) / math.log(float(base))).astype(int)
    out = k.copy()
    for i, (qq, kk) in enumerate(zip(qs, k)):
        while base ** int(kk) > int(qq):
            kk -= 1
        while base ** int(kk + 1) <= int(qq):
            kk += 1
        out[i] = kk
    return out


@dataclass
class CountingHistogram:
    base: Fraction
    bins: dict
    q_max: int
    region: Optional[ConeRegion] = None
    fitted_slope: Optional[float] = None
    fit_r2: Optional[float] = None
    k_min: Optional[int] = None

    @property
    def complete_bins(self) -> list[int]:
        """Bins whose whole q-range lies below q_max."""
        return [k for k in sorted(self.bins) if self.base ** (k + 1) - 1 <= self.q_max]

    def to_dict(self) -> dict:
        return {
            "base": str(self.base),
            "q_max": self.q_max,
            "bins": {str(k): int(v) for k, v in sorted(self.bins.items())},
            "complete_bins": self.complete_bins,
            "region": self.region.describe() if self.region is not None else "all",
            "fitted_slope": None if self.fitted_slope is None else repr(float(self.fitted_slope)),
            "fit_r2": None if self.fit_r2 is None else repr(float(self.fit_r2)),
            "k_min": self.k_min,
        }


def counting_histogram(points: ConePoints, base=2, region: Optional[ConeRegion] = None) -> CountingHistogram:
    base = Fraction(base)
    if base <= 1:
        raise FormError("base must exceed 1")
    q_max = points.q_max
    k_top = 0
    while base ** (k_top + 1) <= q_max:
        k_top += 1
    bins = {k: 0 for k in range(k_top + 1)}
    pts = points.coords
    if region is not None and len(pts):
        pts = pts[region.contains(pts)]
    if len(pts):
        ks = _bin_index(pts[:, -1], base)
        vals, counts = np.unique(ks, return_counts=True)
        for k, c in zip(vals, counts):
            bins[int(k)] = int(c)
    return CountingHistogram(base, bins, q_max, region)


def default_kmin(hist: CountingHistogram, min_points: int = 30) -> Optional[int]:
    for k in hist.complete_bins:
        if hist.bins[k] >= min_points:
            return k
    return None


def fit_exponent(hist: CountingHistogram, k_min: Optional[int] = None) -> tuple[float, float]:
    """Least-squares slope of log_a N(k) against k + 1 over complete, nonempty bins."""
    if k_min is None:
        k_min = default_kmin(hist)
        if k_min is None:
            raise FormError("too few bins: no complete bin holds 30 points")
    ks = [k for k in hist.complete_bins if k >= k_min and hist.bins[k] > 0]
    if len(ks) < 3:
        raise FormError(f"too few bins for a fit ({len(ks)} nonempty complete bins with k >= {k_min})")
    x = np.array([k + 1 for k in ks], float)
    y = np.log(np.array([hist.bins[k] for k in ks], float)) / math.log(float(hist.base))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / sst if sst > 0 else 1.0
    hist.fitted_slope, hist.fit_r2, hist.k_min = float(slope), float(r2), k_min
    return float(slope), float(r2)


def equidist_ratio(points: ConePoints, k: int, O1: ConeRegion, O2: ConeRegion, base=2) -> float:
    h1 = counting_histogram(points, base, O1)
    h2 = counting_histogram(points, base, O2)
    n2 = h2.bins.get(k, 0)
    if n2 == 0:
        raise FormError(f"bin {k} of the second region is empty")
    return h1.bins.get(k, 0) / n2


def largest_populated_bin(points: ConePoints, regions: Sequence[ConeRegion], base=2) -> Optional[int]:
    hists = [counting_histogram(points, base, r) for r in regions]
    ks = [k for k in hists[0].complete_bins if all(h.bins.get(k, 0) > 0 for h in hists)]
    return max(ks) if ks else None
