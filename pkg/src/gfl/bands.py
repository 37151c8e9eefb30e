"""Frequency-band pieces of the fractional Brownian sheet.

In its harmonizable form the sheet is a stochastic integral over frequencies
``xi`` in ``R^N`` against independent real white noises, with per-axis
integrand ``(1 - cos(x xi), sin(x xi)) / |xi|^(H + 1/2)``.  The band field
``v(A, x)`` keeps the frequencies with ``max_i |xi_i|^(H_i)`` in ``A``.
For ``A = [a, b)`` that region is a box minus a smaller box, so

    Cov(v(A, x), v(A, y)) = prod_i J_i(b^(1/H_i)) - prod_i J_i(a^(1/H_i))

where ``J_i(c)`` is the axis-``i`` covariance truncated to ``|xi_i| < c``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, special, stats

from .engine import factorize, standard_normals
from .errors import DiscretizationError, InsufficientDataError, SpecError, UnsupportedFamilyError
from .geometry import ball_points
from .kernels import Family, FieldSpec, scalar_covariance
from .quadrature import power_trig_tail

_ACC = {"epsabs": 1e-15, "epsrel": 1e-12}


@dataclass(frozen=True)
class Band:
    """Frequency band ``[a, b)`` in the anisotropic scale ``max_i |xi_i|^H_i``."""

    a: float
    b: float = math.inf

    def __post_init__(self):
        if not (self.a >= 0 and self.b >= self.a) or math.isnan(self.b):
            raise SpecError(f"invalid band [{self.a}, {self.b})")

    @property
    def full(self) -> bool:
        return self.a == 0 and math.isinf(self.b)


def _norm(h: float) -> float:
    """``int_R (1 - cos xi) |xi|^(-2H-1) d xi``."""
    return math.pi / (special.gamma(2 * h + 1) * math.sin(math.pi * h))


def _axis_full(h: float, x: float, y: float) -> float:
    return 0.5 * (abs(x) ** (2 * h) + abs(y) ** (2 * h) - abs(x - y) ** (2 * h))


def _head(h: float, x: float, y: float, c: float) -> float:
    """``int_0^c g(xi) d xi`` in the cancellation-free product form."""
    p = -2 * h - 1

    def sinc(v: float) -> float:
        return math.sin(v) / v if v != 0.0 else 1.0

    def g2(u: float) -> float:
        # g(u) / u^2, finite at the origin
        return (
            y * y * math.sin(0.5 * x * u) ** 2 * sinc(0.5 * y * u) ** 2
            + x * y * sinc(x * u) * sinc(y * u)
        )

    # Split at oscillation periods of the fastest frequency.
    per = 2 * math.pi / max(abs(x), abs(y), 1e-300)
    edges = np.unique(np.concatenate([[0.0], np.arange(per, c, per)[:2000], [c]]))
    tot = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if lo == 0.0:
            val, _ = integrate.quad(g2, lo, hi, weight="alg", wvar=(p + 2, 0.0), limit=200, **_ACC)
        else:
            val, _ = integrate.quad(lambda u: g2(u) * u ** (p + 2), lo, hi, limit=200, **_ACC)
        tot += val
    return tot


def _tail(h: float, x: float, y: float, c: float) -> float:
    """``int_c^inf g(xi) d xi`` with ``g = (1 - cos x - cos y + cos(x - y)) / xi^(2H+1)``."""
    p = -2 * h - 1
    tot = power_trig_tail(p, "cos", 0.0, c)[0]
    for coef, om in ((-1.0, abs(x)), (-1.0, abs(y)), (1.0, abs(x - y))):
        tot += coef * power_trig_tail(p, "cos", om, c)[0]
    return tot


@lru_cache(maxsize=100_000)
def axis_band_covariance(h: float, x: float, y: float, c: float, route: str = "auto") -> float:
    """Axis covariance with frequencies restricted to ``|xi| < c``.

    ``route`` selects the head integral (``"head"``), the full covariance
    minus the tail (``"tail"``) or the automatic choice.
    """
    if c <= 0.0 or x == 0.0 or y == 0.0:
        return 0.0
    if math.isinf(c):
        return _axis_full(h, x, y)
    if route == "auto":
        route = "head" if c * max(abs(x), abs(y)) <= 8.0 else "tail"
    norm = _norm(h)
    if route == "head":
        return _head(h, x, y, c) / norm
    return _axis_full(h, x, y) - _tail(h, x, y, c) / norm


def _box(spec: FieldSpec, level: float, x, y) -> float:
    """Covariance of the part with all ``|xi_i|^H_i < level``."""
    if level <= 0.0:
        return 0.0
    out = 1.0
    for h, xi, yi in zip(spec.hurst, x, y):
        c = math.inf if math.isinf(level) else level ** (1.0 / h)
        out *= axis_band_covariance(h, float(xi), float(yi), c)
    return out


def _require_sheet(spec: FieldSpec) -> None:
    if spec.family is not Family.FBM_SHEET:
        raise UnsupportedFamilyError("band fields are implemented for the fractional Brownian sheet only")


def band_covariance(spec: FieldSpec, band: Band, x, y) -> float:
    """``Cov(v(band, x), v(band, y))`` for one component."""
    _require_sheet(spec)
    x = spec.check_point(x)
    y = spec.check_point(y)
    if band.b == band.a:
        return 0.0
    return _box(spec, band.b, x, y) - _box(spec, band.a, x, y)


def complement_covariance(spec: FieldSpec, band: Band, x, y) -> float:
    """Covariance of ``v - v(band)``: frequencies in ``[0, a)`` and ``[b, inf)``."""
    _require_sheet(spec)
    x = spec.check_point(x)
    y = spec.check_point(y)
    low = _box(spec, band.a, x, y)
    if math.isinf(band.b):
        return low
    return low + scalar_covariance(spec, x, y) - _box(spec, band.b, x, y)


def residual_increment_norm(spec: FieldSpec, band: Band, x, y) -> float:
    """``|| (v - v(band))(x) - (v - v(band))(y) ||_L2``."""
    x = spec.check_point(x)
    y = spec.check_point(y)
    if band.full or np.array_equal(x, y):
        _require_sheet(spec)
        return 0.0
    var = (
        complement_covariance(spec, band, x, x)
        + complement_covariance(spec, band, y, y)
        - 2.0 * complement_covariance(spec, band, x, y)
    )
    return math.sqrt(max(var, 0.0))


def rhs_scale(spec: FieldSpec, band: Band, x, y) -> float:
    """``sum_i a^gamma_i |x_i - y_i| + 1/b``."""
    gam = np.array([float(g) for g in spec.exponents.gamma])
    gaps = np.abs(np.asarray(x, float) - np.asarray(y, float))
    inv_b = 0.0 if math.isinf(band.b) else 1.0 / band.b
    return float(np.sum(band.a**gam * gaps) + inv_b)


@dataclass
class BandBoundRow:
    a: float
    b: float
    x: tuple
    y: tuple
    lhs: float
    rhs_scale: float
    ratio: float


@dataclass
class BandBoundReport:
    rows: list[BandBoundRow]
    fitted_c0: float

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["a", "b", "x", "y", "lhs", "rhs_scale", "ratio"])
            for r in self.rows:
                w.writerow([
                    repr(r.a), repr(r.b),
                    " ".join(repr(float(v)) for v in r.x),
                    " ".join(repr(float(v)) for v in r.y),
                    repr(r.lhs), repr(r.rhs_scale), repr(r.ratio),
                ])

    def as_dicts(self) -> list[dict]:
        return [asdict(r) for r in self.rows]


def default_band_plan(a_max: int = 64, b_max: float = 4096.0) -> list[Band]:
    """``a`` in ``{1, 2, 4, ..., a_max}``, ``b`` in ``{2a, 4a, ..., b_max, inf}``."""
    out = []
    a = 1
    while a <= a_max:
        b = 2 * a
        while b <= b_max:
            out.append(Band(float(a), float(b)))
            b *= 2
        out.append(Band(float(a), math.inf))
        a *= 2
    return out


def band_bound_report(
    spec: FieldSpec,
    bands: Optional[Sequence[Band]] = None,
    pairs_per_band: int = 50,
    seed: int = 0,
    gap_range: tuple[float, float] = (1e-3, 1e-1),
) -> BandBoundReport:
    """Sup of residual / (sum a^gamma |x - y| + 1/b) over a random pair plan.

    Pairs have ``x`` uniform in the domain and ``y = x + g u`` with ``g``
    log-uniform in ``gap_range`` and ``u`` a random direction, reflected
    back into the domain.
    """
    _require_sheet(spec)
    bands = default_band_plan() if bands is None else bands
    rng = np.random.default_rng(seed)
    lo, hi = spec.lower, spec.upper
    rows = []
    for band in bands:
        for _ in range(pairs_per_band):
            x = lo + (hi - lo) * rng.random(spec.dim)
            g = math.exp(rng.uniform(*np.log(gap_range)))
            u = rng.standard_normal(spec.dim)
            y = x + g * u / np.linalg.norm(u)
            y = np.where(y > hi, 2 * hi - y, np.where(y < lo, 2 * lo - y, y))
            lhs = residual_increment_norm(spec, band, x, y)
            rhs = rhs_scale(spec, band, x, y)
            rows.append(BandBoundRow(band.a, band.b, tuple(x), tuple(y), lhs, rhs, lhs / rhs))
    return BandBoundReport(rows, max(r.ratio for r in rows))


@dataclass
class TailProbe:
    u: float
    p_hat: float
    ci_lo: float
    ci_hi: float
    successes: int
    reps: int
    scale: float


def binomial_ci(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    """Clopper-Pearson interval."""
    a = 1 - level
    lo = 0.0 if k == 0 else stats.beta.ppf(a / 2, k, n - k + 1)
    hi = 1.0 if k == n else stats.beta.ppf(1 - a / 2, k + 1, n - k)
    return float(lo), float(hi)


def residual_oscillations(
    spec: FieldSpec,
    band: Band,
    s,
    radius: float,
    reps: int,
    seed: int,
    min_pts: int = 64,
    per_axis: Optional[int] = None,
) -> tuple[np.ndarray, float]:
    """Replicates of ``sup_{x in S(s, radius)} |w(x) - w(s)|`` with ``w = v - v(band)``.

    The total field and the band field are sampled jointly on the discretized
    ball; their covariance blocks are ``[[R, B], [B, B]]``.  Also returns the
    largest ``L^2`` norm of ``w(x) - w(s)`` over the ball.
    """
    _require_sheet(spec)
    s = spec.check_point(s)
    pts = ball_points(s, radius, spec.exponents, spec.domain, min_pts=min_pts, per_axis=per_axis)
    if len(pts) < min_pts:
        raise DiscretizationError(f"ball holds {len(pts)} points, need {min_pts}")
    n = len(pts)
    total = np.empty((n, n))
    bandc = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            total[i, j] = total[j, i] = scalar_covariance(spec, pts[i], pts[j])
            bandc[i, j] = bandc[j, i] = band_covariance(spec, band, pts[i], pts[j])
    joint = np.block([[total, bandc], [bandc, bandc]])
    cov = factorize(joint, "joint-band")
    ic = int(np.flatnonzero(np.all(pts == s, axis=1))[0])
    z = standard_normals(seed, range(reps), 0, 2 * n)
    vals = z @ cov.factor.T
    w = vals[:, :n] - vals[:, n:]
    osc = np.max(np.abs(w - w[:, ic : ic + 1]), axis=1)
    scale = max(residual_increment_norm(spec, band, p, s) for p in pts)
    return osc, scale


def residual_tail_probe(
    spec: FieldSpec,
    band: Band,
    s,
    c: float,
    r: float,
    u: float | Sequence[float],
    reps: int,
    seed: int,
    min_pts: int = 64,
) -> list[TailProbe]:
    """Monte Carlo ``P(sup_{S(s, c r)} |w(x) - w(s)| >= u)`` for each ``u``."""
    if reps < 1000:
        raise SpecError("need at least 1000 replicates")
    us = np.atleast_1d(np.asarray(u, dtype=float))
    if band.full:
        _require_sheet(spec)
        return [TailProbe(float(v), 0.0, 0.0, binomial_ci(0, reps)[1], 0, reps, 0.0) for v in us]
    osc, scale = residual_oscillations(spec, band, s, c * r, reps, seed, min_pts)
    out = []
    for v in us:
        k = int(np.sum(osc >= v))
        lo, hi = binomial_ci(k, reps)
        out.append(TailProbe(float(v), k / reps, lo, hi, k, reps, scale))
    return out


def tail_growth_exponent(probes: Sequence[TailProbe], p_range: tuple[float, float] = (1e-4, 0.5)) -> float:
    """Slope of ``log(-log p)`` against ``log(u / A)`` over probes with ``p`` in range."""
    pts = [(p.u / p.scale, p.p_hat) for p in probes if p_range[0] <= p.p_hat <= p_range[1]]
    if len(pts) < 3:
        raise InsufficientDataError("too few probes with usable probabilities")
    x = np.log([a for a, _ in pts])
    yv = np.log(-np.log([b for _, b in pts]))
    return float(np.polyfit(x, yv, 1)[0])
