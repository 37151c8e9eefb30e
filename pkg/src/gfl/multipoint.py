"""Multiple-point experiments: phase labels, epsilon-tuple counts, small balls.

Exact multiple points ``v(x^1) = ... = v(x^m)`` are invisible on a grid, so
the experiments count separated tuples whose values agree to within
``eps`` and study how those counts scale.  Small-ball and favorable-scale
probabilities are estimated by sampling the field on discretized metric
balls.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .bands import binomial_ci
from .engine import FieldSample, Grid, factorize, sample
from .errors import InsufficientDataError, SpecError
from .geometry import ball_points, tuples_array
from .kernels import ExponentSet, FieldSpec, covariance_matrix

LABELS = {1: "supercritical: exists", 0: "critical: none", -1: "subcritical: none"}


@dataclass(frozen=True)
class PhasePoint:
    m: int
    d: int
    Q: Fraction
    margin: Fraction
    label: str

    @property
    def exists(self) -> bool:
        return self.margin > 0


def classify_phase(spec_or_q, m: int, d: int) -> PhasePoint:
    """Label ``(m, d)`` by the sign of ``m Q - (m - 1) d``."""
    if m < 2:
        raise SpecError("need m >= 2")
    if d < 1:
        raise SpecError("need d >= 1")
    if isinstance(spec_or_q, FieldSpec):
        q = spec_or_q.exponents.Q
    elif isinstance(spec_or_q, ExponentSet):
        q = spec_or_q.Q
    else:
        q = Fraction(spec_or_q)
    margin = m * q - (m - 1) * d
    sign = (margin > 0) - (margin < 0)
    return PhasePoint(m, d, q, margin, LABELS[sign])


def phase_table(spec_or_q, ms: Sequence[int], ds: Sequence[int]) -> list[PhasePoint]:
    return [classify_phase(spec_or_q, m, d) for m in ms for d in ds]


def write_phase_csv(rows: Sequence[PhasePoint], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "d", "Q", "margin", "label"])
        for p in rows:
            w.writerow([p.m, p.d, str(p.Q), str(p.margin), p.label])


def tuple_statistic(values: np.ndarray, tuples: np.ndarray) -> np.ndarray:
    """``max_i |v(x^i) - v(x^1)|`` per replicate and tuple.

    ``values`` has shape ``(R, d, n)``; returns ``(R, K)``.
    """
    first = values[:, :, tuples[:, 0]]
    out = np.zeros((values.shape[0], len(tuples)))
    for i in range(1, tuples.shape[1]):
        diff = values[:, :, tuples[:, i]] - first
        out = np.maximum(out, np.sqrt(np.sum(diff**2, axis=1)))
    return out


def scan_multipoints(
    field_sample: FieldSample,
    points,
    alpha,
    m: int,
    n: float,
    eps: Sequence[float],
    max_tuples: Optional[int] = None,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Per-replicate counts of separated ``m``-tuples with ``max_i |v(x^i) - v(x^1)| <= eps``.

    Returns ``(counts, tuples, subsampled)`` with ``counts`` of shape
    ``(R, len(eps))``.
    """
    tuples, sub = tuples_array(points, alpha, m, n, max_tuples, seed)
    if len(tuples) == 0:
        raise InsufficientDataError(f"no {m}-tuples with separation 1/{n}; count is undefined")
    eps = np.asarray(eps, dtype=float)
    counts = np.zeros((field_sample.R, len(eps)), dtype=np.int64)
    # Keep the (R, K) statistic block to a few million entries.
    step = max(1, 4_000_000 // len(tuples))
    for lo in range(0, field_sample.R, step):
        st = tuple_statistic(field_sample.values[lo : lo + step], tuples)
        for k, e in enumerate(eps):
            counts[lo : lo + step, k] = np.sum(st <= e, axis=1)
    return counts, tuples, sub


@dataclass
class MultiPointReport:
    spec_fp: str
    m: int
    n: float
    eps: np.ndarray
    mean_count: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    n_tuples: int
    subsampled: bool
    exponent: float = float("nan")
    phase: Optional[PhasePoint] = None
    extra: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epsilon", "mean_count", "ci_lo", "ci_hi"])
            for row in zip(self.eps, self.mean_count, self.ci_lo, self.ci_hi):
                w.writerow([repr(float(v)) for v in row])


def multipoint_report(
    spec: FieldSpec,
    field_sample: FieldSample,
    grid: Grid,
    m: int,
    n: float,
    eps: Sequence[float],
    max_tuples: Optional[int] = None,
    seed: int = 0,
) -> MultiPointReport:
    counts, tuples, sub = scan_multipoints(field_sample, grid.points, spec.exponents, m, n, eps, max_tuples, seed)
    mean = counts.mean(axis=0)
    se = counts.std(axis=0, ddof=1) / math.sqrt(len(counts)) if len(counts) > 1 else np.zeros_like(mean)
    rep = MultiPointReport(
        spec.fingerprint(), m, n, np.asarray(eps, float), mean, mean - 1.96 * se, mean + 1.96 * se,
        len(tuples), sub, phase=classify_phase(spec, m, spec.d),
    )
    try:
        rep.exponent = count_scaling_fit(rep)
    except InsufficientDataError:
        pass
    return rep


def count_scaling_fit(report: MultiPointReport) -> float:
    """Log-log slope of mean tuple count against ``eps``."""
    mask = report.mean_count > 0
    if mask.sum() < 4:
        raise InsufficientDataError("need at least four eps values with nonzero mean count")
    return float(np.polyfit(np.log(report.eps[mask]), np.log(report.mean_count[mask]), 1)[0])


def expected_tuple_count(spec: FieldSpec, grid: Grid, tuples: np.ndarray, eps: Sequence[float], d: int) -> np.ndarray:
    """Sum over tuples of the exact Gaussian probability of the ``eps`` event (``m = 2`` or ``m = 3, d = 1``)."""
    from .verifier import anticoncentration_oracle

    eps = np.asarray(eps, float)
    pts = grid.points
    total = np.zeros(len(eps))
    c = covariance_matrix(spec, pts)
    m = tuples.shape[1]
    for tup in tuples:
        a = np.zeros((m - 1, len(pts)))
        for i in range(1, m):
            a[i - 1, tup[i]] = 1.0
            a[i - 1, tup[0]] -= 1.0
        sig = a @ c @ a.T
        p = anticoncentration_oracle(sig, np.zeros(m - 1), eps, d)
        if p is None:
            raise SpecError("no closed-form oracle for this (m, d)")
        total += p
    return total


@dataclass
class SmallBall:
    r: float
    u: float
    p_hat: float
    ci_lo: float
    ci_hi: float
    successes: int
    reps: int
    n_points: int


def ball_oscillation(
    spec: FieldSpec,
    s,
    r: float,
    reps: int,
    seed: int,
    min_pts: int = 64,
    per_axis: Optional[int] = None,
    threads: int = 1,
) -> tuple[np.ndarray, int]:
    """Replicates of ``sup_{x in S(s, r) ∩ T} |v_1(x) - v_1(s)|`` on a discretized ball."""
    s = spec.check_point(s)
    pts = ball_points(s, r, spec.exponents, spec.domain, min_pts=min_pts, per_axis=per_axis)
    ic = int(np.flatnonzero(np.all(pts == s, axis=1))[0])
    grid = Grid(pts)
    cov = factorize(covariance_matrix(spec, pts), f"{spec.fingerprint()}:{grid.fingerprint()}")
    osc = np.empty(reps)
    chunk = 10_000
    for lo in range(0, reps, chunk):
        hi = min(reps, lo + chunk)
        v = sample(cov, 1, hi - lo, seed, threads=threads, start=lo).values[:, 0]
        osc[lo:hi] = np.max(np.abs(v - v[:, ic : ic + 1]), axis=1)
    return osc, len(pts)


def smallball_estimate(
    spec: FieldSpec,
    s,
    r: float,
    u: float | Sequence[float],
    reps: int,
    seed: int,
    min_pts: int = 64,
    per_axis: Optional[int] = None,
    threads: int = 1,
) -> list[SmallBall]:
    """Monte Carlo ``P(sup_{S(s, r)} |v(x) - v(s)| <= u)`` for one component."""
    us = np.atleast_1d(np.asarray(u, dtype=float))
    if r <= 0 or np.any(us <= 0):
        raise SpecError("need r > 0 and u > 0")
    osc, npts = ball_oscillation(spec, s, r, reps, seed, min_pts, per_axis, threads)
    out = []
    for v in us:
        k = int(np.sum(osc <= v))
        lo, hi = binomial_ci(k, reps)
        out.append(SmallBall(float(r), float(v), k / reps, lo, hi, k, reps, npts))
    return out


def smallball_refined(
    spec: FieldSpec,
    s,
    r: float,
    u: float | Sequence[float],
    reps: int,
    seed: int,
    min_pts: int = 64,
    max_points: int = 2048,
    threads: int = 1,
) -> tuple[list[SmallBall], bool]:
    """Small-ball estimates on nested ball grids, refined until they settle.

    Per-axis node counts go ``m -> 2m - 1`` (nested meshes) until every
    estimate moves by less than its own CI half-width, or the ball would
    exceed ``max_points``.  Returns the finest rows and whether they settled.
    """
    s0 = spec.check_point(s)
    m = 5
    while len(ball_points(s0, r, spec.exponents, spec.domain, per_axis=m)) < min_pts:
        m = 2 * m - 1
    prev = smallball_estimate(spec, s0, r, u, reps, seed, per_axis=m, threads=threads)
    while True:
        m = 2 * m - 1
        if len(ball_points(s0, r, spec.exponents, spec.domain, per_axis=m)) > max_points:
            return prev, False
        cur = smallball_estimate(spec, s0, r, u, reps, seed, per_axis=m, threads=threads)
        if all(abs(a.p_hat - b.p_hat) < 0.5 * (b.ci_hi - b.ci_lo) for a, b in zip(prev, cur)):
            return cur, True
        prev = cur


def write_smallball_csv(rows: Sequence[SmallBall], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "u", "p_hat", "ci_lo", "ci_hi"])
        for b in rows:
            w.writerow([repr(b.r), repr(b.u), repr(b.p_hat), repr(b.ci_lo), repr(b.ci_hi)])


@dataclass
class SmallBallFit:
    slope: float
    constant: float
    intercept: float
    n: int


def fit_smallball_constant(rows: Sequence[SmallBall], q: float) -> SmallBallFit:
    """Least squares ``-log P = c (r/u)^Q + b`` over rows with ``0 < P < 1``."""
    use = [b for b in rows if 0 < b.p_hat < 1]
    if len(use) < 3:
        raise InsufficientDataError("need three small-ball estimates strictly inside (0, 1)")
    x = np.array([(b.r / b.u) ** q for b in use])
    y = -np.log([b.p_hat for b in use])
    c, b0 = np.polyfit(x, y, 1)
    slope = float(np.polyfit(np.log([b.r / b.u for b in use]), np.log(y), 1)[0])
    return SmallBallFit(slope, float(c), float(b0), len(use))


def fit_smallball_slope(rows: Sequence[SmallBall], p_max: float = 0.5) -> float:
    """Slope of ``log(-log P)`` against ``log(r / u)``."""
    use = [b for b in rows if 0 < b.p_hat <= p_max]
    if len(use) < 3:
        raise InsufficientDataError("need three small-ball estimates in (0, p_max]")
    x = np.log([b.r / b.u for b in use])
    y = np.log(-np.log([b.p_hat for b in use]))
    return float(np.polyfit(x, y, 1)[0])


def brownian_smallball(u: float, terms: int = 200) -> float:
    """``P(sup_{[0,1]} |B| <= u)`` from the eigenfunction series."""
    k = np.arange(terms)
    return float(
        4 / math.pi * np.sum((-1.0) ** k / (2 * k + 1) * np.exp(-((2 * k + 1) ** 2) * math.pi**2 / (8 * u * u)))
    )


@dataclass
class FavorableScaleResult:
    scales: np.ndarray
    dropped: list
    k_star: np.ndarray
    k1: np.ndarray
    estimate: np.ndarray
    target: float
    required_k1: float
    n_points: int


def favorable_scale_probe(
    spec: FieldSpec,
    anchors,
    centers,
    r0: float,
    k1: Sequence[float] = (),
    reps: int = 10_000,
    seed: int = 0,
    c: float = 1.0,
    n_scales: int = 8,
    pts_per_scale: int = 64,
    threads: int = 1,
) -> FavorableScaleResult:
    """Probability that some scale ``r`` in ``[r0^2, r0]`` makes every ball oscillation small.

    For each replicate the statistic
    ``K* = min_r max_i sup_{S(s^i, c r)} |v(x) - v(s^i)| / (r (log log 1/r)^(-1/Q))``
    is recorded; the event for a given ``K1`` is ``K* <= K1``.  The required
    ``K1`` is the ``1 - exp(-(log 1/r0)^(1/2))`` quantile of ``K*``.
    """
    if not 0 < r0 < 1 / math.e:
        raise SpecError("r0 must lie in (0, 1/e) so that log log 1/r is positive")
    if n_scales < 8:
        raise SpecError("need at least 8 scales")
    anchors = spec.check_point(np.atleast_2d(anchors))
    centers = spec.check_point(np.atleast_2d(centers))
    if len(anchors) != len(centers):
        raise SpecError("anchors and centers must pair up")
    q = float(spec.exponents.Q)
    alpha = spec.exponents.alpha_f
    scales = np.geomspace(r0 * r0, r0, n_scales)
    pts = [centers]
    kept, dropped = [], []
    for r in scales:
        ok = True
        for s in centers:
            bp = ball_points(s, c * r, alpha, spec.domain, min_pts=pts_per_scale)
            if len(bp) < pts_per_scale:
                ok = False
            pts.append(bp)
        (kept if ok else dropped).append(float(r))
    allpts = np.unique(np.vstack(pts), axis=0)
    if len(kept) == 0:
        raise SpecError("every scale is under-resolved")
    grid = Grid(allpts)
    cov = factorize(covariance_matrix(spec, allpts), f"{spec.fingerprint()}:{grid.fingerprint()}")
    idx_c = [int(np.flatnonzero(np.all(allpts == s, axis=1))[0]) for s in centers]
    kept_arr = np.array(kept)
    members = [
        [np.flatnonzero(np.sum(np.abs(allpts - s) ** alpha, axis=1) <= c * r * (1 + 1e-12)) for s in centers]
        for r in kept_arr
    ]
    norm = kept_arr * np.log(np.log(1.0 / kept_arr)) ** (-1.0 / q)
    kstar = np.empty(reps)
    chunk = 5000
    for lo in range(0, reps, chunk):
        hi = min(reps, lo + chunk)
        v = sample(cov, spec.d, hi - lo, seed, threads=threads, start=lo).values
        ratio = np.empty((hi - lo, len(kept_arr)))
        for a, r in enumerate(kept_arr):
            worst = np.zeros(hi - lo)
            for i, ic in enumerate(idx_c):
                mem = members[a][i]
                dv = v[:, :, mem] - v[:, :, ic : ic + 1]
                worst = np.maximum(worst, np.sqrt(np.sum(dv**2, axis=1)).max(axis=1))
            ratio[:, a] = worst / norm[a]
        kstar[lo:hi] = ratio.min(axis=1)
    target = 1.0 - math.exp(-math.sqrt(math.log(1.0 / r0)))
    k1 = np.asarray(k1, dtype=float)
    est = np.array([np.mean(kstar <= v) for v in k1])
    return FavorableScaleResult(
        scales, dropped, kstar, k1, est, target, float(np.quantile(kstar, target)), len(allpts)
    )
