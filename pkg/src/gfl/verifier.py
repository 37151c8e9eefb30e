"""Numerical checks of the covariance assumptions behind the multiple-point results.

Constants in the assumptions are existential, so every check reports the
worst observed ratio and how much it moves when the plan is refined (twice
the pairs, or a twice finer grid).  A check passes when the ratio is finite
and moves by less than a factor of two.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .engine import Grid, factorize, projection_weights, standard_normals
from .errors import InsufficientDataError, SpecError
from .kernels import Family, FieldSpec, canonical_distance, covariance_matrix, metric_delta

FAR_FACTOR = 8.0
SLOPE_TOL = 0.15


@dataclass
class AssumptionReport:
    check: str
    family: str
    plan: str
    sup_ratio: float
    stability: float
    passed: bool
    details: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(_jsonable(asdict(self)), sort_keys=True)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_jsonl(reports: Sequence, path) -> None:
    with open(path, "w") as fh:
        for r in reports:
            fh.write(r.to_json() + "\n")


def _stability(a: float, b: float) -> float:
    if not (math.isfinite(a) and math.isfinite(b)):
        return math.inf
    if a == b:
        return 1.0
    if min(a, b) <= 0:
        return math.inf
    return max(a, b) / min(a, b)


def default_center(spec: FieldSpec) -> np.ndarray:
    """A quarter of the way into the domain along every axis."""
    return spec.lower + 0.25 * (spec.upper - spec.lower)


def anchor_point(spec: FieldSpec, x, rho: float) -> np.ndarray:
    """Reference point ``x'`` paired with ``x``: itself, or shifted back in time for waves."""
    x = np.array(x, dtype=float)
    if spec.family is Family.WAVE:
        a1 = float(spec.exponents.alpha[0])
        x[0] = x[0] - (4.0 * rho) ** (1.0 / a1)
        if x[0] < spec.domain[0][0]:
            raise SpecError(f"shifted anchor time {x[0]:.4g} leaves the time domain")
    return x


def _pair_plan(spec: FieldSpec, center, radius: float, gap_hi: float, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Pairs in ``B_radius(center) ∩ T`` with metric gaps log-uniform in ``[1e-3, gap_hi]``."""
    alpha = spec.exponents.alpha_f
    hw = radius ** (1.0 / alpha)
    lo = np.maximum(center - hw, spec.lower)
    hi = np.minimum(center + hw, spec.upper)
    ys = lo + (hi - lo) * rng.random((n, spec.dim))
    gaps = np.exp(rng.uniform(math.log(1e-3), math.log(gap_hi), n))
    w = rng.dirichlet(np.ones(spec.dim), n)
    off = (w * gaps[:, None]) ** (1.0 / alpha) * rng.choice([-1.0, 1.0], (n, spec.dim))
    yb = ys + off
    out = (yb < lo) | (yb > hi)
    yb = np.where(out, ys - off, yb)
    yb = np.clip(yb, lo, hi)
    return ys, yb


def _a2_ratios(spec: FieldSpec, xp: np.ndarray, ys: np.ndarray, yb: np.ndarray) -> np.ndarray:
    delta = spec.exponents.delta_f
    ca = covariance_matrix(spec, ys, xp[None, :])[:, 0]
    cb = covariance_matrix(spec, yb, xp[None, :])[:, 0]
    # Differences below the covariance accuracy are not resolvable.
    rel = 1e-13 if spec.family is Family.FBM_SHEET else spec.quad_tol
    floor = rel * np.maximum(np.abs(ca), np.abs(cb))
    lhs = np.abs(ca - cb)
    lhs = np.where(lhs <= floor, 0.0, lhs)
    rhs = np.sum(np.abs(ys - yb) ** delta, axis=1)
    return np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), 0.0)


def far_center(spec: FieldSpec, x, rho: float) -> np.ndarray:
    """Domain corner farthest from ``x`` in the metric, pulled in by ``rho``."""
    alpha = spec.exponents.alpha_f
    corner = np.where(np.abs(spec.upper - x) >= np.abs(x - spec.lower), spec.upper, spec.lower)
    hw = rho ** (1.0 / alpha)
    xt = np.clip(corner, spec.lower + hw, spec.upper - hw)
    if metric_delta(alpha, x, xt) < FAR_FACTOR * rho:
        raise SpecError(f"domain too small for a far rectangle at distance {FAR_FACTOR} rho")
    return xt


def check_a2(
    spec: FieldSpec,
    rho: float = 0.1,
    x=None,
    pairs: int = 1000,
    seed: int = 0,
    case: str = "i",
) -> AssumptionReport:
    """Sup of ``|E[(v(y) - v(ybar)) v(x')]| / sum |y_j - ybar_j|^delta_j``.

    Case ``"i"`` draws both points from ``B_2rho(x)``; case ``"ii"`` draws them
    from ``B_rho`` of a point at distance at least ``8 rho`` from ``x``.
    """
    if rho <= 0 or rho > 1:
        raise SpecError("rho must lie in (0, 1]")
    x = default_center(spec) if x is None else spec.check_point(x).astype(float)
    xp = anchor_point(spec, x, rho)
    if case == "i":
        center, radius = x, 2.0 * rho
    elif case == "ii":
        center, radius = far_center(spec, x, rho), rho
    else:
        raise SpecError(f"unknown case {case!r}")
    # The refined plan doubles the pairs and contains the base plan.
    rng = np.random.default_rng(seed)
    ys, yb = _pair_plan(spec, center, radius, rho, 2 * pairs, rng)
    ratios = _a2_ratios(spec, xp, ys, yb)
    sups = [float(np.max(ratios[:pairs])), float(np.max(ratios))]
    stab = _stability(*sups)
    return AssumptionReport(
        "a2",
        spec.family.value,
        f"case {case}, rho={rho}, {pairs} and {2 * pairs} pairs, gaps in [1e-3, rho]",
        max(sups),
        stab,
        bool(math.isfinite(max(sups)) and stab < 2.0),
        {"anchor": xp, "center": center, "case": case, "sups": sups},
    )


def check_increment_bound(spec: FieldSpec, pairs: int = 1000, seed: int = 0) -> AssumptionReport:
    """Sup of ``||v(x) - v(y)|| / Delta(x, y)`` over pairs with ``Delta <= 1``."""
    alpha = spec.exponents.alpha_f
    rng = np.random.default_rng(seed)
    mid = 0.5 * (spec.lower + spec.upper)
    ys, yb = _pair_plan(spec, mid, 10.0, 1.0, 2 * pairs, rng)
    ratios = np.zeros(2 * pairs)
    for i, (a, b) in enumerate(zip(ys, yb)):
        dl = metric_delta(alpha, a, b)
        if 0 < dl <= 1:
            ratios[i] = canonical_distance(spec, a, b) / dl
    sups = [float(np.max(ratios[:pairs])), float(np.max(ratios))]
    stab = _stability(*sups)
    return AssumptionReport(
        "increment",
        spec.family.value,
        f"{pairs} and {2 * pairs} pairs, Delta <= 1",
        max(sups),
        stab,
        bool(math.isfinite(max(sups)) and stab < 2.0),
        {"sups": sups},
    )


@dataclass
class NondegeneracyResult:
    lambda_min: float
    violated: bool
    m: int

    def to_json(self) -> str:
        return json.dumps(_jsonable(asdict(self) | {"check": "nondegeneracy"}), sort_keys=True)


def check_nondegeneracy(spec: FieldSpec, points, tol: float = 1e-10) -> NondegeneracyResult:
    """Smallest eigenvalue of the covariance of ``v_1`` at the given points."""
    pts = spec.check_point(np.atleast_2d(points))
    c = covariance_matrix(spec, pts)
    lam = float(np.linalg.eigvalsh(c)[0])
    dup = len({p.tobytes() for p in pts}) < len(pts)
    return NondegeneracyResult(lam, bool(dup or lam <= tol), len(pts))


@dataclass
class AnticoncentrationReport:
    m: int
    d: int
    r: np.ndarray
    p_hat: np.ndarray
    counts: np.ndarray
    reps: int
    fit_mask: np.ndarray
    slope: float
    expected: int
    slope_tol: float
    passed: bool
    oracle: Optional[np.ndarray] = None
    sigma: Optional[np.ndarray] = None

    def to_json(self) -> str:
        d = asdict(self) | {"check": "anticoncentration"}
        return json.dumps(_jsonable(d), sort_keys=True)


def difference_map(spec: FieldSpec, anchors, points) -> tuple[np.ndarray, np.ndarray]:
    """Matrix ``A`` with ``v2(x^1) - v2(x^i) = A[i-2] @ v(anchors)`` and the anchor covariance."""
    anchors = spec.check_point(np.atleast_2d(anchors))
    points = spec.check_point(np.atleast_2d(points))
    allpts = np.vstack([anchors, points])
    c = covariance_matrix(spec, allpts)
    m = len(anchors)
    w = projection_weights(c, range(m))[:, m:]
    a = (w[:, :1] - w[:, 1:]).T
    return a, c[:m, :m]


def anticoncentration_oracle(sigma: np.ndarray, shifts: np.ndarray, r: np.ndarray, d: int) -> Optional[np.ndarray]:
    """Exact ``P(max_i |D_i - a_i| <= r)`` where available.

    ``m = 2`` uses the noncentral chi-square law of ``|D - a|^2``; ``m = 3``
    with ``d = 1`` uses the bivariate normal rectangle probability.
    """
    k = sigma.shape[0]
    if k == 1:
        s2 = sigma[0, 0]
        nc = d * shifts[0] ** 2 / s2
        if nc == 0:
            return stats.chi2.cdf(r**2 / s2, d)
        return stats.ncx2.cdf(r**2 / s2, d, nc)
    if k == 2 and d == 1:
        mvn = stats.multivariate_normal(mean=np.zeros(2), cov=sigma)
        return np.array([mvn.cdf(shifts + v, lower_limit=shifts - v) for v in r])
    return None


def check_anticoncentration(
    spec: FieldSpec,
    anchors,
    points,
    shifts: Optional[Sequence[float]] = None,
    r_sweep: Optional[Sequence[float]] = None,
    reps: int = 100_000,
    seed: int = 0,
    d: Optional[int] = None,
    slope_tol: Optional[float] = None,
    min_count: int = 20,
) -> AnticoncentrationReport:
    """Monte Carlo ``P(max_{i>=2} |v2(x^1) - v2(x^i) - a_i| <= r)`` and its log-log slope.

    ``v2`` is the projection on the anchor values; each shift ``a_i`` is
    applied to every component.  Radii whose estimate saturates (``r`` above
    ``10`` times the largest difference deviation) or with fewer than
    ``min_count`` hits are left out of the fit.
    """
    d = spec.d if d is None else d
    amat, caa = difference_map(spec, anchors, points)
    m = amat.shape[0] + 1
    if m < 2:
        raise SpecError("need at least two points")
    shifts = np.zeros(m - 1) if shifts is None else np.asarray(shifts, dtype=float)
    if shifts.shape != (m - 1,):
        raise SpecError(f"need {m - 1} shifts")
    sigma = amat @ caa @ amat.T
    sd = np.sqrt(np.diag(sigma))
    if r_sweep is None:
        top = 0.5 * math.sqrt(np.linalg.eigvalsh(sigma)[0])
        r_sweep = top * np.logspace(-0.6, 0, 7)
    r = np.asarray(r_sweep, dtype=float)
    cov = factorize(caa, "anchors")
    # Per component: anchor values -> differences.
    stat = np.zeros(reps)
    chunk = 20_000
    for lo in range(0, reps, chunk):
        idx = range(lo, min(reps, lo + chunk))
        sq = np.zeros((len(idx), m - 1))
        for j in range(d):
            va = standard_normals(seed, idx, j, len(caa)) @ cov.factor.T
            diff = va @ amat.T - shifts
            sq += diff**2
        stat[lo : lo + len(idx)] = np.sqrt(sq.max(axis=1))
    counts = np.array([int(np.sum(stat <= v)) for v in r])
    p = counts / reps
    mask = (counts >= min_count) & (r < 10 * sd.max()) & (counts < reps)
    expected = (m - 1) * d
    tol = SLOPE_TOL * expected if slope_tol is None else slope_tol
    if mask.sum() < 2:
        raise InsufficientDataError("fewer than two radii with enough hits; raise reps or r")
    slope = float(np.polyfit(np.log(r[mask]), np.log(p[mask]), 1)[0])
    oracle = anticoncentration_oracle(sigma, shifts, r, d)
    return AnticoncentrationReport(
        m, d, r, p, counts, reps, mask, slope, expected, tol,
        bool(slope >= expected - tol), oracle, sigma,
    )


def check_v2_increment(
    spec: FieldSpec,
    anchors,
    center,
    rho: float,
    per_axis: int = 5,
    reps: int = 2000,
    seed: int = 0,
) -> AssumptionReport:
    """Empirical ``sup |v2(x) - v2(y)| / (sum |x_j - y_j|^delta_j * max_l |v(t_l)|)``.

    Pairs run over a tensor grid in ``B_2rho(center)``; the refinement uses
    ``2 * per_axis - 1`` nodes per axis.
    """
    anchors = spec.check_point(np.atleast_2d(anchors))
    alpha = spec.exponents.alpha_f
    delta = spec.exponents.delta_f
    hw = (2 * rho) ** (1.0 / alpha)
    lo = np.maximum(center - hw, spec.lower)
    hi = np.minimum(center + hw, spec.upper)
    sups = []
    for m_ax in (per_axis, 2 * per_axis - 1):
        grid = Grid.tensor([np.linspace(a, b, m_ax) for a, b in zip(lo, hi)])
        allpts = np.vstack([anchors, grid.points])
        c = covariance_matrix(spec, allpts)
        na = len(anchors)
        w = projection_weights(c, range(na))[:, na:]
        cov = factorize(c[:na, :na], "anchors")
        va = standard_normals(seed, range(reps), 0, na) @ cov.factor.T
        v2 = va @ w
        scale = np.max(np.abs(va), axis=1)
        i, j = np.triu_indices(grid.n, 1)
        dist = np.sum(np.abs(grid.points[i] - grid.points[j]) ** delta, axis=1)
        best = 0.0
        for lo_ in range(0, len(i), 5000):
            sl = slice(lo_, lo_ + 5000)
            inc = np.abs(v2[:, i[sl]] - v2[:, j[sl]])
            best = max(best, float(np.max(inc / (dist[sl] * scale[:, None]))))
        sups.append(best)
    stab = _stability(*sups)
    return AssumptionReport(
        "v2_increment",
        spec.family.value,
        f"tensor grids with {per_axis} and {2 * per_axis - 1} nodes per axis, {reps} replicates",
        max(sups),
        stab,
        bool(math.isfinite(max(sups)) and stab < 2.0),
        {"sups": sups},
    )


def default_suite(spec: FieldSpec, seed: int = 0, pairs: int = 1000) -> list:
    """The two covariance-smoothness cases, the increment bound and a non-degeneracy plan."""
    out = [
        check_a2(spec, case="i", seed=seed, pairs=pairs),
        check_a2(spec, case="ii", seed=seed, pairs=pairs),
        check_increment_bound(spec, pairs=max(50, pairs // 10), seed=seed),
    ]
    rng = np.random.default_rng(seed)
    pts = spec.lower + (spec.upper - spec.lower) * rng.random((3, spec.dim))
    out.append(check_nondegeneracy(spec, pts))
    return out


__all__ = [
    "AnticoncentrationReport",
    "AssumptionReport",
    "NondegeneracyResult",
    "anchor_point",
    "anticoncentration_oracle",
    "check_a2",
    "check_anticoncentration",
    "check_increment_bound",
    "check_nondegeneracy",
    "check_v2_increment",
    "default_suite",
    "difference_map",
    "write_jsonl",
]
