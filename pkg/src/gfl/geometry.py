"""Metric balls, anisotropic rectangles and nested cube families.

The cube families are tensor products: at every level each axis of ``T`` is
cut into equal intervals.  An axis is refined at level ``q`` while its cube
half-width exceeds ``(2^-q)^(1/alpha_j)``; refinement splits an interval in
three so that every cube center is again the center of its middle child.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import DiscretizationError, SpecError
from .kernels import ExponentSet


def _alpha(metric) -> np.ndarray:
    if isinstance(metric, ExponentSet):
        return metric.alpha_f
    return np.atleast_1d(np.asarray(metric, dtype=float))


def delta_matrix(a: np.ndarray, b: np.ndarray, alpha) -> np.ndarray:
    """Pairwise anisotropic distances between rows of ``a`` and ``b``."""
    alpha = _alpha(alpha)
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    out = np.zeros((len(a), len(b)))
    for j, aj in enumerate(alpha):
        out += np.abs(a[:, None, j] - b[None, :, j]) ** aj
    return out


@dataclass(frozen=True)
class MetricBall:
    center: np.ndarray
    radius: float
    alpha: np.ndarray

    def contains(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.sum(np.abs(pts - self.center) ** self.alpha, axis=-1) <= self.radius


@dataclass(frozen=True)
class AnisoRect:
    """Rectangle ``prod [x_j - r^(1/alpha_j), x_j + r^(1/alpha_j)]``."""

    center: np.ndarray
    radius: float
    alpha: np.ndarray

    @property
    def half_widths(self) -> np.ndarray:
        return self.radius ** (1.0 / self.alpha)

    def contains(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.all(np.abs(pts - self.center) <= self.half_widths, axis=-1)


def ball_points(
    center,
    r: float,
    alpha,
    domain: Optional[Sequence[tuple[float, float]]] = None,
    min_pts: int = 64,
    per_axis: Optional[int] = None,
) -> np.ndarray:
    """Points of an anisotropic grid inside ``S(center, r)``, clipped to ``domain``.

    Each axis gets ``per_axis`` (odd) nodes spread over the ball's extent so
    the center itself is always a node.  Without ``per_axis`` the resolution
    is doubled until at least ``min_pts`` points fall inside.
    """
    c = np.asarray(center, dtype=float)
    alpha = _alpha(alpha)
    hw = r ** (1.0 / alpha)
    lo = c - hw
    hi = c + hw
    if domain is not None:
        lo = np.maximum(lo, [a for a, _ in domain])
        hi = np.minimum(hi, [b for _, b in domain])

    def build(m: int) -> np.ndarray:
        axes = []
        for j in range(len(c)):
            u = c[j] + hw[j] * np.linspace(-1.0, 1.0, m)
            axes.append(u[(u >= lo[j] - 1e-15) & (u <= hi[j] + 1e-15)])
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in mesh], axis=-1)
        return pts[np.sum(np.abs(pts - c) ** alpha, axis=-1) <= r * (1 + 1e-12)]

    if per_axis is not None:
        return build(per_axis | 1)
    m = 5
    while True:
        pts = build(m)
        if len(pts) >= min_pts:
            return pts
        if m > 4097:
            raise DiscretizationError("cannot place enough points in the ball")
        m = 2 * m + 1


@dataclass(frozen=True)
class CubeLevel:
    """Level ``q``: axis ``j`` is cut into ``3^splits[j]`` equal intervals."""

    q: int
    splits: tuple[int, ...]
    half: np.ndarray

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(3**s for s in self.splits)

    @property
    def size(self) -> int:
        return int(np.prod(self.counts, dtype=object))


class DyadicCubeTree:
    """Nested partitions ``Q_1 ⊃ Q_2 ⊃ ...`` of a rectangle, adapted to the metric.

    Cubes are half-open ``[lo, hi)`` except on the global upper faces.  Cube
    ``l`` at level ``q`` is the C-order flat index of its per-axis interval
    indices.
    """

    def __init__(self, domain: Sequence[tuple[float, float]], alpha, q_max: int):
        if not 1 <= q_max <= 20:
            raise SpecError("q_max must lie in [1, 20]")
        self.alpha = _alpha(alpha)
        self.lo = np.array([a for a, _ in domain], dtype=float)
        self.hi = np.array([b for _, b in domain], dtype=float)
        if self.lo.size != self.alpha.size or np.any(self.hi <= self.lo):
            raise SpecError("domain does not match the exponents")
        self.width = self.hi - self.lo
        self.q_max = q_max
        splits = np.zeros(self.alpha.size, dtype=int)
        self.levels: list[CubeLevel] = []
        for q in range(1, q_max + 1):
            target = (2.0**-q) ** (1.0 / self.alpha)
            half = self.width / 2 / 3.0**splits
            while np.any(half > target):
                mask = half > target
                splits = splits + mask
                half = self.width / 2 / 3.0**splits
            if np.any(half < 1e-13 * np.maximum(np.abs(self.lo), np.abs(self.hi))):
                raise DiscretizationError(f"level {q} cubes are below float resolution")
            lv = CubeLevel(q, tuple(int(s) for s in splits), half)
            if lv.size >= 2**62:
                raise DiscretizationError(f"level {q} has {lv.size} cubes; flat indices would overflow")
            self.levels.append(lv)
        ratios = np.array([lv.half**self.alpha * 2.0**lv.q for lv in self.levels])
        # S(x, c1 2^-q) must sit inside the half-open cube: stay strictly below the inner radius.
        self.c1 = float(ratios.min()) * (1 - 1e-9)
        self.c2 = float(ratios.sum(axis=1).max())

    def level(self, q: int) -> CubeLevel:
        return self.levels[q - 1]

    def axis_index(self, q: int, pts) -> np.ndarray:
        """Per-axis interval indices of points at level ``q``.

        Indices are taken at the finest level and coarsened by integer
        division, so nesting across levels is exact.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        fine = np.array(self.levels[-1].counts, dtype=np.int64)
        u = (pts - self.lo) / self.width * fine
        idx = np.minimum(np.floor(u).astype(np.int64), fine - 1)
        drop = np.array(self.levels[-1].splits) - np.array(self.level(q).splits)
        return idx // (3 ** drop).astype(np.int64)

    def locate(self, q: int, pts) -> np.ndarray:
        """Flat index of the level-``q`` cube containing each point (-1 outside ``T``)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        inside = np.all((pts >= self.lo) & (pts <= self.hi), axis=1)
        idx = np.ravel_multi_index(np.clip(self.axis_index(q, pts), 0, None).T, self.level(q).counts)
        return np.where(inside, idx, -1)

    def multi_index(self, q: int, flat) -> np.ndarray:
        return np.stack(np.unravel_index(np.asarray(flat), self.level(q).counts), axis=-1)

    def bounds(self, q: int, flat) -> tuple[np.ndarray, np.ndarray]:
        mi = self.multi_index(q, flat)
        step = self.width / np.array(self.level(q).counts)
        lo = self.lo + mi * step
        return lo, lo + step

    def centers(self, q: int, flat) -> np.ndarray:
        lo, hi = self.bounds(q, flat)
        return 0.5 * (lo + hi)

    def parent(self, q: int, flat) -> np.ndarray:
        """Index of the level ``q - 1`` cube containing cube ``flat`` of level ``q``."""
        if q <= 1:
            raise SpecError("level 1 cubes have no parent")
        mi = self.multi_index(q, flat)
        drop = np.array(self.level(q).splits) - np.array(self.level(q - 1).splits)
        pm = mi // 3**drop
        return np.ravel_multi_index(pm.T, self.level(q - 1).counts)

    def contains(self, q: int, flat, pts) -> np.ndarray:
        """Half-open membership of points in one cube."""
        return self.locate(q, pts) == flat

    def to_csv(self, path, max_rows: int = 1_000_000) -> int:
        """Write ``q, l, parent, center coords, c1, c2``; returns rows written."""
        total = sum(lv.size for lv in self.levels)
        if total > max_rows:
            raise DiscretizationError(f"tree has {total} cubes, above the export limit {max_rows}")
        dim = self.alpha.size
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["q", "l", "parent"] + [f"x{j}" for j in range(dim)] + ["c1", "c2"])
            for lv in self.levels:
                flat = np.arange(lv.size)
                cen = self.centers(lv.q, flat)
                par = self.parent(lv.q, flat) if lv.q > 1 else np.full(lv.size, -1)
                for l_, p_, c_ in zip(flat, par, cen):
                    w.writerow([lv.q, int(l_), int(p_)] + [repr(float(v)) for v in c_] + [repr(self.c1), repr(self.c2)])
        return total


def build_dyadic_cubes(domain, exponents, q_max: int) -> DyadicCubeTree:
    return DyadicCubeTree(domain, exponents, q_max)


def covering_number(points, alpha, eps: float) -> int:
    """Greedy upper bound on the number of ``eps``-balls needed to cover ``points``."""
    if eps <= 0:
        raise SpecError("eps must be positive")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    alpha = _alpha(alpha)
    rest = pts
    count = 0
    while len(rest):
        d = np.sum(np.abs(rest - rest[0]) ** alpha, axis=-1)
        rest = rest[d > eps]
        count += 1
    return count


def count_separated_tuples(points, alpha, m: int, n: float) -> int:
    return sum(1 for _ in separated_tuples(points, alpha, m, n))


def separated_tuples(
    points,
    alpha,
    m: int,
    n: float,
    max_tuples: Optional[int] = None,
    seed: int = 0,
) -> Iterator[tuple[int, ...]]:
    """Index tuples ``i_1 < ... < i_m`` with pairwise distance at least ``1/n``.

    With ``max_tuples`` set and more tuples available, a uniform random subset
    of that size is produced instead (deterministic for a given ``seed``).
    """
    if m < 2:
        raise SpecError("need m >= 2")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    sep = delta_matrix(pts, pts, alpha) >= 1.0 / n
    np.fill_diagonal(sep, False)
    if max_tuples is None:
        yield from _cliques(sep, m)
        return
    every = list(_cliques(sep, m))
    if len(every) <= max_tuples:
        yield from every
        return
    rng = np.random.default_rng(seed)
    pick = np.sort(rng.choice(len(every), size=max_tuples, replace=False))
    for i in pick:
        yield every[i]


def _cliques(sep: np.ndarray, m: int) -> Iterator[tuple[int, ...]]:
    n = len(sep)
    upper = np.triu(sep, 1)

    def extend(prefix: tuple[int, ...], cand: np.ndarray) -> Iterator[tuple[int, ...]]:
        if len(prefix) == m:
            yield prefix
            return
        for i in np.flatnonzero(cand):
            yield from extend(prefix + (int(i),), cand & upper[i])

    for i in range(n):
        yield from extend((i,), upper[i].copy())


def tuples_array(points, alpha, m: int, n: float, max_tuples: Optional[int] = None, seed: int = 0) -> tuple[np.ndarray, bool]:
    """Separated tuples as an ``(K, m)`` array and a flag telling whether it was subsampled."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if m == 2:
        sep = delta_matrix(pts, pts, alpha) >= 1.0 / n
        i, j = np.nonzero(np.triu(sep, 1))
        arr = np.stack([i, j], axis=-1)
    else:
        arr = np.array(list(separated_tuples(pts, alpha, m, n)), dtype=int).reshape(-1, m)
    sub = max_tuples is not None and len(arr) > max_tuples
    if sub:
        rng = np.random.default_rng(seed)
        arr = arr[np.sort(rng.choice(len(arr), size=max_tuples, replace=False))]
    return arr, sub


def within(points, center, r: float, alpha) -> np.ndarray:
    return np.sum(np.abs(np.atleast_2d(points) - center) ** _alpha(alpha), axis=-1) <= r


__all__ = [
    "AnisoRect",
    "CubeLevel",
    "DyadicCubeTree",
    "MetricBall",
    "ball_points",
    "build_dyadic_cubes",
    "count_separated_tuples",
    "covering_number",
    "delta_matrix",
    "separated_tuples",
    "tuples_array",
    "within",
]
