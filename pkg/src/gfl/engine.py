"""Covariance assembly, exact Gaussian sampling and conditioning on anchors.

Samples are ``L z`` with ``L`` the lower Cholesky factor of ``C + lambda I``.
The normal vector for replicate ``r`` and component ``j`` comes from a
Philox stream keyed by the master seed with counter ``(0, 0, j, r)``, so the
output does not depend on chunking or thread count.
"""

from __future__ import annotations

import csv
import hashlib
import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from .errors import DegenerateGridError, DiscretizationError, NondegeneracyError, SpecError
from .kernels import FieldSpec, covariance_matrix

SAMPLE_SCHEMA = "gfl-sample-v1"
MAX_POINTS = 4096
JITTER_CAP = 1e-8
JITTER_LADDER = (0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8)
_MAGIC = b"GFLS"


def _digest(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a, dtype="<f8").tobytes())
    return h.hexdigest()[:16]


@dataclass(frozen=True)
class Grid:
    """Finite point set, usually a tensor product of per-axis coordinates.

    ``points`` has shape ``(n, dim)``; for tensor grids the first axis varies
    slowest (C order).
    """

    points: np.ndarray
    axes: Optional[tuple[np.ndarray, ...]] = None

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[0] < 1:
            raise SpecError("a grid needs at least one point")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def tensor(cls, axes: Sequence[Sequence[float]]) -> "Grid":
        ax = tuple(np.asarray(a, dtype=float) for a in axes)
        for a in ax:
            if a.ndim != 1 or a.size == 0 or np.any(np.diff(a) <= 0):
                raise SpecError("grid axes must be non-empty and strictly increasing")
        mesh = np.meshgrid(*ax, indexing="ij")
        return cls(np.stack([m.ravel() for m in mesh], axis=-1), ax)

    @classmethod
    def uniform(cls, spec: FieldSpec, sizes: int | Sequence[int]) -> "Grid":
        """Tensor grid with ``sizes[j]`` equispaced points on each domain side."""
        if np.isscalar(sizes):
            sizes = [int(sizes)] * spec.dim
        return cls.tensor([np.linspace(lo, hi, m) for (lo, hi), m in zip(spec.domain, sizes)])

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def fingerprint(self) -> str:
        return _digest(self.points)

    def check_within(self, spec: FieldSpec) -> None:
        spec.check_point(self.points)
        tol = 1e-12
        if np.any(self.points < spec.lower - tol) or np.any(self.points > spec.upper + tol):
            raise SpecError("grid points leave the domain")


def extend_grid(grid: Grid, extra) -> tuple[Grid, np.ndarray]:
    """Append points to a grid, reusing exact duplicates.

    Returns the extended grid and the indices of ``extra`` inside it.
    """
    extra = np.atleast_2d(np.asarray(extra, dtype=float))
    pts = [p for p in grid.points]
    lookup = {p.tobytes(): i for i, p in enumerate(grid.points)}
    idx = []
    for p in extra:
        key = p.tobytes()
        if key not in lookup:
            lookup[key] = len(pts)
            pts.append(p)
        idx.append(lookup[key])
    return Grid(np.array(pts)), np.array(idx, dtype=int)


@dataclass(frozen=True)
class CovarianceMatrix:
    """Symmetric covariance with the Cholesky factor of ``matrix + jitter I``."""

    matrix: np.ndarray
    factor: np.ndarray
    jitter: float
    source: str = ""

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def jitter_rel(self) -> float:
        """Jitter as a multiple of ``trace / n``."""
        scale = np.trace(self.matrix) / self.n
        return self.jitter / scale if scale > 0 else 0.0


def factorize(matrix: np.ndarray, source: str = "", jitter_cap: float = JITTER_CAP) -> CovarianceMatrix:
    """Cholesky with minimal ridge from ``{0, 1e-12, ..., jitter_cap} * trace/n``."""
    c = np.asarray(matrix, dtype=float)
    n = c.shape[0]
    if c.shape != (n, n):
        raise SpecError("covariance must be square")
    if n > MAX_POINTS:
        raise DiscretizationError(f"{n} points exceed the dense limit of {MAX_POINTS}")
    if not np.array_equal(c, c.T):
        raise SpecError("covariance matrix is not symmetric")
    scale = np.trace(c) / n
    cmax = np.max(np.abs(c))
    for rel in JITTER_LADDER:
        if rel > jitter_cap:
            break
        lam = rel * scale
        a = c + lam * np.eye(n) if lam else c
        try:
            low = linalg.cholesky(a, lower=True, check_finite=False)
        except linalg.LinAlgError:
            continue
        if not np.all(np.isfinite(low)):
            continue
        if np.max(np.abs(low @ low.T - a)) <= 1e-9 * cmax:
            low.setflags(write=False)
            return CovarianceMatrix(c, low, lam, source)
    raise DegenerateGridError(
        f"covariance of {n} points is not positive definite at jitter {jitter_cap:g} * trace/n; "
        "points are too close for the quadrature accuracy"
    )


def assemble_covariance(spec: FieldSpec, grid: Grid, jitter_cap: float = JITTER_CAP) -> CovarianceMatrix:
    """Single-component covariance over ``grid``, factorized with minimal jitter."""
    grid.check_within(spec)
    if grid.n > MAX_POINTS:
        raise DiscretizationError(f"{grid.n} points exceed the dense limit of {MAX_POINTS}")
    c = covariance_matrix(spec, grid.points)
    return factorize(c, f"{spec.fingerprint()}:{grid.fingerprint()}", jitter_cap)


_BLOCK = 32


def substream(seed: int, replicate: int, component: int) -> np.random.Generator:
    """Generator for one (replicate, component) pair of a master seed."""
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 0, int(component), int(replicate)]))


def standard_normals(seed: int, replicates: Sequence[int], component: int, n: int) -> np.ndarray:
    out = np.empty((len(replicates), n))
    for i, r in enumerate(replicates):
        out[i] = substream(seed, r, component).standard_normal(n)
    return out


@dataclass
class FieldSample:
    """``values[r, j, i]``: replicate ``r``, component ``j``, grid point ``i``."""

    values: np.ndarray
    seed: int
    spec_fp: str = ""
    grid_fp: str = ""
    jitter: float = 0.0

    @property
    def R(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def n(self) -> int:
        return self.values.shape[2]

    def save(self, path) -> None:
        header = json.dumps(
            {
                "schema": SAMPLE_SCHEMA,
                "spec": self.spec_fp,
                "grid": self.grid_fp,
                "seed": int(self.seed),
                "R": self.R,
                "d": self.d,
                "n": self.n,
                "jitter": self.jitter,
            },
            sort_keys=True,
        ).encode()
        with open(path, "wb") as fh:
            fh.write(_MAGIC + struct.pack("<I", len(header)) + header)
            fh.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "FieldSample":
        raw = Path(path).read_bytes()
        if raw[:4] != _MAGIC:
            raise SpecError(f"{path} is not a sample container")
        (hl,) = struct.unpack("<I", raw[4:8])
        head = json.loads(raw[8 : 8 + hl])
        if head.get("schema") != SAMPLE_SCHEMA:
            raise SpecError(f"unsupported sample schema {head.get('schema')!r}")
        vals = np.frombuffer(raw[8 + hl :], dtype="<f8").reshape(head["R"], head["d"], head["n"])
        return cls(vals.copy(), head["seed"], head["spec"], head["grid"], head["jitter"])

    def to_csv(self, path, grid: Optional[Grid] = None) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            coords = [] if grid is None else [f"x{i}" for i in range(grid.dim)]
            w.writerow(["replicate", "component", "point"] + coords + ["value"])
            for r in range(self.R):
                for j in range(self.d):
                    for i in range(self.n):
                        c = [] if grid is None else [repr(float(v)) for v in grid.points[i]]
                        w.writerow([r, j, i] + c + [repr(float(self.values[r, j, i]))])


def sample(
    cov: CovarianceMatrix,
    d: int,
    R: int,
    seed: int,
    threads: int = 1,
    chunk: int = 2048,
    start: int = 0,
) -> FieldSample:
    """Draw ``R`` replicates of a ``d``-component field with law ``N(0, C + lambda I)``.

    Replicate indices run from ``start`` to ``start + R - 1``; the values for
    a given index never depend on ``R``, ``chunk`` or ``threads``.
    """
    if d < 1 or R < 1:
        raise SpecError("need d >= 1 and R >= 1")
    n = cov.n
    out = np.empty((R, d, n))
    lt = cov.factor.T

    # Work is cut into blocks aligned on absolute replicate index and every
    # product has the same shape, so BLAS rounding cannot depend on R, chunk
    # or threads.
    blk = _BLOCK
    first = (start // blk) * blk
    per = max(1, chunk // blk) * blk

    def work(b0: int) -> None:
        for a in range(b0, min(b0 + per, start + R), blk):
            reps = range(a, a + blk)
            lo, hi = max(a, start), min(a + blk, start + R)
            for j in range(d):
                z = standard_normals(seed, reps, j, n)
                out[lo - start : hi - start, j] = (z @ lt)[lo - a : hi - a]

    starts = range(first, start + R, per)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(work, starts))
    else:
        for lo in starts:
            work(lo)
    src = cov.source.split(":")
    return FieldSample(out, seed, src[0], src[-1] if len(src) > 1 else "", cov.jitter)


@dataclass
class ConditionalSplit:
    """``v = v1 + v2`` with ``v2`` the projection on the anchor values."""

    anchors: np.ndarray
    anchor_values: np.ndarray
    weights: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    jitter: float = 0.0
    extra: dict = field(default_factory=dict)


def projection_weights(matrix: np.ndarray, anchors: Sequence[int], rcond: float = 1e-12) -> np.ndarray:
    """``W`` with ``v2 = v[anchors] @ W``, i.e. ``C_aa^{-1} C_a,all``."""
    anchors = np.asarray(anchors, dtype=int)
    if len(set(anchors.tolist())) != len(anchors):
        raise NondegeneracyError("anchor indices repeat")
    caa = matrix[np.ix_(anchors, anchors)]
    ev = np.linalg.eigvalsh(caa)
    if ev[0] <= rcond * max(ev[-1], np.finfo(float).tiny):
        raise NondegeneracyError(f"anchor covariance is singular (smallest eigenvalue {ev[0]:.3e})")
    w = linalg.solve(caa, matrix[anchors], assume_a="pos")
    # Anchors reproduce themselves exactly.
    w[:, anchors] = np.eye(len(anchors))
    return w


def condition(cov: CovarianceMatrix, field_sample: FieldSample, anchors: Sequence[int]) -> ConditionalSplit:
    """Split a sample on the extended grid into residual and anchor projection.

    ``anchors`` index points of the extended grid (see :func:`extend_grid`).
    The projection uses the unjittered covariance.
    """
    anchors = np.asarray(anchors, dtype=int)
    if field_sample.n != cov.n:
        raise SpecError("sample and covariance live on different grids")
    w = projection_weights(cov.matrix, anchors)
    av = field_sample.values[:, :, anchors]
    v2 = av @ w
    v1 = field_sample.values - v2
    return ConditionalSplit(anchors, av, w, v1, v2, cov.jitter)
