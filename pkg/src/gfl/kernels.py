"""Field specifications, exponents, the anisotropic metric and covariances.

Three kernel families are supported:

* ``fbm_sheet``: fractional Brownian sheet on ``(0, inf)^N`` with Hurst
  vector ``H``; closed-form product covariance.
* ``heat``: mild solution of the stochastic heat equation in ``R^k`` driven
  by noise white in time with Riesz spatial covariance ``|x - y|^-beta``.
* ``wave``: same noise, stochastic wave equation.

Heat and wave points are ``(t, x)`` flattened with time first.  Every
component of the ``R^d``-valued field is an independent copy of the same
scalar field, so cross-component covariances vanish.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Optional, Sequence

import numpy as np

from .errors import DimensionError, NumericalError, SpecError
from .quadrature import spectral_covariance

SPEC_SCHEMA = "gfl-spec-v1"
QUAD_TOL = 1e-8
CLAMP_TOL = 1e-10
WAVE_BETA_MAX = 1.95


class Family(str, Enum):
    FBM_SHEET = "fbm_sheet"
    HEAT = "heat"
    WAVE = "wave"


def as_fraction(x: float | int | Fraction) -> Fraction:
    """Exact rational for a parameter, reading floats by their shortest repr."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(repr(float(x)))


@dataclass(frozen=True)
class ExponentSet:
    """Per-axis exponents of the anisotropic metric.

    ``alpha_j = 1 / (gamma_j + 1)`` and ``Q = sum 1 / alpha_j``; all stored as
    exact fractions.  ``delta`` holds the covariance-smoothness exponents.
    """

    gamma: tuple[Fraction, ...]
    alpha: tuple[Fraction, ...]
    delta: tuple[Fraction, ...]
    Q: Fraction

    @property
    def alpha_f(self) -> np.ndarray:
        return np.array([float(a) for a in self.alpha])

    @property
    def delta_f(self) -> np.ndarray:
        return np.array([float(a) for a in self.delta])

    @classmethod
    def from_alpha(cls, alpha: Sequence, delta: Optional[Sequence] = None) -> "ExponentSet":
        alpha = tuple(as_fraction(a) for a in alpha)
        gamma = tuple(1 / a - 1 for a in alpha)
        if delta is None:
            delta = tuple(min(2 * a, Fraction(1)) for a in alpha)
        else:
            delta = tuple(as_fraction(x) for x in delta)
        if len(delta) != len(alpha):
            raise SpecError("alpha and delta differ in length")
        if not all(0 < a < 1 for a in alpha):
            raise SpecError("every alpha_j must lie in (0, 1)")
        if not all(a < d <= 1 for a, d in zip(alpha, delta)):
            raise SpecError("every delta_j must lie in (alpha_j, 1]")
        return cls(gamma, alpha, delta, sum((1 / a for a in alpha), Fraction(0)))


@dataclass(frozen=True)
class FieldSpec:
    """Immutable description of one Gaussian field.

    Parameters
    ----------
    family : Family or str
    k : int
        Number of parameter axes for ``fbm_sheet`` (``N``), spatial dimension
        for ``heat`` / ``wave``.
    d : int
        Number of i.i.d. components.
    hurst : sequence of float
        Hurst indices (``fbm_sheet`` only).
    beta : float
        Riesz exponent (``heat`` / ``wave`` only).
    domain : sequence of (lo, hi)
        Compact rectangle ``T``; defaults to ``[1, 2]^N`` or ``[1, 2] x [0, 1]^k``.
    delta_space : float, optional
        Spatial smoothness exponent for ``heat``; must lie in
        ``((2 - beta)/2, (2 - beta) ^ 1)``.  Defaults to the midpoint.
    """

    family: Family
    k: int
    d: int = 1
    hurst: tuple[float, ...] = ()
    beta: Optional[float] = None
    domain: Optional[tuple[tuple[float, float], ...]] = None
    quad_tol: float = QUAD_TOL
    delta_space: Optional[float] = None
    _exponents: ExponentSet = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        try:
            fam = Family(self.family)
        except ValueError:
            raise SpecError(f"unknown family {self.family!r}") from None
        object.__setattr__(self, "family", fam)
        if int(self.k) != self.k or self.k < 1:
            raise SpecError(f"k must be a positive integer, got {self.k}")
        if int(self.d) != self.d or self.d < 1:
            raise SpecError(f"d must be a positive integer, got {self.d}")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "d", int(self.d))
        if not 0 < self.quad_tol < 1:
            raise SpecError(f"quad_tol must lie in (0, 1), got {self.quad_tol}")

        if fam is Family.FBM_SHEET:
            hurst = tuple(float(h) for h in self.hurst)
            if len(hurst) == 1 and self.k > 1:
                hurst = hurst * self.k
            if len(hurst) != self.k:
                raise SpecError(f"need {self.k} Hurst indices, got {len(hurst)}")
            if not all(0.0 < h < 1.0 for h in hurst):
                raise SpecError(f"Hurst indices must lie in (0, 1), got {hurst}")
            if self.beta is not None:
                raise SpecError("beta is not a fractional Brownian sheet parameter")
            if self.delta_space is not None:
                raise SpecError("delta_space applies to the heat family only")
            object.__setattr__(self, "hurst", hurst)
        else:
            if self.hurst:
                raise SpecError("Hurst indices apply to the fractional Brownian sheet only")
            if self.beta is None:
                raise SpecError(f"{fam.value} needs beta")
            beta = float(self.beta)
            object.__setattr__(self, "beta", beta)
            unit = self.k == 1 and beta == 1.0
            lo = 0.0 if fam is Family.HEAT else 1.0
            if not (unit or lo < beta < min(self.k, 2)):
                raise SpecError(
                    f"{fam.value} needs beta in ({lo:g}, {min(self.k, 2)}) or k = beta = 1; "
                    f"got k={self.k}, beta={beta}"
                )
            if fam is Family.WAVE and beta > WAVE_BETA_MAX:
                raise SpecError(f"wave covariance is too ill-conditioned for beta > {WAVE_BETA_MAX}")
            if self.delta_space is not None and fam is not Family.HEAT:
                raise SpecError("delta_space applies to the heat family only")

        if self.domain is None:
            dom = ((1.0, 2.0),) * self.k if fam is Family.FBM_SHEET else ((1.0, 2.0),) + ((0.0, 1.0),) * self.k
        else:
            dom = tuple((float(a), float(b)) for a, b in self.domain)
        if len(dom) != self.dim:
            raise SpecError(f"domain needs {self.dim} intervals, got {len(dom)}")
        for lo_, hi_ in dom:
            if not (math.isfinite(lo_) and math.isfinite(hi_) and lo_ < hi_):
                raise SpecError(f"bad domain interval [{lo_}, {hi_}]")
        if fam is Family.FBM_SHEET and min(a for a, _ in dom) <= 0:
            raise SpecError("fractional Brownian sheet domain must lie in (0, inf)^N")
        if fam is not Family.FBM_SHEET and dom[0][0] <= 0:
            raise SpecError("time interval must be strictly positive")
        object.__setattr__(self, "domain", dom)
        object.__setattr__(self, "_exponents", _derive(self))

    @property
    def dim(self) -> int:
        """Dimension of a parameter point."""
        return self.k if self.family is Family.FBM_SHEET else 1 + self.k

    @property
    def exponents(self) -> ExponentSet:
        return self._exponents

    @property
    def lower(self) -> np.ndarray:
        return np.array([a for a, _ in self.domain])

    @property
    def upper(self) -> np.ndarray:
        return np.array([b for _, b in self.domain])

    def replace(self, **changes) -> "FieldSpec":
        kw = {k: v for k, v in self.to_dict().items()}
        kw = _kwargs_from_dict(kw)
        kw.update(changes)
        return FieldSpec(**kw)

    def to_dict(self) -> dict[str, Any]:
        """Flat key-value form (dotted keys), stable across runs."""
        out: dict[str, Any] = {
            "schema": SPEC_SCHEMA,
            "family": self.family.value,
            "k": self.k,
            "d": self.d,
            "domain.lower": [a for a, _ in self.domain],
            "domain.upper": [b for _, b in self.domain],
            "quad_tol": self.quad_tol,
        }
        if self.family is Family.FBM_SHEET:
            out["hurst"] = list(self.hurst)
        else:
            out["beta"] = self.beta
        if self.delta_space is not None:
            out["delta_space"] = float(self.delta_space)
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "FieldSpec":
        schema = data.get("schema", SPEC_SCHEMA)
        if schema != SPEC_SCHEMA:
            raise SpecError(f"unsupported spec schema {schema!r}")
        return cls(**_kwargs_from_dict(data))

    def fingerprint(self) -> str:
        items = sorted(self.to_dict().items())
        return hashlib.sha256(repr(items).encode()).hexdigest()[:16]

    def check_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.dim,):
            raise DimensionError(f"points must have dimension {self.dim}, got shape {x.shape}")
        return x


_KNOWN_KEYS = {"schema", "family", "k", "d", "hurst", "beta", "domain.lower",
               "domain.upper", "quad_tol", "delta_space"}


def _kwargs_from_dict(data: dict[str, Any]) -> dict[str, Any]:
    flat = dict(data)
    # Accept nested {"domain": {"lower": .., "upper": ..}} as produced by TOML parsers.
    dom = flat.pop("domain", None)
    if isinstance(dom, dict):
        flat.setdefault("domain.lower", dom.get("lower"))
        flat.setdefault("domain.upper", dom.get("upper"))
    unknown = set(flat) - _KNOWN_KEYS
    if unknown:
        raise SpecError(f"unknown spec keys: {sorted(unknown)}")
    if "family" not in flat or "k" not in flat:
        raise SpecError("spec needs at least 'family' and 'k'")
    kw: dict[str, Any] = {"family": flat["family"], "k": flat["k"], "d": flat.get("d", 1)}
    if flat.get("hurst") is not None:
        kw["hurst"] = tuple(flat["hurst"])
    if flat.get("beta") is not None:
        kw["beta"] = flat["beta"]
    lo, hi = flat.get("domain.lower"), flat.get("domain.upper")
    if (lo is None) != (hi is None):
        raise SpecError("domain needs both lower and upper bounds")
    if lo is not None:
        if len(lo) != len(hi):
            raise SpecError("domain bounds differ in length")
        kw["domain"] = tuple(zip(lo, hi))
    if flat.get("quad_tol") is not None:
        kw["quad_tol"] = flat["quad_tol"]
    if flat.get("delta_space") is not None:
        kw["delta_space"] = flat["delta_space"]
    return kw


def _derive(spec: FieldSpec) -> ExponentSet:
    if spec.family is Family.FBM_SHEET:
        return ExponentSet.from_alpha([as_fraction(h) for h in spec.hurst])
    b = as_fraction(spec.beta)
    k = spec.k
    if spec.family is Family.HEAT:
        a_time, a_space = (2 - b) / 4, (2 - b) / 2
        lo, hi = (2 - b) / 2, min(2 - b, Fraction(1))
        if spec.delta_space is None:
            ds = (lo + hi) / 2
        else:
            ds = as_fraction(spec.delta_space)
            if not lo < ds < hi:
                raise SpecError(f"delta_space must lie in ({float(lo)}, {float(hi)}), got {spec.delta_space}")
        return ExponentSet.from_alpha((a_time,) + (a_space,) * k, (2 * a_time,) + (ds,) * k)
    a = (2 - b) / 2
    return ExponentSet.from_alpha((a,) * (1 + k), (2 - b,) * (1 + k))


def derive_exponents(spec: FieldSpec) -> ExponentSet:
    """Exponents ``gamma``, ``alpha``, ``delta`` and ``Q`` of a field."""
    return spec.exponents


def metric_delta(spec_or_alpha, x, y) -> float | np.ndarray:
    """Anisotropic distance ``sum_j |x_j - y_j|^alpha_j``.

    Broadcasts over leading axes of ``x`` and ``y``.
    """
    if isinstance(spec_or_alpha, FieldSpec):
        x = spec_or_alpha.check_point(x)
        y = spec_or_alpha.check_point(y)
        alpha = spec_or_alpha.exponents.alpha_f
    else:
        alpha = spec_or_alpha.alpha_f if isinstance(spec_or_alpha, ExponentSet) else np.asarray(spec_or_alpha, float)
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        if x.shape[-1] != alpha.size or y.shape[-1] != alpha.size:
            raise DimensionError(f"points must have dimension {alpha.size}")
    out = np.sum(np.abs(x - y) ** alpha, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def _fbm_cov(hurst: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    h2 = 2.0 * hurst
    ax = np.abs(x) ** h2
    ay = np.abs(y) ** h2
    return np.prod(0.5 * (ax + ay - np.abs(x - y) ** h2), axis=-1)


def _spectral(spec: FieldSpec, t: float, s: float, z: float) -> float:
    if min(t, s) <= 0.0:
        return 0.0
    # 13 significant digits keep grid-repeated separations on one cache key.
    z = float(f"{z:.13g}")
    return spectral_covariance(spec.family.value, spec.k, spec.beta, t, s, z, spec.quad_tol)[0]


def covariance(spec: FieldSpec, j: int, x, l: int, y) -> float:
    """Covariance of component ``j`` at ``x`` with component ``l`` at ``y``."""
    x = spec.check_point(x)
    y = spec.check_point(y)
    for c in (j, l):
        if not 0 <= c < spec.d:
            raise DimensionError(f"component index {c} outside [0, {spec.d})")
    if j != l:
        return 0.0
    return scalar_covariance(spec, x, y)


def scalar_covariance(spec: FieldSpec, x, y) -> float:
    """Covariance of one component at two points."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if spec.family is Family.FBM_SHEET:
        return float(_fbm_cov(np.asarray(spec.hurst), x, y))
    return _spectral(spec, float(x[0]), float(y[0]), float(np.linalg.norm(x[1:] - y[1:])))


def covariance_matrix(spec: FieldSpec, points, other=None) -> np.ndarray:
    """Single-component covariance between two point sets, shape ``(n, m)``.

    With ``other=None`` the symmetric matrix is built from its upper
    triangle, so the result equals its transpose exactly.
    """
    a = spec.check_point(np.atleast_2d(points))
    sym = other is None
    b = a if sym else spec.check_point(np.atleast_2d(other))
    if spec.family is Family.FBM_SHEET:
        h = np.asarray(spec.hurst)
        c = _fbm_cov(h, a[:, None, :], b[None, :, :])
        if sym:
            c = np.triu(c) + np.triu(c, 1).T
        return c
    n, m = len(a), len(b)
    c = np.empty((n, m))
    ta, tb = a[:, 0], b[:, 0]
    for i in range(n):
        z = np.linalg.norm(a[i, 1:] - b[:, 1:], axis=1)
        start = i if sym else 0
        for jj in range(start, m):
            c[i, jj] = _spectral(spec, ta[i], tb[jj], z[jj])
    if sym:
        c = np.triu(c) + np.triu(c, 1).T
    return c


def canonical_distance(spec: FieldSpec, x, y, clamp_tol: float = CLAMP_TOL) -> float:
    """``L^2`` distance ``||v_1(x) - v_1(y)||`` of one component."""
    x = spec.check_point(x)
    y = spec.check_point(y)
    if np.array_equal(x, y):
        return 0.0
    var = scalar_covariance(spec, x, x) + scalar_covariance(spec, y, y) - 2.0 * scalar_covariance(spec, x, y)
    if var < 0.0:
        if var < -clamp_tol:
            raise NumericalError(f"negative increment variance {var:.3e} beyond clamp tolerance")
        return 0.0
    return math.sqrt(var)
