"""Radial spectral quadrature for the heat and wave covariance kernels.

Both fields are stochastic integrals against complex space-time white noise
with spectral weight ``|xi|^(beta-k)``.  Writing the space-time kernel as the
Fourier transform in time of the spatial Fourier transform of the Green
function, Plancherel turns the ``tau`` integral into a time convolution that
has a closed form, the *time kernel* ``K(t, s, r)`` with ``r = |xi|``:

* heat:  ``K = (exp(-|t-s| r^2) - exp(-(t+s) r^2)) / (2 r^2)``
* wave:  ``K = (m cos(w r) - cos(M r) sin(m r) / r) / (2 r^2)``
  with ``m = min(t, s)``, ``M = max(t, s)``, ``w = t - s``.

What remains is a one-dimensional radial integral

    C = (2 pi)^(-k/2) z^(1-k/2) int_0^inf r^(beta-1) K(r) r^(-nu) J_nu(z r) dr

with ``z = |x - y|`` and ``nu = k/2 - 1`` (for ``z = 0`` the Bessel factor
collapses to the sphere area).  The normalisation ``(2 pi)^-(1+k)`` of the
white-noise intensity is chosen so that ``k = 1 = beta`` reproduces the
physical white-noise solutions exactly.

The radial integral is split into a head ``[0, R0]`` (adaptive quadrature
with the algebraic weight ``r^(beta-1)``), an optional middle section for
even ``k`` and small ``z`` (QAWO with the exact Bessel function), and a tail
where the integrand is expanded into amplitude x trigonometric terms.  The
Bessel factor enters the tail through its Hankel expansion (exact for odd
``k``).  Gaussian-damped amplitudes are integrated over a finite window
that ends once the damping drops below 1e-20; pure power amplitudes are
integrated semi-analytically.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special

from .errors import QuadratureError

HEAD_CUT = 2.0
# Frequencies below this are treated as exactly zero.
OMEGA_FLOOR = 1e-12
# Time kernel switches to the Gauss-Legendre form when M * r is below this.
_WAVE_SMALL = 0.5

_GL_X, _GL_W = np.polynomial.legendre.leggauss(48)
_ACC = {"epsabs": 1e-14, "epsrel": 1e-11}


def heat_time_kernel(t: float, s: float, r: float) -> float:
    m = min(t, s)
    w = abs(t - s)
    r2 = r * r
    if r2 == 0.0:
        return m
    return math.exp(-w * r2) * (-math.expm1(-2.0 * m * r2)) / (2.0 * r2)


def wave_time_kernel(t: float, s: float, r: float) -> float:
    m = min(t, s)
    big = max(t, s)
    if r * big < _WAVE_SMALL:
        # int_0^m sin((t-u) r) sin((s-u) r) / r^2 du, cancellation-free.
        u = 0.5 * m * (_GL_X + 1.0)
        a = t - u
        b = s - u
        vals = a * b * np.sinc(a * r / math.pi) * np.sinc(b * r / math.pi)
        return float(0.5 * m * np.dot(_GL_W, vals))
    w = t - s
    return 0.5 * (m * math.cos(w * r) - math.cos(big * r) * math.sin(m * r) / r) / (r * r)


@dataclass(frozen=True)
class TrigTerm:
    """``coef * r^power * exp(-gauss r^2) * fn(r) * trig(omega r)``.

    ``fn=None`` and ``gauss=0`` together mark a pure power amplitude.
    """

    coef: float
    power: float
    kind: str
    omega: float
    fn: Optional[Callable[[float], float]] = None
    gauss: float = 0.0

    def amplitude(self, r: float) -> float:
        val = self.coef * r**self.power
        if self.gauss:
            val *= math.exp(-self.gauss * r * r)
        if self.fn is not None:
            val *= self.fn(r)
        return val


def _mul(a: TrigTerm, b: TrigTerm) -> list[TrigTerm]:
    fa, fb = a.fn, b.fn
    if fa is None:
        fn = fb
    elif fb is None:
        fn = fa
    else:
        fn = lambda r, fa=fa, fb=fb: fa(r) * fb(r)  # noqa: E731
    power = a.power + b.power
    gauss = a.gauss + b.gauss
    # A zero-frequency cosine is the constant 1.
    if a.kind == "cos" and a.omega == 0.0:
        return [TrigTerm(a.coef * b.coef, power, b.kind, b.omega, fn, gauss)]
    if b.kind == "cos" and b.omega == 0.0:
        return [TrigTerm(a.coef * b.coef, power, a.kind, a.omega, fn, gauss)]
    coef = 0.5 * a.coef * b.coef
    lo = a.omega - b.omega
    hi = a.omega + b.omega
    kinds = (a.kind, b.kind)
    # (sign, kind, omega) pairs of the product-to-sum identity.
    if kinds == ("cos", "cos"):
        parts = [(1.0, "cos", lo), (1.0, "cos", hi)]
    elif kinds == ("sin", "sin"):
        parts = [(1.0, "cos", lo), (-1.0, "cos", hi)]
    elif kinds == ("sin", "cos"):
        parts = [(1.0, "sin", hi), (1.0, "sin", lo)]
    else:
        parts = [(1.0, "sin", hi), (-1.0, "sin", lo)]
    out = []
    for sign, kind, om in parts:
        if om < 0:
            om = -om
            if kind == "sin":
                sign = -sign
        if kind == "sin" and om < OMEGA_FLOOR:
            continue
        if om < OMEGA_FLOOR:
            om = 0.0
        out.append(TrigTerm(sign * coef, power, kind, om, fn, gauss))
    return out


def _asymptotic_tail(p: float, kind: str, x: float) -> float:
    """``int_x^inf u^p trig(u) du`` by repeated integration by parts.

    ``I(p) = i e^{ix} x^p sum_k i^k p (p-1) ... (p-k+1) x^-k``; only used
    for ``x`` well beyond ``|p|`` where the terms fall off geometrically.
    """
    term = complex(0.0, 1.0) * x**p
    acc = term
    for k in range(1, 80):
        term = term * 1j * (p - k + 1) / x
        acc += term
        if abs(term) < 1e-18 * abs(acc):
            break
    val = acc * complex(math.cos(x), math.sin(x))
    return val.real if kind == "cos" else val.imag


@lru_cache(maxsize=100_000)
def _osc_tail(p: float, kind: str, x0: float) -> tuple[float, float]:
    """``int_x0^inf u^p trig(u) du`` for ``x0 > 0`` and ``p < 0``."""
    far = max(x0, 40.0 + 4.0 * abs(p))
    val, err = 0.0, 0.0
    if far > x0:
        val, err = integrate.quad(lambda u: u**p, x0, far, weight=kind, wvar=1.0, limit=1000, **_ACC)
    return val + _asymptotic_tail(p, kind, far), err


def power_trig_tail(p: float, kind: str, omega: float, start: float) -> tuple[float, float]:
    """``int_start^inf r^p trig(omega r) dr`` for ``p < -1`` (or ``p < 0`` if ``omega > 0``)."""
    if omega < OMEGA_FLOOR:
        if kind == "sin":
            return 0.0, 0.0
        return start ** (p + 1) / (-p - 1), 0.0
    x0 = omega * start
    scale = omega ** (-p - 1)
    if x0 >= 1.0:
        val, err = _osc_tail(p, kind, x0)
        return scale * val, scale * err
    # Substitute x = omega r and integrate the near-zero piece against a
    # subtracted Taylor term so that small x0 loses no precision.
    unit, unit_err = _osc_tail(p, kind, 1.0)
    if kind == "cos":
        q = p + 1
        analytic = (1.0 - x0**q) / q if q != 0 else -math.log(x0)
        rest, err = integrate.quad(lambda x: x**p * (math.cos(x) - 1.0), x0, 1.0, limit=200, **_ACC)
    else:
        q = p + 2
        analytic = (1.0 - x0**q) / q if q != 0 else -math.log(x0)
        rest, err = integrate.quad(lambda x: x**p * (math.sin(x) - x), x0, 1.0, limit=200, **_ACC)
    return scale * (analytic + rest + unit), scale * (err + unit_err)


# exp(-46) ~ 1e-20 relative to the amplitude at the window start.
_GAUSS_CUT = 46.0


def _term_integral(term: TrigTerm, start: float, stop: float = np.inf) -> tuple[float, float]:
    if term.kind == "sin" and term.omega == 0.0:
        return 0.0, 0.0
    if term.gauss > 0.0:
        stop = min(stop, math.sqrt(start * start + _GAUSS_CUT / term.gauss))
    elif stop == np.inf:
        if term.fn is not None:
            raise ValueError("infinite tails need pure power or Gaussian amplitudes")
        val, err = power_trig_tail(term.power, term.kind, term.omega, start)
        return term.coef * val, abs(term.coef) * err
    if stop <= start:
        return 0.0, 0.0
    f = term.amplitude
    # Long windows span decades of amplitude scale: cut them geometrically.
    edges = [start]
    while stop > 8.0 * edges[-1]:
        edges.append(4.0 * edges[-1])
    edges.append(stop)
    val, err = 0.0, 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if term.omega == 0.0:
            v, e = integrate.quad(f, a, b, limit=1000, **_ACC)
        else:
            v, e = integrate.quad(f, a, b, weight=term.kind, wvar=term.omega, limit=1000, **_ACC)
        val += v
        err += e
    return val, err


def _time_terms(family: str, t: float, s: float) -> list[TrigTerm]:
    """Time kernel written as amplitude x trig terms (valid for r > 0)."""
    m = min(t, s)
    big = max(t, s)
    w = big - m
    if family == "heat":
        return [
            TrigTerm(0.5, -2.0, "cos", 0.0, gauss=w),
            TrigTerm(-0.5, -2.0, "cos", 0.0, gauss=t + s),
        ]
    # 0.5 m cos(w r) / r^2 - (sin((t+s) r) - sin(|w| r)) / (4 r^3)
    terms = [TrigTerm(0.5 * m, -2.0, "cos", w), TrigTerm(-0.25, -3.0, "sin", t + s)]
    if w > 0.0:
        terms.append(TrigTerm(0.25, -3.0, "sin", w))
    return terms


def _sphere_factor(k: int) -> float:
    """(2 pi)^-k times the area of the unit sphere in R^k."""
    return 2.0 * math.pi ** (k / 2) / math.gamma(k / 2) / (2.0 * math.pi) ** k


def _spatial_exact(k: int, z: float) -> Callable[[float], float]:
    """r -> (2 pi)^(-k/2) z^(1-k/2) r^(-nu) J_nu(z r), with the z=0 limit."""
    if z == 0.0:
        c0 = _sphere_factor(k)
        return lambda r: c0
    if k == 1:
        return lambda r: math.cos(z * r) / math.pi
    nu = k / 2 - 1
    c = (2.0 * math.pi) ** (-k / 2) * z ** (1 - k / 2)
    small = c * (z / 2.0) ** nu / math.gamma(nu + 1)

    def f(r: float) -> float:
        if r == 0.0:
            return small
        return c * r ** (-nu) * special.jv(nu, z * r)

    return f


# Hankel asymptotics are used for z r beyond this.
HANKEL_START = 40.0


def _hankel_coefficients(nu: float, x0: float) -> list[complex]:
    """c_n with hankel1e(nu, x) = sum_n c_n x^(-n-1/2), truncated for x >= x0."""
    mu = 4.0 * nu * nu
    phase = np.exp(-1j * (nu * math.pi / 2 + math.pi / 4))
    out = []
    a = 1.0
    n = 0
    while True:
        out.append(math.sqrt(2.0 / math.pi) * a * (1j**n) * phase)
        a = a * (mu - (2 * n + 1) ** 2) / ((n + 1) * 8.0)
        n += 1
        if a == 0.0 or abs(a) / x0**n < 1e-18 or n > 40:
            return out


def _spatial_terms(k: int, z: float) -> list[TrigTerm]:
    """Spatial factor as trig terms with pure power amplitudes, for z r >= HANKEL_START."""
    if z == 0.0:
        return [TrigTerm(_sphere_factor(k), 0.0, "cos", 0.0)]
    if k == 1:
        return [TrigTerm(1.0 / math.pi, 0.0, "cos", z)]
    nu = k / 2 - 1
    c = (2.0 * math.pi) ** (-k / 2) * z ** (1 - k / 2)
    terms = []
    # J_nu(x) = Re(h) cos x - Im(h) sin x with h = hankel1e(nu, x).
    for n, cn in enumerate(_hankel_coefficients(nu, HANKEL_START)):
        scale = c * z ** (-n - 0.5)
        power = -nu - n - 0.5
        if cn.real != 0.0:
            terms.append(TrigTerm(scale * cn.real, power, "cos", z))
        if cn.imag != 0.0:
            terms.append(TrigTerm(-scale * cn.imag, power, "sin", z))
    return terms


@lru_cache(maxsize=200_000)
def spectral_covariance(
    family: str, k: int, beta: float, t: float, s: float, z: float, tol: float
) -> tuple[float, float]:
    """Covariance of one component at ``(t, x)`` and ``(s, y)`` with ``z = |x - y|``.

    Returns ``(value, error_estimate)``; raises :class:`QuadratureError` when
    the estimate exceeds ``tol`` relative to the value (with an absolute floor
    of ``tol * 1e-4``).
    """
    if family not in ("heat", "wave"):
        raise ValueError(f"no spectral kernel for family {family!r}")
    if t < s:
        t, s = s, t
    kern = heat_time_kernel if family == "heat" else wave_time_kernel
    spatial = _spatial_exact(k, z)
    head_f = lambda r: kern(t, s, r) * spatial(r)  # noqa: E731

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if beta == 1.0:
            head, err = integrate.quad(head_f, 0.0, HEAD_CUT, limit=500, **_ACC)
        else:
            head, err = integrate.quad(
                head_f, 0.0, HEAD_CUT, weight="alg", wvar=(beta - 1.0, 0.0), limit=500, **_ACC
            )
        total, total_err = head, err

        base = [
            TrigTerm(term.coef, term.power + beta - 1.0, term.kind, term.omega, term.fn, term.gauss)
            for term in _time_terms(family, t, s)
        ]
        tail_start = HEAD_CUT
        if k >= 2 and z > 0.0 and (k % 2 == 0):
            tail_start = max(HEAD_CUT, HANKEL_START / z)
        if tail_start > HEAD_CUT:
            # Middle section with the exact Bessel factor, trig weights from K.
            for term in base:
                mid = TrigTerm(term.coef, term.power, term.kind, term.omega, spatial, term.gauss)
                val, e = _term_integral(mid, HEAD_CUT, tail_start)
                total += val
                total_err += e
        for term in base:
            for sp in _spatial_terms(k, z):
                for prod in _mul(term, sp):
                    val, e = _term_integral(prod, tail_start)
                    total += val
                    total_err += e

    if not math.isfinite(total) or total_err > max(tol * abs(total), tol * 1e-4):
        raise QuadratureError(
            f"{family} covariance quadrature at t={t}, s={s}, z={z}", total_err
        )
    return float(total), float(total_err)
