import math

import numpy as np
import pytest
from scipy import integrate, special

from gfl.errors import QuadratureError
from gfl.quadrature import heat_time_kernel, power_trig_tail, spectral_covariance, wave_time_kernel


@pytest.mark.parametrize("omega,start", [(1.0, 2.0), (0.3, 1.0), (5.0, 0.7), (1e-3, 2.0), (2.0, 40.0)])
def test_power_tail_against_sine_cosine_integrals(omega, start):
    x = omega * start
    si, ci = special.sici(x)
    cos2 = math.cos(x) / start - omega * (math.pi / 2 - si)
    sin1 = math.pi / 2 - si
    assert power_trig_tail(-2.0, "cos", omega, start)[0] == pytest.approx(cos2, rel=1e-9, abs=1e-13)
    assert power_trig_tail(-1.0, "sin", omega, start)[0] == pytest.approx(sin1, rel=1e-9, abs=1e-13)
    # int_a^inf cos(w r) / r dr = -Ci(w a)
    assert power_trig_tail(-1.0, "cos", omega, start)[0] == pytest.approx(-ci, rel=1e-9, abs=1e-13)


def test_power_tail_zero_frequency():
    assert power_trig_tail(-3.0, "cos", 0.0, 2.0)[0] == pytest.approx(1 / 8)
    assert power_trig_tail(-3.0, "sin", 0.0, 2.0)[0] == 0.0


@pytest.mark.parametrize("t,s,r", [(1.0, 1.0, 0.3), (1.7, 1.2, 2.0), (1.5, 1.1, 0.01), (2.0, 1.0, 7.0)])
def test_time_kernels_match_direct_integrals(t, s, r):
    m = min(t, s)
    heat = integrate.quad(lambda u: math.exp(-(t - u) * r * r - (s - u) * r * r), 0, m, epsabs=1e-15)[0]
    wave = integrate.quad(lambda u: math.sin((t - u) * r) * math.sin((s - u) * r) / (r * r), 0, m, epsabs=1e-15)[0]
    assert heat_time_kernel(t, s, r) == pytest.approx(heat, rel=1e-10)
    assert wave_time_kernel(t, s, r) == pytest.approx(wave, rel=1e-8, abs=1e-14)


def _heat_white(t, s, z):
    g = lambda v: math.exp(-z * z / (4 * v)) / math.sqrt(4 * math.pi * v)  # noqa: E731
    lo = abs(t - s)
    if lo == 0 and z == 0:
        return math.sqrt((t + s) / math.pi) / 2
    return 0.5 * integrate.quad(g, lo, t + s, epsabs=1e-14, epsrel=1e-12)[0]


def _wave_white(t, s, z):
    def overlap(u):
        a, b = t - u, s - u
        return max(0.0, min(a, z + b) - max(-a, z - b))

    m = min(t, s)
    kinks = sorted({0.0, m, *[v for v in (0.5 * (t + s - z), 0.5 * (t - s + z), 0.5 * (s - t + z)) if 0 < v < m]})
    return 0.25 * sum(integrate.quad(overlap, a, b, epsabs=1e-15)[0] for a, b in zip(kinks[:-1], kinks[1:]))


@pytest.mark.parametrize("t,s,z", [(1.0, 1.0, 0.0), (1.5, 1.2, 0.3), (2.0, 1.0, 0.9), (1.3, 1.3, 0.05), (1.9, 1.0, 0.0)])
def test_heat_white_noise_oracle(t, s, z):
    val, err = spectral_covariance("heat", 1, 1.0, t, s, z, 1e-8)
    assert val == pytest.approx(_heat_white(t, s, z), rel=1e-7)
    assert err <= 1e-8 * abs(val)


@pytest.mark.parametrize("t,s,z", [(1.0, 1.0, 0.0), (1.5, 1.2, 0.3), (2.0, 1.0, 0.9), (1.3, 1.3, 0.05), (1.9, 1.0, 2.5)])
def test_wave_white_noise_oracle(t, s, z):
    val, _ = spectral_covariance("wave", 1, 1.0, t, s, z, 1e-8)
    assert val == pytest.approx(_wave_white(t, s, z), rel=1e-7, abs=1e-10)


def test_unknown_family():
    with pytest.raises(ValueError):
        spectral_covariance("plate", 1, 1.0, 1.0, 1.0, 0.0, 1e-8)


def test_impossible_tolerance_reports_achieved_error():
    with pytest.raises(QuadratureError) as info:
        spectral_covariance("heat", 2, 1.3, 1.4, 1.1, 0.37, 1e-16)
    assert info.value.achieved > 0
