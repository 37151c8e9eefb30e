import math

import numpy as np
import pytest

from gfl import FieldSpec
from gfl.bands import (
    Band,
    band_bound_report,
    band_covariance,
    binomial_ci,
    default_band_plan,
    residual_increment_norm,
    residual_tail_probe,
    rhs_scale,
    tail_growth_exponent,
)
from gfl.engine import factorize
from gfl.errors import InsufficientDataError, SpecError, UnsupportedFamilyError
from gfl.kernels import scalar_covariance

SHEET = FieldSpec("fbm_sheet", 2, hurst=(0.5, 0.5))
BM = FieldSpec("fbm_sheet", 1, hurst=(0.5,))
X, Y = np.array([1.0, 1.0]), np.array([1.0, 1.1])


def test_band_validation():
    with pytest.raises(SpecError):
        Band(2.0, 1.0)
    with pytest.raises(SpecError):
        Band(-1.0)
    assert Band(0).full and not Band(0, 5).full


def test_degenerate_and_full_bands():
    assert band_covariance(SHEET, Band(3.0, 3.0), X, Y) == 0.0
    total = scalar_covariance(SHEET, X, Y)
    assert band_covariance(SHEET, Band(0), X, Y) == pytest.approx(total, rel=SHEET.quad_tol)
    assert residual_increment_norm(SHEET, Band(0), X, Y) == 0.0
    assert residual_increment_norm(SHEET, Band(1, 10), X, X) == 0.0


def test_other_families_unsupported():
    heat = FieldSpec("heat", 1, beta=1.0)
    with pytest.raises(UnsupportedFamilyError):
        band_covariance(heat, Band(0, 1), [1.0, 0.5], [1.0, 0.5])
    with pytest.raises(UnsupportedFamilyError):
        residual_increment_norm(heat, Band(0), [1.0, 0.5], [1.2, 0.5])


def test_worked_band_example_bounded():
    band = Band(1.0, 10.0)
    lhs = residual_increment_norm(SHEET, band, X, Y)
    rhs = rhs_scale(SHEET, band, X, Y)
    assert rhs == pytest.approx(0.1 + 0.1)
    c0 = band_bound_report(SHEET, pairs_per_band=10, seed=0).fitted_c0
    assert math.isfinite(c0)
    assert lhs <= c0 * rhs


@pytest.mark.parametrize("hurst", [(0.5, 0.5), (0.3, 0.8)])
def test_residual_monotone_in_band_width(hurst):
    spec = FieldSpec("fbm_sheet", 2, hurst=hurst)
    x, y = np.array([1.2, 1.4]), np.array([1.25, 1.33])
    seq = [Band(8, 16), Band(4, 16), Band(4, 64), Band(1, 64), Band(1, 1024), Band(0.5)]
    vals = [residual_increment_norm(spec, b, x, y) for b in seq]
    for a, b in zip(vals[:-1], vals[1:]):
        assert b <= a + 10 * spec.quad_tol


def test_joint_covariance_psd():
    pts = np.array([[1.0 + i / 4, 1.0 + j / 4] for i in range(5) for j in range(5)])
    band = Band(2, 32)
    n = len(pts)
    total = np.empty((n, n))
    bandc = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            total[i, j] = total[j, i] = scalar_covariance(SHEET, pts[i], pts[j])
            bandc[i, j] = bandc[j, i] = band_covariance(SHEET, band, pts[i], pts[j])
    joint = np.block([[total, bandc], [bandc, bandc]])
    ev = np.linalg.eigvalsh(joint)
    assert ev[0] >= -1e-8 * ev[-1]
    assert factorize(joint).factor.shape == (2 * n, 2 * n)


def test_default_plan_shape():
    plan = default_band_plan()
    assert len(plan) == 70
    assert plan[0] == Band(1.0, 2.0)
    assert all(b.b > b.a for b in plan)


def test_report_csv(tmp_path):
    rep = band_bound_report(SHEET, bands=[Band(1, 8), Band(2)], pairs_per_band=3, seed=2)
    assert len(rep.rows) == 6
    assert rep.fitted_c0 == max(r.ratio for r in rep.rows)
    path = tmp_path / "b.csv"
    rep.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "a,b,x,y,lhs,rhs_scale,ratio"
    assert len(lines) == 7
    assert rep.as_dicts()[0]["a"] == 1


def test_binomial_ci_edges():
    assert binomial_ci(0, 100)[0] == 0.0
    assert binomial_ci(100, 100)[1] == 1.0
    lo, hi = binomial_ci(30, 100)
    assert lo < 0.3 < hi


def test_tail_probe_full_band_is_zero():
    probes = residual_tail_probe(BM, Band(0), [1.5], 1.0, 0.05, [0.01, 0.1], reps=1000, seed=0)
    assert [p.p_hat for p in probes] == [0.0, 0.0]
    assert all(p.ci_hi < 0.01 for p in probes)


def test_tail_probe_needs_replicates():
    with pytest.raises(SpecError):
        residual_tail_probe(BM, Band(1, 10), [1.5], 1.0, 0.05, 0.01, reps=999, seed=0)


def test_tail_probe_monotone_in_u():
    probes = residual_tail_probe(BM, Band(2, 200), [1.5], 1.0, 0.05, np.linspace(0.005, 0.03, 6), reps=2000, seed=1)
    p = [q.p_hat for q in probes]
    assert p == sorted(p, reverse=True)


def test_tail_growth_needs_points():
    probes = residual_tail_probe(BM, Band(2, 200), [1.5], 1.0, 0.05, [1e3, 2e3, 3e3], reps=1000, seed=1)
    with pytest.raises(InsufficientDataError):
        tail_growth_exponent(probes)


@pytest.mark.slow
def test_tail_at_least_gaussian():
    r, U = 0.05, 10.0
    band = Band(1 / (r * U), U / r)
    probes = residual_tail_probe(BM, band, [1.5], 1.0, r, np.linspace(0.006, 0.022, 17), reps=100_000, seed=3)
    assert tail_growth_exponent(probes) >= 2 - 0.3
