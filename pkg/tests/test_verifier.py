import json
import math

import numpy as np
import pytest

from gfl import FieldSpec
from gfl.errors import InsufficientDataError, SpecError
from gfl.verifier import (
    anchor_point,
    anticoncentration_oracle,
    check_a2,
    check_anticoncentration,
    check_increment_bound,
    check_nondegeneracy,
    default_suite,
    difference_map,
    write_jsonl,
)

SHEET = FieldSpec("fbm_sheet", 2, hurst=(0.5, 0.5))
BM = FieldSpec("fbm_sheet", 1, hurst=(0.5,), domain=[(1.0, 2.0)])


def test_identical_points_give_zero_ratio():
    from gfl.verifier import _a2_ratios

    y = np.array([[1.3, 1.4]])
    assert _a2_ratios(SHEET, np.array([1.2, 1.2]), y, y.copy())[0] == 0.0


def test_a2_smooth_sheet():
    spec = FieldSpec("fbm_sheet", 2, hurst=(0.75, 0.75))
    for case in ("i", "ii"):
        rep = check_a2(spec, case=case, pairs=300)
        assert rep.passed and rep.stability < 2
        assert rep.details["sups"][1] >= rep.details["sups"][0]


def test_a2_heat_with_explicit_delta():
    spec = FieldSpec("heat", 1, beta=1.0, delta_space=0.7)
    rep = check_a2(spec, case="i", pairs=100)
    assert rep.passed, rep


def test_a2_argument_errors():
    with pytest.raises(SpecError):
        check_a2(SHEET, rho=0.0)
    with pytest.raises(SpecError):
        check_a2(SHEET, case="iii")


def test_wave_anchor_shift():
    wave = FieldSpec("wave", 1, beta=1.0)
    x = np.array([1.9, 0.5])
    xp = anchor_point(wave, x, 0.05)
    assert xp[0] == pytest.approx(1.9 - 0.2 ** 2)
    assert xp[1] == 0.5
    with pytest.raises(SpecError):
        anchor_point(wave, [1.1, 0.5], 0.1)
    assert np.array_equal(anchor_point(SHEET, [1.1, 1.2], 0.1), [1.1, 1.2])


def test_nondegeneracy_basics():
    assert check_nondegeneracy(SHEET, [[1.5, 1.5]]).lambda_min == pytest.approx(1.5**2)
    dup = check_nondegeneracy(SHEET, [[1.2, 1.3], [1.2, 1.3], [1.8, 1.1]])
    assert dup.violated
    ok = check_nondegeneracy(SHEET, [[1.2, 1.3], [1.7, 1.1], [1.5, 1.9]])
    assert ok.lambda_min > 1e-6 and not ok.violated
    assert json.loads(ok.to_json())["check"] == "nondegeneracy"


def test_nondegeneracy_permutation_and_scaling():
    spec = FieldSpec("fbm_sheet", 2, hurst=(0.3, 0.7), domain=[(1.0, 3.0), (1.0, 3.0)])
    pts = np.array([[1.1, 1.2], [1.6, 1.3], [1.4, 1.9], [1.9, 1.7]])
    base = check_nondegeneracy(spec, pts).lambda_min
    perm = check_nondegeneracy(spec, pts[[2, 0, 3, 1]]).lambda_min
    assert perm == pytest.approx(base, rel=1e-10)
    lam = 1.4
    scaled = check_nondegeneracy(spec, lam * pts).lambda_min
    assert scaled == pytest.approx(lam ** (2 * (0.3 + 0.7)) * base, rel=1e-9)


def test_increment_bound_sheet():
    rep = check_increment_bound(SHEET, pairs=200)
    assert rep.passed and 0 < rep.sup_ratio < 10


def test_anticoncentration_saturation_and_oracle():
    anchors = [[1.2], [1.5], [1.8]]
    points = [[1.22], [1.48]]
    amat, caa = difference_map(BM, anchors, points)
    assert amat.shape == (1, 3)
    sigma = amat @ caa @ amat.T
    sd = math.sqrt(sigma[0, 0])
    r = np.array([0.2 * sd, 0.5 * sd, 20 * sd])
    rep = check_anticoncentration(BM, anchors, points, r_sweep=r, reps=20_000, seed=1, d=1)
    assert not rep.fit_mask[-1]
    assert rep.p_hat[-1] == 1.0
    se = np.sqrt(rep.oracle * (1 - rep.oracle) / rep.reps)
    assert np.all(np.abs(rep.p_hat[:2] - rep.oracle[:2]) <= 5 * se[:2] + 1e-12)
    direct = anticoncentration_oracle(sigma, np.zeros(1), r[:1], 1)[0]
    assert direct == pytest.approx(math.erf(0.2 / math.sqrt(2)), rel=1e-9)


def test_anticoncentration_errors():
    anchors = [[1.2], [1.5]]
    with pytest.raises(SpecError):
        check_anticoncentration(BM, anchors, [[1.22]], reps=1000)
    with pytest.raises(SpecError):
        check_anticoncentration(BM, anchors, [[1.22], [1.48]], shifts=[0.0, 1.0], reps=1000)
    with pytest.raises(InsufficientDataError):
        check_anticoncentration(BM, anchors, [[1.22], [1.48]], r_sweep=[1e-9, 2e-9], reps=1000, d=1)


def test_default_suite_and_jsonl(tmp_path):
    reps = default_suite(SHEET, pairs=100)
    assert len(reps) == 4
    path = tmp_path / "v.jsonl"
    write_jsonl(reps, path)
    rows = [json.loads(line) for line in path.read_text().splitlines()]
    assert [r["check"] for r in rows] == ["a2", "a2", "increment", "nondegeneracy"]
    assert all(r.get("passed", not r.get("violated")) for r in rows)
