import math

import numpy as np
import pytest

from gfl import FieldSpec
from gfl.engine import (
    MAX_POINTS,
    FieldSample,
    Grid,
    assemble_covariance,
    condition,
    extend_grid,
    factorize,
    projection_weights,
    sample,
    substream,
)
from gfl.errors import DegenerateGridError, DiscretizationError, NondegeneracyError, SpecError
from gfl.verifier import anchor_point, check_v2_increment

SHEET = FieldSpec("fbm_sheet", 2, hurst=(0.5, 0.5))


def test_single_point_matrix():
    cov = assemble_covariance(SHEET, Grid(np.array([[1.0, 1.0]])))
    assert cov.matrix.tolist() == [[1.0]]
    assert cov.jitter == 0.0


def test_grid_validation():
    with pytest.raises(SpecError):
        Grid.tensor([[1.0, 1.0, 1.5]])
    with pytest.raises(SpecError):
        assemble_covariance(SHEET, Grid.tensor([[0.5, 1.5], [1.0, 2.0]]))
    g = Grid.uniform(SHEET, [3, 4])
    assert g.n == 12 and g.dim == 2
    assert g.fingerprint() == Grid.uniform(SHEET, [3, 4]).fingerprint()


def test_extend_grid_reuses_duplicates():
    g = Grid.uniform(SHEET, 2)
    ext, idx = extend_grid(g, [[1.0, 1.0], [1.5, 1.5], [1.5, 1.5]])
    assert ext.n == 5
    assert idx.tolist() == [0, 4, 4]


def test_fine_grid_needs_little_jitter():
    grid = Grid.uniform(SHEET, 20)
    cov = assemble_covariance(SHEET, grid)
    assert np.array_equal(cov.matrix, cov.matrix.T)
    assert cov.jitter_rel <= 1e-10
    lam = np.linalg.eigvalsh(cov.matrix + cov.jitter * np.eye(grid.n))[0]
    assert lam > 0
    recon = cov.factor @ cov.factor.T
    assert np.max(np.abs(recon - cov.matrix - cov.jitter * np.eye(grid.n))) <= 1e-9 * np.max(np.abs(cov.matrix))


def test_jitter_escalates_on_duplicates():
    grid = Grid(np.array([[1.2, 1.3], [1.2, 1.3], [1.7, 1.1]]))
    cov = assemble_covariance(SHEET, grid)
    assert 0 < cov.jitter_rel <= 1e-8


def test_indefinite_matrix_rejected():
    with pytest.raises(DegenerateGridError):
        factorize(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(SpecError):
        factorize(np.array([[1.0, 0.5], [0.4, 1.0]]))


def test_point_cap():
    with pytest.raises(DiscretizationError):
        factorize(np.eye(MAX_POINTS + 1))


def test_sampling_deterministic_and_prefix_stable():
    cov = assemble_covariance(SHEET, Grid.uniform(SHEET, 4))
    a = sample(cov, 2, 50, seed=3)
    b = sample(cov, 2, 50, seed=3, threads=3, chunk=7)
    assert a.values.tobytes() == b.values.tobytes()
    c = sample(cov, 2, 20, seed=3)
    assert np.array_equal(a.values[:20], c.values)
    tail = sample(cov, 2, 30, seed=3, start=20)
    assert np.array_equal(a.values[20:], tail.values)
    assert not np.array_equal(a.values, sample(cov, 2, 50, seed=4).values)
    # Components come from distinct substreams.
    assert not np.array_equal(a.values[:, 0], a.values[:, 1])


def test_substreams_independent_of_order():
    x = substream(9, 5, 1).standard_normal(4)
    substream(9, 4, 1).standard_normal(100)
    assert np.array_equal(x, substream(9, 5, 1).standard_normal(4))


def test_container_round_trip(tmp_path):
    spec = FieldSpec("heat", 1, beta=1.0)
    grid = Grid.uniform(spec, 3)
    cov = assemble_covariance(spec, grid)
    fs = sample(cov, 2, 5, seed=1)
    path = tmp_path / "s.bin"
    fs.save(path)
    raw = path.read_bytes()
    assert raw[:4] == b"GFLS" and b"gfl-sample-v1" in raw
    back = FieldSample.load(path)
    assert back.values.tobytes() == fs.values.tobytes()
    assert (back.seed, back.spec_fp, back.grid_fp) == (1, spec.fingerprint(), grid.fingerprint())
    fs.to_csv(tmp_path / "s.csv", grid)
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "replicate,component,point,x0,x1,value"
    assert len(lines) == 1 + 5 * 2 * 9
    (tmp_path / "bad.bin").write_bytes(b"XXXX")
    with pytest.raises(SpecError):
        FieldSample.load(tmp_path / "bad.bin")


def test_characteristic_function_law():
    spec = FieldSpec("fbm_sheet", 1, hurst=(0.3,))
    grid = Grid.uniform(spec, 5)
    cov = assemble_covariance(spec, grid)
    R = 50_000
    v = sample(cov, 1, R, seed=8).values[:, 0]
    rng = np.random.default_rng(0)
    for _ in range(10):
        u = rng.normal(size=5)
        emp = np.mean(np.exp(1j * v @ u))
        exact = math.exp(-0.5 * u @ cov.matrix @ u)
        assert abs(emp - exact) <= 5 / math.sqrt(R)


def test_conditioning_exact_anchor_reproduction():
    spec = FieldSpec("heat", 1, beta=1.0)
    grid = Grid.uniform(spec, 3)
    ext, idx = extend_grid(grid, [[1.25, 0.25], [1.75, 0.8]])
    cov = assemble_covariance(spec, ext)
    fs = sample(cov, 2, 200, seed=1)
    split = condition(cov, fs, idx)
    assert np.max(np.abs(split.v1 + split.v2 - fs.values)) <= 1e-10
    assert np.max(np.abs(split.v2[:, :, idx] - fs.values[:, :, idx])) <= 1e-10
    assert split.jitter == cov.jitter


def test_singular_anchors_rejected():
    c = np.array([[1.0, 1.0, 0.5], [1.0, 1.0, 0.5], [0.5, 0.5, 1.0]])
    with pytest.raises(NondegeneracyError):
        projection_weights(c, [0, 1])
    with pytest.raises(NondegeneracyError):
        projection_weights(c, [0, 0])


def test_conditioning_grid_mismatch():
    cov = assemble_covariance(SHEET, Grid.uniform(SHEET, 2))
    other = sample(assemble_covariance(SHEET, Grid.uniform(SHEET, 3)), 1, 2, seed=0)
    with pytest.raises(SpecError):
        condition(cov, other, [0])


@pytest.mark.parametrize(
    "spec",
    [FieldSpec("fbm_sheet", 2, hurst=(0.5, 0.5)), FieldSpec("fbm_sheet", 2, hurst=(0.75, 0.6))],
    ids=["sheet-half", "sheet-mixed"],
)
def test_v2_increment_bound_stable(spec):
    x = np.array([1.3, 1.3])
    anchors = [anchor_point(spec, x, 0.1), [1.8, 1.7]]
    rep = check_v2_increment(spec, anchors, x, 0.1, per_axis=5, reps=2000)
    assert rep.passed, rep
