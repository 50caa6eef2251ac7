import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from explorler.nn import FlatParams
from explorler.viz import (
    contour_grid,
    contour_levels,
    contour_svg,
    marching_squares,
    pca_project,
    sample_gaussian_cloud,
)


def test_cloud_identical_checkpoints():
    pts = [np.array([1.0, -2.0, 3.0])] * 3
    cloud = sample_gaussian_cloud(pts, 50, np.random.default_rng(0))
    assert len(cloud) == 50
    assert max(np.abs(c - pts[0]).max() for c in cloud) < 1e-4


def test_cloud_count_zero_and_errors():
    assert sample_gaussian_cloud([np.zeros(2), np.ones(2)], 0, np.random.default_rng(0)) == []
    with pytest.raises(ValueError):
        sample_gaussian_cloud([np.zeros(2)], 5, np.random.default_rng(0))


def test_cloud_mean_law_of_large_numbers():
    rng = np.random.default_rng(1)
    pts = [rng.normal(size=4) for _ in range(5)]
    mu, sd = np.mean(pts, axis=0), np.std(pts, axis=0)
    cloud = np.array(sample_gaussian_cloud(pts, 10_000, np.random.default_rng(2)))
    assert np.all(np.abs(cloud.mean(axis=0) - mu) < 3 * sd / np.sqrt(10_000))


def test_cloud_keeps_layout():
    layout = (("policy.log_std", (2,)),)
    pts = [FlatParams(np.zeros(2), layout), FlatParams(np.ones(2), layout)]
    cloud = sample_gaussian_cloud(pts, 3, np.random.default_rng(0))
    assert all(isinstance(c, FlatParams) and c.layout == layout for c in cloud)


@pytest.mark.parametrize("seed", range(5))
def test_pca_matches_eigh_3d(seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(12, 3)) * np.array([3.0, 1.5, 0.4])
    basis, coords = pca_project(pts)
    evals, evecs = np.linalg.eigh(np.cov(pts.T))
    np.testing.assert_allclose(basis.explained_variance, evals[::-1][:2], rtol=0, atol=1e-8)
    for k in range(2):
        assert abs(abs(basis.directions[k] @ evecs[:, ::-1][:, k]) - 1) < 1e-8
    np.testing.assert_allclose(basis.directions @ basis.directions.T, np.eye(2), atol=1e-10)
    assert basis.explained_variance[0] >= basis.explained_variance[1] >= 0


def test_pca_planar_data_exact():
    rng = np.random.default_rng(0)
    q, _ = np.linalg.qr(rng.normal(size=(50, 2)))
    plane = rng.normal(size=(20, 2)) * [2.0, 1.0]
    pts = plane @ q.T + rng.normal(size=50)
    basis, coords = pca_project(pts)
    np.testing.assert_allclose(basis.reconstruct(coords), pts, atol=1e-8)
    for i, j in itertools.combinations(range(20), 2):
        assert abs(np.linalg.norm(coords[i] - coords[j]) - np.linalg.norm(pts[i] - pts[j])) < 1e-8


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 10))
def test_pca_reconstruction_is_optimal(seed, n):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n, 6)) * np.array([5.0, 3.0, 1.0, 0.5, 0.2, 0.1])
    basis, coords = pca_project(pts)
    err = np.sum((basis.reconstruct(coords) - pts) ** 2)
    s = np.linalg.svd(pts - pts.mean(axis=0), compute_uv=False)
    assert err <= np.sum(s[2:] ** 2) + 1e-6 * max(1.0, np.sum(s ** 2))


def test_pca_degenerate():
    with pytest.raises(ValueError):
        pca_project(np.ones((5, 3)))
    with pytest.raises(ValueError):
        pca_project(np.zeros((2, 3)))


def test_grid_constant_values():
    coords = np.random.default_rng(0).normal(size=(15, 2))
    grid = contour_grid(coords, np.full(15, 4.25), 7)
    assert grid.values.shape == (7, 7) and np.all(grid.values == 4.25)


def test_grid_single_sample():
    grid = contour_grid([[0.3, -0.2]], [9.0], 5)
    assert np.all(grid.values == 9.0)


def test_grid_node_on_sample_exact():
    coords = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.37, 0.61]])
    values = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    grid = contour_grid(coords, values, 3, margin=0.0)
    # corners of the box are grid nodes that coincide with samples
    assert grid.values[0, 0] == 1.0 and grid.values[0, -1] == 2.0
    assert grid.values[-1, 0] == 3.0 and grid.values[-1, -1] == 4.0
    assert grid.xs[0] == 0.0 and grid.xs[-1] == 1.0


def test_grid_margin_and_errors(tmp_path):
    grid = contour_grid([[0.0, 0.0], [10.0, 2.0]], [0.0, 1.0], 4)
    assert grid.xs[0] == pytest.approx(-0.5) and grid.xs[-1] == pytest.approx(10.5)
    assert grid.ys[0] == pytest.approx(-0.1)
    grid.to_csv(tmp_path / "g.csv")
    assert len((tmp_path / "g.csv").read_text().splitlines()) == 17
    with pytest.raises(ValueError):
        contour_grid(np.zeros((0, 2)), [], 4)
    with pytest.raises(ValueError):
        contour_grid([[0.0, 0.0]], [1.0], 1)


def test_marching_squares_circle():
    xs = np.linspace(-1, 1, 41)
    gx, gy = np.meshgrid(xs, xs)
    from explorler.viz import ContourGrid

    grid = ContourGrid(xs, xs, gx ** 2 + gy ** 2)
    segs = marching_squares(grid, 0.25)
    radii = [np.hypot(*p) for seg in segs for p in seg]
    assert segs and max(abs(r - 0.5) for r in radii) < 0.01
    assert len(contour_levels(grid.values)) == 10
    svg = contour_svg(grid, anchors=[[0.0, 0.0]], cloud=[[0.5, 0.5]])
    assert svg.startswith("<svg") and svg.count("<circle") == 2
