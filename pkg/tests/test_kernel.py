import numpy as np
import pytest

from sulfsim import Grid1D, WeightedPointCloud, kernel_grad, kernel_value, mollify, mollify_grad
from sulfsim.kernel import grid_density


def test_kernel_value_closed_forms():
    assert kernel_value(0.0, 1.0) == pytest.approx(0.3989422804, abs=1e-10)
    assert kernel_value(1.0, 1.0) == pytest.approx(0.2419707245, abs=1e-10)


def test_kernel_even_symmetry(rng):
    x = rng.normal(0, 2, 100)
    assert np.array_equal(kernel_value(x, 0.7), kernel_value(-x, 0.7))


def test_kernel_grad_closed_forms():
    assert kernel_grad(0.0, 1.0) == 0.0
    assert kernel_grad(1.0, 1.0) == pytest.approx(-0.2419707245, abs=1e-10)


def test_kernel_grad_finite_difference_oracle():
    h = 1e-5
    fd = (kernel_value(0.5 + h, 1.0) - kernel_value(0.5 - h, 1.0)) / (2 * h)
    assert kernel_grad(0.5, 1.0) == pytest.approx(fd, abs=1e-8)


def test_kernel_integrates_to_one_and_grad_to_zero():
    x = np.linspace(-8.0, 8.0, 32001)
    assert np.trapezoid(kernel_value(x, 1.0), x) == pytest.approx(1.0, abs=1e-6)
    assert np.trapezoid(kernel_grad(x, 1.0), x) == pytest.approx(0.0, abs=1e-6)


def test_mollify_single_particle():
    cloud = WeightedPointCloud(np.array([0.0]), np.array([1.0]))
    assert mollify(cloud, 1.0, 0.0, 1) == pytest.approx(0.3989422804, abs=1e-10)


def test_mollify_zero_weights():
    cloud = WeightedPointCloud(np.array([0.0, 1.0]), np.array([0.0, 0.0]))
    q = np.linspace(-2, 2, 11)
    assert np.all(mollify(cloud, 1.0, q, 2) == 0.0)


def test_mollify_symmetry():
    cloud = WeightedPointCloud(np.array([-0.7, 0.7]), np.array([0.5, 0.5]))
    assert mollify(cloud, 1.0, 0.7, 2) == pytest.approx(mollify(cloud, 1.0, -0.7, 2), rel=1e-14)


def test_mollify_grad_odd_symmetry():
    cloud = WeightedPointCloud(np.array([0.0]), np.array([1.0]))
    assert mollify_grad(cloud, 1.0, 0.0, 1) == 0.0
    sym = WeightedPointCloud(np.array([-1.2, 1.2]), np.array([0.4, 0.4]))
    assert mollify_grad(sym, 1.0, 0.0, 2) == pytest.approx(0.0, abs=1e-15)


def test_mollify_grad_matches_finite_difference(rng):
    cloud = WeightedPointCloud(rng.normal(0, 1, 50), rng.random(50))
    h = 1e-5
    fd = (mollify(cloud, 1.0, 0.3 + h, 50) - mollify(cloud, 1.0, 0.3 - h, 50)) / (2 * h)
    assert mollify_grad(cloud, 1.0, 0.3, 50) == pytest.approx(fd, abs=1e-6)


def test_mollify_mass_equals_weight_mass(rng):
    cloud = WeightedPointCloud(rng.normal(0, 1, 40), rng.random(40))
    delta = 0.5
    lo = cloud.positions.min() - 8 * delta
    hi = cloud.positions.max() + 8 * delta
    x = np.linspace(lo, hi, 40001)
    mass = np.trapezoid(mollify(cloud, delta, x, 40), x)
    assert mass == pytest.approx(cloud.weights.sum() / 40, abs=1e-6)


def test_mollify_linear_in_weights_exactly(rng):
    pos = rng.normal(0, 1, 30)
    w = rng.random(30) * 0.5
    q = np.linspace(-3, 3, 17)
    one = mollify(WeightedPointCloud(pos, w), 0.4, q, 30)
    two = mollify(WeightedPointCloud(pos, 2 * w), 0.4, q, 30)
    assert np.array_equal(two, 2 * one)


def test_cloud_validation():
    with pytest.raises(ValueError):
        WeightedPointCloud(np.array([0.0, np.inf]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        WeightedPointCloud(np.array([0.0]), np.array([1.5]))
    with pytest.raises(ValueError):
        WeightedPointCloud(np.array([0.0, 1.0]), np.array([1.0]))


def test_mollify_requires_positive_divisor():
    cloud = WeightedPointCloud(np.array([0.0]), np.array([1.0]))
    with pytest.raises(ValueError):
        mollify(cloud, 1.0, 0.0, 0)


def test_grid_density_matches_mollify(rng):
    cloud = WeightedPointCloud(rng.normal(0, 1, 500), rng.random(500))
    grid = Grid1D(-6.0, 6.0, 0.05)
    u, du = grid_density(cloud, grid, 0.3, 500)
    nodes = grid.nodes()
    u_ref = mollify(cloud, 0.3, nodes, 500)
    du_ref = mollify_grad(cloud, 0.3, nodes, 500)
    assert np.max(np.abs(u - u_ref)) <= 1e-12 * np.max(u_ref)
    assert np.max(np.abs(du - du_ref)) <= 1e-12 * np.max(np.abs(du_ref))


def test_grid_density_worker_count_bit_identical(rng):
    cloud = WeightedPointCloud(rng.normal(0, 1, 2000), rng.random(2000))
    grid = Grid1D(-8.0, 8.0, 0.05)
    u1, g1 = grid_density(cloud, grid, 0.3, 2000, workers=1)
    u4, g4 = grid_density(cloud, grid, 0.3, 2000, workers=4)
    assert np.array_equal(u1, u4) and np.array_equal(g1, g4)
