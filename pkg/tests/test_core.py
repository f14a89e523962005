import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from netkin.core import (
    DiscreteNetwork,
    Kernel,
    PeriodicGrid1D,
    check_simplex,
    eval_kernel,
    grid_laplacian,
    kernel_mass,
    local_limit_coefficient,
    nonlocal_laplacian,
    periodic_distance,
    project_simplex,
    triangular_kernel,
)
from netkin.errors import DegenerateStateError, DimensionError, DomainError, UnsupportedKernelError


@pytest.fixture
def fig1_kernel():
    return triangular_kernel(PeriodicGrid1D(100), x0=0.2, alpha=0.3)


def test_periodic_distance_wraps():
    assert periodic_distance(0.05, 0.95) == pytest.approx(0.1)
    assert periodic_distance(0.3, 0.3) == 0.0
    assert periodic_distance(0.0, 0.5) == pytest.approx(0.5)


def test_grid_points_and_lookup():
    g = PeriodicGrid1D(100)
    assert g.h == pytest.approx(0.01)
    assert g.points[37] == pytest.approx(0.37)
    assert g.index_of(0.37) == 37
    with pytest.raises(DomainError):
        g.index_of(1.0)
    with pytest.raises(ValueError):
        PeriodicGrid1D(0)


class TestEvalKernel:
    def test_on_diagonal(self, fig1_kernel):
        assert eval_kernel(fig1_kernel, 0.1, 0.1) == pytest.approx(0.06, abs=1e-14)

    def test_beyond_support(self, fig1_kernel):
        assert eval_kernel(fig1_kernel, 0.1, 0.3) == pytest.approx(0.0, abs=1e-15)
        assert eval_kernel(fig1_kernel, 0.1, 0.5) == 0.0

    def test_periodic_wrap(self, fig1_kernel):
        assert eval_kernel(fig1_kernel, 0.05, 0.95) == pytest.approx(0.03, abs=1e-14)

    def test_outside_domain(self, fig1_kernel):
        with pytest.raises(DomainError):
            eval_kernel(fig1_kernel, 1.2, 0.1)

    def test_network_lookup(self):
        net = DiscreteNetwork(("a", "b"))
        k = Kernel.network(net, [[0.0, 2.0], [2.0, 0.0]])
        assert eval_kernel(k, "a", "b") == 2.0
        with pytest.raises(DomainError):
            eval_kernel(k, "a", "c")


class TestKernelMass:
    def test_triangle_integral(self, fig1_kernel):
        # 0.3 * 0.2**2 = 0.012, exact for the midpoint rule on this grid
        np.testing.assert_allclose(kernel_mass(fig1_kernel), 0.012, atol=1e-14)

    def test_zero_kernel(self):
        k = Kernel.constant(PeriodicGrid1D(10), 0.0)
        np.testing.assert_array_equal(kernel_mass(k), 0.0)

    def test_two_node_network(self):
        k = Kernel.network(DiscreteNetwork.of_size(2), [[0, 1], [1, 0]])
        np.testing.assert_array_equal(kernel_mass(k, np.array([1.0, 1.0])), [1.0, 1.0])

    def test_mismatched_density(self, fig1_kernel):
        with pytest.raises(DimensionError):
            kernel_mass(fig1_kernel, np.ones(7))


class TestNonlocalLaplacian:
    def test_constant_in_null_space(self, fig1_kernel):
        np.testing.assert_allclose(nonlocal_laplacian(fig1_kernel, np.full(100, 3.7)), 0.0,
                                   atol=1e-15)

    def test_two_node_network(self):
        k = Kernel.network(DiscreteNetwork.of_size(2), [[0, 1], [1, 0]])
        np.testing.assert_array_equal(nonlocal_laplacian(k, np.array([0.0, 1.0])), [1.0, -1.0])

    def test_symmetric_kernel_sums_to_zero(self, fig1_kernel):
        phi = np.random.default_rng(3).random(100)
        total = fig1_kernel.space.h * nonlocal_laplacian(fig1_kernel, phi).sum()
        assert abs(total) <= 1e-10

    def test_component_axis(self, fig1_kernel):
        phi = np.random.default_rng(4).random((100, 3))
        lap = nonlocal_laplacian(fig1_kernel, phi)
        np.testing.assert_allclose(lap[:, 1], nonlocal_laplacian(fig1_kernel, phi[:, 1]))

    def test_local_expansion_is_fourth_order(self):
        # residual against (C eps^2 / 2) phi'' should shrink like eps^4
        n = 2000
        g = PeriodicGrid1D(n)
        x = g.points
        phi = np.sin(2 * np.pi * x)
        d2 = -(2 * np.pi) ** 2 * phi
        errs = []
        for eps in (0.2, 0.1, 0.05):
            k = Kernel.convolution(g, lambda s: np.clip(1 - np.abs(s), 0, None), eps, support=1.0)
            C, _ = local_limit_coefficient(k)
            errs.append(np.max(np.abs(nonlocal_laplacian(k, phi) - 0.5 * C * eps ** 2 * d2)))
        rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(rates > 3.5), rates


class TestLocalLimitCoefficient:
    def test_uniform_profile(self):
        k = Kernel.convolution(PeriodicGrid1D(100), lambda s: 0.5 * (np.abs(s) <= 1), 0.1,
                               support=1.0)
        C, sigma = local_limit_coefficient(k)
        assert C == pytest.approx(1 / 3, rel=1e-10)
        assert sigma == pytest.approx(0.1 / np.sqrt(3), rel=1e-10)

    def test_triangle_profile(self):
        k = Kernel.convolution(PeriodicGrid1D(100), lambda s: np.clip(1 - np.abs(s), 0, None),
                               0.1, support=1.0)
        assert local_limit_coefficient(k)[0] == pytest.approx(1 / 6, rel=1e-10)

    def test_non_convolutional(self):
        k = Kernel.network(DiscreteNetwork.of_size(2), np.ones((2, 2)))
        with pytest.raises(UnsupportedKernelError):
            local_limit_coefficient(k)


def test_grid_laplacian_of_sine():
    g = PeriodicGrid1D(200)
    phi = np.sin(2 * np.pi * g.points)
    np.testing.assert_allclose(grid_laplacian(phi, g), -(2 * np.pi) ** 2 * phi, atol=2e-2)


def test_kernel_rejects_negative_and_asymmetric():
    g = PeriodicGrid1D(3)
    with pytest.raises(ValueError):
        Kernel(g, -np.ones((3, 3)))
    with pytest.raises(ValueError):
        Kernel(g, np.arange(9.0).reshape(3, 3), symmetric=True)


def test_kernel_matrix_is_read_only(fig1_kernel):
    with pytest.raises(ValueError):
        fig1_kernel.matrix[0, 0] = 1.0


class TestProjectSimplex:
    def test_identity_on_simplex(self):
        np.testing.assert_array_equal(project_simplex([0.5, 0.5]), [0.5, 0.5])

    def test_clamps_rounding(self):
        np.testing.assert_array_equal(project_simplex([1.0, -1e-15]), [1.0, 0.0])

    def test_renormalizes(self):
        np.testing.assert_array_equal(project_simplex([2.0, 2.0]), [0.5, 0.5])

    @pytest.mark.parametrize("v", [[0.0, 0.0], [np.nan, 1.0], [-1.0, -2.0]])
    def test_degenerate(self, v):
        with pytest.raises(DegenerateStateError):
            project_simplex(v)

    @settings(max_examples=100, deadline=None)
    @given(arrays(float, st.integers(2, 6), elements=st.floats(0.01, 10.0)))
    def test_idempotent(self, v):
        once = project_simplex(v)
        assert check_simplex(once, 1e-12)
        np.testing.assert_array_equal(project_simplex(once), once)
