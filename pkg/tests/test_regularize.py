import numpy as np
import pytest

from gsr.errors import DimensionMismatch
from gsr.graph import (
    Graph,
    build_disjoint_pairs_graph,
    build_grid_graph,
    eigendecompose,
    laplacian,
)
from gsr.regularize import (
    Penalty,
    gsr_value_and_grad,
    lp_value_and_grad,
    quadratic_form,
    spectral_value_and_grad,
)
from .test_graph import random_graph

UNIT_EDGE = laplacian(build_disjoint_pairs_graph(1))


def central_difference(f, z, h=1e-6):
    """Finite-difference gradient oracle for a scalar function of a matrix."""
    z = np.asarray(z, dtype=np.float64)
    grad = np.zeros_like(z)
    it = np.nditer(z, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        zp = z.copy()
        zm = z.copy()
        zp[idx] += h
        zm[idx] -= h
        grad[idx] = (f(zp) - f(zm)) / (2 * h)
        it.iternext()
    return grad


class TestQuadraticForm:
    def test_constant_vector_is_null(self):
        rng = np.random.default_rng(0)
        g = random_graph(rng, 7)
        assert quadratic_form(np.full(7, 3.3), laplacian(g)) == pytest.approx(0.0, abs=1e-9)

    def test_unit_edge(self):
        assert quadratic_form(np.array([1.0, 0.0]), UNIT_EDGE) == pytest.approx(1.0)

    def test_unit_triangle(self):
        w = np.ones((3, 3)) - np.eye(3)
        l = laplacian(Graph(w))
        # (1-2)^2 + (1-3)^2 + (2-3)^2 = 6
        assert quadratic_form(np.array([1.0, 2.0, 3.0]), l) == pytest.approx(6.0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            quadratic_form(np.zeros(3), UNIT_EDGE)


class TestGsrValueAndGrad:
    def test_constant_rows(self):
        l = laplacian(build_grid_graph(2, 3))
        batch = np.tile(np.array([2.0]), (4, 6))
        value, grad = gsr_value_and_grad(batch, l, alpha=1.0)
        assert value == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(grad, 0.0, atol=1e-12)

    def test_single_row_hand_gradient(self):
        value, grad = gsr_value_and_grad(np.array([[1.0, 0.0]]), UNIT_EDGE, alpha=1.0)
        assert value == pytest.approx(1.0)
        assert np.allclose(grad, [[2.0, -2.0]])

    def test_alpha_linearity(self):
        rng = np.random.default_rng(1)
        l = laplacian(random_graph(rng, 5))
        z = rng.standard_normal((3, 5))
        v1, g1 = gsr_value_and_grad(z, l, alpha=0.7)
        v2, g2 = gsr_value_and_grad(z, l, alpha=1.4)
        assert v2 == pytest.approx(2 * v1)
        assert np.allclose(g2, 2 * g1)

    def test_symmetric_gradient_identity(self):
        # 2 L z must agree with (L + L^T) z
        rng = np.random.default_rng(2)
        l = laplacian(random_graph(rng, 6))
        z = rng.standard_normal(6)
        assert np.allclose(2 * l.matrix @ z, (l.matrix + l.matrix.T) @ z)

    def test_translation_invariance_on_connected_graph(self):
        rng = np.random.default_rng(3)
        l = laplacian(build_grid_graph(3, 3))
        z = rng.standard_normal((2, 9))
        v1, _ = gsr_value_and_grad(z, l, alpha=1.0)
        v2, _ = gsr_value_and_grad(z + 17.0, l, alpha=1.0)
        assert v2 == pytest.approx(v1, rel=1e-9, abs=1e-9)

    def test_block_additivity(self):
        rng = np.random.default_rng(4)
        ga = random_graph(rng, 4, density=0.8)
        gb = random_graph(rng, 5, density=0.8)
        w = np.zeros((9, 9))
        w[:4, :4] = ga.weights
        w[4:, 4:] = gb.weights
        z = rng.standard_normal((3, 9))
        whole, _ = gsr_value_and_grad(z, laplacian(Graph(w)), alpha=1.0)
        part_a, _ = gsr_value_and_grad(z[:, :4], laplacian(ga), alpha=1.0)
        part_b, _ = gsr_value_and_grad(z[:, 4:], laplacian(gb), alpha=1.0)
        assert whole == pytest.approx(part_a + part_b, rel=1e-9)


class TestLpValueAndGrad:
    def test_zero_activations(self):
        z = np.zeros((2, 4))
        for p in (1, 2):
            value, grad = lp_value_and_grad(z, p, alpha=1.0)
            assert value == 0.0
            assert np.all(grad == 0.0)

    def test_l2_example(self):
        value, grad = lp_value_and_grad(np.array([[3.0, -4.0]]), 2, alpha=1.0)
        assert value == pytest.approx(25.0)
        assert np.allclose(grad, [[6.0, -8.0]])

    def test_l1_example(self):
        value, grad = lp_value_and_grad(np.array([[3.0, -4.0]]), 1, alpha=1.0)
        assert value == pytest.approx(7.0)
        assert np.allclose(grad, [[1.0, -1.0]])

    def test_l1_subgradient_zero_at_zero(self):
        _, grad = lp_value_and_grad(np.array([[0.0, 2.0]]), 1, alpha=1.0)
        assert grad[0, 0] == 0.0

    def test_rejects_other_p(self):
        with pytest.raises(ValueError):
            lp_value_and_grad(np.zeros((1, 2)), 3, alpha=1.0)


class TestSpectralValueAndGrad:
    def test_identity_filter_matches_gsr(self):
        rng = np.random.default_rng(5)
        for n in [4, 8, 16]:
            g = random_graph(rng, n, density=0.7)
            l = laplacian(g)
            basis = eigendecompose(l)
            z = rng.standard_normal((5, n))
            v_spec, g_spec = spectral_value_and_grad(z, basis, lambda lam: lam, alpha=0.3)
            v_gsr, g_gsr = gsr_value_and_grad(z, l, alpha=0.3)
            assert v_spec == pytest.approx(v_gsr, rel=1e-6)
            assert np.allclose(g_spec, g_gsr, rtol=1e-6, atol=1e-9)

    def test_zero_filter(self):
        basis = eigendecompose(laplacian(build_grid_graph(2, 2)))
        value, grad = spectral_value_and_grad(np.ones((3, 4)), basis, lambda lam: 0.0, alpha=1.0)
        assert value == 0.0
        assert np.all(grad == 0.0)

    def test_unit_filter_matches_l2(self):
        rng = np.random.default_rng(6)
        basis = eigendecompose(laplacian(build_grid_graph(2, 3)))
        z = rng.standard_normal((4, 6))
        v_spec, g_spec = spectral_value_and_grad(z, basis, lambda lam: 1.0, alpha=0.9)
        v_l2, g_l2 = lp_value_and_grad(z, 2, alpha=0.9)
        assert v_spec == pytest.approx(v_l2, rel=1e-9)
        assert np.allclose(g_spec, g_l2, rtol=1e-8, atol=1e-12)


class TestGradientsAgainstFiniteDifferences:
    def test_all_penalties(self):
        rng = np.random.default_rng(7)
        for trial in range(100):
            n = int(rng.integers(2, 17))
            b = int(rng.integers(1, 5))
            z = rng.standard_normal((b, n))
            g = random_graph(rng, n, density=0.6)
            l = laplacian(g)
            basis = eigendecompose(l)
            alpha = float(rng.uniform(0.1, 2.0))
            cases = [
                (lambda zz: gsr_value_and_grad(zz, l, alpha)[0],
                 gsr_value_and_grad(z, l, alpha)[1]),
                (lambda zz: lp_value_and_grad(zz, 2, alpha)[0],
                 lp_value_and_grad(z, 2, alpha)[1]),
                (lambda zz: spectral_value_and_grad(zz, basis, lambda lam: lam + 0.5, alpha)[0],
                 spectral_value_and_grad(z, basis, lambda lam: lam + 0.5, alpha)[1]),
            ]
            for value_fn, grad in cases:
                fd = central_difference(value_fn, z)
                assert np.allclose(grad, fd, rtol=1e-6, atol=1e-7)

    def test_l1_away_from_kink(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            z = rng.uniform(0.5, 2.0, size=(2, 6)) * rng.choice([-1.0, 1.0], size=(2, 6))
            fd = central_difference(lambda zz: lp_value_and_grad(zz, 1, 1.3)[0], z)
            _, grad = lp_value_and_grad(z, 1, 1.3)
            assert np.allclose(grad, fd, rtol=1e-6, atol=1e-8)


class TestPenaltyTag:
    def test_nonnegative_values(self):
        rng = np.random.default_rng(9)
        g = random_graph(rng, 6)
        l = laplacian(g)
        basis = eigendecompose(l)
        z = rng.standard_normal((4, 6))
        penalties = [
            Penalty.none(),
            Penalty.l1(0.5),
            Penalty.l2(0.5),
            Penalty.gsr(0.5, l),
            Penalty.spectral(0.5, basis, lambda lam: lam),
        ]
        for pen in penalties:
            value, _ = pen.value_and_grad(z)
            assert value >= -1e-10

    def test_raw_scaling(self):
        rng = np.random.default_rng(10)
        l = laplacian(random_graph(rng, 5))
        z = rng.standard_normal((2, 5))
        pen = Penalty.gsr(0.25, l)
        raw_v, raw_g = pen.raw_value_and_grad(z)
        v, g = pen.value_and_grad(z)
        assert v == pytest.approx(0.25 * raw_v)
        assert np.allclose(g, 0.25 * raw_g)

    def test_validation(self):
        with pytest.raises(ValueError):
            Penalty("gsr", 0.1)
        with pytest.raises(ValueError):
            Penalty.l2(-0.1)
        with pytest.raises(ValueError):
            Penalty("ridge", 0.1)

    def test_expected_width(self):
        l = laplacian(build_grid_graph(2, 2))
        assert Penalty.gsr(0.1, l).expected_width() == 4
        assert Penalty.l1(0.1).expected_width() is None
