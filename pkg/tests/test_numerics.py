import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specmoment.errors import InputError, NotPositiveDefinite, NotSPD, UnstableMatrix
from specmoment.numerics import (
    CircleGrid,
    GridFunction,
    circle_mean,
    default_grid_size,
    logdet_mean,
    pairwise_sum,
    pointwise_cholesky,
    relative_gap,
    solve_discrete_lyapunov,
    solve_two_sided,
    sym_to_vec,
    symmetric_basis,
    vec_to_sym,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _stable(rng, n, radius=0.9):
    A = rng.standard_normal((n, n))
    return A * radius / np.max(np.abs(np.linalg.eigvals(A)))


def _sym(rng, n):
    W = rng.standard_normal((n, n))
    return W + W.T


class TestCircleGrid:
    def test_nodes(self):
        g = CircleGrid(8)
        assert g.nodes[0] == -np.pi
        assert np.all(np.diff(g.nodes) > 0)
        np.testing.assert_allclose(np.diff(g.nodes), 2 * np.pi / 8)
        assert g.nodes[-1] < np.pi

    @pytest.mark.parametrize("size", [0, 2, 6, 12, 4.0, -4])
    def test_rejects_bad_sizes(self, size):
        with pytest.raises(InputError):
            CircleGrid(size)

    def test_refined_and_mirror(self):
        g = CircleGrid(16)
        assert g.refined().size == 32
        np.testing.assert_allclose(g.nodes[g.mirror_index()][1:], -g.nodes[1:], atol=1e-15)

    def test_env_override(self, monkeypatch):
        monkeypatch.setenv("SPECMOMENT_GRID", "256")
        assert default_grid_size() == 256
        monkeypatch.setenv("SPECMOMENT_GRID", "300")
        with pytest.raises(InputError):
            default_grid_size()
        monkeypatch.delenv("SPECMOMENT_GRID")
        assert default_grid_size() == 4096


class TestCircleMean:
    def test_constant(self):
        g = CircleGrid(64)
        C = np.array([[1.0, 2.0 - 1j], [3.0, 4.0]])
        f = GridFunction(g, np.broadcast_to(C, (64, 2, 2)))
        np.testing.assert_allclose(circle_mean(f), C, atol=1e-15)

    def test_fourier_mode_vanishes(self):
        g = CircleGrid(64)
        assert abs(circle_mean(np.exp(1j * g.nodes))) < 1e-15

    def test_cosine(self):
        g = CircleGrid(64)
        assert abs(circle_mean(2 + 2 * np.cos(g.nodes)) - 2) < 1e-14

    def test_pairwise_sum_deterministic(self):
        x = np.random.default_rng(0).standard_normal((1024, 2, 2))
        assert np.array_equal(pairwise_sum(x), pairwise_sum(x.copy()))
        np.testing.assert_allclose(pairwise_sum(x), x.sum(axis=0), rtol=1e-12)

    @settings(deadline=None, max_examples=40)
    @given(seed=seeds, degree=st.integers(0, 31))
    def test_quadrature_exact_for_trig_polynomials(self, seed, degree):
        g = CircleGrid(64)
        rng = np.random.default_rng(seed)
        c = rng.standard_normal(2 * degree + 1) + 1j * rng.standard_normal(2 * degree + 1)
        k = np.arange(-degree, degree + 1)
        f = np.exp(1j * np.outer(g.nodes, k)) @ c
        assert abs(circle_mean(f) - c[degree]) < 1e-12


class TestLogdet:
    def test_identity(self):
        g = CircleGrid(32)
        assert logdet_mean(GridFunction(g, np.broadcast_to(np.eye(3), (32, 3, 3)))) == 0.0

    def test_outer_function_jensen(self):
        g = CircleGrid(256)
        q = np.abs(1 + 0.5 * np.exp(1j * g.nodes)) ** 2
        assert abs(logdet_mean(GridFunction(g, q))) < 1e-14

    def test_constant(self):
        g = CircleGrid(32)
        assert logdet_mean(GridFunction(g, np.broadcast_to(3.0 * np.eye(2), (32, 2, 2)))) == pytest.approx(
            2 * np.log(3.0), rel=1e-14)

    def test_reports_failing_node(self):
        g = CircleGrid(16)
        q = np.ones(16)
        q[5] = -1.0
        with pytest.raises(NotPositiveDefinite) as err:
            logdet_mean(GridFunction(g, q))
        assert err.value.index == 5
        assert err.value.theta == pytest.approx(g.nodes[5])

    def test_pivot_floor(self):
        v = np.array([[[1.0, 1.0], [1.0, 1.0 + 1e-14]]])
        with pytest.raises(NotPositiveDefinite):
            pointwise_cholesky(v)

    @settings(deadline=None, max_examples=30)
    @given(seed=seeds)
    def test_additive_for_commuting_samples(self, seed):
        g = CircleGrid(32)
        rng = np.random.default_rng(seed)
        U, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        d1 = rng.uniform(0.1, 3.0, (32, 3))
        d2 = rng.uniform(0.1, 3.0, (32, 3))
        Q1 = np.einsum("ij,nj,kj->nik", U, d1, U)
        Q2 = np.einsum("ij,nj,kj->nik", U, d2, U)
        lhs = logdet_mean(Q1) + logdet_mean(Q2)
        rhs = logdet_mean(0.5 * (Q1 @ Q2 + (Q1 @ Q2).transpose(0, 2, 1)))
        assert lhs == pytest.approx(rhs, abs=1e-12)


class TestLyapunov:
    def test_zero_A(self):
        W = np.array([[2.0, 1.0], [1.0, 3.0]])
        np.testing.assert_array_equal(solve_discrete_lyapunov(np.zeros((2, 2)), W), W)

    def test_scalar(self):
        assert solve_discrete_lyapunov([[0.5]], [[1.0]])[0, 0] == pytest.approx(4 / 3, rel=1e-15)

    def test_unstable(self):
        with pytest.raises(UnstableMatrix):
            solve_discrete_lyapunov(np.eye(2), np.eye(2))

    @settings(deadline=None, max_examples=30)
    @given(seed=seeds, n=st.integers(1, 12))
    def test_residual(self, seed, n):
        rng = np.random.default_rng(seed)
        A, W = _stable(rng, n), _sym(rng, n)
        M = solve_discrete_lyapunov(A, W)
        np.testing.assert_allclose(M, M.T, atol=1e-12 * (1 + np.linalg.norm(M)))
        assert np.linalg.norm(M - A.T @ M @ A - W) <= 1e-10 * (1 + np.linalg.norm(W))

    @settings(deadline=None, max_examples=30)
    @given(seed=seeds)
    def test_linear_in_W(self, seed):
        rng = np.random.default_rng(seed)
        A = _stable(rng, 4)
        W1, W2 = _sym(rng, 4), _sym(rng, 4)
        lhs = solve_discrete_lyapunov(A, W1 + W2)
        rhs = solve_discrete_lyapunov(A, W1) + solve_discrete_lyapunov(A, W2)
        assert relative_gap(lhs, rhs) <= 1e-12


class TestTwoSided:
    def test_identity(self):
        R = np.array([[2.0, 1.0], [1.0, 4.0]])
        np.testing.assert_allclose(solve_two_sided(np.eye(2), R), R / 2)

    def test_scalar(self):
        assert solve_two_sided([[3.0]], [[12.0]])[0, 0] == pytest.approx(2.0)

    def test_not_spd(self):
        with pytest.raises(NotSPD):
            solve_two_sided(np.diag([1.0, 0.0]), np.eye(2))

    @settings(deadline=None, max_examples=30)
    @given(seed=seeds)
    def test_residual(self, seed):
        rng = np.random.default_rng(seed)
        F = rng.standard_normal((3, 3))
        P = F @ F.T + 0.1 * np.eye(3)
        R = _sym(rng, 3)
        Y = solve_two_sided(P, R)
        assert np.linalg.norm(P @ Y + Y @ P - R) <= 1e-12 * np.linalg.norm(R)


def test_symmetric_basis_orthonormal():
    basis = np.array(symmetric_basis(4)).reshape(10, -1)
    np.testing.assert_allclose(basis @ basis.T, np.eye(10), atol=1e-15)
    S = _sym(np.random.default_rng(1), 4)
    np.testing.assert_allclose(vec_to_sym(sym_to_vec(S), 4), S, atol=1e-14)


def test_grid_function_validates_and_freezes():
    g = CircleGrid(8)
    with pytest.raises(InputError):
        GridFunction(g, np.zeros((4, 1, 1)))
    f = GridFunction.hermitian(g, np.zeros((8, 2, 2)) + np.array([[0, 1j], [0, 0]]))
    np.testing.assert_allclose(f.values[0], [[0, 0.5j], [-0.5j, 0]])
    with pytest.raises(ValueError):
        f.values[0, 0, 0] = 1.0
