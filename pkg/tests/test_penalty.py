import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bayestps.errors import BasisError, ValidationError
from bayestps.penalty import (
    build_eigenstructure,
    eigenstructure_for,
    grad_hess_rho,
    log_fcp_rho,
    log_pseudo_det,
    quadratic_forms,
    second_diff_penalty,
)
from bayestps.priors import InverseGammaPrior, WeibullPrior

from conftest import dense_components, dense_K, dense_log_pdet


class TestSecondDiffPenalty:
    def test_d4_matrix(self):
        expected = [[1, -2, 1, 0], [-2, 5, -4, 1], [1, -4, 5, -2], [0, 1, -2, 1]]
        np.testing.assert_array_equal(second_diff_penalty(4).matrix, expected)

    def test_d4_eigenvalues(self):
        np.testing.assert_allclose(second_diff_penalty(4).eigenvalues, [0, 0, 2, 10], atol=1e-13)

    @pytest.mark.parametrize("d", [4, 5, 8, 20, 64])
    def test_null_space_and_reconstruction(self, d):
        pen = second_diff_penalty(d)
        np.testing.assert_allclose(pen.matrix @ np.ones(d), 0, atol=1e-12)
        np.testing.assert_allclose(pen.matrix @ np.arange(1, d + 1), 0, atol=1e-12)
        assert np.sum(pen.eigenvalues == 0) == 2
        assert np.all(np.diff(pen.eigenvalues) >= 0)
        Q = pen.eigenvectors
        np.testing.assert_allclose(Q @ np.diag(pen.eigenvalues) @ Q.T, pen.matrix, atol=1e-10)
        np.testing.assert_allclose(Q.T @ Q, np.eye(d), atol=1e-12)

    def test_too_small(self):
        with pytest.raises(BasisError):
            second_diff_penalty(3)


class TestEigenstructure:
    @pytest.mark.parametrize(
        "dims, expected", [((4, 4), 12), ((5, 5, 5), 117), ((4,), 2), ((6, 4, 5, 4), 464)]
    )
    def test_positive_count(self, dims, expected):
        es = eigenstructure_for(dims)
        assert es.n_positive == expected == es.D - 2 ** es.p

    def test_diagonal_matches_dense_eigenvalues(self):
        dims = (4, 4)
        es = eigenstructure_for(dims)
        l = np.arange(es.D)
        diag = es.gamma(0, l) + es.gamma(1, l)
        dense = np.linalg.eigvalsh(sum(dense_components(dims)))
        np.testing.assert_allclose(np.sort(diag), dense, atol=1e-10)

    def test_gamma_mixed_radix(self):
        es = eigenstructure_for((4, 5, 6))
        for l in [0, 7, 33, 119]:
            i = np.unravel_index(l, (4, 5, 6))
            for j in range(3):
                assert es.gamma(j, l) == es.marginals[j].eigenvalues[i[j]]

    def test_joint_diagonalization(self):
        dims = (4, 5)
        es = eigenstructure_for(dims)
        Q = np.kron(es.marginals[0].eigenvectors, es.marginals[1].eigenvectors)
        for j, Kj in enumerate(dense_components(dims)):
            np.testing.assert_allclose(Q.T @ Kj @ Q, np.diag(es.gamma(j, np.arange(es.D))), atol=1e-10)

    def test_empty(self):
        with pytest.raises(ValidationError):
            build_eigenstructure([])


class TestLogPseudoDet:
    def test_p1_d4(self):
        assert log_pseudo_det(eigenstructure_for((4,)), [0.0]) == pytest.approx(np.log(20), rel=1e-14)
        assert np.log(20) == pytest.approx(2.99573, abs=1e-5)

    def test_p2_d4_value(self):
        val = log_pseudo_det(eigenstructure_for((4, 4)), [0.0, 0.0])
        expected = 4 * np.log(2) + 4 * np.log(10) + np.log(4) + 2 * np.log(12) + np.log(20)
        assert val == pytest.approx(expected, rel=1e-13)
        assert val == pytest.approx(21.3348, abs=1e-4)
        assert val == pytest.approx(dense_log_pdet((4, 4), [0.0, 0.0]), rel=1e-10)

    @pytest.mark.parametrize("dims", [(5,), (4, 6), (5, 4, 4)])
    def test_matches_dense(self, dims, rng):
        for _ in range(5):
            rho = rng.uniform(-4, 4, len(dims))
            es = eigenstructure_for(dims)
            assert log_pseudo_det(es, rho) == pytest.approx(dense_log_pdet(dims, rho), rel=1e-9)

    @given(st.floats(-10, 10), st.lists(st.floats(-5, 5), min_size=2, max_size=2))
    @settings(max_examples=50, deadline=None)
    def test_shift(self, c, rho):
        es = eigenstructure_for((5, 6))
        rho = np.array(rho)
        lhs = log_pseudo_det(es, rho + c)
        rhs = log_pseudo_det(es, rho) - es.n_positive * c
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-9)

    def test_wrong_length(self):
        with pytest.raises(ValidationError):
            log_pseudo_det(eigenstructure_for((4, 4)), [0.0])


class TestQuadraticForms:
    def test_zero_and_ones(self):
        es = eigenstructure_for((4, 5, 6))
        np.testing.assert_array_equal(quadratic_forms(es, np.zeros(120)), 0)
        np.testing.assert_allclose(quadratic_forms(es, np.ones(120)), 0, atol=1e-24)

    @pytest.mark.parametrize("dims", [(4, 4), (5, 4, 6)])
    def test_matches_dense(self, dims, rng):
        es = eigenstructure_for(dims)
        b = rng.standard_normal(es.D)
        expected = [b @ Kj @ b for Kj in dense_components(dims)]
        np.testing.assert_allclose(quadratic_forms(es, b), expected, rtol=1e-12)

    def test_null_space_invariance(self, rng):
        dims = (4, 5, 6)
        es = eigenstructure_for(dims)
        b = rng.standard_normal(es.D)
        base = quadratic_forms(es, b)
        for j, d in enumerate(dims):
            # constant plus linear along j, arbitrary in the other modes
            others = [dims[k] for k in range(3) if k != j]
            c0, c1 = rng.standard_normal(others), rng.standard_normal(others)
            lin = np.arange(d, dtype=float)
            shift = np.moveaxis(c0[..., None] + c1[..., None] * lin, -1, j)
            qf = quadratic_forms(es, b + shift.ravel())
            assert qf[j] == pytest.approx(base[j], rel=1e-8)

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            quadratic_forms(eigenstructure_for((4, 4)), np.zeros(15))


PRIORS = [WeibullPrior(1.0), WeibullPrior(38.0), InverseGammaPrior(0.001, 0.001), InverseGammaPrior(2.0, 0.5)]


class TestLogFcp:
    def test_flat_limit_p1(self):
        es = eigenstructure_for((6,))
        prior = WeibullPrior(2.0)
        rho = np.array([0.7])
        val = log_fcp_rho(es, rho, [0.0], prior)
        assert val == pytest.approx(0.5 * log_pseudo_det(es, rho) + prior.log_kernel(rho))

    def test_differences_match_dense(self, rng):
        dims = (4, 4)
        es = eigenstructure_for(dims)
        prior = WeibullPrior(3.0)
        b = rng.standard_normal(16)
        qf = quadratic_forms(es, b)

        def brute(rho):
            return 0.5 * dense_log_pdet(dims, rho) - 0.5 * b @ dense_K(dims, rho) @ b + prior.log_kernel(rho)

        for _ in range(10):
            r1, r2 = rng.uniform(-3, 3, 2), rng.uniform(-3, 3, 2)
            got = log_fcp_rho(es, r1, qf, prior) - log_fcp_rho(es, r2, qf, prior)
            assert got == pytest.approx(brute(r1) - brute(r2), rel=1e-9, abs=1e-9)

    def test_monotone_in_qf(self):
        es = eigenstructure_for((5, 5))
        prior = InverseGammaPrior()
        rho = np.array([0.3, -1.0])
        for j in range(2):
            qf = np.array([1.0, 2.0])
            bigger = qf.copy()
            bigger[j] += 0.5
            assert log_fcp_rho(es, rho, bigger, prior) < log_fcp_rho(es, rho, qf, prior)


def _fd_grad(f, x, h=1e-5):
    g = np.empty(len(x))
    for j in range(len(x)):
        e = np.zeros(len(x))
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2 * h)
    return g


class TestGradHess:
    @pytest.mark.parametrize("prior", PRIORS, ids=lambda p: f"{p.name}")
    @pytest.mark.parametrize("dims", [(5,), (4, 6), (4, 5, 4)])
    def test_finite_differences(self, dims, prior, rng):
        es = eigenstructure_for(dims)
        for _ in range(5):
            rho = rng.uniform(-3, 3, len(dims))
            qf = quadratic_forms(es, rng.standard_normal(es.D))
            u, H = grad_hess_rho(es, rho, qf, prior)
            fd_u = _fd_grad(lambda r: log_fcp_rho(es, r, qf, prior), rho)
            fd_H = np.column_stack(
                [_fd_grad(lambda r: grad_hess_rho(es, r, qf, prior)[0][k], rho) for k in range(len(dims))]
            )
            np.testing.assert_allclose(u, fd_u, rtol=1e-4, atol=1e-6 * np.abs(fd_u).max())
            np.testing.assert_allclose(H, fd_H, rtol=1e-4, atol=1e-6 * np.abs(fd_H).max())
            np.testing.assert_array_equal(H, H.T)

    def test_p1_analytic(self):
        # one coordinate: log_fcp = 0.5 * |D+| * (-rho) + const - 0.5 qf e^{-rho} + prior
        es = eigenstructure_for((7,))
        prior = WeibullPrior(1.0)
        rho, qf = np.array([0.4]), np.array([3.0])
        u, H = grad_hess_rho(es, rho, qf, prior)
        g, h = prior.derivatives(rho)
        assert u[0] == pytest.approx(-0.5 * 5 + 0.5 * 3 * np.exp(-0.4) + g[0], rel=1e-13)
        assert H[0, 0] == pytest.approx(-0.5 * 3 * np.exp(-0.4) + h[0], rel=1e-13)

    def test_pseudo_det_part_concave_direction(self, rng):
        # dense check of the pseudo-determinant Hessian on an asymmetric grid
        dims = (4, 6)
        es = eigenstructure_for(dims)
        prior = InverseGammaPrior(1e-8, 1e-8)
        rho = np.array([0.5, -0.2])
        _, H = grad_hess_rho(es, rho, np.zeros(2), prior)
        f = lambda r: 0.5 * dense_log_pdet(dims, r)
        h = 1e-4
        for j, k in itertools.product(range(2), repeat=2):
            ej, ek = np.eye(2)[j] * h, np.eye(2)[k] * h
            fd = (f(rho + ej + ek) - f(rho + ej - ek) - f(rho - ej + ek) + f(rho - ej - ek)) / (4 * h * h)
            assert H[j, k] == pytest.approx(fd, rel=1e-4, abs=1e-6)
