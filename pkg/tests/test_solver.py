from fractions import Fraction

import numpy as np
import pytest
import scipy.linalg

from stochhom.assembly import assemble_laplacian, assemble_rhs, assemble_total
from stochhom.errors import InputError, NumericalError, ParameterError
from stochhom.field import EnsembleParams, sample_field
from stochhom.solver import (
    apply_preconditioner,
    build_preconditioner,
    extreme_generalized_eigs,
    laplacian_eigenvalues,
    pcg_solve,
)


def _mean_zero(rng, M):
    r = rng.standard_normal(M)
    return r - r.mean()


def _field(L=4, m0=4, alpha=Fraction(1, 4), lam=0.4, seed=1):
    return sample_field(EnsembleParams(L, m0, alpha, lam), seed, 1)


def test_laplacian_eigenvalue_layout():
    n = 6
    lam = laplacian_eigenvalues(n)
    assert lam.shape == (n, n // 2 + 1)
    # rfft2 of an eigenvector exp(2 pi i (j x + k y)/n) picks the (j, k) slot
    x = np.arange(n)
    v = np.cos(2 * np.pi * (2 * x[:, None] + 1 * x[None, :]) / n).ravel()
    Av = assemble_laplacian(n) @ v
    np.testing.assert_allclose(Av, lam[2, 1] * v, atol=1e-12)


@pytest.mark.parametrize("mode", ["spectral", "factorized"])
def test_exact_inverse_on_range_lambda_one(mode):
    n = 16
    P = build_preconditioner(n, 1.0, mode=mode)
    rng = np.random.default_rng(0)
    x = _mean_zero(rng, n * n)
    np.testing.assert_allclose(apply_preconditioner(P, assemble_laplacian(n) @ x), x, atol=1e-12)


@pytest.mark.parametrize("mode", ["spectral", "factorized"])
def test_constants_and_zero(mode):
    P = build_preconditioner(8, 0.4, mode=mode)
    assert np.abs(apply_preconditioner(P, np.ones(64))).max() <= 1e-12
    assert np.all(apply_preconditioner(P, np.zeros(64)) == 0.0)


@pytest.mark.parametrize("delta", [0.0, 0.3])
def test_residual_against_assembled_B(delta):
    n = 32
    P = build_preconditioner(n, 0.4, delta)
    rng = np.random.default_rng(1)
    r = _mean_zero(rng, n * n)
    z = P.apply(r)
    assert np.linalg.norm(P.matrix() @ z - r) / np.linalg.norm(r) <= 1e-12
    assert abs(z.mean()) <= 1e-12


def test_eigenvector_scaling():
    n, lam = 8, 0.4
    x = np.arange(n)
    v = np.sin(2 * np.pi * 3 * x[:, None] / n).repeat(1, axis=1) * np.ones((1, n))
    v = v.ravel()
    mu = 4 * np.sin(np.pi * 3 / n) ** 2
    z = apply_preconditioner(build_preconditioner(n, lam), v)
    np.testing.assert_allclose(z, v * 2 / ((1 + lam) * mu), atol=1e-12)


def test_dense_factorization_oracle():
    n, lam, delta = 8, 0.3, 0.05
    B = (1 + lam) / 2 * assemble_laplacian(n).toarray() + delta * np.eye(n * n)
    rng = np.random.default_rng(2)
    r = rng.standard_normal(n * n)
    expected = scipy.linalg.cho_solve(scipy.linalg.cho_factor(B), r)
    for mode in ("spectral", "factorized"):
        got = apply_preconditioner(build_preconditioner(n, lam, delta, mode), r)
        np.testing.assert_allclose(got, expected, atol=1e-12)


def test_build_rejects_bad_input():
    with pytest.raises(ParameterError):
        build_preconditioner(1, 0.5)
    with pytest.raises(ParameterError):
        build_preconditioner(8, 0.0)
    with pytest.raises(ParameterError):
        build_preconditioner(8, 0.5, -1.0)
    with pytest.raises(ParameterError):
        build_preconditioner(8, 0.5, mode="multigrid")
    with pytest.raises(InputError):
        apply_preconditioner(build_preconditioner(8, 0.5), np.zeros(10))


def test_zero_rhs():
    F = _field()
    u, rep = pcg_solve(assemble_total(F), build_preconditioner(F.n, 0.4), np.zeros(F.n ** 2))
    assert rep.iterations == 0 and rep.converged
    assert np.all(u == 0.0)


def test_incompatible_rhs_rejected():
    F = _field()
    f = np.zeros(F.n ** 2)
    f[0] = 1.0
    with pytest.raises(InputError):
        pcg_solve(assemble_total(F), build_preconditioner(F.n, 0.4), f)
    with pytest.raises(ParameterError):
        pcg_solve(assemble_total(F), build_preconditioner(F.n, 0.4), assemble_rhs(F, 0.4, 1), tol=0.0)


def test_breakdown_raises():
    n = 8
    f = _mean_zero(np.random.default_rng(3), n * n)
    negative = -assemble_laplacian(n)
    with pytest.raises(NumericalError):
        pcg_solve(negative, build_preconditioner(n, 0.5), f)


@pytest.mark.parametrize("tol", [1e-6, 1e-10])
def test_dense_pseudo_inverse_oracle(tol):
    F = _field(L=4, m0=4, lam=0.2, seed=8)  # n = 16
    A = assemble_total(F)
    f = assemble_rhs(F, 0.2, 1)
    u, rep = pcg_solve(A, build_preconditioner(F.n, 0.2), f, tol=tol)
    u_dense = np.linalg.pinv(A.toarray()) @ f
    assert rep.converged and rep.final_relative_residual <= tol
    assert np.linalg.norm(u - u_dense) / np.linalg.norm(u_dense) <= 10 * tol
    assert abs(u.mean()) <= 1e-12


def test_max_iter_reported_not_raised():
    F = _field(lam=0.1)
    u, rep = pcg_solve(assemble_total(F), build_preconditioner(F.n, 0.1), assemble_rhs(F, 0.1, 1), 1e-12, max_iter=2)
    assert rep.iterations == 2 and not rep.converged
    assert rep.final_relative_residual > 1e-12


def test_residual_history_monotone():
    for seed in range(5):
        F = _field(L=4, m0=8, lam=0.1, seed=seed)
        _, rep = pcg_solve(assemble_total(F), build_preconditioner(F.n, 0.1), assemble_rhs(F, 0.1, 2), 1e-10)
        h = np.array(rep.residual_history)
        assert np.all(np.diff(h) <= 1e-14)


def test_deterministic_solution():
    F = _field(seed=5)
    A, P, f = assemble_total(F), build_preconditioner(F.n, 0.4), assemble_rhs(F, 0.4, 1)
    u1, _ = pcg_solve(A, P, f)
    u2, _ = pcg_solve(A, P, f)
    assert np.array_equal(u1, u2)


def test_generalized_eigs_lambda_one():
    n = 8
    mu = extreme_generalized_eigs(assemble_laplacian(n), build_preconditioner(n, 1.0))
    assert mu == pytest.approx((1.0, 1.0), abs=1e-12)


def test_generalized_eigs_dense_oracle():
    F = _field(L=2, m0=4, lam=0.3, seed=2)  # n = 8
    A = assemble_total(F).toarray()
    P = build_preconditioner(F.n, 0.3)
    B = P.matrix().toarray()
    # restrict both forms to the mean-zero subspace and solve the pencil directly
    Z = scipy.linalg.null_space(np.ones((1, F.n ** 2)))
    mu = scipy.linalg.eigh(Z.T @ A @ Z, Z.T @ B @ Z, eigvals_only=True)
    got = extreme_generalized_eigs(assemble_total(F), P)
    np.testing.assert_allclose(got, (mu[0], mu[-1]), atol=1e-10)


def test_generalized_eigs_lanczos_agrees_with_dense():
    F = _field(L=4, m0=4, lam=0.4, seed=6)  # n = 16
    P = build_preconditioner(F.n, 0.4)
    dense = extreme_generalized_eigs(assemble_total(F), P)
    lanczos = extreme_generalized_eigs(assemble_total(F), P, dense_limit=8)
    np.testing.assert_allclose(lanczos, dense, rtol=1e-6)


def test_condition_number_bounded_by_c_over_lambda():
    lam = 0.4
    for seed in range(3):
        F = _field(L=8, m0=4, lam=lam, seed=seed)  # n = 32
        mu_min, mu_max = extreme_generalized_eigs(assemble_total(F), build_preconditioner(F.n, lam))
        assert mu_min > 0
        assert mu_max / mu_min <= 4.0 / lam
        # spectral bounds of the pencil: 2 lam/(1+lam) <= mu <= 2/(1+lam)
        assert mu_min >= 2 * lam / (1 + lam) - 1e-10
        assert mu_max <= 2 / (1 + lam) + 1e-10
