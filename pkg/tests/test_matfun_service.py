from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.sparse as sp

from splitbench.services.cases_service import case1_problem, custom_problem
from splitbench.services.matfun_service import (
    KrylovConvergenceError,
    MatfunConfig,
    arnoldi,
    dense_expm,
    dense_phi1,
    expm_action,
    matrix_function_action,
    phi1_action,
)
from splitbench.services.model_service import modified_linear_parts, naive_heat_parts


def _laplacian(K: int) -> sp.csr_matrix:
    return naive_heat_parts(custom_problem(K=K, b1=0.0, b2=0.0), 0.0).A


def _operators(K: int):
    yield "heat", _laplacian(K)
    yield "modified-case1", modified_linear_parts(case1_problem(K=K), 0.0).A
    yield "modified-case2", modified_linear_parts(custom_problem(K=K, b1=1.0, b2=3.0), 0.0).A


# ---------------- dense ----------------

def test_dense_expm_examples():
    np.testing.assert_allclose(dense_expm(np.zeros((3, 3))), np.eye(3), atol=1e-15)
    np.testing.assert_allclose(dense_expm(np.diag([1.0, -2.0])), np.diag([math.e, math.exp(-2.0)]), rtol=1e-14)
    np.testing.assert_allclose(dense_expm([[0.0, 1.0], [0.0, 0.0]]), [[1.0, 1.0], [0.0, 1.0]], atol=1e-15)


def test_dense_phi1_examples():
    np.testing.assert_allclose(dense_phi1(np.zeros((3, 3))), np.eye(3), atol=1e-15)
    np.testing.assert_allclose(dense_phi1([[1.0]]), [[math.e - 1.0]], rtol=1e-14)
    np.testing.assert_allclose(dense_phi1([[0.0, 1.0], [0.0, 0.0]]), [[1.0, 0.5], [0.0, 1.0]], atol=1e-15)


@pytest.mark.parametrize("fun", [dense_expm, dense_phi1])
def test_dense_rejects_bad_matrices(fun):
    with pytest.raises(ValueError):
        fun(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        fun([[np.nan]])
    with pytest.raises(ValueError):
        fun([[np.inf, 0.0], [0.0, 1.0]])


def test_dense_semigroup_and_phi1_identity():
    for _, A in _operators(10):
        M = 1e-3 * A.toarray()
        E = dense_expm(M)
        np.testing.assert_allclose(E @ E, dense_expm(2.0 * M), rtol=0, atol=1e-11 * np.linalg.norm(E @ E))

        lhs = M @ dense_phi1(M)
        rhs = E - np.eye(10)
        assert np.linalg.norm(lhs - rhs) <= 1e-11 * np.linalg.norm(rhs)


# ---------------- Arnoldi ----------------

def test_arnoldi_invariant_seed_breaks_down():
    A = np.diag([1.0, 2.0, 3.0])
    fact = arnoldi(A, [1.0, 0.0, 0.0], 3)
    assert fact.breakdown
    assert fact.m_eff == 1
    np.testing.assert_allclose(fact.H, [[1.0]])

    fact = arnoldi(np.eye(4), np.ones(4), 4)
    assert fact.breakdown and fact.m_eff == 1
    np.testing.assert_allclose(fact.H, [[1.0]])


def test_arnoldi_eigenvector_seed():
    K = 5
    A = _laplacian(K)
    x = np.sin(np.pi * np.arange(1, K + 1) / (K + 1))
    lam = -2.0 * (K + 1) ** 2 * (1.0 - math.cos(math.pi / (K + 1)))
    fact = arnoldi(A, x, K)
    assert fact.breakdown and fact.m_eff == 1
    assert fact.H[0, 0] == pytest.approx(lam, rel=1e-12)


def test_arnoldi_relations(rng):
    n, m = 50, 20
    A = sp.diags(
        [rng.standard_normal(n - 1), rng.standard_normal(n), rng.standard_normal(n - 1)],
        [-1, 0, 1],
        format="csr",
    )
    seed = rng.standard_normal(n)
    fact = arnoldi(A, seed, m)

    assert fact.m_eff == m and not fact.breakdown
    V, H = fact.V, fact.H
    np.testing.assert_allclose(V.T @ V, np.eye(m), atol=1e-10)
    AV = A @ V
    assert np.max(np.abs(V.T @ AV - H)) <= 1e-8 * np.max(np.abs(AV))
    np.testing.assert_allclose(V[:, 0], seed / np.linalg.norm(seed), rtol=1e-14)
    assert fact.beta == pytest.approx(np.linalg.norm(seed))
    assert np.all(np.tril(H, -2) == 0.0)


def test_arnoldi_accepts_callable():
    A = _laplacian(8)
    x = np.arange(1.0, 9.0)
    by_matrix = arnoldi(A, x, 4)
    by_callable = arnoldi(lambda v: A @ v, x, 4)
    np.testing.assert_array_equal(by_matrix.H, by_callable.H)


def test_arnoldi_rejects_zero_seed():
    with pytest.raises(ValueError):
        arnoldi(np.eye(3), np.zeros(3), 2)


# ---------------- Krylov actions ----------------

def test_actions_of_zero_vector():
    A = _laplacian(7)
    np.testing.assert_array_equal(expm_action(A, 0.1, np.zeros(7)), np.zeros(7))
    np.testing.assert_array_equal(phi1_action(A, 0.1, np.zeros(7)), np.zeros(7))


def test_scalar_examples():
    A = np.array([[-8.0]])
    assert expm_action(A, 0.1, [1.0])[0] == pytest.approx(math.exp(-0.8), rel=1e-13)
    assert expm_action(A, 0.1, [1.0])[0] == pytest.approx(0.449329, abs=1e-6)
    phi = (1.0 - math.exp(-0.8)) / 0.8
    assert phi1_action(A, 0.1, [1.0])[0] == pytest.approx(phi, rel=1e-13)
    assert phi1_action(A, 0.1, [1.0])[0] == pytest.approx(0.688339, abs=1e-6)


@pytest.mark.parametrize("K", [1, 10, 50, 100])
def test_krylov_matches_dense(K, rng):
    t = 0.01
    for name, A in _operators(K):
        x = rng.uniform(0.0, 1.0, K)
        M = t * A.toarray()
        want_exp = dense_expm(M) @ x
        want_phi = dense_phi1(M) @ x

        got_exp = expm_action(A, t, x, m_max=K)
        got_phi = phi1_action(A, t, x, m_max=K)
        assert np.linalg.norm(got_exp - want_exp) <= 1e-10 * np.linalg.norm(want_exp), name
        assert np.linalg.norm(got_phi - want_phi) <= 1e-10 * np.linalg.norm(want_phi), name


def test_krylov_exact_on_invariant_subspace():
    A = np.diag([-1.0, -2.0, -3.0, -4.0, -5.0, -6.0])
    x = np.array([1.0, 1.0, 0.0, 0.0, 0.0, 0.0])
    want = dense_expm(0.5 * A) @ x
    np.testing.assert_allclose(expm_action(A, 0.5, x, m_max=6), want, atol=1e-12)


def test_krylov_convergence_failure():
    A = _laplacian(100)
    with pytest.raises(KrylovConvergenceError) as info:
        expm_action(A, 1.0, np.ones(100), m_max=5)
    assert info.value.m == 5
    assert info.value.estimate > 1e-12


def test_krylov_rejects_nonfinite_input():
    with pytest.raises(ValueError):
        expm_action(np.eye(2), float("nan"), [1.0, 0.0])
    with pytest.raises(ValueError):
        phi1_action(np.eye(2), 0.1, [np.inf, 0.0])


# ---------------- dispatch ----------------

def test_matfun_config_validation():
    assert MatfunConfig().krylov_dim(199) == 30
    assert MatfunConfig().krylov_dim(7) == 7
    assert MatfunConfig(m_max=50).krylov_dim(199) == 50
    with pytest.raises(ValueError):
        MatfunConfig(method="pade")
    with pytest.raises(ValueError):
        MatfunConfig(m_max=0)
    with pytest.raises(ValueError):
        MatfunConfig(tol=0.0)


def test_dispatch_falls_back_to_dense():
    A = _laplacian(100)
    x = np.ones(100)
    want = dense_expm(A.toarray()) @ x

    got = matrix_function_action("expm", A, 1.0, x, MatfunConfig(m_max=5))
    np.testing.assert_allclose(got, want, atol=1e-14)

    with pytest.raises(KrylovConvergenceError):
        matrix_function_action("expm", A, 1.0, x, MatfunConfig(m_max=5, dense_cutoff=10))


def test_dispatch_dense_method_matches_krylov(rng):
    A = modified_linear_parts(custom_problem(K=20, b1=1.0, b2=3.0), 0.0).A
    x = rng.standard_normal(20)
    dense = matrix_function_action("phi1", A, 0.01, x, MatfunConfig(method="dense"))
    krylov = matrix_function_action("phi1", A, 0.01, x, MatfunConfig(m_max=20))
    np.testing.assert_allclose(krylov, dense, rtol=1e-9, atol=1e-11)


def test_dispatch_rejects_unknown_function():
    with pytest.raises(ValueError):
        matrix_function_action("log", np.eye(2), 1.0, [1.0, 0.0], MatfunConfig())
