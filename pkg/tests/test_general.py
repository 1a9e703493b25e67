import json

import numpy as np
import pytest

from matconvex.detector import construct_witness
from matconvex.general import (
    ApproxEigenPair,
    approximate_eigen_sequence,
    compress,
    compression_error_bound,
    model_witness,
    run_chain,
    stability_chain,
)
from matconvex.linalg import eigh, hermitian_with_spectrum, operator_norm, rank_one, spectrum
from matconvex.scalar import FunctionSpec

POW25 = FunctionSpec.power(2.5)


def exact_pair(A, i, j):
    e = eigh(A)
    return ApproxEigenPair.from_vectors(A, e.vectors[:, i], e.vectors[:, j], e.eigenvalues[i], e.eigenvalues[j])


def noisy_pair(A, i, j, eps, rng):
    """Exact eigenvectors plus unrestricted noise, Gram-Schmidt re-orthonormalized."""
    e = eigh(A)
    n = A.shape[0]
    u = e.vectors[:, i] + eps * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    u /= np.linalg.norm(u)
    v = e.vectors[:, j] + eps * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    v -= np.vdot(u, v) * u
    v /= np.linalg.norm(v)
    return ApproxEigenPair.from_vectors(A, u, v, e.eigenvalues[i], e.eigenvalues[j])


class TestCompress:
    def test_reducing_subspace(self):
        A = np.diag([1.0, 4.0, 9.0])
        e = np.eye(3)
        c = compress(A, ApproxEigenPair.from_vectors(A, e[0], e[1], 1.0, 4.0))
        np.testing.assert_allclose(c.psi, A, atol=1e-15)
        np.testing.assert_allclose(c.projector_complement, np.diag([0, 0, 1]), atol=1e-15)

    def test_two_by_two(self):
        A = np.diag([1.0, 4.0])
        e = np.eye(2)
        c = compress(A, ApproxEigenPair.from_vectors(A, e[0], e[1], 1.0, 4.0))
        np.testing.assert_allclose(c.psi, A, atol=1e-15)
        np.testing.assert_allclose(c.projector_complement, 0, atol=1e-15)

    @pytest.mark.parametrize("eps", [1e-1, 1e-3, 1e-6])
    def test_bound_with_unrestricted_noise(self, eps, rng):
        A = hermitian_with_spectrum(rng.uniform(-3, 3, 20), rng)
        for _ in range(10):
            i, j = rng.choice(20, 2, replace=False)
            pair = noisy_pair(A, i, j, eps, rng)
            assert operator_norm(A - compress(A, pair).psi) <= compression_error_bound(pair) * (1 + 1e-12) + 1e-14

    def test_invariants(self, rng):
        A = hermitian_with_spectrum(rng.uniform(0.5, 4, 12), rng)
        pair = noisy_pair(A, 0, 11, 1e-2, rng)
        c = compress(A, pair)
        E = c.projector_complement
        np.testing.assert_allclose(E @ E, E, atol=1e-13)
        np.testing.assert_allclose(E, E.conj().T, atol=1e-15)
        np.testing.assert_allclose(E @ pair.u, 0, atol=1e-13)
        np.testing.assert_allclose(E @ rank_one(pair.u, pair.u), 0, atol=1e-13)
        np.testing.assert_allclose(c.psi @ pair.u, pair.x * pair.u, atol=1e-13)
        np.testing.assert_allclose(c.psi @ pair.v, pair.y * pair.v, atol=1e-13)
        np.testing.assert_allclose(E @ c.psi @ E, E @ A @ E, atol=1e-13)

    def test_rejects_non_orthonormal(self):
        A = np.diag([1.0, 4.0])
        with pytest.raises(ValueError):
            compress(A, ApproxEigenPair.from_vectors(A, [1, 0], [1, 1], 1.0, 4.0))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            compress(np.eye(3), ApproxEigenPair.from_vectors(np.eye(2), [1, 0], [0, 1], 1.0, 1.0))


class TestErrorBound:
    def test_exact_is_zero(self, rng):
        A = hermitian_with_spectrum([1.0, 2.0, 3.0, 4.0], rng)
        pair = exact_pair(A, 0, 3)
        assert compression_error_bound(pair) <= 1e-14
        assert operator_norm(A - compress(A, pair).psi) <= 1e-14

    def test_arithmetic(self):
        pair = ApproxEigenPair(np.r_[1, 0], np.r_[0, 1], 0.0, 1.0, np.r_[0.01, 0], np.r_[0, 0.02])
        assert compression_error_bound(pair) == pytest.approx(0.06)


class TestSequence:
    def test_geometric_decay(self):
        A = np.diag([1.0, 4.0, 9.0, 9.0, 9.0, 9.0]).astype(complex)
        pairs = approximate_eigen_sequence(A, 1.0, 4.0, 5, seed=2)
        res = [np.linalg.norm(p.residual_u) for p in pairs]
        # direct oracle: residual of (e1 + eps n)/sqrt(1 + eps^2) is 8 eps / sqrt(1 + eps^2)
        for k, r in enumerate(res, start=1):
            eps = 0.5**k
            assert r == pytest.approx(8 * eps / np.sqrt(1 + eps**2), rel=1e-12)
        ratios = [b / a for a, b in zip(res, res[1:])]
        assert all(0.25 <= q <= 1.0 for q in ratios)

    def test_no_noise(self, rng):
        A = hermitian_with_spectrum([1.0, 2.0, 3.0, 5.0], rng)
        for p in approximate_eigen_sequence(A, 1.0, 5.0, 4, noise=0.0):
            assert np.linalg.norm(p.residual_u) <= 1e-13 and np.linalg.norm(p.residual_v) <= 1e-13

    def test_two_dimensional_is_exact(self):
        A = np.diag([1.0, 4.0])
        for p in approximate_eigen_sequence(A, 1.0, 4.0, 3):
            assert abs(abs(p.u[0]) - 1) <= 1e-15 and abs(abs(p.v[1]) - 1) <= 1e-15

    def test_orthonormal(self, rng):
        A = hermitian_with_spectrum(rng.uniform(0.5, 4, 20), rng)
        lam = spectrum(A)
        for p in approximate_eigen_sequence(A, lam[0], lam[-1], 10, seed=5):
            assert p.orthonormality_error() <= 1e-12

    def test_not_eigenvalue(self):
        with pytest.raises(ValueError):
            approximate_eigen_sequence(np.diag([1.0, 4.0]), 1.0, 3.0, 2)

    def test_lipschitz_decay_of_function(self, rng):
        A = hermitian_with_spectrum(rng.uniform(0.5, 4, 15), rng)
        lam = spectrum(A)
        pairs = approximate_eigen_sequence(A, lam[0], lam[-1], 12, seed=1)
        from matconvex.linalg import apply_function
        fA = apply_function(POW25, A)
        d0 = [operator_norm(apply_function(POW25, compress(A, p).psi) - fA) for p in pairs]
        assert all(b <= a for a, b in zip(d0, d0[1:]))
        assert all(b >= a / 4 for a, b in zip(d0[2:], d0[3:]))


class TestStabilityChain:
    def test_exact_eigenvectors(self, rng):
        A = hermitian_with_spectrum([0.8, 1.5, 2.2, 3.6], rng)
        pair = exact_pair(A, 0, 3)
        w = model_witness(POW25, pair.x, pair.y)
        rep = stability_chain(POW25, A, pair, w)
        assert rep.verdict == "transferred"
        assert rep.d0 <= 1e-13 and rep.dplus <= 1e-13 and rep.dminus <= 1e-13
        assert rep.form_at_A == pytest.approx(-w.delta, rel=1e-10)

    def test_small_residuals_transfer(self, rng):
        A = hermitian_with_spectrum(rng.uniform(0.5, 4, 10), rng)
        run = run_chain(POW25, A, 30, seed=4)
        rep = run.steps[-1]
        assert rep.transferred and rep.form_at_A < -rep.delta / 2 and rep.min_eigenvalue_at_A < 0

    def test_large_residuals_guarded(self, rng):
        A = hermitian_with_spectrum(rng.uniform(0.5, 4, 10), rng)
        run = run_chain(POW25, A, 2, seed=4)
        assert run.steps[0].verdict == "n too small"

    def test_witness_built_on_psi_matches(self, rng):
        A = hermitian_with_spectrum(rng.uniform(0.5, 4, 8), rng)
        lam = spectrum(A)
        pair = approximate_eigen_sequence(A, lam[0], lam[-1], 20, seed=0)[-1]
        psi = compress(A, pair).psi
        w = construct_witness(POW25, psi, eigenpair=(pair.x, pair.y, pair.u, pair.v))
        rep = stability_chain(POW25, A, pair, w)
        assert rep.form_at_psi == pytest.approx(-w.delta, rel=1e-9)

    def test_mismatched_witness_rejected(self, rng):
        A = hermitian_with_spectrum([1.0, 2.0, 3.0], rng)
        pair = exact_pair(A, 0, 2)
        wrong = model_witness(POW25, 1.0, 2.0)
        with pytest.raises(ValueError):
            stability_chain(POW25, A, pair, wrong)

    def test_json(self, rng):
        A = hermitian_with_spectrum(rng.uniform(0.5, 4, 6), rng)
        doc = run_chain(POW25, A, 20, seed=0).to_json()
        json.dumps(doc)
        assert doc["transferred_at"] is not None
        assert set(doc["steps"][0]) >= {"delta", "d0", "dplus", "dminus", "form_at_A", "verdict"}
