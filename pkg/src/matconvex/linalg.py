"""
Hermitian matrices: eigendecomposition, functional calculus and the
semidefinite order.

Matrices are plain complex ``numpy`` arrays. :func:`hermitian` is the one
entry point that validates and symmetrizes input; everything downstream
assumes its output.
"""
from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConvergenceError, DomainError
from .scalar import FunctionSpec, Interval

ASYMMETRY_WARN_TOL = 1e-10
DEFAULT_CENTRAL_TOL = 1e-10
EIGENSOLVERS = ("lapack", "jacobi")


def hermitian(M, warn_tol: float = ASYMMETRY_WARN_TOL) -> np.ndarray:
    """Return (M + M*) / 2 as a read-only complex array, warning on large asymmetry."""
    M = np.array(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    asym = float(np.max(np.abs(M - M.conj().T))) if M.size else 0.0
    if asym > warn_tol * max(1.0, float(np.max(np.abs(M))) if M.size else 1.0):
        warnings.warn(f"input deviates from Hermitian by {asym:.3g}; symmetrizing", stacklevel=2)
    H = 0.5 * (M + M.conj().T)
    H.setflags(write=False)
    return H


@dataclass(frozen=True)
class EigenDecomposition:
    """Ascending eigenvalues and a unitary whose columns are the eigenvectors."""

    eigenvalues: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def reconstruct(self, values=None) -> np.ndarray:
        """U diag(values) U*, defaulting to the eigenvalues themselves."""
        lam = self.eigenvalues if values is None else np.asarray(values)
        U = self.vectors
        return (U * lam) @ U.conj().T


def _off_norm(A: np.ndarray) -> float:
    return float(np.linalg.norm(A - np.diag(np.diag(A))))


def jacobi_eigh(A, tol: float = 1e-13, max_sweeps: int = 100) -> EigenDecomposition:
    """Cyclic Jacobi eigensolver for complex Hermitian matrices.

    Each (p, q) step first removes the phase of A[p, q] with a diagonal
    unitary and then applies a real plane rotation, so the combined
    two-sided update is unitary. Stops once the off-diagonal Frobenius mass
    is at most ``tol * ||A||_F``.
    """
    A = np.array(A, dtype=complex)
    n = A.shape[0]
    V = np.eye(n, dtype=complex)
    fro = float(np.linalg.norm(A))
    target = tol * fro

    def sweep():
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                r = abs(apq)
                if r <= 1e-300 or r <= 1e-18 * fro:
                    continue
                phase = apq / r
                theta = (A[q, q].real - A[p, p].real) / (2.0 * r)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # J = diag(1, conj(phase)) @ [[c, s], [-s, c]] on the (p, q) plane.
                J = np.array([[c, s], [-s * phase.conjugate(), c * phase.conjugate()]])
                idx = [p, q]
                A[:, idx] = A[:, idx] @ J
                A[idx, :] = J.conj().T @ A[idx, :]
                A[p, q] = A[q, p] = 0.0
                A[p, p] = A[p, p].real
                A[q, q] = A[q, q].real
                V[:, idx] = V[:, idx] @ J

    for _ in range(max_sweeps):
        if _off_norm(A) <= target:
            # convergence is quadratic, one more sweep costs little and
            # drives the dropped off-diagonal mass to rounding level
            sweep()
            break
        sweep()
    else:
        if _off_norm(A) > target:
            raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")
    lam = np.diag(A).real
    order = np.argsort(lam, kind="stable")
    return EigenDecomposition(lam[order], V[:, order])


def eigh(A, method: str | None = None) -> EigenDecomposition:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    ``method`` is ``"lapack"`` (numpy, the default) or ``"jacobi"``; the
    environment variable ``MATCONVEX_EIGENSOLVER`` changes the default.
    """
    method = method or os.environ.get("MATCONVEX_EIGENSOLVER", "lapack")
    if method == "jacobi":
        return jacobi_eigh(A)
    if method != "lapack":
        raise ValueError(f"unknown eigensolver {method!r}; choose from {EIGENSOLVERS}")
    lam, U = np.linalg.eigh(np.asarray(A, dtype=complex))
    return EigenDecomposition(lam, U)


def spectrum(A, method: str | None = None) -> np.ndarray:
    method = method or os.environ.get("MATCONVEX_EIGENSOLVER", "lapack")
    if method == "lapack":
        return np.linalg.eigvalsh(np.asarray(A, dtype=complex))
    return eigh(A, method).eigenvalues


def spectrum_in_interval(A, interval: Interval, margin: float = 0.0, eig: EigenDecomposition | None = None) -> bool:
    """True iff lo + margin < lambda_min and lambda_max < hi - margin."""
    lam = eig.eigenvalues if eig is not None else spectrum(A)
    return interval.contains(lam, margin)


def apply_function(spec: FunctionSpec, A, eig: EigenDecomposition | None = None) -> np.ndarray:
    """f(A) = U diag(f(lambda)) U* by the spectral theorem."""
    eig = eig if eig is not None else eigh(A)
    if not spec.domain.contains(eig.eigenvalues):
        raise DomainError(
            f"spectrum [{eig.eigenvalues[0]:.6g}, {eig.eigenvalues[-1]:.6g}] "
            f"escapes the domain {spec.domain} of {spec.label()}"
        )
    F = eig.reconstruct(spec(eig.eigenvalues))
    return 0.5 * (F + F.conj().T)


def is_psd(A, tol: float = 1e-10) -> bool:
    return bool(spectrum(A)[0] >= -tol)


def is_central(A, tol: float = DEFAULT_CENTRAL_TOL) -> bool:
    """In the full matrix algebra the centre is the scalars: test the spectral spread."""
    lam = spectrum(A)
    return bool(lam[-1] - lam[0] <= tol * max(1.0, abs(lam[-1])))


def rank_one(u, v) -> np.ndarray:
    """The map z -> <z, v> u, i.e. the matrix u v*."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError(f"rank_one needs two vectors of equal length, got {u.shape} and {v.shape}")
    return np.outer(u, v.conj())


def operator_norm(A) -> float:
    lam = spectrum(A)
    return float(max(abs(lam[0]), abs(lam[-1]))) if len(lam) else 0.0


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary from the QR factorization of a complex Ginibre matrix."""
    Z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    Q, R = np.linalg.qr(Z)
    d = np.diag(R)
    return Q * (d / np.abs(d))


def random_hermitian(n: int, rng: np.random.Generator) -> np.ndarray:
    """Hermitized matrix with independent standard Gaussian real and imaginary parts."""
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (Z + Z.conj().T)


def hermitian_with_spectrum(eigenvalues, rng: np.random.Generator) -> np.ndarray:
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    U = random_unitary(len(eigenvalues), rng)
    H = (U * eigenvalues) @ U.conj().T
    return 0.5 * (H + H.conj().T)


def matrix_to_json(A) -> dict:
    A = np.asarray(A, dtype=complex)
    return {"n": int(A.shape[0]), "entries": [[[float(z.real), float(z.imag)] for z in row] for row in A]}


def vector_to_json(v) -> list:
    return [[float(z.real), float(z.imag)] for z in np.asarray(v, dtype=complex)]


def _complex_entry(e) -> complex:
    if isinstance(e, (list, tuple)):
        if len(e) != 2:
            raise ValueError(f"complex entry must be [re, im], got {e!r}")
        return complex(float(e[0]), float(e[1]))
    return complex(float(e))


def matrix_from_json(obj) -> np.ndarray:
    """Decode ``{"n": .., "entries": [[[re, im], ..], ..]}`` into a Hermitian array."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    entries = obj["entries"]
    n = int(obj.get("n", len(entries)))
    M = np.array([[_complex_entry(e) for e in row] for row in entries], dtype=complex)
    if M.shape != (n, n):
        raise ValueError(f"declared n={n} but entries have shape {M.shape}")
    return hermitian(M)


def load_matrix(path) -> np.ndarray:
    return matrix_from_json(json.loads(Path(path).read_text()))
