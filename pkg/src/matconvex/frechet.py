"""
First and second Frechet derivatives of A -> f(A) along a Hermitian direction.

Both are computed in the eigenbasis of A with divided differences of f over
the eigenvalues (Daleckii-Krein for order one, its second-order analogue
for order two). Finite-difference quotients are provided as independent
cross-checks.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .linalg import EigenDecomposition, apply_function, eigh
from .scalar import FunctionSpec, divided_difference_1_array, divided_difference_2_array


@dataclass(frozen=True)
class DerivativeResult:
    matrix: np.ndarray
    eigenbasis_used: EigenDecomposition


def _eig_in_domain(spec: FunctionSpec, A, eig: EigenDecomposition | None) -> EigenDecomposition:
    eig = eig if eig is not None else eigh(A)
    if not spec.domain.contains(eig.eigenvalues):
        raise DomainError(f"spectrum of A escapes the domain {spec.domain} of {spec.label()}")
    return eig


def _to_eigenbasis(eig: EigenDecomposition, B) -> np.ndarray:
    U = eig.vectors
    return U.conj().T @ np.asarray(B, dtype=complex) @ U


def _from_eigenbasis(eig: EigenDecomposition, M) -> np.ndarray:
    U = eig.vectors
    out = U @ M @ U.conj().T
    return 0.5 * (out + out.conj().T)


def frechet_1(spec: FunctionSpec, A, B, eig: EigenDecomposition | None = None) -> DerivativeResult:
    """d/dt f(A + tB) at t = 0: the Loewner matrix f[l_i, l_j] times B in A's eigenbasis."""
    eig = _eig_in_domain(spec, A, eig)
    lam = eig.eigenvalues
    loewner = divided_difference_1_array(spec, lam[:, None], lam[None, :])
    Bt = _to_eigenbasis(eig, B)
    return DerivativeResult(_from_eigenbasis(eig, loewner * Bt), eig)


def frechet_2(spec: FunctionSpec, A, B, eig: EigenDecomposition | None = None) -> DerivativeResult:
    """d^2/dt^2 f(A + tB) at t = 0.

    Entry (i, j) in the eigenbasis is 2 * sum_k f[l_i, l_k, l_j] B_ik B_kj.
    """
    eig = _eig_in_domain(spec, A, eig)
    lam = eig.eigenvalues
    D = divided_difference_2_array(spec, lam[:, None, None], lam[None, :, None], lam[None, None, :])
    Bt = _to_eigenbasis(eig, B)
    M = 2.0 * np.einsum("ikj,ik,kj->ij", D, Bt, Bt)
    return DerivativeResult(_from_eigenbasis(eig, M), eig)


def first_difference_quotient(spec: FunctionSpec, A, B, t: float) -> np.ndarray:
    """(f(A + tB) - f(A - tB)) / (2t)."""
    if not t > 0:
        raise ValueError("step t must be positive")
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    return (apply_function(spec, A + t * B) - apply_function(spec, A - t * B)) / (2.0 * t)


def second_difference_quotient(spec: FunctionSpec, A, B, t: float) -> np.ndarray:
    """(f(A + tB) - 2 f(A) + f(A - tB)) / t**2."""
    if not t > 0:
        raise ValueError("step t must be positive")
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    mid = apply_function(spec, A + t * B) - 2.0 * apply_function(spec, A) + apply_function(spec, A - t * B)
    return mid / (t * t)


def default_step(A, B) -> float:
    """Finite-difference step 1e-4 (1 + ||A||) / (1 + ||B||), spectral norms."""
    na = float(np.linalg.norm(np.asarray(A, dtype=complex), 2))
    nb = float(np.linalg.norm(np.asarray(B, dtype=complex), 2))
    return 1e-4 * (1.0 + na) / (1.0 + nb)


def quadratic_form(M, w, check: bool = True) -> float:
    """Re <M w, w>; with ``check`` the imaginary part must be at rounding level."""
    M = np.asarray(M, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if M.ndim != 2 or M.shape[1] != w.shape[0] or M.shape[0] != M.shape[1]:
        raise ValueError(f"dimension mismatch: matrix {M.shape}, vector {w.shape}")
    value = np.vdot(w, M @ w)
    if check:
        bound = 1e-12 * max(float(np.max(np.abs(M))) * M.shape[0], 1e-300) * float(np.vdot(w, w).real)
        if abs(value.imag) > max(bound, 1e-300):
            raise ValueError(f"quadratic form has imaginary part {value.imag:.3g}; matrix is not Hermitian")
    return float(value.real)
