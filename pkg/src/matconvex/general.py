"""
Transfer of a 2x2 convexity violation to a large matrix through approximate
eigenvectors.

Given orthonormal u, v with small residuals A u - x u and A v - y v, the
compression

    psi = x u u* + y v v* + E A E,     E = I - u u* - v v*,

has span{u, v} as an exact reducing subspace and ||A - psi|| is at most
2 (||A u - x u|| + ||A v - y v||). Once f(psi), f(psi +- t0 B) are within
delta / 16 of f(A), f(A +- t0 B), the violation -delta seen at psi survives
at A as a form below -delta / 2.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .detector import ConvexityWitness, construct_witness
from .errors import DomainError
from .frechet import quadratic_form
from .linalg import apply_function, eigh, hermitian, operator_norm, rank_one, spectrum
from .scalar import FunctionSpec, Interval

ORTHO_TOL = 1e-12


@dataclass(frozen=True)
class ApproxEigenPair:
    u: np.ndarray
    v: np.ndarray
    x: float
    y: float
    residual_u: np.ndarray
    residual_v: np.ndarray

    @classmethod
    def from_vectors(cls, A, u, v, x: float, y: float) -> "ApproxEigenPair":
        A = np.asarray(A, dtype=complex)
        u = np.asarray(u, dtype=complex)
        v = np.asarray(v, dtype=complex)
        return cls(u, v, float(x), float(y), A @ u - x * u, A @ v - y * v)

    def orthonormality_error(self) -> float:
        return float(max(
            abs(np.linalg.norm(self.u) - 1.0),
            abs(np.linalg.norm(self.v) - 1.0),
            abs(np.vdot(self.u, self.v)),
        ))


@dataclass(frozen=True)
class CompressedOperator:
    psi: np.ndarray
    projector_complement: np.ndarray


def compress(A, pair: ApproxEigenPair) -> CompressedOperator:
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    if pair.u.shape != (n,) or pair.v.shape != (n,):
        raise ValueError(f"pair vectors do not match a {n}x{n} matrix")
    if pair.orthonormality_error() > ORTHO_TOL:
        raise ValueError(f"pair is not orthonormal (error {pair.orthonormality_error():.3g})")
    Pu = rank_one(pair.u, pair.u)
    Pv = rank_one(pair.v, pair.v)
    E = np.eye(n) - Pu - Pv
    E = 0.5 * (E + E.conj().T)
    psi = pair.x * Pu + pair.y * Pv + E @ A @ E
    return CompressedOperator(0.5 * (psi + psi.conj().T), E)


def compression_error_bound(pair: ApproxEigenPair) -> float:
    """2 (||residual_u|| + ||residual_v||), an upper bound for ||A - psi||."""
    return 2.0 * (float(np.linalg.norm(pair.residual_u)) + float(np.linalg.norm(pair.residual_v)))


def _eigen_index(lam, value, tol) -> int:
    i = int(np.argmin(np.abs(lam - value)))
    if abs(lam[i] - value) > tol * max(1.0, abs(value)):
        raise ValueError(f"{value} is not an eigenvalue (nearest {lam[i]})")
    return i


def approximate_eigen_sequence(
    A,
    x: float,
    y: float,
    n_steps: int,
    *,
    seed: int = 0,
    noise: float = 1.0,
    decay: float = 0.5,
    tol: float = 1e-8,
) -> list[ApproxEigenPair]:
    """Orthonormal approximate eigenvector pairs with geometrically shrinking error.

    Step k (1-based) mixes the exact eigenvectors with ``noise * decay**k`` of a
    fixed random direction from the orthogonal complement of their span. The
    two noise directions are orthogonal, so u and v stay exactly orthogonal.
    """
    A = hermitian(A)
    if x == y:
        raise ValueError("x and y must differ")
    eig = eigh(A)
    lam = eig.eigenvalues
    i, j = _eigen_index(lam, x, tol), _eigen_index(lam, y, tol)
    if i == j:
        raise ValueError("x and y resolve to the same eigenvector")
    u0, v0 = eig.vectors[:, i], eig.vectors[:, j]
    rest = [k for k in range(len(lam)) if k not in (i, j)]
    Q = eig.vectors[:, rest]

    rng = np.random.default_rng(seed)
    m = len(rest)
    nu = np.zeros_like(u0)
    nv = np.zeros_like(v0)
    if m >= 1:
        G = rng.standard_normal((m, min(m, 2))) + 1j * rng.standard_normal((m, min(m, 2)))
        dirs, _ = np.linalg.qr(G)
        nu = Q @ dirs[:, 0]
        if m >= 2:
            nv = Q @ dirs[:, 1]

    pairs = []
    for k in range(1, n_steps + 1):
        eps = noise * decay**k
        u = u0 + eps * nu
        u /= np.linalg.norm(u)
        v = v0 + eps * nv
        v = v - np.vdot(u, v) * u
        v /= np.linalg.norm(v)
        pairs.append(ApproxEigenPair.from_vectors(A, u, v, lam[i], lam[j]))
    return pairs


@dataclass(frozen=True)
class ChainReport:
    delta: float
    d0: Optional[float]
    dplus: Optional[float]
    dminus: Optional[float]
    form_at_A: Optional[float]
    form_at_psi: Optional[float]
    min_eigenvalue_at_A: Optional[float]
    compression_error: float
    compression_bound: float
    verdict: str

    @property
    def transferred(self) -> bool:
        return self.verdict == "transferred"

    def to_json(self) -> dict:
        return {
            "delta": self.delta,
            "d0": self.d0,
            "dplus": self.dplus,
            "dminus": self.dminus,
            "form_at_A": self.form_at_A,
            "form_at_psi": self.form_at_psi,
            "min_eigenvalue_at_A": self.min_eigenvalue_at_A,
            "compression_error": self.compression_error,
            "compression_bound": self.compression_bound,
            "verdict": self.verdict,
        }


def stability_chain(
    spec: FunctionSpec,
    A,
    pair: ApproxEigenPair,
    witness: ConvexityWitness,
    interval: Interval | None = None,
) -> ChainReport:
    """Check the delta/16 premise and, when it holds, the -delta/2 conclusion at A.

    B = (u + v)(u + v)* and w = u - v come from ``pair``; t0 and delta come from
    ``witness``, which must describe the 2x2 problem on span{u, v} (its form
    at psi is -delta for every pair, since that span reduces psi).
    """
    interval = interval if interval is not None else spec.domain
    A = np.asarray(A, dtype=complex)
    comp = compress(A, pair)
    psi = comp.psi
    s = pair.u + pair.v
    B = rank_one(s, s)
    w = pair.u - pair.v
    t0, delta = witness.t0, witness.delta
    bound = compression_error_bound(pair)
    err = operator_norm(A - psi)

    f_psi = apply_function(spec, psi)
    form_psi = quadratic_form(apply_function(spec, psi + t0 * B) - 2.0 * f_psi + apply_function(spec, psi - t0 * B), w)
    if abs(form_psi + delta) > 1e-8 * (1.0 + delta):
        raise ValueError(f"witness does not match the pair: form at psi {form_psi:.6g} vs -delta {-delta:.6g}")

    Ap, Am = A + t0 * B, A - t0 * B
    if not (interval.contains(spectrum(Ap)) and interval.contains(spectrum(Am))):
        return ChainReport(delta, None, None, None, None, form_psi, None, err, bound, "n too small")
    f_A, f_Ap, f_Am = apply_function(spec, A), apply_function(spec, Ap), apply_function(spec, Am)
    d0 = operator_norm(f_psi - f_A)
    dplus = operator_norm(apply_function(spec, psi + t0 * B) - f_Ap)
    dminus = operator_norm(apply_function(spec, psi - t0 * B) - f_Am)
    D = f_Ap - 2.0 * f_A + f_Am
    form_A = quadratic_form(D, w)
    low = float(spectrum(D)[0])

    if max(d0, dplus, dminus) < delta / 16.0:
        # |form_A - form_psi| <= (dplus + 2 d0 + dminus) ||w||^2 < 4 (delta/16) 2
        if not form_A < -delta / 2.0:
            raise RuntimeError(f"transfer failed: form at A {form_A:.6g} is not below -delta/2 = {-delta / 2:.6g}")
        verdict = "transferred"
    else:
        verdict = "n too small"
    return ChainReport(delta, d0, dplus, dminus, form_A, form_psi, low, err, bound, verdict)


def model_witness(spec: FunctionSpec, x: float, y: float, interval: Interval | None = None) -> ConvexityWitness:
    """Witness for diag(x, y); its t0 and delta are shared by every compression."""
    return construct_witness(spec, np.diag([float(x), float(y)]), interval)


@dataclass(frozen=True)
class ChainRun:
    x: float
    y: float
    witness: ConvexityWitness
    steps: tuple

    @property
    def transferred_at(self) -> Optional[int]:
        for k, rep in enumerate(self.steps, start=1):
            if rep.transferred:
                return k
        return None

    def to_json(self) -> dict:
        return {
            "report": "chain",
            "x": self.x,
            "y": self.y,
            "t0": self.witness.t0,
            "delta": self.witness.delta,
            "transferred_at": self.transferred_at,
            "steps": [dict(step=k, **rep.to_json()) for k, rep in enumerate(self.steps, start=1)],
        }


def run_chain(
    spec: FunctionSpec,
    A,
    n_steps: int = 30,
    *,
    interval: Interval | None = None,
    seed: int = 0,
    noise: float = 1.0,
    decay: float = 0.5,
) -> ChainRun:
    """Follow an approximate eigenvector sequence for the extreme eigenvalues of A."""
    A = hermitian(A)
    lam = spectrum(A)
    x, y = float(lam[0]), float(lam[-1])
    if not (interval or spec.domain).contains(lam):
        raise DomainError(f"spectrum of A is not inside {interval or spec.domain}")
    witness = model_witness(spec, x, y, interval)
    pairs = approximate_eigen_sequence(A, x, y, n_steps, seed=seed, noise=noise, decay=decay)
    steps = tuple(stability_chain(spec, A, p, witness, interval) for p in pairs)
    return ChainRun(x, y, witness, steps)
