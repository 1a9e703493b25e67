"""
Centrality detection through local (midpoint) convexity.

For f convex with strictly concave f'', a Hermitian A is a multiple of the
identity exactly when f(A) <= (f(A + B) + f(A - B)) / 2 for every admissible
Hermitian B. For a non-central A the violation is constructive: with unit
eigenvectors u, v for two distinct eigenvalues x, y, the direction
B = (u + v)(u + v)* and test vector w = u - v give

    <(f(A + tB) - 2 f(A) + f(A - tB)) w, w> ~ 2 g(x, y) t**2 < 0

for small t, where g is the Hermite-Hadamard gap.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import CentralMatrixError, DomainError, HypothesisError, WitnessSearchError
from .frechet import frechet_2, quadratic_form
from .linalg import (
    DEFAULT_CENTRAL_TOL,
    apply_function,
    eigh,
    hermitian,
    hermitian_with_spectrum,
    is_central,
    matrix_to_json,
    operator_norm,
    random_hermitian,
    rank_one,
    spectrum,
    spectrum_in_interval,
    vector_to_json,
)
from .scalar import FunctionSpec, HypothesisReport, Interval, check_hypothesis, hh_gap_formula

MAX_HALVINGS = 60
PSD_RTOL = 1e-10
WITNESS_RTOL = 1e-12
DEFAULT_SPECTRUM_WINDOW = Interval(0.5, 4.0)


@dataclass(frozen=True)
class ConvexityWitness:
    """Explicit failure of midpoint convexity at A.

    ``<(f(A + t0 B) - 2 f(A) + f(A - t0 B)) w, w> = -delta < 0``. The
    eigenpair fields are set for witnesses built from two eigenvectors and
    left as ``None`` for witnesses found by random sampling.
    """

    B: np.ndarray
    t0: float
    w: np.ndarray
    delta: float
    x: Optional[float] = None
    y: Optional[float] = None
    u: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    second_derivative_form: Optional[float] = None
    gap: Optional[float] = None
    halvings: int = 0

    def to_json(self) -> dict:
        return {
            "t0": self.t0,
            "delta": self.delta,
            "x": self.x,
            "y": self.y,
            "B": matrix_to_json(self.B),
            "w": vector_to_json(self.w),
            "second_derivative_form": self.second_derivative_form,
            "gap": self.gap,
            "halvings": self.halvings,
        }


@dataclass(frozen=True)
class WitnessCheck:
    form: float
    min_eigenvalue: float
    spectra_inside: bool
    orthonormal: bool

    @property
    def valid(self) -> bool:
        return self.form < 0 and self.spectra_inside and self.orthonormal


@dataclass(frozen=True)
class ConvexityReport:
    """Verdict of :func:`check_local_convexity`.

    ``verdict`` is ``"locally-convex"``, ``"not-locally-convex"`` or
    ``"inconclusive-hypothesis"``. In the inconclusive case the sampling
    result is still reported in ``locally_convex``.
    """

    central: bool
    locally_convex: bool
    verdict: str
    witness: Optional[ConvexityWitness]
    trials_run: int
    hypothesis: HypothesisReport
    min_midpoint_eigenvalue: Optional[float] = None
    psd_tolerance: Optional[float] = None

    def to_json(self) -> dict:
        return {
            "report": "check",
            "central": self.central,
            "locally_convex": self.locally_convex,
            "verdict": self.verdict,
            "witness": self.witness.to_json() if self.witness is not None else None,
            "trials": self.trials_run,
            "hypothesis": self.hypothesis.to_json(),
            "min_midpoint_eigenvalue": self.min_midpoint_eigenvalue,
            "psd_tolerance": self.psd_tolerance,
        }


def _interval_for(spec: FunctionSpec, interval: Interval | None) -> Interval:
    interval = interval if interval is not None else spec.domain
    if not spec.domain.contains_interval(interval):
        raise DomainError(f"interval {interval} is not inside the domain {spec.domain} of {spec.label()}")
    return interval


def perturbation_reach(lam, interval: Interval) -> float:
    """Distance from the spectrum to the ends of ``interval``, capped at 1 + ||A|| when unbounded."""
    lam = np.asarray(lam, dtype=float)
    return min(interval.distance_to_boundary(lam), 1.0 + float(np.max(np.abs(lam))))


def hypothesis_window(lam, interval: Interval) -> Interval:
    """Spectral hull of A widened by half the reach; contains sigma(A +- B) for ||B|| <= reach / 2."""
    r = 0.5 * perturbation_reach(lam, interval)
    return Interval(float(np.min(lam)) - r, float(np.max(lam)) + r)


def midpoint_difference(spec: FunctionSpec, A, B, FA=None) -> np.ndarray:
    """f(A + B) - 2 f(A) + f(A - B); PSD everywhere iff midpoint convexity holds at A."""
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    FA = apply_function(spec, A) if FA is None else FA
    return apply_function(spec, A + B) - 2.0 * FA + apply_function(spec, A - B)


def construct_witness(
    spec: FunctionSpec,
    A,
    interval: Interval | None = None,
    *,
    tol_central: float = DEFAULT_CENTRAL_TOL,
    grid_points: int = 64,
    eigenpair: tuple | None = None,
    max_halvings: int = MAX_HALVINGS,
) -> ConvexityWitness:
    """Build (B, t0, w, delta) certifying that f is not locally convex at a non-central A.

    The eigenvalues used are the extreme ones unless ``eigenpair`` =
    ``(x, y, u, v)`` supplies orthonormal eigenvectors explicitly.
    """
    interval = _interval_for(spec, interval)
    A = hermitian(A)
    eig = eigh(A)
    lam = eig.eigenvalues
    if not spectrum_in_interval(A, interval, eig=eig):
        raise DomainError(f"spectrum of A is not inside {interval}")
    if eigenpair is None:
        if is_central(A, tol_central):
            raise CentralMatrixError("A is central (a multiple of the identity); f is locally convex there")
        x, y = float(lam[0]), float(lam[-1])
        u, v = eig.vectors[:, 0], eig.vectors[:, -1]
    else:
        x, y, u, v = eigenpair
        x, y = float(x), float(y)
        u = np.asarray(u, dtype=complex)
        v = np.asarray(v, dtype=complex)
        if x == y:
            raise CentralMatrixError("the eigenpair needs two distinct eigenvalues")

    hyp = check_hypothesis(spec, hypothesis_window(lam, interval), grid_points)
    if not hyp.passed:
        raise HypothesisError(
            f"{spec.label()} fails the hypothesis on {hyp.window}: convex={hyp.is_convex}, "
            f"f'' strictly concave={hyp.second_derivative_strictly_concave}"
        )

    s = u + v
    B = rank_one(s, s)
    w = u - v
    norm_b = float(np.vdot(s, s).real)
    second_form = quadratic_form(frechet_2(spec, A, B, eig).matrix, w)
    gap = hh_gap_formula(spec, x, y)

    FA = apply_function(spec, A, eig)
    floor = WITNESS_RTOL * (1.0 + operator_norm(FA)) * float(np.vdot(w, w).real)
    t = perturbation_reach(lam, interval) / (2.0 * norm_b)
    for k in range(max_halvings + 1):
        Ap, Am = A + t * B, A - t * B
        if spectrum_in_interval(Ap, interval) and spectrum_in_interval(Am, interval):
            form = quadratic_form(apply_function(spec, Ap) - 2.0 * FA + apply_function(spec, Am), w)
            if form < -floor:
                return ConvexityWitness(B, t, w, -form, x, y, u, v, second_form, gap, k)
        t *= 0.5
    raise WitnessSearchError(f"no violating step found after {max_halvings} halvings")


def verify_witness(spec: FunctionSpec, A, witness: ConvexityWitness, interval: Interval | None = None) -> WitnessCheck:
    """Re-check a witness through the functional calculus alone."""
    interval = _interval_for(spec, interval)
    A = np.asarray(A, dtype=complex)
    Ap, Am = A + witness.t0 * witness.B, A - witness.t0 * witness.B
    inside = spectrum_in_interval(Ap, interval) and spectrum_in_interval(Am, interval)
    D = apply_function(spec, Ap) - 2.0 * apply_function(spec, A) + apply_function(spec, Am)
    if witness.u is not None:
        u, v = witness.u, witness.v
        ortho = (
            abs(np.linalg.norm(u) - 1.0) <= 1e-12
            and abs(np.linalg.norm(v) - 1.0) <= 1e-12
            and abs(np.vdot(u, v)) <= 1e-12
        )
    else:
        ortho = True
    return WitnessCheck(quadratic_form(D, witness.w), float(spectrum(D)[0]), inside, bool(ortho))


def _sampled_witness(B, D, t0=1.0) -> ConvexityWitness:
    eig = eigh(D)
    w = eig.vectors[:, 0]
    return ConvexityWitness(np.asarray(B), t0, w, -float(eig.eigenvalues[0]))


def check_local_convexity(
    spec: FunctionSpec,
    A,
    interval: Interval | None = None,
    n_samples: int = 200,
    seed: int = 0,
    *,
    tol_psd: float | None = None,
    tol_central: float = DEFAULT_CENTRAL_TOL,
    grid_points: int = 64,
) -> ConvexityReport:
    """Decide local convexity of f at A.

    Non-central A with an admissible f gets a constructed witness. Otherwise
    ``n_samples`` random Hermitian B with ||B|| = reach / 2 are tested for
    f(A + B) + f(A - B) - 2 f(A) >= -tol_psd.
    """
    interval = _interval_for(spec, interval)
    A = hermitian(A)
    eig = eigh(A)
    lam = eig.eigenvalues
    if not spectrum_in_interval(A, interval, eig=eig):
        raise DomainError(f"spectrum of A is not inside {interval}")
    central = is_central(A, tol_central)
    hyp = check_hypothesis(spec, hypothesis_window(lam, interval), grid_points)

    if not central and hyp.passed:
        witness = construct_witness(spec, A, interval, tol_central=tol_central, grid_points=grid_points)
        return ConvexityReport(False, False, "not-locally-convex", witness, 0, hyp)

    FA = apply_function(spec, A, eig)
    tol = PSD_RTOL * (1.0 + operator_norm(FA)) if tol_psd is None else tol_psd
    target = 0.5 * perturbation_reach(lam, interval)
    rng = np.random.default_rng(seed)
    n = A.shape[0]
    worst = math.inf
    witness = None
    trials = 0
    for _ in range(n_samples):
        G = random_hermitian(n, rng)
        norm_g = operator_norm(G)
        if norm_g == 0.0:
            continue
        B = G * (target / norm_g)
        D = midpoint_difference(spec, A, B, FA)
        trials += 1
        low = float(spectrum(D)[0])
        worst = min(worst, low)
        if low < -tol:
            witness = _sampled_witness(B, D)
            break
    convex = witness is None
    if not hyp.passed:
        verdict = "inconclusive-hypothesis"
    else:
        verdict = "locally-convex" if convex else "not-locally-convex"
    return ConvexityReport(
        central, convex, verdict, witness, trials, hyp, worst if trials else None, tol
    )


# -- randomized verification of the equivalence --------------------------------


def default_spectrum_window(interval: Interval) -> Interval:
    """[0.5, 4] when it fits inside the interval, otherwise an inner part of it."""
    if interval.contains([DEFAULT_SPECTRUM_WINDOW.lo, DEFAULT_SPECTRUM_WINDOW.hi]):
        return DEFAULT_SPECTRUM_WINDOW
    if interval.is_finite:
        width = interval.hi - interval.lo
        return Interval(interval.lo + 0.1 * width, interval.hi - 0.1 * width)
    if math.isfinite(interval.lo):
        return Interval(interval.lo + 0.5, interval.lo + 4.0)
    return Interval(interval.hi - 4.0, interval.hi - 0.5)


def _trial_rng(seed: int, dim: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, dim, trial]))


@dataclass(frozen=True)
class TrialRecord:
    dim: int
    trial: int
    kind: str
    agrees: bool
    reason: str = ""
    t0: Optional[float] = None
    delta: Optional[float] = None
    halvings: Optional[int] = None
    min_midpoint_eigenvalue: Optional[float] = None


def _run_trial(spec, interval, window, dim, trial, seed, n_samples, tol_psd, tol_central):
    rng = _trial_rng(seed, dim, trial)
    records = []

    lam = rng.uniform(window.lo, window.hi)
    A = lam * np.eye(dim)
    rep = check_local_convexity(
        spec, A, interval, n_samples, int(rng.integers(2**31)), tol_psd=tol_psd, tol_central=tol_central
    )
    ok = rep.central and rep.locally_convex and rep.witness is None
    records.append(
        TrialRecord(dim, trial, "central", ok, "" if ok else rep.verdict,
                    min_midpoint_eigenvalue=rep.min_midpoint_eigenvalue)
    )

    while True:
        eigenvalues = np.sort(rng.uniform(window.lo, window.hi, dim))
        if eigenvalues[-1] - eigenvalues[0] > 10 * tol_central * max(1.0, abs(eigenvalues[-1])):
            break
    A = hermitian_with_spectrum(eigenvalues, rng)
    try:
        rep = check_local_convexity(spec, A, interval, n_samples, int(rng.integers(2**31)),
                                    tol_psd=tol_psd, tol_central=tol_central)
    except (WitnessSearchError, HypothesisError) as exc:
        records.append(TrialRecord(dim, trial, "non-central", False, f"{type(exc).__name__}: {exc}"))
        return records
    ok = (not rep.central) and (rep.locally_convex is False) and rep.witness is not None
    reason = "" if ok else rep.verdict
    if ok:
        check = verify_witness(spec, A, rep.witness, interval)
        if not check.valid:
            ok, reason = False, f"witness failed re-verification (form {check.form:.3g})"
    w = rep.witness
    records.append(
        TrialRecord(dim, trial, "non-central", ok, reason,
                    t0=w.t0 if w else None, delta=w.delta if w else None, halvings=w.halvings if w else None)
    )
    return records


@dataclass(frozen=True)
class TheoremSummary:
    function: FunctionSpec
    interval: Interval
    window: Interval
    dims: tuple
    trials: int
    seed: int
    records: tuple = field(repr=False)

    @property
    def disagreements(self) -> list:
        return [r for r in self.records if not r.agrees]

    def to_json(self) -> dict:
        witnesses = [r for r in self.records if r.kind == "non-central" and r.t0 is not None]
        centrals = [r for r in self.records if r.kind == "central" and r.min_midpoint_eigenvalue is not None]
        return {
            "report": "verify",
            "function": self.function.to_json(),
            "interval": self.interval.to_json(),
            "window": self.window.to_json(),
            "dims": list(self.dims),
            "trials_per_dim": self.trials,
            "seed": self.seed,
            "checked": len(self.records),
            "central_checked": sum(r.kind == "central" for r in self.records),
            "noncentral_checked": sum(r.kind == "non-central" for r in self.records),
            "agreements": sum(r.agrees for r in self.records),
            "disagreements": [
                {"dim": r.dim, "trial": r.trial, "kind": r.kind, "reason": r.reason} for r in self.disagreements
            ],
            "witness_stats": {
                "count": len(witnesses),
                "min_t0": min((r.t0 for r in witnesses), default=None),
                "max_t0": max((r.t0 for r in witnesses), default=None),
                "min_delta": min((r.delta for r in witnesses), default=None),
                "max_halvings": max((r.halvings for r in witnesses), default=None),
            },
            "central_stats": {
                "count": len(centrals),
                "min_midpoint_eigenvalue": min((r.min_midpoint_eigenvalue for r in centrals), default=None),
            },
        }


def verify_theorem(
    spec: FunctionSpec,
    interval: Interval | None = None,
    dims=(2, 3, 4),
    trials: int = 25,
    seed: int = 0,
    *,
    n_samples: int = 50,
    window: Interval | None = None,
    workers: int = 1,
    tol_psd: float | None = None,
    tol_central: float = DEFAULT_CENTRAL_TOL,
    grid_points: int = 64,
) -> TheoremSummary:
    """For each dimension and trial, check one random central and one random
    non-central matrix and record whether the detector's verdict matches
    centrality. Each trial draws from its own stream seeded by
    (seed, dim, trial), so ``workers`` does not change the result.
    """
    interval = _interval_for(spec, interval)
    window = window if window is not None else default_spectrum_window(interval)
    if not interval.contains_interval(window):
        raise DomainError(f"sampling window {window} is not inside {interval}")
    hyp = check_hypothesis(spec, window, grid_points)
    if not hyp.passed:
        raise HypothesisError(
            f"{spec.label()} fails the hypothesis on {window}: convex={hyp.is_convex}, "
            f"f'' strictly concave={hyp.second_derivative_strictly_concave}"
        )
    jobs = [(n, k) for n in dims for k in range(trials)]

    def run(job):
        n, k = job
        return _run_trial(spec, interval, window, n, k, seed, n_samples, tol_psd, tol_central)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]
    records = tuple(r for batch in results for r in batch)
    return TheoremSummary(spec, interval, window, tuple(dims), trials, seed, records)
