import json
import math

import numpy as np
import pytest

from matconvex.detector import (
    MAX_HALVINGS,
    check_local_convexity,
    construct_witness,
    default_spectrum_window,
    hypothesis_window,
    midpoint_difference,
    verify_theorem,
    verify_witness,
)
from matconvex.errors import CentralMatrixError, DomainError, HypothesisError
from matconvex.linalg import eigh, hermitian_with_spectrum, random_unitary, spectrum
from matconvex.scalar import REAL_LINE, FunctionSpec, Interval, hh_gap_formula

POW25 = FunctionSpec.power(2.5)
SQUARE = FunctionSpec.polynomial([0, 0, 1])
POS = Interval(0, math.inf)


class TestConstructWitness:
    def test_diag_one_four(self):
        A = np.diag([1.0, 4.0])
        w = construct_witness(POW25, A, POS)
        np.testing.assert_allclose(np.abs(w.B), np.ones((2, 2)), atol=1e-15)
        np.testing.assert_allclose(np.abs(w.w), [1, 1], atol=1e-15)
        assert (w.x, w.y) == (1.0, 4.0)
        assert w.gap == pytest.approx(-5 / 12, abs=1e-14)
        assert w.second_derivative_form == pytest.approx(-5 / 12, rel=1e-12)
        assert w.t0 > 0 and w.delta > 0
        check = verify_witness(POW25, A, w, POS)
        assert check.valid
        assert check.form == pytest.approx(-w.delta, rel=1e-12)

    def test_central_rejected(self):
        with pytest.raises(CentralMatrixError):
            construct_witness(POW25, 3 * np.eye(2), POS)

    def test_square_rejected(self):
        with pytest.raises(HypothesisError):
            construct_witness(SQUARE, np.diag([1.0, 4.0]), REAL_LINE)

    def test_spectrum_outside(self):
        with pytest.raises(DomainError):
            construct_witness(POW25, np.diag([-1.0, 4.0]), POS)

    def test_interval_must_fit_domain(self):
        with pytest.raises(DomainError):
            construct_witness(POW25, np.diag([1.0, 4.0]), REAL_LINE)

    def test_invariants_on_random_inputs(self, rng):
        for n in range(2, 9):
            A = hermitian_with_spectrum(rng.uniform(0.5, 4, n), rng)
            w = construct_witness(POW25, A, POS)
            assert abs(np.linalg.norm(w.u) - 1) <= 1e-12 and abs(np.linalg.norm(w.v) - 1) <= 1e-12
            assert abs(np.vdot(w.u, w.v)) <= 1e-12
            assert w.second_derivative_form == pytest.approx(hh_gap_formula(POW25, w.x, w.y), rel=1e-8)
            assert w.halvings <= MAX_HALVINGS
            check = verify_witness(POW25, A, w, POS)
            assert check.valid
            # Rayleigh bound: ||w||^2 = 2
            assert check.min_eigenvalue <= -w.delta / 2 + 1e-14

    def test_unitary_covariance(self, rng):
        A = hermitian_with_spectrum([0.7, 1.9, 3.2, 3.9], rng)
        V = random_unitary(4, rng)
        w1 = construct_witness(POW25, A, POS)
        w2 = construct_witness(POW25, V @ A @ V.conj().T, POS)
        assert w2.delta == pytest.approx(w1.delta, rel=1e-8)
        assert w2.t0 == pytest.approx(w1.t0, rel=1e-12)

    def test_bounded_interval_keeps_spectra_inside(self):
        I = Interval(0.8, 4.2)
        A = np.diag([1.0, 2.0, 4.0])
        w = construct_witness(POW25, A, I)
        for sign in (1, -1):
            lam = spectrum(A + sign * w.t0 * w.B)
            assert I.contains(lam)

    def test_explicit_eigenpair(self):
        A = np.diag([1.0, 2.0, 4.0])
        e = np.eye(3)
        w = construct_witness(POW25, A, POS, eigenpair=(1.0, 2.0, e[0], e[1]))
        assert (w.x, w.y) == (1.0, 2.0)
        assert verify_witness(POW25, A, w, POS).valid

    def test_json(self):
        doc = construct_witness(POW25, np.diag([1.0, 4.0]), POS).to_json()
        json.dumps(doc)
        assert set(doc) >= {"t0", "delta", "x", "y", "B", "w"}


class TestCheckLocalConvexity:
    def test_central(self):
        rep = check_local_convexity(POW25, 2 * np.eye(3), POS, 500, seed=1)
        assert rep.central and rep.locally_convex and rep.witness is None
        assert rep.verdict == "locally-convex"
        assert rep.trials_run == 500
        assert rep.min_midpoint_eigenvalue >= -rep.psd_tolerance

    def test_noncentral(self):
        rep = check_local_convexity(POW25, np.diag([1.0, 4.0]), POS)
        assert not rep.central and not rep.locally_convex
        assert rep.witness is not None and rep.verdict == "not-locally-convex"

    def test_square_never_violated(self):
        rep = check_local_convexity(SQUARE, np.diag([1.0, 4.0]), REAL_LINE, 500, seed=3)
        assert rep.locally_convex and rep.witness is None
        assert rep.verdict == "inconclusive-hypothesis"

    def test_concave_function_at_central_point_is_caught(self):
        neg = FunctionSpec.power(2.5, negate=True)
        rep = check_local_convexity(neg, 2 * np.eye(2), POS, 20, seed=0)
        assert rep.verdict == "inconclusive-hypothesis"
        assert not rep.locally_convex and rep.witness is not None
        D = midpoint_difference(neg, 2 * np.eye(2), rep.witness.B)
        assert spectrum(D)[0] == pytest.approx(-rep.witness.delta, rel=1e-10)

    def test_deterministic(self):
        a = check_local_convexity(POW25, 1.5 * np.eye(4), POS, 50, seed=9)
        b = check_local_convexity(POW25, 1.5 * np.eye(4), POS, 50, seed=9)
        assert json.dumps(a.to_json()) == json.dumps(b.to_json())

    def test_spectrum_outside(self):
        with pytest.raises(DomainError):
            check_local_convexity(POW25, np.diag([-1.0, 1.0]), POS)

    def test_report_invariants(self, rng):
        for n in (2, 3):
            for A in (1.2 * np.eye(n), hermitian_with_spectrum(rng.uniform(0.5, 4, n), rng)):
                rep = check_local_convexity(POW25, A, POS, 20, seed=n)
                if rep.central:
                    assert rep.witness is None
                if not rep.locally_convex:
                    assert rep.witness is not None


class TestWindows:
    def test_hypothesis_window_inside_interval(self):
        w = hypothesis_window([1.0, 4.0], POS)
        assert POS.contains_interval(w) and w.lo > 0
        assert w.lo < 1.0 and w.hi > 4.0

    @pytest.mark.parametrize(
        "I, expected",
        [(POS, Interval(0.5, 4)), (Interval(0, 10), Interval(0.5, 4)), (Interval(1, 2), Interval(1.1, 1.9))],
    )
    def test_default_spectrum_window(self, I, expected):
        w = default_spectrum_window(I)
        assert w.lo == pytest.approx(expected.lo) and w.hi == pytest.approx(expected.hi)


class TestVerifyTheorem:
    def test_no_disagreements(self):
        s = verify_theorem(POW25, POS, [2, 3, 4], 5, seed=42, n_samples=20)
        doc = s.to_json()
        assert doc["disagreements"] == []
        assert doc["checked"] == 30 and doc["agreements"] == 30
        assert doc["witness_stats"]["count"] == 15

    def test_p29(self):
        s = verify_theorem(FunctionSpec.power(2.9), POS, [2, 3], 25, seed=7, n_samples=20)
        assert not s.disagreements

    def test_exp_refused(self):
        with pytest.raises(HypothesisError):
            verify_theorem(FunctionSpec.exponential(), Interval(0, 10), [2], 10, seed=1)

    def test_thread_count_does_not_matter(self):
        a = verify_theorem(POW25, POS, [2, 5], 4, seed=3, n_samples=10, workers=1)
        b = verify_theorem(POW25, POS, [2, 5], 4, seed=3, n_samples=10, workers=3)
        assert json.dumps(a.to_json()) == json.dumps(b.to_json())
