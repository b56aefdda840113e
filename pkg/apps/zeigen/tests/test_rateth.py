"""
Tests for Jacobians, extrapolated rates, shift estimation and classification.
"""
import math

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from apps.zeigen import bench, rateth
from apps.zeigen.exceptions import (
    DegenerateShiftError,
    NonUnitVectorError,
    RateDomainError,
    ResidualPreconditionError,
)
from apps.zeigen.iterate import random_start, sshopm
from apps.zeigen.models import Eigenpair, Sense, SolveConfig, Stability, StaticShift, Status
from apps.zeigen.symtensor import SymmetricTensor

from .factories import (
    EX1_START_08730,
    EX2_SADDLE,
    EX2_START_03633,
    EX2_START_M10954,
    example1,
    example2,
    random_tensor,
    seeds,
    unit,
)


def assert_same_roots(test, computed, expected, tol):
    """Match two multisets of complex numbers greedily by nearest neighbour."""
    remaining = list(computed)
    test.assertEqual(len(remaining), len(expected))
    for root in expected:
        distances = [abs(root - other) for other in remaining]
        nearest = int(np.argmin(distances))
        test.assertLessEqual(distances[nearest], tol)
        remaining.pop(nearest)


class AugmentedSpectrumTests(SimpleTestCase):
    """Test cases for the closed-form spectrum of the extrapolated Jacobian."""

    @settings(max_examples=100, deadline=None)
    @given(seeds, st.integers(min_value=1, max_value=8))
    def test_closed_form_roots_match_assembled_matrix(self, seed, n):
        """Test each eigenvalue mu of J against the two roots it generates in J_gamma."""
        rng = np.random.default_rng(seed)
        q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        mus = rng.uniform(0.05, 0.95, n)
        gamma = float(rng.uniform(-0.99, 0.0))
        jacobian = q @ np.diag(mus) @ q.T

        expected = [root for mu in mus for root in rateth.augmented_roots(float(mu), gamma)]
        computed = np.linalg.eigvals(rateth.augmented_jacobian(jacobian, gamma))
        assert_same_roots(self, computed, expected, tol=1e-9)

        rho = float(mus.max())
        self.assertAlmostEqual(rateth.augmented_spectral_radius(jacobian, gamma),
                               rateth.rho_gamma(rho, gamma), delta=1e-9)

    def test_roots_solve_the_quadratic(self):
        mu, gamma = 0.6, -0.4
        for root in rateth.augmented_roots(mu, gamma):
            self.assertLess(abs(root * root - (1 - gamma) * mu * root - gamma * mu), 1e-14)

    def test_zero_gamma_keeps_the_base_rate(self):
        for rho in (0.1, 0.5, 0.99):
            self.assertAlmostEqual(rateth.rho_gamma(rho, 0.0), rho, delta=1e-15)


class OptimalGammaTests(SimpleTestCase):
    """Test cases for the optimal extrapolation parameter."""

    def test_optimal_gamma_minimizes_the_rate(self):
        grid = np.linspace(-0.99, 0.0, 991)
        for rho in (0.05, 0.3, 0.6, 0.9, 0.99):
            optimal = rateth.gamma_opt(rho)
            self.assertTrue(-1.0 < optimal < 0.0)
            best = rateth.rho_gamma(rho, optimal)
            self.assertAlmostEqual(best, 1.0 - math.sqrt(1.0 - rho), delta=1e-7)
            self.assertAlmostEqual(rateth.rho_opt(rho), 1.0 - math.sqrt(1.0 - rho), delta=1e-15)
            for gamma in grid:
                self.assertLessEqual(best, rateth.rho_gamma(rho, float(gamma)) + 1e-7)

    def test_complex_branch_modulus(self):
        rho = 0.5
        gamma = rateth.gamma_opt(rho) - 0.2
        self.assertAlmostEqual(rateth.rho_gamma(rho, gamma), math.sqrt(-gamma * rho), delta=1e-15)

    def test_domain_errors(self):
        for rho in (0.0, 1.0, 1.5, -0.2):
            with self.assertRaises(RateDomainError):
                rateth.gamma_opt(rho)
        with self.assertRaises(RateDomainError):
            rateth.rho_gamma(0.5, -1.0)
        with self.assertRaises(RateDomainError):
            rateth.rho_gamma(0.5, 0.1)


class DynamicGammaTests(SimpleTestCase):

    def test_agrees_with_optimal_gamma_inside_the_unit_interval(self):
        for rho in (0.01, 0.25, 0.5, 0.75, 0.999):
            self.assertAlmostEqual(rateth.dynamic_gamma(rho), rateth.gamma_opt(rho), delta=1e-14)

    def test_real_part_guard_beyond_one(self):
        self.assertAlmostEqual(rateth.dynamic_gamma(1.5), -1.0 / 3.0, delta=1e-15)
        self.assertTrue(math.isfinite(rateth.dynamic_gamma(4.0)))

    def test_continuity_at_zero(self):
        self.assertEqual(rateth.dynamic_gamma(0.0), 0.0)
        self.assertAlmostEqual(rateth.dynamic_gamma(1e-6), 0.0, delta=1e-6)


class JacobianTests(SimpleTestCase):
    """Test cases for the Jacobian of the shifted fixed-point map."""

    def setUp(self):
        """Set up test data."""
        self.tensor = example1()
        self.pair, _ = sshopm(self.tensor, SolveConfig(StaticShift(1.0), x0=unit(EX1_START_08730)))

    def test_positive_semidefinite_at_stable_pair(self):
        jacobian = rateth.sshopm_jacobian(self.tensor, self.pair.lam, self.pair.x, 1.0)
        eigenvalues = np.linalg.eigvalsh(jacobian)

        np.testing.assert_allclose(jacobian, jacobian.T, atol=1e-15)
        self.assertGreaterEqual(eigenvalues.min(), -1e-10)
        self.assertLess(eigenvalues.max(), 1.0)
        np.testing.assert_allclose(jacobian @ self.pair.x, np.zeros(3), atol=1e-9)

    def test_degenerate_shift(self):
        with self.assertRaises(DegenerateShiftError):
            rateth.sshopm_jacobian(self.tensor, self.pair.lam, self.pair.x, -self.pair.lam)

    def test_non_unit_vector(self):
        with self.assertRaises(NonUnitVectorError):
            rateth.sshopm_jacobian(self.tensor, self.pair.lam, 2.0 * self.pair.x, 1.0)

    def test_rate_report_at_stable_pair(self):
        report = rateth.rate_report(self.tensor, self.pair, 1.0)

        self.assertTrue(0.0 < report.rho < 1.0)
        self.assertAlmostEqual(report.gamma_opt, rateth.gamma_opt(report.rho), delta=1e-15)
        self.assertAlmostEqual(report.rho_opt, 1.0 - math.sqrt(1.0 - report.rho), delta=1e-15)
        self.assertEqual(len(report.rho_gamma_curve), 100)
        gamma, rate = report.rho_gamma_curve[-1]
        self.assertEqual(gamma, 0.0)
        self.assertAlmostEqual(rate, report.rho, delta=1e-15)

    def test_rate_report_outside_unit_interval(self):
        """Test that only rho is reported when it is not a contraction rate."""
        tensor = SymmetricTensor(2, 2, np.diag([1.0, 3.0]))
        pair = Eigenpair(lam=1.0, x=np.array([1.0, 0.0]), residual=0.0)
        report = rateth.rate_report(tensor, pair, 0.5)

        self.assertAlmostEqual(report.rho, 3.5 / 1.5, delta=1e-14)
        self.assertIsNone(report.gamma_opt)
        self.assertIsNone(report.rho_opt)
        self.assertEqual(report.rho_gamma_curve, [])


class ShiftEstimateTests(SimpleTestCase):

    def test_order_two_estimate_is_exact(self):
        """Test that A x^0 is A itself, so every sample sees rho(A)."""
        tensor = random_tensor(2, 4, seed=5)
        expected = float(np.max(np.abs(np.linalg.eigvalsh(tensor.values))))
        self.assertAlmostEqual(rateth.beta_estimate(tensor, 10, seed=1), expected, delta=1e-12)

    def test_seeded_and_signed(self):
        tensor = example2()
        beta = rateth.beta_estimate(tensor, 200, seed=3)

        self.assertEqual(beta, rateth.beta_estimate(tensor, 200, seed=3))
        self.assertGreater(beta, 0.0)
        self.assertAlmostEqual(rateth.suggest_shift(tensor, 200, seed=3), 1.1 * beta, delta=1e-15)
        self.assertAlmostEqual(rateth.suggest_shift(tensor, 200, seed=3, sense=Sense.CONCAVE),
                               -1.1 * beta, delta=1e-15)

    def test_invalid_sample_count(self):
        with self.assertRaises(RateDomainError):
            rateth.beta_estimate(example1(), 0)


class ClassificationTests(SimpleTestCase):
    """Test cases for eigenpair stability."""

    def test_four_decimal_saddle_is_unstable(self):
        tensor = example2()
        lam, x = EX2_SADDLE
        lam, x, _ = rateth.refine_eigenpair(tensor, lam, x)

        self.assertEqual(round(lam, 4), 0.5105)
        self.assertEqual(rateth.classify(tensor, lam, x), Stability.UNSTABLE)

    def test_unrefined_pair_fails_precondition(self):
        lam, x = EX2_SADDLE
        with self.assertRaises(ResidualPreconditionError):
            rateth.classify(example2(), lam, unit(x))

    def test_convex_runs_find_local_maxima(self):
        tensor = example1()
        for trial in range(20):
            pair, trace = sshopm(tensor, SolveConfig(StaticShift(1.0), x0=random_start(3, 9, trial)))
            if trace.status == Status.CONVERGED:
                self.assertEqual(rateth.classify(tensor, pair.lam, pair.x), Stability.NEGATIVE_STABLE)

    def test_concave_runs_find_local_minima(self):
        tensor = example2()
        pair, trace = sshopm(tensor, SolveConfig(StaticShift(-2.0), x0=unit(EX2_START_M10954)))
        self.assertEqual(trace.status, Status.CONVERGED)
        self.assertEqual(rateth.classify(tensor, pair.lam, pair.x), Stability.POSITIVE_STABLE)

    def test_matrix_case_is_degenerate_on_repeated_eigenvalue(self):
        tensor = SymmetricTensor(2, 3, np.diag([2.0, 2.0, 1.0]))
        self.assertEqual(rateth.classify(tensor, 2.0, np.array([1.0, 0.0, 0.0])), Stability.DEGENERATE)

    def test_one_dimensional_is_degenerate(self):
        tensor = SymmetricTensor(3, 1, np.array([[[2.0]]]))
        self.assertEqual(rateth.classify(tensor, 2.0, np.array([1.0])), Stability.DEGENERATE)


class MeasuredRateTests(SimpleTestCase):

    def test_geometric_sequence(self):
        residuals = [0.5 ** k for k in range(60)]
        self.assertAlmostEqual(rateth.measured_rate(residuals), 0.5, delta=1e-12)

    def test_longest_run_inside_the_window(self):
        residuals = [1e-2, 1e-5, 1e-6, 1e-3, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10, 1e-16]
        self.assertAlmostEqual(rateth.measured_rate(residuals), 0.1, delta=1e-12)

    def test_too_few_points(self):
        self.assertIsNone(rateth.measured_rate([1e-5, 1e-7, 1e-9, 1e-11, 1e-13]))

    def test_repeated_root_sequence(self):
        """Test that a (k + 3) 0.3^k decay is fitted exactly while the plain mean overshoots."""
        residuals = [1e-5 * (k + 3) * 0.3 ** k for k in range(40)]

        self.assertGreater(rateth.measured_rate(residuals), 1.05 * 0.3)
        self.assertAlmostEqual(rateth.measured_rate(residuals, repeated_root=True), 0.3, delta=1e-8)

    def test_repeated_root_fit_on_geometric_sequence(self):
        residuals = [0.5 ** k for k in range(60)]
        self.assertAlmostEqual(rateth.measured_rate(residuals, repeated_root=True), 0.5, delta=1e-4)

    def test_roots_coincide_at_optimal_gamma(self):
        rho = 0.5
        self.assertTrue(rateth.roots_coincide(rho, rateth.gamma_opt(rho)))
        self.assertFalse(rateth.roots_coincide(rho, rateth.gamma_opt(rho) / 2.0))
        self.assertFalse(rateth.roots_coincide(rho, 0.0))


class RateExperimentTests(SimpleTestCase):
    """Test cases comparing measured residual rates with the predicted ones."""

    def check_experiment(self, tensor, alpha, start):
        reports = bench.rate_experiment(tensor, alpha, unit(start))
        self.assertEqual(len(reports), 3)
        plain, half, optimal = reports

        self.assertEqual(plain.gamma, 0.0)
        self.assertAlmostEqual(optimal.gamma, optimal.gamma_opt, delta=1e-15)
        for report in reports:
            self.assertEqual(report.status, Status.CONVERGED)
            self.assertFalse(report.oscillatory)
            self.assertIsNotNone(report.measured_rate)

        self.assertLess(abs(plain.measured_rate - plain.rho) / plain.rho, 0.05)
        self.assertLess(abs(half.measured_rate - half.predicted_rate) / half.predicted_rate, 0.05)
        self.assertAlmostEqual(optimal.predicted_rate, optimal.rho_opt, delta=1e-7)
        self.assertLess(abs(optimal.measured_rate - optimal.rho_opt) / optimal.rho_opt, 0.05)
        self.assertLess(optimal.measured_rate, plain.measured_rate)
        return reports

    def test_example1(self):
        reports = self.check_experiment(example1(), 1.0, EX1_START_08730)
        self.assertEqual(round(reports[0].eigenpair.lam, 4), 0.8730)

    def test_example2(self):
        reports = self.check_experiment(example2(), 2.0, EX2_START_03633)
        self.assertEqual(round(reports[0].eigenpair.lam, 4), 0.3633)

    def test_gamma_below_optimum_is_flagged(self):
        tensor = example1()
        base = bench.rate_experiment(tensor, 1.0, unit(EX1_START_08730), gamma_grid=[0.0])[0]
        reports = bench.rate_experiment(tensor, 1.0, unit(EX1_START_08730),
                                        gamma_grid=[(base.gamma_opt - 1.0) / 2.0])
        self.assertTrue(reports[0].oscillatory)
