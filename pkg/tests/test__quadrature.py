import math
from unittest import TestCase

import numpy as np
from scipy import special

from equivshrink import AssumptionError
from equivshrink import ConvergenceError
from equivshrink import DomainError
from equivshrink import Gaussian
from equivshrink import GeneralizedT
from equivshrink import PriorSpec
from equivshrink import ProblemDim
from equivshrink import QuadConfig
from equivshrink import estimators
from equivshrink import quadrature
from tests.utils import psi_alpha_oracle
from tests.utils import relative_error
from tests.utils import simple_bayes_psi


DIMS = ProblemDim(5, 10)
W_POINTS = (0.5, 2.0, 10.0)


class QuadConfigTest(TestCase):

    def test__defaults(self):
        cfg = quadrature.DEFAULT_QUAD_CONFIG
        self.assertEqual(1e-10, cfg.abs_tol)
        self.assertEqual(1e-8, cfg.rel_tol)
        self.assertEqual(64, cfg.nodes_angular)
        self.assertEqual(128, cfg.nodes_radial)

    def test__with_options(self):
        cfg = QuadConfig().with_options(rel_tol=1e-6, nodes_angular=32)
        self.assertEqual((1e-6, 32), (cfg.rel_tol, cfg.nodes_angular))
        self.assertEqual(QuadConfig().abs_tol, cfg.abs_tol)

    def test__validation(self):
        for kwargs in ({'abs_tol': 0}, {'rel_tol': -1}, {'max_depth': 0},
                       {'eta_truncation': 0}, {'nodes_angular': 1}, {'nodes_radial': 0}):
            with self.assertRaises(DomainError):
                QuadConfig(**kwargs)


class Integrate1dTest(TestCase):

    def test__value_and_error(self):
        value, error = quadrature.integrate_1d(math.exp, 0.0, 1.0)
        self.assertAlmostEqual(math.e - 1.0, value, places=13)
        self.assertLess(error, 1e-10)

    def test__infinite_range(self):
        value, _ = quadrature.integrate_1d(lambda t: math.exp(-t * t), -np.inf, np.inf)
        self.assertAlmostEqual(math.sqrt(math.pi), value, places=12)

    def test__breakpoints(self):
        value, _ = quadrature.integrate_1d(abs, -1.0, 2.0, points=[0.0])
        self.assertAlmostEqual(2.5, value, places=14)

    def test__failure_keeps_the_estimate(self):
        cfg = QuadConfig(abs_tol=1e-14, rel_tol=1e-14, max_depth=2)
        with self.assertRaises(ConvergenceError) as context:
            quadrature.integrate_1d(lambda t: math.sin(1.0 / t), 1e-6, 1.0, cfg)
        self.assertIsNotNone(context.exception.estimate)
        self.assertIn('did not converge', str(context.exception))


class BetaWeightedTest(TestCase):

    def test__beta_function(self):
        expected = math.exp(special.betaln(2.0, 0.5))
        self.assertAlmostEqual(4.0 / 3.0, expected, places=14)
        for method in ('jacobi', 'adaptive'):
            value = quadrature.integrate_beta_weighted(lambda t: t, -0.5, method=method)
            self.assertAlmostEqual(expected, float(value), places=12, msg=method)

    def test__left_exponent(self):
        value = quadrature.integrate_beta_weighted(lambda t: np.ones_like(t), 0.0, beta=-0.5)
        self.assertAlmostEqual(2.0, float(value), places=12)

    def test__several_integrands(self):
        powers = np.arange(4)
        values = quadrature.integrate_beta_weighted(
            lambda t: np.power.outer(t, powers), 0.5, nodes=16)
        expected = [math.exp(special.betaln(k + 1.0, 1.5)) for k in powers]
        np.testing.assert_allclose(expected, values, rtol=1e-13)

    def test__rejects_non_integrable_weights(self):
        with self.assertRaises(DomainError):
            quadrature.integrate_beta_weighted(lambda t: t, -1.0)
        with self.assertRaises(DomainError):
            quadrature.integrate_beta_weighted(lambda t: t, 0.0, method='simpson')

    def test__jacobi_rule_is_cached_and_read_only(self):
        x, weights = quadrature.jacobi_rule(8, 0.0, 1.0)
        self.assertIs(x, quadrature.jacobi_rule(8, 0.0, 1.0)[0])
        with self.assertRaises(ValueError):
            weights[0] = 1.0


class PosteriorIntegralsTest(TestCase):

    def _check_power_prior(self, density, alpha, tolerance):
        prior = PriorSpec.power(alpha, density.dims.p)
        for w in W_POINTS:
            result = quadrature.posterior_integrals(w, density, prior)
            expected = psi_alpha_oracle(w, alpha, *density.dims)
            self.assertLess(relative_error(result.psi, expected), tolerance, (alpha, w))
            self.assertGreater(result.m1, 0)
            self.assertAlmostEqual(math.log(result.m1), result.log_m1, places=10)
            self.assertLess(result.achieved_error, 1e-6)

    def test__power_prior_gaussian(self):
        density = Gaussian(DIMS)
        for alpha in (0.0, -0.2, -0.4):
            self._check_power_prior(density, alpha, 1e-5)

    def test__power_prior_does_not_depend_on_the_generator(self):
        density = GeneralizedT(DIMS, 8.0)
        for alpha in (0.0, -0.2, -0.4):
            self._check_power_prior(density, alpha, 1e-4)

    def test__power_prior_at_the_origin(self):
        prior = PriorSpec.power(0.0, 5)
        result = quadrature.posterior_integrals(0.0, Gaussian(DIMS), prior)
        self.assertLess(relative_error(result.psi, estimators.psi_alpha_at_zero(0.0, DIMS)), 1e-5)
        self.assertEqual(0.0, result.m2_dot_z_over_norm)

    def test__m2_is_consistent_with_psi(self):
        prior = PriorSpec.power(-0.2, 5)
        result = quadrature.posterior_integrals(2.0, Gaussian(DIMS), prior)
        self.assertAlmostEqual(
            result.psi, 1.0 - result.m2_dot_z_over_norm / (math.sqrt(2.0) * result.m1),
            places=8)

    def test__strawderman_prior_gives_simple_bayes(self):
        # beta = -n/2 turns the Gaussian Bayes rule into a / (w + (a+1)(b+1)).
        for alpha, b in ((0.0, 0.0), (1.0, 0.5)):
            prior = PriorSpec.strawderman(alpha, -0.5 * DIMS.n, b, DIMS.p)
            a = estimators.alpha_to_a(alpha, DIMS)
            for w in W_POINTS:
                result = quadrature.posterior_integrals(w, Gaussian(DIMS), prior)
                self.assertLess(
                    relative_error(result.psi, simple_bayes_psi(w, a, b)), 1e-5, (alpha, b, w))

    def test__power_prior_far_from_the_origin(self):
        density = Gaussian(DIMS)
        for alpha in (0.0, -0.2):
            prior = PriorSpec.power(alpha, 5)
            for w in (3e3, 1e4, 1e6):
                result = quadrature.posterior_integrals(w, density, prior)
                expected = estimators.psi_alpha_values(w, alpha, DIMS)
                self.assertGreater(result.psi, 0, (alpha, w))
                self.assertLess(relative_error(result.psi, expected), 1e-4, (alpha, w))
                self.assertLess(result.achieved_error, 1e-6)
        # w psi_0(w) tends to (p/2 - 1) / (n/2 + 1).
        result = quadrature.posterior_integrals(1e6, density, PriorSpec.power(0.0, 5))
        self.assertAlmostEqual(0.25, 1e6 * result.psi, delta=1e-3)

    def test__strawderman_prior_far_from_the_origin(self):
        prior = PriorSpec.strawderman(0.0, -0.5 * DIMS.n, 0.0, DIMS.p)
        a = estimators.alpha_to_a(0.0, DIMS)
        for w in (1e3, 1e4):
            result = quadrature.posterior_integrals(w, Gaussian(DIMS), prior)
            self.assertLess(relative_error(result.psi, simple_bayes_psi(w, a, 0.0)), 1e-4, w)

    def test__kernel_is_shared(self):
        density = Gaussian(DIMS)
        prior = PriorSpec.power(0.0, 5)
        kernel = quadrature.posterior_kernel(density, prior)
        self.assertIs(kernel, quadrature.posterior_kernel(density, prior))

    def test__rejects_bad_inputs(self):
        density = Gaussian(DIMS)
        with self.assertRaises(DomainError):
            quadrature.PosteriorKernel(density, PriorSpec.power(0.0, 4))
        with self.assertRaises(DomainError):
            quadrature.PosteriorKernel(Gaussian((2, 10)), PriorSpec.power(0.0, 2))
        with self.assertRaises(AssumptionError):
            quadrature.PosteriorKernel(density, PriorSpec.power(-0.6, 5))
        with self.assertRaises(DomainError):
            quadrature.posterior_integrals(-1.0, density, PriorSpec.power(0.0, 5))
