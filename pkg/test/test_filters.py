"""
Test the extended Kalman filter, backward sampling and smoother.
"""

import unittest

import numpy as np
from scipy.stats import norm

from jointdiffusion.exc import EstimationError, NumericalBlowup
from jointdiffusion.filters import (
    FilterConfig,
    conditional_complement_pass,
    diffuse_init,
    ekf_forward,
    ffbs_sample,
    platform_pass,
    rts_smooth,
)
from jointdiffusion.model import PlatformTransition
from test.util import tame_result, tame_platform


P, M, V, W = 0.01, 1.0, 1e-4, 1e-5


def linear_transition(T):
    """
    q = 0, kappa = 0 and constant p: x_k = (1 - p) x_{k-1} + p M.
    """
    params = tame_platform(p0=P, beta=(0.0, 0.0), rho=(0.0, 0.0), q=0.0, M0=M, kappa=0.0)
    return PlatformTransition(params, np.zeros((T, 2)), np.zeros((T, 2)), np.zeros(T))


def linear_data(T, seed=0):
    rng = np.random.default_rng(seed)
    x = np.empty(T + 1)
    x[0] = 0.2
    for k in range(T):
        x[k + 1] = (1 - P) * x[k] + P * M + np.sqrt(W) * rng.standard_normal()
    return x[1:] + np.sqrt(V) * rng.standard_normal(T)


def kalman_oracle(y, m0, C0):
    """
    Textbook Kalman filter of the linear case.
    """
    m, C, ll = [m0], [C0], 0.0
    for value in y:
        a = (1 - P) * m[-1] + P * M
        R = (1 - P) ** 2 * C[-1] + W
        Q = R + V
        K = R / Q
        m.append(a + K * (value - a))
        C.append((1 - K) * R)
        ll += norm.logpdf(value, a, np.sqrt(Q))
    return np.array(m), np.array(C), ll


class LinearCaseTestCase(unittest.TestCase): # pylint: disable=R0904
    """
    jointdiffusion.filters.ekf_forward on the linear sub-case
    """

    T = 1000

    def test_matches_kalman_filter(self):
        """
        ekf_forward() equals the closed-form Kalman filter
        """
        y = linear_data(self.T)
        output = ekf_forward(y, linear_transition(self.T), V, W, 0.2, 0.01)
        m, C, ll = kalman_oracle(y, 0.2, 0.01)
        np.testing.assert_allclose(output.m, m, rtol=0, atol=1e-10)
        np.testing.assert_allclose(output.C, C, rtol=0, atol=1e-10)
        self.assertAlmostEqual(output.loglik, ll, delta=1e-10 * max(1.0, abs(ll)))
        np.testing.assert_allclose(output.J, 1 - P)

    def test_no_look_ahead(self):
        """
        ekf_forward() moments up to t use data up to t only
        """
        y = linear_data(200, seed=1)
        full = ekf_forward(y, linear_transition(200), V, W, 0.2, 0.01)
        head = ekf_forward(y[:120], linear_transition(200), V, W, 0.2, 0.01)
        np.testing.assert_array_equal(head.f, full.f[:120])
        np.testing.assert_array_equal(head.m, full.m[:121])

    def test_missing_observation(self):
        """
        ekf_forward() predicts through NaN
        """
        y = linear_data(20, seed=2)
        y[5] = np.nan
        output = ekf_forward(y, linear_transition(20), V, W, 0.2, 0.01)
        self.assertEqual(output.loglik_terms[5], 0.0)
        self.assertEqual(output.m[6], output.a[5])
        self.assertEqual(output.C[6], output.R[5])
        self.assertTrue(np.all(np.isfinite(output.m)))

    def test_per_step_variance(self):
        """
        ekf_forward() accepts one observation variance per step
        """
        y = linear_data(30, seed=3)
        scalar = ekf_forward(y, linear_transition(30), V, W, 0.2, 0.01)
        array = ekf_forward(y, linear_transition(30), np.full(30, V), W, 0.2, 0.01)
        np.testing.assert_array_equal(scalar.m, array.m)

    def test_errors(self):
        """
        ekf_forward() rejects bad inputs
        """
        y = linear_data(10)
        with self.assertRaises(EstimationError):
            ekf_forward(y, linear_transition(10), 0.0, W, 0.2, 0.01)
        with self.assertRaises(EstimationError):
            ekf_forward(y, linear_transition(5), V, W, 0.2, 0.01)
        with self.assertRaises(NumericalBlowup):
            ekf_forward(y, linear_transition(10), V, W, 0.2, 0.01, FilterConfig(ceiling=1e-9))


class BackwardSamplingTestCase(unittest.TestCase): # pylint: disable=R0904
    """
    jointdiffusion.filters.ffbs_sample
    """

    draws = 5000

    def test_calibration(self):
        """
        ffbs_sample() draws match the smoother moments
        """
        T = 50
        y = linear_data(T, seed=4)
        output = ekf_forward(y, linear_transition(T), V, W, 0.2, 0.01)
        mean, variance = rts_smooth(output)
        rng = np.random.default_rng(5)
        paths = np.array([ffbs_sample(output, rng).values for _ in range(self.draws)])
        se = np.sqrt(variance / self.draws)
        self.assertTrue(np.all(np.abs(paths.mean(axis=0) - mean) < 4 * se))
        np.testing.assert_allclose(paths.var(axis=0, ddof=1), variance, rtol=0.1)

    def test_smoother_end(self):
        """
        rts_smooth() ends at the filtered moments
        """
        output = ekf_forward(linear_data(40), linear_transition(40), V, W, 0.2, 0.01)
        mean, variance = rts_smooth(output)
        self.assertEqual(mean[-1], output.m[-1])
        self.assertEqual(variance[-1], output.C[-1])
        self.assertTrue(np.all(variance <= output.C + 1e-15))

    def test_floor(self):
        """
        ffbs_sample() redraws, then floors, negative states
        """
        y = np.full(10, -5.0)
        output = ekf_forward(y, linear_transition(10), 1e-8, 1e-8, -5.0, 1e-8)
        path = ffbs_sample(output, np.random.default_rng(0), FilterConfig(max_redraws=3))
        self.assertTrue(np.all(path.values >= 0))
        self.assertEqual(path.floored, 11)
        self.assertEqual(path.redraws, 33)
        free = ffbs_sample(output, np.random.default_rng(0), nonnegative=False)
        self.assertTrue(np.all(free.values < 0))

    def test_deterministic(self):
        """
        ffbs_sample() same generator state, same path
        """
        output = ekf_forward(linear_data(30), linear_transition(30), V, W, 0.2, 0.01)
        first = ffbs_sample(output, np.random.default_rng(8)).values
        second = ffbs_sample(output, np.random.default_rng(8)).values
        np.testing.assert_array_equal(first, second)


class PassTestCase(unittest.TestCase): # pylint: disable=R0904
    """
    jointdiffusion.filters passes over a panel
    """

    @classmethod
    def setUpClass(cls):
        cls.result = tame_result(T=80, J=2, seed=6)

    def test_diffuse_init(self):
        """
        diffuse_init() first observation and scaled variance
        """
        values = np.array([np.nan, 2.0, 4.0, 6.0])
        mean, variance = diffuse_init(values, window=3, scale=10.0)
        self.assertEqual(mean, 2.0)
        self.assertAlmostEqual(variance, 10.0 * 2.0)
        self.assertEqual(diffuse_init([1.0], floor=1e-6), (1.0, 1e-6))
        with self.assertRaises(EstimationError):
            diffuse_init([np.nan, np.nan])

    def test_platform_pass(self):
        """
        platform_pass() tracks the true path
        """
        panel = self.result.panel
        path, output = platform_pass(panel, self.result.config.platform, np.random.default_rng(1))
        self.assertEqual(path.values.shape, (panel.T + 1,))
        self.assertEqual(output.f.shape, (panel.T,))
        error = np.abs(output.m[1:] - self.result.truth.m[1:])
        self.assertLess(float(np.max(error)), 0.01)
        none, _ = platform_pass(panel, self.result.config.platform)
        self.assertIsNone(none)

    def test_complement_pass(self):
        """
        conditional_complement_pass() covers the complement window
        """
        series = self.result.panel.complement(1)
        params = self.result.complements[1]
        path, output = conditional_complement_pass(
            series, params, self.result.truth.m, np.random.default_rng(2)
        )
        self.assertEqual(len(output), len(series))
        self.assertEqual(path.values.shape, (len(series) + 1,))
        error = np.abs(output.m[1:] - self.result.truth.n[series.id][1:])
        self.assertLess(float(np.max(error)), 0.01)


if __name__ == '__main__':
    unittest.main()
