"""
Test the diffusion model.
"""

import unittest

import numpy as np

from jointdiffusion.exc import (
    ConfigurationError,
    DegeneratePotential,
    DimensionMismatch,
    NonPositivePotential,
)
from jointdiffusion.model import (
    ComplementFrame,
    ComplementTransition,
    CovariateFrame,
    ModelSpec,
    PlatformTransition,
    complement_drift,
    complement_forces,
    complement_jacobian,
    market_potential,
    platform_drift,
    platform_external_force,
    platform_jacobian,
)
from test.util import tame_complement, tame_platform


def _central(function, x):
    h = 1e-6 * max(1.0, abs(x))
    return (function(x + h) - function(x - h)) / (2.0 * h)


class JacobianTestCase(unittest.TestCase): # pylint: disable=R0904
    """
    jointdiffusion.model jacobians
    """

    points = 100

    def test_platform_jacobian(self):
        """
        platform_jacobian() matches central differences
        """
        rng = np.random.default_rng(1)
        for _ in range(self.points):
            M = rng.uniform(0.5, 5.0)
            p, q = rng.uniform(0.0, 0.05), rng.uniform(0.0, 0.5)
            m = rng.uniform(0.0, M)
            numeric = _central(lambda x: x + platform_drift(x, p, q, M), m)
            analytic = platform_jacobian(m, p, q, M)
            self.assertLess(abs(numeric - analytic) / abs(analytic), 1e-6)

    def test_complement_jacobian(self):
        """
        complement_jacobian() matches central differences
        """
        rng = np.random.default_rng(2)
        for _ in range(self.points):
            alpha, delta = rng.uniform(0.01, 0.9), rng.uniform(0.0, 0.05)
            m = rng.uniform(0.1, 5.0)
            p, q = rng.uniform(0.0, 0.05), rng.uniform(0.0, 0.5)
            n = rng.uniform(0.0, alpha * m)
            numeric = _central(lambda x: x + complement_drift(x, m, p, q, alpha, delta), n)
            analytic = complement_jacobian(n, m, p, q, alpha, delta)
            self.assertLess(abs(numeric - analytic) / abs(analytic), 1e-6)


class DriftTestCase(unittest.TestCase): # pylint: disable=R0904
    """
    jointdiffusion.model drift maps
    """

    def test_platform_drift(self):
        """
        platform_drift() value
        """
        self.assertAlmostEqual(platform_drift(2.0, 0.01, 0.3, 10.0), (0.01 + 0.06) * 8.0)
        self.assertEqual(platform_drift(10.0, 0.01, 0.3, 10.0), 0.0)

    def test_complement_drift_churn(self):
        """
        complement_drift() churn removes delta * n
        """
        with_churn = complement_drift(0.5, 10.0, 0.0, 0.0, 0.2, 0.1)
        self.assertAlmostEqual(with_churn, -0.05)
        self.assertAlmostEqual(complement_drift(0.0, 10.0, 0.01, 0.2, 0.2, 0.1), 0.02)

    def test_market_potential(self):
        """
        market_potential() M0 + kappa * A
        """
        self.assertAlmostEqual(market_potential(1.0, 0.5, 2.0), 2.0)
        np.testing.assert_allclose(market_potential(1.0, 0.5, [0.0, 1.0]), [1.0, 1.5])
        with self.assertRaises(NonPositivePotential):
            market_potential(1.0, -1.0, [0.5, 1.0])
        with self.assertRaises(NonPositivePotential):
            platform_drift(0.1, 0.01, 0.1, 0.0)

    def test_degenerate_potential(self):
        """
        complement maps reject alpha * m at the floor
        """
        with self.assertRaises(DegeneratePotential):
            complement_drift(0.0, 0.0, 0.01, 0.1, 0.2, 0.0)
        with self.assertRaises(DegeneratePotential):
            complement_jacobian(0.0, 1e-13, 0.01, 0.1, 0.2, 0.0)

    def test_forces(self):
        """
        platform_external_force() and complement_forces()
        """
        params = tame_platform(beta=(0.1, 0.2), rho=(0.3, 0.4))
        frame = CovariateFrame(t=1, X=np.array([1.0, 2.0]), Z=np.array([-1.0, 1.0]), A=0.0)
        self.assertAlmostEqual(platform_external_force(params, frame), 0.01 + 0.5 + 0.1)
        with self.assertRaises(DimensionMismatch):
            platform_external_force(params, CovariateFrame(t=1, X=np.zeros(3), Z=np.zeros(2), A=0))
        cparams = tame_complement(p3j=0.5)
        p, q = complement_forces(cparams, ComplementFrame(t=1, PV=1.0, AV=2.0, RTV=1.0))
        self.assertAlmostEqual(p, 0.01 + 0.002 + 0.004 + 1.0)
        self.assertAlmostEqual(q, 0.05 + 0.001)


class ParamsTestCase(unittest.TestCase): # pylint: disable=R0904
    """
    jointdiffusion.model parameter records
    """

    def test_validation(self):
        """
        parameter records reject invalid values
        """
        with self.assertRaises(ConfigurationError):
            tame_platform(M0=0.0)
        with self.assertRaises(ConfigurationError):
            tame_platform(W_p=0.0)
        with self.assertRaises(ConfigurationError):
            tame_complement(alpha=1.0)
        with self.assertRaises(ConfigurationError):
            tame_complement(delta=-0.1)
        self.assertEqual(tame_complement(delta=0.0).delta, 0.0)

    def test_dict(self):
        """
        to_dict() / from_dict()
        """
        params = tame_platform()
        again = type(params).from_dict(params.to_dict())
        np.testing.assert_array_equal(again.rho, params.rho)
        self.assertEqual(again.M0, params.M0)
        cparams = tame_complement()
        self.assertEqual(type(cparams).from_dict(cparams.to_dict()), cparams)
        self.assertEqual(cparams.theta()[0], cparams.alpha)

    def test_spec_pins(self):
        """
        ModelSpec zeroes pinned coefficients
        """
        spec = ModelSpec(pinned=frozenset(("rho", "kappa", "delta", "q1j")))
        platform = spec.apply_platform(tame_platform())
        np.testing.assert_array_equal(platform.rho, [0.0, 0.0])
        self.assertEqual(platform.kappa, 0.0)
        complement = spec.apply_complement(tame_complement(p3j=0.5))
        self.assertEqual(complement.delta, 0.0)
        self.assertEqual(complement.q1j, 0.0)
        self.assertEqual(complement.p3j, 0.0)
        with self.assertRaises(ConfigurationError):
            ModelSpec(pinned=frozenset(("M0",)))

    def test_interactions(self):
        """
        ModelSpec.active_interactions()
        """
        self.assertEqual(ModelSpec().active_interactions(), ())
        spec = ModelSpec(interactions=True, pinned=frozenset(("q4j",)))
        self.assertEqual(spec.active_interactions(), ("p3j", "q5j"))


class TransitionTestCase(unittest.TestCase): # pylint: disable=R0904
    """
    jointdiffusion.model transitions
    """

    def test_platform_transition(self):
        """
        PlatformTransition step k uses day k+1
        """
        params = tame_platform(beta=(0.0, 0.0), rho=(0.01, 0.0))
        Z = np.array([[0.0, 0.0], [1.0, 0.0]])
        transition = PlatformTransition(params, np.zeros((2, 2)), Z, [0.0, 2.0])
        self.assertEqual(len(transition), 2)
        self.assertAlmostEqual(transition.mean(1, 0.5), 0.5 + platform_drift(0.5, 0.02, 0.05, 2.0))
        self.assertAlmostEqual(transition.jacobian(0, 0.5), platform_jacobian(0.5, 0.01, 0.05, 1.0))
        with self.assertRaises(DimensionMismatch):
            PlatformTransition(params, np.zeros((2, 3)), Z, [0.0, 0.0])

    def test_complement_transition(self):
        """
        ComplementTransition binds the lagged platform path
        """
        params = tame_complement()
        covariates = {name: np.zeros(3) for name in ("PV", "AV", "RTV", "STAVG", "OL")}
        transition = ComplementTransition(params, covariates, [1.0, 2.0, 3.0])
        expected = complement_drift(0.1, 2.0, 0.01, 0.05, 0.3, 0.01)
        self.assertAlmostEqual(transition.drift(1, 0.1), expected)
        with self.assertRaises(DimensionMismatch):
            ComplementTransition(params, covariates, [1.0, 2.0])


if __name__ == '__main__':
    unittest.main()
