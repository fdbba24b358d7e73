"""
Test utils and exceptions.
"""

import unittest

import numpy as np

from jointdiffusion import exc
from jointdiffusion.util import as_vector, expit, logit, stable_hash, substream, to_jsonable


class SubstreamTestCase(unittest.TestCase): # pylint: disable=R0904
    """
    jointdiffusion.util.substream
    """

    def test_repeatable(self):
        """
        substream() same key, same draws
        """
        first = substream(7, 3, 1).standard_normal(5)
        second = substream(7, 3, 1).standard_normal(5)
        np.testing.assert_array_equal(first, second)

    def test_order_free(self):
        """
        substream() does not depend on request order
        """
        a = substream(7, 1).random()
        substream(7, 2).random()
        self.assertEqual(substream(7, 1).random(), a)

    def test_distinct(self):
        """
        substream() different keys differ
        """
        self.assertNotEqual(substream(7, 1).random(), substream(7, 2).random())
        self.assertNotEqual(substream(7, 1).random(), substream(8, 1).random())


class HelpersTestCase(unittest.TestCase): # pylint: disable=R0904
    """
    jointdiffusion.util helpers
    """

    def test_logit_expit(self):
        """
        expit() inverts logit()
        """
        for value in (1e-6, 0.0142, 0.5, 0.98):
            self.assertAlmostEqual(expit(logit(value)), value, places=12)
        self.assertAlmostEqual(expit(-800.0), 0.0)
        self.assertAlmostEqual(expit(800.0), 1.0)

    def test_as_vector(self):
        """
        as_vector() checks length
        """
        np.testing.assert_array_equal(as_vector(3), [3.0])
        with self.assertRaises(exc.DimensionMismatch):
            as_vector([1, 2], 3)
        with self.assertRaises(exc.DimensionMismatch):
            as_vector([[1, 2], [3, 4]])

    def test_to_jsonable(self):
        """
        to_jsonable() unwraps numpy values
        """
        value = to_jsonable({"a": np.arange(2), "b": np.float64(1.5), 3: [np.nan]})
        self.assertEqual(value, {"a": [0, 1], "b": 1.5, "3": [None]})

    def test_stable_hash(self):
        """
        stable_hash() sorts keys
        """
        self.assertEqual(stable_hash({"a": 1, "b": 2}), stable_hash({"b": 2, "a": 1}))


class ExceptionsTestCase(unittest.TestCase): # pylint: disable=R0904
    """
    jointdiffusion.exc
    """

    def test_hierarchy(self):
        """
        every error is a JointDiffusionError
        """
        families = {
            exc.ModelError: (exc.NonPositivePotential, exc.DegeneratePotential,
                             exc.DimensionMismatch),
            exc.DataError: (exc.MissingColumn, exc.WindowViolation, exc.NonMonotoneCumulative,
                            exc.DegenerateSeries, exc.HorizonMismatch, exc.MissingArchive),
            exc.EstimationError: (exc.NumericalBlowup, exc.ExplosiveTrajectory,
                                  exc.ChainDiverged, exc.PriorMisconfiguration,
                                  exc.RankDeficientDesign, exc.NonStationaryDraw),
            exc.DiagnosticsError: (exc.NonFiniteDeviance, exc.UnknownVariant,
                                   exc.InsufficientDraws),
        }
        for family, members in families.items():
            self.assertTrue(issubclass(family, exc.JointDiffusionError))
            for member in members:
                self.assertTrue(issubclass(member, family), member.__name__)
        self.assertTrue(issubclass(exc.ConfigurationError, exc.JointDiffusionError))


if __name__ == '__main__':
    unittest.main()
