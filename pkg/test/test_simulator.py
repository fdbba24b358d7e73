"""
Test the synthetic panel generator.
"""

import os
import shutil
import tempfile
import unittest

import numpy as np

from jointdiffusion.exc import ConfigurationError, ExplosiveTrajectory
from jointdiffusion.simulator import (
    TRUE_COMPLEMENT,
    TRUE_PLATFORM,
    SimulationConfig,
    default_truth,
    read_truth,
    simulate_panel,
    write_truth,
)
from test.util import tame_config, tame_platform, tame_result


class SimulatorTestCase(unittest.TestCase): # pylint: disable=R0904
    """
    jointdiffusion.simulator.simulate_panel
    """

    def test_deterministic(self):
        """
        simulate_panel() same seed, same panel
        """
        first = tame_result(T=80, J=2, seed=11).panel
        second = tame_result(T=80, J=2, seed=11).panel
        self.assertEqual(first.dumps(), second.dumps())
        third = tame_result(T=80, J=2, seed=12).panel
        self.assertNotEqual(first.dumps(), third.dumps())

    def test_shapes(self):
        """
        simulate_panel() windows and truth paths
        """
        result = tame_result(T=80, J=3, seed=1)
        panel = result.panel
        self.assertEqual(panel.T, 80)
        self.assertEqual(panel.ids, ["addon00", "addon01", "addon02"])
        self.assertEqual(result.truth.m.shape, (81,))
        for series in panel.complements:
            self.assertEqual(series.end, 80)
            self.assertEqual(result.truth.n[series.id].shape, (80 - series.launch + 2,))
        self.assertEqual(panel.Z_raw.shape, (80, 2))
        self.assertIn("amo_contributions", panel.transforms)
        self.assertAlmostEqual(float(np.max(np.abs(panel.Z[:, 0]))), 1.0)

    def test_noise_free(self):
        """
        simulate_panel() without noise observes the states
        """
        result = tame_result(T=60, J=2, seed=3, noise=False)
        np.testing.assert_array_equal(result.panel.y, result.truth.m[1:])
        for series in result.panel.complements:
            np.testing.assert_array_equal(series.y, result.truth.n[series.id][1:])
        self.assertEqual(result.rejections, 0)
        self.assertAlmostEqual(result.truth.m[0], 0.05)

    def test_nonnegative_states(self):
        """
        simulate_panel() latent states stay nonnegative
        """
        result = tame_result(T=100, J=2, seed=5)
        self.assertTrue(np.all(result.truth.m >= 0))
        for path in result.truth.n.values():
            self.assertTrue(np.all(path >= 0))

    def test_explosive(self):
        """
        simulate_panel() rejects a trajectory that keeps going negative
        """
        with self.assertRaises(ExplosiveTrajectory):
            simulate_panel(tame_config(T=40, J=1, platform=tame_platform(p0=-0.5)))

    def test_config_validation(self):
        """
        SimulationConfig rejects bad launches
        """
        with self.assertRaises(ConfigurationError):
            SimulationConfig(T=50, J=2, launches=(1,))
        with self.assertRaises(ConfigurationError):
            SimulationConfig(T=50, J=1, launches=(51,))
        with self.assertRaises(ConfigurationError):
            SimulationConfig(T=1, J=0)
        with self.assertRaises(ConfigurationError):
            simulate_panel(tame_config(T=40, J=1, draw_theta=True))

    def test_default_truth(self):
        """
        default_truth() carries the published posterior means
        """
        config = default_truth(T=100, J=4, seed=2)
        self.assertEqual(config.platform.M0, TRUE_PLATFORM["M0"])
        self.assertEqual(config.platform.kappa, TRUE_PLATFORM["kappa"])
        self.assertEqual(config.complements[3].alpha, TRUE_COMPLEMENT["alpha"])
        self.assertEqual(config.complements[0].delta, TRUE_COMPLEMENT["delta"])
        self.assertEqual(config.launches, (10, 22, 35, 47))

    def test_truth_file(self):
        """
        write_truth() and read_truth()
        """
        directory = tempfile.mkdtemp()
        try:
            result = tame_result(T=40, J=1, seed=9)
            path = write_truth(result, os.path.join(directory, "truth.json"))
            platform, complements, paths = read_truth(path)
            self.assertEqual(platform.M0, result.config.platform.M0)
            self.assertEqual(complements, list(result.complements))
            np.testing.assert_array_equal(paths.m, result.truth.m)
        finally:
            shutil.rmtree(directory)


if __name__ == '__main__':
    unittest.main()
