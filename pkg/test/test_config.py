"""
Test configuration loading.
"""

import os
import shutil
import tempfile
import unittest

from jointdiffusion.allocator import GAConfig
from jointdiffusion.config import Config, load_config, section_config
from jointdiffusion.exc import ConfigurationError, JointDiffusionError
from jointdiffusion.filters import FilterConfig
from jointdiffusion.sampler import MCMCConfig
from jointdiffusion.simulator import SimulationConfig


class ConfigTestCase(unittest.TestCase): # pylint: disable=R0904
    """
    jointdiffusion.config.load_config
    """

    def setUp(self):
        self.directory = tempfile.mkdtemp()
        self.path = os.path.join(self.directory, "run.cfg")
        with open(self.path, "w") as handle:
            handle.write(
                "# comment\n"
                "filter.ceiling = 1e9\n"
                "[sampler]\n"
                "iterations = 200\n"
                "hierarchy = false\n"
                "[allocator]\n"
                "levels = 0, 10, 20\n"
            )

    def tearDown(self):
        shutil.rmtree(self.directory)

    def test_flat_and_sections(self):
        """
        load_config() flattens sections to dotted keys
        """
        config = load_config(self.path, environ={})
        self.assertEqual(config["filter.ceiling"], "1e9")
        self.assertEqual(config["sampler.iterations"], "200")
        self.assertEqual(config.section("sampler"), {"iterations": "200", "hierarchy": "false"})

    def test_precedence(self):
        """
        load_config() file < environment < overrides
        """
        environ = {"JOINTDIFFUSION_SAMPLER__ITERATIONS": "300", "HOME": "/root"}
        config = load_config(self.path, environ=environ)
        self.assertEqual(config["sampler.iterations"], "300")
        self.assertNotIn("home", config)
        config = load_config(self.path, environ=environ, overrides={"sampler.iterations": 400,
                                                                    "sampler.seed": None})
        self.assertEqual(config["sampler.iterations"], "400")
        self.assertNotIn("sampler.seed", config)

    def test_section_config_coercion(self):
        """
        from_config() coerces to the field types
        """
        config = load_config(self.path, environ={})
        mcmc = MCMCConfig.from_config(config)
        self.assertEqual(mcmc.iterations, 200)
        self.assertIs(mcmc.hierarchy, False)
        self.assertEqual(mcmc.burn_in, 50)
        self.assertEqual(FilterConfig.from_config(config).ceiling, 1e9)
        self.assertEqual(GAConfig.from_config(config).levels, (0.0, 10.0, 20.0))

    def test_overrides_skip_none(self):
        """
        from_config() ignores None overrides
        """
        config = load_config(self.path, environ={})
        mcmc = MCMCConfig.from_config(config, seed=None, threads=3)
        self.assertEqual(mcmc.seed, 0)
        self.assertEqual(mcmc.threads, 3)

    def test_field_case(self):
        """
        section_config() matches upper-case field names
        """
        config = load_config(environ={"JOINTDIFFUSION_SIMULATE__T": "40"},
                             overrides={"simulate.j": "3", "simulate.noise": "off"})
        simulation = SimulationConfig.from_config(config)
        self.assertEqual((simulation.T, simulation.J), (40, 3))
        self.assertIs(simulation.noise, False)

    def test_unknown_key(self):
        """
        section_config() rejects unknown keys
        """
        config = Config({"sampler.iteratons": "10"})
        with self.assertRaises(ConfigurationError):
            section_config(MCMCConfig, config, "sampler")

    def test_bad_value(self):
        """
        section_config() rejects unparsable values
        """
        with self.assertRaises(ConfigurationError):
            MCMCConfig.from_config(Config({"sampler.hierarchy": "maybe"}))
        with self.assertRaises(JointDiffusionError):
            MCMCConfig.from_config(Config({"sampler.iterations": "many"}))

    def test_digest(self):
        """
        Config.digest() ignores insertion order
        """
        first = Config({"a.b": "1", "c.d": "2"})
        second = Config({"c.d": "2", "a.b": "1"})
        self.assertEqual(first.digest(), second.digest())
        second.set("c.d", 3)
        self.assertNotEqual(first.digest(), second.digest())


if __name__ == '__main__':
    unittest.main()
