"""
Test model comparison, forecasting and convergence summaries.
"""

import unittest

import numpy as np

from jointdiffusion.archive import DrawArchive, DrawRecord
from jointdiffusion.diagnostics import (
    VARIANTS,
    DICResult,
    build_variant,
    comparison_table,
    convergence_report,
    deviance_information,
    dic,
    forecast_all,
    forecast_frame,
    forecast_table,
    get_variant,
    one_step_forecast,
    random_walk_forecast,
    total_loglik,
)
from jointdiffusion.exc import InsufficientDraws, NonFiniteDeviance, UnknownVariant
from jointdiffusion.sampler import MCMCConfig, run_chains
from test.util import slow, synthetic_archive, tame_complement, tame_priors, tame_result


class VariantTestCase(unittest.TestCase): # pylint: disable=R0904
    """
    jointdiffusion.diagnostics variants
    """

    def test_registry(self):
        """
        VARIANTS holds the proposed model and nine alternatives
        """
        self.assertEqual(len(VARIANTS), 10)
        self.assertIn("proposed", VARIANTS)
        self.assertEqual(get_variant("no_amo").description, "No AMO effect on platform")
        with self.assertRaises(UnknownVariant):
            get_variant("bogus")

    def test_build(self):
        """
        build_variant() pins and masks
        """
        proposed = build_variant("proposed")
        self.assertEqual(proposed.pinned, frozenset())
        self.assertFalse(proposed.interactions)
        self.assertTrue(build_variant("no_churn").is_pinned("delta"))
        self.assertTrue(build_variant("no_amo").is_pinned("rho"))
        self.assertTrue(build_variant("no_addon_effect").is_pinned("kappa"))
        self.assertFalse(build_variant("no_version_carryover").carryover)
        self.assertTrue(build_variant("interaction").interactions)
        unexplained = build_variant("unexplained_internal")
        for name in ("q1j", "q2j", "q3j"):
            self.assertTrue(unexplained.is_pinned(name))
        self.assertEqual(build_variant("unexplained_churn").hierarchy_masks,
                         (("delta", ("intercept",)),))
        self.assertEqual(build_variant(VARIANTS["unexplained_relevance"]).hierarchy_masks,
                         (("alpha", ("intercept",)),))


class DevianceTestCase(unittest.TestCase): # pylint: disable=R0904
    """
    jointdiffusion.diagnostics.dic
    """

    @classmethod
    def setUpClass(cls):
        cls.result = tame_result(T=60, J=2, seed=2)
        cls.archive = synthetic_archive(draws=8, ids=tuple(cls.result.panel.ids), variant="proposed")

    def test_identity(self):
        """
        deviance_information() DIC = D(theta_bar) + 2 p_D
        """
        result = deviance_information([10.0, 12.0, 14.0], 11.0)
        self.assertEqual(result.p_D, 1.0)
        self.assertEqual(result.dic, 13.0)
        self.assertEqual(result.ll_at_mean, -5.5)
        self.assertEqual(result.draws, 3)

    def test_non_finite(self):
        """
        deviance_information() and dic() raise NonFiniteDeviance
        """
        with self.assertRaises(NonFiniteDeviance):
            deviance_information([1.0, np.inf], 0.0)
        with self.assertRaises(NonFiniteDeviance):
            deviance_information([1.0], np.nan)
        with self.assertRaises(NonFiniteDeviance):
            dic(DrawArchive(), self.result.panel)

    def test_dic(self):
        """
        dic() evaluates the filter likelihood at the posterior mean
        """
        result = dic(self.archive, self.result.panel)
        platform, complements = self.archive.posterior_mean_params()
        ll = total_loglik(platform, complements, self.result.panel)
        self.assertAlmostEqual(result.ll_at_mean, ll, places=6)
        self.assertAlmostEqual(result.dic, result.deviance_at_mean + 2 * result.p_D)
        self.assertEqual(result.draws, 8)
        self.assertEqual(dic(self.archive, self.result.panel, max_draws=4).draws, 4)

    def test_constant_draws(self):
        """
        dic() of an archive whose draws never move has p_D exactly 0
        """
        platform = self.result.config.platform
        archive = DrawArchive(variant="proposed", ids=self.result.panel.ids)
        for i in range(7):
            archive.append(DrawRecord(iteration=i, chain=0, platform=platform,
                                      complements=list(self.result.complements), loglik=0.0))
        result = dic(archive, self.result.panel)
        self.assertEqual(result.p_D, 0.0)
        self.assertEqual(result.dic, result.deviance_at_mean)
        self.assertEqual(deviance_information([0.7] * 10, 0.7).p_D, 0.0)

    def test_comparison_table(self):
        """
        comparison_table() columns
        """
        table = comparison_table({
            "proposed": DICResult(dic=1.0, p_D=2.0, ll_at_mean=3.0),
            "no_churn": DICResult(dic=4.0, p_D=5.0, ll_at_mean=6.0),
        })
        self.assertEqual(list(table.columns), ["description", "DIC", "p_D", "LL"])
        self.assertEqual(table.loc["no_churn", "description"], "No churn")
        self.assertEqual(table.loc["proposed", "LL"], 3.0)

    @slow
    def test_ordering(self):
        """
        dic() prefers the model that generated the data
        """
        complements = tuple(tame_complement(delta=0.05) for _ in range(3))
        result = tame_result(T=300, J=3, seed=5, complements=complements)
        init = (result.config.platform, list(result.complements))
        scores = {}
        for name in ("proposed", "no_churn"):
            spec = build_variant(name)
            config = MCMCConfig(iterations=2000, chains=2, hierarchy=False, seed=5)
            archive = run_chains(result.panel, tame_priors(), config, spec, init=init)
            scores[name] = dic(archive, result.panel, spec, max_draws=200).dic
        self.assertLess(scores["proposed"], scores["no_churn"])


class ForecastTestCase(unittest.TestCase): # pylint: disable=R0904
    """
    jointdiffusion.diagnostics forecasts
    """

    @classmethod
    def setUpClass(cls):
        cls.result = tame_result(T=60, J=2, seed=3, noise=False)
        cls.fit = (cls.result.config.platform, list(cls.result.complements))

    def test_noise_free(self):
        """
        one_step_forecast() at the truth on noise-free data
        """
        init = (self.result.truth.m[0], 1e-12)
        forecast = one_step_forecast(self.fit, self.result.panel, init=init)
        self.assertLess(forecast.mad, 1e-10)
        baseline = random_walk_forecast(self.result.panel.y)
        self.assertGreater(baseline.mad, 1e-4)

    def test_no_look_ahead(self):
        """
        one_step_forecast() ignores later data
        """
        panel = self.result.panel
        full = one_step_forecast(self.fit, panel)
        head = one_step_forecast(self.fit, panel.truncate(45))
        np.testing.assert_array_equal(head.predicted, full.predicted[:45])
        np.testing.assert_array_equal(head.days, np.arange(1, 46))

    def test_complement(self):
        """
        one_step_forecast() of a complement follows its window
        """
        series = self.result.panel.complement(1)
        forecast = one_step_forecast(self.fit, self.result.panel, series.id)
        self.assertEqual(forecast.name, series.id)
        np.testing.assert_array_equal(forecast.days, series.days)
        self.assertTrue(np.all(forecast.sd > 0))

    def test_forecast_all(self):
        """
        forecast_all() tables and frame
        """
        results = forecast_all(self.fit, self.result.panel)
        self.assertEqual(list(results), ["platform"] + self.result.panel.ids)
        table = forecast_table(results)
        self.assertEqual(list(table.columns), ["MAD", "MSE"])
        frame = forecast_frame(results)
        self.assertEqual(list(frame.columns), ["series", "day", "observed", "predicted", "sd"])
        self.assertEqual(len(frame), sum(len(r.days) for r in results.values()))
        self.assertEqual(len(forecast_frame({})), 0)

    def test_random_walk(self):
        """
        random_walk_forecast() y_hat_t = y_{t-1}
        """
        forecast = random_walk_forecast([1.0, 2.0, 4.0])
        self.assertTrue(np.isnan(forecast.predicted[0]))
        np.testing.assert_array_equal(forecast.predicted[1:], [1.0, 2.0])
        self.assertEqual(forecast.mad, 1.5)
        self.assertEqual(forecast.mse, 2.5)


class ConvergenceTestCase(unittest.TestCase): # pylint: disable=R0904
    """
    jointdiffusion.diagnostics.convergence_report
    """

    def test_insufficient(self):
        """
        convergence_report() needs two chains or enough draws
        """
        with self.assertRaises(InsufficientDraws):
            convergence_report(synthetic_archive(draws=10))
        report = convergence_report(synthetic_archive(draws=10), ["p0"], min_draws=5)
        self.assertEqual(report.chains, 1)

    def test_two_chains(self):
        """
        convergence_report() R-hat and ESS columns
        """
        archive = synthetic_archive(draws=50, chains=2)
        report = convergence_report(archive)
        self.assertEqual(list(report.table.columns), ["r_hat", "ess"])
        self.assertEqual((report.chains, report.draws), (2, 100))
        self.assertTrue(np.isfinite(report.table.loc["p0", "r_hat"]))
        self.assertTrue(np.isnan(report.table.loc["q", "r_hat"]))
        self.assertEqual(report.acceptance, {"potential": 0.5})


if __name__ == '__main__':
    unittest.main()
