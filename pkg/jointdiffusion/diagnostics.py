"""
Model comparison, forecasting and convergence summaries.

Deviances use the filter likelihood: states are integrated out by the
extended Kalman filter, the platform first and each complement
conditional on the platform filtered means.
"""

from dataclasses import dataclass, field

import arviz as az
import numpy as np
import pandas as pd

from jointdiffusion.archive import DrawArchive
from jointdiffusion.exc import (
    EstimationError,
    InsufficientDraws,
    ModelError,
    NonFiniteDeviance,
    UnknownVariant,
)
from jointdiffusion.filters import conditional_complement_pass, platform_pass
from jointdiffusion.model import ModelSpec
from jointdiffusion.util import logger


__all__ = (
    "VariantSpec",
    "VARIANTS",
    "get_variant",
    "build_variant",
    "DICResult",
    "total_loglik",
    "deviance_information",
    "dic",
    "ForecastResult",
    "one_step_forecast",
    "forecast_all",
    "random_walk_forecast",
    "comparison_table",
    "forecast_table",
    "forecast_frame",
    "ConvergenceReport",
    "convergence_report",
    "compare_variants",
)


@dataclass(frozen=True)
class VariantSpec(object):
    """
    A member of the model-comparison family, as switches on the proposed
    model (every switch on, no interactions).
    """

    name: str
    description: str
    churn_on: bool = True
    version_carryover_on: bool = True
    amo_on: bool = True
    interactions_on: bool = False
    explain_internal_force: bool = True
    explain_external_force: bool = True
    explain_churn: bool = True
    addon_effect_on_platform_on: bool = True
    explain_relevance: bool = True


VARIANTS = {
    variant.name: variant for variant in (
        VariantSpec("no_churn", "No churn", churn_on=False),
        VariantSpec("no_version_carryover", "No version carry over", version_carryover_on=False),
        VariantSpec("no_amo", "No AMO effect on platform", amo_on=False),
        VariantSpec("interaction", "Interaction model (PV x AV, RTV x OL, RTV x STAVG)",
                    interactions_on=True),
        VariantSpec("unexplained_internal", "Unexplained internal market force of add-ons",
                    explain_internal_force=False),
        VariantSpec("unexplained_external", "Unexplained external market force of add-ons",
                    explain_external_force=False),
        VariantSpec("unexplained_churn", "Unexplained churn", explain_churn=False),
        VariantSpec("no_addon_effect", "No cumulative effect of add-on creation on platform",
                    addon_effect_on_platform_on=False),
        VariantSpec("unexplained_relevance", "Unexplained relevance factor",
                    explain_relevance=False),
        VariantSpec("proposed", "Proposed model"),
    )
}


def get_variant(name):
    """
    Registered :class:`VariantSpec` by name.

    :raises UnknownVariant: for any other name.
    """
    try:
        return VARIANTS[name]
    except KeyError:
        raise UnknownVariant(
            "Unknown variant %r; options are: %s" % (name, ", ".join(VARIANTS))
        )


def build_variant(variant):
    """
    The :class:`jointdiffusion.model.ModelSpec` of a variant: switched-off
    blocks pin their coefficients to zero, unexplained hierarchy
    components keep only the intercept.

    :param variant: :class:`VariantSpec` or a registered name.
    """
    if isinstance(variant, str):
        variant = get_variant(variant)
    pinned = set()
    if not variant.churn_on:
        pinned.add("delta")
    if not variant.amo_on:
        pinned.add("rho")
    if not variant.explain_internal_force:
        pinned.update(("q1j", "q2j", "q3j"))
    if not variant.explain_external_force:
        pinned.update(("p1j", "p2j"))
    if not variant.addon_effect_on_platform_on:
        pinned.add("kappa")
    masks = []
    if not variant.explain_churn and variant.churn_on:
        masks.append(("delta", ("intercept",)))
    if not variant.explain_relevance:
        masks.append(("alpha", ("intercept",)))
    return ModelSpec(
        name=variant.name, pinned=frozenset(pinned), interactions=variant.interactions_on,
        carryover=variant.version_carryover_on, hierarchy_masks=tuple(masks),
    )


@dataclass
class DICResult(object):
    """
    DIC = D(theta_bar) + 2 p_D, with p_D = mean D - D(theta_bar) and
    LL(theta_bar) = -D(theta_bar) / 2.
    """

    dic: float
    p_D: float
    ll_at_mean: float
    mean_deviance: float = np.nan
    deviance_at_mean: float = np.nan
    draws: int = 0

    def as_row(self):
        return {"DIC": self.dic, "p_D": self.p_D, "LL": self.ll_at_mean}


def deviance_information(deviances, deviance_at_mean):
    """
    DIC triple from the deviances of the draws and the deviance at the
    posterior mean.

    :raises NonFiniteDeviance: when any deviance is not finite.
    """
    deviances = np.asarray(deviances, dtype=float)
    if deviances.size == 0:
        raise NonFiniteDeviance("No deviances to summarize")
    if not (np.all(np.isfinite(deviances)) and np.isfinite(deviance_at_mean)):
        raise NonFiniteDeviance("Deviance is not finite")
    mean = float(deviances[0]) if np.ptp(deviances) == 0 else float(np.mean(deviances))
    p_D = mean - float(deviance_at_mean)
    return DICResult(
        dic=float(deviance_at_mean) + 2.0 * p_D, p_D=p_D, ll_at_mean=-0.5 * float(deviance_at_mean),
        mean_deviance=mean, deviance_at_mean=float(deviance_at_mean), draws=deviances.size,
    )


def total_loglik(platform, complements, panel, spec=None, filter_config=None):
    """
    Filter log-likelihood of the whole panel: platform plus every
    complement conditional on the platform filtered means.
    """
    _, output = platform_pass(panel, platform, None, spec, filter_config)
    total = output.loglik
    for series, params in zip(panel.complements, complements):
        _, coutput = conditional_complement_pass(series, params, output.m, None, spec, filter_config)
        total += coutput.loglik
    return total


def _deviance(platform, complements, panel, spec, filter_config):
    try:
        value = -2.0 * total_loglik(platform, complements, panel, spec, filter_config)
    except (ModelError, EstimationError) as error:
        raise NonFiniteDeviance("Deviance could not be evaluated: %s" % error)
    if not np.isfinite(value):
        raise NonFiniteDeviance("Deviance is not finite")
    return value


def dic(archive, panel, spec=None, filter_config=None, max_draws=None):
    """
    DIC, p_D and LL at the posterior mean of an archive.

    :param int max_draws: Evaluate at most this many evenly spaced draws.

    :rtype: :class:`DICResult`
    """
    if not len(archive):
        raise NonFiniteDeviance("Archive has no draws")
    if spec is None:
        spec = build_variant(archive.variant) if archive.variant in VARIANTS else ModelSpec()
    records = archive.records
    if max_draws and len(records) > max_draws:
        index = np.linspace(0, len(records) - 1, max_draws).round().astype(int)
        records = [records[i] for i in index]
    deviances = [
        _deviance(record.platform, record.complements, panel, spec, filter_config)
        for record in records
    ]
    platform, complements = archive.posterior_mean_params()
    at_mean = _deviance(platform, complements, panel, spec, filter_config)
    result = deviance_information(deviances, at_mean)
    logger.info("dic: %s DIC=%.4f p_D=%.4f", archive.variant, result.dic, result.p_D)
    return result


@dataclass
class ForecastResult(object):
    """
    One-step-ahead forecasts of one series, aligned with its days.
    """

    name: str
    days: np.ndarray
    observed: np.ndarray
    predicted: np.ndarray
    sd: np.ndarray = None
    mad: float = field(init=False)
    mse: float = field(init=False)

    def __post_init__(self):
        errors = np.asarray(self.observed, dtype=float) - np.asarray(self.predicted, dtype=float)
        errors = errors[np.isfinite(errors)]
        self.mad = float(np.mean(np.abs(errors))) if errors.size else np.nan
        self.mse = float(np.mean(errors ** 2)) if errors.size else np.nan


def _split_fit(fit):
    if isinstance(fit, DrawArchive):
        return fit.posterior_mean_params()
    if isinstance(fit, tuple):
        return fit[0], list(fit[1])
    return fit, []


def one_step_forecast(fit, panel, which="platform", spec=None, filter_config=None, init=None):
    """
    E[y_t | data through t-1] and its predictive sd from the filter.

    :param fit: :class:`jointdiffusion.archive.DrawArchive` (posterior
        means are used), a ``(PlatformParams, [ComplementParams])`` pair,
        or bare ``PlatformParams`` for the platform series.

    :param which: ``"platform"`` or a complement id/position.

    :param init: (mean, variance) of the initial state, defaulting to the
        diffuse initialization.

    :rtype: :class:`ForecastResult`
    """
    platform, complements = _split_fit(fit)
    if which == "platform":
        _, output = platform_pass(panel, platform, None, spec, filter_config, init)
        return ForecastResult("platform", panel.days, panel.y, output.f, np.sqrt(output.Q))
    _, poutput = platform_pass(panel, platform, None, spec, filter_config)
    series = panel.complement(which)
    params = complements[panel.complements.index(series)]
    _, output = conditional_complement_pass(series, params, poutput.m, None, spec, filter_config, init)
    return ForecastResult(series.id, series.days, series.y, output.f, np.sqrt(output.Q))


def forecast_all(fit, panel, spec=None, filter_config=None):
    """
    Forecasts of the platform and every complement, keyed by name.
    """
    platform, complements = _split_fit(fit)
    results = {"platform": one_step_forecast((platform, complements), panel, "platform", spec,
                                             filter_config)}
    for series in panel.complements:
        results[series.id] = one_step_forecast(
            (platform, complements), panel, series.id, spec, filter_config
        )
    return results


def random_walk_forecast(series, name="random_walk", days=None):
    """
    Naive baseline y_hat_t = y_{t-1}; the first day has no forecast.
    """
    observed = np.asarray(series, dtype=float)
    predicted = np.empty_like(observed)
    predicted[0] = np.nan
    predicted[1:] = observed[:-1]
    days = np.arange(1, observed.shape[0] + 1) if days is None else np.asarray(days)
    return ForecastResult(name, days, observed, predicted)


def comparison_table(results):
    """
    Variant name -> :class:`DICResult` as a table with columns
    description, DIC, p_D, LL.
    """
    rows = []
    for name, result in results.items():
        row = {"model": name, "description": VARIANTS[name].description if name in VARIANTS else name}
        row.update(result.as_row())
        rows.append(row)
    return pd.DataFrame(rows, columns=["model", "description", "DIC", "p_D", "LL"]).set_index("model")


def forecast_table(results):
    """
    Series name -> :class:`ForecastResult` as a MAD/MSE table.
    """
    return pd.DataFrame(
        [{"series": name, "MAD": r.mad, "MSE": r.mse} for name, r in results.items()],
        columns=["series", "MAD", "MSE"],
    ).set_index("series")


def forecast_frame(results):
    """
    Tidy long-format forecast series: series, day, observed, predicted, sd.
    """
    frames = []
    for name, result in results.items():
        sd = result.sd if result.sd is not None else np.full(len(result.days), np.nan)
        frames.append(pd.DataFrame({
            "series": name, "day": result.days, "observed": result.observed,
            "predicted": result.predicted, "sd": sd,
        }))
    if not frames:
        return pd.DataFrame(columns=["series", "day", "observed", "predicted", "sd"])
    return pd.concat(frames, ignore_index=True)


@dataclass
class ConvergenceReport(object):
    """
    ``table`` is indexed by parameter with the columns r_hat and ess;
    ``acceptance`` maps each MH block to its mean acceptance rate.
    """

    table: pd.DataFrame
    acceptance: dict
    chains: int
    draws: int


def convergence_report(archive, names=None, min_draws=1000):
    """
    Split R-hat and bulk effective sample size per parameter, plus MH
    acceptance rates.

    :raises InsufficientDraws: with one chain of fewer than ``min_draws``
        draws.
    """
    chains = archive.chains()
    if not chains or (len(chains) < 2 and len(archive) < min_draws):
        raise InsufficientDraws(
            "Need two chains or %d draws, archive has %d chain(s) and %d draws"
            % (min_draws, len(chains), len(archive))
        )
    names = list(names) if names is not None else archive.names()
    rows = []
    for name in names:
        values = archive.matrix(name)
        if np.ptp(values) == 0:
            rows.append({"parameter": name, "r_hat": np.nan, "ess": np.nan})
            continue
        rows.append({
            "parameter": name,
            "r_hat": float(az.rhat(values, method="split")),
            "ess": float(az.ess(values, method="bulk")),
        })
    table = pd.DataFrame(rows, columns=["parameter", "r_hat", "ess"]).set_index("parameter")
    return ConvergenceReport(
        table=table, acceptance=archive.acceptance_rates(), chains=len(chains), draws=len(archive)
    )


def compare_variants(panel, names, run, filter_config=None, max_draws=None):
    """
    Fit and score several variants.

    :param run: callable (panel, ModelSpec) -> DrawArchive, e.g. a
        partially applied :func:`jointdiffusion.sampler.run_chains`.

    :returns: dict variant name -> :class:`DICResult`
    """
    results = {}
    for name in names:
        spec = build_variant(name)
        archive = run(panel, spec)
        results[name] = dic(archive, panel, spec, filter_config, max_draws)
    return results
