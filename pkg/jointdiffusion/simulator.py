"""
Synthetic panels drawn from the full generative model, for parameter
recovery, model-comparison and allocator experiments.

Covariates follow simple stochastic recipes: competitor usage is a
demeaned AR(1); AMO contributions are Poisson counts and the nomination
queue a nonnegative random walk; release logs are daily Bernoulli draws;
ratings are bounded random walks; category usage (for observational
learning) is a log-normal random walk. The latent states then follow the
state equations with Gaussian noise, and observations add measurement
noise. A step that produces a negative state is redrawn.
"""

import json
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from jointdiffusion.config import section_config
from jointdiffusion.exc import ConfigurationError, ExplosiveTrajectory
from jointdiffusion.model import (
    DESIGN_LABELS,
    ComplementParams,
    ComplementTransition,
    HierarchyDesign,
    PlatformParams,
    PlatformTransition,
)
from jointdiffusion.panel import ComplementSeries, ObservationPanel
from jointdiffusion.preprocess import (
    DEFAULT_GAMMA,
    CategoryMap,
    ReleaseLog,
    observational_learning_panel,
    release_indicator,
    smooth_releases,
    standardize,
)
from jointdiffusion.util import logger, substream, to_jsonable


__all__ = (
    "TRUE_PLATFORM",
    "TRUE_COMPLEMENT",
    "DEFAULT_DESIGN",
    "SimulationConfig",
    "LatentPaths",
    "SimulationResult",
    "default_truth",
    "simulate_panel",
    "write_truth",
    "read_truth",
)


#: Platform posterior means from a browser usage fit.
TRUE_PLATFORM = {
    "p0": 1.76e-3,
    "beta": (-4.91e-5, -5.66e-4),
    "rho": (3.42e-5, 3.52e-5),
    "q": 1.27e-8,
    "M0": 1.54e-2,
    "kappa": 3.60e-2,
    "V_p": 1.44e-2,
    "W_p": 1.12e-1,
}

#: Pooled add-on posterior means from the same fit.
TRUE_COMPLEMENT = {
    "alpha": 0.0142,
    "delta": 0.0174,
    "p0j": 0.0087,
    "p1j": 0.0047,
    "p2j": 0.0059,
    "q0j": 0.0057,
    "q1j": 0.0131,
    "q2j": 0.0054,
    "q3j": 0.0043,
    "V_j": 0.0002,
    "W_j": 0.0002,
}

#: Full-rank dummy rows (intercept first) cycled over complements.
DEFAULT_DESIGN = np.array([
    [1, 0, 0, 0, 0, 0],
    [1, 1, 0, 0, 0, 0],
    [1, 0, 1, 0, 0, 0],
    [1, 0, 0, 1, 0, 0],
    [1, 0, 0, 0, 1, 0],
    [1, 0, 0, 0, 0, 1],
    [1, 1, 1, 0, 1, 0],
    [1, 0, 1, 0, 0, 1],
], dtype=float)

_MAX_REDRAWS = 100


@dataclass
class SimulationConfig(object):
    """
    What to simulate (section ``[simulate]``).

    ``platform`` and ``complements`` default to the values of
    :func:`default_truth`. With ``draw_theta`` set and a ``hierarchy``
    given, each complement's Theta_j is drawn from the hierarchy instead.
    ``noise=False`` switches both noise terms off.
    """

    T: int = 500
    J: int = 8
    seed: int = 0
    launches: tuple = ()
    m0_fraction: float = 0.05
    n0: float = 0.0
    gamma: float = DEFAULT_GAMMA
    release_rate: float = 0.02
    competitor_ar: float = 0.9
    competitor_sd: float = 0.1
    contributions_mean: float = 47.0
    queue_sd: float = 5.0
    addons_rate: float = 5.0
    rating_sd: float = 0.05
    usage_sd: float = 0.1
    categories: int = 3
    noise: bool = True
    draw_theta: bool = False
    platform: PlatformParams = None
    complements: tuple = ()
    hierarchy: HierarchyDesign = None
    design: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.T, self.J = int(self.T), int(self.J)
        if self.T < 2:
            raise ConfigurationError("T must be at least 2, got %d" % self.T)
        if self.J < 0:
            raise ConfigurationError("J must be nonnegative")
        if not self.launches:
            first = max(1, self.T // 10)
            span = max(1, self.T // 2)
            self.launches = tuple(first + (j * span) // max(self.J, 1) for j in range(self.J))
        self.launches = tuple(int(day) for day in self.launches)
        if len(self.launches) != self.J:
            raise ConfigurationError("Need one launch day per complement")
        if any(not 1 <= day <= self.T for day in self.launches):
            raise ConfigurationError("Launch days must lie in [1, %d]" % self.T)
        if self.platform is None:
            self.platform = PlatformParams(**TRUE_PLATFORM)
        if not self.complements:
            self.complements = tuple(ComplementParams(**TRUE_COMPLEMENT) for _ in range(self.J))
        self.complements = tuple(self.complements)
        if len(self.complements) != self.J:
            raise ConfigurationError("Need one ComplementParams per complement")
        if self.design is None:
            self.design = DEFAULT_DESIGN[np.arange(self.J) % len(DEFAULT_DESIGN)]
        self.design = np.asarray(self.design, dtype=float).reshape(self.J, len(DESIGN_LABELS))

    @classmethod
    def from_config(cls, config, **overrides):
        return section_config(cls, config, "simulate", **overrides)

    def truth_dict(self):
        return to_jsonable({
            "seed": self.seed,
            "T": self.T,
            "launches": self.launches,
            "platform": self.platform.to_dict(),
            "complements": [params.to_dict() for params in self.complements],
            "design": self.design,
        })


@dataclass
class LatentPaths(object):
    """
    True states: m_0..m_T and, per complement id, n over [launch - 1, end].
    """

    m: np.ndarray
    n: dict = field(default_factory=dict)


@dataclass
class SimulationResult(object):
    panel: ObservationPanel
    truth: LatentPaths
    config: SimulationConfig
    complements: tuple = ()
    rejections: int = 0


def default_truth(T=500, J=8, seed=0, **changes):
    """
    Ready-made configuration whose true parameters are the browser fit
    posterior means: platform values as estimated, every complement at the
    pooled add-on means.
    """
    return SimulationConfig(T=T, J=J, seed=seed, **changes)


def _ar1(rng, T, phi, sd, columns):
    out = np.zeros((T, columns))
    shocks = sd * rng.standard_normal((T, columns))
    out[0] = shocks[0]
    for t in range(1, T):
        out[t] = phi * out[t - 1] + shocks[t]
    return out


def _bounded_walk(rng, T, start, sd, low, high):
    steps = sd * rng.standard_normal(T)
    return np.clip(start + np.cumsum(steps), low, high)


def _draw_theta(config, rng):
    hierarchy = config.hierarchy
    params = []
    for j in range(config.J):
        base = config.complements[j]
        mean = config.design[j].dot(hierarchy.eta)
        for _ in range(_MAX_REDRAWS):
            theta = rng.multivariate_normal(mean, hierarchy.Sigma_eps)
            if 0 < theta[0] < 1 and 0 < theta[1] < 1:
                break
        else:
            raise ConfigurationError("Hierarchy keeps drawing alpha/delta outside (0, 1)")
        params.append(ComplementParams.from_theta(theta, base.V_j, base.W_j))
    return tuple(params)


def _propagate(transition, x0, W, V, steps, rng, noise, label):
    """
    Run a state recursion with redraw of negative states.

    :returns: (states x_0..x_steps, observations, rejected step count)
    """
    x = np.empty(steps + 1)
    x[0] = x0
    rejected = 0
    sd_w = np.sqrt(W) if noise else 0.0
    sd_v = np.sqrt(V) if noise else 0.0
    for k in range(steps):
        mean = transition.mean(k, x[k])
        value = mean + sd_w * rng.standard_normal()
        if value < 0:
            rejected += 1
            for _ in range(_MAX_REDRAWS):
                value = mean + sd_w * rng.standard_normal()
                if value >= 0:
                    break
            else:
                value = 0.0
        x[k + 1] = value
    if steps and rejected > 0.5 * steps:
        raise ExplosiveTrajectory(
            "%s: %d of %d steps needed a redraw" % (label, rejected, steps)
        )
    y = x[1:] + sd_v * rng.standard_normal(steps)
    return x, y, rejected


def simulate_panel(config):
    """
    Draw a panel and its true latent paths.

    The same config (seed included) always gives the same panel.

    :rtype: :class:`SimulationResult`
    """
    T, J = config.T, config.J
    covariate_rng = substream(config.seed, 0)
    state_rng = substream(config.seed, 1)
    logger.info("simulate_panel: T=%d J=%d seed=%d", T, J, config.seed)

    transforms = {}
    X_raw = _ar1(covariate_rng, T, config.competitor_ar, config.competitor_sd, 2)
    X = np.column_stack([
        standardize(X_raw[:, c], "demean-then-rescale", "competitor_%d" % c)[0]
        for c in range(2)
    ])
    contributions = covariate_rng.poisson(config.contributions_mean, T).astype(float)
    queue = _bounded_walk(covariate_rng, T, 100.0, config.queue_sd, 0.0, np.inf)
    Z_raw = np.column_stack([contributions, queue])
    Z_cols = []
    for c, name in enumerate(("amo_contributions", "queue_length")):
        values, record = standardize(Z_raw[:, c], "demean-then-rescale", name)
        transforms[name] = record.to_dict()
        Z_cols.append(values)
    Z = np.column_stack(Z_cols)
    A, record = standardize(
        np.cumsum(covariate_rng.poisson(config.addons_rate, T)).astype(float),
        "rescale", "addons_created",
    )
    transforms[record.name] = record.to_dict()

    platform_log = ReleaseLog.from_indicator(
        "platform", covariate_rng.random(T) < config.release_rate
    )
    PV_full = smooth_releases(platform_log, config.gamma, (1, T))
    PV_indicator = release_indicator(platform_log, (1, T))

    ids = ["addon%02d" % j for j in range(J)]
    category_of = {key: "category%d" % (j % max(config.categories, 1)) for j, key in enumerate(ids)}
    usage = pd.DataFrame(
        np.exp(np.cumsum(config.usage_sd * covariate_rng.standard_normal((T, J)), axis=0)),
        index=range(1, T + 1), columns=ids,
    )
    for key, launch in zip(ids, config.launches):
        usage.loc[:launch - 1, key] = 0.0
    OL_all = observational_learning_panel(usage, CategoryMap(category_of), lag=1)

    covariates = []
    for j, key in enumerate(ids):
        launch = config.launches[j]
        length = T - launch + 1
        log = ReleaseLog.from_indicator(
            key, covariate_rng.random(length) < config.release_rate, first_day=launch
        )
        window = (launch, T)
        covariates.append({
            "PV": _centered(PV_full[launch - 1:]),
            "AV": _centered(smooth_releases(log, config.gamma, window)),
            "PV_raw": _centered(PV_indicator[launch - 1:]),
            "AV_raw": _centered(release_indicator(log, window)),
            "RTV": _centered(_bounded_walk(covariate_rng, length, 1.0, config.rating_sd, 0.0, 4.0)),
            "STAVG": _centered(_bounded_walk(covariate_rng, length, 4.0, config.rating_sd, 1.0, 5.0)),
            "OL": _centered(OL_all[key].to_numpy()[launch - 1:]),
            "releases": log.days,
        })

    truth_params = config.complements
    if config.draw_theta:
        if config.hierarchy is None:
            raise ConfigurationError("draw_theta needs a hierarchy design")
        truth_params = _draw_theta(config, substream(config.seed, 2))

    platform = config.platform
    transition = PlatformTransition(platform, X, Z, A)
    m, y, rejected = _propagate(
        transition, config.m0_fraction * platform.M0, platform.W_p, platform.V_p,
        T, state_rng, config.noise, "platform",
    )
    total_rejected = rejected

    series, n_paths = [], {}
    for j, key in enumerate(ids):
        launch = config.launches[j]
        cov = covariates[j]
        params = truth_params[j]
        ctransition = ComplementTransition(params, cov, m[launch - 1:T])
        n, y_j, rejected = _propagate(
            ctransition, config.n0, params.W_j, params.V_j, T - launch + 1,
            state_rng, config.noise, key,
        )
        total_rejected += rejected
        n_paths[key] = n
        dummies = {
            label: int(config.design[j, c]) for c, label in enumerate(DESIGN_LABELS) if c > 0
        }
        series.append(ComplementSeries(
            id=key, launch=launch, end=T, y=y_j,
            PV=cov["PV"], AV=cov["AV"], PV_raw=cov["PV_raw"], AV_raw=cov["AV_raw"],
            RTV=cov["RTV"], STAVG=cov["STAVG"], OL=cov["OL"],
            category=category_of[key], dummies=dummies, releases=cov["releases"],
        ))

    if total_rejected:
        logger.info("simulate_panel: %d state step(s) redrawn", total_rejected)
    panel = ObservationPanel(
        y=y, X=X, Z=Z, A=A, complements=series, Z_raw=Z_raw,
        platform_releases=platform_log.days, transforms=transforms,
    )
    return SimulationResult(
        panel=panel, truth=LatentPaths(m=m, n=n_paths), config=config,
        complements=tuple(truth_params), rejections=total_rejected,
    )


def _centered(values):
    values = np.asarray(values, dtype=float)
    return values - values.mean()


def write_truth(result, path):
    """
    Write the truth sidecar: true parameters and latent paths.
    """
    payload = result.config.truth_dict()
    payload["complements"] = [params.to_dict() for params in result.complements]
    payload["rejections"] = result.rejections
    payload["paths"] = {"m": result.truth.m, "n": result.truth.n}
    with open(path, "w") as handle:
        json.dump(to_jsonable(payload), handle, sort_keys=True, separators=(",", ":"))
        handle.write("\n")
    return path


def read_truth(path):
    """
    :returns: (PlatformParams, list of ComplementParams, LatentPaths)
    """
    with open(path, "r") as handle:
        payload = json.load(handle)
    paths = payload["paths"]
    truth = LatentPaths(
        m=np.asarray(paths["m"], dtype=float),
        n={key: np.asarray(values, dtype=float) for key, values in paths["n"].items()},
    )
    return (
        PlatformParams.from_dict(payload["platform"]),
        [ComplementParams.from_dict(data) for data in payload["complements"]],
        truth,
    )
