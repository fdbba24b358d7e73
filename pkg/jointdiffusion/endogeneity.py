"""
Latent-instrument endogeneity test.

A suspect covariate (AMO contributions, or a smoothed release signal) is
treated as a noisy measurement Z1_t = mu_t + e_t of a latent AR(1)
process, mu_t = g1 + g2 mu_{t-1} [+ g3 Z2_t] + z_t. The latent level
drives the external force of a Bass state equation,

    x_t = x_{t-1} + (b0 + b1 mu_t + b2 Z2_t + q x_{t-1} / M_t)(M_t - x_{t-1}) + w_t,

and (w_t, e_t) are jointly normal with covariance Sigma. A credible
interval for Corr(w, e) that excludes zero points to endogeneity.

Each iteration alternates two blocks: the diffusion path given the latent
level (extended Kalman filter plus backward sampling with w conditioned on
e), then the latent level and its parameters given the path. The potential
M_t and imitation coefficient q are held at fitted values.
"""

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.stats import invgamma, invwishart

from jointdiffusion.archive import SUMMARY_COLUMNS, summarize
from jointdiffusion.config import section_config
from jointdiffusion.exc import (
    ChainDiverged,
    ConfigurationError,
    DataError,
    EstimationError,
    ModelError,
    NonStationaryDraw,
)
from jointdiffusion.filters import FilterConfig, diffuse_init, ekf_forward, ffbs_sample
from jointdiffusion.model import POTENTIAL_FLOOR, market_potential, platform_drift, platform_jacobian
from jointdiffusion.sampler import gaussian_regression_posterior, inverse_gamma_posterior
from jointdiffusion.util import logger, substream


__all__ = (
    "MODELS",
    "LIV_PARAMETERS",
    "LIVConfig",
    "LIVData",
    "LIVResult",
    "liv_fit",
    "liv_fit_releases",
    "simulate_liv",
    "correlation_table",
    "release_interval_table",
)


#: 1: plain AR(1) latent process. 2: AR(1) plus the instrument.
MODELS = (1, 2)

LIV_PARAMETERS = (
    "corr", "Sigma_21", "Sigma_11", "Sigma_22",
    "gamma1", "gamma2", "gamma3", "Psi", "V", "b0", "b1", "b2",
)


@dataclass
class LIVConfig(object):
    """
    Endogeneity test options (section ``[endogeneity]``).

    :param int model: 1 for the plain latent AR(1), 2 to add the
        instrument to the latent state equation.

    :param float coef_var: Prior variance of every regression coefficient
        (prior mean 0).

    :param float ig_shape: Inverse-gamma shape of the V and Psi priors.

    :param float ig_scale: Inverse-gamma scale of the V and Psi priors.

    :param float sigma_df: Inverse-Wishart degrees of freedom of Sigma.

    :param float sigma_scale: Diagonal of the inverse-Wishart scale.

    :param int max_redraws: Draws of (g1, g2, g3) tried before a
        non-stationary draw is rejected and the previous values kept.
    """

    model: int = 1
    iterations: int = 2000
    burn_in: int = None
    thin: int = 2
    seed: int = 0
    coef_var: float = 100.0
    ig_shape: float = 2.0
    ig_scale: float = 1e-8
    sigma_df: float = 4.0
    sigma_scale: float = 1e-8
    max_redraws: int = 100
    max_failures: int = 10

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigurationError("endogeneity.model must be 1 or 2, got %r" % self.model)
        if self.burn_in is None:
            self.burn_in = self.iterations // 4
        if not 0 <= self.burn_in < self.iterations:
            raise ConfigurationError("endogeneity.burn_in must lie in [0, iterations)")
        if self.thin < 1:
            raise ConfigurationError("endogeneity.thin must be positive")
        if self.sigma_df <= 1:
            raise ConfigurationError("endogeneity.sigma_df must exceed 1")
        if min(self.coef_var, self.ig_shape, self.ig_scale, self.sigma_scale) <= 0:
            raise ConfigurationError("Prior variances, shapes and scales must be positive")

    @classmethod
    def from_config(cls, config, **overrides):
        return section_config(cls, config, "endogeneity", **overrides)


@dataclass
class LIVData(object):
    """
    One series under test.

    :param y: Observed adoption (NaN where missing).

    :param Z1: The suspect covariate, measured with error.

    :param Z2: The instrument.

    :param potential: Market potential M_t of the state equation.

    :param float q: Imitation coefficient of the state equation.
    """

    y: np.ndarray
    Z1: np.ndarray
    Z2: np.ndarray
    potential: np.ndarray
    q: float
    label: str = "platform"

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        T = self.y.shape[0]
        self.Z1 = np.asarray(self.Z1, dtype=float).reshape(-1)
        self.Z2 = np.asarray(self.Z2, dtype=float).reshape(-1)
        self.potential = np.broadcast_to(np.asarray(self.potential, dtype=float), (T,)).copy()
        if self.Z1.shape[0] != T or self.Z2.shape[0] != T:
            raise DataError("y, Z1 and Z2 must have the same length")
        if not (np.all(np.isfinite(self.Z1)) and np.all(np.isfinite(self.Z2))):
            raise DataError("Z1 and Z2 must be fully observed")
        if np.any(self.potential <= 0):
            raise DataError("Market potential must be positive")

    def __len__(self):
        return self.y.shape[0]

    @property
    def informative(self):
        return bool(np.ptp(self.Z1) > 0)

    @classmethod
    def from_panel(cls, panel, platform, proxy=0, instrument=1):
        """
        Platform series with a governance covariate as the suspect and
        another as the instrument.
        """
        return cls(
            y=panel.y, Z1=panel.Z[:, proxy], Z2=panel.Z[:, instrument],
            potential=market_potential(platform.M0, platform.kappa, panel.A),
            q=platform.q, label=panel.z_labels[proxy],
        )

    @classmethod
    def from_complement(cls, series, params_j, m_path, proxy="PV"):
        """
        One complement with a smoothed release signal (``PV`` platform or
        ``AV`` add-on) as the suspect and the other as the instrument.

        :param m_path: Platform states m_0..m_T.
        """
        if proxy not in ("PV", "AV"):
            raise ConfigurationError("proxy must be PV or AV, got %r" % proxy)
        other = "AV" if proxy == "PV" else "PV"
        m_lagged = np.asarray(m_path, dtype=float)[series.launch - 1:series.end]
        return cls(
            y=series.y, Z1=getattr(series, proxy), Z2=getattr(series, other),
            potential=np.maximum(params_j.alpha * m_lagged, POTENTIAL_FLOOR),
            q=params_j.q0j, label="%s:%s" % (series.id, proxy),
        )


@dataclass
class LIVResult(object):
    """
    Posterior summaries of one endogeneity test.

    ``summary`` is indexed by :data:`LIV_PARAMETERS` with the columns
    estimate, sd, 2.5th, 97.5th; ``draws`` keeps the kept draws of each.
    """

    label: str
    summary: pd.DataFrame
    draws: dict = field(default_factory=dict)
    mu_mean: np.ndarray = None
    mu_sd: np.ndarray = None
    rejections: int = 0
    informative: bool = True
    config: LIVConfig = None

    def interval(self, name="corr"):
        row = self.summary.loc[name]
        return float(row["2.5th"]), float(row["97.5th"])

    def covers(self, value, name="corr"):
        low, high = self.interval(name)
        return low <= value <= high

    def significant(self, name="corr"):
        """
        True when the 95% interval excludes zero.
        """
        if not self.informative:
            return False
        return not self.covers(0.0, name)


class _ProxyDrivenTransition(object):
    """
    Bass state equation whose external force depends on the latent proxy
    level, plus the conditional mean of w given the measurement error.
    """

    def __init__(self, p, q, potential, shift):
        self.p = p
        self.q = q
        self.potential = potential
        self.shift = shift

    def __len__(self):
        return self.p.shape[0]

    def mean(self, k, x):
        return x + platform_drift(x, self.p[k], self.q, self.potential[k]) + self.shift[k]

    def jacobian(self, k, x):
        return platform_jacobian(x, self.p[k], self.q, self.potential[k])


class _LatentAR(object):

    def __init__(self, gamma, Z2):
        self.gamma = gamma
        self.Z2 = Z2

    def __len__(self):
        return self.Z2.shape[0]

    def mean(self, k, x):
        return self.gamma[0] + self.gamma[1] * x + self.gamma[2] * self.Z2[k]

    def jacobian(self, k, x):
        return self.gamma[1]


class _LIVSampler(object):

    def __init__(self, data, config, filter_config=None):
        self.data = data
        self.config = config
        self.filter_config = filter_config or FilterConfig()
        self.rejections = 0

    # -- state pieces

    def _force(self, b, mu):
        return b[0] + b[1] * mu[1:] + b[2] * self.data.Z2

    def _innovations(self, m, mu, b):
        """
        (w_t, e_t) for t = 1..T given the paths.
        """
        data = self.data
        M = data.potential
        w = m[1:] - m[:-1] - platform_drift(m[:-1], self._force(b, mu), data.q, M)
        e = data.Z1 - mu[1:]
        return w, e

    # -- blocks

    def draw_path(self, state, rng):
        data, Sigma = self.data, state["Sigma"]
        slope = Sigma[0, 1] / Sigma[1, 1]
        residual_var = Sigma[0, 0] - slope * Sigma[0, 1]
        shift = slope * (data.Z1 - state["mu"][1:])
        transition = _ProxyDrivenTransition(
            self._force(state["b"], state["mu"]), data.q, data.potential, shift,
        )
        config = self.filter_config
        m0, C0 = diffuse_init(data.y, config.init_window, config.init_scale, config.init_floor)
        output = ekf_forward(data.y, transition, state["V"], residual_var, m0, C0, config)
        return ffbs_sample(output, rng, config).values

    def draw_latent(self, state, rng):
        """
        Latent level given the diffusion path. Each day contributes two
        observations of mu_t, the state-equation residual and Z1_t, with
        joint covariance Sigma; they are combined into one scalar
        observation with a day-specific variance.
        """
        data, m, b = self.data, state["m"], state["b"]
        M = data.potential
        H = b[1] * (M - m[:-1])
        r = m[1:] - m[:-1] - (b[0] + b[2] * data.Z2 + data.q * m[:-1] / M) * (M - m[:-1])
        P = np.linalg.inv(state["Sigma"])
        info = P[0, 0] * H * H + 2.0 * P[0, 1] * H + P[1, 1]
        score = (P[0, 0] * H + P[0, 1]) * r + (P[0, 1] * H + P[1, 1]) * data.Z1
        config = self.filter_config
        mu0, var0 = diffuse_init(data.Z1, config.init_window, config.init_scale, config.init_floor)
        output = ekf_forward(
            score / info, _LatentAR(state["gamma"], data.Z2), 1.0 / info, state["Psi"],
            mu0, var0, config,
        )
        return ffbs_sample(output, rng, config, nonnegative=False).values

    def draw_gamma(self, state, rng):
        mu, Z2 = state["mu"], self.data.Z2
        columns = [np.ones(Z2.shape[0]), mu[:-1]]
        if self.config.model == 2:
            columns.append(Z2)
        design = np.column_stack(columns)
        k = design.shape[1]
        mean, cov = gaussian_regression_posterior(
            design, mu[1:], state["Psi"], np.zeros(k), self.config.coef_var * np.eye(k),
        )
        for _ in range(self.config.max_redraws):
            draw = rng.multivariate_normal(mean, cov)
            if abs(draw[1]) < 1.0:
                return np.append(draw, 0.0) if k == 2 else draw
        raise NonStationaryDraw("No stationary draw of gamma in %d tries" % self.config.max_redraws)

    def draw_coefficients(self, state, rng):
        """
        (b0, b1, b2) by regression of the state increments on the force
        terms, with w conditioned on the measurement error.
        """
        data, m, mu, Sigma = self.data, state["m"], state["mu"], state["Sigma"]
        M = data.potential
        gap = M - m[:-1]
        slope = Sigma[0, 1] / Sigma[1, 1]
        residual_var = Sigma[0, 0] - slope * Sigma[0, 1]
        response = m[1:] - m[:-1] - data.q * m[:-1] / M * gap - slope * (data.Z1 - mu[1:])
        design = gap[:, None] * np.column_stack([np.ones(len(data)), mu[1:], data.Z2])
        mean, cov = gaussian_regression_posterior(
            design, response, residual_var, np.zeros(3), self.config.coef_var * np.eye(3),
        )
        return rng.multivariate_normal(mean, cov)

    def draw_sigma(self, state, rng):
        w, e = self._innovations(state["m"], state["mu"], state["b"])
        residuals = np.column_stack([w, e])
        scale = self.config.sigma_scale * np.eye(2) + residuals.T.dot(residuals)
        Sigma = invwishart.rvs(self.config.sigma_df + residuals.shape[0], scale, random_state=rng)
        return 0.5 * (Sigma + Sigma.T)

    def draw_variances(self, state, rng):
        config, mu, gamma = self.config, state["mu"], state["gamma"]
        resid_mu = mu[1:] - gamma[0] - gamma[1] * mu[:-1] - gamma[2] * self.data.Z2
        shape, scale = inverse_gamma_posterior(resid_mu, config.ig_shape, config.ig_scale)
        Psi = float(invgamma.rvs(shape, scale=scale, random_state=rng))
        shape, scale = inverse_gamma_posterior(
            self.data.y - state["m"][1:], config.ig_shape, config.ig_scale,
        )
        V = float(invgamma.rvs(shape, scale=scale, random_state=rng))
        return Psi, V

    # -- driver

    def initial_state(self):
        data = self.data
        y = data.y[np.isfinite(data.y)]
        w_var = max(float(np.var(np.diff(y))), 1e-12) if y.size > 2 else 1e-6
        e_var = max(0.1 * float(np.var(data.Z1)), 1e-12)
        mu = np.concatenate([[data.Z1[0]], data.Z1])
        return {
            "mu": mu,
            "m": None,
            "gamma": np.array([0.5 * float(np.mean(data.Z1)), 0.5, 0.0]),
            "Psi": max(0.5 * float(np.var(np.diff(data.Z1))), 1e-12),
            "Sigma": np.diag([w_var, e_var]),
            "V": 0.1 * w_var,
            "b": np.zeros(3),
        }

    def iterate(self, state, iteration):
        seed = self.config.seed
        state = dict(state)
        state["m"] = self.draw_path(state, substream(seed, iteration, 0))
        state["mu"] = self.draw_latent(state, substream(seed, iteration, 1))
        try:
            state["gamma"] = self.draw_gamma(state, substream(seed, iteration, 2))
        except NonStationaryDraw as error:
            self.rejections += 1
            logger.warning("liv_fit: iteration %d: %s", iteration, error)
        state["Psi"], state["V"] = self.draw_variances(state, substream(seed, iteration, 3))
        state["b"] = self.draw_coefficients(state, substream(seed, iteration, 4))
        state["Sigma"] = self.draw_sigma(state, substream(seed, iteration, 5))
        return state

    def run(self):
        config = self.config
        state = self.initial_state()
        draws = {name: [] for name in LIV_PARAMETERS}
        mu_paths = []
        failures = 0
        for iteration in range(1, config.iterations + 1):
            try:
                state = self.iterate(state, iteration)
                failures = 0
            except (EstimationError, ModelError, np.linalg.LinAlgError) as error:
                failures += 1
                logger.debug("liv_fit: iteration %d failed: %s", iteration, error)
                if failures >= config.max_failures:
                    raise ChainDiverged(
                        "%d consecutive failed iterations, last: %s" % (failures, error)
                    )
                continue
            if iteration <= config.burn_in or (iteration - config.burn_in) % config.thin:
                continue
            Sigma = state["Sigma"]
            values = {
                "corr": Sigma[0, 1] / np.sqrt(Sigma[0, 0] * Sigma[1, 1]),
                "Sigma_21": Sigma[1, 0], "Sigma_11": Sigma[0, 0], "Sigma_22": Sigma[1, 1],
                "gamma1": state["gamma"][0], "gamma2": state["gamma"][1],
                "gamma3": state["gamma"][2], "Psi": state["Psi"], "V": state["V"],
                "b0": state["b"][0], "b1": state["b"][1], "b2": state["b"][2],
            }
            for name in LIV_PARAMETERS:
                draws[name].append(float(values[name]))
            mu_paths.append(state["mu"])
        return {name: np.array(values) for name, values in draws.items()}, np.array(mu_paths)


def _summary(draws):
    rows = [summarize(draws.get(name, ())) for name in LIV_PARAMETERS]
    return pd.DataFrame(rows, index=pd.Index(LIV_PARAMETERS, name="parameter"), columns=SUMMARY_COLUMNS)


def liv_fit(data, config=None, filter_config=None):
    """
    Run the endogeneity test on one series.

    A suspect covariate without variation cannot be tested: the result is
    returned with ``informative=False`` and empty summaries.

    :param data: :class:`LIVData`.

    :param config: :class:`LIVConfig`.

    :rtype: :class:`LIVResult`
    """
    config = config or LIVConfig()
    if not data.informative:
        logger.warning("liv_fit: %s has a constant proxy, nothing to test", data.label)
        return LIVResult(data.label, _summary({}), informative=False, config=config)
    sampler = _LIVSampler(data, config, filter_config)
    draws, mu_paths = sampler.run()
    if not mu_paths.shape[0]:
        raise ChainDiverged("No draws kept for %s" % data.label)
    logger.info("liv_fit: %s, %d draws, %d non-stationary rejections",
                data.label, mu_paths.shape[0], sampler.rejections)
    return LIVResult(
        label=data.label, summary=_summary(draws), draws=draws,
        mu_mean=mu_paths.mean(axis=0), mu_sd=mu_paths.std(axis=0),
        rejections=sampler.rejections, config=config,
    )


def liv_fit_releases(panel, complements, m_path, config=None, filter_config=None):
    """
    Test both smoothed release signals of every complement.

    :param complements: Fitted :class:`jointdiffusion.model.ComplementParams`
        in panel order.

    :param m_path: Platform states m_0..m_T (posterior or filtered means).

    :returns: dict complement id -> (platform-release result,
        add-on-release result).
    """
    results = {}
    for series, params_j in zip(panel.complements, complements):
        results[series.id] = tuple(
            liv_fit(LIVData.from_complement(series, params_j, m_path, proxy), config, filter_config)
            for proxy in ("PV", "AV")
        )
    return results


def simulate_liv(T=1000, corr=0.0, seed=0, model=1, **changes):
    """
    Synthetic data for the test with a known Corr(w, e).

    :returns: (:class:`LIVData`, truth dict)
    """
    truth = {
        "gamma1": 0.2, "gamma2": 0.8, "gamma3": 0.1 if model == 2 else 0.0,
        "Psi": 0.01, "sd_w": 0.002, "sd_e": 0.1, "V": 1e-8,
        "b0": 0.001, "b1": 0.0005, "b2": 0.0, "q": 0.01, "M": 1.0, "m0": 0.05,
        "corr": float(corr),
    }
    unknown = sorted(set(changes) - set(truth))
    if unknown:
        raise ConfigurationError("Unknown truth key(s): %s" % ", ".join(unknown))
    truth.update(changes)
    if not -1.0 < truth["corr"] < 1.0:
        raise ConfigurationError("corr must lie in (-1, 1)")
    rng = substream(seed, 0)

    Z2 = np.empty(T)
    level = 0.0
    for t in range(T):
        level = 0.9 * level + 0.1 * rng.standard_normal()
        Z2[t] = level
    cov = truth["corr"] * truth["sd_w"] * truth["sd_e"]
    Sigma = np.array([[truth["sd_w"] ** 2, cov], [cov, truth["sd_e"] ** 2]])
    shocks = rng.multivariate_normal(np.zeros(2), Sigma, size=T)

    mu = np.empty(T + 1)
    m = np.empty(T + 1)
    mu[0] = truth["gamma1"] / (1.0 - truth["gamma2"])
    m[0] = truth["m0"]
    for t in range(1, T + 1):
        mu[t] = (truth["gamma1"] + truth["gamma2"] * mu[t - 1] + truth["gamma3"] * Z2[t - 1]
                 + np.sqrt(truth["Psi"]) * rng.standard_normal())
        p = truth["b0"] + truth["b1"] * mu[t] + truth["b2"] * Z2[t - 1]
        m[t] = max(m[t - 1] + platform_drift(m[t - 1], p, truth["q"], truth["M"])
                   + shocks[t - 1, 0], 0.0)
    y = m[1:] + np.sqrt(truth["V"]) * rng.standard_normal(T)
    Z1 = mu[1:] + shocks[:, 1]
    data = LIVData(y=y, Z1=Z1, Z2=Z2, potential=truth["M"], q=truth["q"], label="simulated")
    truth["Sigma_21"] = cov
    return data, truth


def correlation_table(results):
    """
    Correlation and covariance rows for each model.

    :param results: dict model label -> :class:`LIVResult`.
    """
    frames = []
    for label, result in results.items():
        frame = result.summary.loc[["corr", "Sigma_21"]].copy()
        frame.index = pd.MultiIndex.from_product([[label], frame.index], names=("model", "estimate"))
        frames.append(frame)
    return pd.concat(frames)


def _interval_cells(result, name, star, digits):
    low, high = result.interval(name)
    if not star:
        return [low, high]
    mark = "*" if result.significant(name) else ""
    return ["%.*f%s" % (digits, low, mark), "%.*f%s" % (digits, high, mark)]


def release_interval_table(rows, star=True, digits=4):
    """
    Interval table of the release tests, one row per complement.

    Columns: 2.5th/97.5th of Corr(w, e) for the platform release signal,
    the same for the add-on release signal, then the covariances
    Sigma_21 of each. Intervals excluding zero are starred.

    :param rows: Output of :func:`liv_fit_releases`.
    """
    columns = pd.MultiIndex.from_product(
        [["corr_platform_release", "corr_addon_release",
          "Sigma_platform_release", "Sigma_addon_release"], ["2.5th", "97.5th"]],
    )
    data = []
    for _, (platform, addon) in rows.items():
        data.append(
            _interval_cells(platform, "corr", star, digits)
            + _interval_cells(addon, "corr", star, digits)
            + _interval_cells(platform, "Sigma_21", star, digits)
            + _interval_cells(addon, "Sigma_21", star, digits)
        )
    return pd.DataFrame(data, index=pd.Index(list(rows), name="addon"), columns=columns)
