"""
EKF-within-MCMC Gibbs sampler.

One iteration of a chain runs these blocks in order:

1. platform path m_{0:T} by forward filtering, backward sampling;
2. the platform force coefficients (p0, beta, rho, q) by a conjugate
   Gaussian regression of the daily change of m on the force terms,
   with M_t held at its current value;
3. (M0, kappa) by random-walk Metropolis, rejecting any proposal with a
   nonpositive M_t;
4. V_p and W_p from their inverse-gamma conditionals;
5. for each complement, given the platform path: its path n_j, its force
   coefficients by conjugate regression (prior from the hierarchy),
   alpha_j and delta_j by Metropolis on the logit scale, then V_j, W_j;
6. the hierarchy eta, Sigma_eps from the multivariate regression of
   Theta_j on the design D_j.

Complement blocks are independent given the platform path and may run in
a thread pool. Every block draws from its own substream of the master
seed, keyed by (chain, iteration, slot), so results do not depend on the
number of threads.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import invgamma, invwishart, norm

from jointdiffusion.archive import DrawArchive, DrawRecord
from jointdiffusion.config import section_config
from jointdiffusion.exc import (
    ChainDiverged,
    ConfigurationError,
    DegeneratePotential,
    EstimationError,
    ModelError,
    NonPositivePotential,
    PriorMisconfiguration,
    RankDeficientDesign,
)
from jointdiffusion.filters import (
    FilterConfig,
    conditional_complement_pass,
    diffuse_init,
    platform_pass,
)
from jointdiffusion.model import (
    DESIGN_LABELS,
    POTENTIAL_FLOOR,
    THETA_NAMES,
    ComplementFrame,
    ComplementParams,
    ModelSpec,
    PlatformParams,
    complement_drift,
    complement_forces,
    market_potential,
    platform_drift,
)
from jointdiffusion.util import expit, logger, logit, substream


__all__ = (
    "PriorConfig",
    "MCMCConfig",
    "ChainState",
    "GibbsSampler",
    "conditional_gaussian",
    "gaussian_regression_posterior",
    "inverse_gamma_posterior",
    "sample_constrained_logit",
    "sample_hierarchy",
    "platform_design",
    "complement_design",
    "platform_state_loglik",
    "complement_state_loglik",
    "initial_params",
    "run_chain",
    "run_chains",
)


_LOG_2PI = np.log(2.0 * np.pi)
_PLATFORM_SLOT = 0


@dataclass
class PriorConfig(object):
    """
    Priors (section ``[priors]``).

    Regression coefficients get N(coef_mean, coef_var) unless
    ``coefficients`` names a (mean, variance) pair for them; variances get
    IG(ig_shape, ig_scale); alpha and delta get a logit-normal prior when
    the hierarchy is off. The hierarchy coefficients eta have prior
    N(0, eta_var) and the residual covariance either independent
    IG(sigma_shape, sigma_scale) diagonal entries or an inverse-Wishart
    with ``iw_df`` degrees of freedom and prior mean sigma_scale * I.
    """

    coef_mean: float = 0.0
    coef_var: float = 100.0
    ig_shape: float = 3.0
    ig_scale: float = 0.5
    logit_mean: float = -4.0
    logit_var: float = 4.0
    eta_var: float = 100.0
    sigma_shape: float = 3.0
    sigma_scale: float = 0.5
    sigma_form: str = "diagonal"
    iw_df: float = None
    coefficients: dict = field(default_factory=dict)

    def __post_init__(self):
        variances = [self.coef_var, self.logit_var, self.eta_var, self.ig_scale, self.sigma_scale]
        variances += [var for _, var in self.coefficients.values()]
        if any(not var > 0 for var in variances):
            raise PriorMisconfiguration("Prior variances and scales must be positive")
        if not (self.ig_shape > 1 and self.sigma_shape > 1):
            raise PriorMisconfiguration("Inverse-gamma shapes must exceed 1")
        if self.sigma_form not in ("diagonal", "full"):
            raise PriorMisconfiguration(
                "sigma_form must be 'diagonal' or 'full', got %r" % self.sigma_form
            )
        if self.iw_df is not None and self.iw_df <= len(THETA_NAMES) + 1:
            raise PriorMisconfiguration("iw_df must exceed %d" % (len(THETA_NAMES) + 1))

    @classmethod
    def from_config(cls, config, **overrides):
        return section_config(cls, config, "priors", **overrides)

    def coefficient(self, name):
        base = name.split("[")[0]
        return self.coefficients.get(name, self.coefficients.get(base, (self.coef_mean, self.coef_var)))

    def logit_logpdf(self, value):
        """
        Log density on (0, 1) of the logit-normal prior.
        """
        z = logit(value)
        return norm.logpdf(z, self.logit_mean, np.sqrt(self.logit_var)) - np.log(value * (1.0 - value))


@dataclass
class MCMCConfig(object):
    """
    Chain settings (section ``[sampler]``). ``burn_in`` defaults to a
    quarter of ``iterations``. Latent paths are stored on every
    ``path_thin``-th kept draw.

    With ``hierarchy`` on, a panel with too few complements for its design
    (J <= K or a rank-deficient D) is fitted with the intercept-only
    hierarchy, and a single complement without one; both log a warning.
    Set ``sampler.hierarchy = false`` to skip the layer outright.
    """

    iterations: int = 4000
    burn_in: int = None
    thin: int = 5
    seed: int = 0
    chains: int = 1
    path_thin: int = 10
    adapt: bool = True
    adapt_every: int = 50
    threads: int = 1
    hierarchy: bool = True
    max_failures: int = 10
    step_M0: float = 1e-3
    step_kappa: float = 1e-3
    step_logit: float = 0.2

    def __post_init__(self):
        if self.burn_in is None:
            self.burn_in = self.iterations // 4
        if not 0 <= self.burn_in < self.iterations:
            raise ConfigurationError(
                "Need 0 <= burn_in < iterations, got %d and %d" % (self.burn_in, self.iterations)
            )
        if self.thin < 1 or self.path_thin < 1 or self.chains < 1 or self.threads < 1:
            raise ConfigurationError("thin, path_thin, chains and threads must be at least 1")

    @classmethod
    def from_config(cls, config, **overrides):
        return section_config(cls, config, "sampler", **overrides)


@dataclass
class ChainState(object):
    """
    Current values of every block of one chain.
    """

    platform: PlatformParams
    complements: list
    eta: np.ndarray = None
    Sigma_eps: np.ndarray = None
    m_path: np.ndarray = None
    n_paths: dict = field(default_factory=dict)


# Conjugate building blocks

def conditional_gaussian(mean, cov, given, values):
    """
    Moments of the components not in ``given`` of N(mean, cov),
    conditional on the ``given`` components taking ``values``.

    :returns: (conditional mean, conditional covariance, remaining indices)
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    given = list(given)
    rest = [i for i in range(mean.shape[0]) if i not in given]
    if not given:
        return mean[rest], cov[np.ix_(rest, rest)], rest
    cross = cov[np.ix_(rest, given)]
    gain = np.linalg.solve(cov[np.ix_(given, given)], cross.T).T
    cond_mean = mean[rest] + gain.dot(np.asarray(values, dtype=float) - mean[given])
    cond_cov = cov[np.ix_(rest, rest)] - gain.dot(cross.T)
    return cond_mean, 0.5 * (cond_cov + cond_cov.T), rest


def gaussian_regression_posterior(design, response, noise_var, prior_mean, prior_cov):
    """
    Posterior moments of b in response = design b + N(0, noise_var) under
    the prior N(prior_mean, prior_cov).
    """
    X = np.atleast_2d(np.asarray(design, dtype=float))
    y = np.asarray(response, dtype=float)
    prior_precision = np.linalg.inv(np.atleast_2d(prior_cov))
    precision = X.T.dot(X) / noise_var + prior_precision
    cov = np.linalg.inv(precision)
    cov = 0.5 * (cov + cov.T)
    mean = cov.dot(X.T.dot(y) / noise_var + prior_precision.dot(prior_mean))
    return mean, cov


def inverse_gamma_posterior(residuals, shape, scale):
    """
    IG(shape, scale) prior updated by Gaussian residuals (NaN ignored).
    """
    residuals = np.asarray(residuals, dtype=float)
    residuals = residuals[np.isfinite(residuals)]
    return shape + 0.5 * residuals.size, scale + 0.5 * float(residuals.dot(residuals))


def _draw_inverse_gamma(residuals, shape, scale, rng):
    a, b = inverse_gamma_posterior(residuals, shape, scale)
    return float(invgamma.rvs(a, scale=b, random_state=rng))


def sample_constrained_logit(current, log_target, step, rng):
    """
    Random-walk Metropolis step for a parameter in (0, 1), proposing on
    the logit scale.

    :param callable log_target: Log density on the natural (0, 1) scale;
        the logit Jacobian is added here.

    :returns: (value, accepted)
    """
    if not 0.0 < current < 1.0:
        raise EstimationError("Current value %r is outside (0, 1)" % current)
    proposal = expit(logit(current) + step * rng.standard_normal())
    log_u = np.log(rng.random())
    if not 0.0 < proposal < 1.0:
        return current, False
    log_ratio = (
        log_target(proposal) - log_target(current)
        + np.log(proposal * (1.0 - proposal)) - np.log(current * (1.0 - current))
    )
    if np.isfinite(log_ratio) and log_u < log_ratio:
        return proposal, True
    return current, False


def _check_design(D):
    J, K = D.shape
    if J <= K or np.linalg.matrix_rank(D) < K:
        raise RankDeficientDesign(
            "Hierarchy design is %d x %d with rank %d" % (J, K, np.linalg.matrix_rank(D))
        )


def sample_hierarchy(theta, D, priors=None, rng=None, form=None, masks=None):
    """
    Draw (eta, Sigma_eps) of Theta_j = D_j eta + eps_j.

    ``form="full"`` draws Sigma_eps from its inverse-Wishart conditional
    and eta from the matrix-normal conditional; ``form="diagonal"`` treats
    each Theta component as its own regression with an inverse-gamma
    residual variance.

    :param masks: dict Theta index -> design column indices, restricting
        that component's regression (diagonal form only); eta is zero
        outside the mask.
    """
    priors = priors or PriorConfig()
    rng = rng if rng is not None else np.random.default_rng()
    form = form or priors.sigma_form
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    D = np.atleast_2d(np.asarray(D, dtype=float))
    J, K = D.shape
    P = theta.shape[1]
    if theta.shape[0] != J:
        raise RankDeficientDesign("Theta has %d rows, design %d" % (theta.shape[0], J))
    _check_design(D)
    A = np.eye(K) / priors.eta_var

    if form == "full":
        if masks:
            raise ConfigurationError("Hierarchy masks need the diagonal form")
        cov = np.linalg.inv(D.T.dot(D) + A)
        B = cov.dot(D.T.dot(theta))
        resid = theta - D.dot(B)
        S = resid.T.dot(resid) + B.T.dot(A).dot(B)
        df = priors.iw_df or P + 3
        prior_scale = priors.sigma_scale * (df - P - 1) * np.eye(P)
        Sigma = np.atleast_2d(invwishart.rvs(df=df + J, scale=prior_scale + S, random_state=rng))
        L = np.linalg.cholesky(0.5 * (cov + cov.T))
        U = np.linalg.cholesky(Sigma)
        eta = B + L.dot(rng.standard_normal((K, P))).dot(U.T)
        return eta, Sigma

    eta = np.zeros((K, P))
    variances = np.empty(P)
    for i in range(P):
        cols = list(masks.get(i, range(K))) if masks else list(range(K))
        Di = D[:, cols]
        if np.linalg.matrix_rank(Di) < len(cols):
            raise RankDeficientDesign("Masked design of component %d is rank deficient" % i)
        Ai = A[np.ix_(cols, cols)]
        cov = np.linalg.inv(Di.T.dot(Di) + Ai)
        b = cov.dot(Di.T.dot(theta[:, i]))
        resid = theta[:, i] - Di.dot(b)
        ssr = resid.dot(resid) + b.dot(Ai).dot(b)
        variances[i] = invgamma.rvs(
            priors.sigma_shape + 0.5 * J, scale=priors.sigma_scale + 0.5 * ssr, random_state=rng
        )
        eta[cols, i] = rng.multivariate_normal(b, variances[i] * 0.5 * (cov + cov.T))
    return eta, np.diag(variances)


# Design matrices and complete-data likelihoods

def _platform_coefficients(params, spec):
    names = ["p0"]
    if not spec.is_pinned("beta"):
        names += ["beta[%d]" % i for i in range(len(params.beta))]
    if not spec.is_pinned("rho"):
        names += ["rho[%d]" % i for i in range(len(params.rho))]
    return names + ["q"]


def platform_design(m_path, panel, params, spec=None):
    """
    Regression of the daily change of m on the force terms, given M_t.

    :returns: (design, response, coefficient names)
    """
    spec = spec or ModelSpec()
    m = np.asarray(m_path, dtype=float)
    m_prev = m[:-1]
    M = np.atleast_1d(market_potential(params.M0, params.kappa, panel.A))
    R = M - m_prev
    columns = {"p0": R, "q": m_prev / M * R}
    for i in range(panel.X.shape[1]):
        columns["beta[%d]" % i] = panel.X[:, i] * R
    for i in range(panel.Z.shape[1]):
        columns["rho[%d]" % i] = panel.Z[:, i] * R
    names = _platform_coefficients(params, spec)
    return np.column_stack([columns[name] for name in names]), np.diff(m), names


def _complement_coefficients(spec):
    names = [name for name in THETA_NAMES[2:] if not spec.is_pinned(name)]
    return names + list(spec.active_interactions())


def complement_design(n_path, m_lagged, covariates, params_j, spec=None):
    """
    Regression of Delta n + delta n_prev on the complement force terms,
    given alpha and delta.

    :returns: (design, response, coefficient names)
    """
    spec = spec or ModelSpec()
    n = np.asarray(n_path, dtype=float)
    n_prev = n[:-1]
    potential = params_j.alpha * np.asarray(m_lagged, dtype=float)
    if np.any(potential <= POTENTIAL_FLOOR):
        raise DegeneratePotential("alpha * m is at or below %g" % POTENTIAL_FLOOR)
    S = potential - n_prev
    c = (1.0 - params_j.delta) * n_prev / potential * S
    PV, AV = covariates["PV"], covariates["AV"]
    RTV, OL, STAVG = covariates["RTV"], covariates["OL"], covariates["STAVG"]
    columns = {
        "p0j": S, "p1j": PV * S, "p2j": AV * S,
        "q0j": c, "q1j": RTV * c, "q2j": OL * c, "q3j": STAVG * c,
        "p3j": PV * AV * S, "q4j": RTV * OL * c, "q5j": RTV * STAVG * c,
    }
    names = _complement_coefficients(spec)
    response = np.diff(n) + params_j.delta * n_prev
    return np.column_stack([columns[name] for name in names]), response, names


def _forces(params_j, covariates):
    return complement_forces(params_j, ComplementFrame(t=0, **covariates))


def _gaussian_loglik(resid, variance):
    return float(-0.5 * (resid.size * (_LOG_2PI + np.log(variance)) + resid.dot(resid) / variance))


def platform_state_loglik(m_path, panel, params, spec=None):
    """
    log p(m_{1:T} | m_0, params) under the state equation; -inf when M_t
    is not positive.
    """
    spec = spec or ModelSpec()
    params = spec.apply_platform(params)
    m = np.asarray(m_path, dtype=float)
    try:
        M = market_potential(params.M0, params.kappa, panel.A)
    except NonPositivePotential:
        return -np.inf
    p = params.p0 + panel.X.dot(params.beta) + panel.Z.dot(params.rho)
    m_prev = m[:-1]
    resid = m[1:] - m_prev - platform_drift(m_prev, p, params.q, M)
    return _gaussian_loglik(resid, params.W_p)


def complement_state_loglik(n_path, m_lagged, covariates, params_j, spec=None):
    """
    log p(n_{1:L} | n_0, m, params_j); -inf when alpha * m falls to the
    floor.
    """
    spec = spec or ModelSpec()
    params_j = spec.apply_complement(params_j)
    n = np.asarray(n_path, dtype=float)
    n_prev = n[:-1]
    p, q = _forces(params_j, covariates)
    try:
        drift = complement_drift(n_prev, np.asarray(m_lagged, dtype=float), p, q,
                                 params_j.alpha, params_j.delta)
    except DegeneratePotential:
        return -np.inf
    return _gaussian_loglik(n[1:] - n_prev - drift, params_j.W_j)


def _half_diff_variance(values, floor):
    values = np.asarray(values, dtype=float)
    steps = np.diff(values[np.isfinite(values)])
    if steps.size < 2:
        return floor
    return float(max(0.5 * np.var(steps), floor))


def initial_params(panel, priors=None, spec=None):
    """
    Starting values: zero force coefficients, M0 twice the largest
    observation, alpha and delta at the prior logit mean, noise variances
    at half the variance of the daily changes.
    """
    priors = priors or PriorConfig()
    spec = spec or ModelSpec()
    y_max = np.nanmax(np.abs(panel.y)) if np.any(np.isfinite(panel.y)) else 1.0
    variance = _half_diff_variance(panel.y, 1e-8)
    platform = PlatformParams(
        p0=0.0, beta=np.zeros(panel.X.shape[1]), rho=np.zeros(panel.Z.shape[1]),
        q=0.0, M0=max(2.0 * y_max, 1e-3), kappa=0.0, V_p=variance, W_p=variance,
    )
    start = float(np.clip(expit(priors.logit_mean), 1e-6, 1 - 1e-6))
    complements = []
    for series in panel.complements:
        variance = _half_diff_variance(series.y, 1e-10)
        params = ComplementParams(
            alpha=start, delta=0.0 if spec.is_pinned("delta") else start,
            p0j=0.0, p1j=0.0, p2j=0.0, q0j=0.0, q1j=0.0, q2j=0.0, q3j=0.0,
            V_j=variance, W_j=variance,
        )
        complements.append(spec.apply_complement(params))
    return spec.apply_platform(platform), complements


@dataclass
class _ComplementStep(object):
    params: ComplementParams
    path: np.ndarray
    loglik: float
    accepted: dict
    counters: dict
    failed: bool = False


class GibbsSampler(object):
    """
    The EKF-MCMC sampler for one panel and one model variant.

    :param panel: :class:`jointdiffusion.panel.ObservationPanel`.

    :param priors: :class:`PriorConfig`.

    :param config: :class:`MCMCConfig`.

    :param spec: :class:`jointdiffusion.model.ModelSpec`, the variant.

    :param filter_config: :class:`jointdiffusion.filters.FilterConfig`.
    """

    def __init__(self, panel, priors=None, config=None, spec=None, filter_config=None,
                 config_hash=None, init=None):
        self.panel = panel
        self.priors = priors or PriorConfig()
        self.config = config or MCMCConfig()
        self.spec = spec or ModelSpec()
        self.filter_config = filter_config or FilterConfig()
        self.config_hash = config_hash
        self.init = init
        self.design = panel.design_matrix()
        self.masks = {}
        for name, labels in self.spec.hierarchy_masks:
            self.masks[THETA_NAMES.index(name)] = [DESIGN_LABELS.index(label) for label in labels]
        self.hierarchy = bool(self.config.hierarchy and panel.complements)
        if self.hierarchy:
            self._check_hierarchy()
        if self.hierarchy and self.masks and self.priors.sigma_form != "diagonal":
            raise ConfigurationError("Hierarchy masks need the diagonal form")
        fc = self.filter_config
        self.platform_init = diffuse_init(panel.y, fc.init_window, fc.init_scale, fc.init_floor)
        self.complement_inits = [
            diffuse_init(series.y, fc.init_window, fc.init_scale, fc.init_floor)
            for series in panel.complements
        ]
        self.covariates = [series.covariates(self.spec.carryover) for series in panel.complements]

    def _check_hierarchy(self):
        """
        A rank-deficient design falls back to the intercept-only hierarchy;
        with a single complement the hierarchy is switched off.
        """
        try:
            _check_design(self.design)
        except RankDeficientDesign as error:
            if self.design.shape[0] > 1:
                logger.warning("%s: %s; using the intercept-only hierarchy",
                               self.__class__.__name__, error)
                self.design = self.design[:, :1]
                self.masks = {}
            else:
                logger.warning("%s: %s; hierarchy switched off", self.__class__.__name__, error)
                self.hierarchy = False

    def _rng(self, chain, iteration, slot):
        return substream(self.config.seed, chain, iteration, slot)

    def initial_state(self):
        if self.init is not None:
            platform, complements = self.init
            platform = self.spec.apply_platform(platform)
            complements = [self.spec.apply_complement(c) for c in complements]
        else:
            platform, complements = initial_params(self.panel, self.priors, self.spec)
        state = ChainState(platform=platform, complements=list(complements))
        if self.hierarchy and complements:
            K = self.design.shape[1]
            state.eta = np.zeros((K, len(THETA_NAMES)))
            state.eta[0] = np.mean([c.theta() for c in complements], axis=0)
            state.Sigma_eps = np.eye(len(THETA_NAMES)) * (
                self.priors.sigma_scale / (self.priors.sigma_shape - 1.0)
            )
        return state

    # platform blocks

    def _platform_coefficients(self, state, rng):
        params = state.platform
        design, response, names = platform_design(state.m_path, self.panel, params, self.spec)
        prior_mean = np.array([self.priors.coefficient(name)[0] for name in names])
        prior_cov = np.diag([self.priors.coefficient(name)[1] for name in names])
        mean, cov = gaussian_regression_posterior(design, response, params.W_p, prior_mean, prior_cov)
        draw = dict(zip(names, rng.multivariate_normal(mean, cov)))
        beta = np.array([draw.get("beta[%d]" % i, 0.0) for i in range(len(params.beta))])
        rho = np.array([draw.get("rho[%d]" % i, 0.0) for i in range(len(params.rho))])
        state.platform = params.replace(p0=draw["p0"], q=draw["q"], beta=beta, rho=rho)

    def _platform_potential(self, state, rng, steps):
        params = state.platform
        proposal = params.M0 + steps["M0"] * rng.standard_normal()
        kappa = params.kappa
        if not self.spec.is_pinned("kappa"):
            kappa = params.kappa + steps["kappa"] * rng.standard_normal()
        log_u = np.log(rng.random())
        if proposal <= 0:
            return False
        candidate = params.replace(M0=proposal, kappa=kappa)

        def log_post(p):
            value = platform_state_loglik(state.m_path, self.panel, p, self.spec)
            mean, var = self.priors.coefficient("M0")
            value += norm.logpdf(p.M0, mean, np.sqrt(var))
            if not self.spec.is_pinned("kappa"):
                mean, var = self.priors.coefficient("kappa")
                value += norm.logpdf(p.kappa, mean, np.sqrt(var))
            return value

        log_ratio = log_post(candidate) - log_post(params)
        if np.isfinite(log_ratio) and log_u < log_ratio:
            state.platform = candidate
            return True
        return False

    def _platform_variances(self, state, rng):
        params = state.platform
        m = state.m_path
        V_p = _draw_inverse_gamma(self.panel.y - m[1:], self.priors.ig_shape, self.priors.ig_scale, rng)
        M = market_potential(params.M0, params.kappa, self.panel.A)
        p = params.p0 + self.panel.X.dot(params.beta) + self.panel.Z.dot(params.rho)
        resid = m[1:] - m[:-1] - platform_drift(m[:-1], p, params.q, M)
        W_p = _draw_inverse_gamma(resid, self.priors.ig_shape, self.priors.ig_scale, rng)
        state.platform = params.replace(V_p=V_p, W_p=W_p)

    # complement blocks

    def _theta_prior(self, state, j):
        if state.eta is None:
            return None
        return self.design[j].dot(state.eta), state.Sigma_eps

    def _coefficient_prior(self, state, j, params, names):
        hier = self._theta_prior(state, j)
        interactions = [name for name in names if name not in THETA_NAMES]
        core = [name for name in names if name in THETA_NAMES]
        if hier is None:
            mean = [self.priors.coefficient(name)[0] for name in names]
            return np.array(mean), np.diag([self.priors.coefficient(name)[1] for name in names])
        theta = params.theta()
        given = [i for i, name in enumerate(THETA_NAMES) if name not in core]
        cond_mean, cond_cov, rest = conditional_gaussian(hier[0], hier[1], given, theta[given])
        order = [rest.index(THETA_NAMES.index(name)) for name in core]
        mean = list(cond_mean[order])
        k = len(core)
        cov = np.zeros((len(names), len(names)))
        cov[:k, :k] = cond_cov[np.ix_(order, order)]
        for i, name in enumerate(interactions):
            prior = self.priors.coefficient(name)
            mean.append(prior[0])
            cov[k + i, k + i] = prior[1]
        return np.array(mean), cov

    def _relevance_log_prior(self, state, j, params, name):
        hier = self._theta_prior(state, j)
        if hier is None:
            return lambda value: self.priors.logit_logpdf(value)
        index = THETA_NAMES.index(name)
        theta = params.theta()
        given = [i for i in range(len(THETA_NAMES)) if i != index]
        mean, cov, _ = conditional_gaussian(hier[0], hier[1], given, theta[given])
        sd = np.sqrt(max(cov[0, 0], 1e-300))
        return lambda value: norm.logpdf(value, mean[0], sd)

    def _complement_step(self, state, j, rng, steps):
        series = self.panel.complements[j]
        covariates = self.covariates[j]
        params = state.complements[j]
        previous = state.n_paths.get(series.id)
        m_lagged = state.m_path[series.launch - 1:series.end]
        accepted = {}
        try:
            path, output = conditional_complement_pass(
                series, params, state.m_path, rng, self.spec, self.filter_config,
                self.complement_inits[j],
            )
            n = path.values

            design, response, names = complement_design(n, m_lagged, covariates, params, self.spec)
            prior_mean, prior_cov = self._coefficient_prior(state, j, params, names)
            mean, cov = gaussian_regression_posterior(design, response, params.W_j, prior_mean, prior_cov)
            params = params.replace(**dict(zip(names, rng.multivariate_normal(mean, cov))))

            for name in ("alpha", "delta"):
                if self.spec.is_pinned(name):
                    continue
                log_prior = self._relevance_log_prior(state, j, params, name)

                def log_target(value, name=name, log_prior=log_prior, params=params):
                    candidate = params.replace(**{name: value})
                    return log_prior(value) + complement_state_loglik(
                        n, m_lagged, covariates, candidate, self.spec
                    )

                value, ok = sample_constrained_logit(
                    getattr(params, name), log_target, steps[name], rng
                )
                params = params.replace(**{name: value})
                accepted[name] = float(ok)

            V_j = _draw_inverse_gamma(series.y - n[1:], self.priors.ig_shape, self.priors.ig_scale, rng)
            resid = n[1:] - n[:-1] - complement_drift(
                n[:-1], m_lagged, *_forces(params, covariates), params.alpha, params.delta
            )
            W_j = _draw_inverse_gamma(resid, self.priors.ig_shape, self.priors.ig_scale, rng)
            params = params.replace(V_j=V_j, W_j=W_j)
        except (ModelError, EstimationError, np.linalg.LinAlgError) as error:
            logger.debug("%s: complement %s block failed: %s", self.__class__.__name__, series.id, error)
            return _ComplementStep(state.complements[j], previous, -np.inf, accepted, {}, True)
        return _ComplementStep(
            params, n, output.loglik, accepted,
            {"redraws": path.redraws, "floored": path.floored},
        )

    def _hierarchy(self, state, rng):
        theta = np.vstack([c.theta() for c in state.complements])
        state.eta, state.Sigma_eps = sample_hierarchy(
            theta, self.design, self.priors, rng, self.priors.sigma_form, self.masks or None
        )

    # driver

    def iterate(self, state, chain, iteration, steps):
        """
        One sweep over all blocks, updating ``state`` in place.

        :returns: (log-likelihood, acceptance dict, counters dict, failed)
        """
        rng = self._rng(chain, iteration, _PLATFORM_SLOT)
        acceptance = {}
        counters = {"redraws": 0, "floored": 0}
        failed = False
        loglik = 0.0
        try:
            path, output = platform_pass(
                self.panel, state.platform, rng, self.spec, self.filter_config, self.platform_init
            )
            state.m_path = path.values
            loglik += output.loglik
            counters["redraws"] += path.redraws
            counters["floored"] += path.floored
            self._platform_coefficients(state, rng)
            acceptance["potential"] = float(self._platform_potential(state, rng, steps))
            self._platform_variances(state, rng)
        except (ModelError, EstimationError, np.linalg.LinAlgError) as error:
            logger.debug("%s.iterate: platform block failed: %s", self.__class__.__name__, error)
            failed = True
            loglik = -np.inf
        if state.m_path is None:
            return -np.inf, acceptance, counters, True

        J = len(self.panel.complements)
        rngs = [self._rng(chain, iteration, j + 1) for j in range(J)]
        jsteps = [steps["complements"][j] for j in range(J)]
        if self.config.threads > 1 and J > 1:
            with ThreadPoolExecutor(max_workers=self.config.threads) as pool:
                results = list(pool.map(
                    lambda j: self._complement_step(state, j, rngs[j], jsteps[j]), range(J)
                ))
        else:
            results = [self._complement_step(state, j, rngs[j], jsteps[j]) for j in range(J)]

        for j, result in enumerate(results):
            state.complements[j] = result.params
            if result.path is not None:
                state.n_paths[self.panel.complements[j].id] = result.path
            failed = failed or result.failed
            loglik += result.loglik
            for key, value in result.counters.items():
                counters[key] += value
            for name, value in result.accepted.items():
                acceptance.setdefault(name, []).append(value)
        for name in ("alpha", "delta"):
            if name in acceptance:
                acceptance[name] = float(np.mean(acceptance[name]))

        if self.hierarchy and J:
            try:
                self._hierarchy(state, self._rng(chain, iteration, J + 1))
            except (EstimationError, np.linalg.LinAlgError) as error:
                logger.debug("%s.iterate: hierarchy block failed: %s", self.__class__.__name__, error)
                failed = True
        return loglik, acceptance, counters, failed or not np.isfinite(loglik)

    def _initial_steps(self, state):
        config = self.config
        M0 = state.platform.M0
        return {
            "M0": config.step_M0 * max(M0, 1.0),
            "kappa": config.step_kappa,
            "complements": [
                {"alpha": config.step_logit, "delta": config.step_logit}
                for _ in self.panel.complements
            ],
        }

    @staticmethod
    def _adapt(step, rate):
        if rate < 0.25:
            return step * 0.7
        if rate > 0.45:
            return step * 1.3
        return step

    def run(self, chain=0):
        """
        Run one chain.

        :rtype: :class:`jointdiffusion.archive.DrawArchive`
        """
        config = self.config
        state = self.initial_state()
        steps = self._initial_steps(state)
        archive = DrawArchive(
            seed=config.seed, config_hash=self.config_hash, variant=self.spec.name,
            ids=self.panel.ids,
        )
        window = {}
        failures = 0
        kept = 0
        logger.info(
            "%s.run: chain %d, %d iterations (%d burn-in), %d complements",
            self.__class__.__name__, chain, config.iterations, config.burn_in,
            len(self.panel.complements),
        )
        for iteration in range(config.iterations):
            loglik, acceptance, counters, failed = self.iterate(state, chain, iteration, steps)
            failures = failures + 1 if failed else 0
            if failures >= config.max_failures:
                raise ChainDiverged(
                    "Chain %d failed %d iterations in a row (last at %d)"
                    % (chain, failures, iteration)
                )

            if config.adapt and iteration < config.burn_in:
                for name, value in acceptance.items():
                    window.setdefault(name, []).append(value)
                if (iteration + 1) % config.adapt_every == 0:
                    if window.get("potential"):
                        rate = np.mean(window["potential"])
                        steps["M0"] = self._adapt(steps["M0"], rate)
                        steps["kappa"] = self._adapt(steps["kappa"], rate)
                    for name in ("alpha", "delta"):
                        if window.get(name):
                            rate = np.mean(window[name])
                            for jstep in steps["complements"]:
                                jstep[name] = self._adapt(jstep[name], rate)
                    window = {}

            if iteration < config.burn_in or (iteration - config.burn_in) % config.thin:
                continue
            keep_paths = kept % config.path_thin == 0
            archive.append(DrawRecord(
                iteration=iteration, chain=chain, platform=state.platform,
                complements=list(state.complements), loglik=loglik,
                eta=None if state.eta is None else state.eta.copy(),
                Sigma_eps=None if state.Sigma_eps is None else state.Sigma_eps.copy(),
                acceptance=acceptance, counters=counters,
                m_path=state.m_path.copy() if keep_paths and state.m_path is not None else None,
                n_paths=dict(state.n_paths) if keep_paths else None,
            ))
            kept += 1
            if iteration % 100 == 0:
                logger.debug(
                    "%s.run: chain %d iteration %d loglik %.4f",
                    self.__class__.__name__, chain, iteration, loglik,
                )
        return archive


def run_chain(panel, priors=None, config=None, spec=None, chain=0, **kwargs):
    """
    Run one chain of the sampler.

    :rtype: :class:`jointdiffusion.archive.DrawArchive`
    """
    return GibbsSampler(panel, priors, config, spec, **kwargs).run(chain)


def run_chains(panel, priors=None, config=None, spec=None, **kwargs):
    """
    Run ``config.chains`` independent chains and merge them into one
    archive.
    """
    config = config or MCMCConfig()
    sampler = GibbsSampler(panel, priors, config, spec, **kwargs)
    archive = None
    for chain in range(config.chains):
        result = sampler.run(chain)
        archive = result if archive is None else archive.extend(result)
    return archive
