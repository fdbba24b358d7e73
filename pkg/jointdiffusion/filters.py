"""
Scalar extended Kalman filter, forward-filtering backward-sampling and the
extended RTS smoother.

Moments use the dynamic-linear-model names: ``a``/``R`` predicted state
mean and variance, ``f``/``Q`` one-step-ahead observation mean and
variance, ``m``/``C`` filtered mean and variance. ``m`` and ``C`` hold
n + 1 entries (index 0 is the prior of the state before the first day);
every other per-step array holds n entries, entry ``k`` belonging to state
``k + 1``.

A transition is any object with ``mean(k, x)`` and ``jacobian(k, x)`` and
``len()``; see :class:`jointdiffusion.model.PlatformTransition`.
"""

from dataclasses import dataclass

import numpy as np

from jointdiffusion.config import section_config
from jointdiffusion.exc import EstimationError, NumericalBlowup
from jointdiffusion.model import ComplementTransition, PlatformTransition
from jointdiffusion.util import logger


__all__ = (
    "FilterConfig",
    "FilterOutput",
    "StatePath",
    "diffuse_init",
    "ekf_forward",
    "ffbs_sample",
    "rts_smooth",
    "platform_pass",
    "conditional_complement_pass",
)


_LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class FilterConfig(object):
    """
    Filter options (section ``[filter]``).

    :param float ceiling: Largest admissible variance before
        :class:`jointdiffusion.exc.NumericalBlowup` is raised.

    :param int init_window: Observations used by :func:`diffuse_init`.

    :param float init_scale: Multiplier on their sample variance.

    :param int max_redraws: Backward-sampling redraws of a negative state
        before it is floored at zero.
    """

    ceiling: float = 1e12
    init_window: int = 30
    init_scale: float = 10.0
    init_floor: float = 1e-8
    max_redraws: int = 100

    @classmethod
    def from_config(cls, config, **overrides):
        return section_config(cls, config, "filter", **overrides)


@dataclass
class FilterOutput(object):
    """
    Stored moments of one forward pass.
    """

    a: np.ndarray
    R: np.ndarray
    m: np.ndarray
    C: np.ndarray
    f: np.ndarray
    Q: np.ndarray
    J: np.ndarray
    loglik_terms: np.ndarray

    def __len__(self):
        return self.a.shape[0]

    @property
    def loglik(self):
        return float(np.sum(self.loglik_terms))


@dataclass
class StatePath(object):
    """
    One sampled state trajectory x_0..x_n and how many negative draws it
    took.
    """

    values: np.ndarray
    redraws: int = 0
    floored: int = 0

    def __len__(self):
        return self.values.shape[0]


def diffuse_init(series, window=30, scale=10.0, floor=1e-8):
    """
    Vague prior for the state before the first day: the first observed
    value as mean and ``scale`` times the sample variance of the first
    ``window`` observations as variance.

    :returns: (mean, variance)
    """
    values = np.asarray(series, dtype=float)
    observed = values[np.isfinite(values)]
    if observed.size == 0:
        raise EstimationError("Cannot initialise a filter on a series with no observations")
    head = values[:window]
    head = head[np.isfinite(head)]
    variance = scale * np.var(head, ddof=1) if head.size > 1 else 0.0
    return float(observed[0]), float(max(variance, floor))


def _check(value, ceiling, label, k):
    if not np.isfinite(value) or value > ceiling:
        raise NumericalBlowup("%s is %r at step %d" % (label, value, k))


def ekf_forward(y, transition, V, W, m0, C0, config=None):
    """
    Extended Kalman filter for a scalar state with additive Gaussian
    noise: x_k = g_k(x_{k-1}) + w, y_k = x_k + v.

    The transition is linearized at the filtered mean of the previous
    state. Missing (NaN) observations make a prediction-only step with a
    zero log-likelihood increment.

    :param y: Observations, one per step.

    :param transition: Object with ``mean(k, x)`` and ``jacobian(k, x)``.

    :param V: Observation noise variance, a scalar or one value per step.

    :param float W: State noise variance.

    :param float m0: Prior mean of the initial state.

    :param float C0: Prior variance of the initial state.

    :rtype: :class:`FilterOutput`
    """
    config = config or FilterConfig()
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    if n == 0:
        raise EstimationError("ekf_forward needs at least one observation")
    V = np.broadcast_to(np.asarray(V, dtype=float), (n,))
    if not (np.all(V > 0) and W > 0 and C0 > 0):
        raise EstimationError("V, W and the initial variance must be positive")
    if len(transition) < n:
        raise EstimationError(
            "Transition covers %d steps, series has %d" % (len(transition), n)
        )

    a = np.empty(n)
    R = np.empty(n)
    Q = np.empty(n)
    J = np.empty(n)
    ll = np.zeros(n)
    m = np.empty(n + 1)
    C = np.empty(n + 1)
    m[0], C[0] = m0, C0

    for k in range(n):
        J[k] = transition.jacobian(k, m[k])
        a[k] = transition.mean(k, m[k])
        R[k] = J[k] * J[k] * C[k] + W
        Q[k] = R[k] + V[k]
        _check(R[k], config.ceiling, "Predicted variance", k)
        _check(a[k], np.inf, "Predicted mean", k)
        if np.isnan(y[k]):
            m[k + 1] = a[k]
            C[k + 1] = R[k]
            continue
        error = y[k] - a[k]
        gain = R[k] / Q[k]
        m[k + 1] = a[k] + gain * error
        C[k + 1] = R[k] * V[k] / Q[k]
        ll[k] = -0.5 * (_LOG_2PI + np.log(Q[k]) + error * error / Q[k])

    return FilterOutput(a=a, R=R, m=m, C=C, f=a.copy(), Q=Q, J=J, loglik_terms=ll)


def _backward_moments(output, k, x_next):
    gain = output.C[k] * output.J[k] / output.R[k]
    h = output.m[k] + gain * (x_next - output.a[k])
    H = output.C[k] - gain * gain * output.R[k]
    return h, max(H, 0.0)


def ffbs_sample(output, rng, config=None, nonnegative=True):
    """
    Draw a state path x_0..x_n from the linearized smoothing
    distribution, reusing the Jacobians stored by :func:`ekf_forward`.

    With ``nonnegative`` set, a negative draw is redrawn up to
    ``config.max_redraws`` times and then floored at 0; both counts are
    returned with the path.

    :param rng: ``numpy.random.Generator``.

    :rtype: :class:`StatePath`
    """
    config = config or FilterConfig()
    n = len(output)
    x = np.empty(n + 1)
    redraws = floored = 0

    def draw(mean, variance):
        nonlocal redraws, floored
        sd = np.sqrt(variance)
        value = mean + sd * rng.standard_normal()
        if not nonnegative or value >= 0:
            return value
        for _ in range(config.max_redraws):
            redraws += 1
            value = mean + sd * rng.standard_normal()
            if value >= 0:
                return value
        floored += 1
        return 0.0

    x[n] = draw(output.m[n], output.C[n])
    for k in range(n - 1, -1, -1):
        h, H = _backward_moments(output, k, x[k + 1])
        x[k] = draw(h, H)
    if floored:
        logger.warning("ffbs_sample: %d state draw(s) floored at zero", floored)
    return StatePath(values=x, redraws=redraws, floored=floored)


def rts_smooth(output):
    """
    Extended Rauch-Tung-Striebel smoother.

    :returns: (means, variances), each of length n + 1.
    """
    n = len(output)
    s = np.empty(n + 1)
    S = np.empty(n + 1)
    s[n], S[n] = output.m[n], output.C[n]
    for k in range(n - 1, -1, -1):
        gain = output.C[k] * output.J[k] / output.R[k]
        s[k] = output.m[k] + gain * (s[k + 1] - output.a[k])
        S[k] = output.C[k] + gain * gain * (S[k + 1] - output.R[k])
    return s, S


def platform_pass(panel, params, rng=None, spec=None, config=None, init=None):
    """
    Filter the platform series and, given ``rng``, sample its path.

    Complements never enter the platform pass.

    :returns: (:class:`StatePath` or None, :class:`FilterOutput`)
    """
    config = config or FilterConfig()
    transition = PlatformTransition.from_panel(params, panel, spec)
    if init is None:
        init = diffuse_init(panel.y, config.init_window, config.init_scale, config.init_floor)
    output = ekf_forward(panel.y, transition, params.V_p, params.W_p, init[0], init[1], config)
    path = ffbs_sample(output, rng, config) if rng is not None else None
    return path, output


def conditional_complement_pass(series, params_j, m_path, rng=None, spec=None,
                                config=None, init=None):
    """
    Filter (and sample) one complement treating the platform path as
    known.

    :param series: :class:`jointdiffusion.panel.ComplementSeries`.

    :param m_path: Platform states m_0..m_T, either a sampled path or the
        filtered means.

    :returns: (:class:`StatePath` or None, :class:`FilterOutput`); state
        index 0 is the day before launch.
    """
    config = config or FilterConfig()
    transition = ComplementTransition.from_series(params_j, series, m_path, spec)
    if init is None:
        init = diffuse_init(series.y, config.init_window, config.init_scale, config.init_floor)
    output = ekf_forward(series.y, transition, params_j.V_j, params_j.W_j, init[0], init[1], config)
    path = ffbs_sample(output, rng, config) if rng is not None else None
    return path, output
