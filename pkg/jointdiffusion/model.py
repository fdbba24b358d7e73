"""
The joint platform/complement diffusion model.

Everything here is deterministic: time-varying external and internal
forces, the market potential, the one-day drift of the latent cumulative
adopter counts, and the derivative of each drift map with respect to the
lagged state (used by the extended Kalman filter).

All quantities are in rescaled model units. The discrete recursions are

    m_t    = m_{t-1} + (p_t + q m_{t-1} / M_t)(M_t - m_{t-1}) + w_t
    n_jt   = n_{j,t-1} + (p_jt + q_jt (1 - delta_j) n_{j,t-1} / (alpha_j m_{t-1}))
                          * (alpha_j m_{t-1} - n_{j,t-1}) - delta_j n_{j,t-1} + w_jt

with M_t = M0 + kappa A_t, p_t = p0 + X_t beta + Z_t rho,
p_jt = p0j + p1j PV_jt + p2j AV_jt and
q_jt = q0j + q1j RTV_jt + q2j OL_jt + q3j STAVG_jt.
"""

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from jointdiffusion.exc import (
    ConfigurationError,
    DegeneratePotential,
    DimensionMismatch,
    NonPositivePotential,
)
from jointdiffusion.util import as_vector


__all__ = (
    "POTENTIAL_FLOOR",
    "THETA_NAMES",
    "PLATFORM_PINNABLE",
    "COMPLEMENT_PINNABLE",
    "X_LABELS",
    "Z_LABELS",
    "DESIGN_LABELS",
    "INTERACTION_NAMES",
    "PlatformParams",
    "ComplementParams",
    "CovariateFrame",
    "ComplementFrame",
    "HierarchyDesign",
    "ModelSpec",
    "market_potential",
    "platform_external_force",
    "complement_forces",
    "platform_drift",
    "complement_drift",
    "platform_jacobian",
    "complement_jacobian",
    "PlatformTransition",
    "ComplementTransition",
)


#: alpha * m must exceed this before the complement imitation ratio is used.
POTENTIAL_FLOOR = 1e-12

#: Fixed ordering of the per-complement parameter vector Theta_j.
THETA_NAMES = (
    "alpha", "delta", "p0j", "p1j", "p2j", "q0j", "q1j", "q2j", "q3j",
)

#: Default covariate labels of the platform external force.
X_LABELS = ("chrome", "ie")
Z_LABELS = ("amo_contributions", "queue_length")

#: Hierarchy design columns (intercept first).
DESIGN_LABELS = (
    "intercept", "ask_money", "meet_developer",
    "license_fully_free", "license_restricted", "license_mozilla",
)

PLATFORM_PINNABLE = frozenset(("rho", "kappa", "beta"))
COMPLEMENT_PINNABLE = frozenset(
    ("delta", "p1j", "p2j", "q1j", "q2j", "q3j", "p3j", "q4j", "q5j")
)
INTERACTION_NAMES = ("p3j", "q4j", "q5j")


@dataclass
class PlatformParams(object):
    """
    Parameters of the platform diffusion and its noise terms.

    ``beta`` multiplies competitor usage X_t and ``rho`` the governance
    covariates Z_t (AMO contributions, nomination queue length).
    """

    p0: float
    beta: np.ndarray
    rho: np.ndarray
    q: float
    M0: float
    kappa: float
    V_p: float
    W_p: float

    def __post_init__(self):
        self.beta = as_vector(self.beta, name="beta")
        self.rho = as_vector(self.rho, name="rho")
        for name in ("p0", "q", "M0", "kappa", "V_p", "W_p"):
            setattr(self, name, float(getattr(self, name)))
        if not self.M0 > 0:
            raise ConfigurationError("M0 must be positive, got %r" % self.M0)
        if not (self.V_p > 0 and self.W_p > 0):
            raise ConfigurationError("V_p and W_p must be positive")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return {
            "p0": self.p0, "beta": self.beta.tolist(), "rho": self.rho.tolist(),
            "q": self.q, "M0": self.M0, "kappa": self.kappa,
            "V_p": self.V_p, "W_p": self.W_p,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(**{f.name: data[f.name] for f in dataclasses.fields(cls)})


@dataclass
class ComplementParams(object):
    """
    Parameters of one complement's diffusion.

    ``p3j``, ``q4j`` and ``q5j`` are the interaction coefficients
    (PV x AV, RTV x OL, RTV x STAVG); they stay at zero unless the
    interaction variant is estimated. ``delta`` may be exactly zero only
    when churn is pinned off.
    """

    alpha: float
    delta: float
    p0j: float
    p1j: float
    p2j: float
    q0j: float
    q1j: float
    q2j: float
    q3j: float
    V_j: float
    W_j: float
    p3j: float = 0.0
    q4j: float = 0.0
    q5j: float = 0.0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            setattr(self, f.name, float(getattr(self, f.name)))
        if not 0.0 < self.alpha < 1.0:
            raise ConfigurationError("alpha must lie in (0, 1), got %r" % self.alpha)
        if not 0.0 <= self.delta < 1.0:
            raise ConfigurationError("delta must lie in [0, 1), got %r" % self.delta)
        if not (self.V_j > 0 and self.W_j > 0):
            raise ConfigurationError("V_j and W_j must be positive")

    def theta(self):
        """
        Theta_j in the fixed order of :data:`THETA_NAMES`.
        """
        return np.array([getattr(self, name) for name in THETA_NAMES])

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data):
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})

    @classmethod
    def from_theta(cls, theta, V_j, W_j, **extra):
        values = dict(zip(THETA_NAMES, np.asarray(theta, dtype=float)))
        values.update(extra)
        return cls(V_j=V_j, W_j=W_j, **values)


@dataclass
class CovariateFrame(object):
    """
    Platform-level covariates of one day.
    """

    t: int
    X: np.ndarray
    Z: np.ndarray
    A: float


@dataclass
class ComplementFrame(object):
    """
    Covariates of one complement on one day.
    """

    t: int
    PV: float = 0.0
    AV: float = 0.0
    RTV: float = 0.0
    STAVG: float = 0.0
    OL: float = 0.0


@dataclass
class HierarchyDesign(object):
    """
    Second-stage regression Theta_j = D_j eta + eps_j.

    ``D`` is J x K (intercept first), ``eta`` K x 9 and ``Sigma_eps`` the
    9 x 9 residual covariance (a diagonal matrix when the diagonal form is
    used).
    """

    D: np.ndarray
    eta: np.ndarray
    Sigma_eps: np.ndarray
    labels: tuple = DESIGN_LABELS

    def __post_init__(self):
        self.D = np.atleast_2d(np.asarray(self.D, dtype=float))
        self.eta = np.atleast_2d(np.asarray(self.eta, dtype=float))
        self.Sigma_eps = np.atleast_2d(np.asarray(self.Sigma_eps, dtype=float))
        if self.eta.shape != (self.D.shape[1], len(THETA_NAMES)):
            raise ConfigurationError(
                "eta must be %d x %d" % (self.D.shape[1], len(THETA_NAMES))
            )

    def mean(self, j):
        return self.D[j].dot(self.eta)


@dataclass(frozen=True)
class ModelSpec(object):
    """
    A model variant: which coefficients are pinned to zero and which
    optional blocks are active.

    :param frozenset pinned: Parameter names fixed at 0. Platform names:
        ``rho``, ``kappa``, ``beta``; complement names: ``delta``,
        ``p1j``..``q3j``.

    :param bool interactions: Estimate p3j (PV x AV), q4j (RTV x OL) and
        q5j (RTV x STAVG).

    :param bool carryover: Use smoothed release signals; when False the
        raw release-day indicators enter instead.

    :param tuple hierarchy_masks: ``(theta_name, columns)`` pairs restricting
        the hierarchy regression of that Theta_j component to the given
        design columns (e.g. intercept only).
    """

    name: str = "proposed"
    pinned: frozenset = field(default_factory=frozenset)
    interactions: bool = False
    carryover: bool = True
    hierarchy_masks: tuple = ()

    def __post_init__(self):
        unknown = set(self.pinned) - PLATFORM_PINNABLE - COMPLEMENT_PINNABLE
        if unknown:
            raise ConfigurationError("Cannot pin %s" % ", ".join(sorted(unknown)))

    def is_pinned(self, name):
        return name in self.pinned

    def active_interactions(self):
        if not self.interactions:
            return ()
        return tuple(n for n in INTERACTION_NAMES if n not in self.pinned)

    def mask_for(self, theta_name):
        for name, columns in self.hierarchy_masks:
            if name == theta_name:
                return tuple(columns)
        return None

    def apply_platform(self, params):
        """
        Zero the pinned platform coefficients.
        """
        changes = {}
        if "rho" in self.pinned:
            changes["rho"] = np.zeros_like(params.rho)
        if "beta" in self.pinned:
            changes["beta"] = np.zeros_like(params.beta)
        if "kappa" in self.pinned:
            changes["kappa"] = 0.0
        return params.replace(**changes) if changes else params

    def apply_complement(self, params):
        """
        Zero the pinned complement coefficients and the inactive
        interaction terms.
        """
        changes = {name: 0.0 for name in self.pinned if name in COMPLEMENT_PINNABLE}
        if not self.interactions:
            changes.update({name: 0.0 for name in INTERACTION_NAMES})
        return params.replace(**changes) if changes else params


def market_potential(M0, kappa, A_t):
    """
    Platform market potential M_t = M0 + kappa * A_t.

    Works elementwise on arrays.

    :raises NonPositivePotential: if any M_t <= 0.
    """
    M_t = M0 + kappa * np.asarray(A_t, dtype=float)
    if np.any(M_t <= 0):
        raise NonPositivePotential(
            "Market potential must be positive (M0=%r, kappa=%r)" % (M0, kappa)
        )
    return float(M_t) if np.ndim(M_t) == 0 else M_t


def platform_external_force(params, frame):
    """
    p_t = p0 + X_t . beta + Z_t . rho for one :class:`CovariateFrame`.
    """
    X = as_vector(frame.X, len(params.beta), name="X")
    Z = as_vector(frame.Z, len(params.rho), name="Z")
    return params.p0 + X.dot(params.beta) + Z.dot(params.rho)


def complement_forces(params_j, frame):
    """
    External and internal forces (p_jt, q_jt) of one complement on one
    day.
    """
    p_jt = (params_j.p0j + params_j.p1j * frame.PV + params_j.p2j * frame.AV
            + params_j.p3j * frame.PV * frame.AV)
    q_jt = (params_j.q0j + params_j.q1j * frame.RTV + params_j.q2j * frame.OL
            + params_j.q3j * frame.STAVG + params_j.q4j * frame.RTV * frame.OL
            + params_j.q5j * frame.RTV * frame.STAVG)
    return p_jt, q_jt


def platform_drift(m_prev, p_t, q, M_t):
    """
    One-day change of the platform mean,
    (p_t + q m_prev / M_t)(M_t - m_prev).
    """
    if np.any(np.asarray(M_t) <= 0):
        raise NonPositivePotential("Market potential must be positive")
    return (p_t + q * m_prev / M_t) * (M_t - m_prev)


def _check_potential(potential):
    if np.any(np.asarray(potential) <= POTENTIAL_FLOOR):
        raise DegeneratePotential(
            "Complement market potential alpha*m=%r is at or below %g"
            % (potential, POTENTIAL_FLOOR)
        )


def complement_drift(n_prev, m_prev, p_jt, q_jt, alpha, delta):
    """
    One-day change of a complement mean, including churn.
    """
    potential = alpha * m_prev
    _check_potential(potential)
    imitation = q_jt * (1.0 - delta)
    return (p_jt + imitation * n_prev / potential) * (potential - n_prev) - delta * n_prev


def platform_jacobian(m_prev, p_t, q, M_t):
    """
    Derivative of m_prev + platform_drift with respect to m_prev.
    """
    if np.any(np.asarray(M_t) <= 0):
        raise NonPositivePotential("Market potential must be positive")
    return 1.0 + q - p_t - 2.0 * q * m_prev / M_t


def complement_jacobian(n_prev, m_prev, p_jt, q_jt, alpha, delta):
    """
    Derivative of n_prev + complement_drift with respect to n_prev.
    """
    potential = alpha * m_prev
    _check_potential(potential)
    imitation = q_jt * (1.0 - delta)
    return 1.0 + imitation - p_jt - delta - 2.0 * imitation * n_prev / potential


class PlatformTransition(object):
    """
    Platform state map with covariates bound, as the filter consumes it.

    Step ``k`` (0-based) maps m_k to the mean of m_{k+1}, using the
    covariates of day k+1.
    """

    def __init__(self, params, X, Z, A, spec=None):
        spec = spec or ModelSpec()
        params = spec.apply_platform(params)
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        frames_ok = X.shape[1] == len(params.beta) and Z.shape[1] == len(params.rho)
        if not frames_ok:
            raise DimensionMismatch(
                "Covariates have %d/%d columns, coefficients %d/%d"
                % (X.shape[1], Z.shape[1], len(params.beta), len(params.rho))
            )
        self.params = params
        self.p = params.p0 + X.dot(params.beta) + Z.dot(params.rho)
        self.M = market_potential(params.M0, params.kappa, np.asarray(A, dtype=float))
        self.M = np.atleast_1d(self.M)
        self.q = params.q

    @classmethod
    def from_panel(cls, params, panel, spec=None):
        return cls(params, panel.X, panel.Z, panel.A, spec)

    def __len__(self):
        return len(self.p)

    def drift(self, k, x):
        return platform_drift(x, self.p[k], self.q, self.M[k])

    def mean(self, k, x):
        return x + self.drift(k, x)

    def jacobian(self, k, x):
        return platform_jacobian(x, self.p[k], self.q, self.M[k])


class ComplementTransition(object):
    """
    Complement state map conditional on a platform path.

    ``m_lagged[k]`` is the platform state entering step k, i.e. m_{t-1}
    for the k-th day of the complement window.
    """

    def __init__(self, params, covariates, m_lagged, spec=None):
        spec = spec or ModelSpec()
        params = spec.apply_complement(params)
        self.params = params
        frame = ComplementFrame(
            t=0,
            PV=np.asarray(covariates["PV"], dtype=float),
            AV=np.asarray(covariates["AV"], dtype=float),
            RTV=np.asarray(covariates["RTV"], dtype=float),
            STAVG=np.asarray(covariates["STAVG"], dtype=float),
            OL=np.asarray(covariates["OL"], dtype=float),
        )
        self.p, self.q = complement_forces(params, frame)
        self.p = np.broadcast_to(self.p, frame.PV.shape)
        self.q = np.broadcast_to(self.q, frame.PV.shape)
        self.m = np.asarray(m_lagged, dtype=float)
        if len(self.m) != len(self.p):
            raise DimensionMismatch(
                "Platform path covers %d days, complement window %d"
                % (len(self.m), len(self.p))
            )

    @classmethod
    def from_series(cls, params, series, m_path, spec=None):
        """
        Bind a :class:`jointdiffusion.panel.ComplementSeries` and a full
        platform path m_0..m_T.
        """
        spec = spec or ModelSpec()
        m_path = np.asarray(m_path, dtype=float)
        m_lagged = m_path[series.launch - 1:series.end]
        return cls(params, series.covariates(spec.carryover), m_lagged, spec)

    def __len__(self):
        return len(self.p)

    def drift(self, k, x):
        return complement_drift(
            x, self.m[k], self.p[k], self.q[k], self.params.alpha, self.params.delta
        )

    def mean(self, k, x):
        return x + self.drift(k, x)

    def jacobian(self, k, x):
        return complement_jacobian(
            x, self.m[k], self.p[k], self.q[k], self.params.alpha, self.params.delta
        )
