"""
Exceptions raised by jointdiffusion.
"""


class JointDiffusionError(Exception):
    """
    jointdiffusion-specific exceptions are all inherited from
    JointDiffusionError.
    """


class ConfigurationError(JointDiffusionError):
    """
    A configuration file, environment override or keyword argument was
    invalid: unknown key, unparsable value, or a value outside its
    documented range.
    """


# Model

class ModelError(JointDiffusionError):
    """
    A deterministic model quantity could not be evaluated for the given
    parameters and states.
    """


class NonPositivePotential(ModelError):
    """
    The platform market potential M_t = M0 + kappa * A_t is not strictly
    positive. Happens with pathological kappa draws; the sampler rejects
    such draws.
    """


class DegeneratePotential(ModelError):
    """
    The complement market potential alpha * m is at or below the floor
    (1e-12 model units), so the imitation ratio is undefined.
    """


class DimensionMismatch(ModelError):
    """
    A covariate vector does not have the length of its coefficient vector.
    """


# Data

class DataError(JointDiffusionError):
    """
    Input data or a persisted artifact violates its documented schema.
    """


class MissingColumn(DataError):
    """
    A required raw input column is absent.
    """


class WindowViolation(DataError):
    """
    A complement observation window (or a release day) lies outside the
    platform window.
    """


class NonMonotoneCumulative(DataError):
    """
    A cumulative series (downloads, add-ons created) decreases.
    """


class DegenerateSeries(DataError):
    """
    A series cannot be rescaled because its scale constant is zero, e.g.
    a constant series under demean-then-rescale.
    """


class HorizonMismatch(DataError):
    """
    An effort schedule does not cover the planning horizon, or two
    schedules being compared have different horizons.
    """


class MissingArchive(DataError):
    """
    A run directory does not contain a draw archive or manifest.
    """


# Estimation

class EstimationError(JointDiffusionError):
    """
    Filtering, simulation or sampling failed numerically.
    """


class NumericalBlowup(EstimationError):
    """
    A filter variance became non-finite or exceeded the configured
    ceiling.
    """


class ExplosiveTrajectory(EstimationError):
    """
    More than half of the simulated state steps had to be redrawn to stay
    nonnegative; the parameters are inconsistent with positivity.
    """


class ChainDiverged(EstimationError):
    """
    The chain produced a non-finite likelihood for too many consecutive
    iterations.
    """


class PriorMisconfiguration(EstimationError):
    """
    A prior has a nonpositive variance, an inverse-gamma shape <= 1, or
    otherwise cannot be used.
    """


class RankDeficientDesign(EstimationError):
    """
    The hierarchy design matrix D does not have full column rank, or has
    no more rows than columns.
    """


class NonStationaryDraw(EstimationError):
    """
    An AR(1) coefficient draw fell outside (-1, 1) and could not be
    replaced by a stationary one.
    """


# Diagnostics

class DiagnosticsError(JointDiffusionError):
    """
    A model-comparison or convergence summary could not be produced.
    """


class NonFiniteDeviance(DiagnosticsError):
    """
    A deviance evaluated during DIC computation is not finite.
    """


class UnknownVariant(DiagnosticsError):
    """
    Caller requested a model variant by a name that is not registered,
    e.g. "no_churn" -> VariantSpec, but no variant could be found.
    """


class InsufficientDraws(DiagnosticsError):
    """
    A convergence report needs at least two chains or 1000 draws.
    """
