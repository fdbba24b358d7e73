"""
jointdiffusion estimates how a software platform and its third-party
complements (add-ons) diffuse together. Platform adoption follows a Bass
model whose market potential grows with the number of add-ons created;
each add-on follows its own Bass model, with churn, whose market is a
fraction of current platform adopters.

Build a panel, either from raw CSV files or by simulation:

    >>> from jointdiffusion import default_truth, simulate_panel
    >>> result = simulate_panel(default_truth(T=500, J=8, seed=7))
    >>> panel = result.panel
    >>> panel.T, panel.ids[:2]
    (500, ['addon00', 'addon01'])

Fit the model with the extended-Kalman-filter Gibbs sampler:

    >>> from jointdiffusion import MCMCConfig, run_chains
    >>> archive = run_chains(panel, config=MCMCConfig(iterations=4000, seed=7))
    >>> archive.platform_table()            # estimate, sd, 2.5th, 97.5th

Forecast, compare model variants and reallocate editorial effort:

    >>> from jointdiffusion import one_step_forecast, dic, optimize
    >>> one_step_forecast(archive, panel).mad
    >>> dic(archive, panel).dic
    >>> best = optimize(archive.posterior_mean_params()[0], panel).best

Every failure raises a subclass of
:class:`jointdiffusion.exc.JointDiffusionError`. The package logs to the
``jointdiffusion`` logger and stays silent until the application configures
logging.
"""

__all__ = (
    "__version__",
    "Config",
    "load_config",
    "PlatformParams",
    "ComplementParams",
    "ModelSpec",
    "ObservationPanel",
    "ComplementSeries",
    "load_panel",
    "PreprocessConfig",
    "assemble_panel",
    "read_raw",
    "smooth_releases",
    "standardize",
    "SimulationConfig",
    "default_truth",
    "simulate_panel",
    "FilterConfig",
    "ekf_forward",
    "ffbs_sample",
    "rts_smooth",
    "PriorConfig",
    "MCMCConfig",
    "GibbsSampler",
    "run_chain",
    "run_chains",
    "DrawArchive",
    "load_archive",
    "VARIANTS",
    "build_variant",
    "dic",
    "one_step_forecast",
    "convergence_report",
    "GAConfig",
    "EffortSchedule",
    "evaluate_schedule",
    "optimize",
    "compare_schedules",
    "LIVConfig",
    "LIVData",
    "liv_fit",
    "liv_fit_releases",
)


from jointdiffusion.util import __version__
from jointdiffusion.config import Config, load_config
from jointdiffusion.model import ComplementParams, ModelSpec, PlatformParams
from jointdiffusion.panel import ComplementSeries, ObservationPanel, load_panel
from jointdiffusion.preprocess import (
    PreprocessConfig,
    assemble_panel,
    read_raw,
    smooth_releases,
    standardize,
)
from jointdiffusion.simulator import SimulationConfig, default_truth, simulate_panel
from jointdiffusion.filters import FilterConfig, ekf_forward, ffbs_sample, rts_smooth
from jointdiffusion.sampler import GibbsSampler, MCMCConfig, PriorConfig, run_chain, run_chains
from jointdiffusion.archive import DrawArchive, load_archive
from jointdiffusion.diagnostics import (
    VARIANTS,
    build_variant,
    convergence_report,
    dic,
    one_step_forecast,
)
from jointdiffusion.allocator import (
    EffortSchedule,
    GAConfig,
    compare_schedules,
    evaluate_schedule,
    optimize,
)
from jointdiffusion.endogeneity import LIVConfig, LIVData, liv_fit, liv_fit_releases
