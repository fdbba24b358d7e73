"""
Shared fixtures: a small, well-behaved panel and its true parameters.
"""

import os
import unittest

import numpy as np
import pandas as pd

from jointdiffusion.archive import DrawArchive, DrawRecord
from jointdiffusion.model import THETA_NAMES, ComplementParams, PlatformParams
from jointdiffusion.preprocess import RawInputs
from jointdiffusion.sampler import MCMCConfig, PriorConfig, run_chain
from jointdiffusion.simulator import SimulationConfig, simulate_panel


#: Set JOINTDIFFUSION_SLOW=1 to run the long acceptance checks.
SLOW = os.environ.get("JOINTDIFFUSION_SLOW") == "1"

slow = unittest.skipUnless(SLOW, "set JOINTDIFFUSION_SLOW=1 to run")


TAME_PLATFORM = {
    "p0": 0.01, "beta": (0.0, 0.0), "rho": (0.004, 0.0), "q": 0.05,
    "M0": 1.0, "kappa": 0.5, "V_p": 1e-6, "W_p": 1e-6,
}

TAME_COMPLEMENT = {
    "alpha": 0.3, "delta": 0.01, "p0j": 0.01, "p1j": 0.002, "p2j": 0.002,
    "q0j": 0.05, "q1j": 0.001, "q2j": 0.001, "q3j": 0.001,
    "V_j": 1e-8, "W_j": 1e-8,
}


def tame_platform(**changes):
    values = dict(TAME_PLATFORM)
    values.update(changes)
    return PlatformParams(**values)


def tame_complement(**changes):
    values = dict(TAME_COMPLEMENT)
    values.update(changes)
    return ComplementParams(**values)


def tame_config(T=120, J=2, seed=0, **changes):
    """
    Panel whose platform grows smoothly towards its potential and whose
    complements stay well inside theirs.
    """
    changes.setdefault("platform", tame_platform())
    changes.setdefault("complements", tuple(tame_complement() for _ in range(J)))
    return SimulationConfig(T=T, J=J, seed=seed, **changes)


def tame_result(T=120, J=2, seed=0, **changes):
    return simulate_panel(tame_config(T, J, seed, **changes))


def tame_priors():
    return PriorConfig(ig_scale=1e-8)


def synthetic_archive(draws=20, chains=1, eta=False, J=2, ids=("a", "b"), variant="no_churn"):
    """
    Hand-made archive around the tame parameters; no sampler involved.
    """
    rng = np.random.default_rng(0)
    archive = DrawArchive(seed=3, config_hash="abc", variant=variant, ids=ids)
    for chain in range(chains):
        for i in range(draws):
            platform = tame_platform(p0=0.01 + 0.001 * rng.standard_normal())
            complements = [tame_complement(alpha=0.3 + 0.01 * j + 0.001 * i) for j in range(J)]
            archive.append(DrawRecord(
                iteration=10 + i, chain=chain, platform=platform, complements=complements,
                loglik=-float(i), acceptance={"potential": float(i % 2)},
                eta=np.full((2, len(THETA_NAMES)), float(i)) if eta else None,
                Sigma_eps=np.eye(len(THETA_NAMES)) if eta else None,
                m_path=np.arange(4.0) if i == 0 else None,
                n_paths={ids[0]: np.arange(3.0)} if i == 0 else None,
            ))
    return archive


def short_archive(result, iterations=12, seed=0, spec=None):
    """
    A few sampler iterations started at the truth.
    """
    config = MCMCConfig(
        iterations=iterations, burn_in=2, thin=1, path_thin=1, seed=seed, hierarchy=False,
    )
    init = (result.config.platform, list(result.complements))
    return run_chain(result.panel, tame_priors(), config, spec, init=init)


def raw_inputs():
    """
    Ten platform days with day 6 missing, add-on "a" from day 1 and "b"
    from day 4.
    """
    dates = pd.date_range("2010-01-01", periods=10).strftime("%Y-%m-%d")
    platform = pd.DataFrame({
        "date": dates,
        "platform_users": 100.0 + 10.0 * np.arange(10),
        "chrome_usage": np.linspace(0.1, 0.2, 10),
        "ie_usage": np.linspace(0.6, 0.5, 10),
        "amo_contributions": [40, 45, 50, 47, 52, 48, 46, 51, 49, 44],
        "queue_length": [100, 98, 97, 99, 101, 102, 100, 99, 98, 97],
        "addons_created": np.cumsum(np.full(10, 5)),
        "platform_release": [0, 0, 1, 0, 0, 0, 0, 1, 0, 0],
    })
    platform.loc[4, "platform_users"] = np.nan
    platform = platform.drop(index=5)
    rows = []
    for addon, launch in (("a", 1), ("b", 4)):
        for day in range(launch, 11):
            rows.append({
                "date": dates[day - 1], "addon_id": addon, "downloads": 2.0 * (day - launch + 1),
                "usage": 1.0 + day if addon == "a" else 3.0, "rating_mean": 4.0,
                "rating_var": 0.1 * (day % 3), "new_version": int(day == launch + 2),
            })
    complements = pd.DataFrame(rows)
    meta = pd.DataFrame({
        "addon_id": ["a", "b"], "category": ["tools", "tools"], "ask_money": [0, 1],
        "meet_developer": [1, 0], "license": ["fully_free", "Mozilla"],
    })
    return RawInputs(platform, complements, meta)
