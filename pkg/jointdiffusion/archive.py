"""
:class:`.DrawArchive` keeps the kept MCMC draws of one or more chains and
turns them into posterior summaries.

Archives are stored as newline-delimited JSON: a header object on the
first line (schema, seed, config hash, variant, complement ids), then one
object per kept draw.
"""

import json
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from jointdiffusion.exc import DataError, MissingArchive
from jointdiffusion.model import (
    DESIGN_LABELS,
    INTERACTION_NAMES,
    THETA_NAMES,
    ComplementParams,
    PlatformParams,
)
from jointdiffusion.util import to_jsonable


__all__ = (
    "ARCHIVE_SCHEMA",
    "SUMMARY_COLUMNS",
    "PLATFORM_ROWS",
    "COMPLEMENT_ROWS",
    "DrawRecord",
    "DrawArchive",
    "summarize",
    "load_archive",
)


ARCHIVE_SCHEMA = "jointdiffusion-draws/1"

#: Column layout of every posterior summary table.
SUMMARY_COLUMNS = ("estimate", "sd", "2.5th", "97.5th")

PLATFORM_ROWS = (
    ("M0", "Intercept of market size"),
    ("kappa", "Total add-ons created"),
    ("p0", "Unobserved external market force"),
    ("beta[0]", "Competitor usage 1"),
    ("beta[1]", "Competitor usage 2"),
    ("rho[0]", "AMO total number of contributions"),
    ("rho[1]", "AMO length of the nomination queue"),
    ("q", "Unobserved internal market force"),
    ("V_p", "Observation equation"),
    ("W_p", "State equation"),
)

COMPLEMENT_ROWS = (
    ("alpha", "Relevance factor"),
    ("delta", "Churn factor"),
    ("p0j", "Unobserved external force"),
    ("p1j", "Add-on new version"),
    ("p2j", "Platform new version"),
    ("q0j", "Unobserved internal force"),
    ("q1j", "Rating variance"),
    ("q2j", "Observational learning"),
    ("q3j", "Rating valence mean"),
    ("V_j", "Observation equation"),
    ("W_j", "State equation"),
)


def summarize(values):
    """
    (estimate, sd, 2.5th, 97.5th) of a 1-d sample.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return (np.nan,) * 4
    sd = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    low, high = np.percentile(values, [2.5, 97.5])
    return float(np.mean(values)), sd, float(low), float(high)


def _draw_mean(draws):
    """
    Mean over draws (axis 0); entries that never move keep their value.
    """
    draws = np.asarray(draws, dtype=float)
    mean = np.where(np.ptp(draws, axis=0) == 0, draws[0], np.mean(draws, axis=0))
    return float(mean) if mean.ndim == 0 else mean


@dataclass
class DrawRecord(object):
    """
    One kept iteration of one chain.

    ``acceptance`` maps an MH block name to the fraction of its proposals
    accepted in this iteration; ``counters`` holds the backward-sampling
    redraw/floor counts.
    """

    iteration: int
    chain: int
    platform: PlatformParams
    complements: list
    loglik: float
    eta: np.ndarray = None
    Sigma_eps: np.ndarray = None
    acceptance: dict = field(default_factory=dict)
    counters: dict = field(default_factory=dict)
    m_path: np.ndarray = None
    n_paths: dict = None

    def to_dict(self):
        return to_jsonable({
            "iteration": self.iteration,
            "chain": self.chain,
            "platform": self.platform.to_dict(),
            "complements": [params.to_dict() for params in self.complements],
            "loglik": float(self.loglik),
            "eta": self.eta,
            "Sigma_eps": self.Sigma_eps,
            "acceptance": self.acceptance,
            "counters": self.counters,
            "m_path": self.m_path,
            "n_paths": self.n_paths,
        })

    @classmethod
    def from_dict(cls, data):
        def array(value):
            return None if value is None else np.asarray(value, dtype=float)

        loglik = data.get("loglik")
        return cls(
            iteration=int(data["iteration"]),
            chain=int(data["chain"]),
            platform=PlatformParams.from_dict(data["platform"]),
            complements=[ComplementParams.from_dict(c) for c in data["complements"]],
            loglik=float("nan") if loglik is None else float(loglik),
            eta=array(data.get("eta")),
            Sigma_eps=array(data.get("Sigma_eps")),
            acceptance=data.get("acceptance") or {},
            counters=data.get("counters") or {},
            m_path=array(data.get("m_path")),
            n_paths=(
                None if data.get("n_paths") is None
                else {k: array(v) for k, v in data["n_paths"].items()}
            ),
        )


class DrawArchive(object):
    """
    Kept draws with their provenance.

    :param int seed: Master seed of the run.

    :param str config_hash: :meth:`jointdiffusion.config.Config.digest` of
        the run configuration.

    :param str variant: Name of the model variant that was fitted.

    :param ids: Complement ids, in the order of each record's
        ``complements`` list.
    """

    def __init__(self, seed=None, config_hash=None, variant="proposed", ids=(), records=None):
        self.seed = seed
        self.config_hash = config_hash
        self.variant = variant
        self.ids = tuple(ids)
        self.records = []
        for record in records or ():
            self.append(record)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __repr__(self):
        return "DrawArchive(variant=%r, draws=%d, chains=%d)" % (
            self.variant, len(self), len(self.chains())
        )

    def append(self, record):
        for previous in reversed(self.records):
            if previous.chain == record.chain:
                if record.iteration <= previous.iteration:
                    raise DataError(
                        "Iteration %d of chain %d does not follow %d"
                        % (record.iteration, record.chain, previous.iteration)
                    )
                break
        self.records.append(record)

    def extend(self, other):
        for record in other:
            self.append(record)
        return self

    def chains(self):
        return sorted({record.chain for record in self.records})

    def chain_records(self, chain):
        return [record for record in self.records if record.chain == chain]

    def flatten(self, record):
        """
        Scalar parameter name -> value for one record.

        Complement parameters are keyed ``name[id]``, hierarchy
        coefficients ``eta[label,theta]`` and residual variances
        ``Sigma_eps[theta]``.
        """
        params = record.platform
        values = {"p0": params.p0, "q": params.q, "M0": params.M0, "kappa": params.kappa,
                  "V_p": params.V_p, "W_p": params.W_p}
        for i, value in enumerate(params.beta):
            values["beta[%d]" % i] = value
        for i, value in enumerate(params.rho):
            values["rho[%d]" % i] = value
        for key, cparams in zip(self.ids, record.complements):
            for name, value in cparams.to_dict().items():
                values["%s[%s]" % (name, key)] = value
        if record.eta is not None:
            for r, label in enumerate(DESIGN_LABELS[:record.eta.shape[0]]):
                for c, name in enumerate(THETA_NAMES):
                    values["eta[%s,%s]" % (label, name)] = record.eta[r, c]
        if record.Sigma_eps is not None:
            for c, name in enumerate(THETA_NAMES):
                values["Sigma_eps[%s]" % name] = record.Sigma_eps[c, c]
        return values

    def names(self):
        if not self.records:
            return []
        return list(self.flatten(self.records[0]))

    def values(self, name):
        """
        All draws of ``name``, chains concatenated.
        """
        return np.array([self.flatten(record)[name] for record in self.records])

    def matrix(self, name):
        """
        (chains, draws) array of ``name``, cut to the shortest chain.
        """
        per_chain = [
            [self.flatten(record)[name] for record in self.chain_records(chain)]
            for chain in self.chains()
        ]
        length = min(len(draws) for draws in per_chain)
        return np.array([draws[:length] for draws in per_chain], dtype=float)

    def posterior_summary(self, names=None):
        """
        DataFrame indexed by parameter name with the columns
        estimate, sd, 2.5th, 97.5th.
        """
        if not self.records:
            raise MissingArchive("Archive has no draws")
        flat = pd.DataFrame([self.flatten(record) for record in self.records])
        names = list(names) if names is not None else list(flat.columns)
        rows = [summarize(flat[name].to_numpy()) for name in names]
        return pd.DataFrame(rows, index=pd.Index(names, name="parameter"), columns=SUMMARY_COLUMNS)

    def platform_table(self):
        """
        Platform parameters with their labels.
        """
        table = self.posterior_summary([name for name, _ in PLATFORM_ROWS])
        table.insert(0, "label", [label for _, label in PLATFORM_ROWS])
        return table

    def complement_table(self):
        """
        Add-on parameters summarized over the cross-complement mean of each
        draw.
        """
        if not self.records:
            raise MissingArchive("Archive has no draws")
        rows = list(COMPLEMENT_ROWS)
        if any(getattr(c, name) != 0.0 for record in self.records
               for c in record.complements for name in INTERACTION_NAMES):
            rows += [(name, "Interaction %s" % name) for name in INTERACTION_NAMES]
        data = []
        for name, _ in rows:
            pooled = [
                np.mean([getattr(c, name) for c in record.complements])
                for record in self.records if record.complements
            ]
            data.append(summarize(pooled))
        index = pd.Index([name for name, _ in rows], name="parameter")
        table = pd.DataFrame(data, index=index, columns=SUMMARY_COLUMNS)
        table.insert(0, "label", [label for _, label in rows])
        return table

    def heterogeneity_table(self):
        """
        Hierarchy coefficients, indexed by (theta name, design label).
        """
        with_eta = [record for record in self.records if record.eta is not None]
        if not with_eta:
            raise MissingArchive("Archive has no hierarchy draws")
        K = with_eta[0].eta.shape[0]
        index, data = [], []
        for c, name in enumerate(THETA_NAMES):
            for r, label in enumerate(DESIGN_LABELS[:K]):
                index.append((name, label))
                data.append(summarize([record.eta[r, c] for record in with_eta]))
        return pd.DataFrame(
            data, index=pd.MultiIndex.from_tuples(index, names=("theta", "design")),
            columns=SUMMARY_COLUMNS,
        )

    def posterior_mean_params(self):
        """
        :returns: (PlatformParams, list of ComplementParams) at the
            posterior mean.
        """
        if not self.records:
            raise MissingArchive("Archive has no draws")
        platforms = [record.platform.to_dict() for record in self.records]
        platform = PlatformParams.from_dict({
            key: _draw_mean([p[key] for p in platforms])
            for key in platforms[0]
        })
        complements = []
        for j in range(len(self.records[0].complements)):
            draws = [record.complements[j].to_dict() for record in self.records]
            complements.append(ComplementParams.from_dict({
                key: _draw_mean([d[key] for d in draws]) for key in draws[0]
            }))
        return platform, complements

    def complement_estimates(self):
        """
        Posterior mean of each add-on's diffusion parameters, one row per
        complement id; the noise variances are left out.
        """
        _, complements = self.posterior_mean_params()
        ids = list(self.ids) or [str(j) for j in range(len(complements))]
        names = [name for name, _ in COMPLEMENT_ROWS if name not in ("V_j", "W_j")]
        return pd.DataFrame(
            [[getattr(params, name) for name in names] for params in complements],
            index=pd.Index(ids, name="complement"), columns=names,
        )

    def acceptance_rates(self):
        """
        Mean acceptance fraction of each MH block over the kept draws.
        """
        blocks = sorted({name for record in self.records for name in record.acceptance})
        return {
            name: float(np.mean([
                record.acceptance[name] for record in self.records if name in record.acceptance
            ]))
            for name in blocks
        }

    def header(self):
        return to_jsonable({
            "schema": ARCHIVE_SCHEMA,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "variant": self.variant,
            "ids": list(self.ids),
        })

    def save(self, path):
        with open(path, "w") as handle:
            handle.write(json.dumps(self.header(), sort_keys=True, separators=(",", ":")))
            handle.write("\n")
            for record in self.records:
                handle.write(json.dumps(record.to_dict(), sort_keys=True, separators=(",", ":")))
                handle.write("\n")
        return path

    @classmethod
    def load(cls, path):
        try:
            handle = open(path, "r")
        except (IOError, OSError):
            raise MissingArchive("No draw archive at %s" % path)
        with handle:
            lines = [line for line in handle if line.strip()]
        if not lines:
            raise MissingArchive("Draw archive %s is empty" % path)
        header = json.loads(lines[0])
        if header.get("schema") != ARCHIVE_SCHEMA:
            raise DataError("%s is not a %s file" % (path, ARCHIVE_SCHEMA))
        archive = cls(
            seed=header.get("seed"), config_hash=header.get("config_hash"),
            variant=header.get("variant", "proposed"), ids=header.get("ids", ()),
        )
        for line in lines[1:]:
            archive.append(DrawRecord.from_dict(json.loads(line)))
        return archive


def load_archive(path):
    return DrawArchive.load(path)
