"""
Editorial-effort reallocation.

A schedule spreads a fixed effort budget (AMO contributions) over the
periods of a planning horizon. Its objective is the cumulative one-step
ahead platform forecast obtained when the schedule replaces the observed
contributions covariate, all other fitted parameters held fixed.
:func:`optimize` searches for the best schedule with a genetic algorithm.
"""

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from jointdiffusion.config import section_config
from jointdiffusion.exc import ConfigurationError, DataError, HorizonMismatch
from jointdiffusion.filters import platform_pass
from jointdiffusion.preprocess import TransformRecord
from jointdiffusion.util import as_vector, logger, substream


__all__ = (
    "GRANULARITIES",
    "GAConfig",
    "EffortSchedule",
    "AllocationResult",
    "ScheduleComparison",
    "normalize",
    "period_blocks",
    "observed_schedule",
    "uniform_schedule",
    "governance_transform",
    "schedule_forecast",
    "evaluate_schedule",
    "optimize",
    "exhaustive_search",
    "compare_schedules",
    "load_monthly_effort",
)


GRANULARITIES = ("monthly", "daily")

MONTHLY_EFFORT_PATH = os.path.join(os.path.dirname(__file__), "data", "monthly_effort.csv")


@dataclass
class GAConfig(object):
    """
    Genetic algorithm options (section ``[allocator]``).

    :param int population: Individuals per generation.

    :param int generations: Generations after the initial one.

    :param float crossover: Probability that a child mixes two parents
        (uniform crossover) instead of copying the first.

    :param float mutation: Probability that a gene is mutated.

    :param float mutation_scale: Mutation sd as a fraction of the mean
        effort per period.

    :param int elitism: Best individuals copied unchanged into the next
        generation.

    :param int tournament: Tournament size for parent selection.

    :param levels: Optional discrete effort levels. When given, every gene
        takes one of these raw values and schedules are not rescaled to the
        budget.
    """

    population: int = 100
    generations: int = 300
    crossover: float = 0.8
    mutation: float = 0.05
    mutation_scale: float = 0.1
    elitism: int = 2
    tournament: int = 3
    seed: int = 0
    threads: int = 1
    granularity: str = "monthly"
    levels: tuple = ()

    def __post_init__(self):
        self.levels = tuple(float(level) for level in self.levels)
        if self.population < 2:
            raise ConfigurationError("allocator.population must be at least 2")
        for name in ("crossover", "mutation"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigurationError("allocator.%s must lie in [0, 1]" % name)
        if self.mutation_scale < 0:
            raise ConfigurationError("allocator.mutation_scale must be nonnegative")
        if not 0 <= self.elitism < self.population:
            raise ConfigurationError("allocator.elitism must be below the population size")
        if self.tournament < 1:
            raise ConfigurationError("allocator.tournament must be positive")
        if self.generations < 0:
            raise ConfigurationError("allocator.generations must be nonnegative")
        if self.granularity not in GRANULARITIES:
            raise ConfigurationError(
                "Unknown granularity %r; options are: %s"
                % (self.granularity, ", ".join(GRANULARITIES))
            )
        if any(level < 0 for level in self.levels):
            raise ConfigurationError("allocator.levels must be nonnegative")

    @classmethod
    def from_config(cls, config, **overrides):
        return section_config(cls, config, "allocator", **overrides)


@dataclass
class EffortSchedule(object):
    """
    Effort per period over a planning horizon.

    :param effort: Nonnegative raw effort, one value per period.

    :param periods: ``(label, days)`` pairs; each period's effort is spread
        evenly over its days.
    """

    effort: np.ndarray
    periods: tuple
    budget: float = None
    granularity: str = "monthly"
    objective: float = None

    def __post_init__(self):
        self.periods = tuple((str(label), np.asarray(days, dtype=int)) for label, days in self.periods)
        self.effort = np.asarray(self.effort, dtype=float).reshape(-1)
        if self.effort.shape[0] != len(self.periods):
            raise HorizonMismatch(
                "Schedule has %d values for %d periods" % (self.effort.shape[0], len(self.periods))
            )
        if np.any(self.effort < 0) or not np.all(np.isfinite(self.effort)):
            raise DataError("Effort must be finite and nonnegative")
        if self.budget is None:
            self.budget = float(np.sum(self.effort))

    def __len__(self):
        return len(self.periods)

    @property
    def labels(self):
        return [label for label, _ in self.periods]

    @property
    def days(self):
        return np.concatenate([days for _, days in self.periods])

    @property
    def total(self):
        return float(np.sum(self.effort))

    def daily(self):
        """
        Raw effort per day of the horizon, aligned with :attr:`days`.
        """
        return np.concatenate([
            np.full(days.shape[0], value / days.shape[0])
            for value, (_, days) in zip(self.effort, self.periods)
        ])

    def replace(self, effort, objective=None):
        return EffortSchedule(effort, self.periods, self.budget, self.granularity, objective)

    def to_frame(self, column="effort"):
        return pd.DataFrame({"period": self.labels, column: self.effort})


@dataclass
class AllocationResult(object):
    """
    Output of :func:`optimize`.

    ``history`` holds the best objective found after each generation (the
    initial population first). ``observed`` and ``uniform`` are the
    schedules the search started from, as scored: rescaled onto the budget,
    or snapped to the effort levels in levels mode, where ``best`` is not
    held to the budget.
    """

    best: EffortSchedule
    observed: EffortSchedule
    uniform: EffortSchedule
    history: np.ndarray = field(default_factory=lambda: np.zeros(0))
    evaluations: int = 0

    def table(self):
        """
        Period, actual and model-based effort, as in a monthly comparison
        table.
        """
        frame = self.observed.to_frame("actual")
        frame["model_based"] = self.best.effort
        return frame


@dataclass
class ScheduleComparison(object):

    table: pd.DataFrame
    sd_a: float
    sd_b: float
    objective_a: float = None
    objective_b: float = None

    @property
    def gap(self):
        if self.objective_a is None or self.objective_b is None:
            return None
        return self.objective_b - self.objective_a

    def summary(self):
        return {
            "objective_a": self.objective_a, "objective_b": self.objective_b,
            "gap": self.gap, "sd_a": self.sd_a, "sd_b": self.sd_b,
        }


def normalize(effort, budget):
    """
    Rescale a candidate onto {x >= 0, sum(x) = budget}.

    Negative entries are clipped to zero first; an all-zero candidate
    becomes the uniform schedule.
    """
    effort = np.clip(as_vector(effort, name="effort"), 0.0, None)
    if budget <= 0:
        return np.zeros_like(effort)
    total = float(np.sum(effort))
    if total == 0.0:
        return np.full(effort.shape[0], budget / effort.shape[0])
    return effort * (budget / total)


def period_blocks(panel, granularity="monthly", start=1, end=None):
    """
    Split days [start, end] into decision periods.

    Monthly periods follow calendar months when the panel has dates and
    are 30-day blocks otherwise.

    :returns: tuple of ``(label, days)`` pairs.
    """
    end = panel.T if end is None else int(end)
    start = int(start)
    if not 1 <= start <= end <= panel.T:
        raise HorizonMismatch(
            "Horizon [%d, %d] is outside the panel window [1, %d]" % (start, end, panel.T)
        )
    days = np.arange(start, end + 1)
    if granularity == "daily":
        return tuple((str(day), np.array([day])) for day in days)
    if granularity != "monthly":
        raise ConfigurationError(
            "Unknown granularity %r; options are: %s" % (granularity, ", ".join(GRANULARITIES))
        )
    if panel.dates:
        stamps = pd.to_datetime([panel.dates[day - 1] for day in days])
        months = stamps.to_period("M").astype(str)
    else:
        months = ["block%02d" % (1 + (day - start) // 30) for day in days]
    return tuple(
        (label, np.array([day for _, day in group]))
        for label, group in itertools.groupby(zip(months, days), key=lambda item: item[0])
    )


def observed_schedule(panel, periods, column=0):
    """
    The panel's own raw effort summed per period.
    """
    effort = [float(np.sum(panel.Z_raw[days - 1, column])) for _, days in periods]
    granularity = "daily" if all(days.shape[0] == 1 for _, days in periods) else "monthly"
    return EffortSchedule(effort, periods, granularity=granularity)


def uniform_schedule(periods, budget, granularity="monthly"):
    return EffortSchedule(normalize(np.zeros(len(periods)), budget), periods, budget, granularity)


def governance_transform(panel, column=0):
    """
    The :class:`jointdiffusion.preprocess.TransformRecord` mapping raw
    effort onto the model's governance covariate.
    """
    name = panel.z_labels[column]
    data = panel.transforms.get(name)
    if data is None:
        return TransformRecord(name)
    if isinstance(data, TransformRecord):
        return data
    return TransformRecord.from_dict(data)


def schedule_forecast(schedule, params, panel, spec=None, filter_config=None, column=0, init=None):
    """
    Daily one-step forecasts over the schedule's horizon with the schedule
    substituted for the observed effort.

    :returns: array aligned with ``schedule.days``.
    """
    days = schedule.days
    if days[0] < 1 or days[-1] > panel.T:
        raise HorizonMismatch(
            "Schedule covers days %d-%d, panel has %d" % (days[0], days[-1], panel.T)
        )
    Z = panel.Z.copy()
    Z[days - 1, column] = governance_transform(panel, column).apply(schedule.daily())
    _, output = platform_pass(panel.with_governance(Z), params, None, spec, filter_config, init)
    return output.f[days - 1]


def evaluate_schedule(schedule, params, panel, spec=None, filter_config=None, column=0,
                      init=None):
    """
    Cumulative expected platform adoption, sum of E[y_t | data to t-1],
    over the schedule's horizon.

    :param schedule: :class:`EffortSchedule`.

    :param params: Fitted :class:`jointdiffusion.model.PlatformParams`.

    :param int column: Governance covariate receiving the effort.

    :rtype: float
    """
    return float(np.sum(schedule_forecast(schedule, params, panel, spec, filter_config, column, init)))


class _Search(object):
    """
    Fitness bookkeeping shared by :func:`optimize` and
    :func:`exhaustive_search`: cached evaluations keyed by the effort
    vector's bytes.
    """

    def __init__(self, template, params, panel, spec, filter_config, column, init, threads=1):
        self.template = template
        self.params = params
        self.panel = panel
        self.spec = spec
        self.filter_config = filter_config
        self.column = column
        self.init = init
        self.threads = threads
        self.cache = {}

    def _evaluate(self, effort):
        return evaluate_schedule(
            self.template.replace(effort), self.params, self.panel, self.spec,
            self.filter_config, self.column, self.init,
        )

    def scores(self, population):
        pending, seen = [], set(self.cache)
        for effort in population:
            key = effort.tobytes()
            if key not in seen:
                seen.add(key)
                pending.append(effort)
        if pending:
            if self.threads > 1:
                with ThreadPoolExecutor(max_workers=self.threads) as pool:
                    values = list(pool.map(self._evaluate, pending))
            else:
                values = [self._evaluate(effort) for effort in pending]
            for effort, value in zip(pending, values):
                self.cache[effort.tobytes()] = value
        return np.array([self.cache[effort.tobytes()] for effort in population])


def _snap(effort, levels):
    levels = np.asarray(levels)
    return levels[np.argmin(np.abs(effort[:, None] - levels[None, :]), axis=1)]


def _initial_population(seeds, n_periods, budget, ga, rng):
    population = [np.array(seed, dtype=float) for seed in seeds]
    if ga.levels:
        population, known = [], set()
        for seed in seeds:
            individual = _snap(np.asarray(seed, dtype=float), ga.levels)
            if individual.tobytes() not in known:
                known.add(individual.tobytes())
                population.append(individual)
        while len(population) < ga.population:
            population.append(rng.choice(np.asarray(ga.levels), size=n_periods))
    else:
        while len(population) < ga.population:
            population.append(normalize(rng.dirichlet(np.ones(n_periods)), budget))
    return population[:max(ga.population, len(seeds))]


def _tournament(scores, size, rng):
    entrants = rng.choice(scores.shape[0], size=min(size, scores.shape[0]), replace=False)
    return entrants[np.argmax(scores[entrants])]


def _offspring(population, scores, ga, budget, rng):
    first = population[_tournament(scores, ga.tournament, rng)]
    second = population[_tournament(scores, ga.tournament, rng)]
    child = first.copy()
    if rng.random() < ga.crossover:
        mask = rng.random(child.shape[0]) < 0.5
        child[mask] = second[mask]
    mutate = rng.random(child.shape[0]) < ga.mutation
    if ga.levels:
        child[mutate] = rng.choice(np.asarray(ga.levels), size=int(mutate.sum()))
        return child
    sd = ga.mutation_scale * budget / child.shape[0]
    child[mutate] += sd * rng.standard_normal(int(mutate.sum()))
    return normalize(child, budget)


def optimize(params, panel, budget=None, ga=None, spec=None, start=1, end=None, column=0,
             filter_config=None, init=None, periods=None):
    """
    Search for the effort schedule with the largest cumulative one-step
    forecast under a fixed budget.

    The initial population always contains the observed and the uniform
    schedule and the best individual ever evaluated is returned, so the
    result never scores below either. Every continuous candidate is
    rescaled onto the budget before it is evaluated, the observed schedule
    included: with an explicit budget the reported observed objective is
    that of the rescaled observed schedule.

    With ``ga.levels`` the genes are restricted to the given raw values
    and the budget is not enforced, so ``best.total`` generally differs
    from ``budget``. The observed and uniform schedules are snapped to the
    nearest levels and reported in that form.

    :param params: Fitted :class:`jointdiffusion.model.PlatformParams`.

    :param float budget: Total effort; defaults to the observed total over
        the horizon.

    :param ga: :class:`GAConfig`.

    :param periods: Decision periods; defaults to
        :func:`period_blocks` at ``ga.granularity`` over [start, end].

    :rtype: :class:`AllocationResult`
    """
    ga = ga or GAConfig()
    if periods is None:
        periods = period_blocks(panel, ga.granularity, start, end)
    if len(periods) < 2:
        raise HorizonMismatch("The planning horizon needs at least two periods")
    observed = observed_schedule(panel, periods, column)
    budget = observed.total if budget is None else float(budget)
    granularity = observed.granularity
    if budget < 0:
        raise ConfigurationError("Budget must be nonnegative")

    template = EffortSchedule(np.zeros(len(periods)), periods, budget, granularity)
    search = _Search(template, params, panel, spec, filter_config, column, init, ga.threads)
    uniform = uniform_schedule(periods, budget, granularity)
    if ga.levels:
        seeds = [_snap(observed.effort, ga.levels), _snap(uniform.effort, ga.levels)]
    else:
        seeds = [normalize(observed.effort, budget), uniform.effort]
    observed_score, uniform_score = search.scores(seeds)
    observed = EffortSchedule(seeds[0], periods, None if ga.levels else budget, granularity,
                              observed_score)
    uniform = uniform.replace(seeds[1], uniform_score)

    if budget == 0 and not ga.levels:
        best = template.replace(np.zeros(len(periods)), search.scores([template.effort])[0])
        return AllocationResult(best, observed, uniform, np.array([best.objective]), len(search.cache))

    rng = substream(ga.seed, 0)
    population = _initial_population(seeds, len(periods), budget, ga, rng)
    scores = search.scores(population)
    leader = int(np.argmax(scores))
    best_effort, best_score = population[leader].copy(), float(scores[leader])
    history = [best_score]

    for generation in range(1, ga.generations + 1):
        order = np.argsort(-scores, kind="stable")
        children = [population[i].copy() for i in order[:ga.elitism]]
        while len(children) < ga.population:
            rng = substream(ga.seed, generation, len(children))
            children.append(_offspring(population, scores, ga, budget, rng))
        population = children
        scores = search.scores(population)
        leader = int(np.argmax(scores))
        if scores[leader] > best_score:
            best_effort, best_score = population[leader].copy(), float(scores[leader])
        history.append(best_score)
        logger.debug("optimize: generation %d best %.6g", generation, best_score)

    logger.info("optimize: %d schedules evaluated, best %.6g (observed %.6g)",
                len(search.cache), best_score, observed.objective)
    best = EffortSchedule(best_effort, periods, budget, granularity, best_score)
    return AllocationResult(best, observed, uniform, np.array(history), len(search.cache))


def exhaustive_search(levels, params, panel, periods, spec=None, filter_config=None, column=0,
                      init=None):
    """
    Evaluate every combination of effort levels over the periods and
    return the best schedule (the first in enumeration order on ties).

    The number of schedules is ``len(levels) ** len(periods)``; use only
    on small horizons.
    """
    levels = tuple(float(level) for level in levels)
    template = EffortSchedule(np.zeros(len(periods)), periods)
    search = _Search(template, params, panel, spec, filter_config, column, init)
    candidates = [np.array(combo) for combo in itertools.product(levels, repeat=len(periods))]
    scores = search.scores(candidates)
    leader = int(np.argmax(scores))
    return EffortSchedule(
        candidates[leader], periods, float(np.sum(candidates[leader])),
        template.granularity, float(scores[leader]),
    )


def _effort(schedule):
    if isinstance(schedule, EffortSchedule):
        return schedule.effort, schedule.labels
    values = np.asarray(schedule, dtype=float).reshape(-1)
    return values, [str(i + 1) for i in range(values.shape[0])]


def compare_schedules(a, b, params=None, panel=None, spec=None, filter_config=None, column=0,
                      init=None, labels=("actual", "model_based")):
    """
    Side-by-side comparison of two schedules over the same periods.

    The table lists each period's effort under both schedules and the
    cumulative effort difference (b - a). When ``params`` and ``panel`` are
    given, both schedules are evaluated and per-period forecast totals
    plus their cumulative difference are added.

    Standard deviations use ddof=1. The two budgets may differ.

    :param a: :class:`EffortSchedule` or array of per-period effort.

    :rtype: :class:`ScheduleComparison`
    """
    effort_a, periods = _effort(a)
    effort_b, _ = _effort(b)
    if effort_a.shape[0] != effort_b.shape[0]:
        raise HorizonMismatch(
            "Schedules cover %d and %d periods" % (effort_a.shape[0], effort_b.shape[0])
        )
    first, second = labels
    table = pd.DataFrame({"period": periods, first: effort_a, second: effort_b})
    table["cumulative_difference"] = np.cumsum(effort_b - effort_a)

    def sd(values):
        return float(np.std(values, ddof=1)) if values.shape[0] > 1 else 0.0

    comparison = ScheduleComparison(table, sd(effort_a), sd(effort_b))
    if params is None or panel is None:
        return comparison
    if not isinstance(a, EffortSchedule) or not isinstance(b, EffortSchedule):
        raise DataError("Evaluating schedules needs EffortSchedule objects with periods")
    totals = []
    for schedule in (a, b):
        daily = schedule_forecast(schedule, params, panel, spec, filter_config, column, init)
        bounds = np.cumsum([0] + [days.shape[0] for _, days in schedule.periods])
        totals.append(np.array([daily[lo:hi].sum() for lo, hi in zip(bounds[:-1], bounds[1:])]))
    table["forecast_%s" % first] = totals[0]
    table["forecast_%s" % second] = totals[1]
    table["cumulative_gain"] = np.cumsum(totals[1] - totals[0])
    comparison.objective_a = float(np.sum(totals[0]))
    comparison.objective_b = float(np.sum(totals[1]))
    return comparison


def load_monthly_effort(path=None):
    """
    Monthly actual vs model-based AMO contributions shipped with the
    package, with a ``period`` column (``YYYY-MM``).
    """
    frame = pd.read_csv(path or MONTHLY_EFFORT_PATH)
    frame.insert(0, "period", [
        "%04d-%02d" % (year, month) for year, month in zip(frame["year"], frame["month"])
    ])
    return frame
