"""
Covariate construction and panel assembly.

Raw inputs are three CSV files with ISO-8601 dates (see
``docs/columns.rst``):

- platform file: ``date, platform_users, chrome_usage, ie_usage,
  amo_contributions, queue_length, addons_created, platform_release``
- complements file (long format): ``date, addon_id, downloads, usage,
  rating_mean, rating_var, new_version``
- metadata file: ``addon_id, category, ask_money, meet_developer, license``

:func:`assemble_panel` turns them into an :class:`ObservationPanel` in model
units and returns the :class:`TransformRecord` of every standardized
variable so results can be mapped back to raw units.
"""

import json
from dataclasses import dataclass

import numpy as np
import pandas as pd

from jointdiffusion.config import section_config
from jointdiffusion.exc import (
    ConfigurationError,
    DataError,
    DegenerateSeries,
    MissingColumn,
    NonMonotoneCumulative,
    WindowViolation,
)
from jointdiffusion.panel import ComplementSeries, ObservationPanel
from jointdiffusion.util import logger


__all__ = (
    "DEFAULT_GAMMA",
    "PLATFORM_COLUMNS",
    "COMPLEMENT_COLUMNS",
    "META_COLUMNS",
    "LICENSES",
    "ReleaseLog",
    "TransformRecord",
    "CategoryMap",
    "PreprocessConfig",
    "RawInputs",
    "smooth_releases",
    "release_indicator",
    "observational_learning",
    "observational_learning_panel",
    "standardize",
    "read_raw",
    "assemble_panel",
    "write_transforms",
    "read_transforms",
)


#: Decay of the release signal (Nerlove-Arrow carry-over estimate).
DEFAULT_GAMMA = 0.89

PLATFORM_COLUMNS = (
    "date", "platform_users", "chrome_usage", "ie_usage",
    "amo_contributions", "queue_length", "addons_created", "platform_release",
)
COMPLEMENT_COLUMNS = (
    "date", "addon_id", "downloads", "usage", "rating_mean", "rating_var", "new_version",
)
META_COLUMNS = ("addon_id", "category", "ask_money", "meet_developer", "license")
LICENSES = ("fully_free", "restricted", "mozilla")

POLICIES = ("none", "demean", "rescale", "demean-then-rescale")


@dataclass(frozen=True)
class ReleaseLog(object):
    """
    Release days of one series, strictly increasing.
    """

    series_id: str
    days: tuple = ()

    def __post_init__(self):
        days = tuple(int(d) for d in self.days)
        if any(b <= a for a, b in zip(days, days[1:])):
            raise DataError("Release days of %s must be strictly increasing" % self.series_id)
        object.__setattr__(self, "days", days)

    def __len__(self):
        return len(self.days)

    @classmethod
    def from_indicator(cls, series_id, indicator, first_day=1):
        indicator = np.nan_to_num(np.asarray(indicator, dtype=float))
        return cls(series_id, tuple(int(k) + first_day for k in np.flatnonzero(indicator > 0)))


def smooth_releases(log, gamma=DEFAULT_GAMMA, window=None):
    """
    Carry-over release signal gamma ** (t - tau) where tau is the most
    recent release on or before day t; 0 before the first release.

    :param log: :class:`ReleaseLog`.

    :param float gamma: Decay in (0, 1).

    :param tuple window: Inclusive day range (t0, T).

    :rtype: numpy array with one value per day of the window, in [0, 1].
    """
    if not 0.0 < gamma < 1.0:
        raise ConfigurationError("gamma must lie in (0, 1), got %r" % gamma)
    t0, T = window
    days = np.arange(t0, T + 1)
    out = np.zeros(days.shape[0])
    if not len(log):
        return out
    releases = np.asarray(log.days)
    idx = np.searchsorted(releases, days, side="right") - 1
    seen = idx >= 0
    lags = days[seen] - releases[idx[seen]]
    out[seen] = gamma ** lags
    return out


def release_indicator(log, window):
    """
    1 on release days, 0 elsewhere (no carry-over).
    """
    t0, T = window
    days = np.arange(t0, T + 1)
    return np.isin(days, np.asarray(log.days, dtype=int)).astype(float)


@dataclass(frozen=True)
class TransformRecord(object):
    """
    How a variable was standardized: ``(x - mean) / scale``.

    ``kind`` is one of ``none``, ``demean``, ``rescale``,
    ``demean-then-rescale``; unused constants are 0 (mean) and 1 (scale).
    """

    name: str
    kind: str = "none"
    mean: float = 0.0
    scale: float = 1.0

    def apply(self, values):
        return (np.asarray(values, dtype=float) - self.mean) / self.scale

    def invert(self, values):
        return np.asarray(values, dtype=float) * self.scale + self.mean

    def to_dict(self):
        return {"name": self.name, "kind": self.kind, "mean": self.mean, "scale": self.scale}

    @classmethod
    def from_dict(cls, data):
        return cls(data["name"], data["kind"], float(data["mean"]), float(data["scale"]))


def standardize(series, policy="demean-then-rescale", name="series", scale=None):
    """
    Demean and/or rescale a series.

    Demeaning subtracts the mean over the given values (NaN ignored).
    Rescaling divides by ``scale``, by default the maximum absolute value
    of the (demeaned) series.

    :returns: (transformed array, :class:`TransformRecord`)
    """
    if policy not in POLICIES:
        raise ConfigurationError(
            "Unknown policy %r; options are: %s" % (policy, ", ".join(POLICIES))
        )
    values = np.asarray(series, dtype=float)
    if values.size == 0 or np.all(np.isnan(values)):
        raise DegenerateSeries("Cannot standardize empty series %s" % name)
    mean = 0.0
    if policy in ("demean", "demean-then-rescale"):
        mean = float(np.nanmean(values))
    factor = 1.0
    if policy in ("rescale", "demean-then-rescale"):
        factor = float(np.nanmax(np.abs(values - mean))) if scale is None else float(scale)
        if factor == 0.0 or not np.isfinite(factor):
            raise DegenerateSeries("Series %s has zero scale under %s" % (name, policy))
    record = TransformRecord(name, policy, mean, factor)
    return record.apply(values), record


class CategoryMap(object):
    """
    Complement id -> category label.
    """

    def __init__(self, mapping):
        self._mapping = {}
        for key, label in (mapping.items() if hasattr(mapping, "items") else mapping):
            if key in self._mapping and self._mapping[key] != label:
                raise DataError("Complement %s has more than one category" % key)
            self._mapping[key] = label

    def __getitem__(self, key):
        try:
            return self._mapping[key]
        except KeyError:
            raise DataError("Complement %s has no category" % key)

    def __contains__(self, key):
        return key in self._mapping

    def categories(self):
        return sorted(set(self._mapping.values()))

    def members(self, label):
        return sorted(k for k, v in self._mapping.items() if v == label)

    def check(self, ids):
        for key in ids:
            self[key]


def observational_learning(usage, categories, day):
    """
    Category usage shares of one day.

    :param usage: DataFrame indexed by day with one column per complement;
        missing usage counts as 0.

    :param categories: :class:`CategoryMap`.

    :returns: dict complement id -> Usage_jt / sum of Usage_kt over j's
        category. A zero category total gives 0 and a warning.
    """
    row = usage.loc[day].fillna(0.0)
    if (row < 0).any():
        raise DataError("Usage must be nonnegative on day %s" % day)
    shares = {}
    for label in categories.categories():
        members = [k for k in categories.members(label) if k in row.index]
        total = float(row[members].sum())
        for key in members:
            if total > 0:
                shares[key] = float(row[key]) / total
            else:
                shares[key] = 0.0
        if total <= 0 and members:
            logger.warning("observational_learning: zero usage in category %s on day %s", label, day)
    return shares


def observational_learning_panel(usage, categories, lag=1):
    """
    OL shares for every day of ``usage``, computed from usage ``lag`` days
    earlier (0 when the lagged day is not available).
    """
    filled = usage.fillna(0.0)
    if (filled.values < 0).any():
        raise DataError("Usage must be nonnegative")
    categories.check(filled.columns)
    shares = pd.DataFrame(0.0, index=filled.index, columns=filled.columns)
    for label in categories.categories():
        members = [k for k in categories.members(label) if k in filled.columns]
        if not members:
            continue
        block = filled[members]
        totals = block.sum(axis=1)
        zero = totals <= 0
        if zero.any():
            logger.warning(
                "observational_learning_panel: zero usage in category %s on %d day(s)",
                label, int(zero.sum())
            )
        shares[members] = block.div(totals.where(~zero), axis=0).fillna(0.0)
    return shares.shift(lag).fillna(0.0) if lag else shares


@dataclass
class PreprocessConfig(object):
    """
    Options of :func:`assemble_panel` (section ``[preprocess]``).
    """

    gamma: float = DEFAULT_GAMMA
    ol_lag: int = 1
    platform_policy: str = "rescale"
    competitor_policy: str = "demean-then-rescale"
    governance_policy: str = "demean-then-rescale"
    addons_policy: str = "rescale"
    platform_scale: float = None

    @classmethod
    def from_config(cls, config, **overrides):
        return section_config(cls, config, "preprocess", **overrides)


@dataclass
class RawInputs(object):
    """
    The three raw tables, as read by :func:`read_raw`.
    """

    platform: pd.DataFrame
    complements: pd.DataFrame
    meta: pd.DataFrame


def _require(frame, columns, label):
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise MissingColumn("%s input is missing column(s): %s" % (label, ", ".join(missing)))


def read_raw(platform_csv, complements_csv, meta_csv):
    """
    Load the raw CSV files.
    """
    platform = pd.read_csv(platform_csv)
    complements = pd.read_csv(complements_csv, dtype={"addon_id": str})
    meta = pd.read_csv(meta_csv, dtype={"addon_id": str})
    return RawInputs(platform, complements, meta)


def _check_nondecreasing(values, label):
    observed = values[~np.isnan(values)]
    if observed.size > 1 and np.any(np.diff(observed) < 0):
        raise NonMonotoneCumulative("%s must be nondecreasing" % label)


def _demean(values):
    return values - np.nanmean(values) if values.size else values


def assemble_panel(raw, config=None):
    """
    Build the model-unit panel from raw inputs.

    Platform usage and the cumulative add-on count are rescaled; competitor
    usage and AMO governance series are demeaned and rescaled; ratings, OL
    shares and release signals are demeaned over each complement's own
    window. Complement downloads share the platform's scale so the
    relevance fraction stays a ratio of like quantities. Covariates are
    forward-filled; adoption observations are not.

    :returns: (:class:`ObservationPanel`, dict name -> :class:`TransformRecord`)
    """
    config = config or PreprocessConfig()
    _require(raw.platform, PLATFORM_COLUMNS, "platform")
    _require(raw.complements, COMPLEMENT_COLUMNS, "complements")
    _require(raw.meta, META_COLUMNS, "metadata")

    platform = raw.platform.copy()
    platform["date"] = pd.to_datetime(platform["date"])
    platform = platform.sort_values("date").set_index("date")
    if platform.index.has_duplicates:
        raise DataError("Platform input has duplicate dates")
    calendar = pd.date_range(platform.index[0], platform.index[-1], freq="D")
    platform = platform.reindex(calendar)
    T = len(calendar)
    logger.info("assemble_panel: platform window of %d days", T)

    transforms = {}

    users = platform["platform_users"].to_numpy(dtype=float)
    y, record = standardize(users, config.platform_policy, "platform_users", config.platform_scale)
    transforms[record.name] = record

    covariates = platform.drop(columns=["platform_users"]).ffill().fillna(0.0)
    addons = covariates["addons_created"].to_numpy(dtype=float)
    _check_nondecreasing(platform["addons_created"].to_numpy(dtype=float), "addons_created")
    A, record = standardize(addons, config.addons_policy, "addons_created")
    transforms[record.name] = record

    X_cols = []
    for column in ("chrome_usage", "ie_usage"):
        values, record = standardize(
            covariates[column].to_numpy(dtype=float), config.competitor_policy, column
        )
        transforms[column] = record
        X_cols.append(values)
    Z_cols, Z_raw = [], []
    for column in ("amo_contributions", "queue_length"):
        raw_values = covariates[column].to_numpy(dtype=float)
        values, record = standardize(raw_values, config.governance_policy, column)
        transforms[column] = record
        Z_cols.append(values)
        Z_raw.append(raw_values)

    platform_log = ReleaseLog.from_indicator("platform", covariates["platform_release"])
    PV_full = smooth_releases(platform_log, config.gamma, (1, T))
    PV_indicator = release_indicator(platform_log, (1, T))

    long = raw.complements.copy()
    long["date"] = pd.to_datetime(long["date"])
    day_of = {date: k + 1 for k, date in enumerate(calendar)}
    outside = ~long["date"].isin(calendar)
    if outside.any():
        raise WindowViolation(
            "%d complement row(s) fall outside the platform window" % int(outside.sum())
        )
    long["day"] = long["date"].map(day_of)

    meta = raw.meta.drop_duplicates()
    categories = CategoryMap(zip(meta["addon_id"], meta["category"]))
    ids = sorted(long["addon_id"].unique())
    categories.check(ids)

    usage = long.pivot_table(index="day", columns="addon_id", values="usage", aggfunc="last")
    usage = usage.reindex(index=range(1, T + 1), columns=ids)
    OL_all = observational_learning_panel(usage, categories, lag=config.ol_lag)

    scale = transforms["platform_users"]
    complements = []
    for addon_id in ids:
        rows = long[long["addon_id"] == addon_id].sort_values("day").set_index("day")
        if rows.index.has_duplicates:
            raise DataError("Complement %s has duplicate dates" % addon_id)
        launch, end = int(rows.index.min()), int(rows.index.max())
        rows = rows.reindex(range(launch, end + 1))
        downloads = rows["downloads"].to_numpy(dtype=float)
        _check_nondecreasing(downloads, "downloads of %s" % addon_id)
        y_j = downloads / scale.scale
        filled = rows[["rating_mean", "rating_var", "new_version"]].ffill().fillna(0.0)

        log = ReleaseLog.from_indicator(addon_id, rows["new_version"].fillna(0.0), first_day=launch)
        window = (launch, end)
        info = meta[meta["addon_id"] == addon_id].iloc[0]
        license_kind = str(info["license"]).strip().lower()
        dummies = {
            "ask_money": int(info["ask_money"]),
            "meet_developer": int(info["meet_developer"]),
        }
        for kind in LICENSES:
            dummies["license_" + kind] = int(license_kind == kind)
        complements.append(ComplementSeries(
            id=addon_id, launch=launch, end=end, y=y_j,
            PV=_demean(PV_full[launch - 1:end]),
            AV=_demean(smooth_releases(log, config.gamma, window)),
            PV_raw=_demean(PV_indicator[launch - 1:end]),
            AV_raw=_demean(release_indicator(log, window)),
            RTV=_demean(filled["rating_var"].to_numpy(dtype=float)),
            STAVG=_demean(filled["rating_mean"].to_numpy(dtype=float)),
            OL=_demean(OL_all[addon_id].to_numpy(dtype=float)[launch - 1:end]),
            category=str(info["category"]), dummies=dummies, releases=log.days,
        ))

    panel = ObservationPanel(
        y=y, X=np.column_stack(X_cols), Z=np.column_stack(Z_cols), A=A,
        complements=complements, Z_raw=np.column_stack(Z_raw),
        dates=tuple(date.strftime("%Y-%m-%d") for date in calendar),
        platform_releases=platform_log.days,
        transforms={name: rec.to_dict() for name, rec in sorted(transforms.items())},
    )
    return panel, transforms


def write_transforms(transforms, path):
    """
    Write the transforms sidecar (JSON, sorted keys).
    """
    payload = {name: record.to_dict() for name, record in sorted(transforms.items())}
    with open(path, "w") as handle:
        json.dump(payload, handle, sort_keys=True, indent=2)
        handle.write("\n")
    return path


def read_transforms(path):
    with open(path, "r") as handle:
        payload = json.load(handle)
    return {name: TransformRecord.from_dict(data) for name, data in payload.items()}
