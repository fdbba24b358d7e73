"""
:class:`.ObservationPanel` holds the unbalanced daily panel: the platform
adoption series with its covariates, and one :class:`.ComplementSeries` per
complement with its own observation window.

Days are 1-based indices into the platform window [1, T]. Latent state
index 0 is the day before the first observation. Complement j is observed
on [launch, end] and its arrays have ``end - launch + 1`` entries; missing
adoption observations are NaN (never imputed).

Panels are stored as a single JSON document (schema
``jointdiffusion-panel/1``) written with sorted keys, so identical panels
give identical bytes.
"""

import json
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from jointdiffusion.exc import DataError, WindowViolation
from jointdiffusion.model import (
    DESIGN_LABELS,
    X_LABELS,
    Z_LABELS,
    ComplementFrame,
    CovariateFrame,
)
from jointdiffusion.util import to_jsonable


__all__ = (
    "PANEL_SCHEMA",
    "COMPLEMENT_COLUMNS",
    "ComplementSeries",
    "ObservationPanel",
    "load_panel",
)


PANEL_SCHEMA = "jointdiffusion-panel/1"

#: Per-day complement arrays, in file order.
COMPLEMENT_COLUMNS = ("y", "PV", "AV", "PV_raw", "AV_raw", "RTV", "STAVG", "OL")


def _float_array(values):
    return np.asarray(values, dtype=float)


@dataclass
class ComplementSeries(object):
    """
    One complement's observations and covariates over [launch, end].

    ``PV``/``AV`` are the smoothed, demeaned release signals; ``PV_raw``
    and ``AV_raw`` the demeaned release-day indicators used when version
    carry-over is switched off. ``dummies`` maps the hierarchy design labels
    (except the intercept) to 0/1.
    """

    id: str
    launch: int
    end: int
    y: np.ndarray
    PV: np.ndarray
    AV: np.ndarray
    RTV: np.ndarray
    STAVG: np.ndarray
    OL: np.ndarray
    PV_raw: np.ndarray = None
    AV_raw: np.ndarray = None
    category: str = "uncategorized"
    dummies: dict = field(default_factory=dict)
    releases: tuple = ()

    def __post_init__(self):
        self.launch = int(self.launch)
        self.end = int(self.end)
        if self.end < self.launch:
            raise WindowViolation(
                "Complement %s ends (%d) before launch (%d)" % (self.id, self.end, self.launch)
            )
        length = self.end - self.launch + 1
        for name in COMPLEMENT_COLUMNS:
            values = getattr(self, name)
            if values is None and name in ("PV_raw", "AV_raw"):
                values = getattr(self, name[:2])
            values = _float_array(values)
            if values.shape != (length,):
                raise DataError(
                    "Complement %s: %s has %d entries, window needs %d"
                    % (self.id, name, values.shape[0], length)
                )
            setattr(self, name, values)
        self.releases = tuple(int(day) for day in self.releases)

    def __len__(self):
        return self.end - self.launch + 1

    @property
    def days(self):
        return np.arange(self.launch, self.end + 1)

    def design_row(self):
        """
        Row D_j of the hierarchy design, intercept first.
        """
        return np.array(
            [1.0] + [float(self.dummies.get(label, 0)) for label in DESIGN_LABELS[1:]]
        )

    def covariates(self, carryover=True):
        """
        Per-day covariate arrays keyed by name, with the release signals
        chosen by ``carryover``.
        """
        return {
            "PV": self.PV if carryover else self.PV_raw,
            "AV": self.AV if carryover else self.AV_raw,
            "RTV": self.RTV,
            "STAVG": self.STAVG,
            "OL": self.OL,
        }

    def frame(self, t, carryover=True):
        if not self.launch <= t <= self.end:
            raise WindowViolation(
                "Day %d is outside the window [%d, %d] of %s"
                % (t, self.launch, self.end, self.id)
            )
        k = t - self.launch
        values = self.covariates(carryover)
        return ComplementFrame(t=t, **{name: float(arr[k]) for name, arr in values.items()})

    def truncate(self, last_day):
        if last_day < self.launch:
            return None
        stop = min(self.end, last_day) - self.launch + 1
        data = {name: getattr(self, name)[:stop] for name in COMPLEMENT_COLUMNS}
        return ComplementSeries(
            id=self.id, launch=self.launch, end=min(self.end, last_day),
            category=self.category, dummies=dict(self.dummies),
            releases=tuple(d for d in self.releases if d <= last_day), **data
        )

    def to_dict(self):
        data = {name: getattr(self, name) for name in COMPLEMENT_COLUMNS}
        data.update(
            id=self.id, launch=self.launch, end=self.end, category=self.category,
            dummies=self.dummies, releases=list(self.releases),
        )
        return to_jsonable(data)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


@dataclass
class ObservationPanel(object):
    """
    The platform series and all complements.

    :param y: Observed platform adoption, length T (NaN where missing).

    :param X: T x 2 competitor usage (rescaled, demeaned).

    :param Z: T x 2 governance covariates: AMO contributions and nomination
        queue length (rescaled, demeaned).

    :param A: Cumulative add-ons created (rescaled), length T.

    :param Z_raw: The governance covariates before standardization; the
        allocator substitutes effort schedules here.

    :param transforms: Variable name -> serialized transform record.
    """

    y: np.ndarray
    X: np.ndarray
    Z: np.ndarray
    A: np.ndarray
    complements: list = field(default_factory=list)
    Z_raw: np.ndarray = None
    dates: tuple = ()
    platform_releases: tuple = ()
    transforms: dict = field(default_factory=dict)
    x_labels: tuple = X_LABELS
    z_labels: tuple = Z_LABELS

    def __post_init__(self):
        self.y = _float_array(self.y)
        T = self.y.shape[0]
        self.X = np.asarray(self.X, dtype=float).reshape(T, -1)
        self.Z = np.asarray(self.Z, dtype=float).reshape(T, -1)
        self.A = _float_array(self.A).reshape(T)
        self.Z_raw = (
            self.Z.copy() if self.Z_raw is None
            else np.asarray(self.Z_raw, dtype=float).reshape(T, -1)
        )
        self.dates = tuple(self.dates)
        if self.dates and len(self.dates) != T:
            raise DataError("Panel has %d dates for %d days" % (len(self.dates), T))
        self.platform_releases = tuple(int(d) for d in self.platform_releases)
        self.x_labels = tuple(self.x_labels)
        self.z_labels = tuple(self.z_labels)
        for series in self.complements:
            if series.launch < 1 or series.end > T:
                raise WindowViolation(
                    "Complement %s window [%d, %d] outside platform window [1, %d]"
                    % (series.id, series.launch, series.end, T)
                )

    @property
    def T(self):
        return self.y.shape[0]

    @property
    def days(self):
        return np.arange(1, self.T + 1)

    @property
    def ids(self):
        return [series.id for series in self.complements]

    def complement(self, key):
        """
        A complement by id or by position.
        """
        if isinstance(key, int):
            return self.complements[key]
        for series in self.complements:
            if series.id == key:
                return series
        raise KeyError(key)

    def frame(self, t):
        k = t - 1
        return CovariateFrame(t=t, X=self.X[k], Z=self.Z[k], A=float(self.A[k]))

    def complement_frame(self, j, t, carryover=True):
        return self.complement(j).frame(t, carryover)

    def design_matrix(self):
        """
        The J x K hierarchy design, intercept first.
        """
        if not self.complements:
            return np.zeros((0, len(DESIGN_LABELS)))
        return np.vstack([series.design_row() for series in self.complements])

    def release_frame(self):
        """
        Tidy release signals, one row per complement and observed day, with
        the columns day, complement, PV, AV, PV_raw, AV_raw.
        """
        columns = ("PV", "AV", "PV_raw", "AV_raw")
        frames = [
            pd.DataFrame(dict(
                {"day": series.days, "complement": series.id},
                **{name: getattr(series, name) for name in columns}
            ))
            for series in self.complements
        ]
        if not frames:
            return pd.DataFrame(columns=["day", "complement"] + list(columns))
        return pd.concat(frames, ignore_index=True)

    def with_governance(self, Z):
        """
        Copy with the governance covariates replaced (model units).
        """
        return ObservationPanel(
            y=self.y, X=self.X, Z=Z, A=self.A, complements=self.complements,
            Z_raw=self.Z_raw, dates=self.dates, platform_releases=self.platform_releases,
            transforms=self.transforms, x_labels=self.x_labels, z_labels=self.z_labels,
        )

    def truncate(self, last_day):
        """
        The panel restricted to days [1, last_day].
        """
        stop = int(last_day)
        complements = [s.truncate(stop) for s in self.complements]
        return ObservationPanel(
            y=self.y[:stop], X=self.X[:stop], Z=self.Z[:stop], A=self.A[:stop],
            complements=[s for s in complements if s is not None],
            Z_raw=self.Z_raw[:stop], dates=self.dates[:stop],
            platform_releases=tuple(d for d in self.platform_releases if d <= stop),
            transforms=self.transforms, x_labels=self.x_labels, z_labels=self.z_labels,
        )

    def to_dict(self):
        return to_jsonable({
            "schema": PANEL_SCHEMA,
            "platform": {
                "y": self.y, "X": self.X, "Z": self.Z, "A": self.A,
                "Z_raw": self.Z_raw, "dates": list(self.dates),
                "releases": list(self.platform_releases),
                "x_labels": list(self.x_labels), "z_labels": list(self.z_labels),
            },
            "complements": [series.to_dict() for series in self.complements],
            "transforms": self.transforms,
        })

    @classmethod
    def from_dict(cls, data):
        if data.get("schema") != PANEL_SCHEMA:
            raise DataError("Not a %s document" % PANEL_SCHEMA)
        platform = data["platform"]
        return cls(
            y=platform["y"], X=platform["X"], Z=platform["Z"], A=platform["A"],
            Z_raw=platform.get("Z_raw"), dates=platform.get("dates", ()),
            platform_releases=platform.get("releases", ()),
            x_labels=platform.get("x_labels", X_LABELS),
            z_labels=platform.get("z_labels", Z_LABELS),
            complements=[ComplementSeries.from_dict(c) for c in data["complements"]],
            transforms=data.get("transforms", {}),
        )

    def dumps(self):
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def save(self, path):
        with open(path, "w") as handle:
            handle.write(self.dumps())
            handle.write("\n")
        return path


def load_panel(path):
    """
    Read a panel file written by :meth:`ObservationPanel.save`.
    """
    with open(path, "r") as handle:
        try:
            data = json.load(handle)
        except ValueError:
            raise DataError("Could not parse panel file %s" % path)
    return ObservationPanel.from_dict(data)
