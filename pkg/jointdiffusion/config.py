"""
Key-value run configuration.

A configuration file holds dotted keys, either flat::

    sampler.iterations = 4000
    sampler.seed = 7

or grouped in INI sections::

    [sampler]
    iterations = 4000

Both spellings flatten to the same dotted key. Any key can be overridden
from the environment with the ``JOINTDIFFUSION_`` prefix and a double
underscore standing for the dot::

    JOINTDIFFUSION_SAMPLER__ITERATIONS=200

Module configs (``MCMCConfig``, ``GAConfig``, ...) are dataclasses built
from one section with :func:`section_config`.
"""

import configparser
import dataclasses
import os

from jointdiffusion.exc import ConfigurationError
from jointdiffusion.util import stable_hash


__all__ = (
    "ENV_PREFIX",
    "Config",
    "load_config",
    "section_config",
)


ENV_PREFIX = "JOINTDIFFUSION_"
_ROOT = "__root__"
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


class Config(object):
    """
    Flat mapping of dotted keys to raw string values.
    """

    def __init__(self, values=None):
        self._values = dict(values or {})

    def __contains__(self, key):
        return key in self._values

    def __getitem__(self, key):
        return self._values[key]

    def __len__(self):
        return len(self._values)

    def __repr__(self):
        return "Config(%r)" % self._values

    def keys(self):
        return sorted(self._values)

    def get(self, key, default=None):
        return self._values.get(key, default)

    def set(self, key, value):
        self._values[key] = str(value)

    def section(self, name):
        """
        The keys under ``name.``, with the prefix stripped.
        """
        prefix = name + "."
        return {
            key[len(prefix):]: value
            for key, value in self._values.items()
            if key.startswith(prefix)
        }

    def digest(self):
        """
        Stable hash of the whole configuration, recorded in archives and
        manifests.
        """
        return stable_hash(self._values)

    def as_dict(self):
        return dict(self._values)


def _parse_text(text):
    parser = configparser.ConfigParser(
        delimiters=("=",), comment_prefixes=("#", ";"), interpolation=None
    )
    parser.optionxform = str
    try:
        parser.read_string("[%s]\n%s" % (_ROOT, text))
    except configparser.Error as error:
        raise ConfigurationError("Could not parse configuration: %s" % error)
    values = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            dotted = key if section == _ROOT else "%s.%s" % (section, key)
            values[dotted.strip().lower()] = value.strip()
    return values


def _environment_overrides(environ):
    values = {}
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX):].lower().replace("__", ".")
        if key:
            values[key] = value
    return values


def load_config(path=None, environ=None, overrides=None):
    """
    Read a configuration file (optional), then apply environment
    overrides, then explicit ``overrides`` (highest precedence).

    :param string path: Configuration file, or None for defaults only.

    :param dict environ: Environment to scan; defaults to ``os.environ``.

    :param dict overrides: Dotted keys set programmatically, e.g. the CLI's
        ``--seed``.
    """
    values = {}
    if path is not None:
        with open(path, "r") as handle:
            values.update(_parse_text(handle.read()))
    values.update(_environment_overrides(os.environ if environ is None else environ))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = str(value)
    return Config(values)


def _coerce(raw, kind, key):
    if not isinstance(raw, str):
        return raw
    try:
        if kind is bool:
            lowered = raw.strip().lower()
            if lowered in _TRUE:
                return True
            if lowered in _FALSE:
                return False
            raise ValueError(raw)
        if kind is int:
            return int(float(raw)) if "e" in raw.lower() else int(raw)
        if kind is float:
            return float(raw)
        if kind is tuple:
            return tuple(item.strip() for item in raw.split(",") if item.strip())
    except ValueError:
        raise ConfigurationError("Invalid value %r for %s" % (raw, key))
    return raw


def section_config(cls, config, section, **overrides):
    """
    Build the dataclass ``cls`` from ``config.section(section)``.

    Keys match field names case-insensitively. Values are coerced to the
    type of each field's default. Unknown keys raise
    :class:`jointdiffusion.exc.ConfigurationError`.
    """
    raw = config.section(section) if config is not None else {}
    raw = {key.lower(): value for key, value in raw.items()}
    fields = {field.name.lower(): field for field in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - set(fields))
    if unknown:
        raise ConfigurationError(
            "Unknown key(s) in [%s]: %s; options are: %s"
            % (section, ", ".join(unknown), ", ".join(sorted(fields)))
        )
    kwargs = {}
    for key, value in raw.items():
        field = fields[key]
        name = field.name
        default = field.default
        if default is dataclasses.MISSING and field.default_factory is not dataclasses.MISSING:
            default = field.default_factory()
        kind = type(default) if default is not None and default is not dataclasses.MISSING else str
        if value.strip().lower() in ("none", "") and default is None:
            kwargs[name] = None
            continue
        if default is None:
            kind = float if any(c in value.lower() for c in ".e") else int
        kwargs[name] = _coerce(value, kind, "%s.%s" % (section, key))
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return cls(**kwargs)
