"""
Utils.
"""

import hashlib
import json
import logging

import numpy as np


__version__ = "0.4.0"


logger = logging.getLogger('jointdiffusion') # pylint: disable=C0103
logger.addHandler(logging.NullHandler())


def substream(seed, *key):
    """
    Independent generator for a numbered substream of a master seed.

    The same (seed, key) pair always yields the same stream, whatever the
    order in which substreams are requested, so parallel sections stay
    deterministic::

        >>> rng = substream(7, 12, 3)   # iteration 12, complement 3
    """
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(sequence)


def stable_hash(obj):
    """
    SHA-256 hex digest of a JSON-serializable object with sorted keys.
    """
    payload = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(payload.encode("utf8")).hexdigest()


def file_hash(path):
    """
    SHA-256 hex digest of a file's bytes.
    """
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def logit(x):
    return np.log(x) - np.log1p(-x)


def expit(z):
    """
    Inverse logit, stable for large |z|.
    """
    if z >= 0:
        return 1.0 / (1.0 + np.exp(-z))
    ez = np.exp(z)
    return ez / (1.0 + ez)


def as_vector(values, length=None, name="vector"):
    """
    Coerce to a 1-d float array, optionally checking its length.
    """
    from jointdiffusion.exc import DimensionMismatch
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1:
        raise DimensionMismatch("%s must be one-dimensional" % name)
    if length is not None and arr.shape[0] != length:
        raise DimensionMismatch(
            "%s has length %d, expected %d" % (name, arr.shape[0], length)
        )
    return arr


def to_jsonable(value):
    """
    Convert numpy scalars/arrays (possibly nested in dicts and lists) into
    plain Python values for json.dumps.
    """
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value
