"""
Run manifests: one JSON line per artifact-producing command, appended to
``manifest.ndjson`` in the output directory.
"""

import datetime
import json
import os
import subprocess
from dataclasses import asdict, dataclass, field

from jointdiffusion.util import __version__, file_hash, logger, to_jsonable


__all__ = (
    "MANIFEST_NAME",
    "RunManifest",
    "code_revision",
    "read_manifests",
)


MANIFEST_NAME = "manifest.ndjson"


def _now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


def code_revision():
    """
    Git revision of the installed source tree, or None outside a checkout.
    """
    try:
        output = subprocess.check_output(
            ["git", "rev-parse", "HEAD"], cwd=os.path.dirname(os.path.abspath(__file__)),
            stderr=subprocess.DEVNULL,
        )
    except (OSError, subprocess.CalledProcessError):
        return None
    return output.decode("ascii").strip() or None


@dataclass
class RunManifest(object):
    """
    Provenance of one command.

    Timestamps are the only fields that differ between reruns; output
    files themselves do not depend on them.
    """

    command: str
    seed: int = None
    config_hash: str = None
    inputs: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    version: str = __version__
    revision: str = None
    started: str = field(default_factory=_now)
    finished: str = None

    def add_input(self, path):
        self.inputs[os.path.basename(path)] = file_hash(path)

    def add_output(self, path):
        self.outputs.append(os.path.basename(path))
        return path

    def to_dict(self):
        return to_jsonable(asdict(self))

    def write(self, directory):
        """
        Stamp the finish time and append the manifest line.
        """
        if self.revision is None:
            self.revision = code_revision()
        self.finished = _now()
        path = os.path.join(directory, MANIFEST_NAME)
        with open(path, "a") as handle:
            handle.write(json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")))
            handle.write("\n")
        logger.info("%s: manifest appended to %s", self.command, path)
        return path


def read_manifests(directory):
    path = os.path.join(directory, MANIFEST_NAME)
    if not os.path.exists(path):
        return []
    with open(path, "r") as handle:
        return [RunManifest(**json.loads(line)) for line in handle if line.strip()]
