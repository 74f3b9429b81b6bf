"""Versioned JSON report envelope with deterministic serialization."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .constants import ConstantsReport
from .verify import CheckReport

SCHEMA_VERSION = 1


def _plain(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError("not JSON serializable: %r" % type(obj).__name__)


def dumps(doc) -> str:
    """Canonical JSON: sorted keys, shortest round-trip floats, trailing newline."""
    return json.dumps(doc, sort_keys=True, indent=2, default=_plain, allow_nan=True) + "\n"


def write_atomic(path: str, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".quasinv-", dir=folder)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class ReportEnvelope:
    spec: dict
    constants: Optional[ConstantsReport] = None
    checks: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)
    tool_version: str = __version__
    schema_version: int = SCHEMA_VERSION

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self, timing: bool = True) -> dict:
        d = {
            "schema_version": self.schema_version,
            "tool_version": self.tool_version,
            "spec": self.spec,
            "constants": None if self.constants is None else self.constants.to_dict(),
            "checks": [c.to_dict() for c in self.checks],
        }
        if timing:
            d["timing"] = self.timing
        return d

    def to_json(self, timing: bool = True) -> str:
        return dumps(self.to_dict(timing))

    @classmethod
    def from_dict(cls, d: dict) -> "ReportEnvelope":
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError("unsupported report schema version %r" % version)
        c = d.get("constants")
        return cls(
            spec=d["spec"],
            constants=None if c is None else ConstantsReport.from_dict(c),
            checks=[CheckReport.from_dict(x) for x in d.get("checks", [])],
            timing=d.get("timing", {}),
            tool_version=d["tool_version"],
            schema_version=version,
        )

    @classmethod
    def from_json(cls, text: str) -> "ReportEnvelope":
        return cls.from_dict(json.loads(text))
