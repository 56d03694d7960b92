"""Verification records emitted by checks and constructions."""

from __future__ import annotations

import json
from dataclasses import dataclass, field


def _plain(value):
    """Convert numpy scalars / arrays to plain deterministic JSON values."""
    import numpy as np
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


@dataclass
class Certificate:
    """What was checked, with which samples, and how much room was left."""

    name: str
    passed: bool
    parameters: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    margins: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "parameters": _plain(self.parameters),
            "grid": _plain(self.grid),
            "margins": _plain(self.margins),
            "thresholds": _plain(self.thresholds),
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def require(self):
        if not self.passed:
            raise CertificateFailure(self)
        return self


class CertificateFailure(RuntimeError):
    def __init__(self, certificate: Certificate):
        self.certificate = certificate
        super().__init__(f"certificate {certificate.name!r} failed: "
                         f"margins={certificate.margins} notes={certificate.notes}")
