"""Report containers shared by the Monte-Carlo experiment modules.

Every estimate carries a half-width of three standard errors; a one-sided
check passes when the estimate does not exceed its bound by more than the
half-width.  Reports serialize deterministically (sorted keys, shortest
round-trip floats) so identical seeds give byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np


def half_width(std: float, n: int) -> float:
    """Three standard errors of the mean."""
    return 3.0 * std / math.sqrt(n)


def content_seed(base_seed: int, *fields) -> np.random.SeedSequence:
    """Seed derived from parameter content: identical laws share samples.

    Makes gap and comparison reports exactly zero along constant sequences
    while keeping distinct laws independent.
    """
    digest = hashlib.sha256(repr(fields).encode("utf-8")).digest()
    key = int.from_bytes(digest[:8], "big")
    return np.random.SeedSequence(entropy=(int(base_seed), key))


@dataclass(frozen=True)
class CheckRecord:
    name: str
    estimate: float
    half_width: float
    bound: float | None = None
    passed: bool = True
    expected_failure: bool = False
    detail: str = ""

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "estimate": self.estimate,
            "half_width": self.half_width,
            "passed": self.passed,
        }
        if self.bound is not None:
            out["bound"] = self.bound
        if self.expected_failure:
            out["expected_failure"] = True
        if self.detail:
            out["detail"] = self.detail
        return out


def one_sided(name: str, estimate: float, hw: float, bound: float, **kw) -> CheckRecord:
    return CheckRecord(
        name=name,
        estimate=estimate,
        half_width=hw,
        bound=bound,
        passed=estimate <= bound + hw,
        **kw,
    )


def two_sided(name: str, estimate: float, hw: float, target: float, **kw) -> CheckRecord:
    return CheckRecord(
        name=name,
        estimate=estimate,
        half_width=hw,
        bound=target,
        passed=abs(estimate - target) <= hw,
        **kw,
    )


@dataclass(frozen=True)
class ConcentrationReport:
    name: str
    sample_count: int
    seed: int
    checks: tuple[CheckRecord, ...]
    extras: Mapping = field(default_factory=dict)
    curves: Mapping[str, Sequence[Sequence[float]]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed or c.expected_failure for c in self.checks)

    def check(self, name: str) -> CheckRecord:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "sample_count": self.sample_count,
            "seed": self.seed,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            "extras": _plain(self.extras),
        }


def _plain(obj):
    """Recursively convert numpy scalars/arrays for JSON output."""
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if isinstance(obj, Mapping):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def dump_json(doc, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_plain(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")


def canonical_json(doc) -> str:
    return json.dumps(_plain(doc), sort_keys=True, separators=(",", ":"))


def write_curve_csv(path, header: Sequence[str], rows: Iterable[Sequence[float]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(x)) for x in row])
