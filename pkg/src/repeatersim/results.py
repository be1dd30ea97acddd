"""Per-trial records and aggregated sweep-point results."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

__all__ = [
    "TrialRecord",
    "IonSweepResult",
    "ApeSweepResult",
    "mean_and_sem",
    "write_trial_log",
]


@dataclass(frozen=True)
class TrialRecord:
    """One simulated iteration, as logged to JSON lines."""

    iteration: int
    outcome: str  # "success" | "fail_step1" | "fail_step2" | "fail_link_<k>"
    duration_ps: int
    fidelity: float | None = None
    frame: str | None = None

    def to_json(self) -> str:
        payload = {k: v for k, v in asdict(self).items() if v is not None}
        return json.dumps(payload, sort_keys=True)


@dataclass(frozen=True)
class IonSweepResult:
    distance_km: float
    n: int
    protocol: str  # "two_step" | "hop_by_hop"
    egr_hz: float
    egr_sem: float  # delta-method over iid iterations
    fidelity: float | None
    fidelity_sem: float | None
    iterations: int
    successes: int
    seed: int


@dataclass(frozen=True)
class ApeSweepResult:
    distance_km: float
    n: int
    m: int
    b0: int
    b1: int
    egr_hz: float
    success_prob: float
    fidelity: float | None
    fidelity_sem: float | None
    iterations: int
    successes: int
    censored: bool
    seed: int


def mean_and_sem(values: Sequence[float]) -> tuple[float | None, float | None]:
    """Sample mean and standard error (std / sqrt(count)); None when empty."""
    count = len(values)
    if count == 0:
        return None, None
    mean = math.fsum(values) / count
    if count == 1:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (count - 1)
    return mean, math.sqrt(var / count)


def write_trial_log(path: str | Path, records: Iterable[TrialRecord]):
    with open(path, "w") as fh:
        for record in records:
            fh.write(record.to_json() + "\n")
