"""Problem-instance data model shared by the optimizer, oracle and simulator.

A deployment decision problem bundles the candidate client profiles, the
per-client resource demand of the learning service, the per-area deployment
requests from orchestrators, objective weights and the round thresholds.
Instances serialize to a single JSON document with the exact field names
used here.
"""

from __future__ import annotations

import json
from pathlib import Path

from pydantic import BaseModel, ConfigDict

WEIGHT_SUM_TOL = 1e-9


class ClientProfile(BaseModel):
    """One candidate device as reported by its area orchestrator."""

    model_config = ConfigDict(frozen=True)

    id: int
    cpu_capacity: float
    memory_capacity: float
    disk_capacity: float
    battery_level: float
    availability_secs: float
    area_id: int
    movements: float
    priority: int = 1
    rounds_served: int = 0


class UtilizationProfile(BaseModel):
    """Resource consumption of the learning service on one client."""

    model_config = ConfigDict(frozen=True)

    cpu: float
    memory: float
    battery: float
    disk: float


class AreaRequestVector(BaseModel):
    """Per-area deployment request flags raised by orchestrators."""

    model_config = ConfigDict(frozen=True)

    requested: list[int]


class ObjectiveWeights(BaseModel):
    """Adjustable weights for the five deployment objectives; must sum to 1."""

    model_config = ConfigDict(frozen=True)

    w1: float = 0.2
    w2: float = 0.2
    w3: float = 0.2
    w4: float = 0.2
    w5: float = 0.2

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.w1, self.w2, self.w3, self.w4, self.w5)


class DeploymentThresholds(BaseModel):
    """Server-side knobs bounding one round's selection."""

    model_config = ConfigDict(frozen=True)

    min_round_time_secs: float
    movement_threshold: float
    high_movement_fraction: float
    min_selected: int
    max_selected: int


class ProblemInstance(BaseModel):
    """Full input of one deployment decision.

    ``clients`` and ``utilizations`` are index-aligned; ``priority_levels``
    is the top of the priority scale (clients carry 1..priority_levels).
    """

    model_config = ConfigDict(frozen=True)

    clients: list[ClientProfile]
    utilizations: list[UtilizationProfile]
    requests: AreaRequestVector
    weights: ObjectiveWeights
    thresholds: DeploymentThresholds
    area_count: int
    priority_levels: int = 10

    @property
    def n(self) -> int:
        return len(self.clients)


class SelectionVector(BaseModel):
    """Binary deployment decision, one gene per candidate client."""

    model_config = ConfigDict(frozen=True)

    genes: list[int]

    @property
    def selected_count(self) -> int:
        return sum(self.genes)


class ValidationReport(BaseModel):
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_instance(instance: ProblemInstance) -> ValidationReport:
    """Check every type invariant and report violations without aborting."""
    v: list[str] = []
    n = len(instance.clients)
    m = instance.area_count
    t = instance.priority_levels

    if len(instance.utilizations) != n:
        v.append(
            f"clients/utilizations length mismatch ({n} vs {len(instance.utilizations)})"
        )
    if not (1 <= t <= 10):
        v.append(f"priority_levels out of range (got {t}, expected 1..10)")

    for c in instance.clients:
        if c.cpu_capacity < 0 or c.memory_capacity < 0 or c.disk_capacity < 0:
            v.append(f"client {c.id}: negative capacity")
        if not (0.0 <= c.battery_level <= 100.0):
            v.append(f"client {c.id}: battery out of range (got {c.battery_level})")
        if c.availability_secs < 0:
            v.append(f"client {c.id}: negative availability")
        if not (0 <= c.area_id < m):
            v.append(f"client {c.id}: area out of range (got {c.area_id}, m={m})")
        if c.movements < 0:
            v.append(f"client {c.id}: negative movements")
        if not (1 <= c.priority <= t):
            v.append(f"client {c.id}: priority out of range (got {c.priority}, t={t})")
        if c.rounds_served < 0:
            v.append(f"client {c.id}: negative rounds_served")

    for i, u in enumerate(instance.utilizations):
        if u.cpu < 0 or u.memory < 0 or u.battery < 0 or u.disk < 0:
            v.append(f"utilization {i}: negative consumption")

    if len(instance.requests.requested) != m:
        v.append(
            f"requests length mismatch (got {len(instance.requests.requested)}, m={m})"
        )
    for k, flag in enumerate(instance.requests.requested):
        if flag not in (0, 1):
            v.append(f"request flag for area {k} not binary (got {flag})")

    w = instance.weights.as_tuple()
    if any(not (0.0 <= wk <= 1.0) for wk in w):
        v.append("weight outside [0,1]")
    if abs(sum(w) - 1.0) > WEIGHT_SUM_TOL:
        v.append(f"weights sum ≠ 1 (got {sum(w)!r})")

    th = instance.thresholds
    if th.min_round_time_secs < 0:
        v.append("min_round_time_secs negative")
    if not (0.0 <= th.high_movement_fraction <= 1.0):
        v.append(
            f"high_movement_fraction out of range (got {th.high_movement_fraction})"
        )
    if not (0 <= th.min_selected <= th.max_selected <= n):
        v.append(
            "cardinality bounds invalid "
            f"(min={th.min_selected}, max={th.max_selected}, n={n})"
        )
    return ValidationReport(violations=v)


def load_instance(path: str | Path) -> ProblemInstance:
    with open(path, "r", encoding="utf-8") as fh:
        return ProblemInstance.model_validate(json.load(fh))


def dump_instance(instance: ProblemInstance, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance.model_dump(), fh, indent=2)
        fh.write("\n")
