"""Constraint checks, objective evaluation and Pareto dominance.

All five objectives are normalized to [0,1] in maximization form before the
weighted sum, so the adjustable weights stay commensurable:

  f1: fraction of clients left undeployed (deployment count, minimized)
  f2: share of the total movement activity captured by the selection
  f3: mean selected priority relative to the top priority level
  f4: distinct-area coverage of the selection
  f5: fraction of selected clients sitting in requested areas
      (neutral 1.0 when no area requested)

Empty selections score 0 on f2..f5. Infeasible selections are still
evaluable; feasibility is repaired upstream, never penalized here.
"""

from __future__ import annotations

import math
from enum import Enum
from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict

from .domain import ProblemInstance, SelectionVector

CEIL_EPS = 1e-9


class ViolationKind(str, Enum):
    Cpu = "Cpu"
    Memory = "Memory"
    Disk = "Disk"
    Battery = "Battery"
    Availability = "Availability"
    MovementCap = "MovementCap"
    CardinalityLow = "CardinalityLow"
    CardinalityHigh = "CardinalityHigh"


class ConstraintViolation(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: ViolationKind
    client_id: int | None = None
    detail: str = ""


class ObjectiveVector(BaseModel):
    """Normalized objective components plus their weighted sum."""

    model_config = ConfigDict(frozen=True)

    f1: float
    f2: float
    f3: float
    f4: float
    f5: float
    scalar: float

    def components(self) -> tuple[float, float, float, float, float]:
        return (self.f1, self.f2, self.f3, self.f4, self.f5)


class InstanceArrays:
    """Column view of an instance for vectorized evaluation.

    Derived once per instance; read-only and safe to share across workers.
    """

    def __init__(self, instance: ProblemInstance):
        self.instance = instance
        self.n = instance.n
        cl = instance.clients
        ut = instance.utilizations
        self.cpu_cap = np.array([c.cpu_capacity for c in cl], dtype=float)
        self.mem_cap = np.array([c.memory_capacity for c in cl], dtype=float)
        self.disk_cap = np.array([c.disk_capacity for c in cl], dtype=float)
        self.battery = np.array([c.battery_level for c in cl], dtype=float)
        self.availability = np.array([c.availability_secs for c in cl], dtype=float)
        self.areas = np.array([c.area_id for c in cl], dtype=int)
        self.movements = np.array([c.movements for c in cl], dtype=float)
        self.priorities = np.array([c.priority for c in cl], dtype=float)
        self.u_cpu = np.array([u.cpu for u in ut], dtype=float)
        self.u_mem = np.array([u.memory for u in ut], dtype=float)
        self.u_battery = np.array([u.battery for u in ut], dtype=float)
        self.u_disk = np.array([u.disk for u in ut], dtype=float)
        self.requested = np.array(instance.requests.requested, dtype=int)
        self.any_request = bool(self.requested.any())
        # area flag per client: 1 if the client's current area is requested
        self.client_in_requested = (
            self.requested[self.areas] if self.n else np.zeros(0, dtype=int)
        )
        self.total_movements = float(self.movements.sum())
        th = instance.thresholds
        self.min_t = th.min_round_time_secs
        self.max_t = th.movement_threshold
        self.mt = th.high_movement_fraction
        self.min_selected = th.min_selected
        self.max_selected = th.max_selected
        self.t_levels = instance.priority_levels
        self.weights = np.array(instance.weights.as_tuple(), dtype=float)
        # per-client feasibility of hosting the service at all
        self.resource_ok = (
            (self.u_cpu <= self.cpu_cap)
            & (self.u_mem <= self.mem_cap)
            & (self.u_disk <= self.disk_cap)
            & (self.u_battery <= self.battery)
        )
        self.availability_ok = self.availability >= self.min_t
        self.deployable = self.resource_ok & self.availability_ok
        self.high_movement = self.movements >= self.max_t


def _genes(sel: SelectionVector | Sequence[int] | np.ndarray) -> np.ndarray:
    if isinstance(sel, SelectionVector):
        return np.asarray(sel.genes, dtype=int)
    return np.asarray(sel, dtype=int)


def _check_length(arrays: InstanceArrays, genes: np.ndarray) -> None:
    if genes.shape[0] != arrays.n:
        raise ValueError(
            f"selection length {genes.shape[0]} does not match client count {arrays.n}"
        )


def _as_arrays(instance: ProblemInstance | InstanceArrays) -> InstanceArrays:
    if isinstance(instance, InstanceArrays):
        return instance
    return InstanceArrays(instance)


def movement_cap(mt: float, selected_count: int) -> int:
    """Allowed number of high-movement clients for a selection of this size."""
    return math.ceil(mt * selected_count - CEIL_EPS)


def check_resources(instance, sel) -> list[ConstraintViolation]:
    """Per selected client, one violation per resource the service exceeds."""
    a = _as_arrays(instance)
    genes = _genes(sel)
    _check_length(a, genes)
    out: list[ConstraintViolation] = []
    resource_kinds = (
        (ViolationKind.Cpu, a.u_cpu, a.cpu_cap),
        (ViolationKind.Memory, a.u_mem, a.mem_cap),
        (ViolationKind.Disk, a.u_disk, a.disk_cap),
        (ViolationKind.Battery, a.u_battery, a.battery),
    )
    for i in np.flatnonzero(genes):
        cid = a.instance.clients[int(i)].id
        for kind, use, cap in resource_kinds:
            if use[i] > cap[i]:
                out.append(
                    ConstraintViolation(
                        kind=kind,
                        client_id=cid,
                        detail=f"{kind.value} demand {use[i]} exceeds capacity {cap[i]}",
                    )
                )
    return out


def check_availability(instance, sel) -> list[ConstraintViolation]:
    """Selected clients must stay at least one round time in their area."""
    a = _as_arrays(instance)
    genes = _genes(sel)
    _check_length(a, genes)
    out: list[ConstraintViolation] = []
    for i in np.flatnonzero(genes):
        if a.availability[i] < a.min_t:
            out.append(
                ConstraintViolation(
                    kind=ViolationKind.Availability,
                    client_id=a.instance.clients[int(i)].id,
                    detail=f"availability {a.availability[i]} below round time {a.min_t}",
                )
            )
    return out


def check_movement_cap(instance, sel) -> list[ConstraintViolation]:
    """At most ceil(Mt * selected) clients may be high-movement."""
    a = _as_arrays(instance)
    genes = _genes(sel)
    _check_length(a, genes)
    mask = genes.astype(bool)
    high = int((a.high_movement & mask).sum())
    total = int(mask.sum())
    cap = movement_cap(a.mt, total)
    if high > cap:
        return [
            ConstraintViolation(
                kind=ViolationKind.MovementCap,
                detail=f"{high} high-movement clients selected, cap is {cap}",
            )
        ]
    return []


def check_cardinality(instance, sel) -> list[ConstraintViolation]:
    a = _as_arrays(instance)
    genes = _genes(sel)
    _check_length(a, genes)
    total = int(genes.sum())
    if total < a.min_selected:
        return [
            ConstraintViolation(
                kind=ViolationKind.CardinalityLow,
                detail=f"{total} selected, minimum is {a.min_selected}",
            )
        ]
    if total > a.max_selected:
        return [
            ConstraintViolation(
                kind=ViolationKind.CardinalityHigh,
                detail=f"{total} selected, maximum is {a.max_selected}",
            )
        ]
    return []


def all_violations(instance, sel) -> list[ConstraintViolation]:
    a = _as_arrays(instance)
    return (
        check_resources(a, sel)
        + check_availability(a, sel)
        + check_movement_cap(a, sel)
        + check_cardinality(a, sel)
    )


def is_feasible(instance, sel) -> bool:
    a = _as_arrays(instance)
    genes = _genes(sel)
    _check_length(a, genes)
    mask = genes.astype(bool)
    if not bool(a.deployable[mask].all()):
        return False
    total = int(mask.sum())
    if not (a.min_selected <= total <= a.max_selected):
        return False
    high = int((a.high_movement & mask).sum())
    return high <= movement_cap(a.mt, total)


def eval_objectives(instance, sel) -> ObjectiveVector:
    """Evaluate the five normalized objectives and their weighted sum."""
    a = _as_arrays(instance)
    genes = _genes(sel)
    _check_length(a, genes)
    mask = genes.astype(bool)
    s = int(mask.sum())
    n = a.n

    f1 = 1.0 - s / n if n else 1.0
    if s == 0:
        f2 = f3 = f4 = f5 = 0.0
    else:
        f2 = (
            float(a.movements[mask].sum()) / a.total_movements
            if a.total_movements > 0
            else 0.0
        )
        f3 = float(a.priorities[mask].sum()) / (a.t_levels * s)
        distinct = len(np.unique(a.areas[mask]))
        f4 = distinct / min(a.instance.area_count, s)
        if a.any_request:
            f5 = float(a.client_in_requested[mask].sum()) / s
        else:
            f5 = 1.0
    comps = np.array([f1, f2, f3, f4, f5])
    scalar = float(np.dot(a.weights, comps))
    return ObjectiveVector(f1=f1, f2=f2, f3=f3, f4=f4, f5=f5, scalar=scalar)


def dominates(a: ObjectiveVector, b: ObjectiveVector) -> bool:
    """True iff a is at least as good everywhere and strictly better somewhere."""
    ac, bc = a.components(), b.components()
    return all(x >= y for x, y in zip(ac, bc)) and any(
        x > y for x, y in zip(ac, bc)
    )
