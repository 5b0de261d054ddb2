"""Brute-force ground truth for small deployment instances.

Enumerates every selection, keeps the feasible ones and filters to the
exact non-dominated set. Exists to test the genetic solver, not to scale:
anything above 20 clients is refused.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .domain import ProblemInstance, SelectionVector
from .ga import ArchiveEntry, ParetoArchive
from .objectives import (
    InstanceArrays,
    ObjectiveVector,
    dominates,
    eval_objectives,
    is_feasible,
)

MAX_ORACLE_CLIENTS = 20
EXACT_HV_MAX_POINTS = 20
MC_SAMPLES = 1_000_000
_MC_SEED = 0x0F1DE


def enumerate_pareto(instance: ProblemInstance) -> ParetoArchive:
    """Exact Pareto front over all 2^n selections (n <= 20).

    Selections with identical objective vectors are all retained; dominance
    requires a strict improvement.
    """
    a = InstanceArrays(instance)
    if a.n > MAX_ORACLE_CLIENTS:
        raise ValueError(
            f"exhaustive enumeration refused for n={a.n} (> {MAX_ORACLE_CLIENTS})"
        )
    # only subsets of individually deployable clients can be feasible
    deployable = [int(i) for i in np.flatnonzero(a.deployable)]
    d = len(deployable)

    front: list[tuple[np.ndarray, ObjectiveVector]] = []
    for mask in range(1 << d):
        genes = np.zeros(a.n, dtype=int)
        for bit, idx in enumerate(deployable):
            if mask >> bit & 1:
                genes[idx] = 1
        if not is_feasible(a, genes):
            continue
        obj = eval_objectives(a, genes)
        if any(dominates(kept_obj, obj) for _, kept_obj in front):
            continue
        front = [(g, o) for g, o in front if not dominates(obj, o)]
        front.append((genes, obj))

    front.sort(key=lambda pair: tuple(pair[0]))
    entries = [
        ArchiveEntry(SelectionVector(genes=[int(g) for g in genes]), obj)
        for genes, obj in front
    ]
    return ParetoArchive(cap=None, context=a, entries=entries)


def _front_points(front) -> np.ndarray:
    if isinstance(front, ParetoArchive):
        vectors = [e.objectives for e in front.entries]
    else:
        vectors = list(front)
    rows = []
    for v in vectors:
        rows.append(v.components() if isinstance(v, ObjectiveVector) else tuple(v))
    return np.asarray(rows, dtype=float).reshape(len(rows), -1)


def _exact_hypervolume(points: np.ndarray) -> float:
    """Union volume of the boxes [0, p] by inclusion-exclusion.

    Memory and time are exponential in the front size; callers keep it
    at or below EXACT_HV_MAX_POINTS.
    """
    f = points.shape[0]
    mins = np.empty((1 << f, points.shape[1]))
    total = 0.0
    for mask in range(1, 1 << f):
        low = (mask & -mask).bit_length() - 1
        rest = mask & (mask - 1)
        mins[mask] = points[low] if rest == 0 else np.minimum(mins[rest], points[low])
        vol = float(np.prod(mins[mask]))
        total += vol if bin(mask).count("1") % 2 == 1 else -vol
    return total


def mc_hypervolume(points: np.ndarray, samples: int = MC_SAMPLES) -> tuple[float, float]:
    """Monte-Carlo estimate over the bounding box; returns (value, std error)."""
    rng = np.random.default_rng(_MC_SEED)
    hi = points.max(axis=0)
    box = float(np.prod(hi))
    if box == 0.0:
        return 0.0, 0.0
    hits = 0
    chunk = 100_000
    done = 0
    while done < samples:
        take = min(chunk, samples - done)
        draws = rng.random((take, points.shape[1])) * hi
        covered = np.zeros(take, dtype=bool)
        for p in points:
            covered |= (draws <= p).all(axis=1)
        hits += int(covered.sum())
        done += take
    frac = hits / samples
    stderr = box * float(np.sqrt(frac * (1.0 - frac) / samples))
    return box * frac, stderr


def hypervolume(front, reference_point: Sequence[float] = (0, 0, 0, 0, 0)) -> float:
    """Volume dominated by the front relative to the reference point.

    Exact by inclusion-exclusion up to EXACT_HV_MAX_POINTS points, then a
    seeded 10^6-sample Monte-Carlo estimate (standard error ~1e-3 or less).
    """
    points = _front_points(front)
    if points.size == 0:
        return 0.0
    ref = np.asarray(reference_point, dtype=float)
    if points.shape[1] != ref.shape[0]:
        raise ValueError("reference point dimension mismatch")
    if (points < ref).any():
        raise ValueError("reference point must be dominated by every front entry")
    shifted = points - ref
    if shifted.shape[0] <= EXACT_HV_MAX_POINTS:
        return _exact_hypervolume(shifted)
    value, _ = mc_hypervolume(shifted)
    return value
