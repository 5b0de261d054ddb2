"""Multi-objective genetic algorithm for the client deployment problem.

Chromosomes are binary selection vectors. The search keeps two structures:
a fixed-size population evolved by binary tournament selection, one-point
crossover and per-gene 1/n bit-flip mutation, and an archive of mutually
non-dominated feasible selections. Infeasible offspring are repaired, never
penalized. Everything is deterministic given the config seed.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .domain import ProblemInstance, SelectionVector, validate_instance
from .objectives import (
    InstanceArrays,
    ObjectiveVector,
    dominates,
    eval_objectives,
    is_feasible,
    movement_cap,
)

DEFAULT_ARCHIVE_CAP = 64
_REPAIR_PASSES = 4


class InfeasibleInstanceError(Exception):
    """No selection can satisfy the deployment constraints."""


class GaConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    population_size: int = Field(default=50, ge=2)
    generations: int = Field(default=100, ge=0)
    crossover_prob: float = Field(default=0.9, ge=0.0, le=1.0)
    tournament_size: int = Field(default=2, ge=2)
    seed: int = Field(default=0, ge=0)
    archive_cap: int = Field(default=DEFAULT_ARCHIVE_CAP, ge=1)


class ArchiveEntry(NamedTuple):
    selection: SelectionVector
    objectives: ObjectiveVector


class ParetoArchive:
    """Bounded set of mutually non-dominated feasible selections.

    When bound to an instance (the solver and oracle always bind one),
    candidates are feasibility-checked on insertion.
    """

    def __init__(
        self,
        cap: int | None = DEFAULT_ARCHIVE_CAP,
        context: InstanceArrays | None = None,
        entries: Sequence[ArchiveEntry] = (),
    ):
        self.cap = cap
        self.context = context
        self.entries: list[ArchiveEntry] = list(entries)

    def __len__(self) -> int:
        return len(self.entries)

    def best_by_scalar(self) -> ArchiveEntry:
        if not self.entries:
            raise ValueError("archive is empty")
        return min(self.entries, key=lambda e: (-e.objectives.scalar, tuple(e.selection.genes)))

    def to_json_entries(self) -> list[dict]:
        out = []
        for sel, obj in self.entries:
            row = {"genes": list(sel.genes)}
            row.update(obj.model_dump())
            out.append(row)
        return out


def _crowding_distances(vectors: list[ObjectiveVector]) -> list[float]:
    """Sum of per-objective nearest-neighbor gaps; extremes get infinity."""
    k = len(vectors)
    dist = [0.0] * k
    if k <= 2:
        return [math.inf] * k
    for obj_idx in range(5):
        vals = [v.components()[obj_idx] for v in vectors]
        order = sorted(range(k), key=lambda i: vals[i])
        dist[order[0]] = math.inf
        dist[order[-1]] = math.inf
        for pos in range(1, k - 1):
            i = order[pos]
            dist[i] += vals[order[pos + 1]] - vals[order[pos - 1]]
    return dist


def update_archive(
    archive: ParetoArchive, candidate_sel: SelectionVector, candidate_obj: ObjectiveVector
) -> ParetoArchive:
    """Insert a feasible candidate, dropping entries it dominates.

    Duplicated gene strings are ignored. When the cap is exceeded the entry
    with the smallest crowding contribution is pruned; the best-scalar entry
    is never pruned, which keeps elite fitness monotone over a run.
    """
    if archive.context is not None and not is_feasible(archive.context, candidate_sel):
        raise ValueError("infeasible candidate rejected by archive")
    genes = tuple(candidate_sel.genes)
    for sel, obj in archive.entries:
        if dominates(obj, candidate_obj):
            return archive
        if tuple(sel.genes) == genes:
            return archive
    kept = [
        e for e in archive.entries if not dominates(candidate_obj, e.objectives)
    ]
    kept.append(ArchiveEntry(candidate_sel, candidate_obj))
    out = ParetoArchive(cap=archive.cap, context=archive.context, entries=kept)
    if out.cap is not None and len(out.entries) > out.cap:
        crowd = _crowding_distances([e.objectives for e in out.entries])
        protected = out.entries.index(out.best_by_scalar())
        victim = min(
            (i for i in range(len(out.entries)) if i != protected),
            key=lambda i: (crowd[i], tuple(out.entries[i].selection.genes)),
        )
        del out.entries[victim]
    return out


# ---------------------------------------------------------------------------
# feasibility existence check
# ---------------------------------------------------------------------------


def _existence_diagnostic(a: InstanceArrays) -> str | None:
    """None if some feasible selection exists, else the blocking family."""
    need = a.min_selected
    if need == 0:
        return None
    if int(a.resource_ok.sum()) < need:
        return (
            f"fewer than {need} clients can host the service within their "
            "resource capacities"
        )
    if int(a.deployable.sum()) < need:
        return (
            f"fewer than {need} resource-capable clients stay at least "
            f"{a.min_t} s (minimum round time)"
        )
    low = int((a.deployable & ~a.high_movement).sum())
    high = int((a.deployable & a.high_movement).sum())
    if low + min(high, movement_cap(a.mt, need)) < need:
        return (
            f"any selection of {need} deployable clients exceeds the "
            "high-movement cap"
        )
    return None


def ensure_solvable(instance: ProblemInstance | InstanceArrays) -> InstanceArrays:
    a = instance if isinstance(instance, InstanceArrays) else InstanceArrays(instance)
    diag = _existence_diagnostic(a)
    if diag is not None:
        raise InfeasibleInstanceError(diag)
    return a


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------


def tournament_select(
    population: Sequence[np.ndarray | SelectionVector],
    scores: Sequence[float],
    rng: np.random.Generator,
    tournament_size: int = 2,
) -> np.ndarray | SelectionVector:
    """Binary tournament: best scalar among distinct drawn indices wins."""
    if len(population) == 0:
        raise ValueError("empty population")
    k = min(tournament_size, len(population))
    idx = rng.choice(len(population), size=k, replace=False)
    winner = min((int(i) for i in idx), key=lambda i: (-scores[i], i))
    return population[winner]


def one_point_crossover(
    a, b, rng: np.random.Generator, crossover_prob: float
) -> tuple[np.ndarray, np.ndarray]:
    ga = np.asarray(a.genes if isinstance(a, SelectionVector) else a, dtype=int)
    gb = np.asarray(b.genes if isinstance(b, SelectionVector) else b, dtype=int)
    if ga.shape != gb.shape:
        raise ValueError("parent length mismatch")
    n = ga.shape[0]
    if n < 2:
        raise ValueError("crossover needs chromosomes of length >= 2")
    if rng.random() < crossover_prob:
        cut = int(rng.integers(1, n))
        c1 = np.concatenate([ga[:cut], gb[cut:]])
        c2 = np.concatenate([gb[:cut], ga[cut:]])
        return c1, c2
    return ga.copy(), gb.copy()


def bitflip_mutate(sel, rng: np.random.Generator, n: int) -> np.ndarray:
    genes = np.asarray(sel.genes if isinstance(sel, SelectionVector) else sel, dtype=int)
    if genes.shape[0] != n:
        raise ValueError("length mismatch")
    flips = rng.random(n) < (1.0 / n)
    return np.where(flips, 1 - genes, genes)


# ---------------------------------------------------------------------------
# reparation
# ---------------------------------------------------------------------------


class RepairOutcome(NamedTuple):
    selection: SelectionVector
    unrepairable: bool


def _scratch_selection(a: InstanceArrays) -> np.ndarray | None:
    """Build a feasible selection of min_selected clients, or None."""
    genes = np.zeros(a.n, dtype=int)
    need = a.min_selected
    if need == 0:
        return genes
    order = sorted(
        np.flatnonzero(a.deployable), key=lambda i: (-a.priorities[i], i)
    )
    high_budget = movement_cap(a.mt, need)
    high_used = 0
    for i in order:
        if genes.sum() >= need:
            break
        if a.high_movement[i]:
            if high_used >= high_budget:
                continue
            high_used += 1
        genes[i] = 1
    if int(genes.sum()) < need:
        return None
    return genes


def _repair_genes(
    a: InstanceArrays, genes: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, bool]:
    genes = genes.copy()

    for _ in range(_REPAIR_PASSES):
        if is_feasible(a, genes):
            return genes, False

        # overloaded clients: substitute a resource-capable client in the
        # same area, otherwise just drop
        for i in np.flatnonzero(genes & ~a.resource_ok):
            candidates = np.flatnonzero(
                (genes == 0) & a.resource_ok & (a.areas == a.areas[i])
            )
            genes[i] = 0
            if candidates.size:
                genes[int(rng.choice(candidates))] = 1

        # clients leaving too soon: substitute the unselected deployable
        # client with the highest movement record
        for i in np.flatnonzero(genes):
            if a.availability[i] >= a.min_t:
                continue
            candidates = np.flatnonzero((genes == 0) & a.deployable)
            genes[i] = 0
            if candidates.size:
                best = min(
                    (int(j) for j in candidates),
                    key=lambda j: (-a.movements[j], j),
                )
                genes[best] = 1

        # too many high-movement clients: swap against low-movement
        # candidates, dropping when none remain
        while True:
            mask = genes.astype(bool)
            total = int(mask.sum())
            high_sel = np.flatnonzero(mask & a.high_movement)
            if high_sel.size <= movement_cap(a.mt, total):
                break
            worst = min((int(j) for j in high_sel), key=lambda j: (-a.movements[j], j))
            low_candidates = np.flatnonzero((genes == 0) & a.deployable & ~a.high_movement)
            genes[worst] = 0
            if low_candidates.size:
                best = min(
                    (int(j) for j in low_candidates),
                    key=lambda j: (a.movements[j], j),
                )
                genes[best] = 1

        # cardinality: fill by descending priority, trim by ascending
        while int(genes.sum()) < a.min_selected:
            mask = genes.astype(bool)
            total = int(mask.sum())
            high_used = int((mask & a.high_movement).sum())
            candidates = [int(j) for j in np.flatnonzero((genes == 0) & a.deployable)]
            if not candidates:
                break
            # prefer additions that keep the high-movement cap intact
            safe = [
                j
                for j in candidates
                if not a.high_movement[j]
                or high_used + 1 <= movement_cap(a.mt, total + 1)
            ]
            pool = safe or candidates
            pick = min(pool, key=lambda j: (-a.priorities[j], j))
            genes[pick] = 1
        while int(genes.sum()) > a.max_selected:
            selected = [int(j) for j in np.flatnonzero(genes)]
            drop = min(selected, key=lambda j: (a.priorities[j], j))
            genes[drop] = 0

    if is_feasible(a, genes):
        return genes, False
    scratch = _scratch_selection(a)
    if scratch is not None:
        return scratch, False
    return genes, True


def repair(
    instance: ProblemInstance | InstanceArrays,
    sel: SelectionVector | np.ndarray,
    rng: np.random.Generator | None = None,
) -> RepairOutcome:
    """Turn an infeasible selection feasible; feasible input is untouched.

    Applies, in order: overload substitution within the same area, staying
    time substitution by movement record, high-movement swaps, and finally
    cardinality fill/trim (priority-ordered). Returns the best-effort
    selection with ``unrepairable`` set when the instance itself admits no
    feasible selection.
    """
    a = instance if isinstance(instance, InstanceArrays) else InstanceArrays(instance)
    genes = np.asarray(
        sel.genes if isinstance(sel, SelectionVector) else sel, dtype=int
    )
    if genes.shape[0] != a.n:
        raise ValueError("selection length mismatch")
    if rng is None:
        rng = np.random.default_rng(0)
    if is_feasible(a, genes):
        return RepairOutcome(SelectionVector(genes=[int(g) for g in genes]), False)
    repaired, failed = _repair_genes(a, genes, rng)
    return RepairOutcome(SelectionVector(genes=[int(g) for g in repaired]), failed)


# ---------------------------------------------------------------------------
# population handling and the main loop
# ---------------------------------------------------------------------------


def _init_genes(
    a: InstanceArrays, cfg: GaConfig, rng: np.random.Generator
) -> list[np.ndarray]:
    q = min(max(a.min_selected * 2.0 / a.n, 0.05), 0.5) if a.n else 0.0
    population = []
    for _ in range(cfg.population_size):
        raw = (rng.random(a.n) < q).astype(int)
        genes, _ = _repair_genes(a, raw, rng)
        population.append(genes)
    return population


def init_population(instance: ProblemInstance, cfg: GaConfig) -> list[SelectionVector]:
    """Seeded, repaired initial population; raises if the instance is unsolvable."""
    a = ensure_solvable(instance)
    rng = np.random.default_rng(cfg.seed)
    return [
        SelectionVector(genes=[int(g) for g in genes])
        for genes in _init_genes(a, cfg, rng)
    ]


def solve(
    instance: ProblemInstance, cfg: GaConfig
) -> tuple[ParetoArchive, SelectionVector]:
    """Run the generational loop and return (archive, recommended selection).

    The recommendation is the archive entry with the highest weighted
    fitness (ties resolved to the lexicographically smallest gene string).
    """
    report = validate_instance(instance)
    if not report.ok:
        raise ValueError("invalid instance: " + "; ".join(report.violations))
    a = ensure_solvable(instance)
    rng = np.random.default_rng(cfg.seed)

    population = _init_genes(a, cfg, rng)
    scores = [eval_objectives(a, g).scalar for g in population]

    archive = ParetoArchive(cap=cfg.archive_cap, context=a)
    for genes in population:
        if is_feasible(a, genes):
            sel = SelectionVector(genes=[int(g) for g in genes])
            archive = update_archive(archive, sel, eval_objectives(a, genes))

    for _ in range(cfg.generations):
        pool = population + [np.asarray(e.selection.genes, dtype=int) for e in archive.entries]
        pool_scores = scores + [e.objectives.scalar for e in archive.entries]

        children: list[np.ndarray] = []
        while len(children) < cfg.population_size:
            p1 = tournament_select(pool, pool_scores, rng, cfg.tournament_size)
            p2 = tournament_select(pool, pool_scores, rng, cfg.tournament_size)
            if a.n >= 2:
                c1, c2 = one_point_crossover(p1, p2, rng, cfg.crossover_prob)
            else:
                c1, c2 = np.asarray(p1).copy(), np.asarray(p2).copy()
            for child in (c1, c2):
                mutated = bitflip_mutate(child, rng, a.n)
                repaired, _ = _repair_genes(a, mutated, rng)
                children.append(repaired)
        children = children[: cfg.population_size]
        child_scores = []
        for genes in children:
            obj = eval_objectives(a, genes)
            child_scores.append(obj.scalar)
            if is_feasible(a, genes):
                sel = SelectionVector(genes=[int(g) for g in genes])
                archive = update_archive(archive, sel, obj)

        merged = population + children
        merged_scores = scores + child_scores
        order = sorted(
            range(len(merged)),
            key=lambda i: (-merged_scores[i], tuple(merged[i])),
        )[: cfg.population_size]
        population = [merged[i] for i in order]
        scores = [merged_scores[i] for i in order]

    if not archive.entries:
        raise InfeasibleInstanceError("no feasible selection found")
    return archive, archive.best_by_scalar().selection
