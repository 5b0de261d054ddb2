"""Round-based simulation of on-demand federated learning deployment.

One round: orchestrators flag busy areas, a strategy picks clients, the
learning service is pushed to them (volunteers become available the moment
a container lands on them), survivors train locally, the server either
aggregates or discards the round, and priorities plus client positions
advance. Three selection strategies share the identical pipeline:

- OnDemandGA: solves the deployment problem each round over live profiles.
- VanillaRandom: a fixed-size uniform draw over all clients, constraints
  ignored.
- StaticPreconfigured: uniform draw restricted to a fixed subset of
  pre-provisioned devices.

Dropout rules are applied uniformly: a deployed client fails to report if
a higher-priority service invitation arrives (Bernoulli), if it leaves its
area before the round ends, or if the service does not fit its resources.
Constraint-aware selections never trip the latter two by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .domain import (
    AreaRequestVector,
    ClientProfile,
    DeploymentThresholds,
    ObjectiveWeights,
    ProblemInstance,
    SelectionVector,
    UtilizationProfile,
)
from .ga import GaConfig, InfeasibleInstanceError, solve
from .mlp import ModelParams, accuracy, fedavg_aggregate, init_params, sgd_train
from .mobility import ClientDataset, UserMobilitySummary, VisitRecord, World
from .objectives import CEIL_EPS, ObjectiveVector

PRIORITY_LEVELS = 10
AREA_ACTIVITY_FACTOR = 1.25
ORCHESTRATOR_ROLLOUT_EVERY = 3  # rounds between bringing a new area online

# rng stream tags scoped under either the world seed or the simulation seed
TAG_RESOURCES = 11
TAG_CENTRALIZED = 12
TAG_MODEL_INIT = 13
TAG_ROUND = 14
TAG_TRAIN = 15
TAG_STATIC = 16
TAG_GA = 17


def ceil_eps(x: float) -> int:
    return math.ceil(x - CEIL_EPS)


class Strategy(str, Enum):
    OnDemandGA = "OnDemandGA"
    VanillaRandom = "VanillaRandom"
    StaticPreconfigured = "StaticPreconfigured"


def default_schedule(round_index: int) -> tuple[int, int]:
    """Cardinality ramp: (5,5) at round 1 growing to (15,20) by round 15."""
    r = min(max(round_index, 1), 15)
    lo = int(round(5 + 10 * (r - 1) / 14))
    hi = int(round(5 + 15 * (r - 1) / 14))
    return lo, hi


class SimConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    rounds_max: int = Field(default=50, ge=1)
    min_report_fraction: float = Field(default=0.8, gt=0.0, le=1.0)
    round_time_T_secs: float = Field(default=600.0, ge=0.0)
    target_accuracy: float | None = None
    stop_at_target: bool = True
    client_schedule: list[tuple[int, int]] | None = None
    p_higher_priority_invite: float = Field(default=0.05, ge=0.0, le=1.0)
    strategy: Strategy = Strategy.OnDemandGA
    vanilla_fraction_C: float = Field(default=0.1, gt=0.0, le=1.0)
    static_preconfigured_fraction: float = Field(default=0.2, gt=0.0, le=1.0)
    local_epochs: int = Field(default=3, ge=0)
    learning_rate: float = Field(default=0.05, gt=0.0)
    batch_size: int = Field(default=32, ge=1)
    seed: int = Field(default=0, ge=0)
    hidden_sizes: list[int] = Field(default=[128, 256, 128])
    centralized_epochs: int = Field(default=6, ge=1)
    objective_weights: ObjectiveWeights = Field(
        default_factory=lambda: ObjectiveWeights(
            w1=0.05, w2=0.30, w3=0.05, w4=0.35, w5=0.25
        )
    )
    movement_threshold: float | None = None
    high_movement_fraction: float = Field(default=0.4, ge=0.0, le=1.0)
    service_feasible_fraction: float = Field(default=0.85, ge=0.0, le=1.0)
    ga: GaConfig = Field(
        default_factory=lambda: GaConfig(population_size=20, generations=15)
    )

    @model_validator(mode="after")
    def _check_schedule(self):
        if self.client_schedule is not None:
            prev = (0, 0)
            for lo, hi in self.client_schedule:
                if lo > hi:
                    raise ValueError("client_schedule entry has min > max")
                if lo < prev[0] or hi < prev[1]:
                    raise ValueError("client_schedule must be non-decreasing")
                prev = (lo, hi)
        return self

    def schedule_for_round(self, round_index: int) -> tuple[int, int]:
        if self.client_schedule is None:
            return default_schedule(round_index)
        idx = min(round_index, len(self.client_schedule)) - 1
        return tuple(self.client_schedule[idx])


class RoundReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    round_index: int
    strategy: str
    selected_ids: list[int]
    deployed_count: int
    reported_count: int
    discarded: bool
    test_accuracy: float
    available_clients: int
    data_volume: int
    distinct_labels: int
    objective_vector: ObjectiveVector | None = None


# ---------------------------------------------------------------------------
# world bundle: generated data plus derived training arrays
# ---------------------------------------------------------------------------


@dataclass
class WorldBundle:
    world: World
    datasets: dict[int, ClientDataset]
    summaries: dict[int, UserMobilitySummary]
    traces_by_user: dict[int, list[VisitRecord]]
    feature_dim: int = 0
    train_arrays: dict[int, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    test_arrays: dict[int, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    pooled_train: tuple[np.ndarray, np.ndarray] | None = None
    pooled_test: tuple[np.ndarray, np.ndarray] | None = None

    def __post_init__(self):
        xs_train, ys_train, xs_test, ys_test = [], [], [], []
        for user_id in sorted(self.datasets):
            ds = self.datasets[user_id]
            x = np.asarray(ds.features, dtype=float)
            y = np.asarray(ds.labels, dtype=int)
            tr, te = np.asarray(ds.train_indices), np.asarray(ds.test_indices)
            self.train_arrays[user_id] = (x[tr], y[tr])
            self.test_arrays[user_id] = (x[te], y[te])
            xs_train.append(x[tr])
            ys_train.append(y[tr])
            xs_test.append(x[te])
            ys_test.append(y[te])
        self.feature_dim = xs_train[0].shape[1] if xs_train else 0
        self.pooled_train = (np.concatenate(xs_train), np.concatenate(ys_train))
        self.pooled_test = (np.concatenate(xs_test), np.concatenate(ys_test))

    @property
    def user_ids(self) -> list[int]:
        return sorted(self.datasets)


def bundle_from_parts(
    world: World,
    traces: list[VisitRecord],
    datasets: dict[int, ClientDataset],
    summaries: dict[int, UserMobilitySummary],
) -> WorldBundle:
    by_user: dict[int, list[VisitRecord]] = {}
    for rec in traces:
        by_user.setdefault(rec.user_id, []).append(rec)
    return WorldBundle(
        world=world, datasets=datasets, summaries=summaries, traces_by_user=by_user
    )


def load_bundle(path) -> WorldBundle:
    from . import mobility

    world = mobility.load_world(path)
    traces = mobility.load_traces(path)
    datasets = mobility.load_datasets(path)
    _, summaries = mobility.build_datasets(world, traces)
    return bundle_from_parts(world, traces, datasets, summaries)


# ---------------------------------------------------------------------------
# live client state
# ---------------------------------------------------------------------------


@dataclass
class SimClient:
    client_id: int
    user_id: int
    cpu_capacity: float
    memory_capacity: float
    disk_capacity: float
    battery_level: float
    u_cpu: float
    u_memory: float
    u_battery: float
    u_disk: float
    movements: float
    priority: int
    rounds_served: int
    containerized: bool
    stay_areas: np.ndarray
    stay_ends: np.ndarray

    def position(self, clock: float) -> tuple[int, float]:
        """Current area and seconds until the next area change (cyclic replay)."""
        cycle = float(self.stay_ends[-1])
        tau = clock % cycle
        idx = int(np.searchsorted(self.stay_ends, tau, side="right"))
        idx = min(idx, len(self.stay_ends) - 1)
        return int(self.stay_areas[idx]), float(self.stay_ends[idx] - tau)

    def service_fits(self) -> bool:
        return (
            self.u_cpu <= self.cpu_capacity
            and self.u_memory <= self.memory_capacity
            and self.u_disk <= self.disk_capacity
            and self.u_battery <= self.battery_level
        )


def _merged_stays(records: list[VisitRecord]) -> tuple[np.ndarray, np.ndarray]:
    """Collapse consecutive same-area visits into stays with summed duration."""
    areas: list[int] = []
    durations: list[float] = []
    for rec in records:
        if areas and areas[-1] == rec.area_id:
            durations[-1] += rec.duration_secs
        else:
            areas.append(rec.area_id)
            durations.append(rec.duration_secs)
    return np.asarray(areas, dtype=int), np.cumsum(durations)


@dataclass
class WorldState:
    bundle: WorldBundle
    cfg: SimConfig
    clients: list[SimClient]
    global_model: ModelParams
    movement_threshold: float
    static_subset: frozenset[int]
    area_rollout_order: list[int]
    round_index: int = 1
    clock: float = 0.0
    last_accuracy: float = 0.0
    requests: AreaRequestVector | None = None

    def areas_with_orchestrator(self, round_index: int) -> set[int]:
        """Server brings one more area online every few rounds, busiest first."""
        covered = 1 + (round_index - 1) // ORCHESTRATOR_ROLLOUT_EVERY
        return set(self.area_rollout_order[: min(covered, len(self.area_rollout_order))])


def build_world_state(bundle: WorldBundle, cfg: SimConfig) -> WorldState:
    world_seed = bundle.world.config.seed
    clients = []
    for user_id in bundle.user_ids:
        summary = bundle.summaries[user_id]
        rng = np.random.default_rng([world_seed, TAG_RESOURCES, user_id])
        caps = {
            "cpu": rng.uniform(2.0, 8.0),
            "memory": rng.uniform(2048.0, 8192.0),
            "disk": rng.uniform(8000.0, 64000.0),
            "battery": rng.uniform(30.0, 100.0),
        }
        fits = rng.random() < cfg.service_feasible_fraction
        ratios = rng.uniform(0.10, 0.85, size=4)
        if not fits:
            ratios[int(rng.integers(4))] = rng.uniform(1.05, 1.6)
        areas, ends = _merged_stays(bundle.traces_by_user[user_id])
        clients.append(
            SimClient(
                client_id=user_id,
                user_id=user_id,
                cpu_capacity=caps["cpu"],
                memory_capacity=caps["memory"],
                disk_capacity=caps["disk"],
                battery_level=caps["battery"],
                u_cpu=caps["cpu"] * ratios[0],
                u_memory=caps["memory"] * ratios[1],
                u_disk=caps["disk"] * ratios[2],
                u_battery=caps["battery"] * ratios[3],
                movements=summary.movements_per_day,
                priority=1,
                rounds_served=0,
                containerized=False,
                stay_areas=areas,
                stay_ends=ends,
            )
        )

    if cfg.movement_threshold is not None:
        threshold = cfg.movement_threshold
    else:
        threshold = float(np.quantile([c.movements for c in clients], 0.75))

    n = len(clients)
    subset_rng = np.random.default_rng([cfg.seed, TAG_STATIC])
    subset_size = max(1, int(round(cfg.static_preconfigured_fraction * n)))
    subset = frozenset(
        int(i) + 1 for i in subset_rng.choice(n, size=subset_size, replace=False)
    )

    model_rng = np.random.default_rng([cfg.seed, TAG_MODEL_INIT])
    layer_sizes = [bundle.feature_dim, *cfg.hidden_sizes, bundle.world.config.place_count]
    model = init_params(layer_sizes, model_rng)

    m = bundle.world.config.area_count
    homes = np.bincount(
        [u.home_area for u in bundle.world.users], minlength=m
    )
    rollout_order = sorted(range(m), key=lambda a: (-homes[a], a))

    state = WorldState(
        bundle=bundle,
        cfg=cfg,
        clients=clients,
        global_model=model,
        movement_threshold=threshold,
        static_subset=subset,
        area_rollout_order=rollout_order,
    )
    x_test, y_test = bundle.pooled_test
    state.last_accuracy = accuracy(model, x_test, y_test)
    if cfg.strategy == Strategy.StaticPreconfigured:
        for c in clients:
            if c.client_id in subset:
                c.containerized = True
    elif cfg.strategy == Strategy.VanillaRandom:
        for c in clients:
            c.containerized = True
    return state


def available_client_count(state: WorldState) -> int:
    return sum(1 for c in state.clients if c.containerized)


# ---------------------------------------------------------------------------
# round machinery
# ---------------------------------------------------------------------------


def orchestrator_monitor(
    state: WorldState, positions: list[tuple[int, float]] | None = None
) -> AreaRequestVector:
    """Flag areas whose mean client activity exceeds 1.25x the global mean."""
    if positions is None:
        positions = [c.position(state.clock) for c in state.clients]
    m = state.bundle.world.config.area_count
    movements = np.array([c.movements for c in state.clients])
    global_mean = float(movements.mean()) if len(movements) else 0.0
    flags = []
    for area in range(m):
        here = [mv for mv, (a, _) in zip(movements, positions) if a == area]
        area_mean = float(np.mean(here)) if here else 0.0
        flags.append(1 if area_mean > AREA_ACTIVITY_FACTOR * global_mean else 0)
    return AreaRequestVector(requested=flags)


def build_round_instance(
    state: WorldState,
    positions: list[tuple[int, float]],
    requests: AreaRequestVector,
    round_index: int,
) -> ProblemInstance:
    cfg = state.cfg
    n = len(state.clients)
    lo, hi = cfg.schedule_for_round(round_index)
    lo, hi = min(lo, n), min(hi, n)
    profiles = []
    utilizations = []
    for client, (area, remaining) in zip(state.clients, positions):
        profiles.append(
            ClientProfile(
                id=client.client_id,
                cpu_capacity=client.cpu_capacity,
                memory_capacity=client.memory_capacity,
                disk_capacity=client.disk_capacity,
                battery_level=client.battery_level,
                availability_secs=remaining,
                area_id=area,
                movements=client.movements,
                priority=client.priority,
                rounds_served=client.rounds_served,
            )
        )
        utilizations.append(
            UtilizationProfile(
                cpu=client.u_cpu,
                memory=client.u_memory,
                battery=client.u_battery,
                disk=client.u_disk,
            )
        )
    return ProblemInstance(
        clients=profiles,
        utilizations=utilizations,
        requests=requests,
        weights=cfg.objective_weights,
        thresholds=DeploymentThresholds(
            min_round_time_secs=cfg.round_time_T_secs,
            movement_threshold=state.movement_threshold,
            high_movement_fraction=cfg.high_movement_fraction,
            min_selected=lo,
            max_selected=hi,
        ),
        area_count=state.bundle.world.config.area_count,
        priority_levels=PRIORITY_LEVELS,
    )


def _derived_seed(parts: list[int]) -> int:
    return int(np.random.SeedSequence(parts).generate_state(1)[0])


def select_clients(
    state: WorldState,
    cfg: SimConfig,
    positions: list[tuple[int, float]] | None = None,
    requests: AreaRequestVector | None = None,
    round_index: int | None = None,
) -> tuple[SelectionVector | None, ObjectiveVector | None]:
    """Pick this round's clients; (None, None) when no feasible deployment exists."""
    if positions is None:
        positions = [c.position(state.clock) for c in state.clients]
    if requests is None:
        requests = orchestrator_monitor(state, positions)
    if round_index is None:
        round_index = state.round_index
    n = len(state.clients)

    if cfg.strategy == Strategy.OnDemandGA:
        instance = build_round_instance(state, positions, requests, round_index)
        ga_cfg = cfg.ga.model_copy(
            update={"seed": _derived_seed([cfg.seed, TAG_GA, round_index])}
        )
        try:
            _, recommendation = solve(instance, ga_cfg)
        except InfeasibleInstanceError:
            return None, None
        from .objectives import eval_objectives

        return recommendation, eval_objectives(instance, recommendation)

    rng = np.random.default_rng([cfg.seed, TAG_ROUND, round_index])
    genes = [0] * n
    if cfg.strategy == Strategy.VanillaRandom:
        k = ceil_eps(cfg.vanilla_fraction_C * n)
        for i in rng.choice(n, size=min(k, n), replace=False):
            genes[int(i)] = 1
    else:
        pool = sorted(state.static_subset)
        k = min(ceil_eps(cfg.vanilla_fraction_C * n), len(pool))
        for cid in rng.choice(pool, size=k, replace=False):
            genes[int(cid) - 1] = 1
    return SelectionVector(genes=genes), None


def simulate_dropouts(
    state: WorldState,
    selected_ids: list[int],
    cfg: SimConfig,
    rng: np.random.Generator,
    positions: list[tuple[int, float]] | None = None,
) -> list[int]:
    """Which deployed clients manage to report back this round."""
    if positions is None:
        positions = [c.position(state.clock) for c in state.clients]
    reporters = []
    for cid in sorted(selected_ids):
        client = state.clients[cid - 1]
        _, remaining = positions[cid - 1]
        invited_away = rng.random() < cfg.p_higher_priority_invite
        leaves_early = remaining < cfg.round_time_T_secs
        overloaded = not client.service_fits()
        if not (invited_away or leaves_early or overloaded):
            reporters.append(cid)
    return reporters


def local_train(
    params: ModelParams,
    dataset: ClientDataset,
    cfg: SimConfig,
    rng: np.random.Generator,
) -> tuple[ModelParams, int]:
    """Local epochs of mini-batch descent on the client's train split."""
    x = np.asarray(dataset.features, dtype=float)[dataset.train_indices]
    y = np.asarray(dataset.labels, dtype=int)[dataset.train_indices]
    if len(y) == 0:
        raise ValueError("client dataset has an empty train split")
    updated = sgd_train(
        params, x, y, cfg.local_epochs, cfg.learning_rate, cfg.batch_size, rng
    )
    return updated, len(y)


def update_priorities(state: WorldState, deployed_ids: set[int]) -> None:
    """Rank undeployed clients by local test accuracy of the global model and
    spread priorities 1..10 over the ranks; deployed clients only accrue
    service rounds."""
    undeployed = [c for c in state.clients if c.client_id not in deployed_ids]
    for c in state.clients:
        if c.client_id in deployed_ids:
            c.rounds_served += 1
    if not undeployed:
        return
    accs = {}
    for c in undeployed:
        x, y = state.bundle.test_arrays[c.user_id]
        accs[c.client_id] = accuracy(state.global_model, x, y)
    count = len(undeployed)
    for c in undeployed:
        rank = sum(1 for other in undeployed if accs[other.client_id] > accs[c.client_id])
        c.priority = max(1, PRIORITY_LEVELS - (rank * PRIORITY_LEVELS) // count)


def run_round(state: WorldState, cfg: SimConfig) -> RoundReport:
    round_index = state.round_index
    positions = [c.position(state.clock) for c in state.clients]
    available_before = available_client_count(state)
    requests = orchestrator_monitor(state, positions)
    state.requests = requests

    selection, objectives = select_clients(state, cfg, positions, requests, round_index)
    if selection is None:
        deployed_ids: list[int] = []
    else:
        deployed_ids = [
            state.clients[i].client_id
            for i, g in enumerate(selection.genes)
            if g == 1
        ]

    # pushing the container makes a volunteer available; areas with a
    # running orchestrator onboard whoever is currently there, deployment
    # requests onboard their whole area, and selected clients always join
    if cfg.strategy == Strategy.OnDemandGA:
        online = state.areas_with_orchestrator(round_index)
        for client, (area, _) in zip(state.clients, positions):
            if area in online or requests.requested[area]:
                client.containerized = True
        for cid in deployed_ids:
            state.clients[cid - 1].containerized = True

    drop_rng = np.random.default_rng([cfg.seed, TAG_ROUND, round_index, 1])
    reporters = simulate_dropouts(state, deployed_ids, cfg, drop_rng, positions)

    updates = []
    for cid in reporters:
        user_id = state.clients[cid - 1].user_id
        x, y = state.bundle.train_arrays[user_id]
        rng = np.random.default_rng([cfg.seed, TAG_TRAIN, round_index, cid])
        updated = sgd_train(
            state.global_model, x, y, cfg.local_epochs, cfg.learning_rate,
            cfg.batch_size, rng,
        )
        updates.append((updated, len(y)))

    required = max(1, ceil_eps(cfg.min_report_fraction * len(deployed_ids)))
    discarded = len(reporters) < required
    if not discarded:
        state.global_model = fedavg_aggregate(updates)
        x_test, y_test = state.bundle.pooled_test
        state.last_accuracy = accuracy(state.global_model, x_test, y_test)

    update_priorities(state, set(deployed_ids))

    data_volume = 0
    label_union: set[int] = set()
    for cid in deployed_ids:
        user_id = state.clients[cid - 1].user_id
        _, y = state.bundle.train_arrays[user_id]
        data_volume += len(y)
        label_union.update(int(v) for v in np.unique(y))

    report = RoundReport(
        round_index=round_index,
        strategy=cfg.strategy.value,
        selected_ids=deployed_ids,
        deployed_count=len(deployed_ids),
        reported_count=len(reporters),
        discarded=discarded,
        test_accuracy=state.last_accuracy,
        available_clients=available_before,
        data_volume=data_volume,
        distinct_labels=len(label_union),
        objective_vector=objectives,
    )
    state.clock += cfg.round_time_T_secs
    state.round_index += 1
    return report


def centralized_train(bundle: WorldBundle, cfg: SimConfig) -> tuple[ModelParams, float]:
    """Train the same architecture on the pooled data; the reference model."""
    world_seed = bundle.world.config.seed
    rng = np.random.default_rng([world_seed, TAG_CENTRALIZED])
    layer_sizes = [bundle.feature_dim, *cfg.hidden_sizes, bundle.world.config.place_count]
    params = init_params(layer_sizes, rng)
    x, y = bundle.pooled_train
    params = sgd_train(
        params, x, y, cfg.centralized_epochs, cfg.learning_rate, cfg.batch_size, rng
    )
    x_test, y_test = bundle.pooled_test
    return params, accuracy(params, x_test, y_test)


def resolve_target(bundle: WorldBundle, cfg: SimConfig) -> float:
    if cfg.target_accuracy is not None:
        return cfg.target_accuracy
    _, centralized_acc = centralized_train(bundle, cfg)
    return 0.9 * centralized_acc


def run_experiment(bundle: WorldBundle, cfg: SimConfig) -> list[RoundReport]:
    """Run rounds until the accuracy target is reached or rounds_max."""
    target = resolve_target(bundle, cfg) if cfg.stop_at_target else None
    state = build_world_state(bundle, cfg)
    reports = []
    for _ in range(cfg.rounds_max):
        report = run_round(state, cfg)
        reports.append(report)
        if target is not None and report.test_accuracy >= target:
            break
    return reports
