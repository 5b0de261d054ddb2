"""Synthetic mobility traces shaped like a next-place-prediction corpus.

Users move between clustered places grouped into areas. Each user has a
home area and a small ring of favorite places visited through a
concentrated Markov transition rule, which makes per-user label
distributions strongly non-uniform (the non-IID shape the learning
experiments rely on). Trace generation is deterministic per user given
the world seed, so parallel generation cannot change the output.
"""

from __future__ import annotations

import csv
import datetime
import json
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

EPOCH = datetime.date(2024, 1, 1)

# rng stream tags, combined with the world seed and an entity id
TAG_WORLD = 1
TAG_TRACE = 2
TAG_SPLIT = 3

RING_NEXT_P = 0.75
FAVORITE_P = 0.15
OCCASIONAL_P = 0.10
WEEKEND_AWAY_BIAS = 1.5
DURATION_MEDIAN_SECS = 1800.0
DURATION_SIGMA = 0.75
TEST_FRACTION = 0.2


class WorldConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    user_count: int = Field(default=100, ge=1)
    place_count: int = Field(default=20, ge=1)
    area_count: int = Field(default=6, ge=1)
    records_min: int = Field(default=200, ge=2)
    records_max: int = Field(default=1500, ge=2)
    trace_days: int = Field(default=90, ge=1)
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check(self):
        if self.place_count < self.area_count:
            raise ValueError("place_count must be >= area_count")
        if self.records_min > self.records_max:
            raise ValueError("records_min must be <= records_max")
        return self


class UserHabits(BaseModel):
    model_config = ConfigDict(frozen=True)

    user_id: int
    home_area: int
    favorites: list[int]
    occasionals: list[int]


class World(BaseModel):
    model_config = ConfigDict(frozen=True)

    config: WorldConfig
    place_area: list[int]
    ring_next: list[int]
    users: list[UserHabits]


class VisitRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    user_id: int
    place_id: int
    area_id: int
    day: int
    month: int
    year: int
    weekend: int
    duration_secs: float
    visit_rate: float
    next_place_id: int


class ClientDataset(BaseModel):
    user_id: int
    features: list[list[float]]
    labels: list[int]
    train_indices: list[int]
    test_indices: list[int]


class UserMobilitySummary(BaseModel):
    """Per-user aggregates feeding the simulator's client profiles."""

    user_id: int
    record_count: int
    movements_per_day: float
    mean_stay_secs_by_area: dict[int, float]


def _user_rng(seed: int, tag: int, user_id: int) -> np.random.Generator:
    return np.random.default_rng([seed, tag, user_id])


def generate_world(cfg: WorldConfig) -> World:
    """Assign places to areas and sample each user's habits.

    A user frequents every place of their home area plus a couple of
    favorites elsewhere, with a small set of rarely-visited occasional
    places. Favorites being area-bound is what couples label diversity to
    area diversity in the downstream experiments. Each area also carries a
    canonical circulation ring over its places shared by its residents,
    which keeps the next-place mapping consistent across users.
    """
    place_area = [p % cfg.area_count for p in range(cfg.place_count)]
    ring_rng = np.random.default_rng([cfg.seed, TAG_WORLD, 0])
    ring_next = [0] * cfg.place_count
    for area in range(cfg.area_count):
        members = [p for p in range(cfg.place_count) if place_area[p] == area]
        ring = [int(p) for p in ring_rng.permutation(members)]
        for i, p in enumerate(ring):
            ring_next[p] = ring[(i + 1) % len(ring)]
    # population skews toward low-index areas, so some areas stay sparse
    area_weights = np.arange(cfg.area_count, 0, -1, dtype=float)
    area_weights /= area_weights.sum()
    users = []
    for user_id in range(1, cfg.user_count + 1):
        rng = _user_rng(cfg.seed, TAG_WORLD, user_id)
        home_area = int(rng.choice(cfg.area_count, p=area_weights))
        home_places = [p for p in range(cfg.place_count) if place_area[p] == home_area]
        away_places = [p for p in range(cfg.place_count) if place_area[p] != home_area]
        favorites = [int(p) for p in rng.permutation(home_places)]
        extra = int(rng.integers(0, 3))
        extra = min(extra, max(0, 6 - len(favorites)), len(away_places))
        away = list(rng.permutation(away_places))
        favorites += [int(p) for p in away[:extra]]
        occ_count = min(int(rng.integers(2, 4)), len(away) - extra)
        occasionals = [int(p) for p in away[extra : extra + max(occ_count, 0)]]
        users.append(
            UserHabits(
                user_id=user_id,
                home_area=home_area,
                favorites=favorites,
                occasionals=occasionals,
            )
        )
    return World(
        config=cfg, place_area=place_area, ring_next=ring_next, users=users
    )


def _transition_probs(
    world: World, user: UserHabits, current_place: int, weekend: bool
) -> np.ndarray:
    """Next-place distribution for one user at one place.

    Inside the home area the user follows the area's circulation ring;
    elsewhere they head back to their first favorite. The rest of the mass
    spreads over the user's favorites and occasional places.
    """
    p_count = world.config.place_count
    favorites = user.favorites
    probs = np.zeros(p_count)
    if world.place_area[current_place] == user.home_area:
        successor = world.ring_next[current_place]
    else:
        successor = favorites[0]
    probs[successor] += RING_NEXT_P
    if len(favorites) > 1:
        others = [f for f in favorites if f != successor]
        for f in others:
            probs[f] += FAVORITE_P / len(others)
    else:
        probs[successor] += FAVORITE_P
    if user.occasionals:
        for p in user.occasionals:
            probs[p] += OCCASIONAL_P / len(user.occasionals)
    else:
        probs[successor] += OCCASIONAL_P
    if weekend:
        away = np.array(
            [WEEKEND_AWAY_BIAS if world.place_area[p] != user.home_area else 1.0
             for p in range(p_count)]
        )
        probs = probs * away
    return probs / probs.sum()


def _calendar(day_index: int) -> tuple[int, int, int, int]:
    date = EPOCH + datetime.timedelta(days=day_index)
    weekend = 1 if date.weekday() >= 5 else 0
    return date.day, date.month, date.year, weekend


def _area_sparsity(world: World) -> dict[int, float]:
    """0 for the most populated area, 1 for the least."""
    m = world.config.area_count
    counts = {a: 0 for a in range(m)}
    for u in world.users:
        counts[u.home_area] += 1
    order = sorted(range(m), key=lambda a: (-counts[a], a))
    if m == 1:
        return {order[0]: 0.0}
    return {a: pos / (m - 1) for pos, a in enumerate(order)}


def generate_traces(world: World) -> list[VisitRecord]:
    """Sample every user's visit sequence; one record per visit with its
    next-place label (the final simulated visit only serves as a label).

    Users homed in sparse areas skew toward high record counts: activity
    runs inversely to population density.
    """
    cfg = world.config
    sparsity = _area_sparsity(world)
    records: list[VisitRecord] = []
    for user in world.users:
        rng = _user_rng(cfg.seed, TAG_TRACE, user.user_id)
        span = cfg.records_max - cfg.records_min
        draw = rng.random() ** (1.0 / (1.0 + 3.0 * sparsity[user.home_area]))
        n_records = cfg.records_min + int(round(span * draw))
        times = np.sort(rng.random(n_records + 1) * cfg.trace_days)
        place = int(rng.choice(user.favorites))
        visits: list[tuple[int, int, float]] = []  # (place, day_index, duration)
        for i in range(n_records + 1):
            day_index = int(times[i])
            duration = float(
                rng.lognormal(mean=np.log(DURATION_MEDIAN_SECS), sigma=DURATION_SIGMA)
            )
            visits.append((place, day_index, duration))
            _, _, _, weekend = _calendar(day_index)
            probs = _transition_probs(world, user, place, bool(weekend))
            place = int(rng.choice(cfg.place_count, p=probs))

        months = cfg.trace_days / 30.0
        counts = np.bincount(
            [v[0] for v in visits[:-1]], minlength=cfg.place_count
        )
        for i in range(n_records):
            place_i, day_index, duration = visits[i]
            day, month, year, weekend = _calendar(day_index)
            records.append(
                VisitRecord(
                    user_id=user.user_id,
                    place_id=place_i,
                    area_id=world.place_area[place_i],
                    day=day,
                    month=month,
                    year=year,
                    weekend=weekend,
                    duration_secs=duration,
                    visit_rate=float(counts[place_i]) / months,
                    next_place_id=visits[i + 1][0],
                )
            )
    return records


def _minmax(values: np.ndarray) -> np.ndarray:
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def _stratified_split(
    labels: list[int], rng: np.random.Generator
) -> tuple[list[int], list[int]]:
    by_class: dict[int, list[int]] = {}
    for i, y in enumerate(labels):
        by_class.setdefault(y, []).append(i)
    train: list[int] = []
    test: list[int] = []
    for y in sorted(by_class):
        idx = np.array(by_class[y])
        rng.shuffle(idx)
        k = int(round(TEST_FRACTION * len(idx)))
        test.extend(int(i) for i in idx[:k])
        train.extend(int(i) for i in idx[k:])
    if not test and train:
        test.append(train.pop())
    if not train and test:
        train.append(test.pop())
    return sorted(train), sorted(test)


def build_datasets(
    world: World, traces: list[VisitRecord]
) -> tuple[dict[int, ClientDataset], dict[int, UserMobilitySummary]]:
    """Turn traces into per-user feature/label datasets and mobility summaries.

    Feature layout: one-hot place, one-hot area, weekend flag, per-user
    min-max normalized duration, per-user min-max normalized visit rate.
    """
    cfg = world.config
    by_user: dict[int, list[VisitRecord]] = {}
    for rec in traces:
        by_user.setdefault(rec.user_id, []).append(rec)

    datasets: dict[int, ClientDataset] = {}
    summaries: dict[int, UserMobilitySummary] = {}
    for user_id in sorted(by_user):
        recs = by_user[user_id]
        durations = np.array([r.duration_secs for r in recs])
        rates = np.array([r.visit_rate for r in recs])
        dur_n = _minmax(durations)
        rate_n = _minmax(rates)
        features = []
        labels = []
        for i, r in enumerate(recs):
            vec = [0.0] * (cfg.place_count + cfg.area_count + 3)
            vec[r.place_id] = 1.0
            vec[cfg.place_count + r.area_id] = 1.0
            vec[cfg.place_count + cfg.area_count] = float(r.weekend)
            vec[cfg.place_count + cfg.area_count + 1] = float(dur_n[i])
            vec[cfg.place_count + cfg.area_count + 2] = float(rate_n[i])
            features.append(vec)
            labels.append(r.next_place_id)
        rng = _user_rng(cfg.seed, TAG_SPLIT, user_id)
        train_idx, test_idx = _stratified_split(labels, rng)
        datasets[user_id] = ClientDataset(
            user_id=user_id,
            features=features,
            labels=labels,
            train_indices=train_idx,
            test_indices=test_idx,
        )

        stays: dict[int, list[float]] = {}
        for r in recs:
            stays.setdefault(r.area_id, []).append(r.duration_secs)
        summaries[user_id] = UserMobilitySummary(
            user_id=user_id,
            record_count=len(recs),
            movements_per_day=len(recs) / cfg.trace_days,
            mean_stay_secs_by_area={
                a: float(np.mean(v)) for a, v in sorted(stays.items())
            },
        )
    return datasets, summaries


# ---------------------------------------------------------------------------
# on-disk world bundle
# ---------------------------------------------------------------------------

TRACE_COLUMNS = [
    "user_id",
    "place_id",
    "area_id",
    "day",
    "month",
    "year",
    "weekend",
    "duration_secs",
    "visit_rate",
    "next_place_id",
]


def write_world_bundle(
    out_dir: str | Path,
    world: World,
    traces: list[VisitRecord],
    datasets: dict[int, ClientDataset],
) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []

    world_path = out / "world.json"
    with open(world_path, "w", encoding="utf-8") as fh:
        json.dump(world.model_dump(), fh, indent=2)
        fh.write("\n")
    paths.append(world_path)

    traces_path = out / "traces.csv"
    with open(traces_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for r in traces:
            writer.writerow(
                [
                    r.user_id,
                    r.place_id,
                    r.area_id,
                    r.day,
                    r.month,
                    r.year,
                    r.weekend,
                    repr(r.duration_secs),
                    repr(r.visit_rate),
                    r.next_place_id,
                ]
            )
    paths.append(traces_path)

    ds_dir = out / "datasets"
    ds_dir.mkdir(exist_ok=True)
    for user_id in sorted(datasets):
        path = ds_dir / f"user_{user_id:04d}.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(datasets[user_id].model_dump(), fh)
            fh.write("\n")
        paths.append(path)
    return paths


def load_world(path: str | Path) -> World:
    with open(Path(path) / "world.json", "r", encoding="utf-8") as fh:
        return World.model_validate(json.load(fh))


def load_traces(path: str | Path) -> list[VisitRecord]:
    records = []
    with open(Path(path) / "traces.csv", "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            records.append(
                VisitRecord(
                    user_id=int(row["user_id"]),
                    place_id=int(row["place_id"]),
                    area_id=int(row["area_id"]),
                    day=int(row["day"]),
                    month=int(row["month"]),
                    year=int(row["year"]),
                    weekend=int(row["weekend"]),
                    duration_secs=float(row["duration_secs"]),
                    visit_rate=float(row["visit_rate"]),
                    next_place_id=int(row["next_place_id"]),
                )
            )
    return records


def load_datasets(path: str | Path) -> dict[int, ClientDataset]:
    datasets = {}
    for file in sorted((Path(path) / "datasets").glob("user_*.json")):
        with open(file, "r", encoding="utf-8") as fh:
            ds = ClientDataset.model_validate(json.load(fh))
        datasets[ds.user_id] = ds
    return datasets
