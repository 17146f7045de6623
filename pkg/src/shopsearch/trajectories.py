"""Trajectory records, return-to-go transforms, dataset files, context windows.

Datasets are line-delimited JSON: one header object, then one record object
per line. Records store raw integer features together with their
normalization constants, so files are lossless and any consumer can rebuild
the normalized view (makespans / lower_bound, step / episode_len).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

SCHEMA_VERSION = 1
FEATURE_LENGTH = 11

_OPERATOR_COUNT = 5  # one-hot width of the last-operator feature


class DatasetFormatError(ValueError):
    """Malformed dataset file; `line` is the 1-based offending line number."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class FeatureVector:
    """Explicit search-state features plus their normalization constants.

    The flat form is 11 numbers: current makespan, best makespan, last
    accept bit, last-operator one-hot (5), step, steps without improvement,
    perturbation count. Values are stored raw; normalized() is the
    scale-free view intended as model input.
    """

    current_makespan: int
    best_makespan: int
    last_accept: int
    last_operator: int | None
    step: int
    no_improve_steps: int
    perturb_count: int
    lower_bound: int
    episode_len: int

    def __post_init__(self):
        if self.last_operator is not None and not 0 <= self.last_operator < _OPERATOR_COUNT:
            raise ValueError("last_operator index out of range")
        if self.last_accept not in (0, 1):
            raise ValueError("last_accept must be 0 or 1")
        if self.lower_bound < 1:
            raise ValueError("lower_bound must be positive")

    def as_list(self) -> list[float]:
        onehot = [0.0] * _OPERATOR_COUNT
        if self.last_operator is not None:
            onehot[self.last_operator] = 1.0
        return [
            float(self.current_makespan),
            float(self.best_makespan),
            float(self.last_accept),
            *onehot,
            float(self.step),
            float(self.no_improve_steps),
            float(self.perturb_count),
        ]

    def normalized(self) -> list[float]:
        v = self.as_list()
        v[0] /= self.lower_bound
        v[1] /= self.lower_bound
        v[8] /= max(1, self.episode_len)
        return v

    def to_json(self) -> dict:
        return {
            "current_makespan": self.current_makespan,
            "best_makespan": self.best_makespan,
            "last_accept": self.last_accept,
            "last_operator": self.last_operator,
            "step": self.step,
            "no_improve_steps": self.no_improve_steps,
            "perturb_count": self.perturb_count,
            "lower_bound": self.lower_bound,
            "episode_len": self.episode_len,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FeatureVector":
        return cls(**{k: obj[k] for k in (
            "current_makespan", "best_makespan", "last_accept", "last_operator",
            "step", "no_improve_steps", "perturb_count", "lower_bound", "episode_len",
        )})


@dataclass(frozen=True)
class TrajectoryRecord:
    """One (state, action, reward) sample; rtg is absent until finalize()."""

    instance_id: str
    step: int
    features: FeatureVector
    action: int
    reward: int
    rtg: int | None = None

    def __post_init__(self):
        if self.step < 0:
            raise ValueError("step must be non-negative")
        if self.reward < 0:
            raise ValueError("reward must be non-negative")

    def to_json(self) -> dict:
        obj = {
            "instance_id": self.instance_id,
            "step": self.step,
            "features": self.features.to_json(),
            "action": self.action,
            "reward": self.reward,
        }
        if self.rtg is not None:
            obj["rtg"] = self.rtg
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "TrajectoryRecord":
        return cls(
            instance_id=obj["instance_id"],
            step=obj["step"],
            features=FeatureVector.from_json(obj["features"]),
            action=obj["action"],
            reward=obj["reward"],
            rtg=obj.get("rtg"),
        )


def returns_to_go(rewards: Sequence[int]) -> list[int]:
    """Suffix sums: out[t] = rewards[t] + rewards[t+1] + ... + rewards[T]."""
    out = [0] * len(rewards)
    acc = 0
    for t in range(len(rewards) - 1, -1, -1):
        acc += rewards[t]
        out[t] = acc
    return out


def _grouped(records: Sequence[TrajectoryRecord]) -> list[list[TrajectoryRecord]]:
    """Split into consecutive same-id runs; reject interleaving and bad steps."""
    groups: list[list[TrajectoryRecord]] = []
    finished: set[str] = set()
    current_id: str | None = None
    for rec in records:
        if rec.instance_id != current_id:
            if rec.instance_id in finished:
                raise ValueError(f"interleaved trajectory {rec.instance_id!r}")
            if current_id is not None:
                finished.add(current_id)
            current_id = rec.instance_id
            groups.append([])
        group = groups[-1]
        if group and rec.step <= group[-1].step:
            raise ValueError(
                f"duplicate or non-increasing step {rec.step} in trajectory {rec.instance_id!r}"
            )
        group.append(rec)
    return groups


def finalize(records: Sequence[TrajectoryRecord]) -> list[TrajectoryRecord]:
    """Populate rtg with per-trajectory reward suffix sums; count preserved."""
    out: list[TrajectoryRecord] = []
    for group in _grouped(records):
        rtgs = returns_to_go([r.reward for r in group])
        out.extend(replace(r, rtg=g) for r, g in zip(group, rtgs))
    return out


@dataclass(frozen=True)
class ContextWindow:
    """The last K (rtg, features, action) slots plus the current (rtg, features).

    All four rows are left-padded with zeros to fixed length; mask is True on
    real slots, which are contiguous at the end. Feature rows are raw flat
    vectors (see FeatureVector.as_list).
    """

    rtg: tuple[int, ...]
    features: tuple[tuple[float, ...], ...]
    actions: tuple[int, ...]
    mask: tuple[bool, ...]

    def __post_init__(self):
        k1 = len(self.rtg)
        if k1 < 2 or len(self.features) != k1 or len(self.mask) != k1:
            raise ValueError("window rows must share length K+1 >= 2")
        if len(self.actions) != k1 - 1:
            raise ValueError("actions row must have length K")
        if any(len(f) != FEATURE_LENGTH for f in self.features):
            raise ValueError(f"feature rows must have length {FEATURE_LENGTH}")

    @property
    def context_length(self) -> int:
        return len(self.actions)

    @property
    def real_slots(self) -> int:
        return sum(self.mask)

    def to_json(self) -> dict:
        return {
            "rtg": list(self.rtg),
            "features": [list(f) for f in self.features],
            "actions": list(self.actions),
            "mask": [1 if b else 0 for b in self.mask],
        }

    @classmethod
    def build(
        cls,
        past: Sequence[tuple[int, FeatureVector, int]],
        current: tuple[int, FeatureVector],
        k: int,
    ) -> "ContextWindow":
        """Assemble a window from the most recent <= k past triples."""
        if k < 1:
            raise ValueError("context length must be >= 1")
        real = list(past[-k:]) if k else []
        pad = k - len(real)
        zero_feat = (0.0,) * FEATURE_LENGTH
        rtg = [0] * pad + [r for r, _, _ in real] + [current[0]]
        feats = [zero_feat] * pad + [tuple(f.as_list()) for _, f, _ in real]
        feats.append(tuple(current[1].as_list()))
        actions = [0] * pad + [a for _, _, a in real]
        mask = [False] * pad + [True] * (len(real) + 1)
        return cls(tuple(rtg), tuple(feats), tuple(actions), tuple(mask))


def context_window(trajectory: Sequence[TrajectoryRecord], t: int, k: int) -> ContextWindow:
    """Window ending at step index t of a finalized trajectory."""
    if not 0 <= t < len(trajectory):
        raise ValueError("t must index into the trajectory")
    for rec in trajectory[max(0, t - k): t + 1]:
        if rec.rtg is None:
            raise ValueError("context windows need finalized records (rtg present)")
    past = [(r.rtg, r.features, r.action) for r in trajectory[max(0, t - k): t]]
    cur = trajectory[t]
    return ContextWindow.build(past, (cur.rtg, cur.features), k)


_NORMALIZATION = {"makespan": "lower_bound", "step": "episode_len"}


@dataclass(frozen=True)
class DatasetMeta:
    kind: str
    num_records: int
    sizes: tuple[tuple[int, int], ...] | None = None
    episode_len: int | None = None
    action_set: str | None = None
    schema_version: int = SCHEMA_VERSION
    feature_length: int = FEATURE_LENGTH

    def to_json(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "kind": self.kind,
            "sizes": None if self.sizes is None else [list(s) for s in self.sizes],
            "episode_len": self.episode_len,
            "action_set": self.action_set,
            "feature_length": self.feature_length,
            "normalization": dict(_NORMALIZATION),
            "num_records": self.num_records,
        }


def write_dataset(
    records: Sequence[TrajectoryRecord],
    path: str | Path,
    *,
    sizes: Iterable[tuple[int, int]] | None = None,
    action_set: str | None = None,
) -> DatasetMeta:
    """Write header + one record per line; kind derived from rtg presence."""
    records = list(records)
    have_rtg = [r.rtg is not None for r in records]
    if any(have_rtg) and not all(have_rtg):
        raise ValueError("records mix raw and finalized rtg fields")
    episode_len = records[0].features.episode_len if records else None
    meta = DatasetMeta(
        kind="final" if records and have_rtg[0] else "raw",
        num_records=len(records),
        sizes=None if sizes is None else tuple(sorted(set(map(tuple, sizes)))),
        episode_len=episode_len,
        action_set=action_set,
    )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(meta.to_json(), separators=(",", ":")) + "\n")
        for rec in records:
            fh.write(json.dumps(rec.to_json(), separators=(",", ":")) + "\n")
    return meta


def read_dataset(path: str | Path) -> tuple[DatasetMeta, list[TrajectoryRecord]]:
    """Inverse of write_dataset; malformed lines name their line number."""
    records: list[TrajectoryRecord] = []
    meta: DatasetMeta | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"invalid JSON: {exc.msg}", lineno) from exc
            if lineno == 1:
                try:
                    if obj["schema_version"] != SCHEMA_VERSION:
                        raise DatasetFormatError(
                            f"unsupported schema_version {obj['schema_version']}", lineno
                        )
                    meta = DatasetMeta(
                        kind=obj["kind"],
                        num_records=obj["num_records"],
                        sizes=None if obj.get("sizes") is None
                        else tuple(tuple(s) for s in obj["sizes"]),
                        episode_len=obj.get("episode_len"),
                        action_set=obj.get("action_set"),
                    )
                except KeyError as exc:
                    raise DatasetFormatError(f"header missing field {exc}", lineno) from exc
                continue
            try:
                records.append(TrajectoryRecord.from_json(obj))
            except (KeyError, TypeError, ValueError) as exc:
                raise DatasetFormatError(f"bad record: {exc}", lineno) from exc
    if meta is None:
        raise DatasetFormatError("empty dataset file: missing header", 1)
    if meta.num_records != len(records):
        raise DatasetFormatError(
            f"header announces {meta.num_records} records, file has {len(records)}"
        )
    return meta, records
