"""Telemetry ingestion, labeling and fold construction for AVP-schema data.

A telemetry row carries the scalar features logged by the vehicle (timestamp,
arm flag, desired/longitudinal/lateral/measured speed, obstacle distance,
steering, yaw angle, yaw rate, throttle). Files are comma separated with a
header row; which header names hold which feature is set by a column map.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, replace
from enum import Enum
from os import PathLike
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

PathType = Union[str, PathLike]


class Label(str, Enum):
    NORMAL = "normal"
    ABNORMAL = "abnormal"
    UNLABELED = "unlabeled"


# Feature order of the on-disk schema.
FIELDS = (
    "timestamp",
    "arm",
    "desired_speed",
    "longitudinal_speed",
    "lateral_speed",
    "measured_speed",
    "obstacle_distance",
    "steering_angle",
    "yaw_angle",
    "yaw_rate",
    "throttle",
)
NUMERIC_FIELDS = FIELDS[2:]
DEFAULT_COLUMN_MAP = {name: name for name in FIELDS}
LABEL_COLUMN = "label"


class DataError(ValueError):
    """Raised for malformed telemetry or logs."""


class MissingColumnError(DataError):
    def __init__(self, feature: str, column: str):
        super().__init__(f"feature {feature!r} maps to column {column!r}, which is not in the header")
        self.feature = feature
        self.column = column


class ParseError(DataError):
    def __init__(self, row: int, column: str, value: str, reason: str = "not a finite number"):
        super().__init__(f"row {row}, column {column!r}: {value!r} is {reason}")
        self.row = row
        self.column = column


class DataWarning(UserWarning):
    pass


@dataclass(frozen=True)
class TelemetryFrame:
    timestamp: float
    arm: bool
    desired_speed: float
    longitudinal_speed: float
    lateral_speed: float
    measured_speed: float
    obstacle_distance: float
    steering_angle: float
    yaw_angle: float
    yaw_rate: float
    throttle: float
    label: Label = Label.UNLABELED

    def __post_init__(self):
        if not (math.isfinite(self.timestamp) and self.timestamp >= 0):
            raise DataError(f"timestamp must be finite and non-negative, got {self.timestamp!r}")
        if not 0.0 <= self.throttle <= 100.0:
            raise DataError(f"throttle must lie in [0, 100], got {self.throttle!r}")


@dataclass(frozen=True)
class LaserLog:
    timestamps: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=float)
        s = np.asarray(self.states)
        if t.shape != s.shape or t.ndim != 1:
            raise DataError("laser log timestamps and states must be 1-D and equal length")
        if not np.all(np.isin(s, (0, 1))):
            raise DataError("laser_state must be 0 or 1")
        if np.any(np.diff(t) < 0):
            raise DataError("laser log timestamps must be non-decreasing")
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "states", s.astype(np.int8))

    def __len__(self):
        return len(self.timestamps)


@dataclass(frozen=True)
class DatasetSummary:
    row_counts: dict
    class_counts: dict
    class_proportions: dict

    @property
    def total(self) -> int:
        return sum(self.row_counts.values())


def _parse_label(value: str, row: int) -> Label:
    value = value.strip().lower()
    if value in ("", Label.UNLABELED.value):
        return Label.UNLABELED
    if value in (Label.NORMAL.value, "0"):
        return Label.NORMAL
    if value in (Label.ABNORMAL.value, "attack", "1"):
        return Label.ABNORMAL
    raise ParseError(row, LABEL_COLUMN, value, "not a known label")


def _parse_float(value: str, row: int, column: str) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ParseError(row, column, value) from None
    if not math.isfinite(out):
        raise ParseError(row, column, value)
    return out


def _parse_arm(value: str, row: int, column: str) -> bool:
    v = value.strip().lower()
    if v in ("true", "armed", "arm"):
        return True
    if v in ("false", "disarmed", "disarm"):
        return False
    return _parse_float(value, row, column) != 0.0


def _resolve_columns(header: Sequence[str], column_map: Mapping[str, str]) -> dict:
    index = {name.strip(): i for i, name in enumerate(header)}
    resolved = {}
    for feature in FIELDS:
        column = column_map.get(feature)
        if column is None:
            raise MissingColumnError(feature, "<unmapped>")
        if column not in index:
            raise MissingColumnError(feature, column)
        resolved[feature] = index[column]
    return resolved


def load_frames(path: PathType, column_map: Optional[Mapping[str, str]] = None) -> list[TelemetryFrame]:
    """Parse a telemetry file into frames sorted by timestamp.

    Row numbers in errors count data rows from 1 (the header is row 0).
    Repeated timestamps keep their first occurrence and emit a
    :class:`DataWarning`. A trailing ``label`` column is read when present.
    """
    cmap = dict(DEFAULT_COLUMN_MAP)
    if column_map:
        cmap.update(column_map)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row expected") from None
        cols = _resolve_columns(header, cmap)
        header = [h.strip() for h in header]
        label_idx = header.index(LABEL_COLUMN) if LABEL_COLUMN in header else None
        frames = []
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(header):
                raise DataError(f"row {row_no}: expected {len(header)} fields, found {len(row)}")
            values = {}
            for feature, i in cols.items():
                column = header[i]
                if feature == "arm":
                    values[feature] = _parse_arm(row[i], row_no, column)
                else:
                    values[feature] = _parse_float(row[i], row_no, column)
            if label_idx is not None:
                values["label"] = _parse_label(row[label_idx], row_no)
            try:
                frames.append(TelemetryFrame(**values))
            except DataError as exc:
                raise DataError(f"row {row_no}: {exc}") from None
    frames.sort(key=lambda f: f.timestamp)
    return _drop_duplicate_timestamps(frames, source=str(path))


def _drop_duplicate_timestamps(frames: list[TelemetryFrame], source: str = "") -> list[TelemetryFrame]:
    kept = []
    dropped = 0
    last = None
    for frame in frames:
        if last is not None and frame.timestamp == last:
            dropped += 1
            continue
        kept.append(frame)
        last = frame.timestamp
    if dropped:
        warnings.warn(f"{source}: dropped {dropped} rows with duplicate timestamps", DataWarning, stacklevel=3)
    return kept


def write_frames(
    frames: Iterable[TelemetryFrame],
    path: PathType,
    column_map: Optional[Mapping[str, str]] = None,
    include_label: bool = True,
) -> None:
    """Write frames in the canonical format (floats via ``repr`` so reloads are bit-exact)."""
    cmap = dict(DEFAULT_COLUMN_MAP)
    if column_map:
        cmap.update(column_map)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = [cmap[f] for f in FIELDS]
        if include_label:
            header.append(LABEL_COLUMN)
        writer.writerow(header)
        for frame in frames:
            row = [repr(float(frame.timestamp)), "1" if frame.arm else "0"]
            row.extend(repr(float(getattr(frame, f))) for f in NUMERIC_FIELDS)
            if include_label:
                row.append(Label(frame.label).value)
            writer.writerow(row)


def frames_to_columns(frames: Sequence[TelemetryFrame]) -> dict[str, np.ndarray]:
    """Columnar view of frames: one float array per field plus ``label`` as int (1 abnormal, 0 normal, -1 unlabeled)."""
    n = len(frames)
    out = {name: np.empty(n, dtype=float) for name in FIELDS}
    labels = np.empty(n, dtype=np.int8)
    code = {Label.NORMAL: 0, Label.ABNORMAL: 1, Label.UNLABELED: -1}
    for i, frame in enumerate(frames):
        for name in FIELDS:
            out[name][i] = getattr(frame, name)
        labels[i] = code[frame.label]
    out["label"] = labels
    return out


def columns_to_frames(columns: Mapping[str, np.ndarray]) -> list[TelemetryFrame]:
    n = len(columns["timestamp"])
    labels = columns.get("label")
    decode = {0: Label.NORMAL, 1: Label.ABNORMAL, -1: Label.UNLABELED}
    frames = []
    for i in range(n):
        kwargs = {name: float(columns[name][i]) for name in FIELDS if name != "arm"}
        kwargs["arm"] = bool(columns["arm"][i])
        if labels is not None:
            kwargs["label"] = decode[int(labels[i])]
        frames.append(TelemetryFrame(**kwargs))
    return frames


def label_by_subset(frames: Sequence[TelemetryFrame], subset_kind: str) -> list[TelemetryFrame]:
    """Label every frame of a subset: ``normal`` subsets are normal, ``attack`` subsets abnormal."""
    kinds = {"normal": Label.NORMAL, "attack": Label.ABNORMAL, "abnormal": Label.ABNORMAL}
    try:
        label = kinds[subset_kind]
    except KeyError:
        raise ValueError(f"subset_kind must be 'normal' or 'attack', got {subset_kind!r}") from None
    return [replace(f, label=label) for f in frames]


def summarize(subsets: Mapping[str, Sequence[TelemetryFrame]]) -> DatasetSummary:
    rows = {name: len(frames) for name, frames in subsets.items()}
    counts = {Label.NORMAL.value: 0, Label.ABNORMAL.value: 0, Label.UNLABELED.value: 0}
    for frames in subsets.values():
        for frame in frames:
            counts[Label(frame.label).value] += 1
    counts = {k: v for k, v in counts.items() if v or k != Label.UNLABELED.value}
    total = sum(counts.values())
    props = {k: (v / total if total else 0.0) for k, v in counts.items()}
    return DatasetSummary(rows, counts, props)


def load_laser_log(path: PathType) -> LaserLog:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        try:
            ti, si = header.index("timestamp"), header.index("laser_state")
        except ValueError:
            raise DataError(f"{path}: laser log needs 'timestamp' and 'laser_state' columns") from None
        t, s = [], []
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            t.append(_parse_float(row[ti], row_no, "timestamp"))
            state = _parse_float(row[si], row_no, "laser_state")
            if state not in (0.0, 1.0):
                raise ParseError(row_no, "laser_state", row[si], "not 0 or 1")
            s.append(int(state))
    order = np.argsort(np.asarray(t), kind="stable")
    return LaserLog(np.asarray(t, dtype=float)[order], np.asarray(s, dtype=np.int8)[order])


def write_laser_log(log: LaserLog, path: PathType) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp", "laser_state"])
        for t, s in zip(log.timestamps, log.states):
            writer.writerow([repr(float(t)), int(s)])


def default_join_tolerance(frames: Sequence[TelemetryFrame]) -> float:
    t = np.array([f.timestamp for f in frames])
    if len(t) < 2:
        return 0.0
    return 0.5 * float(np.median(np.diff(t)))


def join_laser_log(
    frames: Sequence[TelemetryFrame],
    log: LaserLog,
    tolerance: Optional[float] = None,
) -> list[TelemetryFrame]:
    """Label frames from the attacker's laser log by nearest-timestamp matching.

    A frame whose nearest log entry lies within ``tolerance`` seconds takes
    that entry's state (1 -> abnormal, 0 -> normal); unmatched frames keep
    their label. Equidistant entries resolve to the earlier one. Default
    tolerance is half the median frame interval.
    """
    if tolerance is None:
        tolerance = default_join_tolerance(frames)
    if not frames:
        return []
    t = np.array([f.timestamp for f in frames])
    if len(log) == 0:
        matched = np.zeros(len(t), dtype=bool)
        nearest = np.zeros(len(t), dtype=int)
    else:
        lt = log.timestamps
        right = np.clip(np.searchsorted(lt, t, side="left"), 0, len(lt) - 1)
        left = np.clip(right - 1, 0, len(lt) - 1)
        d_left = np.abs(t - lt[left])
        d_right = np.abs(lt[right] - t)
        nearest = np.where(d_left <= d_right, left, right)
        gap = np.minimum(d_left, d_right)
        # tiny slack so float spacing (e.g. 0.1*k) does not miss exact-tolerance matches
        matched = gap <= tolerance * (1 + 1e-9) + 1e-12
    unmatched = int((~matched).sum())
    if unmatched > 0.01 * len(t):
        warnings.warn(
            f"{unmatched} of {len(t)} frames have no laser-log entry within {tolerance:g} s",
            DataWarning,
            stacklevel=2,
        )
    out = []
    for i, frame in enumerate(frames):
        if matched[i]:
            label = Label.ABNORMAL if log.states[nearest[i]] == 1 else Label.NORMAL
            out.append(replace(frame, label=label))
        else:
            out.append(frame)
    return out


def _labels_of(data) -> np.ndarray:
    if len(data) and isinstance(data[0], TelemetryFrame):
        code = {Label.NORMAL: 0, Label.ABNORMAL: 1, Label.UNLABELED: -1}
        return np.array([code[f.label] for f in data])
    return np.asarray(data)


def stratified_kfold(data, k: int, seed: int = 0) -> list[np.ndarray]:
    """Split sample indices into ``k`` disjoint, class-stratified folds.

    ``data`` is a sequence of labeled frames or a label vector. Each class is
    shuffled with ``seed`` and dealt into near-equal chunks; leftover samples
    of successive classes go to successive folds so fold sizes differ by at
    most one. Returns the sorted test indices of each fold.
    """
    labels = _labels_of(data)
    if k < 2:
        raise ValueError("k must be at least 2")
    if labels.dtype.kind in "iu" and np.any(labels < 0):
        raise ValueError("all samples must be labeled")
    classes, counts = np.unique(labels, return_counts=True)
    if len(classes) < 2:
        raise ValueError("stratified folds need both classes present")
    if k > counts.min():
        raise ValueError(f"k={k} exceeds the minority-class count {counts.min()}")
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(k)]
    offset = 0
    for cls in classes:
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(len(idx))]
        base, extra = divmod(len(idx), k)
        sizes = np.full(k, base)
        for j in range(extra):
            sizes[(offset + j) % k] += 1
        offset = (offset + extra) % k
        start = 0
        for j in range(k):
            folds[j].append(idx[start:start + sizes[j]])
            start += sizes[j]
    return [np.sort(np.concatenate(parts)) for parts in folds]
