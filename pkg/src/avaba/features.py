"""Feature matrices from labeled telemetry.

Each sample pairs a frame's raw telemetry with the physics residual: the
difference between the measured lateral state and the one-step Euler
prediction from the previous frame. Trailing-window mean and standard
deviation of both residuals are appended.
"""
from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field, replace
from os import PathLike
from typing import Optional, Sequence, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .data import TelemetryFrame, frames_to_columns
from .dynamics import AS_PRINTED, SystemLike, VehicleParams, as_state_space, system_matrices

RAW_FEATURES = (
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
RESIDUAL_FEATURES = ("residual_vy", "residual_r")
ROLLING_FEATURES = ("residual_vy_mean", "residual_vy_std", "residual_r_mean", "residual_r_std")


@dataclass(frozen=True)
class ResidualSeries:
    """Residuals for frames 1..n-1; ``timestamps`` are those of the predicted frames."""

    timestamps: np.ndarray
    e_vy: np.ndarray
    e_r: np.ndarray
    predicted_vy: np.ndarray
    predicted_r: np.ndarray

    def __len__(self):
        return len(self.e_vy)


@dataclass(frozen=True)
class FeaturizerConfig:
    window: int = 10
    include_raw: bool = True
    include_residuals: bool = True
    include_arm: bool = False
    convention: str = AS_PRINTED

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be at least 1")
        if not (self.include_raw or self.include_residuals or self.include_arm):
            raise ValueError("featurizer config selects no features")

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def feature_names(self) -> tuple[str, ...]:
        names = []
        if self.include_arm:
            names.append("arm")
        if self.include_raw:
            names.extend(RAW_FEATURES)
        if self.include_residuals:
            names.extend(RESIDUAL_FEATURES + ROLLING_FEATURES)
        return tuple(names)


@dataclass(frozen=True)
class FeatureMatrix:
    X: np.ndarray
    feature_names: tuple
    labels: Optional[np.ndarray] = None
    timestamps: Optional[np.ndarray] = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2:
            raise ValueError("feature matrix must be 2-D")
        if not np.all(np.isfinite(X)):
            raise ValueError("feature matrix contains NaN or Inf")
        names = tuple(self.feature_names)
        if len(names) != X.shape[1]:
            raise ValueError(f"{len(names)} feature names for {X.shape[1]} columns")
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "feature_names", names)
        if self.labels is not None:
            y = np.asarray(self.labels).astype(np.int8)
            if y.shape != (X.shape[0],):
                raise ValueError("label vector length must equal the sample count")
            if not np.all((y == 0) | (y == 1)):
                raise ValueError("labels must be 0 (normal) or 1 (abnormal)")
            object.__setattr__(self, "labels", y)
        if self.timestamps is not None:
            object.__setattr__(self, "timestamps", np.asarray(self.timestamps, dtype=float))

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "FeatureMatrix":
        idx = np.asarray(idx)
        return replace(
            self,
            X=self.X[idx],
            labels=None if self.labels is None else self.labels[idx],
            timestamps=None if self.timestamps is None else self.timestamps[idx],
        )


def _columns(frames) -> dict:
    if isinstance(frames, dict):
        return frames
    return frames_to_columns(frames)


def compute_residuals(frames: Sequence[TelemetryFrame], model: SystemLike) -> ResidualSeries:
    """Measured minus one-step-predicted lateral state for consecutive frame pairs."""
    cols = _columns(frames)
    t = cols["timestamp"]
    if len(t) < 2:
        return ResidualSeries(*(np.empty(0) for _ in range(5)))
    dt = np.diff(t)
    if np.any(dt <= 0):
        bad = int(np.flatnonzero(dt <= 0)[0])
        raise ValueError(f"timestamps must be strictly increasing (frames {bad} and {bad + 1})")
    ss = as_state_space(model)
    vy, r, delta = cols["lateral_speed"], cols["yaw_rate"], cols["steering_angle"]
    vy_dot, r_dot = ss.derivatives(vy[:-1], r[:-1], delta[:-1])
    pred_vy = vy[:-1] + dt * vy_dot
    pred_r = r[:-1] + dt * r_dot
    return ResidualSeries(t[1:].copy(), vy[1:] - pred_vy, r[1:] - pred_r, pred_vy, pred_r)


def rolling_mean_std(x: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Trailing-window mean and population std; the first samples use the available prefix."""
    x = np.asarray(x, dtype=float)
    if len(x) == 0:
        return np.empty(0), np.empty(0)
    if window == 1:
        return x.copy(), np.zeros(len(x))
    padded = np.concatenate((np.full(window - 1, np.nan), x))
    view = sliding_window_view(padded, window)
    return np.nanmean(view, axis=1), np.nanstd(view, axis=1)


def build_features(
    frames: Sequence[TelemetryFrame],
    params: SystemLike,
    window: int = 10,
    config: Optional[FeaturizerConfig] = None,
    source: str = "",
) -> FeatureMatrix:
    """Featurize one contiguous recording; returns ``len(frames) - 1`` samples.

    Sample ``i`` describes frame ``i + 1``: its raw telemetry, the residual of
    predicting it from frame ``i``, and rolling residual statistics. Labels
    are included only when every frame is labeled.
    """
    if config is None:
        config = FeaturizerConfig(window=window)
    if len(frames) == 0:
        raise ValueError("cannot build features from an empty recording")
    cols = _columns(frames)
    if isinstance(params, VehicleParams):
        model = system_matrices(params, config.convention)
    else:
        model = as_state_space(params)
    res = compute_residuals(cols, model)
    blocks = []
    if config.include_arm:
        blocks.append(cols["arm"][1:, None])
    if config.include_raw:
        blocks.append(np.column_stack([cols[name][1:] for name in RAW_FEATURES]))
    if config.include_residuals:
        m_vy, s_vy = rolling_mean_std(res.e_vy, config.window)
        m_r, s_r = rolling_mean_std(res.e_r, config.window)
        blocks.append(np.column_stack([res.e_vy, res.e_r, m_vy, s_vy, m_r, s_r]))
    X = np.hstack(blocks) if blocks else np.empty((0, 0))
    if X.shape[0] == 0:
        X = np.empty((0, len(config.feature_names())))
    raw_labels = cols["label"][1:]
    labels = None
    if len(raw_labels) and np.all(raw_labels >= 0):
        labels = raw_labels
    elif np.any(raw_labels >= 0) and np.any(raw_labels < 0):
        raise ValueError("recording mixes labeled and unlabeled frames")
    provenance = {"sources": [source] if source else [], "featurizer": config.digest()}
    return FeatureMatrix(X, config.feature_names(), labels, res.timestamps, provenance)


def concat_matrices(matrices: Sequence[FeatureMatrix]) -> FeatureMatrix:
    """Stack per-recording matrices so residuals never span two recordings."""
    if not matrices:
        raise ValueError("nothing to concatenate")
    names = matrices[0].feature_names
    for m in matrices[1:]:
        if m.feature_names != names:
            raise ValueError("feature names differ between matrices")
    labeled = [m.labels is not None for m in matrices]
    labels = np.concatenate([m.labels for m in matrices]) if all(labeled) else None
    ts = None
    if all(m.timestamps is not None for m in matrices):
        ts = np.concatenate([m.timestamps for m in matrices])
    sources = [s for m in matrices for s in m.provenance.get("sources", [])]
    digests = sorted({m.provenance.get("featurizer", "") for m in matrices})
    return FeatureMatrix(
        np.vstack([m.X for m in matrices]),
        names,
        labels,
        ts,
        {"sources": sources, "featurizer": ",".join(digests)},
    )


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != len(self.mean):
            raise ValueError(f"expected {len(self.mean)} features, got {X.shape[-1]}")
        return (X - self.mean) / self.scale

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        constant = std == 0
        # zero-variance features pass through untouched
        return cls(np.where(constant, 0.0, mean), np.where(constant, 1.0, std))

    def to_dict(self) -> dict:
        return {"mean": [float(v) for v in self.mean], "scale": [float(v) for v in self.scale]}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["scale"], dtype=float))


def standardize(matrix: FeatureMatrix, stats: Optional[Standardizer] = None) -> tuple[FeatureMatrix, Standardizer]:
    """Z-score features with population std; fits the stats when none are given."""
    if stats is None:
        stats = Standardizer.fit(matrix.X)
    return replace(matrix, X=stats.transform(matrix.X)), stats


def write_feature_matrix(matrix: FeatureMatrix, path: Union[str, PathLike], config: Optional[FeaturizerConfig] = None) -> None:
    """CSV with a header (timestamp first if known, label last if known) plus an ``.ini`` sidecar."""
    path = str(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = list(matrix.feature_names)
        if matrix.timestamps is not None:
            header.insert(0, "timestamp")
        if matrix.labels is not None:
            header.append("label")
        writer.writerow(header)
        for i in range(matrix.n_samples):
            row = [repr(float(v)) for v in matrix.X[i]]
            if matrix.timestamps is not None:
                row.insert(0, repr(float(matrix.timestamps[i])))
            if matrix.labels is not None:
                row.append(str(int(matrix.labels[i])))
            writer.writerow(row)
    sidecar = configparser.ConfigParser()
    sidecar["featurizer"] = {} if config is None else {k: str(v) for k, v in asdict(config).items()}
    if config is not None:
        sidecar["featurizer"]["digest"] = config.digest()
    sidecar["provenance"] = {
        "sources": json.dumps(matrix.provenance.get("sources", [])),
        "featurizer": str(matrix.provenance.get("featurizer", "")),
        "n_samples": str(matrix.n_samples),
    }
    buf = io.StringIO()
    sidecar.write(buf)
    with open(path + ".ini", "w", encoding="utf-8") as fh:
        fh.write(buf.getvalue())


def read_featurizer_config(path: Union[str, PathLike]) -> Optional[FeaturizerConfig]:
    parser = configparser.ConfigParser()
    if not parser.read(str(path) + ".ini", encoding="utf-8") or not parser.has_section("featurizer"):
        return None
    sec = parser["featurizer"]
    if "window" not in sec:
        return None
    return FeaturizerConfig(
        window=sec.getint("window"),
        include_raw=sec.getboolean("include_raw"),
        include_residuals=sec.getboolean("include_residuals"),
        include_arm=sec.getboolean("include_arm"),
        convention=sec.get("convention"),
    )


def read_feature_matrix(path: Union[str, PathLike]) -> FeatureMatrix:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [r for r in reader if r]
    data = np.array(rows, dtype=float) if rows else np.empty((0, len(header)))
    names = list(header)
    ts = labels = None
    if names and names[-1] == "label":
        labels = data[:, -1].astype(np.int8)
        data = data[:, :-1]
        names = names[:-1]
    if names and names[0] == "timestamp":
        ts = data[:, 0]
        data = data[:, 1:]
        names = names[1:]
    provenance = {}
    parser = configparser.ConfigParser()
    if parser.read(str(path) + ".ini", encoding="utf-8") and parser.has_section("provenance"):
        provenance = {
            "sources": json.loads(parser.get("provenance", "sources", fallback="[]")),
            "featurizer": parser.get("provenance", "featurizer", fallback=""),
        }
    return FeatureMatrix(data, tuple(names), labels, ts, provenance)
