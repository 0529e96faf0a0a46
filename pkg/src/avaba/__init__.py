"""Physics-informed detection of laser (depth sensor) blinding attacks on small autonomous cars."""
__version__ = "0.1.0"

from .dynamics import (
    ControlInput,
    DynamicsConfig,
    KinematicState,
    LateralState,
    StateSpace,
    VehicleParams,
    predict_next_state,
    system_matrices,
)
from .data import Label, TelemetryFrame, load_frames, stratified_kfold, write_frames
from .features import FeatureMatrix, FeaturizerConfig, build_features, compute_residuals
from .classifiers import TrainedModel, cross_validate, evaluate, train
from .detector import DetectorConfig, detect, margin_analysis, tune_threshold
from .simulate import AttackScript, Scenario, run_scenario, simulate_attack, synthetic_benchmark

__all__ = [
    "ControlInput", "DynamicsConfig", "KinematicState", "LateralState", "StateSpace", "VehicleParams",
    "predict_next_state", "system_matrices", "Label", "TelemetryFrame", "load_frames", "stratified_kfold",
    "write_frames", "FeatureMatrix", "FeaturizerConfig", "build_features", "compute_residuals",
    "TrainedModel", "cross_validate", "evaluate", "train", "DetectorConfig", "detect", "margin_analysis",
    "tune_threshold", "AttackScript", "Scenario", "run_scenario", "simulate_attack", "synthetic_benchmark",
]
