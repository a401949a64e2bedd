"""Class-wise kernel domain adaptation for activity recognition across sensor positions."""

from .data import RESIDUAL, Domain, RawRecording, SyntheticSpec, generate_synthetic, split_by_class
from .features import WindowingConfig, extract_position_features, extract_sensor_features, fuse_axes
from .kernels import KernelSpec, centering_matrix, kernel_matrix, mmd_global, mmd_stratified
from .sat import SatConfig, TransferModel, run_sat, solve_transform
from .sds import rank_sources_global, select_source
from .voting import ClassifierConfig, default_voters, majority_vote

__version__ = "0.1.0"

__all__ = [
    "RESIDUAL",
    "ClassifierConfig",
    "Domain",
    "KernelSpec",
    "RawRecording",
    "SatConfig",
    "SyntheticSpec",
    "TransferModel",
    "WindowingConfig",
    "centering_matrix",
    "default_voters",
    "extract_position_features",
    "extract_sensor_features",
    "fuse_axes",
    "generate_synthetic",
    "kernel_matrix",
    "majority_vote",
    "mmd_global",
    "mmd_stratified",
    "rank_sources_global",
    "run_sat",
    "select_source",
    "solve_transform",
    "split_by_class",
]
