"""Object tracking with region covariance descriptors on the SPD manifold."""

from __future__ import annotations

from .descriptor import DescriptorConfig, descriptor_from_state
from .errors import (
    ContractError,
    CovtrackError,
    DomainError,
    NotPositiveDefiniteError,
    NumericError,
    OutOfViewError,
    TrackLostError,
)
from .metrics import GroundTruth, Metrics, score
from .state import KineticState
from .tracker import Estimate, FilterConfig, MotionConfig, init_tracker, run, step

__version__ = "0.1.0"

__all__ = [
    "ContractError",
    "CovtrackError",
    "DescriptorConfig",
    "DomainError",
    "Estimate",
    "FilterConfig",
    "GroundTruth",
    "KineticState",
    "Metrics",
    "MotionConfig",
    "NotPositiveDefiniteError",
    "NumericError",
    "OutOfViewError",
    "TrackLostError",
    "descriptor_from_state",
    "init_tracker",
    "run",
    "score",
    "step",
]
