"""Kinematic target state shared by the descriptor and the tracker."""

from __future__ import annotations

from dataclasses import astuple, dataclass

import numpy as np

from .errors import ContractError

STATE_FIELDS = ("x", "y", "vx", "vy", "h", "theta")


@dataclass(frozen=True)
class KineticState:
    """Target pose and velocity ``[x, y, vx, vy, h, theta]``.

    ``x, y`` is the target centre in pixels (x along columns), ``vx, vy`` the
    velocity in pixels/frame, ``h`` the scale factor relative to the initial
    target extent and ``theta`` the orientation in radians.
    """

    x: float
    y: float
    vx: float = 0.0
    vy: float = 0.0
    h: float = 1.0
    theta: float = 0.0

    def __post_init__(self) -> None:
        for name in STATE_FIELDS:
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise ContractError(f"KineticState.{name} is not finite: {v}")
            object.__setattr__(self, name, v)
        if self.h <= 0:
            raise ContractError(f"KineticState.h must be positive, got {self.h}")

    def to_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)

    @classmethod
    def from_array(cls, a) -> "KineticState":
        a = np.asarray(a, dtype=np.float64)
        if a.shape != (6,):
            raise ContractError(f"expected a 6-vector, got shape {a.shape}")
        return cls(*a.tolist())
