"""Ground-truth scoring of tracks.

A frame is on track when the normalized centre error

    gamma = (e_x / H_x + e_y / H_y) / 2

is at most 1, where ``H_x, H_y`` are the ground-truth half-extents. The
on-track ratio is the fraction of scored frames that are on track, and the
on-track RMS is ``sqrt(mean((e_x/H_x)^2 + (e_y/H_y)^2) / 2)`` taken over the
on-track frames only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import ContractError

ON_TRACK_THRESHOLD = 1.0


@dataclass(frozen=True)
class GroundTruth:
    """Per-frame target centres and half-extents; frames may be missing."""

    frame: np.ndarray
    gx: np.ndarray
    gy: np.ndarray
    Hx: np.ndarray
    Hy: np.ndarray

    def __post_init__(self) -> None:
        cols = {}
        for name in ("frame", "gx", "gy", "Hx", "Hy"):
            cols[name] = np.asarray(getattr(self, name), dtype=np.int64 if name == "frame" else np.float64)
        n = len(cols["frame"])
        if any(c.shape != (n,) for c in cols.values()):
            raise ContractError("ground-truth columns must be 1-D and of equal length")
        if n > 1 and np.any(np.diff(cols["frame"]) <= 0):
            raise ContractError("ground-truth frame indices must be strictly increasing")
        if np.any(cols["Hx"] <= 0) or np.any(cols["Hy"] <= 0):
            raise ContractError("ground-truth half-extents must be positive")
        for name, c in cols.items():
            c.setflags(write=False)
            object.__setattr__(self, name, c)

    def __len__(self) -> int:
        return len(self.frame)


@dataclass(frozen=True)
class Metrics:
    on_track_ratio: float
    on_track_rms: float
    per_frame_gamma: np.ndarray
    scored_frames: np.ndarray

    def report(self) -> str:
        """Flat ``key=value`` text."""
        lines = [
            f"on_track_ratio={self.on_track_ratio!r}",
            f"on_track_rms={self.on_track_rms!r}",
            f"scored_frames={len(self.scored_frames)}",
            f"on_track_frames={int(np.sum(self.per_frame_gamma <= ON_TRACK_THRESHOLD))}",
        ]
        return "\n".join(lines) + "\n"


def gamma(ex, ey, Hx, Hy):
    """Normalized centre error; works elementwise on arrays."""
    ex, ey, Hx, Hy = (np.asarray(v, dtype=np.float64) for v in (ex, ey, Hx, Hy))
    if np.any(Hx <= 0) or np.any(Hy <= 0):
        raise ContractError("normalizers Hx, Hy must be positive")
    if np.any(ex < 0) or np.any(ey < 0):
        raise ContractError("errors ex, ey must be non-negative")
    g = 0.5 * (ex / Hx + ey / Hy)
    return float(g) if g.ndim == 0 else g


def score(track: Iterable, gt: GroundTruth) -> Metrics:
    """Score a track against ground truth.

    ``track`` items need ``frame_index`` and a ``state`` with ``x, y``
    (e.g. tracker estimates), or may be ``(frame, x, y)`` tuples. Frames
    absent from either side are not scored.
    """
    rows = []
    for item in track:
        if hasattr(item, "frame_index"):
            rows.append((int(item.frame_index), item.state.x, item.state.y))
        else:
            f, x, y = item[:3]
            rows.append((int(f), float(x), float(y)))
    if not rows:
        raise ContractError("empty track")
    tf = np.array([r[0] for r in rows])
    txy = np.array([r[1:] for r in rows], dtype=np.float64)
    common, ti, gi = np.intersect1d(tf, gt.frame, return_indices=True)
    if len(common) == 0:
        raise ContractError("track and ground truth share no frames")
    ex = np.abs(gt.gx[gi] - txy[ti, 0])
    ey = np.abs(gt.gy[gi] - txy[ti, 1])
    nx, ny = ex / gt.Hx[gi], ey / gt.Hy[gi]
    g = gamma(ex, ey, gt.Hx[gi], gt.Hy[gi])
    g = np.atleast_1d(g)
    on = g <= ON_TRACK_THRESHOLD
    ratio = float(np.count_nonzero(on)) / len(common)
    rms = float(np.sqrt(np.mean(0.5 * (nx[on] ** 2 + ny[on] ** 2)))) if on.any() else float("nan")
    return Metrics(ratio, rms, g, common)
