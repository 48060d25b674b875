"""Synthetic tracking sequences with exact ground truth.

A procedurally textured square target moves over a textured background.
Velocity and rotation rate are given as keyframes and linearly interpolated
between them (constant outside), so positions are exact cumulative sums.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.ndimage import gaussian_filter, map_coordinates

from . import rng as _rng
from .errors import ContractError
from .metrics import GroundTruth
from .state import KineticState


@dataclass(frozen=True)
class SynthScenario:
    width: int = 320
    height: int = 240
    target_size: tuple[int, int] = (48, 48)
    texture_seed: int = 0
    n_frames: int = 200
    start: tuple[float, float] = (100.0, 120.0)
    # (frame, vx, vy) keyframes, linearly interpolated
    velocity_keys: tuple[tuple[float, float, float], ...] = ((0, 0.0, 0.0),)
    # (frame, omega rad/frame) keyframes, linearly interpolated
    rotation_keys: tuple[tuple[float, float], ...] = ((0, 0.0),)
    scale_rate: float = 0.0
    switch_frame: Optional[int] = None
    noise_sigma: float = 0.02
    margin: float = 4.0

    def __post_init__(self) -> None:
        if self.width < 16 or self.height < 16:
            raise ContractError("image must be at least 16x16")
        if min(self.target_size) < 4:
            raise ContractError("target must be at least 4 pixels on a side")
        if self.n_frames < 1:
            raise ContractError("need at least one frame")
        if self.noise_sigma < 0:
            raise ContractError("noise_sigma must be non-negative")
        if self.switch_frame is not None and not 0 < self.switch_frame < self.n_frames:
            raise ContractError("switch_frame must fall inside the sequence")


def _interp_keys(keys, frames: np.ndarray) -> np.ndarray:
    k = np.asarray(keys, dtype=np.float64)
    if k.ndim != 2 or len(k) == 0:
        raise ContractError("keyframes must be a non-empty list of tuples")
    order = np.argsort(k[:, 0], kind="stable")
    k = k[order]
    return np.stack([np.interp(frames, k[:, 0], k[:, j]) for j in range(1, k.shape[1])], axis=-1)


def scenario_poses(sc: SynthScenario) -> list[KineticState]:
    """True per-frame poses; velocities are those applied to reach each frame."""
    frames = np.arange(sc.n_frames, dtype=np.float64)
    vel = _interp_keys(sc.velocity_keys, frames)
    omega = _interp_keys(sc.rotation_keys, frames)[:, 0]
    vel[0] = 0.0
    omega[0] = 0.0
    xy = np.asarray(sc.start, dtype=np.float64) + np.cumsum(vel, axis=0)
    theta = np.cumsum(omega)
    h = 1.0 + sc.scale_rate * frames
    if np.any(h <= 0.05):
        raise ContractError("scale_rate drives the target scale to zero")
    half_diag = 0.5 * np.hypot(*sc.target_size) * h
    reach = half_diag + sc.margin
    if (
        np.any(xy[:, 0] - reach < 0)
        or np.any(xy[:, 0] + reach > sc.width - 1)
        or np.any(xy[:, 1] - reach < 0)
        or np.any(xy[:, 1] + reach > sc.height - 1)
    ):
        raise ContractError("trajectory leaves the image (including margin)")
    return [
        KineticState(xy[t, 0], xy[t, 1], vel[t, 0], vel[t, 1], h[t], theta[t])
        for t in range(sc.n_frames)
    ]


def _normalize(a: np.ndarray, lo: float, hi: float) -> np.ndarray:
    a = a - a.min()
    span = a.max()
    return lo + (hi - lo) * (a / span if span > 0 else a)


def target_texture(seed: int, size: tuple[int, int], variant: int = 0) -> np.ndarray:
    """High-contrast textured target, ``(height, width)`` in [0, 1].

    ``variant`` selects an appearance family; variant 1 is the post-switch look
    (finer grain, a diagonal stripe pattern and inverted polarity).
    """
    w, h = size
    g = _rng.stream(seed, variant, tag=_rng.TAG_SYNTH)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    if variant == 0:
        base = gaussian_filter(g.standard_normal((h, w)), 2.0, mode="wrap")
        # a few bright blobs give strong, localized gradients
        for _ in range(4):
            cx, cy = g.uniform(0.2, 0.8) * w, g.uniform(0.2, 0.8) * h
            r = g.uniform(0.08, 0.16) * min(w, h)
            base += 2.0 * base.std() * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * r * r))
        return _normalize(base, 0.15, 0.95)
    base = gaussian_filter(g.standard_normal((h, w)), 0.8, mode="wrap")
    stripes = np.sin(2 * np.pi * (xx + yy) / 7.0)
    return 1.0 - _normalize(base + 1.5 * base.std() * stripes, 0.1, 0.9)


def background_texture(seed: int, width: int, height: int) -> np.ndarray:
    g = _rng.stream(seed, 99, tag=_rng.TAG_SYNTH)
    coarse = gaussian_filter(g.standard_normal((height, width)), 8.0, mode="reflect")
    fine = gaussian_filter(g.standard_normal((height, width)), 1.5, mode="reflect")
    return _normalize(coarse + 0.15 * coarse.std() / max(fine.std(), 1e-12) * fine, 0.25, 0.65)


def render_frame(
    background: np.ndarray, texture: np.ndarray, pose: KineticState, noise: np.ndarray | None = None
) -> np.ndarray:
    """Composite the texture at ``pose`` over ``background`` with bilinear sampling."""
    height, width = background.shape
    th, tw = texture.shape
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    dx, dy = xs - pose.x, ys - pose.y
    c, s = np.cos(pose.theta), np.sin(pose.theta)
    # inverse similarity: image offset -> texture pixel coordinates
    u = (c * dx + s * dy) / pose.h + (tw - 1) / 2.0
    v = (-s * dx + c * dy) / pose.h + (th - 1) / 2.0
    inside = (u >= -0.5) & (u <= tw - 0.5) & (v >= -0.5) & (v <= th - 0.5)
    frame = background.copy()
    frame[inside] = map_coordinates(texture, [v[inside], u[inside]], order=1, mode="nearest")
    if noise is not None:
        frame = frame + noise
    return np.clip(frame, 0.0, 1.0)


def synth_sequence(sc: SynthScenario) -> tuple[list[np.ndarray], GroundTruth]:
    """Render all frames and the matching ground truth."""
    poses = scenario_poses(sc)
    bg = background_texture(sc.texture_seed, sc.width, sc.height)
    tex = target_texture(sc.texture_seed, sc.target_size, 0)
    tex_switch = target_texture(sc.texture_seed, sc.target_size, 1) if sc.switch_frame is not None else None
    frames = []
    for t, pose in enumerate(poses):
        active = tex_switch if sc.switch_frame is not None and t >= sc.switch_frame else tex
        noise = None
        if sc.noise_sigma > 0:
            noise = sc.noise_sigma * _rng.stream(sc.texture_seed, t, tag=_rng.TAG_SYNTH).standard_normal(
                (sc.height, sc.width)
            )
        img = render_frame(bg, active, pose, noise)
        img.setflags(write=False)
        frames.append(img)
    tw, th = sc.target_size
    gt = GroundTruth(
        frame=np.arange(sc.n_frames),
        gx=[p.x for p in poses],
        gy=[p.y for p in poses],
        Hx=[0.5 * tw * p.h for p in poses],
        Hy=[0.5 * th * p.h for p in poses],
    )
    return frames, gt


def acceptance_scenario(**overrides) -> SynthScenario:
    """The 320x240, 48x48, 200-frame scenario with speeds up to 3 px/frame and a 90 degree rotation ramp."""
    base = dict(
        width=320,
        height=240,
        target_size=(48, 48),
        n_frames=200,
        start=(60.0, 70.0),
        velocity_keys=((0, 0.0, 0.0), (20, 3.0, 0.0), (60, 2.8, 1.0), (90, 0.0, 2.0), (130, -2.8, -1.0), (170, -1.0, -1.5), (199, 0.0, 0.0)),
        rotation_keys=((0, 0.0), (99, 0.0), (100, np.pi / 2 / 40), (139, np.pi / 2 / 40), (140, 0.0)),
    )
    base.update(overrides)
    return SynthScenario(**base)
