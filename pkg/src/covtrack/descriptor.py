"""Region covariance descriptors.

A pose hypothesis selects a rotated, scaled rectangle in the image. The
rectangle is resampled to a square standard patch, a 9-d feature vector is
computed per patch pixel and the regularized feature covariance is the
descriptor. Features, in order:

    x_w, y_w, I, |I_x|, |I_y|, sqrt(I_x^2 + I_y^2), arctan(|I_x| / |I_y|), |I_xx|, |I_yy|

Coordinates are 1-based patch pixel indices; gradients are central
differences on the warped patch with replicated borders.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.ndimage import map_coordinates

from . import spd
from .errors import ContractError, NotPositiveDefiniteError, OutOfViewError
from .state import KineticState

FEATURE_NAMES = ("x", "y", "I", "|Ix|", "|Iy|", "mag", "angle", "|Ixx|", "|Iyy|")
N_FEATURES = len(FEATURE_NAMES)

GrayImage = NDArray[np.float64]


@dataclass(frozen=True)
class DescriptorConfig:
    patch_side: int = 32
    regularization_eps: float = 1e-5

    def __post_init__(self) -> None:
        if int(self.patch_side) != self.patch_side or self.patch_side < 8:
            raise ContractError(f"patch_side must be an integer >= 8, got {self.patch_side}")
        if not np.isfinite(self.regularization_eps) or self.regularization_eps < 0:
            raise ContractError(f"regularization_eps must be >= 0, got {self.regularization_eps}")
        object.__setattr__(self, "patch_side", int(self.patch_side))
        object.__setattr__(self, "regularization_eps", float(self.regularization_eps))


def as_gray_image(a: ArrayLike) -> GrayImage:
    """Validate a 2-D intensity array in [0, 1] (rows = y, columns = x)."""
    img = np.array(a, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise ContractError(f"image must be a non-empty 2-D array, got shape {img.shape}")
    if not np.all(np.isfinite(img)) or img.min() < 0 or img.max() > 1:
        raise ContractError("image intensities must be finite and within [0, 1]")
    img.setflags(write=False)
    return img


def _patch_offsets(side: int) -> np.ndarray:
    # pixel centres of the standard patch, in units of the region extent, centred on 0
    return (np.arange(side) + 0.5) / side - 0.5


def region_corners(states: ArrayLike, extent: tuple[float, float]) -> np.ndarray:
    """Corner points ``(..., 4, 2)`` (x, y) of the region for each state row."""
    s = np.asarray(states, dtype=np.float64)
    w, hgt = extent
    local = np.array([[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]]) * np.array([w, hgt])
    c, sn = np.cos(s[..., 5]), np.sin(s[..., 5])
    scale = s[..., 4]
    lx = local[:, 0] * scale[..., None]
    ly = local[:, 1] * scale[..., None]
    x = s[..., 0, None] + c[..., None] * lx - sn[..., None] * ly
    y = s[..., 1, None] + sn[..., None] * lx + c[..., None] * ly
    return np.stack([x, y], axis=-1)


def in_view(states: ArrayLike, extent: tuple[float, float], shape: tuple[int, int]) -> np.ndarray:
    """True where the region overlaps the image (its bounding box meets the pixel area)."""
    corners = region_corners(states, extent)
    height, width = shape
    xs, ys = corners[..., 0], corners[..., 1]
    return (
        (xs.max(-1) > -0.5)
        & (xs.min(-1) < width - 0.5)
        & (ys.max(-1) > -0.5)
        & (ys.min(-1) < height - 0.5)
    )


def warp_patches(
    img: GrayImage, states: ArrayLike, extent: tuple[float, float], side: int
) -> np.ndarray:
    """Resample the region of every state row ``(n, 6)`` to ``(n, side, side)`` patches.

    No view check is done here; out-of-image samples take the nearest border
    intensity.
    """
    s = np.atleast_2d(np.asarray(states, dtype=np.float64))
    w, hgt = extent
    off = _patch_offsets(side)
    # local offsets before rotation, (n, side, side): rows follow y, columns x
    scale = s[:, 4, None, None]
    lx = off[None, None, :] * w * scale
    ly = off[None, :, None] * hgt * scale
    c = np.cos(s[:, 5])[:, None, None]
    sn = np.sin(s[:, 5])[:, None, None]
    x = s[:, 0, None, None] + c * lx - sn * ly
    y = s[:, 1, None, None] + sn * lx + c * ly
    out = map_coordinates(img, [y.ravel(), x.ravel()], order=1, mode="nearest")
    return out.reshape(len(s), side, side)


def warp_patch(
    img: ArrayLike,
    pose: KineticState,
    cfg: DescriptorConfig,
    extent: tuple[float, float],
) -> NDArray[np.float64]:
    """Similarity-warp the pose's region to a ``patch_side`` square patch.

    The region is ``extent`` (width, height) pixels scaled by ``pose.h``,
    rotated by ``pose.theta`` about ``(pose.x, pose.y)``; sampling is bilinear.

    Raises
    ------
    ContractError
        Non-positive extent.
    OutOfViewError
        The region lies entirely outside the image.
    """
    img = np.asarray(img, dtype=np.float64)
    if extent[0] <= 0 or extent[1] <= 0:
        raise ContractError(f"target extent must be positive, got {extent}")
    st = pose.to_array()
    if not in_view(st, extent, img.shape):
        raise OutOfViewError(f"region of {pose} is entirely outside the {img.shape[1]}x{img.shape[0]} image")
    return warp_patches(img, st, extent, cfg.patch_side)[0]


def extract_features(patch: ArrayLike) -> NDArray[np.float64]:
    """Per-pixel 9-d features of a ``(..., side, side)`` patch, shape ``(..., side, side, 9)``."""
    p = np.asarray(patch, dtype=np.float64)
    if p.ndim < 2 or p.shape[-1] != p.shape[-2]:
        raise ContractError(f"patch must be square, got shape {p.shape}")
    side = p.shape[-1]
    pad = [(0, 0)] * (p.ndim - 2) + [(1, 1), (1, 1)]
    q = np.pad(p, pad, mode="edge")
    centre = q[..., 1:-1, 1:-1]
    left, right = q[..., 1:-1, :-2], q[..., 1:-1, 2:]
    up, down = q[..., :-2, 1:-1], q[..., 2:, 1:-1]
    ix = 0.5 * (right - left)
    iy = 0.5 * (down - up)
    ixx = right - 2.0 * centre + left
    iyy = down - 2.0 * centre + up
    ax, ay = np.abs(ix), np.abs(iy)
    coords = np.arange(1, side + 1, dtype=np.float64)
    xw = np.broadcast_to(coords[None, :], p.shape)
    yw = np.broadcast_to(coords[:, None], p.shape)
    return np.stack(
        [
            xw,
            yw,
            p,
            ax,
            ay,
            np.hypot(ix, iy),
            np.arctan2(ax, ay),  # arctan(|Ix|/|Iy|), 0 where both vanish
            np.abs(ixx),
            np.abs(iyy),
        ],
        axis=-1,
    )


def raw_covariance(field: ArrayLike) -> NDArray[np.float64]:
    """Unbiased feature covariance ``(1/(N-1)) sum (f - mean)(f - mean)^T`` over all pixels."""
    f = np.asarray(field, dtype=np.float64)
    d = f.shape[-1]
    X = f.reshape(*f.shape[:-3], -1, d)
    n = X.shape[-2]
    if n < 2:
        raise ContractError("covariance needs at least 2 pixels")
    Xc = X - X.mean(axis=-2, keepdims=True)
    C = np.einsum("...ni,...nj->...ij", Xc, Xc) / (n - 1)
    return 0.5 * (C + np.swapaxes(C, -1, -2))


def covariance(field: ArrayLike, cfg: DescriptorConfig) -> spd.SpdMatrix:
    """Regularized covariance descriptor of a feature field.

    Adds ``eps * (trace(C)/d + 1) * I`` with ``eps = cfg.regularization_eps``;
    with ``eps = 0`` the plain covariance is returned (and must be SPD).

    Raises
    ------
    NotPositiveDefiniteError
        The (regularized) covariance is singular.
    """
    C = raw_covariance(field)
    d = C.shape[-1]
    eps = cfg.regularization_eps
    if eps > 0:
        ridge = eps * (np.trace(C, axis1=-2, axis2=-1) / d + 1.0)
        C = C + ridge[..., None, None] * np.eye(d)
    try:
        return spd.as_spd(C)
    except NotPositiveDefiniteError as exc:
        raise NotPositiveDefiniteError(f"degenerate feature field: {exc}") from exc


def descriptor_from_state(
    img: ArrayLike,
    pose: KineticState,
    cfg: DescriptorConfig,
    extent: tuple[float, float],
) -> spd.SpdMatrix:
    return covariance(extract_features(warp_patch(img, pose, cfg, extent)), cfg)


def descriptors_from_states(
    img: ArrayLike, states: ArrayLike, cfg: DescriptorConfig, extent: tuple[float, float]
) -> spd.SpdMatrix:
    """Descriptors for a batch of state rows ``(n, 6)``; no view check."""
    patches = warp_patches(np.asarray(img, dtype=np.float64), states, extent, cfg.patch_side)
    return covariance(extract_features(patches), cfg)
