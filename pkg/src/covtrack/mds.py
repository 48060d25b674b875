"""Classical (Torgerson) multidimensional scaling for descriptor sets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spd
from .errors import ContractError


@dataclass(frozen=True)
class MdsResult:
    """Embedding coordinates and diagnostics.

    ``truncated`` is set when fewer than the requested dimensions had positive
    eigenvalues; ``coords`` then has only the effective columns.
    """

    coords: np.ndarray
    eigenvalues: np.ndarray
    stress: float
    truncated: bool


def classical_mds(D, dim: int = 2) -> MdsResult:
    """Embed a distance matrix in ``dim`` Euclidean dimensions.

    Double-centers the squared distances, ``B = -1/2 J D^2 J``, and uses the
    top eigenpairs of ``B`` with positive eigenvalues. ``stress`` is the
    relative residual ``||D - D_hat||_F / ||D||_F`` of the embedded distances.
    """
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ContractError(f"distance matrix must be square, got {D.shape}")
    if not np.all(np.isfinite(D)) or np.any(D < 0):
        raise ContractError("distances must be finite and non-negative")
    if not np.allclose(D, D.T, rtol=1e-10, atol=1e-12) or np.any(np.diag(D) != 0):
        raise ContractError("distance matrix must be symmetric with zero diagonal")
    if dim < 1:
        raise ContractError(f"dim must be positive, got {dim}")
    n = D.shape[0]
    J = np.eye(n) - 1.0 / n
    B = -0.5 * J @ (D**2) @ J
    w, V = np.linalg.eigh(0.5 * (B + B.T))
    order = np.argsort(w)[::-1]
    w, V = w[order], V[:, order]
    tol = max(n, 1) * np.finfo(float).eps * max(abs(w[0]), 1.0)
    k = min(dim, int(np.count_nonzero(w > tol)))
    coords = V[:, :k] * np.sqrt(w[:k])
    D_hat = np.sqrt(np.maximum(np.sum((coords[:, None, :] - coords[None, :, :]) ** 2, axis=-1), 0.0))
    denom = np.linalg.norm(D)
    stress = float(np.linalg.norm(D - D_hat) / denom) if denom > 0 else 0.0
    return MdsResult(coords, w, stress, truncated=k < dim)


def distance_matrix(mats) -> np.ndarray:
    """Pairwise geodesic distances of a stack of SPD matrices ``(n, d, d)``."""
    mats = np.asarray(mats, dtype=np.float64)
    n = len(mats)
    D = np.zeros((n, n))
    for i in range(n - 1):
        D[i, i + 1 :] = spd.geodesic_distance(np.broadcast_to(mats[i], mats[i + 1 :].shape), mats[i + 1 :])
    return D + D.T


def separation(D, labels) -> tuple[float, float]:
    """Mean target-target and mean target-background distance.

    ``labels`` holds ``"target"`` or ``"background"`` per row of ``D``.
    """
    D = np.asarray(D, dtype=np.float64)
    lab = np.asarray(labels)
    t = np.flatnonzero(lab == "target")
    b = np.flatnonzero(lab == "background")
    if len(t) < 2 or len(b) < 1:
        raise ContractError("need at least two target and one background item")
    tt = D[np.ix_(t, t)][np.triu_indices(len(t), 1)]
    tb = D[np.ix_(t, b)]
    return float(tt.mean()), float(tb.mean())
