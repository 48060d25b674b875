from __future__ import annotations

import numpy as np
import pytest


def random_spd(rng: np.random.Generator, d: int = 9, lo: float = -3.0, hi: float = 3.0) -> np.ndarray:
    """SPD matrix with a Haar-random eigenbasis and spectrum log-uniform in [10^lo, 10^hi]."""
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    q = q * np.sign(np.diag(r))
    lam = 10.0 ** rng.uniform(lo, hi, d)
    return (q * lam) @ q.T


def random_sym(rng: np.random.Generator, d: int = 9, scale: float = 1.0) -> np.ndarray:
    a = rng.standard_normal((d, d)) * scale
    return 0.5 * (a + a.T)


def random_orthogonal(rng: np.random.Generator, d: int = 9) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240607)


def five_frame_fixture():
    """Hand-computed scoring fixture: 5 frames, Hx = Hy = 10, frames 2 and 4 off track.

    gamma per frame: 0.3, 0, 1.5, 1.0, 1.5 -> ratio 3/5.
    normalized squared errors on the on-track frames: 0.1, 0, 1 -> rms sqrt(1.1 / 3).
    """
    from covtrack.metrics import GroundTruth

    gx = np.array([100.0, 110.0, 120.0, 130.0, 140.0])
    gy = np.array([50.0, 50.0, 50.0, 50.0, 50.0])
    gt = GroundTruth(frame=np.arange(5), gx=gx, gy=gy, Hx=np.full(5, 10.0), Hy=np.full(5, 10.0))
    ex = [2.0, 0.0, 15.0, 10.0, 25.0]
    ey = [4.0, 0.0, -15.0, -10.0, 5.0]
    track = [(k, gx[k] + ex[k], gy[k] + ey[k]) for k in range(5)]
    return track, gt, 0.6, float(np.sqrt(1.1 / 3.0))
