"""Joint kinematics + template particle filter.

Each particle carries a kinematic state and its own covariance template. Per
frame the filter

1. moves every state with the near-constant-velocity model plus a two-level
   Gaussian jump noise,
2. diffuses every template by one log-space random walk step,
3. weighs each particle by how close its template is to the descriptor
   observed at its pose, ``exp(-d^2 / (2 sigma^2))``,
4. reports the weighted mean (kinematics) and log-Euclidean mean (template),
5. resamples systematically when the effective sample size drops too low.

All randomness is drawn from counter-based streams keyed by (seed, frame,
particle), so the result is a pure function of frames, initial state,
configuration and seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from . import rng as _rng
from . import spd
from .descriptor import DescriptorConfig, as_gray_image, descriptor_from_state, descriptors_from_states, in_view
from .errors import ContractError, OutOfViewError, TrackLostError
from .state import KineticState

TEMPLATE_DIM = 9
MIN_SCALE = 0.05


def constant_velocity_transition() -> np.ndarray:
    """``x += vx``, ``y += vy``; velocities, scale and angle persist."""
    A = np.eye(6)
    A[0, 2] = 1.0
    A[1, 3] = 1.0
    return A


@dataclass(frozen=True)
class MotionConfig:
    """Kinematic model: ``s' = A s + u`` with ``u`` from a two-component Gaussian mixture.

    With probability ``jump_prob[0]`` the per-component std-devs are
    ``noise_small``, otherwise ``noise_large``. Components follow the state
    order ``[x, y, vx, vy, h, theta]``.
    """

    A: np.ndarray = field(default_factory=constant_velocity_transition)
    noise_small: tuple[float, ...] = (1.0, 1.0, 0.5, 0.5, 0.01, 0.03)
    noise_large: tuple[float, ...] = (6.0, 6.0, 2.0, 2.0, 0.04, 0.15)
    jump_prob: tuple[float, float] = (0.9, 0.1)

    def __post_init__(self) -> None:
        A = np.array(self.A, dtype=np.float64)
        if A.shape != (6, 6) or not np.all(np.isfinite(A)):
            raise ContractError("A must be a finite 6x6 matrix")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)
        for name in ("noise_small", "noise_large"):
            v = tuple(float(x) for x in getattr(self, name))
            if len(v) != 6 or any(not np.isfinite(x) or x < 0 for x in v):
                raise ContractError(f"{name} must be six non-negative std-devs")
            object.__setattr__(self, name, v)
        p = tuple(float(x) for x in self.jump_prob)
        if len(p) != 2 or min(p) < 0 or abs(sum(p) - 1.0) > 1e-12:
            raise ContractError(f"jump_prob must be two probabilities summing to 1, got {p}")
        object.__setattr__(self, "jump_prob", p)


def _default_template_noise() -> spd.NoiseSpec:
    # Log-domain steps are amplified by the spread of the template spectrum
    # (about 1e-4..1e2 for typical patches), so sigma stays small.
    return spd.NoiseSpec.uniform(TEMPLATE_DIM, 0.001, 0)


@dataclass(frozen=True)
class FilterConfig:
    n_particles: int = 200
    obs_sigma: float = 0.4
    template_noise: spd.NoiseSpec = field(default_factory=_default_template_noise)
    descriptor: DescriptorConfig = field(default_factory=DescriptorConfig)
    resample_ess_frac: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if int(self.n_particles) != self.n_particles or self.n_particles < 1:
            raise ContractError(f"n_particles must be a positive integer, got {self.n_particles}")
        if not self.obs_sigma > 0:
            raise ContractError(f"obs_sigma must be positive, got {self.obs_sigma}")
        if not 0 < self.resample_ess_frac <= 1:
            raise ContractError(f"resample_ess_frac must be in (0, 1], got {self.resample_ess_frac}")
        if self.template_noise.dim != TEMPLATE_DIM:
            raise ContractError(f"template noise must be {TEMPLATE_DIM}x{TEMPLATE_DIM}")
        if not 0 <= int(self.seed) < 2**64:
            raise ContractError("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "n_particles", int(self.n_particles))
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True)
class Particle:
    state: KineticState
    template: spd.SpdMatrix
    log_weight: float


@dataclass(frozen=True)
class Estimate:
    frame_index: int
    state: KineticState
    template: spd.SpdMatrix
    ess: float


@dataclass
class FilterState:
    """Particle cloud plus everything needed to continue filtering.

    ``log_weights`` are normalized (log-sum-exp 0). ``frame_index`` is the
    index of the last frame absorbed; frame 0 is the initialization frame.
    """

    cfg: FilterConfig
    motion: MotionConfig
    extent: tuple[float, float]
    frame_index: int
    states: np.ndarray
    templates: np.ndarray
    log_weights: np.ndarray
    last_estimate: Estimate

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @property
    def ess(self) -> float:
        return effective_sample_size(self.weights)

    @property
    def particles(self) -> list[Particle]:
        return [
            Particle(KineticState.from_array(s), spd.as_spd(c), float(lw))
            for s, c, lw in zip(self.states, self.templates, self.log_weights)
        ]


def effective_sample_size(weights) -> float:
    w = np.asarray(weights, dtype=np.float64)
    return float(1.0 / np.sum(w * w))


def init_tracker(
    frame0,
    init_state: KineticState,
    target_extent: tuple[float, float],
    cfg: FilterConfig | None = None,
    motion: MotionConfig | None = None,
) -> FilterState:
    """Extract the initial template and place every particle on ``init_state``.

    Raises
    ------
    OutOfViewError
        The initial region lies outside ``frame0``.
    """
    cfg = cfg or FilterConfig()
    motion = motion or MotionConfig()
    img = as_gray_image(frame0)
    extent = (float(target_extent[0]), float(target_extent[1]))
    if extent[0] <= 0 or extent[1] <= 0:
        raise ContractError(f"target extent must be positive, got {target_extent}")
    c0 = descriptor_from_state(img, init_state, cfg.descriptor, extent)
    n = cfg.n_particles
    states = np.tile(init_state.to_array(), (n, 1))
    templates = np.tile(np.asarray(c0), (n, 1, 1))
    log_weights = np.full(n, -np.log(n))
    est = Estimate(0, init_state, c0, float(n))
    return FilterState(cfg, motion, extent, 0, states, templates, log_weights, est)


def _kinetic_noise(cfg: MotionConfig, gen: np.random.Generator) -> np.ndarray:
    small = gen.random() < cfg.jump_prob[0]
    z = gen.standard_normal(6)
    return np.asarray(cfg.noise_small if small else cfg.noise_large) * z


def _apply_motion(states: np.ndarray, noise: np.ndarray, cfg: MotionConfig) -> np.ndarray:
    out = states @ cfg.A.T + noise
    out[..., 4] = np.maximum(out[..., 4], MIN_SCALE)
    return out


def propagate_kinetics(s: KineticState, cfg: MotionConfig, draw: np.random.Generator) -> KineticState:
    """One kinematic step ``A s + u``; ``h`` is floored at 0.05 after the noise."""
    return KineticState.from_array(_apply_motion(s.to_array(), _kinetic_noise(cfg, draw), cfg))


def likelihood(template, observed, obs_sigma: float) -> float | np.ndarray:
    """Unnormalized log-likelihood ``-d^2 / (2 sigma^2)`` of an observed descriptor."""
    if not obs_sigma > 0:
        raise ContractError(f"obs_sigma must be positive, got {obs_sigma}")
    d = spd.geodesic_distance(template, observed)
    return -np.square(d) / (2.0 * obs_sigma**2)


def systematic_resample(weights, draw: np.random.Generator) -> np.ndarray:
    """Offspring indices from one stratified uniform draw.

    Index ``i`` is selected ``floor(n w_i)`` or ``ceil(n w_i)`` times.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or len(w) == 0:
        raise ContractError("weights must be a non-empty vector")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ContractError("weights must be finite and non-negative")
    total = w.sum()
    if total <= 0:
        raise ContractError("cannot resample all-zero weights")
    n = len(w)
    c = np.cumsum(w / total)
    c[-1] = 1.0
    positions = (draw.random() + np.arange(n)) / n
    return np.searchsorted(c, positions, side="right")


def _mmse(states: np.ndarray, templates: np.ndarray, w: np.ndarray) -> tuple[KineticState, spd.SpdMatrix]:
    mean = w @ states
    mean[5] = np.arctan2(w @ np.sin(states[:, 5]), w @ np.cos(states[:, 5]))
    keep = w > 0
    tmpl = spd.log_euclidean_mean(w[keep] / w[keep].sum(), templates[keep])
    return KineticState.from_array(mean), tmpl


def mmse_estimate(particles: Sequence[Particle]) -> tuple[KineticState, spd.SpdMatrix]:
    """Posterior-mean state (circular mean for theta) and log-Euclidean mean template."""
    if len(particles) == 0:
        raise ContractError("no particles")
    lw = np.array([p.log_weight for p in particles], dtype=np.float64)
    if not np.any(np.isfinite(lw)):
        raise ContractError("all particle weights are zero")
    w = np.exp(lw - logsumexp(lw))
    states = np.array([p.state.to_array() for p in particles])
    templates = np.array([np.asarray(p.template) for p in particles])
    return _mmse(states, templates, w)


def step(filt: FilterState, frame) -> Estimate:
    """Absorb the next frame; update ``filt`` in place and return the estimate.

    Raises
    ------
    TrackLostError
        Every particle left the frame. ``filt`` is left unchanged.
    """
    img = as_gray_image(frame)
    cfg, motion = filt.cfg, filt.motion
    t = filt.frame_index + 1
    n = filt.n

    tmpl_sigma = cfg.template_noise.sigma
    kin_noise = np.empty((n, 6))
    tmpl_noise = np.empty((n, TEMPLATE_DIM, TEMPLATE_DIM))
    for i in range(n):
        kin_noise[i] = _kinetic_noise(motion, _rng.stream(cfg.seed, t, i, tag=_rng.TAG_KINETIC))
        g = _rng.stream(cfg.template_noise.rng_seed, t, i, tag=_rng.TAG_TEMPLATE)
        tmpl_noise[i] = spd.sample_sym_noise(tmpl_sigma, g)
    states = _apply_motion(filt.states, kin_noise, motion)
    if np.any(tmpl_sigma):
        templates = np.array(spd.sym_exp(spd.sym_log(filt.templates) + tmpl_noise))
    else:
        templates = filt.templates.copy()

    alive = in_view(states, filt.extent, img.shape)
    if not alive.any():
        raise TrackLostError(f"all particles left the frame at frame {t}", filt.last_estimate)
    loglik = np.full(n, -np.inf)
    observed = descriptors_from_states(img, states[alive], cfg.descriptor, filt.extent)
    loglik[alive] = likelihood(templates[alive], observed, cfg.obs_sigma)

    lw = filt.log_weights + loglik
    lw = lw - logsumexp(lw)
    w = np.exp(lw)
    ess = effective_sample_size(w)
    state, template = _mmse(states, templates, w)
    est = Estimate(t, state, template, ess)

    if ess < cfg.resample_ess_frac * n:
        idx = systematic_resample(w, _rng.stream(cfg.seed, t, tag=_rng.TAG_RESAMPLE))
        states, templates = states[idx], templates[idx]
        lw = np.full(n, -np.log(n))

    filt.states, filt.templates, filt.log_weights = states, templates, lw
    filt.frame_index = t
    filt.last_estimate = est
    return est


def run(frames, init_state: KineticState, target_extent, cfg: FilterConfig | None = None,
        motion: MotionConfig | None = None) -> list[Estimate]:
    """Track a whole sequence; ``frames[0]`` initializes and yields the frame-0 estimate."""
    frames = iter(frames)
    filt = init_tracker(next(frames), init_state, target_extent, cfg, motion)
    out = [filt.last_estimate]
    for frame in frames:
        out.append(step(filt, frame))
    return out


__all__ = [
    "Estimate",
    "FilterConfig",
    "FilterState",
    "MotionConfig",
    "OutOfViewError",
    "Particle",
    "TrackLostError",
    "effective_sample_size",
    "init_tracker",
    "likelihood",
    "mmse_estimate",
    "propagate_kinetics",
    "run",
    "step",
    "systematic_resample",
]
