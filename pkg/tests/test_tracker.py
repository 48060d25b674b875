from __future__ import annotations

import numpy as np
import pytest

from covtrack import rng as crng
from covtrack import spd, synth, tracker
from covtrack.descriptor import descriptor_from_state
from covtrack.errors import ContractError, OutOfViewError, TrackLostError
from covtrack.state import KineticState
from covtrack.tracker import FilterConfig, MotionConfig

from conftest import random_spd

ZERO_MOTION = MotionConfig(noise_small=(0.0,) * 6, noise_large=(0.0,) * 6)
ZERO_TEMPLATE = spd.NoiseSpec.uniform(9, 0.0, 0)


@pytest.fixture(scope="module")
def static_scene():
    sc = synth.SynthScenario(width=120, height=120, start=(60.0, 60.0), n_frames=6, noise_sigma=0.0)
    frames, _ = synth.synth_sequence(sc)
    return sc, frames, synth.scenario_poses(sc)[0]


# -- configuration ----------------------------------------------------------------


def test_config_validation():
    with pytest.raises(ContractError):
        FilterConfig(n_particles=0)
    with pytest.raises(ContractError):
        FilterConfig(obs_sigma=0.0)
    with pytest.raises(ContractError):
        FilterConfig(resample_ess_frac=1.5)
    with pytest.raises(ContractError):
        FilterConfig(template_noise=spd.NoiseSpec.uniform(3, 0.1))
    with pytest.raises(ContractError):
        MotionConfig(jump_prob=(0.5, 0.6))
    with pytest.raises(ContractError):
        MotionConfig(noise_small=(1.0,) * 5)


# -- kinematics -------------------------------------------------------------------


def test_noiseless_constant_velocity():
    s = KineticState(10, 20, 2, -1, 1, 0)
    out = tracker.propagate_kinetics(s, ZERO_MOTION, np.random.default_rng(0))
    assert out.to_array().tolist() == [12, 19, 2, -1, 1, 0]


def test_scale_is_floored():
    motion = MotionConfig(noise_small=(0, 0, 0, 0, 5.0, 0), jump_prob=(1.0, 0.0))
    hs = [tracker.propagate_kinetics(KineticState(0, 0), motion, np.random.default_rng(k)).h for k in range(200)]
    assert min(hs) == pytest.approx(0.05)


def _x_noise(motion: MotionConfig, n: int) -> np.ndarray:
    s = KineticState(0.0, 0.0)
    return np.array([tracker.propagate_kinetics(s, motion, crng.stream(11, k, tag=crng.TAG_KINETIC)).x for k in range(n)])


def test_small_noise_std():
    motion = MotionConfig(jump_prob=(1.0, 0.0))
    x = _x_noise(motion, 100_000)
    assert np.std(x) == pytest.approx(motion.noise_small[0], rel=0.03)


def test_mixture_variance():
    motion = MotionConfig()
    x = _x_noise(motion, 100_000)
    expect = 0.9 * motion.noise_small[0] ** 2 + 0.1 * motion.noise_large[0] ** 2
    assert np.var(x) == pytest.approx(expect, rel=0.05)


# -- likelihood -------------------------------------------------------------------


def test_likelihood_examples(rng):
    C = random_spd(rng)
    assert tracker.likelihood(C, C, 0.4) == 0.0
    D = spd.sym_exp(np.diag([0.4 * np.sqrt(2)] + [0.0] * 8))
    assert tracker.likelihood(np.eye(9), D, 0.4) == pytest.approx(-1.0, rel=1e-12)
    with pytest.raises(ContractError):
        tracker.likelihood(C, C, 0.0)


def test_likelihood_decreases_with_distance(rng):
    base = random_spd(rng)
    others = [random_spd(rng) for _ in range(30)]
    d = np.array([spd.geodesic_distance(base, o) for o in others])
    ll = np.array([tracker.likelihood(base, o, 0.7) for o in others])
    order = np.argsort(d)
    assert np.all(np.diff(ll[order]) < 0)


# -- resampling -------------------------------------------------------------------


def test_resample_point_mass():
    w = np.zeros(10)
    w[3] = 1.0
    assert np.all(tracker.systematic_resample(w, np.random.default_rng(0)) == 3)


def test_resample_uniform_is_permutation_free():
    idx = tracker.systematic_resample(np.full(50, 1 / 50), np.random.default_rng(1))
    assert idx.tolist() == list(range(50))


def test_resample_counts_are_floor_or_ceil(rng):
    w = rng.random(40)
    w /= w.sum()
    for k in range(200):
        counts = np.bincount(tracker.systematic_resample(w, np.random.default_rng(k)), minlength=40)
        assert np.all((counts == np.floor(40 * w)) | (counts == np.ceil(40 * w)))


def test_resample_expected_counts(rng):
    w = rng.random(20) ** 2
    w /= w.sum()
    total = np.zeros(20)
    trials = 10_000
    for k in range(trials):
        total += np.bincount(tracker.systematic_resample(w, crng.stream(3, k, tag=crng.TAG_RESAMPLE)), minlength=20)
    mean = total / trials
    # per-trial count variance is at most 1/4, so 2% is several standard errors once n w >= 1
    big = 20 * w >= 1.0
    assert big.sum() >= 3
    assert np.all(np.abs(mean[big] - 20 * w[big]) / (20 * w[big]) < 0.02)


def test_resample_rejects_bad_weights():
    g = np.random.default_rng(0)
    with pytest.raises(ContractError):
        tracker.systematic_resample(np.zeros(4), g)
    with pytest.raises(ContractError):
        tracker.systematic_resample(np.array([0.5, -0.1, 0.6]), g)


# -- MMSE -------------------------------------------------------------------------


def _particle(x=0.0, theta=0.0, lw=0.0, tmpl=None):
    return tracker.Particle(KineticState(x, 0.0, theta=theta), spd.as_spd(np.eye(9) if tmpl is None else tmpl), lw)


def test_mmse_single_particle(rng):
    C = random_spd(rng)
    p = tracker.Particle(KineticState(3, 4, 1, 2, 1.5, 0.3), spd.as_spd(C), -2.0)
    state, tmpl = tracker.mmse_estimate([p])
    assert state.to_array() == pytest.approx(p.state.to_array(), abs=1e-12)
    assert np.allclose(tmpl, C, rtol=1e-10)


def test_mmse_two_particles():
    state, _ = tracker.mmse_estimate([_particle(0.0), _particle(4.0)])
    assert state.x == pytest.approx(2.0)


def test_mmse_circular_mean():
    state, _ = tracker.mmse_estimate([_particle(theta=-3.1), _particle(theta=3.1)])
    assert abs(abs(state.theta) - np.pi) < 1e-12


def test_mmse_rejects_zero_weights():
    with pytest.raises(ContractError):
        tracker.mmse_estimate([_particle(lw=-np.inf)])
    with pytest.raises(ContractError):
        tracker.mmse_estimate([])


# -- filtering --------------------------------------------------------------------


def test_init(static_scene):
    sc, frames, pose = static_scene
    filt = tracker.init_tracker(frames[0], pose, sc.target_size)
    assert filt.ess == pytest.approx(200)
    assert filt.last_estimate.state == pose
    state, _ = tracker.mmse_estimate(filt.particles)
    assert state.to_array() == pytest.approx(pose.to_array(), abs=1e-12)
    again = tracker.init_tracker(frames[0], pose, sc.target_size)
    assert np.array_equal(filt.templates, again.templates)
    with pytest.raises(OutOfViewError):
        tracker.init_tracker(frames[0], KineticState(-500, 10), sc.target_size)


def test_noiseless_fixed_point(static_scene):
    sc, frames, pose = static_scene
    cfg = FilterConfig(n_particles=20, template_noise=ZERO_TEMPLATE)
    est = tracker.run([frames[0]] * 6, pose, sc.target_size, cfg, ZERO_MOTION)
    for e in est:
        assert e.state.to_array() == pytest.approx(pose.to_array(), abs=1e-12)
        assert np.allclose(e.template, est[0].template, rtol=1e-10)


def test_step_invariants(static_scene):
    sc, frames, pose = static_scene
    cfg = FilterConfig(n_particles=60, seed=9)
    filt = tracker.init_tracker(frames[0], pose, sc.target_size, cfg)
    for frame in frames[1:]:
        est = tracker.step(filt, frame)
        assert abs(filt.weights.sum() - 1.0) < 1e-12
        assert 0 < est.ess <= cfg.n_particles + 1e-9
        assert all(spd.is_spd(c) for c in filt.templates)
        if np.allclose(filt.log_weights, -np.log(cfg.n_particles)):
            assert filt.ess == pytest.approx(cfg.n_particles)


def test_forced_resampling_resets_ess(static_scene):
    sc, frames, pose = static_scene
    cfg = FilterConfig(n_particles=40, resample_ess_frac=1.0)
    filt = tracker.init_tracker(frames[0], pose, sc.target_size, cfg)
    est = tracker.step(filt, frames[1])
    assert est.ess < 40
    assert filt.ess == pytest.approx(40.0, rel=1e-12)


def test_templates_follow_log_walk(static_scene):
    # no resampling: particle i's template is exactly one walk step from C0 keyed by (frame, i)
    sc, frames, pose = static_scene
    cfg = FilterConfig(n_particles=8, resample_ess_frac=1e-9)
    filt = tracker.init_tracker(frames[0], pose, sc.target_size, cfg)
    c0 = filt.templates[0].copy()
    tracker.step(filt, frames[1])
    for i in range(8):
        assert np.array_equal(filt.templates[i], spd.sample_log_walk(c0, cfg.template_noise, (1, i)))


def test_determinism(static_scene):
    sc, frames, pose = static_scene
    cfg = FilterConfig(n_particles=30, seed=123)
    a = tracker.run(frames, pose, sc.target_size, cfg)
    b = tracker.run(frames, pose, sc.target_size, cfg)
    for ea, eb in zip(a, b):
        assert np.array_equal(ea.state.to_array(), eb.state.to_array())
        assert np.array_equal(ea.template, eb.template)
        assert ea.ess == eb.ess
    c = tracker.run(frames, pose, sc.target_size, FilterConfig(n_particles=30, seed=124))
    assert not np.array_equal(a[-1].state.to_array(), c[-1].state.to_array())


def test_out_of_view_particles_are_killed(static_scene):
    sc, frames, pose = static_scene
    cfg = FilterConfig(n_particles=10)
    filt = tracker.init_tracker(frames[0], pose, sc.target_size, cfg)
    filt.states[:5, 0] = -1000.0
    filt.states[:5, 2] = 0.0
    tracker.step(filt, frames[1])
    assert np.all(filt.states[:, 0] > -500)


def test_track_lost(static_scene):
    sc, frames, pose = static_scene
    filt = tracker.init_tracker(frames[0], pose, sc.target_size, FilterConfig(n_particles=5))
    filt.states[:, 0] = -1000.0
    before = filt.states.copy()
    with pytest.raises(TrackLostError) as info:
        tracker.step(filt, frames[1])
    assert info.value.last_estimate is filt.last_estimate
    assert np.array_equal(filt.states, before)


def _square_frames(side: float, n: int, x0: float, y0: float, vx: float, shape=(160, 320)) -> list[np.ndarray]:
    """Bright anti-aliased square over the synthetic background, plus pixel noise."""
    H, W = shape
    yy, xx = np.mgrid[0:H, 0:W].astype(float)
    base = 0.5 * synth.background_texture(0, W, H)
    out = []
    for t in range(n):
        cx = x0 + vx * t
        cov_x = np.clip(np.minimum(xx + 0.5, cx + side / 2) - np.maximum(xx - 0.5, cx - side / 2), 0, 1)
        cov_y = np.clip(np.minimum(yy + 0.5, y0 + side / 2) - np.maximum(yy - 0.5, y0 - side / 2), 0, 1)
        a = cov_x * cov_y
        noise = 0.02 * crng.stream(1, t, tag=crng.TAG_SYNTH).standard_normal((H, W))
        out.append(np.clip(base * (1 - a) + 0.9 * a + noise, 0.0, 1.0))
    return out


def test_moving_square():
    frames = _square_frames(32, 100, 50.0, 80.0, 2.0)
    est = tracker.run(frames, KineticState(50.0, 80.0), (32, 32), FilterConfig())
    err = np.abs(np.array([e.state.x for e in est]) - (50.0 + 2.0 * np.arange(100)))
    assert err.max() < 2.0


def test_multi_hypothesis_survival():
    # Static pose and no kinetic noise, so weights differ only through the
    # templates. After an appearance switch the resampled template cloud
    # drifts toward the new look and ends up closer to it than the pre-switch
    # estimate. The drift is slow, so the check is made 60 frames after the switch.
    switch = 5
    sc = synth.SynthScenario(width=120, height=120, start=(60.0, 60.0), n_frames=90, switch_frame=switch, noise_sigma=0.0)
    frames, _ = synth.synth_sequence(sc)
    pose = synth.scenario_poses(sc)[0]
    cfg = FilterConfig()
    filt = tracker.init_tracker(frames[0], pose, sc.target_size, cfg, ZERO_MOTION)
    for t in range(1, switch):
        tracker.step(filt, frames[t])
    pre = filt.last_estimate.template
    new = descriptor_from_state(frames[switch], pose, cfg.descriptor, filt.extent)
    t = switch
    while t < switch + 60 or not np.allclose(filt.log_weights, -np.log(cfg.n_particles)):
        tracker.step(filt, frames[t])
        t += 1
    cloud = np.mean(spd.geodesic_distance(filt.templates, np.broadcast_to(new, filt.templates.shape)))
    assert cloud < spd.geodesic_distance(pre, new)
