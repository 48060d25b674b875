from __future__ import annotations

import numpy as np
import pytest

from covtrack import config
from covtrack.tracker import FilterConfig, MotionConfig

MINIMAL = "input.frames=frames/*.png\ninit.x=10\ninit.y=20\ninit.width=16\ninit.height=12\n"


def _write(tmp_path, text):
    p = tmp_path / "run.cfg"
    p.write_text(text)
    return p


def test_minimal_config_gets_defaults(tmp_path):
    rc = config.run_config(config.load(_write(tmp_path, MINIMAL), config.TRACK_SCHEMA))
    assert rc.frames == str(tmp_path / "frames/*.png")
    assert rc.init_state.x == 10 and rc.init_state.h == 1.0
    assert rc.extent == (16.0, 12.0)
    default = FilterConfig()
    assert rc.filter.n_particles == default.n_particles
    assert rc.filter.obs_sigma == default.obs_sigma
    assert np.array_equal(rc.filter.template_noise.sigma, default.template_noise.sigma)
    assert np.array_equal(rc.motion.A, MotionConfig().A)
    assert rc.overlay is False


def test_values_and_comments(tmp_path):
    text = MINIMAL + "# comment\n\nfilter.n_particles = 50  # inline\nfilter.template_sigma=0.003\nmotion.jump_prob=0.8, 0.2\noutput.overlay=yes\n"
    rc = config.run_config(config.load(_write(tmp_path, text), config.TRACK_SCHEMA))
    assert rc.filter.n_particles == 50
    assert np.all(rc.filter.template_noise.sigma == 0.003)
    assert rc.motion.jump_prob == (0.8, 0.2)
    assert rc.overlay is True


def test_overrides_win(tmp_path):
    values = config.load(_write(tmp_path, MINIMAL + "filter.seed=3\n"), config.TRACK_SCHEMA, {"filter.seed": "9"})
    assert values["filter.seed"] == 9


@pytest.mark.parametrize(
    "text, message",
    [
        (MINIMAL + "filter.bogus=1\n", "unknown key"),
        (MINIMAL.replace("init.x=10\n", ""), "missing required key init.x"),
        (MINIMAL + "init.x=11\n", "duplicate key"),
        (MINIMAL + "filter.n_particles=many\n", "bad value"),
        (MINIMAL + "motion.jump_prob=0.5\n", "bad value"),
        (MINIMAL + "just some words\n", "expected key=value"),
        (MINIMAL + "filter.obs_sigma=-1\n", "obs_sigma"),
        (MINIMAL + "filter.seed=-1\n", "bad value"),
        (MINIMAL.replace("init.width=16", "init.width=0"), "positive"),
    ],
)
def test_errors(tmp_path, text, message):
    with pytest.raises(config.ConfigError, match=message):
        config.run_config(config.load(_write(tmp_path, text), config.TRACK_SCHEMA))


def test_synth_defaults_match_acceptance_scenario():
    from covtrack.synth import acceptance_scenario

    sc = config.synth_scenario(config.resolve({}, config.SYNTH_SCHEMA))
    assert sc == acceptance_scenario()


def test_synth_keyframes():
    raw = {"scenario.velocity_keys": "0:1:0; 10:2:1", "scenario.switch_frame": "50", "scenario.n_frames": "60"}
    sc = config.synth_scenario(config.resolve(raw, config.SYNTH_SCHEMA))
    assert sc.velocity_keys == ((0, 1, 0), (10, 2, 1))
    assert sc.switch_frame == 50
    with pytest.raises(config.ConfigError):
        config.resolve({"scenario.velocity_keys": "0:1"}, config.SYNTH_SCHEMA)
