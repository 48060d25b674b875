"""Flat ``section.key=value`` run configuration.

Blank lines and ``#`` comments are ignored. Unknown keys, duplicate keys and
unparsable values raise ``ConfigError``. Vector values are comma or space
separated. Relative paths are resolved against the config file's directory.

Example::

    input.frames=frames/*.png
    init.x=60
    init.y=70
    init.width=48
    init.height=48
    filter.n_particles=200
    filter.seed=7
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np

from . import spd
from .descriptor import DescriptorConfig
from .errors import ContractError
from .state import KineticState
from .synth import SynthScenario, acceptance_scenario
from .tracker import FilterConfig, MotionConfig, constant_velocity_transition


class ConfigError(ContractError):
    """Malformed, incomplete or inconsistent configuration."""


REQUIRED = object()


def _vec(n: int | None = None) -> Callable[[str], tuple[float, ...]]:
    def parse(text: str) -> tuple[float, ...]:
        v = tuple(float(x) for x in text.replace(",", " ").split())
        if n is not None and len(v) != n:
            raise ValueError(f"expected {n} numbers, got {len(v)}")
        return v

    return parse


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise ValueError("must be an unsigned 64-bit integer")
    return v


def _keys(n: int) -> Callable[[str], tuple[tuple[float, ...], ...]]:
    """``frame:v1[:v2];frame:...`` keyframe lists."""

    def parse(text: str) -> tuple[tuple[float, ...], ...]:
        out = []
        for item in text.split(";"):
            if item.strip():
                v = tuple(float(x) for x in item.split(":"))
                if len(v) != n:
                    raise ValueError(f"keyframe {item.strip()!r} needs {n} fields")
                out.append(v)
        if not out:
            raise ValueError("no keyframes")
        return tuple(out)

    return parse


def _optional_int(text: str) -> int | None:
    return None if text.strip().lower() in ("", "none") else int(text)


# key -> (parser, default)
TRACK_SCHEMA: dict[str, tuple[Callable[[str], Any], Any]] = {
    "input.frames": (str, REQUIRED),
    "init.x": (float, REQUIRED),
    "init.y": (float, REQUIRED),
    "init.width": (float, REQUIRED),
    "init.height": (float, REQUIRED),
    "init.vx": (float, 0.0),
    "init.vy": (float, 0.0),
    "init.h": (float, 1.0),
    "init.theta": (float, 0.0),
    "filter.n_particles": (int, FilterConfig.n_particles),
    "filter.obs_sigma": (float, FilterConfig.obs_sigma),
    "filter.template_sigma": (float, None),
    "filter.template_seed": (_u64, 0),
    "filter.resample_ess_frac": (float, FilterConfig.resample_ess_frac),
    "filter.seed": (_u64, FilterConfig.seed),
    "motion.A": (_vec(36), tuple(constant_velocity_transition().ravel())),
    "motion.noise_small": (_vec(6), MotionConfig.noise_small),
    "motion.noise_large": (_vec(6), MotionConfig.noise_large),
    "motion.jump_prob": (_vec(2), MotionConfig.jump_prob),
    "descriptor.patch_side": (int, DescriptorConfig.patch_side),
    "descriptor.regularization_eps": (float, DescriptorConfig.regularization_eps),
    "output.dir": (str, "."),
    "output.track_csv": (str, "track.csv"),
    "output.checkpoint": (str, "checkpoint.txt"),
    "output.overlay": (_bool, False),
    "output.overlay_dir": (str, "overlay"),
    "output.overlay_particles": (int, 0),
}

_ACC = acceptance_scenario()

SYNTH_SCHEMA: dict[str, tuple[Callable[[str], Any], Any]] = {
    "scenario.width": (int, _ACC.width),
    "scenario.height": (int, _ACC.height),
    "scenario.target_width": (int, _ACC.target_size[0]),
    "scenario.target_height": (int, _ACC.target_size[1]),
    "scenario.texture_seed": (_u64, _ACC.texture_seed),
    "scenario.n_frames": (int, _ACC.n_frames),
    "scenario.start": (_vec(2), _ACC.start),
    "scenario.velocity_keys": (_keys(3), _ACC.velocity_keys),
    "scenario.rotation_keys": (_keys(2), _ACC.rotation_keys),
    "scenario.scale_rate": (float, _ACC.scale_rate),
    "scenario.switch_frame": (_optional_int, _ACC.switch_frame),
    "scenario.noise_sigma": (float, _ACC.noise_sigma),
    "scenario.margin": (float, _ACC.margin),
    "output.dir": (str, "."),
    "output.frame_pattern": (str, "frame_{:04d}.png"),
    "output.gt_csv": (str, "gt.csv"),
    "output.track_config": (str, "track.cfg"),
}

PATH_KEYS = {"input.frames", "output.dir"}


def parse_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Split ``key=value`` lines into a mapping (no schema checks)."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw.strip()!r}")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def resolve(raw: Mapping[str, str], schema: Mapping, base_dir: Path | None = None,
            source: str = "<config>") -> dict[str, Any]:
    """Apply a schema: reject unknown keys, parse values, fill defaults."""
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"{source}: unknown key(s): {', '.join(unknown)}")
    out: dict[str, Any] = {}
    for key, (parser, default) in schema.items():
        if key in raw:
            try:
                out[key] = parser(raw[key])
            except ValueError as exc:
                raise ConfigError(f"{source}: bad value for {key}: {exc}") from exc
        elif default is REQUIRED:
            raise ConfigError(f"{source}: missing required key {key}")
        else:
            out[key] = default
    if base_dir is not None:
        for key in PATH_KEYS & set(out):
            p = Path(out[key])
            if not p.is_absolute():
                out[key] = str(base_dir / p)
    return out


def load(path: str | Path, schema: Mapping, overrides: Mapping[str, str] | None = None) -> dict[str, Any]:
    """Read, merge command-line overrides (already ``key -> text``) and resolve."""
    path = Path(path)
    raw = parse_text(path.read_text(), str(path))
    raw.update(overrides or {})
    return resolve(raw, schema, path.parent, str(path))


@dataclass(frozen=True)
class RunConfig:
    frames: str
    init_state: KineticState
    extent: tuple[float, float]
    filter: FilterConfig
    motion: MotionConfig
    output_dir: Path
    track_csv: str
    checkpoint: str
    overlay: bool
    overlay_dir: str
    overlay_particles: int


def run_config(values: Mapping[str, Any]) -> RunConfig:
    """Build typed objects from resolved track values, mapping contract errors to ``ConfigError``."""
    v = values
    try:
        tsig = v["filter.template_sigma"]
        noise = FilterConfig().template_noise
        template_noise = spd.NoiseSpec(
            noise.sigma if tsig is None else np.full_like(noise.sigma, tsig), v["filter.template_seed"]
        )
        fcfg = FilterConfig(
            n_particles=v["filter.n_particles"],
            obs_sigma=v["filter.obs_sigma"],
            template_noise=template_noise,
            descriptor=DescriptorConfig(v["descriptor.patch_side"], v["descriptor.regularization_eps"]),
            resample_ess_frac=v["filter.resample_ess_frac"],
            seed=v["filter.seed"],
        )
        motion = MotionConfig(
            A=np.reshape(v["motion.A"], (6, 6)),
            noise_small=v["motion.noise_small"],
            noise_large=v["motion.noise_large"],
            jump_prob=v["motion.jump_prob"],
        )
        init = KineticState(v["init.x"], v["init.y"], v["init.vx"], v["init.vy"], v["init.h"], v["init.theta"])
        extent = (v["init.width"], v["init.height"])
        if min(extent) <= 0:
            raise ContractError("init.width and init.height must be positive")
        if v["output.overlay_particles"] < 0:
            raise ContractError("output.overlay_particles must be non-negative")
    except ContractError as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(
        frames=v["input.frames"],
        init_state=init,
        extent=extent,
        filter=fcfg,
        motion=motion,
        output_dir=Path(v["output.dir"]),
        track_csv=v["output.track_csv"],
        checkpoint=v["output.checkpoint"],
        overlay=v["output.overlay"],
        overlay_dir=v["output.overlay_dir"],
        overlay_particles=v["output.overlay_particles"],
    )


def synth_scenario(values: Mapping[str, Any]) -> SynthScenario:
    v = values
    try:
        return SynthScenario(
            width=v["scenario.width"],
            height=v["scenario.height"],
            target_size=(v["scenario.target_width"], v["scenario.target_height"]),
            texture_seed=v["scenario.texture_seed"],
            n_frames=v["scenario.n_frames"],
            start=v["scenario.start"],
            velocity_keys=v["scenario.velocity_keys"],
            rotation_keys=v["scenario.rotation_keys"],
            scale_rate=v["scenario.scale_rate"],
            switch_frame=v["scenario.switch_frame"],
            noise_sigma=v["scenario.noise_sigma"],
            margin=v["scenario.margin"],
        )
    except ContractError as exc:
        raise ConfigError(str(exc)) from exc
