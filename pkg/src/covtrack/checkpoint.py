"""Plain-text save/restore of a ``FilterState``.

Layout::

    covtrack-checkpoint 1
    key=value lines          (configuration echo, extent, frame index)
    estimate.state=...
    estimate.ess=...
    estimate.template
    <matrix block>
    particles=<n>
    particle=<i> <x> <y> <vx> <vy> <h> <theta> <log_weight>
    <matrix block>
    ...

Floats use 17 significant digits, so a save/load round trip is exact and a
resumed run is bit-identical to an uninterrupted one.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from . import spd
from .descriptor import DescriptorConfig
from .errors import ContractError
from .state import KineticState
from .tracker import Estimate, FilterConfig, FilterState, MotionConfig

MAGIC = "covtrack-checkpoint 1"


def _fmt(values) -> str:
    return " ".join(f"{float(v):.17g}" for v in np.ravel(values))


def _floats(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split()])


def dumps(filt: FilterState) -> str:
    cfg, motion = filt.cfg, filt.motion
    out = io.StringIO()
    w = out.write
    w(MAGIC + "\n")
    w(f"filter.n_particles={cfg.n_particles}\n")
    w(f"filter.obs_sigma={cfg.obs_sigma:.17g}\n")
    w(f"filter.resample_ess_frac={cfg.resample_ess_frac:.17g}\n")
    w(f"filter.seed={cfg.seed}\n")
    w(f"filter.template_seed={cfg.template_noise.rng_seed}\n")
    w(f"filter.template_sigma={_fmt(cfg.template_noise.sigma)}\n")
    w(f"descriptor.patch_side={cfg.descriptor.patch_side}\n")
    w(f"descriptor.regularization_eps={cfg.descriptor.regularization_eps:.17g}\n")
    w(f"motion.A={_fmt(motion.A)}\n")
    w(f"motion.noise_small={_fmt(motion.noise_small)}\n")
    w(f"motion.noise_large={_fmt(motion.noise_large)}\n")
    w(f"motion.jump_prob={_fmt(motion.jump_prob)}\n")
    w(f"extent={_fmt(filt.extent)}\n")
    w(f"frame_index={filt.frame_index}\n")
    est = filt.last_estimate
    w(f"estimate.frame_index={est.frame_index}\n")
    w(f"estimate.state={_fmt(est.state.to_array())}\n")
    w(f"estimate.ess={est.ess:.17g}\n")
    w("estimate.template\n")
    w(spd.format_matrix(est.template))
    w(f"particles={filt.n}\n")
    for i in range(filt.n):
        w(f"particle={i} {_fmt(filt.states[i])} {filt.log_weights[i]:.17g}\n")
        w(spd.format_matrix(filt.templates[i]))
    return out.getvalue()


def _take_matrix(lines: list[str], pos: int) -> tuple[np.ndarray, int]:
    try:
        dim = int(lines[pos])
    except (IndexError, ValueError) as exc:
        raise ContractError(f"checkpoint: expected matrix header at line {pos + 1}") from exc
    block = "\n".join(lines[pos : pos + dim + 1])
    return spd.parse_matrix(block), pos + dim + 1


def loads(text: str) -> FilterState:
    lines = text.splitlines()
    if not lines or lines[0].strip() != MAGIC:
        raise ContractError("not a covtrack checkpoint")
    kv: dict[str, str] = {}
    pos = 1
    while pos < len(lines) and lines[pos] != "estimate.template":
        key, sep, value = lines[pos].partition("=")
        if not sep:
            raise ContractError(f"checkpoint: malformed line {pos + 1}: {lines[pos]!r}")
        kv[key] = value
        pos += 1
    try:
        tmpl, pos = _take_matrix(lines, pos + 1)
        key, _, value = lines[pos].partition("=")
        if key != "particles":
            raise ContractError(f"checkpoint: expected particle count at line {pos + 1}")
        n = int(value)
        pos += 1
        states = np.empty((n, 6))
        log_weights = np.empty(n)
        templates = np.empty((n, 9, 9))
        for i in range(n):
            key, _, value = lines[pos].partition("=")
            fields = value.split()
            if key != "particle" or int(fields[0]) != i or len(fields) != 8:
                raise ContractError(f"checkpoint: malformed particle record at line {pos + 1}")
            states[i] = [float(v) for v in fields[1:7]]
            log_weights[i] = float(fields[7])
            templates[i], pos = _take_matrix(lines, pos + 1)

        sigma = _floats(kv["filter.template_sigma"])
        d = int(round(np.sqrt(sigma.size)))
        cfg = FilterConfig(
            n_particles=int(kv["filter.n_particles"]),
            obs_sigma=float(kv["filter.obs_sigma"]),
            template_noise=spd.NoiseSpec(sigma.reshape(d, d), int(kv["filter.template_seed"])),
            descriptor=DescriptorConfig(
                patch_side=int(kv["descriptor.patch_side"]),
                regularization_eps=float(kv["descriptor.regularization_eps"]),
            ),
            resample_ess_frac=float(kv["filter.resample_ess_frac"]),
            seed=int(kv["filter.seed"]),
        )
        motion = MotionConfig(
            A=_floats(kv["motion.A"]).reshape(6, 6),
            noise_small=tuple(_floats(kv["motion.noise_small"])),
            noise_large=tuple(_floats(kv["motion.noise_large"])),
            jump_prob=tuple(_floats(kv["motion.jump_prob"])),
        )
        extent = tuple(_floats(kv["extent"]))
        est = Estimate(
            int(kv["estimate.frame_index"]),
            KineticState.from_array(_floats(kv["estimate.state"])),
            spd.as_spd(tmpl),
            float(kv["estimate.ess"]),
        )
        frame_index = int(kv["frame_index"])
    except KeyError as exc:
        raise ContractError(f"checkpoint: missing key {exc}") from exc
    except (IndexError, ValueError) as exc:
        raise ContractError(f"checkpoint: {exc}") from exc
    if n != cfg.n_particles or len(extent) != 2:
        raise ContractError("checkpoint: particle count or extent inconsistent with configuration")
    return FilterState(cfg, motion, extent, frame_index, states, templates, log_weights, est)


def save(filt: FilterState, path: str | Path) -> None:
    from .io import atomic_write_text

    atomic_write_text(path, dumps(filt))


def load(path: str | Path) -> FilterState:
    return loads(Path(path).read_text())
