"""File formats: frames, overlays and the CSV tables.

Every writer goes through a temporary file in the destination directory and
``os.replace``, so an output file is either complete or absent.
"""

from __future__ import annotations

import contextlib
import csv
import glob
import io
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image, ImageDraw

from .descriptor import region_corners
from .errors import ContractError
from .metrics import GroundTruth
from .state import KineticState

GT_HEADER = ["frame", "gx", "gy", "Hx", "Hy"]
TRACK_HEADER = ["frame", "x", "y", "vx", "vy", "h", "theta", "ess"]

LUMA = np.array([0.299, 0.587, 0.114])


# -- atomic writes ----------------------------------------------------------------


@contextlib.contextmanager
def _atomic(path: str | Path, mode: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, mode, **({"newline": ""} if "b" not in mode else {})) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    with _atomic(path, "w") as fh:
        fh.write(text)


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    with _atomic(path, "wb") as fh:
        fh.write(data)


# -- images -----------------------------------------------------------------------


def read_frame(path: str | Path) -> np.ndarray:
    """Load a grayscale frame scaled to [0, 1].

    Any format Pillow reads (PNG, PGM/PPM, ...). Colour input is converted
    with Rec. 601 luma weights; 16-bit input is divided by 65535.
    """
    with Image.open(path) as im:
        im.load()
        if im.mode in ("I;16", "I;16B", "I;16L", "I"):
            arr = np.asarray(im, dtype=np.float64)
            return np.clip(arr / 65535.0, 0.0, 1.0)
        if im.mode == "L":
            return np.asarray(im, dtype=np.float64) / 255.0
        rgb = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
        return rgb @ LUMA


def list_frames(pattern: str | Path) -> list[Path]:
    """Sorted paths matching a glob pattern, or the image files of a directory."""
    p = Path(pattern)
    if p.is_dir():
        paths = [q for q in p.iterdir() if q.suffix.lower() in (".png", ".pgm", ".ppm", ".bmp", ".tif", ".tiff")]
    else:
        paths = [Path(q) for q in glob.glob(str(p))]
    return sorted(paths)


def write_frame(path: str | Path, img: np.ndarray) -> None:
    """Store a [0, 1] image as a 16-bit grayscale PNG."""
    arr = np.round(np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0) * 65535.0).astype(np.uint16)
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def write_overlay(
    path: str | Path,
    img: np.ndarray,
    estimate: KineticState,
    extent: tuple[float, float],
    particles: np.ndarray | None = None,
) -> None:
    """Draw the estimated region (red) and optional particle regions (green) on a frame."""
    gray = np.round(np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)
    im = Image.fromarray(gray).convert("RGB")
    draw = ImageDraw.Draw(im)
    if particles is not None:
        for corners in region_corners(np.asarray(particles), extent):
            draw.polygon([tuple(c) for c in corners], outline=(0, 200, 0))
    corners = region_corners(estimate.to_array(), extent)
    draw.polygon([tuple(c) for c in corners], outline=(255, 0, 0))
    buf = io.BytesIO()
    im.save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


# -- CSV tables -------------------------------------------------------------------


def _g(v: float) -> str:
    return f"{float(v):.17g}"


def _write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with _atomic(path, "w") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _read_csv(path: str | Path, header: Sequence[str]) -> list[list[str]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != list(header):
        got = rows[0] if rows else []
        raise ContractError(f"{path}: expected header {','.join(header)}, got {','.join(got)}")
    body = [r for r in rows[1:] if r]
    for k, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise ContractError(f"{path}:{k}: expected {len(header)} fields, got {len(r)}")
    return body


def write_gt_csv(path: str | Path, gt: GroundTruth) -> None:
    _write_csv(
        path,
        GT_HEADER,
        ([int(f), _g(x), _g(y), _g(hx), _g(hy)] for f, x, y, hx, hy in zip(gt.frame, gt.gx, gt.gy, gt.Hx, gt.Hy)),
    )


def read_gt_csv(path: str | Path) -> GroundTruth:
    rows = _read_csv(path, GT_HEADER)
    try:
        cols = list(zip(*rows)) if rows else [()] * 5
        return GroundTruth(
            frame=np.array([int(v) for v in cols[0]], dtype=np.int64),
            gx=np.array(cols[1], dtype=np.float64),
            gy=np.array(cols[2], dtype=np.float64),
            Hx=np.array(cols[3], dtype=np.float64),
            Hy=np.array(cols[4], dtype=np.float64),
        )
    except ValueError as exc:
        raise ContractError(f"{path}: {exc}") from exc


def write_track_csv(path: str | Path, estimates) -> None:
    rows = []
    for e in estimates:
        s = e.state
        rows.append([int(e.frame_index), *(_g(v) for v in (s.x, s.y, s.vx, s.vy, s.h, s.theta, e.ess))])
    _write_csv(path, TRACK_HEADER, rows)


def read_track_csv(path: str | Path) -> list[tuple[int, float, float]]:
    """``(frame, x, y)`` triples, the part of a track that scoring needs."""
    rows = _read_csv(path, TRACK_HEADER)
    try:
        return [(int(r[0]), float(r[1]), float(r[2])) for r in rows]
    except ValueError as exc:
        raise ContractError(f"{path}: {exc}") from exc


def write_mds_csv(path: str | Path, coords: np.ndarray, labels: Sequence[str]) -> None:
    coords = np.atleast_2d(np.asarray(coords, dtype=np.float64))
    header = ["index", "label", *(f"c{k + 1}" for k in range(coords.shape[1]))]
    _write_csv(path, header, ([i, lab, *(_g(v) for v in row)] for i, (lab, row) in enumerate(zip(labels, coords))))


PATCH_HEADER = ["frame", "label", "x", "y", "h", "theta"]


def read_patch_list(path: str | Path) -> list[tuple[str, str, KineticState]]:
    """Rows ``frame,label,x,y,h,theta``; ``frame`` is an image path relative to the list."""
    rows = _read_csv(path, PATCH_HEADER)
    base = Path(path).parent
    out = []
    for k, r in enumerate(rows, start=2):
        label = r[1].strip()
        if label not in ("target", "background"):
            raise ContractError(f"{path}:{k}: label must be 'target' or 'background', got {label!r}")
        try:
            pose = KineticState(float(r[2]), float(r[3]), h=float(r[4]), theta=float(r[5]))
        except ValueError as exc:
            raise ContractError(f"{path}:{k}: {exc}") from exc
        out.append((str(base / r[0].strip()), label, pose))
    return out


def write_patch_list(path: str | Path, rows: Sequence[tuple[str, str, KineticState]]) -> None:
    _write_csv(path, PATCH_HEADER, ([f, lab, _g(p.x), _g(p.y), _g(p.h), _g(p.theta)] for f, lab, p in rows))
