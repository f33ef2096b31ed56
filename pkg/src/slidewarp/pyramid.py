"""Pyramidal image model, manifest-based storage, and region extraction.

A pyramid is an ordered list of RGB8 rasters; level 0 is the full
resolution and each level L is an area-averaged downsample by 2**L.
All public coordinates are level-0 pixels; a region's center is level-0
regardless of the level it is read at (level-L coordinate = level-0 / factor).

On-disk layout: a directory with ``manifest.json`` plus one lossless PNG
per level::

    { "mpp": float,
      "levels": [ { "file": str, "downsample": float,
                    "width": int, "height": int } ] }

Out-of-bounds reads pad with white (255, 255, 255): slide background is
white, so edge landmarks need no special casing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .errors import ParseError

WHITE = 255


@dataclass(frozen=True)
class PyramidalImage:
    """Immutable multi-level raster. Safe for concurrent reads."""

    levels: tuple[np.ndarray, ...]
    downsample_factors: tuple[float, ...]
    microns_per_pixel: float = 1.0

    def __post_init__(self):
        if not self.levels:
            raise ValueError("pyramid needs at least one level")
        if len(self.levels) != len(self.downsample_factors):
            raise ValueError("one downsample factor per level required")
        if self.downsample_factors[0] != 1.0:
            raise ValueError("level-0 downsample factor must be 1.0")
        if any(b <= a for a, b in zip(self.downsample_factors, self.downsample_factors[1:])):
            raise ValueError("downsample factors must be strictly increasing")
        for lvl in self.levels:
            if lvl.ndim != 3 or lvl.shape[2] != 3 or lvl.dtype != np.uint8:
                raise ValueError("levels must be RGB8 rasters")

    @property
    def width_0(self) -> int:
        return self.levels[0].shape[1]

    @property
    def height_0(self) -> int:
        return self.levels[0].shape[0]

    @property
    def level_count(self) -> int:
        return len(self.levels)

    def level_dims(self, level: int) -> tuple[int, int]:
        """(width, height) of a level."""
        lvl = self.levels[level]
        return lvl.shape[1], lvl.shape[0]


@dataclass(frozen=True)
class Region:
    """A (w, h) read window centered on a level-0 coordinate."""

    center: tuple[float, float]
    size_px: tuple[int, int]
    level: int = 0

    def __post_init__(self):
        w, h = self.size_px
        if w < 1 or h < 1:
            raise ValueError("region size must be positive")


def _level_dim(dim0: int, factor: float) -> int:
    # round-half-up from the level-0 dimension; never iterate halving,
    # which drifts for odd sizes
    return int(np.floor(dim0 / factor + 0.5))


def build_pyramid(base_raster: np.ndarray, level_count: int) -> PyramidalImage:
    """Build a pyramid with per-level downsample factor 2**L.

    Each level is produced by area-averaged resampling of the base raster
    to round(dim0 / 2**L). Rejects level counts that would shrink any
    dimension below 1 pixel.
    """
    base = np.asarray(base_raster)
    if base.ndim == 2:
        base = np.dstack([base] * 3)
    if base.size == 0:
        raise ValueError("base raster is empty")
    base = base.astype(np.uint8, copy=False)
    if level_count < 1:
        raise ValueError("level_count must be >= 1")
    h0, w0 = base.shape[:2]
    levels = [base]
    factors = [1.0]
    for lev in range(1, level_count):
        f = float(2**lev)
        w, h = _level_dim(w0, f), _level_dim(h0, f)
        if w < 1 or h < 1:
            raise ValueError(f"level {lev} would be smaller than 1x1 ({w}x{h})")
        levels.append(cv2.resize(base, (w, h), interpolation=cv2.INTER_AREA))
        factors.append(f)
    return PyramidalImage(tuple(levels), tuple(factors))


def region_origin(img: PyramidalImage, region: Region) -> tuple[int, int]:
    """Integer top-left corner of the crop window, in level-L pixels.

    The crop is aligned so the region center falls on the raster center;
    IPR uses this origin to compose patch-space corrections back into
    level-0 transforms without re-deriving the rounding.
    """
    f = img.downsample_factors[region.level]
    cx, cy = region.center
    w, h = region.size_px
    x0 = int(np.floor(cx / f - w / 2 + 0.5))
    y0 = int(np.floor(cy / f - h / 2 + 0.5))
    return x0, y0


def crop_padded(raster: np.ndarray, x0: int, y0: int, w: int, h: int,
                fill: int = WHITE) -> np.ndarray:
    """Crop [y0:y0+h, x0:x0+w] with constant padding outside bounds."""
    out_shape = (h, w) + raster.shape[2:]
    out = np.full(out_shape, fill, dtype=raster.dtype)
    src_x0, src_y0 = max(x0, 0), max(y0, 0)
    src_x1, src_y1 = min(x0 + w, raster.shape[1]), min(y0 + h, raster.shape[0])
    if src_x1 > src_x0 and src_y1 > src_y0:
        out[src_y0 - y0:src_y1 - y0, src_x0 - x0:src_x1 - x0] = \
            raster[src_y0:src_y1, src_x0:src_x1]
    return out


def read_region(img: PyramidalImage, region: Region) -> np.ndarray:
    """Extract a (h, w, 3) raster at the requested level, white-padded."""
    if not 0 <= region.level < img.level_count:
        raise ValueError(f"level {region.level} out of range")
    x0, y0 = region_origin(img, region)
    w, h = region.size_px
    return crop_padded(img.levels[region.level], x0, y0, w, h)


def thumbnail(img: PyramidalImage, max_dim: int) -> np.ndarray:
    """Resample the highest pyramid level so max(w, h) == max_dim."""
    if max_dim < 16:
        raise ValueError("max_dim must be >= 16")
    top = img.levels[-1]
    h, w = top.shape[:2]
    if w >= h:
        out_w, out_h = max_dim, max(1, int(round(h * max_dim / w)))
    else:
        out_h, out_w = max_dim, max(1, int(round(w * max_dim / h)))
    interp = cv2.INTER_AREA if out_w <= w else cv2.INTER_LINEAR
    return cv2.resize(top, (out_w, out_h), interpolation=interp)


def to_gray(raster: np.ndarray) -> np.ndarray:
    """RGB8 raster -> single-channel uint8 luma."""
    if raster.ndim == 2:
        return raster
    return cv2.cvtColor(raster, cv2.COLOR_RGB2GRAY)


def save_pyramid(img: PyramidalImage, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for lev, (raster, f) in enumerate(zip(img.levels, img.downsample_factors)):
        name = f"level_{lev}.png"
        ok = cv2.imwrite(str(out / name), cv2.cvtColor(raster, cv2.COLOR_RGB2BGR))
        if not ok:
            raise OSError(f"failed to write {out / name}")
        entries.append({
            "file": name,
            "downsample": float(f),
            "width": int(raster.shape[1]),
            "height": int(raster.shape[0]),
        })
    manifest = {"mpp": float(img.microns_per_pixel), "levels": entries}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def load_pyramid(in_dir: str | Path) -> PyramidalImage:
    root = Path(in_dir)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise ParseError(f"no manifest.json in {root}")
    try:
        manifest = json.loads(manifest_path.read_text())
        mpp = float(manifest["mpp"])
        entries = manifest["levels"]
        if not entries:
            raise ParseError(f"{manifest_path}: empty level list")
        levels, factors = [], []
        for e in entries:
            raster = cv2.imread(str(root / e["file"]), cv2.IMREAD_COLOR)
            if raster is None:
                raise ParseError(f"cannot read level file {e['file']} in {root}")
            raster = cv2.cvtColor(raster, cv2.COLOR_BGR2RGB)
            if raster.shape[1] != int(e["width"]) or raster.shape[0] != int(e["height"]):
                raise ParseError(f"{e['file']}: size does not match manifest")
            levels.append(raster)
            factors.append(float(e["downsample"]))
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise ParseError(f"malformed manifest in {root}: {exc}") from exc
    return PyramidalImage(tuple(levels), tuple(factors), mpp)
