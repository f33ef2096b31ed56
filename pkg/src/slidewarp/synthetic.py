"""Synthetic slide-pair generator with exact ground-truth warps.

Produces (source, target) pyramids from one base raster: the target is the
base resampled through an invertible analytic map composed of a global
affine, smooth Gaussian displacement bumps, and rigid horizontal band
shifts that imitate scanner misstitching, followed by a per-channel color
jitter. The forward map (level-0 source coordinate -> level-0 target
coordinate) is returned in closed form so registration error can be
measured without annotations.

Also provides a seeded tissue-like base raster (white background, stained
blob, nuclei speckle) so the whole pipeline can be exercised at desk scale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .affine import AffineTransform2D
from .errors import DegenerateTransform
from .pyramid import PyramidalImage, build_pyramid

_INVERT_ITERS = 6


@dataclass(frozen=True)
class DeformationSpec:
    """Fully determines the target slide given a base raster.

    ``bump_amplitude_px`` is the peak displacement of each Gaussian bump;
    ``tear_offset_px`` is the rigid x-shift applied inside each horizontal
    band. Bump centers/directions and band rows are drawn from ``seed``.
    ``color_gain``/``color_bias`` are per-channel (R, G, B).
    """

    global_affine: AffineTransform2D = field(default_factory=AffineTransform2D.identity)
    bump_count: int = 0
    bump_amplitude_px: float = 0.0
    bump_sigma_px: float = 1.0
    tear_count: int = 0
    tear_offset_px: float = 0.0
    color_gain: tuple[float, float, float] = (1.0, 1.0, 1.0)
    color_bias: tuple[float, float, float] = (0.0, 0.0, 0.0)
    seed: int = 0

    def __post_init__(self):
        if self.bump_count < 0 or self.tear_count < 0:
            raise ValueError("bump_count and tear_count must be non-negative")
        if self.bump_amplitude_px < 0:
            raise ValueError("bump_amplitude_px must be non-negative")
        if self.bump_sigma_px <= 0:
            raise ValueError("bump_sigma_px must be positive")

    def to_json(self) -> dict:
        return {
            "affine": self.global_affine.to_flat(),
            "bump_count": self.bump_count,
            "bump_amplitude_px": self.bump_amplitude_px,
            "bump_sigma_px": self.bump_sigma_px,
            "tear_count": self.tear_count,
            "tear_offset_px": self.tear_offset_px,
            "color_gain": list(self.color_gain),
            "color_bias": list(self.color_bias),
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DeformationSpec":
        return cls(
            global_affine=AffineTransform2D.from_flat(obj.get("affine", [1, 0, 0, 0, 1, 0])),
            bump_count=int(obj.get("bump_count", 0)),
            bump_amplitude_px=float(obj.get("bump_amplitude_px", 0.0)),
            bump_sigma_px=float(obj.get("bump_sigma_px", 1.0)),
            tear_count=int(obj.get("tear_count", 0)),
            tear_offset_px=float(obj.get("tear_offset_px", 0.0)),
            color_gain=tuple(obj.get("color_gain", (1.0, 1.0, 1.0))),
            color_bias=tuple(obj.get("color_bias", (0.0, 0.0, 0.0))),
            seed=int(obj.get("seed", 0)),
        )


class GroundTruthWarp:
    """Exact forward map p_source -> p_target for a synthesized pair.

    forward(p) = affine(p) + bumps(p) + tears(p), with bump/tear
    displacements evaluated in source coordinates.
    """

    def __init__(self, affine: AffineTransform2D,
                 bump_centers: np.ndarray, bump_dirs: np.ndarray,
                 bump_amplitude: float, bump_sigma: float,
                 tear_bands: np.ndarray, tear_offset: float):
        self.affine = affine
        self.bump_centers = np.asarray(bump_centers, dtype=np.float64).reshape(-1, 2)
        self.bump_dirs = np.asarray(bump_dirs, dtype=np.float64).reshape(-1, 2)
        self.bump_amplitude = float(bump_amplitude)
        self.bump_sigma = float(bump_sigma)
        self.tear_bands = np.asarray(tear_bands, dtype=np.float64).reshape(-1, 2)
        self.tear_offset = float(tear_offset)

    def displacement(self, points: np.ndarray) -> np.ndarray:
        """Non-rigid displacement at (n, 2) source points."""
        pts = np.atleast_2d(np.asarray(points))
        disp = np.zeros_like(pts, dtype=pts.dtype)
        if len(self.bump_centers):
            inv_two_sigma2 = 1.0 / (2.0 * self.bump_sigma**2)
            for c, u in zip(self.bump_centers, self.bump_dirs):
                d2 = (pts[:, 0] - c[0]) ** 2 + (pts[:, 1] - c[1]) ** 2
                w = self.bump_amplitude * np.exp(-d2 * inv_two_sigma2)
                disp[:, 0] += w * u[0]
                disp[:, 1] += w * u[1]
        for y0, y1 in self.tear_bands:
            in_band = (pts[:, 1] >= y0) & (pts[:, 1] < y1)
            disp[in_band, 0] += self.tear_offset
        return disp

    def forward(self, points: np.ndarray) -> np.ndarray:
        """Map (2,) or (n, 2) level-0 source coords to target coords."""
        pts = np.asarray(points, dtype=np.float64)
        single = pts.ndim == 1
        pts2 = np.atleast_2d(pts)
        out = self.affine.apply(pts2) + self.displacement(pts2)
        return out[0] if single else out

    def backward_grid(self, width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
        """Source coordinates sampled by each target pixel (float32 maps).

        Solves q = affine(p) + D(p) for p by fixed-point iteration; the
        displacement field is contractive whenever amplitude < sigma, and
        the tear bands are piecewise constant so they settle in one step
        except on the boundary rows.
        """
        qx, qy = np.meshgrid(np.arange(width, dtype=np.float32),
                             np.arange(height, dtype=np.float32))
        q = np.column_stack([qx.ravel(), qy.ravel()])
        inv = self.affine.invert()
        lin = inv.linear.T.astype(np.float32)
        off = inv.offset.astype(np.float32)
        p = q @ lin + off
        if len(self.bump_centers) or len(self.tear_bands):
            for _ in range(_INVERT_ITERS):
                p_new = (q - self.displacement(p)) @ lin + off
                delta = float(np.max(np.abs(p_new - p)))
                p = p_new
                if delta < 1e-3:
                    break
        return (p[:, 0].reshape(height, width).copy(),
                p[:, 1].reshape(height, width).copy())


def _draw_params(spec: DeformationSpec, width: int, height: int):
    rng = np.random.default_rng(spec.seed)
    centers = rng.uniform([0.1 * width, 0.1 * height],
                          [0.9 * width, 0.9 * height],
                          size=(spec.bump_count, 2))
    angles = rng.uniform(0.0, 2.0 * np.pi, size=spec.bump_count)
    dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    bands = []
    for _ in range(spec.tear_count):
        y0 = rng.uniform(0.15 * height, 0.75 * height)
        band_h = rng.uniform(height / 16, height / 8)
        bands.append((y0, y0 + band_h))
    return centers, dirs, np.asarray(bands, dtype=np.float64).reshape(-1, 2)


def synthesize_pair(base_raster: np.ndarray, spec: DeformationSpec,
                    level_count: int | None = None,
                    ) -> tuple[PyramidalImage, PyramidalImage, GroundTruthWarp]:
    """Build (source, target, ground_truth) pyramids from one base raster.

    Deterministic: identical base + spec give bit-identical outputs.
    ``level_count`` defaults to 4 levels (fewer on small rasters).
    """
    if abs(spec.global_affine.det) < 1e-6:
        raise DegenerateTransform("global affine is degenerate")
    base = np.asarray(base_raster, dtype=np.uint8)
    if base.ndim == 2:
        base = np.dstack([base] * 3)
    h, w = base.shape[:2]
    centers, dirs, bands = _draw_params(spec, w, h)
    gt = GroundTruthWarp(spec.global_affine, centers, dirs,
                         spec.bump_amplitude_px, spec.bump_sigma_px,
                         bands, spec.tear_offset_px)

    map_x, map_y = gt.backward_grid(w, h)
    target = cv2.remap(base, map_x, map_y, interpolation=cv2.INTER_LINEAR,
                       borderMode=cv2.BORDER_CONSTANT, borderValue=(255, 255, 255))
    gain = np.asarray(spec.color_gain, dtype=np.float32)
    bias = np.asarray(spec.color_bias, dtype=np.float32)
    if not (np.all(gain == 1.0) and np.all(bias == 0.0)):
        target = np.clip(target.astype(np.float32) * gain + bias, 0, 255).astype(np.uint8)

    if level_count is None:
        level_count = _max_levels(w, h)
    source = build_pyramid(base, level_count)
    target_pyr = build_pyramid(target, level_count)
    return source, target_pyr, gt


def _max_levels(w: int, h: int, cap: int = 4) -> int:
    levels = 1
    while levels < cap and min(w, h) / 2**levels >= 64:
        levels += 1
    return levels


def make_tissue_base(seed: int, size: tuple[int, int] = (2048, 2048),
                     nuclei_per_mpx: int = 12000) -> np.ndarray:
    """Seeded tissue-like RGB raster: white background, eosin-pink blob
    with smooth stain variation and dark nuclei speckle.

    Texture is present at all scales so keypoint detection, patch
    registration, and NMI behave the way they do on real stained tissue.
    """
    h, w = size[1], size[0]
    rng = np.random.default_rng(seed)

    # blobby tissue support: thresholded band-limited noise + center bias
    coarse = rng.standard_normal((h // 32 + 1, w // 32 + 1)).astype(np.float32)
    field = cv2.resize(coarse, (w, h), interpolation=cv2.INTER_CUBIC)
    field = cv2.GaussianBlur(field, (0, 0), sigmaX=min(w, h) / 40)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float32)
    r2 = ((xx - w / 2) / (0.42 * w)) ** 2 + ((yy - h / 2) / (0.42 * h)) ** 2
    field = field * 1.2 + (1.0 - r2)
    tissue = field > 0.15

    # stain base with low-frequency density variation
    density = rng.standard_normal((h // 16 + 1, w // 16 + 1)).astype(np.float32)
    density = cv2.resize(density, (w, h), interpolation=cv2.INTER_CUBIC)
    density = cv2.GaussianBlur(density, (0, 0), sigmaX=min(w, h) / 64)
    density = (density - density.min()) / max(float(np.ptp(density)), 1e-6)

    img = np.full((h, w, 3), 253, dtype=np.float32)
    pink = np.array([231.0, 170.0, 192.0])
    purple = np.array([160.0, 110.0, 170.0])
    stain = pink[None, None, :] * (1 - density[..., None] * 0.6) \
        + purple[None, None, :] * (density[..., None] * 0.6)
    img[tissue] = stain[tissue]

    # fine multiplicative grain
    grain = rng.standard_normal((h, w)).astype(np.float32)
    grain = cv2.GaussianBlur(grain, (0, 0), sigmaX=1.5)
    img[tissue] *= (1.0 + 0.06 * grain[tissue])[:, None]

    # nuclei: dark dots, denser where the stain is denser
    n_nuclei = int(nuclei_per_mpx * (w * h) / 1e6)
    cx = rng.integers(0, w, size=3 * n_nuclei)
    cy = rng.integers(0, h, size=3 * n_nuclei)
    keep = tissue[cy, cx] & (rng.random(3 * n_nuclei) < 0.25 + 0.75 * density[cy, cx])
    cx, cy = cx[keep][:n_nuclei], cy[keep][:n_nuclei]
    radii = rng.integers(2, 6, size=len(cx))
    shades = rng.uniform(0.35, 0.8, size=len(cx))
    img_u8 = np.clip(img, 0, 255).astype(np.uint8)
    nucleus_color = np.array([92, 58, 134], dtype=np.float64)
    for x, y, r, s in zip(cx, cy, radii, shades):
        color = tuple(int(v) for v in nucleus_color * s + img_u8[y, x] * (1 - s) * 0.2)
        cv2.circle(img_u8, (int(x), int(y)), int(r), color, -1, lineType=cv2.LINE_AA)
    return img_u8


def save_truth_grid(gt: GroundTruthWarp, width: int, height: int,
                    path: str | Path, n: int = 32) -> None:
    """Write src->tgt samples on an n x n lattice as CSV."""
    xs = np.linspace(0, width - 1, n)
    ys = np.linspace(0, height - 1, n)
    gx, gy = np.meshgrid(xs, ys)
    src = np.column_stack([gx.ravel(), gy.ravel()])
    tgt = gt.forward(src)
    with open(path, "w") as fh:
        fh.write("src_x,src_y,tgt_x,tgt_y\n")
        for (sx, sy), (tx, ty) in zip(src, tgt):
            fh.write(f"{sx:.6f},{sy:.6f},{tx:.6f},{ty:.6f}\n")


class TruthGrid:
    """Bilinear interpolation of a saved ground-truth lattice."""

    def __init__(self, src: np.ndarray, tgt: np.ndarray):
        from scipy.interpolate import RegularGridInterpolator

        xs = np.unique(src[:, 0])
        ys = np.unique(src[:, 1])
        n, m = len(ys), len(xs)
        disp = (tgt - src).reshape(n, m, 2)
        self._interp = RegularGridInterpolator(
            (ys, xs), disp, method="linear", bounds_error=False, fill_value=None)

    def forward(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        disp = self._interp(pts[:, ::-1])
        out = pts + disp
        return out[0] if np.asarray(points).ndim == 1 else out


def load_truth_grid(path: str | Path) -> TruthGrid:
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    return TruthGrid(data[:, :2], data[:, 2:])
