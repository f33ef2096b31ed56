"""2D affine transforms on level-0 pixel coordinates.

A transform is a 2x3 matrix ``m`` acting on column vectors (x, y, 1).
Points are passed around as float arrays of shape (2,) or (n, 2) with
columns (x, y).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateTransform

_DET_EPS = 1e-9


@dataclass(frozen=True)
class AffineTransform2D:
    """Invertible affine map p -> m[:, :2] @ p + m[:, 2]."""

    m: np.ndarray = field(default_factory=lambda: np.eye(2, 3))

    def __post_init__(self):
        m = np.asarray(self.m, dtype=np.float64)
        if m.shape != (2, 3):
            raise ValueError(f"affine matrix must be 2x3, got {m.shape}")
        object.__setattr__(self, "m", m)
        if abs(self.det) <= _DET_EPS:
            raise DegenerateTransform(f"linear part is singular (det={self.det:.3g})")

    @classmethod
    def identity(cls) -> "AffineTransform2D":
        return cls(np.eye(2, 3))

    @classmethod
    def translation(cls, tx: float, ty: float) -> "AffineTransform2D":
        return cls(np.array([[1.0, 0.0, tx], [0.0, 1.0, ty]]))

    @classmethod
    def scaling(cls, sx: float, sy: float | None = None) -> "AffineTransform2D":
        sy = sx if sy is None else sy
        return cls(np.array([[sx, 0.0, 0.0], [0.0, sy, 0.0]]))

    @classmethod
    def rotation(cls, angle_rad: float, center=(0.0, 0.0)) -> "AffineTransform2D":
        """Rotation by ``angle_rad`` (counter-clockwise in x-right/y-down axes)
        about ``center``."""
        c, s = np.cos(angle_rad), np.sin(angle_rad)
        lin = np.array([[c, -s], [s, c]])
        t = np.asarray(center, dtype=np.float64) - lin @ np.asarray(center, dtype=np.float64)
        return cls(np.column_stack([lin, t]))

    @classmethod
    def from_flat(cls, coeffs) -> "AffineTransform2D":
        """Build from 6 row-major coefficients [a, b, tx, c, d, ty]."""
        coeffs = np.asarray(coeffs, dtype=np.float64)
        if coeffs.shape != (6,):
            raise ValueError("expected 6 row-major coefficients")
        return cls(coeffs.reshape(2, 3))

    def to_flat(self) -> list[float]:
        return [float(v) for v in self.m.ravel()]

    @property
    def linear(self) -> np.ndarray:
        return self.m[:, :2]

    @property
    def offset(self) -> np.ndarray:
        return self.m[:, 2]

    @property
    def det(self) -> float:
        m = self.m
        return float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])

    def apply(self, points) -> np.ndarray:
        """Map one (2,) point or an (n, 2) batch."""
        pts = np.asarray(points, dtype=np.float64)
        single = pts.ndim == 1
        out = np.atleast_2d(pts) @ self.linear.T + self.offset
        return out[0] if single else out

    def __call__(self, points) -> np.ndarray:
        return self.apply(points)

    def compose(self, other: "AffineTransform2D") -> "AffineTransform2D":
        """Return the transform p -> self(other(p))."""
        lin = self.linear @ other.linear
        off = self.linear @ other.offset + self.offset
        return AffineTransform2D(np.column_stack([lin, off]))

    def invert(self) -> "AffineTransform2D":
        lin_inv = np.linalg.inv(self.linear)
        return AffineTransform2D(np.column_stack([lin_inv, -lin_inv @ self.offset]))

    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.linear, compute_uv=False)
