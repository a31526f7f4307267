"""Per-pixel unit velocity fields: the direction theta is either one global
value (fixed mode) or drawn uniformly from [-pi, pi] per pixel (random mode).

Randomness is counter-based: each pixel's draw is a 64-bit hash of
(seed, x, y), never a position in a sequential stream. The value at (x, y)
therefore does not depend on field size, generation order or worker count,
which is what makes tiled/parallel generation bit-deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_TWO_POW_64 = float(2**64)


@dataclass(frozen=True)
class FlowConfig:
    """mode 'random' draws theta per pixel; 'fixed' uses one global theta."""

    mode: str = "random"
    theta: float = math.pi / 4
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("random", "fixed"):
            raise ConfigError(f"flow mode must be 'random' or 'fixed', got {self.mode!r}")
        if self.mode == "fixed" and not -math.pi <= self.theta <= math.pi:
            raise ConfigError(f"fixed theta must lie in [-pi, pi], got {self.theta}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must fit in 64 unsigned bits")


@dataclass(frozen=True, eq=False)
class FlowField:
    """Unit vectors (vx, vy) per pixel; vx^2 + vy^2 == 1 everywhere."""

    vx: np.ndarray
    vy: np.ndarray

    def __post_init__(self):
        vx = np.ascontiguousarray(self.vx, dtype=np.float32)
        vy = np.ascontiguousarray(self.vy, dtype=np.float32)
        if vx.ndim != 2 or vx.shape != vy.shape:
            raise ShapeError(f"vx/vy must be equal 2-d fields, got {vx.shape} vs {vy.shape}")
        norm = vx.astype(np.float64) ** 2 + vy.astype(np.float64) ** 2
        if norm.size and np.max(np.abs(norm - 1.0)) > 1e-5:
            raise ShapeError("flow vectors must have unit norm")
        object.__setattr__(self, "vx", vx)
        object.__setattr__(self, "vy", vy)

    @classmethod
    def _trusted(cls, vx: np.ndarray, vy: np.ndarray) -> "FlowField":
        # construction-time invariant already holds (unit vectors from trig);
        # skip the validation pass on the batch hot path
        field = object.__new__(cls)
        object.__setattr__(field, "vx", vx)
        object.__setattr__(field, "vy", vy)
        return field

    @property
    def height(self) -> int:
        return self.vx.shape[0]

    @property
    def width(self) -> int:
        return self.vx.shape[1]

    def negated(self) -> "FlowField":
        # exact negation preserves the unit norm bit-for-bit
        return FlowField._trusted(-self.vx, -self.vy)


def _mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer over uint64 arrays (wrapping arithmetic)."""
    z = z + _GOLDEN
    z ^= z >> np.uint64(30)
    z *= _MIX1
    z ^= z >> np.uint64(27)
    z *= _MIX2
    z ^= z >> np.uint64(31)
    return z


def pixel_hash(seed: int, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """64-bit hash keyed by (seed, x, y) only; vectorized over coordinates."""
    x = np.asarray(x, dtype=np.uint64)
    y = np.asarray(y, dtype=np.uint64)
    with np.errstate(over="ignore"):
        counter = (y << np.uint64(32)) ^ x
        h = _mix64(np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF) ^ counter)
        return _mix64(h ^ _GOLDEN)


def generate_flow(width: int, height: int, cfg: FlowConfig) -> FlowField:
    """Build the velocity field for a width x height image."""
    if width < 1 or height < 1:
        raise ShapeError(f"flow field dims must be >= 1, got {width}x{height}")
    if cfg.mode == "fixed":
        vx = np.full((height, width), math.cos(cfg.theta), dtype=np.float32)
        vy = np.full((height, width), math.sin(cfg.theta), dtype=np.float32)
    else:
        xs = np.arange(width, dtype=np.uint64)[None, :]
        ys = np.arange(height, dtype=np.uint64)[:, None]
        h = pixel_hash(cfg.seed, xs, ys)
        # map the hash to [0,1) then to [-pi, pi)
        u = h.astype(np.float64) / _TWO_POW_64
        theta = (2.0 * u - 1.0) * math.pi
        vx = np.cos(theta).astype(np.float32)
        vy = np.sin(theta).astype(np.float32)
    return FlowField._trusted(np.ascontiguousarray(vx), np.ascontiguousarray(vy))


def flow_to_image(field: FlowField) -> np.ndarray:
    """Debug rendering: angle mapped to hue, full saturation and value."""
    from . import imaging

    angle = np.arctan2(field.vy.astype(np.float64), field.vx.astype(np.float64))
    hue = ((angle + math.pi) / (2.0 * math.pi)).astype(np.float32)
    hsv = np.stack([np.clip(hue, 0.0, 1.0),
                    np.ones_like(hue),
                    np.ones_like(hue)], axis=-1)
    return imaging.hsv_to_rgb(hsv)
