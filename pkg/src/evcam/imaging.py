"""Image container, PNG I/O, RGB/HSV conversion, luminance and the exposure
transform (HSV value channel scaled by a factor alpha, then clamped).

Images are float32 in [0, 1], shape (H, W) for single channel or (H, W, 3)
for RGB. All functions are pure; nothing mutates its input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage

from .errors import ConfigError, ShapeError

# Rec.601 luma weights; the alternative 'hsv-v' mode uses max(R,G,B) instead.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class ExposureConfig:
    """Exposure factor applied to the HSV value channel; alpha > 0."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigError(f"exposure alpha must be > 0, got {self.alpha}")


def validate_image(img: np.ndarray, channels: int | None = None) -> np.ndarray:
    """Check dtype/shape/range and return a float32 view of the image."""
    img = np.asarray(img)
    if img.dtype != np.float32:
        img = img.astype(np.float32)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
    if img.ndim not in (2, 3) or (img.ndim == 3 and img.shape[2] != 3):
        raise ShapeError(f"image must be (H, W) or (H, W, 3), got shape {img.shape}")
    if channels is not None and num_channels(img) != channels:
        raise ShapeError(f"expected a {channels}-channel image, got {num_channels(img)}")
    if img.size and (img.min() < 0.0 or img.max() > 1.0):
        raise ShapeError("image samples must lie in [0, 1]")
    return img


def num_channels(img: np.ndarray) -> int:
    return 1 if img.ndim == 2 else img.shape[2]


def load_png(path) -> np.ndarray:
    """Read an 8-bit PNG/JPEG into float32 [0, 1] (RGB or grayscale)."""
    with PILImage.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB" if im.mode not in ("1", "I;16", "I") else "L")
        arr = np.asarray(im, dtype=np.float32) / np.float32(255.0)
    return arr


def save_png(img: np.ndarray, path) -> None:
    """Write a [0, 1] image as 8-bit PNG (samples quantized by round(v*255))."""
    img = validate_image(img)
    q = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    PILImage.fromarray(q, mode="L" if q.ndim == 2 else "RGB").save(path, format="PNG")


def rgb_to_hsv(img: np.ndarray) -> np.ndarray:
    """Hexcone RGB -> HSV with H scaled to [0, 1]; H is 0 on the gray axis."""
    img = validate_image(img, channels=3)
    r, g, b = img[..., 0], img[..., 1], img[..., 2]
    v = np.max(img, axis=-1)
    c = v - np.min(img, axis=-1)
    s = np.where(v > 0, c / np.where(v > 0, v, 1), 0).astype(np.float32)

    with np.errstate(divide="ignore", invalid="ignore"):
        safe_c = np.where(c > 0, c, 1)
        hr = ((g - b) / safe_c) % 6.0
        hg = (b - r) / safe_c + 2.0
        hb = (r - g) / safe_c + 4.0
    h = np.where(v == r, hr, np.where(v == g, hg, hb))
    h = np.where(c > 0, h / 6.0, 0.0).astype(np.float32)
    return np.stack([h, s, v], axis=-1)


def hsv_to_rgb(img: np.ndarray) -> np.ndarray:
    """Inverse hexcone transform; accepts H in [0, 1]."""
    img = validate_image(img, channels=3)
    h, s, v = img[..., 0], img[..., 1], img[..., 2]
    h6 = (h % 1.0) * 6.0
    i = np.floor(h6).astype(np.int32) % 6
    f = (h6 - np.floor(h6)).astype(np.float32)
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    out = np.stack([r, g, b], axis=-1).astype(np.float32)
    return np.clip(out, 0.0, 1.0)


def apply_exposure(img: np.ndarray, cfg: ExposureConfig) -> np.ndarray:
    """Scale the HSV value channel by cfg.alpha, clamp to [0, 1], return RGB.

    Hue and saturation are untouched; alpha < 1 underexposes, alpha > 1
    overexposes, and values pushed past 1 saturate. Because every hexcone
    component is proportional to V at fixed (H, S), the transform reduces to
    scaling each pixel's RGB by clamp(alpha*V, 0, 1) / V, which avoids the
    full color-space round trip on the batch hot path.
    """
    img = validate_image(img, channels=3)
    v = np.max(img, axis=-1)
    v_new = np.clip(v * np.float32(cfg.alpha), 0.0, 1.0)
    scale = np.zeros_like(v)
    np.divide(v_new, v, out=scale, where=v > 0)
    return np.clip(img * scale[..., None], 0.0, 1.0)


def luminance(img: np.ndarray, mode: str = "rec601") -> np.ndarray:
    """Single-channel intensity. 3-channel input uses Rec.601 luma by default
    (mode 'hsv-v' takes max(R,G,B) instead); 1-channel input passes through."""
    img = validate_image(img)
    if num_channels(img) == 1:
        return img
    if mode == "rec601":
        wr, wg, wb = (np.float32(w) for w in LUMA_WEIGHTS)
        return wr * img[..., 0] + wg * img[..., 1] + wb * img[..., 2]
    if mode == "hsv-v":
        return np.max(img, axis=-1)
    raise ConfigError(f"luminance mode must be 'rec601' or 'hsv-v', got {mode!r}")


def resize(img: np.ndarray, width: int, height: int) -> np.ndarray:
    """Bilinear resize with the half-pixel center convention; same-size input
    is returned unchanged and samples stay inside [0, 1]."""
    img = validate_image(img)
    if width < 1 or height < 1:
        raise ShapeError(f"resize target must be >= 1x1, got {width}x{height}")
    h, w = img.shape[:2]
    if (w, h) == (width, height):
        return img.copy()

    def axis_coords(n_src: int, n_dst: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        pos = (np.arange(n_dst, dtype=np.float64) + 0.5) * (n_src / n_dst) - 0.5
        pos = np.clip(pos, 0.0, n_src - 1)
        lo = np.floor(pos).astype(np.int64)
        hi = np.minimum(lo + 1, n_src - 1)
        return lo, hi, (pos - lo).astype(np.float32)

    x0, x1, fx = axis_coords(w, width)
    y0, y1, fy = axis_coords(h, height)
    fx = fx.reshape(1, -1) if img.ndim == 2 else fx.reshape(1, -1, 1)
    fy = fy.reshape(-1, 1) if img.ndim == 2 else fy.reshape(-1, 1, 1)
    top = img[y0][:, x0] * (1.0 - fx) + img[y0][:, x1] * fx
    bot = img[y1][:, x0] * (1.0 - fx) + img[y1][:, x1] * fx
    out = top * (1.0 - fy) + bot * fy
    return np.clip(out, 0.0, 1.0).astype(np.float32)
