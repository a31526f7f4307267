"""Event-frame synthesis from a single image.

The chain is: luminance -> Sobel gradients -> per-pixel brightness change
dL = -(grad . v) * dt under a unit-velocity flow field -> threshold into
ON/OFF event counts. A positive dL fires ON events, negative fires OFF, and
the count is floor(|dL| / C) capped at a configurable maximum.

Also holds the serialization surfaces for event frames: the EVTF binary
container, CSV event lists and a red/blue PNG rendering, plus the constant
coding step that replicates a frame into a binary (2, T, H, W) spike volume.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import imaging
from .errors import ConfigError, FormatError, ShapeError
from .flow import FlowConfig, FlowField, generate_flow

EVTF_MAGIC = b"EVTF"
EVTF_VERSION = 1

ON_COLOR = (255, 0, 0)
OFF_COLOR = (0, 0, 255)


@dataclass(frozen=True, eq=False)
class GradientField:
    """Sobel responses gx, gy in intensity units per pixel."""

    gx: np.ndarray
    gy: np.ndarray

    def __post_init__(self):
        gx = np.ascontiguousarray(self.gx, dtype=np.float32)
        gy = np.ascontiguousarray(self.gy, dtype=np.float32)
        if gx.ndim != 2 or gx.shape != gy.shape:
            raise ShapeError(f"gx/gy must be equal 2-d fields, got {gx.shape} vs {gy.shape}")
        object.__setattr__(self, "gx", gx)
        object.__setattr__(self, "gy", gy)

    @property
    def shape(self) -> tuple[int, int]:
        return self.gx.shape


@dataclass(frozen=True, eq=False)
class EventFrame:
    """Per-pixel ON/OFF event counts (uint16). A pixel's brightness change has
    one sign, so at most one of the two counts is nonzero at any pixel."""

    on_count: np.ndarray
    off_count: np.ndarray

    def __post_init__(self):
        on = np.ascontiguousarray(self.on_count, dtype=np.uint16)
        off = np.ascontiguousarray(self.off_count, dtype=np.uint16)
        if on.ndim != 2 or on.shape != off.shape:
            raise ShapeError(f"count planes must be equal 2-d arrays, got {on.shape} vs {off.shape}")
        if np.any((on > 0) & (off > 0)):
            raise ShapeError("a pixel cannot carry both ON and OFF events")
        object.__setattr__(self, "on_count", on)
        object.__setattr__(self, "off_count", off)

    @property
    def height(self) -> int:
        return self.on_count.shape[0]

    @property
    def width(self) -> int:
        return self.on_count.shape[1]

    def total_events(self) -> int:
        return int(self.on_count.sum()) + int(self.off_count.sum())

    def is_empty(self) -> bool:
        return self.total_events() == 0


@dataclass(frozen=True)
class EventGenConfig:
    """Contrast threshold C, time interval dt, per-pixel count cap and the
    flow field settings. Only |grad . v| * dt / C matters numerically, but dt
    is kept as an explicit knob."""

    threshold_c: float = 0.1
    dt: float = 1.0
    count_cap: int = 1
    flow: FlowConfig = field(default_factory=FlowConfig)

    def __post_init__(self):
        if not self.threshold_c > 0:
            raise ConfigError(f"threshold_c must be > 0, got {self.threshold_c}")
        if not self.dt > 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if not 1 <= self.count_cap <= 0xFFFF:
            raise ConfigError(f"count_cap must be in [1, 65535], got {self.count_cap}")


def sobel(lum: np.ndarray) -> GradientField:
    """3x3 Sobel gradients with replicate padding at the borders.

    gx uses [[-1,0,1],[-2,0,2],[-1,0,1]] (cross-correlation), gy its
    transpose, so gx > 0 on intensity increasing with x.
    """
    lum = imaging.validate_image(lum, channels=1)
    p = np.pad(lum, 1, mode="edge")
    nw, n_, ne = p[:-2, :-2], p[:-2, 1:-1], p[:-2, 2:]
    w_, e_ = p[1:-1, :-2], p[1:-1, 2:]
    sw, s_, se = p[2:, :-2], p[2:, 1:-1], p[2:, 2:]
    gx = (ne - nw) + np.float32(2.0) * (e_ - w_) + (se - sw)
    gy = (sw - nw) + np.float32(2.0) * (s_ - n_) + (se - ne)
    return GradientField(gx=gx, gy=gy)


def delta_l(grad: GradientField, flow_field: FlowField, dt: float = 1.0) -> np.ndarray:
    """Brightness change dL = -(gx*vx + gy*vy) * dt per pixel."""
    if grad.shape != (flow_field.height, flow_field.width):
        raise ShapeError(
            f"gradient shape {grad.shape} does not match flow "
            f"{(flow_field.height, flow_field.width)}"
        )
    return -(grad.gx * flow_field.vx + grad.gy * flow_field.vy) * np.float32(dt)


def threshold_events(dl: np.ndarray, cfg: EventGenConfig) -> EventFrame:
    """Quantize a brightness-change field into capped ON/OFF counts.

    count = min(floor(|dL| / C), cap); the sign of dL picks the polarity.
    """
    dl = np.ascontiguousarray(dl, dtype=np.float32)
    if not np.all(np.isfinite(dl)):
        raise ShapeError("brightness-change field contains non-finite values")
    n = np.floor(np.abs(dl) / np.float32(cfg.threshold_c))
    n = np.minimum(n, np.float32(cfg.count_cap)).astype(np.uint16)
    on = np.where(dl > 0, n, 0).astype(np.uint16)
    off = np.where(dl < 0, n, 0).astype(np.uint16)
    return EventFrame(on_count=on, off_count=off)


def synthesize_events(img: np.ndarray, cfg: EventGenConfig,
                      flow_field: FlowField | None = None,
                      lum_mode: str = "rec601") -> EventFrame:
    """Full pipeline: luminance -> sobel -> flow -> dL -> thresholding.

    Deterministic in (img, cfg); pass flow_field to reuse or override the
    generated field (it must match the image dimensions).
    """
    lum = imaging.luminance(img, mode=lum_mode)
    grad = sobel(lum)
    h, w = lum.shape
    if flow_field is None:
        flow_field = generate_flow(w, h, cfg.flow)
    dl = delta_l(grad, flow_field, cfg.dt)
    return threshold_events(dl, cfg)


def constant_code(ef: EventFrame, t_steps: int) -> np.ndarray:
    """Binarize the ON/OFF planes and replicate them t_steps times along a
    new time axis, giving a {0,1} float32 volume of shape (2, T, H, W)."""
    if t_steps < 1:
        raise ConfigError(f"t_steps must be >= 1, got {t_steps}")
    planes = np.stack([(ef.on_count > 0), (ef.off_count > 0)]).astype(np.float32)
    coded = np.broadcast_to(planes[:, None, :, :], (2, t_steps, ef.height, ef.width))
    return np.ascontiguousarray(coded)


def save_evtf(ef: EventFrame, path) -> None:
    """Write the EVTF container (little-endian).

    Header: magic "EVTF", version u8, dtype u8 (0=u8, 1=u16), channels
    u16 = 2, height u32, width u32. Payload: channel-major, row-major count
    data, ON plane first. The narrower dtype is used whenever counts fit.
    """
    max_count = max(int(ef.on_count.max(initial=0)), int(ef.off_count.max(initial=0)))
    dtype_code, np_dtype = (0, "<u1") if max_count <= 0xFF else (1, "<u2")
    with open(path, "wb") as f:
        f.write(EVTF_MAGIC)
        f.write(struct.pack("<BBHII", EVTF_VERSION, dtype_code, 2, ef.height, ef.width))
        f.write(ef.on_count.astype(np_dtype).tobytes())
        f.write(ef.off_count.astype(np_dtype).tobytes())


def load_evtf(path) -> EventFrame:
    """Read an EVTF container written by save_evtf."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != EVTF_MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}, expected {EVTF_MAGIC!r}")
    version, dtype_code, channels, height, width = struct.unpack_from("<BBHII", blob, 4)
    if version != EVTF_VERSION:
        raise FormatError(f"{path}: unsupported EVTF version {version}")
    if channels != 2:
        raise FormatError(f"{path}: expected 2 channels, got {channels}")
    if dtype_code not in (0, 1):
        raise FormatError(f"{path}: unknown dtype code {dtype_code}")
    np_dtype = "<u1" if dtype_code == 0 else "<u2"
    itemsize = 1 if dtype_code == 0 else 2
    plane = height * width
    expected = 16 + 2 * plane * itemsize
    if len(blob) != expected:
        raise FormatError(f"{path}: payload is {len(blob)} bytes, expected {expected}")
    counts = np.frombuffer(blob, dtype=np_dtype, count=2 * plane, offset=16)
    on = counts[:plane].reshape(height, width).astype(np.uint16)
    off = counts[plane:].reshape(height, width).astype(np.uint16)
    return EventFrame(on_count=on, off_count=off)


def save_event_csv(ef: EventFrame, path) -> None:
    """Write one `x,y,polarity` row per event, counts expanded, row-major."""
    ys_on, xs_on = np.nonzero(ef.on_count)
    ys_off, xs_off = np.nonzero(ef.off_count)
    with open(path, "w", newline="") as f:
        f.write("x,y,polarity\n")
        for xs, ys, counts, pol in ((xs_on, ys_on, ef.on_count, 1),
                                    (xs_off, ys_off, ef.off_count, -1)):
            for x, y in zip(xs.tolist(), ys.tolist()):
                row = f"{x},{y},{pol:+d}\n" * int(counts[y, x])
                f.write(row)


def event_frame_to_image(ef: EventFrame) -> np.ndarray:
    """Render ON events red, OFF events blue on a white background."""
    img = np.ones((ef.height, ef.width, 3), dtype=np.float32)
    on = ef.on_count > 0
    off = ef.off_count > 0
    img[on] = np.asarray(ON_COLOR, np.float32) / 255.0
    img[off] = np.asarray(OFF_COLOR, np.float32) / 255.0
    return img


def save_event_png(ef: EventFrame, path) -> None:
    imaging.save_png(event_frame_to_image(ef), path)
