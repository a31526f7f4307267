"""Dataset-scale orchestration: walk a VOC/COCO/flat image tree, apply the
exposure transform and event synthesis per (image, alpha) pair, and write
paired outputs plus a JSON-lines manifest.

Determinism: every (image, alpha slot) task derives its seed from
(global_seed, relative path, alpha slot) only, so results never depend on
worker count, scheduling order or which other images are present. Manifests
are sorted before writing and all payloads are byte-stable across re-runs.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath

import numpy as np

from . import eventgen, imaging
from .errors import ConfigError, LayoutError
from .flow import FlowConfig

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg"}
MANIFEST_NAME = "manifest.jsonl"

# float or (lo, hi) range drawn per image
AlphaSpec = float | tuple[float, float]


@dataclass(frozen=True)
class DatasetJob:
    input_root: Path
    output_root: Path
    alphas: tuple[AlphaSpec, ...]
    event_cfg: eventgen.EventGenConfig = field(default_factory=eventgen.EventGenConfig)
    layout: str = "flat"
    global_seed: int = 0
    workers: int = 1
    size: tuple[int, int] | None = (320, 320)  # (width, height); None keeps original

    def __post_init__(self):
        object.__setattr__(self, "input_root", Path(self.input_root))
        object.__setattr__(self, "output_root", Path(self.output_root))
        object.__setattr__(self, "alphas", tuple(self.alphas))
        if self.layout not in ("voc", "coco", "flat"):
            raise ConfigError(f"layout must be voc, coco or flat, got {self.layout!r}")
        if not self.alphas:
            raise ConfigError("at least one alpha is required")
        fixed = []
        for a in self.alphas:
            if isinstance(a, tuple):
                lo, hi = a
                if not (lo > 0 and lo < hi):
                    raise ConfigError(f"alpha range must satisfy 0 < lo < hi, got {a}")
            elif not a > 0:
                raise ConfigError(f"alpha must be > 0, got {a}")
            else:
                fixed.append(_format_alpha(a))
        if len(set(fixed)) != len(fixed):
            raise ConfigError("duplicate alpha values would collide on output names")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.size is not None and (self.size[0] < 1 or self.size[1] < 1):
            raise ConfigError(f"size must be >= 1x1, got {self.size}")


@dataclass
class RunResult:
    entries: list[dict]
    manifest_path: Path

    @property
    def ok_count(self) -> int:
        return sum(1 for e in self.entries if e["status"] == "ok")

    @property
    def failed_count(self) -> int:
        return sum(1 for e in self.entries if e["status"] == "failed")


def _iter_images(base: Path) -> list[Path]:
    return sorted(p for p in base.rglob("*")
                  if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS)


def discover(root, layout: str) -> list[str]:
    """List images under root for the given layout, as sorted relative paths.

    voc scans JPEGImages/, coco scans the split subdirectories, flat scans
    recursively. Missing expected structure raises LayoutError naming the
    absent path.
    """
    root = Path(root)
    if not root.is_dir():
        raise LayoutError(f"input root does not exist: {root}")
    if layout == "voc":
        jpeg_dir = root / "JPEGImages"
        if not jpeg_dir.is_dir():
            raise LayoutError(f"voc layout requires {jpeg_dir}")
        found = _iter_images(jpeg_dir)
    elif layout == "coco":
        splits = sorted(p for p in root.iterdir() if p.is_dir())
        if not splits:
            raise LayoutError(f"coco layout requires split subdirectories under {root}")
        found = [p for split in splits for p in _iter_images(split)]
    elif layout == "flat":
        found = _iter_images(root)
    else:
        raise ConfigError(f"unknown layout {layout!r}")
    return sorted(p.relative_to(root).as_posix() for p in found)


def per_image_seed(global_seed: int, rel_path: str) -> int:
    """Stable 64-bit seed from (global_seed, relative path).

    Keyed blake2b, so it is identical across runs, platforms and processing
    order; path separators are normalized to forward slashes first.
    """
    norm = PurePosixPath(rel_path.replace(os.sep, "/")).as_posix()
    key = int(global_seed).to_bytes(8, "little", signed=False)
    digest = hashlib.blake2b(norm.encode("utf-8"), key=key, digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _task_seed(global_seed: int, rel_path: str, alpha_index: int) -> int:
    return per_image_seed(global_seed, f"{rel_path}#a{alpha_index}")


def _draw_alpha(spec: AlphaSpec, seed: int) -> float:
    if isinstance(spec, tuple):
        lo, hi = spec
        rng = np.random.Generator(np.random.PCG64(seed))
        return float(lo + (hi - lo) * rng.random())
    return float(spec)


def _format_alpha(alpha: float) -> str:
    return format(alpha, "g")


def _event_checksum(evtf_path: Path) -> str:
    return hashlib.blake2b(evtf_path.read_bytes(), digest_size=8).hexdigest()


def _atomic_write(path: Path, writer) -> None:
    tmp = path.with_name(path.name + ".tmp")
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise


def _run_task(job: DatasetJob, rel_path: str, alpha_index: int) -> tuple[str, int, dict]:
    """Process one (image, alpha slot) pair; returns a sort key + manifest entry."""
    seed = _task_seed(job.global_seed, rel_path, alpha_index)
    alpha = _draw_alpha(job.alphas[alpha_index], seed)
    entry: dict = {
        "src": rel_path,
        "alpha": alpha,
        "seed": seed,
        "threshold_c": job.event_cfg.threshold_c,
        "flow_mode": job.event_cfg.flow.mode,
        "out_exposed": None,
        "out_event": None,
        "checksum": None,
        "status": "ok",
    }
    try:
        img = imaging.load_png(job.input_root / rel_path)
        if img.ndim == 2:
            img = np.repeat(img[:, :, None], 3, axis=2)
        if job.size is not None:
            img = imaging.resize(img, job.size[0], job.size[1])
        exposed = imaging.apply_exposure(img, imaging.ExposureConfig(alpha=alpha))
        cfg = dataclasses.replace(
            job.event_cfg, flow=dataclasses.replace(job.event_cfg.flow, seed=seed))
        frame = eventgen.synthesize_events(exposed, cfg)

        rel = PurePosixPath(rel_path)
        base = f"{rel.stem}_a{_format_alpha(alpha)}"
        out_dir = job.output_root / rel.parent
        out_dir.mkdir(parents=True, exist_ok=True)
        exposed_rel = (rel.parent / f"{base}.png").as_posix()
        event_rel = (rel.parent / f"{base}.evtf").as_posix()
        _atomic_write(job.output_root / exposed_rel,
                      lambda p: imaging.save_png(exposed, p))
        _atomic_write(job.output_root / event_rel,
                      lambda p: eventgen.save_evtf(frame, p))
        entry["out_exposed"] = exposed_rel
        entry["out_event"] = event_rel
        entry["checksum"] = _event_checksum(job.output_root / event_rel)
    except (OSError, ValueError) as e:
        entry["status"] = "failed"
        entry["error"] = f"{type(e).__name__}: {e}"
    return rel_path, alpha_index, entry


def _run_task_args(args) -> tuple[str, int, dict]:
    return _run_task(*args)


def run_job(job: DatasetJob) -> RunResult:
    """Execute a dataset job and write manifest.jsonl under the output root.

    Unreadable images become failed entries and the job continues; an
    unwritable output root aborts. Outputs and the manifest are byte-stable
    for any worker count.
    """
    images = discover(job.input_root, job.layout)
    job.output_root.mkdir(parents=True, exist_ok=True)
    probe = job.output_root / ".write-probe"
    probe.touch()  # unwritable output root aborts before any work
    probe.unlink()
    tasks = [(job, rel, idx) for rel in images for idx in range(len(job.alphas))]

    if job.workers == 1 or len(tasks) <= 1:
        results = [_run_task(*t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=job.workers) as pool:
            results = list(pool.map(_run_task_args, tasks, chunksize=4))

    results.sort(key=lambda r: (r[0], r[1]))
    entries = [entry for _, _, entry in results]
    manifest_path = job.output_root / MANIFEST_NAME

    def write_manifest(path: Path) -> None:
        with open(path, "w") as f:
            for entry in entries:
                f.write(json.dumps(entry) + "\n")

    _atomic_write(manifest_path, write_manifest)
    return RunResult(entries=entries, manifest_path=manifest_path)


def read_manifest(path) -> list[dict]:
    with open(path) as f:
        return [json.loads(line) for line in f if line.strip()]


# --- throughput benchmark -------------------------------------------------

def _bench_worker(args) -> tuple[int, float]:
    """Generate a shard of random images, then time exposure + synthesis only."""
    worker_seed, count, width, height, alpha, cfg = args
    rng = np.random.Generator(np.random.PCG64(worker_seed))
    images = [rng.random((height, width, 3)).astype(np.float32) for _ in range(count)]
    exposure = imaging.ExposureConfig(alpha=alpha)
    start = time.perf_counter()
    events = 0
    for i, img in enumerate(images):
        exposed = imaging.apply_exposure(img, exposure)
        per_image = dataclasses.replace(
            cfg, flow=dataclasses.replace(cfg.flow, seed=worker_seed + i))
        frame = eventgen.synthesize_events(exposed, per_image)
        events += frame.total_events()
    elapsed = time.perf_counter() - start
    return events, elapsed


def benchmark(images: int = 200, width: int = 320, height: int = 320,
              workers: int = 8, alpha: float = 0.2, seed: int = 0,
              cfg: eventgen.EventGenConfig | None = None) -> dict:
    """Measure event-synthesis throughput (exposure + Sobel + flow +
    threshold, one alpha) over seeded random images.

    Image generation is excluded from the timed section. The reported
    images_per_sec uses the slowest worker's compute time, approximating the
    parallel wall rate.
    """
    if cfg is None:
        cfg = eventgen.EventGenConfig()
    workers = max(1, workers)
    shard = [images // workers + (1 if i < images % workers else 0)
             for i in range(workers)]
    shard = [s for s in shard if s > 0]
    args = [(seed + 1000 * i, n, width, height, alpha, cfg)
            for i, n in enumerate(shard)]
    wall_start = time.perf_counter()
    if len(args) == 1:
        timings = [_bench_worker(args[0])]
    else:
        with ProcessPoolExecutor(max_workers=len(args)) as pool:
            timings = list(pool.map(_bench_worker, args))
    wall = time.perf_counter() - wall_start
    slowest = max(t for _, t in timings)
    total_events = sum(e for e, _ in timings)
    return {
        "images": images,
        "size": [width, height],
        "workers": len(args),
        "alpha": alpha,
        "total_events": total_events,
        "compute_seconds_slowest_worker": slowest,
        "wall_seconds": wall,
        "images_per_sec": images / slowest if slowest > 0 else float("inf"),
    }
