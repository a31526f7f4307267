"""Forward-pass reference math for the RGB-Event fusion blocks.

- eta: temporal attention over a binary (C, T, H, W) spike volume -> a
  (C, H, W) gate in (0, 1) via max/avg time reduction, 1x1 conv, BN, sigmoid.
- cma: spatial softmax pooling into a per-channel descriptor, then a
  squeeze/excite channel gate multiplied back onto the feature map.
- basic_fusion: sigmoid(f_ec) * f_r + f_r, the RGB-dominated baseline
  (an all-zero RGB input yields an all-zero output regardless of events).
- scf: the symmetric variant. Both modalities are gated by the other's CMA
  output and summed with their own identity, then per-branch 1x1 convs are
  combined by elementwise max and mean and refined by a 3x3 conv. With
  shared weights the output is invariant under swapping the two inputs.

Weights for every conv/BN site are held in FusionWeights; defaults are
seeded uniform initializations, and trained parameters can be injected via
the binary weights container in tensor.py.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import ConfigError, ShapeError

SQUEEZE_RATIO = 4


def _squeeze_width(channels: int) -> int:
    return max(channels // SQUEEZE_RATIO, 1)


@dataclass(eq=False)
class FusionWeights:
    """Conv/BN parameters keyed by site name.

    Sites: eta.gate (1x1, 2C->C), eta.bn, cma.spatial (1x1, C->1),
    cma.squeeze (1x1, C->C/4), cma.excite (1x1, C/4->C), smf.branch_rgb and
    smf.branch_event (1x1, C->C), smf.out (3x3, 2C->C). When shared_cma is
    False the cma.* sites split into cma_rgb.* and cma_event.*.
    """

    channels: int
    convs: dict[str, T.ConvSpec] = field(default_factory=dict)
    bns: dict[str, T.BatchNormSpec] = field(default_factory=dict)
    shared_cma: bool = True

    CMA_SITES = ("spatial", "squeeze", "excite")

    def required_conv_sites(self) -> list[str]:
        sites = ["eta.gate", "smf.branch_rgb", "smf.branch_event", "smf.out"]
        if self.shared_cma:
            sites += [f"cma.{s}" for s in self.CMA_SITES]
        else:
            sites += [f"cma_rgb.{s}" for s in self.CMA_SITES]
            sites += [f"cma_event.{s}" for s in self.CMA_SITES]
        return sites

    def validate(self) -> None:
        c = self.channels
        missing = [s for s in self.required_conv_sites() if s not in self.convs]
        if missing:
            raise ConfigError(f"fusion weights missing conv sites: {missing}")
        if "eta.bn" not in self.bns:
            raise ConfigError("fusion weights missing bn site: eta.bn")
        extra = set(self.convs) - set(self.required_conv_sites())
        if extra:
            raise ConfigError(f"fusion weights have unknown conv sites: {sorted(extra)}")
        expect = {"eta.gate": (c, 2 * c, 1), "smf.branch_rgb": (c, c, 1),
                  "smf.branch_event": (c, c, 1), "smf.out": (c, 2 * c, 3)}
        for prefix in self._cma_prefixes():
            expect[f"{prefix}.spatial"] = (1, c, 1)
            expect[f"{prefix}.squeeze"] = (_squeeze_width(c), c, 1)
            expect[f"{prefix}.excite"] = (c, _squeeze_width(c), 1)
        for site, (out_ch, in_ch, k) in expect.items():
            spec = self.convs[site]
            got = (spec.out_channels, spec.in_channels, spec.kernel_size)
            if got != (out_ch, in_ch, k):
                raise ConfigError(f"site {site}: expected conv {out_ch, in_ch, k}, got {got}")

    def _cma_prefixes(self) -> list[str]:
        return ["cma"] if self.shared_cma else ["cma_rgb", "cma_event"]

    def cma_conv(self, site: str, branch: str) -> T.ConvSpec:
        prefix = "cma" if self.shared_cma else f"cma_{branch}"
        return self.convs[f"{prefix}.{site}"]

    @classmethod
    def seeded(cls, channels: int, seed: int = 0, shared_cma: bool = True,
               shared_branch: bool = True, zero_bias: bool = False) -> "FusionWeights":
        """Deterministic default initialization (uniform +-1/sqrt(fan_in)).

        shared_branch ties smf.branch_rgb and smf.branch_event to identical
        values, which is what makes scf exactly swap-symmetric.
        """
        if channels < 1:
            raise ConfigError("channels must be >= 1")
        w = cls(channels=channels, shared_cma=shared_cma)
        sq = _squeeze_width(channels)

        def conv(site_idx, out_ch, in_ch, k, padding=0):
            return T.seeded_conv(out_ch, in_ch, k, seed=seed * 1000 + site_idx,
                                 padding=padding, zero_bias=zero_bias)

        w.convs["eta.gate"] = conv(0, channels, 2 * channels, 1)
        w.bns["eta.bn"] = T.BatchNormSpec.identity(channels)
        for i, prefix in enumerate(w._cma_prefixes()):
            base = 10 * (i if not shared_cma else 0)
            w.convs[f"{prefix}.spatial"] = conv(1 + base, 1, channels, 1)
            w.convs[f"{prefix}.squeeze"] = conv(2 + base, sq, channels, 1)
            w.convs[f"{prefix}.excite"] = conv(3 + base, channels, sq, 1)
        w.convs["smf.branch_rgb"] = conv(4, channels, channels, 1)
        w.convs["smf.branch_event"] = conv(4 if shared_branch else 5, channels, channels, 1)
        w.convs["smf.out"] = conv(6, channels, 2 * channels, 3, padding=1)
        w.validate()
        return w

    def to_tensors(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {
            "meta.channels": np.asarray([self.channels], np.float32),
            "meta.shared_cma": np.asarray([1.0 if self.shared_cma else 0.0], np.float32),
        }
        for site, spec in self.convs.items():
            out[f"{site}.kernel"] = spec.kernel
            out[f"{site}.bias"] = spec.bias
        bn = self.bns["eta.bn"]
        for name in ("gamma", "beta", "running_mean", "running_var"):
            out[f"eta.bn.{name}"] = getattr(bn, name)
        out["eta.bn.epsilon"] = np.asarray([bn.epsilon], np.float32)
        return out

    @classmethod
    def from_tensors(cls, tensors: dict[str, np.ndarray]) -> "FusionWeights":
        channels = int(tensors["meta.channels"][0])
        shared = bool(tensors["meta.shared_cma"][0])
        w = cls(channels=channels, shared_cma=shared)
        for site in w.required_conv_sites():
            padding = 1 if site == "smf.out" else 0
            w.convs[site] = T.ConvSpec(kernel=tensors[f"{site}.kernel"],
                                       bias=tensors[f"{site}.bias"], padding=padding)
        w.bns["eta.bn"] = T.BatchNormSpec(
            gamma=tensors["eta.bn.gamma"], beta=tensors["eta.bn.beta"],
            running_mean=tensors["eta.bn.running_mean"],
            running_var=tensors["eta.bn.running_var"],
            epsilon=float(tensors["eta.bn.epsilon"][0]))
        w.validate()
        return w

    def save(self, path) -> None:
        T.save_weights(self.to_tensors(), path)

    @classmethod
    def load(cls, path) -> "FusionWeights":
        return cls.from_tensors(T.load_weights(path))


def _check_chw(x: np.ndarray, what: str) -> np.ndarray:
    x = T.as_tensor(x)
    if x.ndim != 3:
        raise ShapeError(f"{what} must be (C, H, W), got shape {x.shape}")
    return x


def time_reduce(f_e: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Max and average over the time axis of a (C, T, H, W) volume."""
    f_e = T.as_tensor(f_e)
    if f_e.ndim != 4 or f_e.shape[1] < 1:
        raise ShapeError(f"spike volume must be (C, T>=1, H, W), got shape {f_e.shape}")
    return T.reduce(f_e, axis=1, mode="max"), T.reduce(f_e, axis=1, mode="avg")


def eta(f_e: np.ndarray, w: FusionWeights) -> np.ndarray:
    """Temporal attention gate: sigmoid(BN(conv1x1([max_T, avg_T])))."""
    f_max, f_avg = time_reduce(f_e)
    stacked = T.concat([f_max, f_avg], axis=0)
    gate = T.conv2d(stacked, w.convs["eta.gate"])
    gate = T.batchnorm_infer(gate, w.bns["eta.bn"])
    return T.sigmoid(gate)


def cma_detailed(f: np.ndarray, w: FusionWeights, branch: str = "event"
                 ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cross-modality alignment, returning (output, attention, channel gate).

    attention is the softmax over all H*W positions of a 1-channel logit
    map; it pools f into a (C,) descriptor which the squeeze/excite pair
    turns into a per-channel sigmoid gate.
    """
    f = _check_chw(f, "cma input")
    c, h, wd = f.shape
    logits = T.conv2d(f, w.cma_conv("spatial", branch))  # (1, H, W)
    attention = T.softmax_over(logits.reshape(-1), axis=0)  # (H*W,)
    pooled = f.reshape(c, h * wd) @ attention  # (C,), softmax-weighted spatial pooling
    squeezed = T.conv2d(pooled.reshape(c, 1, 1), w.cma_conv("squeeze", branch))
    gate = T.sigmoid(T.conv2d(squeezed, w.cma_conv("excite", branch)))  # (C, 1, 1)
    return (gate * f).astype(np.float32), attention, gate


def cma(f: np.ndarray, w: FusionWeights, branch: str = "event") -> np.ndarray:
    """Spatial softmax pooling + channel gating of one modality's features."""
    out, _, _ = cma_detailed(f, w, branch)
    return out


def basic_fusion(f_ec: np.ndarray, f_r: np.ndarray) -> np.ndarray:
    """RGB-dominated baseline: sigmoid(f_ec) * f_r + f_r."""
    f_ec, f_r = T.as_tensor(f_ec), T.as_tensor(f_r)
    if f_ec.shape != f_r.shape:
        raise ShapeError(f"inputs must have equal shapes, got {f_ec.shape} vs {f_r.shape}")
    return T.sigmoid(f_ec) * f_r + f_r


@dataclass(frozen=True, eq=False)
class ScfParts:
    """Intermediates of the symmetric fusion, exposed for verification."""

    fusion_rgb: np.ndarray
    fusion_event: np.ndarray
    combined: np.ndarray  # fusion_rgb + fusion_event, the symmetric sum
    f_max: np.ndarray
    f_avg: np.ndarray
    out: np.ndarray


def scf_detailed(f_r: np.ndarray, f_e: np.ndarray, w: FusionWeights) -> ScfParts:
    """Symmetric fusion with all intermediates.

    f_e is the event feature at the same (C, H, W) shape as f_r, typically
    the eta() output. Each modality is gated by the other's CMA response and
    added to itself; per-branch 1x1 convs are then merged by elementwise max
    and mean and refined with a 3x3 conv over their concatenation.
    """
    f_r = _check_chw(f_r, "rgb features")
    f_e = _check_chw(f_e, "event features")
    if f_r.shape != f_e.shape:
        raise ShapeError(f"modality shapes differ: {f_r.shape} vs {f_e.shape}")
    f_ec = cma(f_e, w, branch="event")
    f_rc = cma(f_r, w, branch="rgb")
    fusion_rgb = T.sigmoid(f_ec) * f_r + f_r
    fusion_event = T.sigmoid(f_rc) * f_e + f_e
    branch_r = T.conv2d(fusion_rgb, w.convs["smf.branch_rgb"])
    branch_e = T.conv2d(fusion_event, w.convs["smf.branch_event"])
    f_max = np.maximum(branch_r, branch_e)
    f_avg = (branch_r + branch_e) * np.float32(0.5)
    out = T.conv2d(T.concat([f_max, f_avg], axis=0), w.convs["smf.out"])
    return ScfParts(fusion_rgb=fusion_rgb, fusion_event=fusion_event,
                    combined=fusion_rgb + fusion_event,
                    f_max=f_max, f_avg=f_avg, out=out)


def scf(f_r: np.ndarray, f_e: np.ndarray, w: FusionWeights) -> np.ndarray:
    return scf_detailed(f_r, f_e, w).out


def invariant_report(channels: int = 8, t_steps: int = 4, hw: int = 16,
                     seed: int = 0, trials: int = 5) -> dict:
    """Run the fusion invariant suite on seeded random inputs.

    Returns a JSON-friendly report: one entry per check with the observed
    worst-case metric, plus an all_passed flag.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    w = FusionWeights.seeded(channels, seed=seed)
    checks: list[dict] = []

    def record(name: str, passed: bool, metric: float | None = None):
        entry: dict = {"name": name, "passed": bool(passed)}
        if metric is not None:
            entry["metric"] = float(metric)
        checks.append(entry)

    swap_err = 0.0
    softmax_err = 0.0
    gate_ok = True
    shape_ok = True
    for _ in range(trials):
        spikes = (rng.random((channels, t_steps, hw, hw)) < 0.3).astype(np.float32)
        f_r = rng.standard_normal((channels, hw, hw), dtype=np.float32)
        f_eta = eta(spikes, w)
        gate_ok &= bool(np.all((f_eta > 0) & (f_eta < 1)))
        out_ab = scf(f_r, f_eta, w)
        out_ba = scf(f_eta, f_r, w)
        swap_err = max(swap_err, float(np.max(np.abs(out_ab - out_ba))))
        shape_ok &= out_ab.shape == (channels, hw, hw)
        for branch, feat in (("event", f_eta), ("rgb", f_r)):
            _, attention, gate = cma_detailed(feat, w, branch)
            softmax_err = max(softmax_err, abs(float(attention.sum()) - 1.0))
            gate_ok &= bool(np.all(attention > 0))
            gate_ok &= bool(np.all((gate > 0) & (gate < 1)))
    record("scf_swap_symmetry", swap_err <= 1e-5, swap_err)
    record("softmax_sums_to_one", softmax_err <= 1e-5, softmax_err)
    record("gates_strictly_inside_unit_interval", gate_ok)
    record("output_shape_contract", shape_ok)

    f_ec = rng.standard_normal((channels, hw, hw), dtype=np.float32)
    zero = np.zeros_like(f_ec)
    basic_zero = float(np.max(np.abs(basic_fusion(f_ec, zero))))
    scf_nonzero = float(np.max(np.abs(scf(zero, f_ec, w))))
    record("basic_fusion_rgb_dominated", basic_zero == 0.0, basic_zero)
    record("scf_lives_without_rgb", scf_nonzero > 0.0, scf_nonzero)

    parts = scf_detailed(f_ec, f_ec, w)
    degenerate = float(np.max(np.abs(parts.f_max - parts.f_avg)))
    record("equal_branch_degenerate_max_eq_avg", degenerate <= 1e-6, degenerate)

    return {
        "config": {"channels": channels, "t_steps": t_steps, "hw": hw,
                   "seed": seed, "trials": trials},
        "checks": checks,
        "all_passed": all(c["passed"] for c in checks),
    }
