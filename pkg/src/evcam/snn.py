"""Discrete-time leaky integrate-and-fire dynamics over spike volumes.

Per step: U = leak * V_prev + I, a spike fires where U >= v_threshold
(inclusive), and fired neurons reset so V = U * (1 - S) + v_reset * S.
The default leak is exp(-1/tau), which decays the potential; setting
paper_literal selects the amplifying exp(+1/tau) variant instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError


@dataclass(frozen=True)
class LifParams:
    """Membrane time constant, firing threshold and reset potential."""

    tau: float = 2.0
    v_threshold: float = 1.0
    v_reset: float = 0.0
    paper_literal: bool = False

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigError(f"tau must be > 0, got {self.tau}")
        if not self.v_reset < self.v_threshold:
            raise ConfigError(
                f"v_reset ({self.v_reset}) must be < v_threshold ({self.v_threshold})"
            )

    @property
    def leak(self) -> float:
        exponent = 1.0 / self.tau if self.paper_literal else -1.0 / self.tau
        return math.exp(exponent)


@dataclass(frozen=True, eq=False)
class LifState:
    """Post-reset membrane potentials, one per neuron."""

    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "v", np.ascontiguousarray(self.v, dtype=np.float32))

    @classmethod
    def zeros(cls, shape) -> "LifState":
        return cls(v=np.zeros(shape, dtype=np.float32))


def lif_step(state: LifState, input_i: np.ndarray, p: LifParams) -> tuple[LifState, np.ndarray]:
    """Advance every neuron one step; returns (new state, binary spike field)."""
    input_i = np.ascontiguousarray(input_i, dtype=np.float32)
    if input_i.shape != state.v.shape:
        raise ShapeError(
            f"input shape {input_i.shape} does not match state shape {state.v.shape}"
        )
    u = np.float32(p.leak) * state.v + input_i
    spikes = (u >= np.float32(p.v_threshold)).astype(np.float32)
    v = u * (np.float32(1.0) - spikes) + np.float32(p.v_reset) * spikes
    return LifState(v=v), spikes


def lif_run(spikes_in: np.ndarray, p: LifParams) -> np.ndarray:
    """Run lif_step sequentially along the time axis of a (C, T, H, W) volume
    from an all-zero initial state; output is binary with the same shape."""
    spikes_in = np.ascontiguousarray(spikes_in, dtype=np.float32)
    if spikes_in.ndim != 4:
        raise ShapeError(f"spike volume must be (C, T, H, W), got shape {spikes_in.shape}")
    c, t, h, w = spikes_in.shape
    if t < 1:
        raise ShapeError("time axis must have length >= 1")
    state = LifState.zeros((c, h, w))
    out = np.empty_like(spikes_in)
    for n in range(t):
        state, out[:, n] = lif_step(state, spikes_in[:, n], p)
    return out
