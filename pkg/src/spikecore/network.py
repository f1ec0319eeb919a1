"""The emulation engine: timestep loop, spike injection, readback.

One :class:`Network` owns the weight matrices, the neuron states and the
STDP trace banks.  Each timestep

1. drains this step's input events and accumulates their charge through
   ``w_in`` (column = input channel), plus the recurrent charge of every
   neuron that fired on the *previous* step through ``w_aa`` (row =
   source neuron) — recurrent spikes reach their targets one step after
   they fire;
2. accumulates all of it in a wide per-neuron register and saturates
   once to the Q1.7.10 range, so same-step event order never matters;
3. advances every neuron with :func:`spikecore.dynamics.lif_step` in
   ascending index order;
4. runs the batched STDP passes for the step's fired neurons and input
   events, then ages the traces (skipped entirely when STDP is off);
5. appends the raster entries and the monitored neuron's post-step
   membrane value.

The engine is deterministic: identical configuration and input stream
produce a bit-identical :class:`RunTrace`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .dynamics import NeuronParams, NeuronState, lif_step
from .fixedpoint import MAX_SHIFT, RAW_MAX, RAW_MIN, W_MAX, W_MIN
from .plasticity import StdpParams, TraceState, apply_spikes, trace_tick

N_MAX_DEFAULT = 100
N_IN_MAX = 65535


class SpikeEvent(NamedTuple):
    """One input spike: absolute timestep and input-channel address."""

    time: int
    address: int


@dataclass
class RunTrace:
    """Everything observable from one run."""

    raster: list[tuple[int, int]] = field(default_factory=list)
    membrane: list[int] = field(default_factory=list)
    final_w_aa: np.ndarray | None = None
    final_w_in: np.ndarray | None = None


def _as_weight_matrix(values, shape, name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    if arr.size and (arr.min() < W_MIN or arr.max() > W_MAX):
        raise ValueError(f"{name} entries must lie in [{W_MIN}, {W_MAX}]")
    return arr.astype(np.int8)


def _as_mask(values, shape, name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} entries must be 0 or 1")
    return arr.astype(np.uint8)


@dataclass
class NetworkConfig:
    """Static description of one network; validated before use."""

    n: int
    n_in: int
    w_aa: np.ndarray
    w_in: np.ndarray
    enable_stdp_aa: np.ndarray
    enable_stdp_in: np.ndarray
    neuron_params: NeuronParams
    stdp_params: StdpParams
    weight_shift: int = MAX_SHIFT
    monitored_neuron: int = 0

    def validate(self, n_max: int = N_MAX_DEFAULT) -> "NetworkConfig":
        if not 1 <= self.n <= n_max:
            raise ValueError(f"n must be in [1, {n_max}]")
        if not 1 <= self.n_in <= N_IN_MAX:
            raise ValueError(f"n_in must be in [1, {N_IN_MAX}]")
        self.w_aa = _as_weight_matrix(self.w_aa, (self.n, self.n), "w_aa")
        self.w_in = _as_weight_matrix(self.w_in, (self.n, self.n_in), "w_in")
        self.enable_stdp_aa = _as_mask(
            self.enable_stdp_aa, (self.n, self.n), "enable_stdp_aa"
        )
        self.enable_stdp_in = _as_mask(
            self.enable_stdp_in, (self.n, self.n_in), "enable_stdp_in"
        )
        self.neuron_params.validate()
        self.stdp_params.validate()
        if not 0 <= self.weight_shift <= MAX_SHIFT:
            raise ValueError(f"weight_shift must be in [0, {MAX_SHIFT}]")
        if not 0 <= self.monitored_neuron < self.n:
            raise ValueError("monitored_neuron out of range")
        return self

    @classmethod
    def quiet(
        cls,
        n: int,
        n_in: int,
        neuron_params: NeuronParams,
        stdp_params: StdpParams,
        weight_shift: int = MAX_SHIFT,
        monitored_neuron: int = 0,
    ) -> "NetworkConfig":
        """All-zero weights and all-zero masks; a blank slate for tests."""
        return cls(
            n=n,
            n_in=n_in,
            w_aa=np.zeros((n, n), dtype=np.int8),
            w_in=np.zeros((n, n_in), dtype=np.int8),
            enable_stdp_aa=np.zeros((n, n), dtype=np.uint8),
            enable_stdp_in=np.zeros((n, n_in), dtype=np.uint8),
            neuron_params=neuron_params,
            stdp_params=stdp_params,
            weight_shift=weight_shift,
            monitored_neuron=monitored_neuron,
        )


def check_stream_sorted(stream: list[SpikeEvent], n_in: int) -> None:
    """Reject unsorted, negative-time, or out-of-range event streams."""
    last = 0
    for ev in stream:
        if ev.time < 0:
            raise ValueError(f"event time {ev.time} is negative")
        if ev.time < last:
            raise ValueError("input stream times must be non-decreasing")
        if not 0 <= ev.address < n_in:
            raise ValueError(f"event address {ev.address} outside [0, {n_in})")
        last = ev.time


class Network:
    """A live emulated core built from a validated :class:`NetworkConfig`."""

    def __init__(self, config: NetworkConfig, n_max: int = N_MAX_DEFAULT):
        config.validate(n_max)
        self.config = config
        self.n = config.n
        self.n_in = config.n_in
        self.w_aa = config.w_aa.copy()
        self.w_in = config.w_in.copy()
        self.neuron_params = config.neuron_params
        self.stdp_params = config.stdp_params
        self.shift = config.weight_shift
        self.monitored = config.monitored_neuron
        self.reset_state()

    def reset_state(self) -> None:
        """Zero the dynamic state (time, neurons, traces); keep weights."""
        self.t = 0
        self.states = [NeuronState(v=0) for _ in range(self.n)]
        self.prev_fired: list[int] = []
        self.traces = TraceState.create(
            self.n,
            self.n_in,
            enable_stdp=self.config.enable_stdp_aa,
            enable_stdp_in=self.config.enable_stdp_in,
        )

    def step(self, events: list[SpikeEvent] | None = None) -> list[int]:
        """Advance one timestep; ``events`` must carry the current time."""
        events = events or []
        acc = np.zeros(self.n, dtype=np.int64)
        channels: list[int] = []
        for ev in events:
            if ev.time != self.t:
                raise ValueError(
                    f"event time {ev.time} does not match current step {self.t}"
                )
            if not 0 <= ev.address < self.n_in:
                raise ValueError(f"event address {ev.address} outside [0, {self.n_in})")
            acc += self.w_in[:, ev.address].astype(np.int64) << self.shift
            channels.append(ev.address)
        for s in self.prev_fired:
            acc += self.w_aa[s, :].astype(np.int64) << self.shift
        injected = np.clip(acc, RAW_MIN, RAW_MAX)

        fired: list[int] = []
        for k in range(self.n):
            state = lif_step(self.states[k], self.neuron_params, int(injected[k]))
            self.states[k] = state
            if state.spiked:
                fired.append(k)

        if self.stdp_params.enabled:
            if fired or channels:
                apply_spikes(
                    fired, channels, self.traces, self.w_aa, self.w_in,
                    self.stdp_params,
                )
            trace_tick(self.traces, self.stdp_params)

        self.prev_fired = fired
        self.t += 1
        return fired

    def run(self, stream: list[SpikeEvent], t_end: int) -> RunTrace:
        """Present ``stream`` from quiet state for ``t_end`` steps.

        Dynamic state is reset first; weights are kept as they stand, so
        a second run continues from whatever STDP did to them.  Events
        timestamped at or beyond ``t_end`` are never drained.
        """
        if t_end < 0:
            raise ValueError("t_end must be non-negative")
        check_stream_sorted(stream, self.n_in)
        self.reset_state()
        trace = RunTrace()
        head = 0
        for t in range(t_end):
            batch: list[SpikeEvent] = []
            while head < len(stream) and stream[head].time == t:
                batch.append(stream[head])
                head += 1
            for k in self.step(batch):
                trace.raster.append((t, k))
            trace.membrane.append(self.states[self.monitored].v)
        trace.final_w_aa, trace.final_w_in = self.readback_weights()
        return trace

    def readback_weights(self) -> tuple[np.ndarray, np.ndarray]:
        """Copies of the live weight matrices (evolved if STDP ran)."""
        return self.w_aa.copy(), self.w_in.copy()
