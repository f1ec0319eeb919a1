"""Independent oracles for the emulation engine.

Two deliberately separate models live here:

* :func:`oracle_run` — a scalar re-implementation of the exact
  fixed-point semantics with naive per-synapse loops, pure-Python
  integers, and dict-of-ages trace bookkeeping.  It shares no code with
  the vectorized engine (its arithmetic constants are restated
  literally) and exists purely so the two can be brute-force compared
  bit for bit.
* :class:`FloatNetwork` / :func:`float_run` / :func:`float_train` — a
  double-precision simulator of the same network shape with selectable
  rectangular (default) or exponential STDP, used to train models that
  are then quantized to 8-bit weights, and to study where fixed-point
  learning diverges from float learning.

Quantization convention: round to nearest, ties away from zero,
saturate to [-128, 127].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import NetworkConfig, RunTrace, SpikeEvent
from .plasticity import TraceState, trace_tick

# ---------------------------------------------------------------------------
# Scalar fixed-point oracle
# ---------------------------------------------------------------------------

_RAW_MIN = -131072  # Q1.7.10 register bounds, restated on purpose
_RAW_MAX = 131071
_W_MIN = -128
_W_MAX = 127


def _sat_raw(x: int) -> int:
    return _RAW_MAX if x > _RAW_MAX else (_RAW_MIN if x < _RAW_MIN else x)


def _sat_w(x: int) -> int:
    return _W_MAX if x > _W_MAX else (_W_MIN if x < _W_MIN else x)


def oracle_run(config: NetworkConfig, stream: list[SpikeEvent], t_end: int) -> RunTrace:
    """Run the exact network semantics the slow, obvious way.

    Same contract as ``Network(config).run(stream, t_end)``; every value
    in the returned trace must be bit-identical to the engine's.
    """
    config.validate()
    if t_end < 0:
        raise ValueError("t_end must be non-negative")
    n, n_in = config.n, config.n_in
    last = 0
    for ev in stream:
        if ev.time < 0 or ev.time < last:
            raise ValueError("input stream times must be non-decreasing")
        if not 0 <= ev.address < n_in:
            raise ValueError("event address out of range")
        last = ev.time

    w_aa = [[int(x) for x in row] for row in config.w_aa]
    w_in = [[int(x) for x in row] for row in config.w_in]
    en_aa = [[int(x) for x in row] for row in config.enable_stdp_aa]
    en_in = [[int(x) for x in row] for row in config.enable_stdp_in]
    p = config.neuron_params
    sp = config.stdp_params
    shift = config.weight_shift

    v = [0] * n
    i_syn = [0] * n
    refr = [0] * n
    prev_fired: list[int] = []
    pre: dict[tuple[int, int], int] = {}  # (source, target) -> age
    post: dict[int, int] = {}  # neuron -> age
    in_pre: dict[tuple[int, int], int] = {}  # (neuron, channel) -> age
    in_post: dict[tuple[int, int], int] = {}  # (neuron, channel) -> age

    trace = RunTrace()
    head = 0
    for t in range(t_end):
        chans: list[int] = []
        while head < len(stream) and stream[head].time == t:
            chans.append(stream[head].address)
            head += 1

        inj = [0] * n
        for a in chans:
            for k in range(n):
                inj[k] += w_in[k][a] << shift
        for s in prev_fired:
            for k in range(n):
                inj[k] += w_aa[s][k] << shift

        fired: list[int] = []
        for k in range(n):
            if refr[k] > 0:
                v[k] = p.v_reset
                i_syn[k] = _decay(i_syn[k], p.syn_leak)
                refr[k] -= 1
                continue
            cur = _sat_raw(_decay(i_syn[k], p.syn_leak) + _sat_raw(inj[k]))
            i_syn[k] = cur
            vk = _sat_raw(_sat_raw(v[k] - p.leak) + cur)
            if p.membrane_floor and vk < p.v_reset:
                vk = p.v_reset
            if vk > p.v_th:
                v[k] = p.v_reset
                refr[k] = p.refractory_steps
                fired.append(k)
                trace.raster.append((t, k))
            else:
                v[k] = vk

        if sp.enabled:
            uniq = sorted(set(chans))
            # pair detection against the step-start trace ages
            pot_aa = [
                (j, k)
                for k in fired
                for j in range(n)
                if 0 < pre.get((j, k), 0) < sp.t_pre
            ]
            armed_post = [k for k, age in post.items() if 0 < age < sp.t_post]
            dep_aa = [(s, k) for s in fired for k in armed_post]
            pot_in = [
                (k, a)
                for k in fired
                for a in range(n_in)
                if 0 < in_pre.get((k, a), 0) < sp.t_pre
            ]
            dep_in = [
                (k, a)
                for a in uniq
                for k in range(n)
                if 0 < in_post.get((k, a), 0) < sp.t_post
            ]
            for j, k in pot_aa:
                if en_aa[j][k]:
                    w_aa[j][k] = _sat_w(w_aa[j][k] + sp.dw_pos)
            for k, a in pot_in:
                if en_in[k][a]:
                    w_in[k][a] = _sat_w(w_in[k][a] + sp.dw_pos)
            for s, k in dep_aa:
                if en_aa[s][k]:
                    w_aa[s][k] = _sat_w(w_aa[s][k] - sp.dw_neg)
            for k, a in dep_in:
                if en_in[k][a]:
                    w_in[k][a] = _sat_w(w_in[k][a] - sp.dw_neg)
            for key in pot_aa:
                del pre[key]
            if fired:
                for k in armed_post:
                    del post[k]
            for key in pot_in:
                del in_pre[key]
            for key in dep_in:
                del in_post[key]
            for s in fired:
                for j in range(n):
                    pre[(s, j)] = 0
                post[s] = 0
                for a in range(n_in):
                    in_post[(s, a)] = 0
            for a in uniq:
                for k in range(n):
                    in_pre[(k, a)] = 0
            _tick_ages(pre, sp.t_pre)
            _tick_ages(post, sp.t_post)
            _tick_ages(in_pre, sp.t_pre)
            _tick_ages(in_post, sp.t_post)

        prev_fired = fired
        trace.membrane.append(v[config.monitored_neuron])

    trace.final_w_aa = np.array(w_aa, dtype=np.int8).reshape(n, n)
    trace.final_w_in = np.array(w_in, dtype=np.int8).reshape(n, n_in)
    return trace


def _decay(value: int, leak: int) -> int:
    if value >= 0:
        return value - leak if value > leak else 0
    return value + leak if -value > leak else 0


def _tick_ages(ages: dict, window: int) -> None:
    for key in list(ages):
        age = ages[key] + 1
        if age >= window:
            del ages[key]
        else:
            ages[key] = age


# ---------------------------------------------------------------------------
# Double-precision simulator
# ---------------------------------------------------------------------------


@dataclass
class FloatStdpParams:
    """Real-valued learning rule; rectangular by default."""

    dw_pos: float
    dw_neg: float
    t_pre: int
    t_post: int
    enabled: bool = True
    mode: str = "rectangular"  # or "exponential"
    tau_pos: float | None = None  # exponential time constants; default window/3
    tau_neg: float | None = None

    def tau(self) -> tuple[float, float]:
        return (
            self.tau_pos if self.tau_pos is not None else self.t_pre / 3.0,
            self.tau_neg if self.tau_neg is not None else self.t_post / 3.0,
        )


@dataclass
class FloatNetwork:
    """Structural mirror of :class:`NetworkConfig` with real arithmetic."""

    n: int
    n_in: int
    w_aa: np.ndarray  # float64 (n, n)
    w_in: np.ndarray  # float64 (n, n_in)
    enable_stdp_aa: np.ndarray
    enable_stdp_in: np.ndarray
    v_th: float
    leak: float
    v_reset: float
    syn_leak: float
    stdp: FloatStdpParams
    refractory_steps: int = 0
    membrane_floor: bool = True
    weight_shift: int = 10
    monitored_neuron: int = 0

    @classmethod
    def from_fixed(cls, config: NetworkConfig) -> "FloatNetwork":
        """Mirror a fixed-point config in real units (raw / 2**10)."""
        p = config.neuron_params
        sp = config.stdp_params
        return cls(
            n=config.n,
            n_in=config.n_in,
            w_aa=config.w_aa.astype(np.float64),
            w_in=config.w_in.astype(np.float64),
            enable_stdp_aa=config.enable_stdp_aa.copy(),
            enable_stdp_in=config.enable_stdp_in.copy(),
            v_th=p.v_th / 1024.0,
            leak=p.leak / 1024.0,
            v_reset=p.v_reset / 1024.0,
            syn_leak=p.syn_leak / 1024.0,
            stdp=FloatStdpParams(
                dw_pos=float(sp.dw_pos),
                dw_neg=float(sp.dw_neg),
                t_pre=sp.t_pre,
                t_post=sp.t_post,
                enabled=sp.enabled,
            ),
            refractory_steps=p.refractory_steps,
            membrane_floor=p.membrane_floor,
            weight_shift=config.weight_shift,
            monitored_neuron=config.monitored_neuron,
        )


class FloatSimulator:
    """Vectorized float64 twin of the engine; weights never saturate."""

    def __init__(self, net: FloatNetwork):
        self.net = net
        self.w_aa = net.w_aa.astype(np.float64).copy()
        self.w_in = net.w_in.astype(np.float64).copy()
        self.gain = 2.0 ** (net.weight_shift - 10)
        self.reset_state()

    def reset_state(self) -> None:
        n, n_in = self.net.n, self.net.n_in
        self.t = 0
        self.v = np.zeros(n)
        self.i_syn = np.zeros(n)
        self.refr = np.zeros(n, dtype=np.int64)
        self.prev_fired = np.zeros(n, dtype=bool)
        self.traces = TraceState.create(
            n, n_in, self.net.enable_stdp_aa, self.net.enable_stdp_in
        )

    def step(self, channels: list[int], forced: list[int] | None = None) -> list[int]:
        net = self.net
        inj = np.zeros(net.n)
        for a in channels:
            inj += self.w_in[:, a] * self.gain
        if self.prev_fired.any():
            inj += self.w_aa[self.prev_fired, :].sum(axis=0) * self.gain

        decayed = np.where(
            self.i_syn >= 0,
            np.maximum(0.0, self.i_syn - net.syn_leak),
            np.minimum(0.0, self.i_syn + net.syn_leak),
        )
        held = self.refr > 0
        live = ~held
        self.i_syn = np.where(live, decayed + inj, decayed)
        v_new = self.v - net.leak + self.i_syn
        if net.membrane_floor:
            v_new = np.maximum(v_new, net.v_reset)
        fired = live & (v_new > net.v_th)
        if forced:
            fired = fired.copy()
            fired[list(forced)] = True

        self.v = np.where(fired, net.v_reset, np.where(held, net.v_reset, v_new))
        self.refr = np.where(fired, net.refractory_steps, np.maximum(self.refr - 1, 0))

        fired_idx = np.flatnonzero(fired).tolist()
        if net.stdp.enabled:
            if fired_idx or channels:
                self._apply_stdp(fired_idx, sorted(set(channels)))
            trace_tick(self.traces, net.stdp)  # duck-typed: only windows used

        self.prev_fired = fired
        self.t += 1
        return fired_idx

    def _apply_stdp(self, fired: list[int], chans: list[int]) -> None:
        sp = self.net.stdp
        tr = self.traces
        tau_pos, tau_neg = sp.tau()
        exp_mode = sp.mode == "exponential"

        def gains(ages: np.ndarray, base: float, tau: float) -> np.ndarray:
            if not exp_mode:
                return np.full(ages.shape, base)
            return base * np.exp(-ages.astype(np.float64) / tau)

        st, post = tr.synaptic_traces, tr.post_traces
        pot_aa = np.zeros_like(st, dtype=bool)
        if fired:
            cols = st[:, fired]
            pot_aa[:, fired] = (cols > 0) & (cols < sp.t_pre)
        post_armed = (post > 0) & (post < sp.t_post)
        dep_aa = np.zeros_like(st, dtype=bool)
        if fired:
            dep_aa[fired, :] = post_armed[None, :]
        pot_in = np.zeros_like(tr.in_traces, dtype=bool)
        dep_in = np.zeros_like(tr.in_post_traces, dtype=bool)
        if fired:
            rows = tr.in_traces[fired, :]
            pot_in[fired, :] = (rows > 0) & (rows < sp.t_pre)
        if chans:
            cols = tr.in_post_traces[:, chans]
            dep_in[:, chans] = (cols > 0) & (cols < sp.t_post)

        en_aa = tr.enable_stdp != 0
        en_in = tr.enable_stdp_in != 0
        m = pot_aa & en_aa
        self.w_aa[m] += gains(st[m], sp.dw_pos, tau_pos)
        m = pot_in & en_in
        self.w_in[m] += gains(tr.in_traces[m], sp.dw_pos, tau_pos)
        m = dep_aa & en_aa
        self.w_aa[m] -= gains(np.broadcast_to(post, dep_aa.shape)[m], sp.dw_neg, tau_neg)
        m = dep_in & en_in
        self.w_in[m] -= gains(tr.in_post_traces[m], sp.dw_neg, tau_neg)

        st[pot_aa] = 0xFF
        tr.update_state[pot_aa] = 0
        if fired and post_armed.any():
            post[post_armed] = 0xFF
        tr.in_traces[pot_in] = 0xFF
        tr.in_update_state[pot_in] = 0
        tr.in_post_traces[dep_in] = 0xFF
        if fired:
            st[fired, :] = 0
            tr.update_state[fired, :] = 1
            post[fired] = 0
            tr.in_post_traces[fired, :] = 0
        if chans:
            tr.in_traces[:, chans] = 0
            tr.in_update_state[:, chans] = 1


def float_run(
    net: FloatNetwork,
    stream: list[SpikeEvent],
    t_end: int,
    forced_spikes: dict[int, list[int]] | None = None,
) -> RunTrace:
    """Run the float simulator from quiet state; mirrors ``Network.run``.

    ``forced_spikes`` maps timestep -> neuron indices that are made to
    fire that step regardless of their membrane (teacher forcing).
    Membrane samples and final weights come back as float64.
    """
    sim = FloatSimulator(net)
    return _drive(sim, stream, t_end, forced_spikes)


def float_train(
    net: FloatNetwork,
    stream: list[SpikeEvent],
    t_end: int,
    forced_spikes: dict[int, list[int]] | None = None,
) -> tuple[RunTrace, np.ndarray, np.ndarray]:
    """Run with STDP on and hand back (trace, w_aa, w_in) after learning."""
    sim = FloatSimulator(net)
    trace = _drive(sim, stream, t_end, forced_spikes)
    return trace, sim.w_aa.copy(), sim.w_in.copy()


def _drive(sim, stream, t_end, forced_spikes):
    if t_end < 0:
        raise ValueError("t_end must be non-negative")
    last = 0
    for ev in stream:
        if ev.time < 0 or ev.time < last:
            raise ValueError("input stream times must be non-decreasing")
        if not 0 <= ev.address < sim.net.n_in:
            raise ValueError("event address out of range")
        last = ev.time
    trace = RunTrace()
    head = 0
    forced_spikes = forced_spikes or {}
    for t in range(t_end):
        chans = []
        while head < len(stream) and stream[head].time == t:
            chans.append(stream[head].address)
            head += 1
        for k in sim.step(chans, forced_spikes.get(t)):
            trace.raster.append((t, k))
        trace.membrane.append(float(sim.v[sim.net.monitored_neuron]))
    trace.final_w_aa = sim.w_aa.copy()
    trace.final_w_in = sim.w_in.copy()
    return trace


def quantize_weights(weights: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """Scale then round to nearest (ties away from zero), saturate to int8."""
    scaled = np.asarray(weights, dtype=np.float64) * scale
    rounded = np.where(scaled >= 0, np.floor(scaled + 0.5), np.ceil(scaled - 0.5))
    return np.clip(rounded, -128, 127).astype(np.int8)
