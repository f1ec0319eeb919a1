"""Pair-based STDP with a rectangular learning window over 8-bit traces.

The rule itself is the window law

    dw = +dw_pos   if 0 < dt < t_pre     (pre fired first: causal)
         -dw_neg   if 0 < -dt < t_post   (post fired first: acausal)
         0         otherwise (including dt = 0 and the window boundaries)

where ``dt`` is the post spike time minus the pre spike time, measured in
timesteps.  The hardware tracks pair ages with 8-bit counters:

* ``synaptic_traces[i][j]`` — steps since presynaptic neuron ``i`` last
  spiked, one counter per recurrent synapse.  0xFF marks a disabled
  (never armed / expired / consumed) trace; a spike restarts the
  counter at 0 for the whole outgoing row.
* ``post_traces[j]`` — steps since neuron ``j`` last spiked, one counter
  per neuron, arming the acausal (depression) direction.
* ``update_state[i][j]`` — mirrors trace activity: 1 exactly when the
  synaptic trace is active (not 0xFF).
* the input weight matrix has its own bank of the same machinery
  (``in_traces``/``in_update_state`` for causal pairs with input
  channels, ``in_post_traces`` per input synapse for acausal pairs).

Every trace supports at most one step of weight updates: pairing
consumes it (back to 0xFF).  Pair detection for a step runs against the
trace state as it stood when the step's spikes were known — all
potentiations apply, then all depressions, then all trace resets — so
the outcome never depends on the order in which simultaneously firing
neurons are visited.  The plasticity masks gate *weight writes only*;
pairing and consumption proceed identically for masked synapses, which
is what keeps masked weights bit-identical without perturbing their
neighbours' timing.  Traces age by +1 each step and expire to 0xFF on
reaching the window length, so window parameters are capped at 254.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fixedpoint import W_MAX, W_MIN

TRACE_DISABLED = 0xFF
WINDOW_MAX = 254


@dataclass(frozen=True, slots=True)
class StdpParams:
    """Learning-rule constants; integer weight steps and window lengths."""

    dw_pos: int
    dw_neg: int
    t_pre: int
    t_post: int
    enabled: bool = True

    def validate(self) -> None:
        if not 1 <= self.dw_pos <= W_MAX:
            raise ValueError("dw_pos must be a positive integer <= 127")
        if not 1 <= self.dw_neg <= W_MAX:
            raise ValueError("dw_neg must be a positive integer <= 127")
        if not 1 <= self.t_pre <= WINDOW_MAX:
            raise ValueError(f"t_pre must be in [1, {WINDOW_MAX}]")
        if not 1 <= self.t_post <= WINDOW_MAX:
            raise ValueError(f"t_post must be in [1, {WINDOW_MAX}]")


def stdp_delta(delta_t: int, params: StdpParams) -> int:
    """Weight change for one isolated pre/post pair separated by delta_t."""
    if 0 < delta_t < params.t_pre:
        return params.dw_pos
    if 0 < -delta_t < params.t_post:
        return -params.dw_neg
    return 0


def _full(shape, value, dtype=np.uint8):
    return np.full(shape, value, dtype=dtype)


@dataclass(slots=True)
class TraceState:
    """The STDP bookkeeping matrices for one network instance.

    ``n`` recurrent neurons, ``n_in`` input channels.  All counters are
    uint8 with 0xFF as the disabled sentinel; the update-state and
    enable matrices are 0/1 uint8.
    """

    synaptic_traces: np.ndarray  # (n, n) pre-spike ages, row = source
    post_traces: np.ndarray  # (n,) post-spike ages
    update_state: np.ndarray  # (n, n) trace-active flags
    enable_stdp: np.ndarray  # (n, n) static weight-write mask
    in_traces: np.ndarray = field(default=None)  # (n, n_in) input pre ages
    in_update_state: np.ndarray = field(default=None)  # (n, n_in)
    in_post_traces: np.ndarray = field(default=None)  # (n, n_in) post ages
    enable_stdp_in: np.ndarray = field(default=None)  # (n, n_in)

    @classmethod
    def create(
        cls,
        n: int,
        n_in: int = 0,
        enable_stdp: np.ndarray | None = None,
        enable_stdp_in: np.ndarray | None = None,
    ) -> "TraceState":
        if enable_stdp is None:
            enable_stdp = _full((n, n), 1)
        if enable_stdp_in is None:
            enable_stdp_in = _full((n, n_in), 1)
        return cls(
            synaptic_traces=_full((n, n), TRACE_DISABLED),
            post_traces=_full((n,), TRACE_DISABLED),
            update_state=_full((n, n), 0),
            enable_stdp=np.asarray(enable_stdp, dtype=np.uint8).reshape(n, n),
            in_traces=_full((n, n_in), TRACE_DISABLED),
            in_update_state=_full((n, n_in), 0),
            in_post_traces=_full((n, n_in), TRACE_DISABLED),
            enable_stdp_in=np.asarray(enable_stdp_in, dtype=np.uint8).reshape(n, n_in),
        )

    @property
    def n(self) -> int:
        return self.synaptic_traces.shape[0]

    @property
    def n_in(self) -> int:
        return self.in_traces.shape[1]

    def coupling_ok(self) -> bool:
        """update_state == 1 exactly where the matching trace is active."""
        aa = np.array_equal(
            self.update_state != 0, self.synaptic_traces != TRACE_DISABLED
        )
        inp = np.array_equal(
            self.in_update_state != 0, self.in_traces != TRACE_DISABLED
        )
        return aa and inp


def _bump_saturating(weights: np.ndarray, mask: np.ndarray, delta: int) -> None:
    """Masked in-place weight change, saturating in the signed 8-bit range."""
    if not mask.any():
        return
    wide = weights.astype(np.int16)
    wide[mask] += delta
    np.clip(wide, W_MIN, W_MAX, out=wide)
    weights[mask] = wide[mask].astype(np.int8)


def _tick_bank(ages: np.ndarray, window: int, flags: np.ndarray | None) -> None:
    active = ages != TRACE_DISABLED
    ages[active] += 1
    expired = active & (ages >= window)
    ages[expired] = TRACE_DISABLED
    if flags is not None:
        flags[expired] = 0


def trace_tick(traces: TraceState, params: StdpParams) -> None:
    """Age every active counter by one step; expire those hitting a window."""
    _tick_bank(traces.synaptic_traces, params.t_pre, traces.update_state)
    _tick_bank(traces.post_traces, params.t_post, None)
    _tick_bank(traces.in_traces, params.t_pre, traces.in_update_state)
    _tick_bank(traces.in_post_traces, params.t_post, None)


def apply_spikes(
    fired: list[int] | np.ndarray,
    input_channels: list[int] | np.ndarray,
    traces: TraceState,
    w_aa: np.ndarray,
    w_in: np.ndarray | None,
    params: StdpParams,
) -> None:
    """Run one step's STDP for the given fired neurons and input events.

    Pair detection reads the trace state as passed in; weight writes
    apply potentiation first, then depression, each cell at most once
    per pass and only where the enable mask is 1; finally all traces
    touched by this step's spikes are consumed or restarted.  Calling
    this with any permutation of ``fired`` is bit-identical.
    """
    fired = np.asarray(sorted(set(int(i) for i in fired)), dtype=np.intp)
    chans = np.asarray(sorted(set(int(a) for a in input_channels)), dtype=np.intp)
    st = traces.synaptic_traces
    post = traces.post_traces

    # -- pair detection against the step-start state ----------------------
    pot_aa = np.zeros_like(st, dtype=bool)
    if fired.size:
        cols = st[:, fired]
        pot_aa[:, fired] = (cols > 0) & (cols < params.t_pre)

    post_armed = (post > 0) & (post < params.t_post)
    dep_aa = np.zeros_like(st, dtype=bool)
    if fired.size:
        dep_aa[fired, :] = post_armed[None, :]

    pot_in = np.zeros_like(traces.in_traces, dtype=bool)
    dep_in = np.zeros_like(traces.in_post_traces, dtype=bool)
    if w_in is not None:
        if fired.size:
            rows = traces.in_traces[fired, :]
            pot_in[fired, :] = (rows > 0) & (rows < params.t_pre)
        if chans.size:
            cols = traces.in_post_traces[:, chans]
            dep_in[:, chans] = (cols > 0) & (cols < params.t_post)

    # -- weight writes: all potentiations, then all depressions -----------
    _bump_saturating(w_aa, pot_aa & (traces.enable_stdp != 0), params.dw_pos)
    if w_in is not None:
        _bump_saturating(w_in, pot_in & (traces.enable_stdp_in != 0), params.dw_pos)
    _bump_saturating(w_aa, dep_aa & (traces.enable_stdp != 0), -params.dw_neg)
    if w_in is not None:
        _bump_saturating(w_in, dep_in & (traces.enable_stdp_in != 0), -params.dw_neg)

    # -- consumption (unmasked) and trace restarts -------------------------
    st[pot_aa] = TRACE_DISABLED
    traces.update_state[pot_aa] = 0
    if fired.size and post_armed.any():
        post[post_armed] = TRACE_DISABLED
    if w_in is not None:
        traces.in_traces[pot_in] = TRACE_DISABLED
        traces.in_update_state[pot_in] = 0
        traces.in_post_traces[dep_in] = TRACE_DISABLED

    if fired.size:
        st[fired, :] = 0
        traces.update_state[fired, :] = 1
        post[fired] = 0
        traces.in_post_traces[fired, :] = 0
    if chans.size:
        traces.in_traces[:, chans] = 0
        traces.in_update_state[:, chans] = 1


def on_spike(
    n: int, traces: TraceState, weights: np.ndarray, params: StdpParams
) -> None:
    """Single-neuron spike handler over the recurrent matrix.

    Composes the potentiation pass (incoming causal traces into ``n``),
    the depression pass (targets of ``n`` with armed post traces), and
    the trace restart for ``n``'s outgoing row.  The engine applies the
    same passes batched over all neurons firing in a step.
    """
    apply_spikes([n], [], traces, weights, None, params)
