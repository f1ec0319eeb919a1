"""Discrete-time leaky integrate-and-fire dynamics in Q1.7.10 arithmetic.

Each neuron carries a membrane potential ``v`` and a synaptic current
``i_syn``, both raw Q1.7.10 registers.  One call to :func:`lif_step`
advances a neuron by one timestep:

* the synaptic current decays toward zero by ``syn_leak`` (it never
  crosses zero), then absorbs the step's injected charge;
* the membrane integrates ``v - leak + i_syn`` with saturating adds;
* if the result exceeds ``v_th`` (strictly) the neuron spikes, resets to
  ``v_reset`` and becomes refractory for ``refractory_steps`` steps.

A refractory neuron is frozen at ``v_reset`` and *discards* injected
charge, but its synaptic current keeps decaying, so no stale charge
survives the hold.  ``membrane_floor`` (on by default) clamps the
membrane from below at ``v_reset`` so strong inhibition cannot drive it
arbitrarily negative.
"""

from __future__ import annotations

from dataclasses import dataclass

from .fixedpoint import RAW_MAX, RAW_MIN, q_add, q_sub


@dataclass(frozen=True, slots=True)
class NeuronParams:
    """Per-network neuron constants, all raw Q1.7.10 except the counters."""

    v_th: int
    leak: int
    v_reset: int
    syn_leak: int
    refractory_steps: int = 0
    membrane_floor: bool = True

    def validate(self) -> None:
        for name in ("v_th", "leak", "v_reset", "syn_leak"):
            raw = getattr(self, name)
            if not RAW_MIN <= raw <= RAW_MAX:
                raise ValueError(f"{name}={raw} outside Q1.7.10 raw range")
        if self.leak < 0:
            raise ValueError("leak must be non-negative")
        if self.syn_leak < 0:
            raise ValueError("syn_leak must be non-negative")
        if self.refractory_steps < 0:
            raise ValueError("refractory_steps must be non-negative")
        if self.v_reset > self.v_th:
            raise ValueError("v_reset must not exceed v_th")


@dataclass(frozen=True, slots=True)
class NeuronState:
    """Snapshot of one neuron between timesteps."""

    v: int
    i_syn: int = 0
    refractory_remaining: int = 0
    spiked: bool = False


def syn_decay(i_syn: int, syn_leak: int) -> int:
    """Move a synaptic current toward zero by ``syn_leak``, never past it."""
    if i_syn >= 0:
        return i_syn - syn_leak if i_syn > syn_leak else 0
    return i_syn + syn_leak if -i_syn > syn_leak else 0


def lif_step(state: NeuronState, params: NeuronParams, injected: int = 0) -> NeuronState:
    """Advance one neuron by one timestep; pure function of its inputs.

    ``injected`` is the step's total incoming charge, already saturated
    to the Q1.7.10 range by the caller (same-step events accumulate in a
    wide register and clamp once, so their order never matters).
    """
    if state.refractory_remaining > 0:
        return NeuronState(
            v=params.v_reset,
            i_syn=syn_decay(state.i_syn, params.syn_leak),
            refractory_remaining=state.refractory_remaining - 1,
            spiked=False,
        )

    i_syn = q_add(syn_decay(state.i_syn, params.syn_leak), injected)
    v = q_add(q_sub(state.v, params.leak), i_syn)
    if params.membrane_floor and v < params.v_reset:
        v = params.v_reset

    if v > params.v_th:
        return NeuronState(
            v=params.v_reset,
            i_syn=i_syn,
            refractory_remaining=params.refractory_steps,
            spiked=True,
        )
    return NeuronState(v=v, i_syn=i_syn, refractory_remaining=0, spiked=False)
