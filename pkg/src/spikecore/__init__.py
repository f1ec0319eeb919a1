"""Bit-accurate emulator of a fixed-point spiking neural network core.

The package models a 100-neuron leaky integrate-and-fire core with
Q1.7.10 saturating arithmetic, signed 8-bit synapses, rectangular-window
pair STDP, and the 3-byte spike wire protocol of its host link, plus
reference oracles and the DIGITS / citation-graph experiment harnesses.
"""

from .dynamics import NeuronParams, NeuronState, lif_step, syn_decay
from .fixedpoint import (
    FRAC_BITS,
    ONE,
    RAW_MAX,
    RAW_MIN,
    W_MAX,
    W_MIN,
    from_real,
    q_add,
    q_sub,
    quantize_weight,
    saturate,
    to_real,
    weight_to_current,
)
from .network import (
    N_MAX_DEFAULT,
    Network,
    NetworkConfig,
    RunTrace,
    SpikeEvent,
)
from .plasticity import (
    TRACE_DISABLED,
    StdpParams,
    TraceState,
    apply_spikes,
    on_spike,
    stdp_delta,
    trace_tick,
)
from .reference import (
    FloatNetwork,
    FloatStdpParams,
    float_run,
    float_train,
    oracle_run,
    quantize_weights,
)

__version__ = "0.1.0"

__all__ = [
    "FRAC_BITS",
    "ONE",
    "RAW_MAX",
    "RAW_MIN",
    "W_MAX",
    "W_MIN",
    "N_MAX_DEFAULT",
    "TRACE_DISABLED",
    "FloatNetwork",
    "FloatStdpParams",
    "Network",
    "NetworkConfig",
    "NeuronParams",
    "NeuronState",
    "RunTrace",
    "SpikeEvent",
    "StdpParams",
    "TraceState",
    "apply_spikes",
    "float_run",
    "float_train",
    "from_real",
    "lif_step",
    "on_spike",
    "oracle_run",
    "q_add",
    "q_sub",
    "quantize_weight",
    "quantize_weights",
    "saturate",
    "stdp_delta",
    "syn_decay",
    "to_real",
    "trace_tick",
    "weight_to_current",
]
