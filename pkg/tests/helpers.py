"""Shared builders for the test suite."""

from __future__ import annotations

import numpy as np

from spikecore import NetworkConfig, NeuronParams, RunTrace, SpikeEvent, StdpParams


def default_neuron(**overrides) -> NeuronParams:
    base = dict(
        v_th=2048, leak=10, v_reset=0, syn_leak=64,
        refractory_steps=0, membrane_floor=True,
    )
    base.update(overrides)
    return NeuronParams(**base)


def default_stdp(**overrides) -> StdpParams:
    base = dict(dw_pos=4, dw_neg=3, t_pre=10, t_post=10, enabled=True)
    base.update(overrides)
    return StdpParams(**base)


def make_config(
    n=2, n_in=1, w_aa=None, w_in=None, mask_aa=None, mask_in=None,
    neuron=None, stdp=None, weight_shift=10, monitored_neuron=0,
) -> NetworkConfig:
    w_aa = np.zeros((n, n), dtype=np.int8) if w_aa is None else np.asarray(w_aa)
    w_in = np.zeros((n, n_in), dtype=np.int8) if w_in is None else np.asarray(w_in)
    mask_aa = (
        np.zeros((n, n), dtype=np.uint8) if mask_aa is None else np.asarray(mask_aa)
    )
    mask_in = (
        np.zeros((n, n_in), dtype=np.uint8) if mask_in is None else np.asarray(mask_in)
    )
    return NetworkConfig(
        n=n,
        n_in=n_in,
        w_aa=w_aa,
        w_in=w_in,
        enable_stdp_aa=mask_aa,
        enable_stdp_in=mask_in,
        neuron_params=neuron or default_neuron(),
        stdp_params=stdp or default_stdp(),
        weight_shift=weight_shift,
        monitored_neuron=monitored_neuron,
    )


def random_config(rng: np.random.Generator, wild: bool = False):
    """One random network + stimulus for engine/oracle comparison.

    ``wild`` draws full-range weights and dense stimulation over a short
    run (saturation and spike storms); the default flavour is moderate
    activity over a longer run.
    """
    n = int(rng.integers(1, 21))
    n_in = int(rng.integers(1, 21))
    if wild:
        w_lo, w_hi = -128, 128
        v_th = int(rng.integers(0, 20000))
        t_end = int(rng.integers(20, 121))
        rate = rng.uniform(0.2, 2.0)
    else:
        w_lo, w_hi = -25, 26
        v_th = int(rng.integers(4000, 40000))
        t_end = int(rng.integers(100, 601))
        rate = rng.uniform(0.02, 0.5)
    neuron = NeuronParams(
        v_th=v_th,
        leak=int(rng.integers(0, 2000)),
        v_reset=int(rng.integers(-20480, 1)),
        syn_leak=int(rng.integers(0, 4000)),
        refractory_steps=int(rng.integers(0, 4)),
        membrane_floor=bool(rng.integers(0, 4) > 0),
    )
    stdp = StdpParams(
        dw_pos=int(rng.integers(1, 31)),
        dw_neg=int(rng.integers(1, 31)),
        t_pre=int(rng.integers(1, 61)),
        t_post=int(rng.integers(1, 61)),
        enabled=bool(rng.integers(0, 4) > 0),  # on 3/4 of the time
    )
    config = NetworkConfig(
        n=n,
        n_in=n_in,
        w_aa=rng.integers(w_lo, w_hi, (n, n)).astype(np.int8),
        w_in=rng.integers(w_lo, w_hi, (n, n_in)).astype(np.int8),
        enable_stdp_aa=rng.integers(0, 2, (n, n)).astype(np.uint8),
        enable_stdp_in=rng.integers(0, 2, (n, n_in)).astype(np.uint8),
        neuron_params=neuron,
        stdp_params=stdp,
        weight_shift=int(rng.integers(0, 11)),
        monitored_neuron=int(rng.integers(0, n)),
    )
    n_events = int(rng.poisson(rate * t_end))
    times = np.sort(rng.integers(0, t_end, n_events))
    addrs = rng.integers(0, n_in, n_events)
    stream = [SpikeEvent(int(t), int(a)) for t, a in zip(times, addrs)]
    return config, stream, t_end


def representable_config(rng: np.random.Generator):
    """A random network guaranteed never to saturate any register.

    Weights are small, the synaptic leak exceeds the largest possible
    per-step injection (so i_syn cannot accumulate), thresholds reset
    the membrane long before the rails, and the floor pins it from
    below; every intermediate value is then a dyadic rational that
    float64 reproduces exactly.
    """
    n = int(rng.integers(1, 9))
    n_in = int(rng.integers(1, 9))
    t_end = int(rng.integers(50, 201))
    shift = int(rng.integers(0, 4))
    neuron = NeuronParams(
        v_th=int(rng.integers(1024, 30000)),
        leak=int(rng.integers(0, 512)),
        v_reset=int(rng.integers(-10240, 1)),
        syn_leak=int(rng.integers(1100, 4000)),
        refractory_steps=int(rng.integers(0, 4)),
        membrane_floor=True,
    )
    stdp = StdpParams(
        dw_pos=int(rng.integers(1, 8)),
        dw_neg=int(rng.integers(1, 8)),
        t_pre=int(rng.integers(2, 30)),
        t_post=int(rng.integers(2, 30)),
        enabled=True,
    )
    config = NetworkConfig(
        n=n,
        n_in=n_in,
        w_aa=rng.integers(-8, 9, (n, n)).astype(np.int8),
        w_in=rng.integers(-8, 9, (n, n_in)).astype(np.int8),
        enable_stdp_aa=rng.integers(0, 2, (n, n)).astype(np.uint8),
        enable_stdp_in=rng.integers(0, 2, (n, n_in)).astype(np.uint8),
        neuron_params=neuron,
        stdp_params=stdp,
        weight_shift=shift,
        monitored_neuron=int(rng.integers(0, n)),
    )
    n_events = int(rng.poisson(0.4 * t_end))
    times = np.sort(rng.integers(0, t_end, n_events))
    addrs = rng.integers(0, n_in, n_events)
    stream = [SpikeEvent(int(t), int(a)) for t, a in zip(times, addrs)]
    return config, stream, t_end


def assert_traces_equal(a: RunTrace, b: RunTrace) -> None:
    assert a.raster == b.raster
    assert a.membrane == b.membrane
    assert np.array_equal(a.final_w_aa, b.final_w_aa)
    assert np.array_equal(a.final_w_in, b.final_w_in)
