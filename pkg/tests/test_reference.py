"""Tests for the double-precision simulator and quantization.

The scalar fixed-point oracle is exercised against the engine in
test_network.py and the acceptance suite; here we pin down the float
twin's own semantics and the places where float and fixed provably
agree or provably part ways.
"""

from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from spikecore import Network, SpikeEvent
from spikecore.harness.divergence import divergence_report, rasters_agree_stdp_off
from spikecore.reference import (
    FloatNetwork,
    FloatSimulator,
    FloatStdpParams,
    float_run,
    float_train,
    quantize_weights,
)

from helpers import make_config, representable_config


def tiny_float_net(**overrides) -> FloatNetwork:
    base = dict(
        n=2,
        n_in=1,
        w_aa=np.zeros((2, 2)),
        w_in=np.zeros((2, 1)),
        enable_stdp_aa=np.ones((2, 2), dtype=np.uint8),
        enable_stdp_in=np.ones((2, 1), dtype=np.uint8),
        v_th=1e9,
        leak=0.0,
        v_reset=0.0,
        syn_leak=0.0,
        stdp=FloatStdpParams(dw_pos=1.0, dw_neg=0.5, t_pre=10, t_post=10),
    )
    base.update(overrides)
    return FloatNetwork(**base)


class TestFloatSimulator:
    def test_forced_spike_fires_regardless_of_membrane(self):
        sim = FloatSimulator(tiny_float_net())
        assert sim.step([], forced=[1]) == [1]
        assert sim.step([]) == []

    def test_rectangular_causal_pair_adds_dw_pos(self):
        sim = FloatSimulator(tiny_float_net())
        sim.step([], forced=[0])          # pre at t=0
        sim.step([], forced=[1])          # post at t=1, age 1 pairs
        assert sim.w_aa[0][1] == pytest.approx(1.0)
        assert sim.w_aa[1][0] == pytest.approx(-0.5)  # acausal for 1->0

    def test_rectangular_delta_independent_of_age(self):
        for gap in (1, 4, 9):
            sim = FloatSimulator(tiny_float_net())
            sim.step([], forced=[0])
            for _ in range(gap - 1):
                sim.step([])
            sim.step([], forced=[1])
            assert sim.w_aa[0][1] == pytest.approx(1.0), f"gap {gap}"

    def test_exponential_delta_decays_with_age(self):
        deltas = []
        for gap in (1, 3, 6):
            stdp = FloatStdpParams(dw_pos=1.0, dw_neg=0.5, t_pre=10, t_post=10,
                                   mode="exponential")
            sim = FloatSimulator(tiny_float_net(stdp=stdp))
            sim.step([], forced=[0])
            for _ in range(gap - 1):
                sim.step([])
            sim.step([], forced=[1])
            deltas.append(sim.w_aa[0][1])
            tau = 10 / 3.0
            assert sim.w_aa[0][1] == pytest.approx(np.exp(-gap / tau))
        assert deltas[0] > deltas[1] > deltas[2]

    def test_exponential_tau_override(self):
        stdp = FloatStdpParams(dw_pos=1.0, dw_neg=0.5, t_pre=10, t_post=10,
                               mode="exponential", tau_pos=2.0)
        sim = FloatSimulator(tiny_float_net(stdp=stdp))
        sim.step([], forced=[0])
        sim.step([], forced=[1])
        assert sim.w_aa[0][1] == pytest.approx(np.exp(-1 / 2.0))

    def test_weights_pass_int8_bounds_without_clipping(self):
        stdp = FloatStdpParams(dw_pos=50.0, dw_neg=1.0, t_pre=10, t_post=10)
        sim = FloatSimulator(tiny_float_net(stdp=stdp))
        for _ in range(3):
            sim.step([], forced=[0])
            sim.step([], forced=[1])
        # three +50 pairs, minus one -1 depression each time neuron 0
        # refires one step after neuron 1: 150 - 2, far past the int8 rail
        assert sim.w_aa[0][1] == pytest.approx(148.0)

    def test_outside_window_no_update(self):
        sim = FloatSimulator(tiny_float_net())
        sim.step([], forced=[0])
        for _ in range(10):                # age expires at t_pre=10
            sim.step([])
        sim.step([], forced=[1])
        assert sim.w_aa[0][1] == pytest.approx(0.0)

    def test_reset_state_preserves_weights(self):
        sim = FloatSimulator(tiny_float_net())
        sim.step([], forced=[0])
        sim.step([], forced=[1])
        w = sim.w_aa.copy()
        sim.reset_state()
        assert np.array_equal(sim.w_aa, w)
        assert sim.t == 0

    def test_from_fixed_scales_registers_to_real_units(self):
        config = make_config(weight_shift=7)
        fnet = FloatNetwork.from_fixed(config)
        assert fnet.v_th == pytest.approx(2048 / 1024.0)
        assert fnet.syn_leak == pytest.approx(64 / 1024.0)
        sim = FloatSimulator(fnet)
        assert sim.gain == pytest.approx(2.0 ** (7 - 10))

    def test_float_train_returns_learned_weights(self):
        net = tiny_float_net()
        _, w_aa, w_in = float_train(
            net, [], 2, forced_spikes={0: [0], 1: [1]}
        )
        assert w_aa[0][1] == pytest.approx(1.0)
        assert net.w_aa[0][1] == 0.0  # input net untouched


class TestQuantize:
    def test_round_half_away_from_zero(self):
        assert quantize_weights(np.array([0.4999]))[0] == 0
        assert quantize_weights(np.array([0.5]))[0] == 1
        assert quantize_weights(np.array([-0.5]))[0] == -1
        assert quantize_weights(np.array([1.5]))[0] == 2

    def test_saturates_to_int8(self):
        out = quantize_weights(np.array([130.0, -200.0, 127.49]))
        assert out.tolist() == [127, -128, 127]
        assert out.dtype == np.int8

    def test_scale_applied_before_rounding(self):
        assert quantize_weights(np.array([10.0]), scale=12.7)[0] == 127

    def test_integers_pass_through_exactly(self):
        vals = np.arange(-128, 128, dtype=np.float64)
        assert np.array_equal(quantize_weights(vals), vals.astype(np.int8))


class TestFloatFixedAgreement:
    """With plasticity off and no saturation, the engines match exactly."""

    @pytest.mark.parametrize("seed", range(8))
    def test_rasters_identical_on_representable_nets(self, seed):
        config, stream, t_end = representable_config(np.random.default_rng(seed))
        report = rasters_agree_stdp_off(config, stream, t_end)
        assert report["agree"], report

    def test_membrane_samples_are_dyadically_exact(self):
        config, stream, t_end = representable_config(np.random.default_rng(99))
        quiet = dataclasses.replace(
            config,
            stdp_params=dataclasses.replace(config.stdp_params, enabled=False),
        )
        fixed = Network(quiet).run(stream, t_end)
        flt = float_run(FloatNetwork.from_fixed(quiet), stream, t_end)
        raw_from_float = [v * 1024.0 for v in flt.membrane]
        assert raw_from_float == [float(v) for v in fixed.membrane]


class TestDivergenceReport:
    def test_saturating_learning_diverges(self):
        # high-rate stimulation with large steps rails weights quickly
        rng = np.random.default_rng(3)
        config = make_config(
            n=4, n_in=2,
            w_aa=np.full((4, 4), 100, dtype=np.int8),
            w_in=np.full((4, 2), 120, dtype=np.int8),
            mask_aa=np.ones((4, 4), dtype=np.uint8),
            mask_in=np.ones((4, 2), dtype=np.uint8),
        )
        stream = [SpikeEvent(t, int(rng.integers(0, 2))) for t in range(200)]
        report = divergence_report(config, stream, 200, sample_every=20)
        assert report["fixed_saturated"]
        assert report["diverged"]
        assert report["n_differing"] > 0

    def test_unsaturated_learning_stays_identical(self):
        # small weights, few steps: integer-sized updates match exactly
        config = make_config(
            n=3, n_in=2,
            w_aa=np.zeros((3, 3), dtype=np.int8),
            w_in=np.full((3, 2), 8, dtype=np.int8),
            mask_aa=np.ones((3, 3), dtype=np.uint8),
            mask_in=np.ones((3, 2), dtype=np.uint8),
            neuron=None,
            stdp=None,
        )
        config = dataclasses.replace(
            config,
            neuron_params=dataclasses.replace(
                config.neuron_params, v_th=6144, syn_leak=2048
            ),
            stdp_params=dataclasses.replace(
                config.stdp_params, dw_pos=2, dw_neg=1
            ),
        )
        stream = [SpikeEvent(t, t % 2) for t in range(0, 40, 2)]
        report = divergence_report(config, stream, 40, sample_every=10)
        assert not report["fixed_saturated"]
        assert not report["diverged"]
        assert report["n_differing"] == 0

    def test_report_checkpoints_cover_run(self):
        config, stream, t_end = representable_config(np.random.default_rng(5))
        report = divergence_report(config, stream, t_end, sample_every=25)
        assert report["checkpoints"][-1] == t_end
        assert len(report["checkpoints"]) == len(report["max_abs_diff_aa"])
