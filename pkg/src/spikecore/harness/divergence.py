"""Fixed-point vs. double-precision learning divergence reports.

With plasticity on, the two engines genuinely part ways once any
quantity hits a representation rail (weight saturation at the int8
bounds being the usual trigger); the report captures both weight
trajectories and where they first disagree, asserting nothing beyond
what it observed.  With plasticity off and all registers in
representable range, every intermediate value is a dyadic rational that
float64 carries exactly, so the spike rasters must agree — a helper
checks exactly that.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from ..network import Network, NetworkConfig, SpikeEvent
from ..reference import FloatNetwork, FloatSimulator, float_run


def _group_by_step(stream: list[SpikeEvent], t_end: int) -> list[list[int]]:
    by_step: list[list[int]] = [[] for _ in range(t_end)]
    for ev in stream:
        if 0 <= ev.time < t_end:
            by_step[ev.time].append(ev.address)
    return by_step


def divergence_report(
    config: NetworkConfig,
    stream: list[SpikeEvent],
    t_end: int,
    *,
    sample_every: int = 50,
) -> dict:
    """Run both engines with the given config and track weight drift.

    Snapshots both weight matrices every ``sample_every`` steps plus at
    the end; reports per-checkpoint maximum absolute difference, the
    first checkpoint where they differ, and whether the fixed engine
    ever pinned a weight to an int8 rail (the usual divergence source).
    """
    config.validate()
    fixed = Network(config)
    fixed.reset_state()
    fsim = FloatSimulator(FloatNetwork.from_fixed(config))

    checkpoints: list[int] = []
    max_diff_aa: list[float] = []
    max_diff_in: list[float] = []
    fixed_snaps: list[tuple[np.ndarray, np.ndarray]] = []
    float_snaps: list[tuple[np.ndarray, np.ndarray]] = []
    saturated = False
    first_divergence = None

    by_step = _group_by_step(stream, t_end)
    for t in range(t_end):
        events = [SpikeEvent(t, a) for a in sorted(by_step[t])]
        fixed.step(events)
        fsim.step(sorted(by_step[t]))
        if (t + 1) % sample_every == 0 or t == t_end - 1:
            w_aa, w_in = fixed.readback_weights()
            diff_aa = float(np.max(np.abs(w_aa.astype(np.float64) - fsim.w_aa), initial=0.0))
            diff_in = float(np.max(np.abs(w_in.astype(np.float64) - fsim.w_in), initial=0.0))
            checkpoints.append(t + 1)
            max_diff_aa.append(diff_aa)
            max_diff_in.append(diff_in)
            fixed_snaps.append((w_aa, w_in))
            float_snaps.append((fsim.w_aa.copy(), fsim.w_in.copy()))
            if (w_aa == 127).any() or (w_aa == -128).any() or \
               (w_in == 127).any() or (w_in == -128).any():
                saturated = True
            if first_divergence is None and (diff_aa > 0 or diff_in > 0):
                first_divergence = t + 1

    final_fixed_aa, final_fixed_in = fixed_snaps[-1] if fixed_snaps else fixed.readback_weights()
    if fixed_snaps:
        final_float_aa, final_float_in = float_snaps[-1]
    else:
        final_float_aa, final_float_in = fsim.w_aa.copy(), fsim.w_in.copy()
    return {
        "t_end": t_end,
        "checkpoints": checkpoints,
        "max_abs_diff_aa": max_diff_aa,
        "max_abs_diff_in": max_diff_in,
        "fixed_w_aa": final_fixed_aa,
        "fixed_w_in": final_fixed_in,
        "float_w_aa": final_float_aa,
        "float_w_in": final_float_in,
        "n_differing": int(
            (final_fixed_aa.astype(np.float64) != final_float_aa).sum()
            + (final_fixed_in.astype(np.float64) != final_float_in).sum()
        ),
        "fixed_saturated": saturated,
        "diverged": bool(max_diff_aa and (max_diff_aa[-1] > 0 or max_diff_in[-1] > 0)),
    }


def rasters_agree_stdp_off(
    config: NetworkConfig, stream: list[SpikeEvent], t_end: int
) -> dict:
    """Compare spike rasters of both engines with plasticity disabled.

    Agreement is exact whenever the fixed engine never saturates a
    register, which holds for small nets with moderate weights and
    thresholds; the caller picks such configs.
    """
    quiet = dataclasses.replace(
        config, stdp_params=dataclasses.replace(config.stdp_params, enabled=False)
    )
    fixed_trace = Network(quiet).run(stream, t_end)
    float_trace = float_run(FloatNetwork.from_fixed(quiet), stream, t_end)
    agree = fixed_trace.raster == float_trace.raster
    report = {
        "agree": bool(agree),
        "n_spikes_fixed": len(fixed_trace.raster),
        "n_spikes_float": len(float_trace.raster),
        "first_mismatch": None,
    }
    if not agree:
        for a, b in zip(fixed_trace.raster, float_trace.raster):
            if a != b:
                report["first_mismatch"] = {"fixed": a, "float": b}
                break
        else:
            longer = fixed_trace.raster if len(fixed_trace.raster) > len(float_trace.raster) else float_trace.raster
            report["first_mismatch"] = {"extra": longer[min(len(fixed_trace.raster), len(float_trace.raster))]}
    return report
