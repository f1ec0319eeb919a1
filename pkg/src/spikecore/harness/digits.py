"""One-shot digit classification: train in float, evaluate in fixed point.

Training presents each sample exactly once to a 64-input, 10-output
feedforward float network with teacher forcing: after every step that
carried input spikes, the output neuron of the sample's label is forced
to fire on the following step, so every input spike forms exactly one
causal pair with the label neuron and potentiates its synapse once.
With the default rectangular rule this reduces to Hebbian counting —
``w[c][a] = dw_pos * (number of spikes channel a emitted across class-c
samples)`` — but the same loop drives the exponential rule unchanged.

The learned weights are normalized to the full positive int8 range and
evaluated on the fixed-point engine with plasticity off: each test
sample is rate-encoded, run for one window, and classified by the
output neuron with the most spikes (ties resolve to the lowest index).
"""

from __future__ import annotations

import os
from collections import defaultdict
from dataclasses import dataclass

import numpy as np
import yaml

from ..dynamics import NeuronParams
from ..network import Network, NetworkConfig
from ..plasticity import StdpParams
from ..reference import (
    FloatNetwork,
    FloatSimulator,
    FloatStdpParams,
    float_run,
    quantize_weights,
)
from .datasets import N_CLASSES, N_PIXELS
from .encoding import WINDOW_STEPS, rate_encode_sample

# Evaluation-time dynamics, found by a coarse sweep.  weight_shift=2
# with this synaptic leak keeps every register under ~81.0 across the
# full dataset (bound 127.9), so no fixed-point value ever saturates
# and the float evaluation is exactly equal, not merely close.
EVAL_V_TH = 20480          # 20.0
EVAL_LEAK = 512            # 0.5
EVAL_SYN_LEAK = 6144       # 6.0
EVAL_WEIGHT_SHIFT = 2
EVAL_REFRACTORY = 0


def split_digits(n_samples: int, *, train_frac: float = 0.7,
                 seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic shuffled train/test split (indices)."""
    if not 0.0 < train_frac < 1.0:
        raise ValueError(f"train_frac must be in (0, 1), got {train_frac}")
    perm = np.random.default_rng(seed).permutation(n_samples)
    cut = int(n_samples * train_frac)
    return perm[:cut], perm[cut:]


@dataclass
class DigitsModel:
    """A trained readout plus everything needed to reproduce it."""

    w_in: np.ndarray  # (10, 64) int8
    spikes_per_level: int = 2
    window: int = WINDOW_STEPS
    seed: int = 0
    train_frac: float = 0.7
    forcing: str = "per-step"
    n_train: int = 0
    v_th: int = EVAL_V_TH
    leak: int = EVAL_LEAK
    syn_leak: int = EVAL_SYN_LEAK
    refractory_steps: int = EVAL_REFRACTORY
    weight_shift: int = EVAL_WEIGHT_SHIFT

    def eval_config(self) -> NetworkConfig:
        """Fixed-point network for inference: static weights, STDP off."""
        return NetworkConfig(
            n=N_CLASSES,
            n_in=N_PIXELS,
            w_aa=np.zeros((N_CLASSES, N_CLASSES), dtype=np.int8),
            w_in=self.w_in.copy(),
            enable_stdp_aa=np.zeros((N_CLASSES, N_CLASSES), dtype=np.uint8),
            enable_stdp_in=np.zeros((N_CLASSES, N_PIXELS), dtype=np.uint8),
            neuron_params=NeuronParams(
                v_th=self.v_th,
                leak=self.leak,
                v_reset=0,
                syn_leak=self.syn_leak,
                refractory_steps=self.refractory_steps,
            ),
            stdp_params=StdpParams(dw_pos=1, dw_neg=1, t_pre=1, t_post=1,
                                   enabled=False),
            weight_shift=self.weight_shift,
        )


def train_digits_one_shot(
    pixels: np.ndarray,
    labels: np.ndarray,
    *,
    spikes_per_level: int = 2,
    window: int = WINDOW_STEPS,
    forcing: str = "per-step",
    dw_pos: float = 1.0,
    stdp_mode: str = "rectangular",
) -> np.ndarray:
    """Single pass of teacher-forced STDP; returns float (10, 64) weights.

    ``forcing="per-step"`` (default) forces the label neuron one step
    after every input-carrying step.  ``forcing="single"`` instead
    forces one label spike after the whole window, which pairs each
    active channel's most recent spike only.
    """
    if forcing not in ("per-step", "single"):
        raise ValueError(f"unknown forcing mode {forcing!r}")
    pixels = np.asarray(pixels)
    if pixels.ndim != 2 or pixels.shape[1] != N_PIXELS:
        raise ValueError(f"pixels must be (n, {N_PIXELS}), got {pixels.shape}")
    # The trainer window covers every input age when a single late label
    # spike must reach back to step 0; per-step forcing only ever pairs
    # age-1 traces.
    t_pre = 2 if forcing == "per-step" else window + 2
    net = FloatNetwork(
        n=N_CLASSES,
        n_in=N_PIXELS,
        w_aa=np.zeros((N_CLASSES, N_CLASSES)),
        w_in=np.zeros((N_CLASSES, N_PIXELS)),
        enable_stdp_aa=np.zeros((N_CLASSES, N_CLASSES), dtype=np.uint8),
        enable_stdp_in=np.ones((N_CLASSES, N_PIXELS), dtype=np.uint8),
        v_th=1e18,  # nothing fires except by forcing
        leak=0.0,
        v_reset=0.0,
        syn_leak=0.0,
        stdp=FloatStdpParams(dw_pos=dw_pos, dw_neg=0.0, t_pre=t_pre, t_post=1,
                             mode=stdp_mode),
    )
    sim = FloatSimulator(net)
    for pix, label in zip(pixels, labels):
        events = rate_encode_sample(pix, spikes_per_level=spikes_per_level,
                                    window=window)
        by_step: dict[int, list[int]] = defaultdict(list)
        for ev in events:
            by_step[ev.time].append(ev.address)
        sim.reset_state()
        for t in range(window + 2):
            if forcing == "per-step":
                forced = [int(label)] if (t - 1) in by_step else None
            else:
                forced = [int(label)] if t == window else None
            sim.step(by_step.get(t, []), forced)
    return sim.w_in.copy()


def normalize_and_quantize(w_float: np.ndarray) -> np.ndarray:
    """Stretch non-negative float weights onto [0, 127] int8."""
    w_float = np.asarray(w_float, dtype=np.float64)
    peak = w_float.max()
    scale = 127.0 / peak if peak > 0 else 1.0
    return quantize_weights(w_float, scale)


def fit_digits(
    pixels: np.ndarray,
    labels: np.ndarray,
    *,
    train_frac: float = 0.7,
    seed: int = 0,
    spikes_per_level: int = 2,
    window: int = WINDOW_STEPS,
    forcing: str = "per-step",
) -> DigitsModel:
    """Split, train on the training portion, quantize, wrap as a model."""
    train_idx, _ = split_digits(len(labels), train_frac=train_frac, seed=seed)
    w_float = train_digits_one_shot(
        pixels[train_idx], labels[train_idx],
        spikes_per_level=spikes_per_level, window=window, forcing=forcing,
    )
    return DigitsModel(
        w_in=normalize_and_quantize(w_float),
        spikes_per_level=spikes_per_level,
        window=window,
        seed=seed,
        train_frac=train_frac,
        forcing=forcing,
        n_train=len(train_idx),
    )


def _predict_counts(raster: list[tuple[int, int]]) -> tuple[int, bool]:
    counts = np.zeros(N_CLASSES, dtype=np.int64)
    for _, neuron in raster:
        counts[neuron] += 1
    top = int(np.argmax(counts))  # ties resolve to the lowest index
    tie = int((counts == counts[top]).sum()) > 1
    return top, tie


def evaluate_digits(
    model: DigitsModel,
    pixels: np.ndarray,
    labels: np.ndarray,
    *,
    engine: str = "fixed",
) -> dict:
    """Classify every sample; returns an accuracy report dict."""
    if engine not in ("fixed", "float"):
        raise ValueError(f"unknown engine {engine!r}")
    config = model.eval_config()
    t_end = model.window + 2
    net = Network(config) if engine == "fixed" else None
    fnet = FloatNetwork.from_fixed(config) if engine == "float" else None

    per_class = {c: {"n": 0, "correct": 0} for c in range(N_CLASSES)}
    correct = ties = 0
    predictions = []
    for pix, label in zip(pixels, labels):
        events = rate_encode_sample(pix, spikes_per_level=model.spikes_per_level,
                                    window=model.window)
        if engine == "fixed":
            raster = net.run(events, t_end).raster
        else:
            raster = float_run(fnet, events, t_end).raster
        predicted, tie = _predict_counts(raster)
        predictions.append(predicted)
        ties += tie
        per_class[int(label)]["n"] += 1
        if predicted == int(label):
            correct += 1
            per_class[int(label)]["correct"] += 1
    n = len(predictions)
    return {
        "engine": engine,
        "n_test": n,
        "correct": correct,
        "accuracy": correct / n if n else 0.0,
        "ties": ties,
        "per_class": per_class,
        "predictions": predictions,
    }


def save_digits_model(model: DigitsModel, dirpath: str) -> None:
    os.makedirs(dirpath, exist_ok=True)
    from ..config_io import write_matrix_csv

    write_matrix_csv(model.w_in, os.path.join(dirpath, "w_in.csv"))
    meta = {
        "format": 1,
        "kind": "digits-one-shot",
        "spikes_per_level": model.spikes_per_level,
        "window": model.window,
        "seed": model.seed,
        "train_frac": model.train_frac,
        "forcing": model.forcing,
        "n_train": model.n_train,
        "eval_params": {
            "v_th": model.v_th,
            "leak": model.leak,
            "syn_leak": model.syn_leak,
            "refractory_steps": model.refractory_steps,
            "weight_shift": model.weight_shift,
        },
    }
    with open(os.path.join(dirpath, "model.yaml"), "w") as fh:
        yaml.safe_dump(meta, fh, sort_keys=False)


def load_digits_model(dirpath: str) -> DigitsModel:
    meta_path = os.path.join(dirpath, "model.yaml")
    if not os.path.exists(meta_path):
        raise ValueError(f"{dirpath}: not a model directory (no model.yaml)")
    with open(meta_path) as fh:
        meta = yaml.safe_load(fh)
    if meta.get("kind") != "digits-one-shot":
        raise ValueError(f"{meta_path}: unknown model kind {meta.get('kind')!r}")
    import csv

    with open(os.path.join(dirpath, "w_in.csv"), newline="") as fh:
        rows = [[int(c) for c in row] for row in csv.reader(fh) if row]
    w_in = np.array(rows, dtype=np.int64)
    if w_in.shape != (N_CLASSES, N_PIXELS):
        raise ValueError(
            f"{dirpath}/w_in.csv: shape {w_in.shape}, expected "
            f"({N_CLASSES}, {N_PIXELS})"
        )
    ep = meta.get("eval_params", {})
    return DigitsModel(
        w_in=w_in.astype(np.int8),
        spikes_per_level=meta["spikes_per_level"],
        window=meta["window"],
        seed=meta["seed"],
        train_frac=meta["train_frac"],
        forcing=meta.get("forcing", "per-step"),
        n_train=meta.get("n_train", 0),
        v_th=ep.get("v_th", EVAL_V_TH),
        leak=ep.get("leak", EVAL_LEAK),
        syn_leak=ep.get("syn_leak", EVAL_SYN_LEAK),
        refractory_steps=ep.get("refractory_steps", EVAL_REFRACTORY),
        weight_shift=ep.get("weight_shift", EVAL_WEIGHT_SHIFT),
    )
