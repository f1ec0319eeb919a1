"""Scripted DIGITS inference through the client vs the CLI pipeline.

The emulator CLI evaluates a saved model on the held-out split; this
test replays the same inference sample by sample over a live session
and must land on the identical report.  The wire format cannot express
a weight shift, so the model used here is re-quantized onto [0, 3] at
the protocol's fixed shift of 10, with thresholds scaled to match —
everything the session loads is exactly what the CLI evaluates.
"""

import json
import os
import subprocess
import sys

import pytest

from pyhost import ClientSession

np = pytest.importorskip("numpy")
pytest.importorskip("spikecore")

from spikecore.harness.digits import (  # noqa: E402
    DigitsModel,
    fit_digits,
    save_digits_model,
    split_digits,
)
from spikecore.harness.encoding import rate_encode_sample  # noqa: E402

from conftest import ServeProc, have_emulator  # noqa: E402

WIRE_V_TH = 122880      # 120.0, six times the shift-2 threshold
WIRE_LEAK = 3072        # 3.0
WIRE_SYN_LEAK = 36864   # 36.0


@pytest.fixture(scope="module")
def wire_model(digits_csv):
    """A trained readout re-quantized for the protocol's fixed shift."""
    from spikecore.harness.datasets import load_digits_csv

    pixels, labels = load_digits_csv(digits_csv)
    base = fit_digits(pixels, labels, seed=0)
    w = base.w_in.astype(np.float64)
    w_small = np.clip(np.rint(w * (3.0 / w.max())), 0, 3).astype(np.int8)
    model = DigitsModel(
        w_in=w_small,
        spikes_per_level=base.spikes_per_level,
        window=base.window,
        seed=base.seed,
        train_frac=base.train_frac,
        forcing=base.forcing,
        n_train=base.n_train,
        v_th=WIRE_V_TH,
        leak=WIRE_LEAK,
        syn_leak=WIRE_SYN_LEAK,
        refractory_steps=0,
        weight_shift=10,
    )
    return model, pixels, labels


def predict(raster, n_classes=10):
    counts = [0] * n_classes
    for _, neuron in raster:
        counts[neuron] += 1
    return max(range(n_classes), key=counts.__getitem__)  # ties -> lowest


@pytest.mark.skipif(not have_emulator(), reason="emulator package not installed")
def test_session_inference_matches_cli_report(wire_model, digits_csv, tmp_path):
    model, pixels, labels = wire_model
    model_dir = str(tmp_path / "model")
    save_digits_model(model, model_dir)
    report_path = str(tmp_path / "report.json")
    proc = subprocess.run(
        [sys.executable, "-m", "spikecore.cli", "eval-digits",
         "--model", model_dir, "--data", digits_csv,
         "--split", "test", "--out", report_path],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    with open(report_path) as fh:
        report = json.load(fh)
    assert report["n_test"] == 540
    assert report["accuracy"] > 0.5, "re-quantized model should stay usable"

    _, test_idx = split_digits(len(labels), train_frac=model.train_frac,
                               seed=model.seed)
    server = ServeProc()
    t_end = model.window + 2
    correct = 0
    with ClientSession.connect(server.host, server.port) as session:
        session.load_network(
            [[0] * 10 for _ in range(10)],
            model.w_in,
        )
        session.set_params(
            v_th=model.v_th, leak=model.leak, v_reset=0,
            syn_leak=model.syn_leak,
            refractory_steps=model.refractory_steps,
            stdp_enabled=False,
        )
        for i in test_idx:
            events = [(ev.time, ev.address) for ev in rate_encode_sample(
                pixels[i], spikes_per_level=model.spikes_per_level,
                window=model.window,
            )]
            session.send_spikes(events)
            result = session.run(t_end)
            if predict(result.raster) == int(labels[i]):
                correct += 1
    server.finish()

    assert correct == report["correct"]
    assert correct / len(test_idx) == report["accuracy"]
