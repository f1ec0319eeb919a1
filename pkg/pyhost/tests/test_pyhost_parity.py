"""Randomized byte parity between this client and the emulator package.

The client re-implements the wire encodings from their specification;
these tests cross-check every encoder against the emulator's own frame
builders over randomized inputs, so any drift between the two ends
shows up as a byte diff long before an integration test would notice.
"""

import pytest

np = pytest.importorskip("numpy")
P = pytest.importorskip("spikecore.protocol")

from spikecore.network import NeuronParams, SpikeEvent, StdpParams  # noqa: E402

from pyhost import wire  # noqa: E402


def test_spike_streams_match():
    rng = np.random.default_rng(2024)
    for trial in range(200):
        n_events = int(rng.integers(0, 40))
        # occasional huge gaps force multi-heartbeat runs
        gaps = rng.choice([0, 1, 3, 250, 255, 256, 600, 2000],
                          size=n_events,
                          p=[0.25, 0.25, 0.2, 0.08, 0.07, 0.05, 0.05, 0.05])
        times = np.cumsum(gaps)
        addresses = rng.integers(0, 0xFFFF, size=n_events)
        events = [(int(t), int(a)) for t, a in zip(times, addresses)]
        ours = wire.encode_spikes(events)
        theirs = P.encode_spikes([SpikeEvent(t, a) for t, a in events])
        assert ours == theirs
        assert wire.decode_spikes(ours) == events


def test_masks_match():
    rng = np.random.default_rng(7)
    for trial in range(100):
        rows = int(rng.integers(1, 12))
        cols = int(rng.integers(1, 12))
        mask = rng.integers(0, 2, size=(rows, cols), dtype=np.uint8)
        assert wire.pack_mask(mask) == P.pack_mask(mask)


def test_weight_matrices_match():
    rng = np.random.default_rng(8)
    for trial in range(100):
        rows = int(rng.integers(1, 12))
        cols = int(rng.integers(1, 12))
        m = rng.integers(-128, 128, size=(rows, cols)).astype(np.int8)
        assert wire.pack_matrix_i8(m) == m.tobytes()
        framed = P.pack_weights(m)
        assert wire.decode_weights(framed) == m.tolist()


def test_params_match():
    rng = np.random.default_rng(9)
    for trial in range(100):
        neuron = NeuronParams(
            v_th=int(rng.integers(-131072, 131072)),
            leak=int(rng.integers(0, 131072)),
            v_reset=int(rng.integers(-131072, 131072)),
            syn_leak=int(rng.integers(0, 131072)),
            refractory_steps=int(rng.integers(0, 1000)),
        )
        ours = wire.pack_neuron_params(
            neuron.v_th, neuron.leak, neuron.v_reset, neuron.syn_leak,
            neuron.refractory_steps,
        )
        assert ours == P.pack_neuron_params(neuron)

        stdp = StdpParams(
            dw_pos=int(rng.integers(0, 256)),
            dw_neg=int(rng.integers(0, 256)),
            t_pre=int(rng.integers(1, 255)),
            t_post=int(rng.integers(1, 255)),
            enabled=bool(rng.integers(0, 2)),
        )
        ours = wire.pack_stdp_params(
            stdp.dw_pos, stdp.dw_neg, stdp.t_pre, stdp.t_post, stdp.enabled
        )
        assert ours == P.pack_stdp_params(stdp)


def test_frames_match():
    rng = np.random.default_rng(10)
    for trial in range(50):
        opcode = int(rng.integers(1, 0x11))
        payload = rng.bytes(int(rng.integers(0, 64)))
        assert wire.frame(opcode, payload) == P.frame(opcode, payload)


def test_chunk_decoders_invert_primary_encoders():
    rng = np.random.default_rng(11)
    raster = [(int(t), int(k)) for t, k in
              zip(np.sort(rng.integers(0, 5000, size=2500)),
                  rng.integers(0, 30, size=2500))]
    chunks = P.encode_raster_chunks(raster)
    assert len(chunks) == 3  # 1024-record chunking
    decoded = [pair for chunk in chunks
               for pair in wire.decode_raster_chunk(chunk)]
    assert decoded == raster

    membrane = [int(v) for v in rng.integers(-131072, 131072, size=1500)]
    decoded = [pair for chunk in P.encode_membrane_chunks(membrane)
               for pair in wire.decode_membrane_chunk(chunk)]
    assert decoded == list(enumerate(membrane))
