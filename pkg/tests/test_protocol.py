"""Wire codec laws, frame round-trips, and live session behavior."""

import queue
import socket
import struct
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spikecore import NeuronParams, SpikeEvent, StdpParams
from spikecore import protocol as proto
from spikecore.network import Network

from helpers import default_neuron, default_stdp, make_config


class TestSpikeWords:
    def test_empty_stream(self):
        assert proto.encode_spikes([]) == b""
        assert proto.decode_spikes(b"") == []

    def test_single_word_layout(self):
        # address big-endian, then delta
        assert proto.encode_spikes([SpikeEvent(7, 0x0012)]) == bytes(
            [0x00, 0x12, 0x07]
        )

    def test_long_gap_uses_heartbeats(self):
        data = proto.encode_spikes([SpikeEvent(0, 1), SpikeEvent(300, 2)])
        assert data == bytes([0x00, 0x01, 0x00, 0xFF, 0xFF, 0xFF, 0x00, 0x02, 0x2D])

    def test_decode_consumes_heartbeats(self):
        data = bytes([0xFF, 0xFF, 0xFF, 0x00, 0x02, 0x2D])
        assert proto.decode_spikes(data) == [SpikeEvent(300, 2)]

    def test_gap_of_255_needs_no_heartbeat(self):
        data = proto.encode_spikes([SpikeEvent(255, 9)])
        assert data == bytes([0x00, 0x09, 0xFF])

    def test_gap_multiple_of_255(self):
        data = proto.encode_spikes([SpikeEvent(510, 3)])
        assert len(data) == 9  # two heartbeats + the event word
        assert proto.decode_spikes(data) == [SpikeEvent(510, 3)]

    def test_partial_word_is_framing_error(self):
        with pytest.raises(proto.ProtocolError) as e:
            proto.decode_spikes(b"\x00\x01")
        assert e.value.code == proto.ErrorCode.FRAMING

    def test_unsorted_rejected(self):
        with pytest.raises(proto.ProtocolError):
            proto.encode_spikes([SpikeEvent(5, 0), SpikeEvent(4, 0)])

    def test_reserved_address_rejected(self):
        with pytest.raises(proto.ProtocolError):
            proto.encode_spikes([SpikeEvent(0, 0xFFFF)])

    @given(
        st.lists(
            st.tuples(st.integers(0, 5000), st.integers(0, 0xFFFE)), max_size=60
        )
    )
    def test_round_trip(self, pairs):
        events = [SpikeEvent(t, a) for t, a in sorted(pairs, key=lambda p: p[0])]
        assert proto.decode_spikes(proto.encode_spikes(events)) == events

    @given(st.binary(max_size=200))
    def test_decoder_never_crashes(self, data):
        try:
            events = proto.decode_spikes(data)
        except proto.ProtocolError:
            return
        for a, b in zip(events, events[1:]):
            assert a.time <= b.time


class TestFrames:
    def test_size_law(self):
        assert len(proto.frame(0x04, b"12345")) == 10

    def test_header_layout(self):
        assert proto.frame(0x04, b"ab") == b"\x04\x02\x00\x00\x00ab"

    @given(st.integers(0, 255), st.binary(max_size=300))
    def test_round_trip(self, op, payload):
        assert proto.unframe(proto.frame(op, payload)) == (op, payload)

    def test_length_mismatch(self):
        data = proto.frame(0x01, b"abc")[:-1]
        with pytest.raises(proto.ProtocolError):
            proto.unframe(data)

    def test_short_header(self):
        with pytest.raises(proto.ProtocolError):
            proto.unframe(b"\x01\x02")


class TestFieldPacking:
    def test_neuron_params_round_trip(self):
        p = NeuronParams(v_th=2048, leak=10, v_reset=-512, syn_leak=64,
                         refractory_steps=3)
        packed = proto.pack_neuron_params(p)
        assert len(packed) == 18
        assert proto.unpack_neuron_params(packed) == p

    def test_neuron_params_sign_extension(self):
        p = NeuronParams(v_th=0, leak=0, v_reset=-131072, syn_leak=0)
        assert proto.unpack_neuron_params(proto.pack_neuron_params(p)).v_reset == -131072

    def test_neuron_params_range_error(self):
        bad = struct.pack("<iiiiH", 200000, 0, 0, 0, 0)
        with pytest.raises(proto.ProtocolError) as e:
            proto.unpack_neuron_params(bad)
        assert e.value.code == proto.ErrorCode.RANGE

    def test_stdp_params_round_trip(self):
        p = StdpParams(dw_pos=4, dw_neg=3, t_pre=200, t_post=150, enabled=False)
        packed = proto.pack_stdp_params(p)
        assert len(packed) == 5
        assert proto.unpack_stdp_params(packed) == p

    def test_stdp_params_window_cap(self):
        bad = struct.pack("<BBBBB", 4, 3, 255, 10, 1)
        with pytest.raises(proto.ProtocolError) as e:
            proto.unpack_stdp_params(bad)
        assert e.value.code == proto.ErrorCode.RANGE

    @given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**32 - 1))
    @settings(max_examples=40)
    def test_mask_round_trip(self, rows, cols, seed):
        rng = np.random.default_rng(seed)
        mask = rng.integers(0, 2, (rows, cols)).astype(np.uint8)
        assert np.array_equal(
            proto.unpack_mask(proto.pack_mask(mask), (rows, cols)), mask
        )

    def test_mask_length_check(self):
        with pytest.raises(proto.ProtocolError):
            proto.unpack_mask(b"\x00", (4, 4))  # needs 2 bytes

    def test_weight_dump_round_trip(self):
        rng = np.random.default_rng(0)
        w = rng.integers(-128, 128, (7, 3)).astype(np.int8)
        assert np.array_equal(proto.unpack_weights(proto.pack_weights(w)), w)

    def test_raster_chunking(self):
        raster = [(t, t % 5) for t in range(2500)]
        chunks = proto.encode_raster_chunks(raster)
        assert [len(c) // 6 for c in chunks] == [1024, 1024, 452]
        decoded = [r for c in chunks for r in proto.decode_raster_chunk(c)]
        assert decoded == raster

    def test_membrane_chunking(self):
        series = list(range(-1500, 0))
        chunks = proto.encode_membrane_chunks(series)
        decoded = [r for c in chunks for r in proto.decode_membrane_chunk(c)]
        assert decoded == list(enumerate(series))


# ---------------------------------------------------------------------------
# Live sessions over a socket pair
# ---------------------------------------------------------------------------


class SessionHarness:
    """Runs an EmulatorSession on one end of a socketpair."""

    def __init__(self, n_max=100):
        client, server = socket.socketpair()
        self.client_sock = client
        self.transport = proto.Transport.from_socket(client)
        self.thread = threading.Thread(
            target=self._serve, args=(server, n_max), daemon=True
        )
        self.thread.start()

    @staticmethod
    def _serve(server_sock, n_max):
        t = proto.Transport.from_socket(server_sock)
        try:
            proto.EmulatorSession(t, n_max=n_max).serve()
        finally:
            t.close()
            server_sock.close()

    def send(self, opcode, payload=b""):
        proto.write_frame(self.transport, opcode, payload)

    def recv(self):
        return proto.read_frame(self.transport)

    def expect_ack(self, opcode):
        op, payload = self.recv()
        assert op == proto.Opcode.ACK, (op, payload)
        assert payload == bytes([opcode])

    def expect_error(self, code):
        op, payload = self.recv()
        assert op == proto.Opcode.ERROR
        assert payload[0] == code, payload

    def close(self):
        self.transport.close()
        self.client_sock.close()
        self.thread.join(timeout=5)


def upload_config(h: SessionHarness, cfg, with_masks=True):
    h.send(proto.Opcode.LOAD_WAA, cfg.w_aa.astype(np.int8).tobytes())
    h.expect_ack(proto.Opcode.LOAD_WAA)
    h.send(proto.Opcode.LOAD_WIN, cfg.w_in.astype(np.int8).tobytes())
    h.expect_ack(proto.Opcode.LOAD_WIN)
    h.send(proto.Opcode.NEURON_PARAMS, proto.pack_neuron_params(cfg.neuron_params))
    h.expect_ack(proto.Opcode.NEURON_PARAMS)
    h.send(proto.Opcode.STDP_PARAMS, proto.pack_stdp_params(cfg.stdp_params))
    h.expect_ack(proto.Opcode.STDP_PARAMS)
    if with_masks:
        h.send(proto.Opcode.LOAD_MASK_AA, proto.pack_mask(cfg.enable_stdp_aa))
        h.expect_ack(proto.Opcode.LOAD_MASK_AA)
        h.send(proto.Opcode.LOAD_MASK_IN, proto.pack_mask(cfg.enable_stdp_in))
        h.expect_ack(proto.Opcode.LOAD_MASK_IN)
    h.send(proto.Opcode.SET_MONITOR, struct.pack("<H", cfg.monitored_neuron))
    h.expect_ack(proto.Opcode.SET_MONITOR)


def run_and_collect(h: SessionHarness, t_end, dump_weights=False):
    flags = proto.RUN_FLAG_DUMP_WEIGHTS if dump_weights else 0
    h.send(proto.Opcode.RUN, struct.pack("<IB", t_end, flags))
    raster, membrane, weights = [], [], {}
    while True:
        op, payload = h.recv()
        if op == proto.Opcode.RASTER_CHUNK:
            raster.extend(proto.decode_raster_chunk(payload))
        elif op == proto.Opcode.MEMBRANE_CHUNK:
            membrane.extend(v for _, v in proto.decode_membrane_chunk(payload))
        elif op in (proto.Opcode.WEIGHTS_AA, proto.Opcode.WEIGHTS_IN):
            weights[op] = proto.unpack_weights(payload)
        elif op == proto.Opcode.DONE:
            t_done, n_spikes = struct.unpack("<II", payload)
            assert t_done == t_end and n_spikes == len(raster)
            return raster, membrane, weights
        else:
            raise AssertionError(f"unexpected frame {op}")


@pytest.fixture
def harness():
    h = SessionHarness()
    yield h
    h.close()


def demo_config():
    rng = np.random.default_rng(77)
    return make_config(
        n=6, n_in=4,
        w_aa=rng.integers(-30, 60, (6, 6)).astype(np.int8),
        w_in=rng.integers(20, 90, (6, 4)).astype(np.int8),
        mask_aa=rng.integers(0, 2, (6, 6)).astype(np.uint8),
        mask_in=rng.integers(0, 2, (6, 4)).astype(np.uint8),
        neuron=default_neuron(syn_leak=800, v_th=30000),
        stdp=default_stdp(),
        monitored_neuron=3,
    )


def demo_stream():
    rng = np.random.default_rng(11)
    times = sorted(int(t) for t in rng.integers(0, 60, 40))
    return [SpikeEvent(t, int(rng.integers(0, 4))) for t in times]


class TestSession:
    def test_run_matches_in_process(self, harness):
        cfg = demo_config()
        stream = demo_stream()
        upload_config(harness, cfg)
        harness.send(proto.Opcode.SPIKES, proto.encode_spikes(stream))
        harness.expect_ack(proto.Opcode.SPIKES)
        raster, membrane, weights = run_and_collect(harness, 64, dump_weights=True)

        local = Network(cfg).run(stream, 64)
        assert raster == local.raster
        assert membrane == local.membrane
        assert np.array_equal(weights[proto.Opcode.WEIGHTS_AA], local.final_w_aa)
        assert np.array_equal(weights[proto.Opcode.WEIGHTS_IN], local.final_w_in)

    def test_run_t_end_zero(self, harness):
        upload_config(harness, demo_config())
        raster, membrane, weights = run_and_collect(harness, 0)
        assert raster == [] and membrane == [] and weights == {}

    def test_read_weights_echoes_before_run(self, harness):
        cfg = demo_config()
        upload_config(harness, cfg)
        harness.send(proto.Opcode.READ_WEIGHTS)
        op, payload = harness.recv()
        assert op == proto.Opcode.WEIGHTS_AA
        assert np.array_equal(proto.unpack_weights(payload), cfg.w_aa)
        op, payload = harness.recv()
        assert op == proto.Opcode.WEIGHTS_IN
        assert np.array_equal(proto.unpack_weights(payload), cfg.w_in)

    def test_weights_persist_across_runs_state_does_not(self, harness):
        cfg = demo_config()
        stream = demo_stream()
        upload_config(harness, cfg)
        harness.send(proto.Opcode.SPIKES, proto.encode_spikes(stream))
        harness.expect_ack(proto.Opcode.SPIKES)
        _, _, w1 = run_and_collect(harness, 64, dump_weights=True)
        # second run with no input: starts from quiet state, evolved weights
        _, _, w2 = run_and_collect(harness, 64, dump_weights=True)

        net = Network(cfg)
        net.run(stream, 64)
        second = net.run([], 64)
        assert np.array_equal(w2[proto.Opcode.WEIGHTS_AA], second.final_w_aa)
        assert np.array_equal(w2[proto.Opcode.WEIGHTS_IN], second.final_w_in)
        assert not np.array_equal(w1[proto.Opcode.WEIGHTS_AA], cfg.w_aa)

    def test_reload_resets_weights(self, harness):
        cfg = demo_config()
        stream = demo_stream()
        upload_config(harness, cfg)
        harness.send(proto.Opcode.SPIKES, proto.encode_spikes(stream))
        harness.expect_ack(proto.Opcode.SPIKES)
        run_and_collect(harness, 64)
        # reloading any matrix rebuilds from staged config
        harness.send(proto.Opcode.LOAD_WAA, cfg.w_aa.astype(np.int8).tobytes())
        harness.expect_ack(proto.Opcode.LOAD_WAA)
        harness.send(proto.Opcode.READ_WEIGHTS)
        op, payload = harness.recv()
        assert np.array_equal(proto.unpack_weights(payload), cfg.w_aa)
        harness.recv()  # W_IN

    def test_run_before_config_is_order_error(self, harness):
        harness.send(proto.Opcode.RUN, struct.pack("<IB", 10, 0))
        harness.expect_error(proto.ErrorCode.ORDER)

    def test_unknown_opcode(self, harness):
        harness.send(0x55, b"junk")
        harness.expect_error(proto.ErrorCode.UNKNOWN_OPCODE)

    def test_emulator_side_opcode_rejected(self, harness):
        harness.send(proto.Opcode.DONE, b"\x00" * 8)
        harness.expect_error(proto.ErrorCode.UNKNOWN_OPCODE)

    def test_nonsquare_waa_is_length_error(self, harness):
        harness.send(proto.Opcode.LOAD_WAA, b"\x00" * 5)
        harness.expect_error(proto.ErrorCode.LENGTH)

    def test_oversized_n_is_range_error(self, harness):
        harness.send(proto.Opcode.LOAD_WAA, b"\x00" * (101 * 101))
        harness.expect_error(proto.ErrorCode.RANGE)

    def test_bad_neuron_params_range(self, harness):
        payload = struct.pack("<iiiiH", 0, -5, 0, 0, 0)  # negative leak
        harness.send(proto.Opcode.NEURON_PARAMS, payload)
        harness.expect_error(proto.ErrorCode.RANGE)

    def test_partial_spike_word_is_framing_error(self, harness):
        harness.send(proto.Opcode.SPIKES, b"\x00\x01")
        harness.expect_error(proto.ErrorCode.FRAMING)

    def test_rewinding_spike_frames_rejected(self, harness):
        harness.send(proto.Opcode.SPIKES, proto.encode_spikes([SpikeEvent(50, 1)]))
        harness.expect_ack(proto.Opcode.SPIKES)
        harness.send(proto.Opcode.SPIKES, proto.encode_spikes([SpikeEvent(10, 1)]))
        harness.expect_error(proto.ErrorCode.STREAM)

    def test_queued_address_out_of_range(self, harness):
        cfg = demo_config()  # n_in = 4
        upload_config(harness, cfg)
        harness.send(proto.Opcode.SPIKES, proto.encode_spikes([SpikeEvent(0, 9)]))
        harness.expect_ack(proto.Opcode.SPIKES)
        harness.send(proto.Opcode.RUN, struct.pack("<IB", 5, 0))
        harness.expect_error(proto.ErrorCode.STREAM)

    def test_reserved_run_flags_rejected(self, harness):
        upload_config(harness, demo_config())
        harness.send(proto.Opcode.RUN, struct.pack("<IB", 5, 0x80))
        harness.expect_error(proto.ErrorCode.RANGE)

    def test_session_survives_errors(self, harness):
        harness.send(0x55, b"")
        harness.expect_error(proto.ErrorCode.UNKNOWN_OPCODE)
        upload_config(harness, demo_config())
        raster, membrane, _ = run_and_collect(harness, 8)
        assert len(membrane) == 8

    def test_mask_length_error_at_run(self, harness):
        cfg = demo_config()
        upload_config(harness, cfg, with_masks=False)
        harness.send(proto.Opcode.LOAD_MASK_AA, b"\x00")  # needs ceil(36/8)=5
        harness.expect_ack(proto.Opcode.LOAD_MASK_AA)
        harness.send(proto.Opcode.RUN, struct.pack("<IB", 5, 0))
        harness.expect_error(proto.ErrorCode.LENGTH)

    def test_monitor_validated_against_live_network(self, harness):
        upload_config(harness, demo_config())
        run_and_collect(harness, 1)
        harness.send(proto.Opcode.SET_MONITOR, struct.pack("<H", 50))
        harness.expect_error(proto.ErrorCode.RANGE)


class TestSessionFuzz:
    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 255), st.binary(max_size=64)), max_size=8))
    def test_random_frames_never_hang_or_crash(self, frames):
        h = SessionHarness()
        try:
            for op, payload in frames:
                h.send(op, payload)
            # a final well-formed request must still be answered
            h.send(proto.Opcode.READ_WEIGHTS)
            deadline_frames = 200
            while deadline_frames:
                op, payload = h.recv()
                deadline_frames -= 1
                if op == proto.Opcode.ERROR and not len(payload):
                    raise AssertionError("empty error payload")
                if op in (proto.Opcode.WEIGHTS_AA, proto.Opcode.ERROR):
                    break
        finally:
            h.close()


class TcpHarness(SessionHarness):
    """SessionHarness over a real TCP socket served by serve_tcp."""

    def __init__(self, n_max=100):
        ports: queue.Queue = queue.Queue()
        self.thread = threading.Thread(
            target=proto.serve_tcp,
            kwargs=dict(host="127.0.0.1", port=0, n_max=n_max, once=True,
                        ready=ports.put),
            daemon=True,
        )
        self.thread.start()
        port = ports.get(timeout=10)
        self.client_sock = socket.create_connection(("127.0.0.1", port),
                                                    timeout=10)
        self.transport = proto.Transport.from_socket(self.client_sock)


class TestServeTcp:
    def test_session_over_tcp_matches_in_process(self):
        h = TcpHarness()
        try:
            cfg = demo_config()
            stream = demo_stream()
            upload_config(h, cfg)
            h.send(proto.Opcode.SPIKES, proto.encode_spikes(stream))
            h.expect_ack(proto.Opcode.SPIKES)
            raster, membrane, weights = run_and_collect(h, 64,
                                                        dump_weights=True)
        finally:
            h.close()
        assert not h.thread.is_alive()  # once=True: server exited cleanly

        local = Network(cfg).run(stream, 64)
        assert raster == local.raster
        assert membrane == local.membrane
        assert np.array_equal(weights[proto.Opcode.WEIGHTS_AA],
                              local.final_w_aa)
        assert np.array_equal(weights[proto.Opcode.WEIGHTS_IN],
                              local.final_w_in)
