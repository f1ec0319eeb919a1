"""Byte-exact host link: spike words, configuration frames, serve mode.

This module is the authoritative description of the wire format.

Spike words (3 bytes each)
    +----------------+--------+
    | address  u16 BE| delta  |
    +----------------+--------+
    ``delta`` is the gap in timesteps since the previous word (the first
    word's delta is the absolute time of the first event).  Address
    0xFFFF is a heartbeat: it advances time by its delta and injects
    nothing.  A gap g > 255 is bridged by floor(g / 255) heartbeats of
    delta 255 followed by the real word with delta g mod 255.

Frames
    +--------+---------------------+---------...---+
    | opcode | payload length u32LE| payload       |
    +--------+---------------------+---------...---+

Host -> emulator opcodes
    0x01 LOAD_WAA       row-major signed weight bytes, n*n of them
    0x02 LOAD_WIN       row-major signed weight bytes, n*n_in of them
    0x03 NEURON_PARAMS  v_th, leak, v_reset, syn_leak as sign-extended
                        i32 LE raw Q1.7.10 values, then refractory u16
                        (18 bytes; the membrane floor stays at its
                        default in protocol sessions)
    0x04 STDP_PARAMS    dw_pos, dw_neg, t_pre, t_post, enabled - u8 each
    0x05 LOAD_MASK_AA   bit-packed row-major mask, MSB first per byte
    0x06 LOAD_MASK_IN   same packing, n x n_in
    0x07 SPIKES         an encoded spike-word stream (appends to queue)
    0x08 RUN            t_end u32 LE + flags u8 (bit0: dump weights
                        after the run; other bits must be zero)
    0x09 READ_WEIGHTS   empty payload
    0x0A SET_MONITOR    membrane-channel neuron index u16 LE

Emulator -> host opcodes
    0x0B RASTER_CHUNK   records (t u32 LE, neuron u16 LE), <= 1024 each
    0x0C MEMBRANE_CHUNK records (t u32 LE, raw i32 LE), <= 1024 each
    0x0D WEIGHTS_AA     rows u16 LE, cols u16 LE, row-major int8 data
    0x0E WEIGHTS_IN     same layout
    0x0F DONE           t_end u32 LE, total spike count u32 LE
    0x10 ACK            the acknowledged configuration opcode, 1 byte
    0x7F ERROR          error code u8 + utf-8 message

Sessions accept configuration frames in any order; each is ACKed or
answered with an ERROR carrying a distinct code.  RUN needs W_AA, W_IN,
NEURON_PARAMS and STDP_PARAMS staged (masks default to all-zero,
monitor to 0), replies with raster chunks, membrane chunks, optional
weight dumps, then exactly one DONE; the spike queue is consumed either
way.  Weights persist across RUNs until a configuration frame replaces
them; dynamic state resets at each RUN.  A recoverable error keeps the
session alive; an unreadable frame header ends it.
"""

from __future__ import annotations

import math
import socket
import struct
from enum import IntEnum

import numpy as np

from .dynamics import NeuronParams
from .network import N_MAX_DEFAULT, Network, NetworkConfig, SpikeEvent
from .plasticity import StdpParams

SPIKE_WORD = struct.Struct(">HB")
HEARTBEAT_ADDRESS = 0xFFFF
FRAME_HEADER = struct.Struct("<BI")
MAX_PAYLOAD = 1 << 24

NEURON_PARAMS_STRUCT = struct.Struct("<iiiiH")
STDP_PARAMS_STRUCT = struct.Struct("<BBBBB")
RASTER_RECORD = struct.Struct("<IH")
MEMBRANE_RECORD = struct.Struct("<Ii")
RUN_STRUCT = struct.Struct("<IB")
CHUNK_RECORDS = 1024

RUN_FLAG_DUMP_WEIGHTS = 0x01


class Opcode(IntEnum):
    LOAD_WAA = 0x01
    LOAD_WIN = 0x02
    NEURON_PARAMS = 0x03
    STDP_PARAMS = 0x04
    LOAD_MASK_AA = 0x05
    LOAD_MASK_IN = 0x06
    SPIKES = 0x07
    RUN = 0x08
    READ_WEIGHTS = 0x09
    SET_MONITOR = 0x0A
    RASTER_CHUNK = 0x0B
    MEMBRANE_CHUNK = 0x0C
    WEIGHTS_AA = 0x0D
    WEIGHTS_IN = 0x0E
    DONE = 0x0F
    ACK = 0x10
    ERROR = 0x7F


class ErrorCode(IntEnum):
    UNKNOWN_OPCODE = 1
    LENGTH = 2
    RANGE = 3
    ORDER = 4
    FRAMING = 5
    STREAM = 6


class ProtocolError(Exception):
    """A wire-level fault carrying its on-wire error code."""

    def __init__(self, code: ErrorCode, message: str):
        super().__init__(message)
        self.code = ErrorCode(code)
        self.message = message


class ConnectionClosed(Exception):
    """The peer closed the byte stream."""


# ---------------------------------------------------------------------------
# Spike-word codec
# ---------------------------------------------------------------------------


def encode_spikes(events: list[SpikeEvent]) -> bytes:
    """Delta-compress a sorted event list into 3-byte spike words."""
    out = bytearray()
    t = 0
    for ev in events:
        if ev.time < t:  # also rejects a negative first timestamp
            raise ProtocolError(ErrorCode.STREAM, "events must be time-sorted")
        if not 0 <= ev.address < HEARTBEAT_ADDRESS:
            raise ProtocolError(
                ErrorCode.RANGE, f"address {ev.address} not encodable"
            )
        gap = ev.time - t
        if gap > 255:
            for _ in range(gap // 255):
                out += SPIKE_WORD.pack(HEARTBEAT_ADDRESS, 255)
            gap %= 255
        out += SPIKE_WORD.pack(ev.address, gap)
        t = ev.time
    return bytes(out)


def decode_spikes(data: bytes) -> list[SpikeEvent]:
    """Exact inverse of :func:`encode_spikes`; heartbeats are consumed."""
    if len(data) % SPIKE_WORD.size:
        raise ProtocolError(ErrorCode.FRAMING, "trailing partial spike word")
    events: list[SpikeEvent] = []
    t = 0
    for address, delta in SPIKE_WORD.iter_unpack(data):
        t += delta
        if address != HEARTBEAT_ADDRESS:
            events.append(SpikeEvent(t, address))
    return events


# ---------------------------------------------------------------------------
# Frames and field packing
# ---------------------------------------------------------------------------


def frame(opcode: int, payload: bytes = b"") -> bytes:
    if len(payload) > MAX_PAYLOAD:
        raise ProtocolError(ErrorCode.LENGTH, "payload too large")
    return FRAME_HEADER.pack(opcode, len(payload)) + payload


def unframe(data: bytes) -> tuple[int, bytes]:
    """Split one complete frame; the buffer must hold exactly one."""
    if len(data) < FRAME_HEADER.size:
        raise ProtocolError(ErrorCode.FRAMING, "short frame header")
    opcode, length = FRAME_HEADER.unpack_from(data)
    payload = data[FRAME_HEADER.size:]
    if len(payload) != length:
        raise ProtocolError(ErrorCode.LENGTH, "frame length mismatch")
    return opcode, payload


def pack_neuron_params(p: NeuronParams) -> bytes:
    return NEURON_PARAMS_STRUCT.pack(
        p.v_th, p.leak, p.v_reset, p.syn_leak, p.refractory_steps
    )


def unpack_neuron_params(payload: bytes) -> NeuronParams:
    if len(payload) != NEURON_PARAMS_STRUCT.size:
        raise ProtocolError(ErrorCode.LENGTH, "NEURON_PARAMS must be 18 bytes")
    v_th, leak, v_reset, syn_leak, refractory = NEURON_PARAMS_STRUCT.unpack(payload)
    params = NeuronParams(
        v_th=v_th, leak=leak, v_reset=v_reset, syn_leak=syn_leak,
        refractory_steps=refractory,
    )
    try:
        params.validate()
    except ValueError as exc:
        raise ProtocolError(ErrorCode.RANGE, str(exc)) from exc
    return params


def pack_stdp_params(p: StdpParams) -> bytes:
    return STDP_PARAMS_STRUCT.pack(
        p.dw_pos, p.dw_neg, p.t_pre, p.t_post, 1 if p.enabled else 0
    )


def unpack_stdp_params(payload: bytes) -> StdpParams:
    if len(payload) != STDP_PARAMS_STRUCT.size:
        raise ProtocolError(ErrorCode.LENGTH, "STDP_PARAMS must be 5 bytes")
    dw_pos, dw_neg, t_pre, t_post, enabled = STDP_PARAMS_STRUCT.unpack(payload)
    if enabled not in (0, 1):
        raise ProtocolError(ErrorCode.RANGE, "enabled flag must be 0 or 1")
    params = StdpParams(
        dw_pos=dw_pos, dw_neg=dw_neg, t_pre=t_pre, t_post=t_post,
        enabled=bool(enabled),
    )
    try:
        params.validate()
    except ValueError as exc:
        raise ProtocolError(ErrorCode.RANGE, str(exc)) from exc
    return params


def pack_mask(mask: np.ndarray) -> bytes:
    """Bit-pack a 0/1 matrix row-major, MSB first, zero-padded."""
    return np.packbits(np.asarray(mask, dtype=np.uint8).reshape(-1)).tobytes()


def unpack_mask(payload: bytes, shape: tuple[int, int]) -> np.ndarray:
    rows, cols = shape
    expect = math.ceil(rows * cols / 8)
    if len(payload) != expect:
        raise ProtocolError(
            ErrorCode.LENGTH, f"mask must be {expect} bytes for shape {shape}"
        )
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8))
    return bits[: rows * cols].reshape(rows, cols).astype(np.uint8)


def pack_weights(matrix: np.ndarray) -> bytes:
    m = np.asarray(matrix, dtype=np.int8)
    rows, cols = m.shape
    return struct.pack("<HH", rows, cols) + m.tobytes()


def unpack_weights(payload: bytes) -> np.ndarray:
    if len(payload) < 4:
        raise ProtocolError(ErrorCode.LENGTH, "weight dump too short")
    rows, cols = struct.unpack_from("<HH", payload)
    body = payload[4:]
    if len(body) != rows * cols:
        raise ProtocolError(ErrorCode.LENGTH, "weight dump length mismatch")
    return np.frombuffer(body, dtype=np.int8).reshape(rows, cols).copy()


def encode_raster_chunks(raster: list[tuple[int, int]]) -> list[bytes]:
    return [
        b"".join(RASTER_RECORD.pack(t, k) for t, k in raster[i : i + CHUNK_RECORDS])
        for i in range(0, len(raster), CHUNK_RECORDS)
    ]


def decode_raster_chunk(payload: bytes) -> list[tuple[int, int]]:
    if len(payload) % RASTER_RECORD.size:
        raise ProtocolError(ErrorCode.FRAMING, "partial raster record")
    return [(t, k) for t, k in RASTER_RECORD.iter_unpack(payload)]


def encode_membrane_chunks(membrane: list[int], t0: int = 0) -> list[bytes]:
    records = list(enumerate(membrane, start=t0))
    return [
        b"".join(MEMBRANE_RECORD.pack(t, v) for t, v in records[i : i + CHUNK_RECORDS])
        for i in range(0, len(records), CHUNK_RECORDS)
    ]


def decode_membrane_chunk(payload: bytes) -> list[tuple[int, int]]:
    if len(payload) % MEMBRANE_RECORD.size:
        raise ProtocolError(ErrorCode.FRAMING, "partial membrane record")
    return [(t, v) for t, v in MEMBRANE_RECORD.iter_unpack(payload)]


# ---------------------------------------------------------------------------
# Transport
# ---------------------------------------------------------------------------


class Transport:
    """A reliable blocking byte stream (socket, pipe pair, or device)."""

    def __init__(self, reader, writer):
        self._reader = reader
        self._writer = writer

    @classmethod
    def from_socket(cls, sock: socket.socket) -> "Transport":
        f = sock.makefile("rwb")
        return cls(f, f)

    @classmethod
    def from_device(cls, path: str) -> "Transport":
        f = open(path, "r+b", buffering=0)
        return cls(f, f)

    def read_exact(self, n: int) -> bytes:
        buf = bytearray()
        while len(buf) < n:
            chunk = self._reader.read(n - len(buf))
            if not chunk:
                raise ConnectionClosed()
            buf += chunk
        return bytes(buf)

    def write(self, data: bytes) -> None:
        self._writer.write(data)
        self._writer.flush()

    def close(self) -> None:
        for f in {self._reader, self._writer}:
            try:
                f.close()
            except OSError:
                pass


def read_frame(transport: Transport) -> tuple[int, bytes]:
    """Read one frame; FRAMING error for an implausible declared length."""
    opcode, length = FRAME_HEADER.unpack(transport.read_exact(FRAME_HEADER.size))
    if length > MAX_PAYLOAD:
        raise ProtocolError(ErrorCode.FRAMING, f"declared length {length} too large")
    return opcode, transport.read_exact(length)


def write_frame(transport: Transport, opcode: int, payload: bytes = b"") -> None:
    transport.write(frame(opcode, payload))


# ---------------------------------------------------------------------------
# Emulator session
# ---------------------------------------------------------------------------


class EmulatorSession:
    """Drives one network instance from a frame stream.

    Configuration is staged until the first RUN builds the live network;
    later configuration frames tear it down so the next RUN rebuilds.
    SET_MONITOR retargets the membrane channel without a rebuild, and
    SPIKES only feeds the input queue.
    """

    def __init__(self, transport: Transport, n_max: int = N_MAX_DEFAULT):
        self.transport = transport
        self.n_max = n_max
        self._waa: bytes | None = None
        self._win: bytes | None = None
        self._mask_aa: bytes | None = None
        self._mask_in: bytes | None = None
        self._neuron: NeuronParams | None = None
        self._stdp: StdpParams | None = None
        self._monitor = 0
        self._net: Network | None = None
        self._queue: list[SpikeEvent] = []

    # -- plumbing ----------------------------------------------------------

    def serve(self) -> None:
        """Handle frames until the peer disconnects."""
        while True:
            try:
                opcode, payload = read_frame(self.transport)
            except ConnectionClosed:
                return
            except ProtocolError as exc:
                # unreadable stream position: report and give up
                self._send_error(exc)
                return
            try:
                self._dispatch(opcode, payload)
            except ProtocolError as exc:
                self._send_error(exc)
            except (ConnectionClosed, OSError):
                return  # peer went away mid-reply

    def _send_error(self, exc: ProtocolError) -> None:
        try:
            write_frame(
                self.transport,
                Opcode.ERROR,
                bytes([exc.code]) + exc.message.encode(),
            )
        except (OSError, ValueError, ConnectionClosed):
            pass

    def _ack(self, opcode: int) -> None:
        write_frame(self.transport, Opcode.ACK, bytes([opcode]))

    def _dispatch(self, opcode: int, payload: bytes) -> None:
        handlers = {
            Opcode.LOAD_WAA: self._on_load_waa,
            Opcode.LOAD_WIN: self._on_load_win,
            Opcode.NEURON_PARAMS: self._on_neuron_params,
            Opcode.STDP_PARAMS: self._on_stdp_params,
            Opcode.LOAD_MASK_AA: self._on_mask_aa,
            Opcode.LOAD_MASK_IN: self._on_mask_in,
            Opcode.SPIKES: self._on_spikes,
            Opcode.RUN: self._on_run,
            Opcode.READ_WEIGHTS: self._on_read_weights,
            Opcode.SET_MONITOR: self._on_set_monitor,
        }
        handler = handlers.get(opcode)
        if handler is None:
            raise ProtocolError(
                ErrorCode.UNKNOWN_OPCODE, f"opcode 0x{opcode:02x} not recognized"
            )
        handler(payload)

    # -- configuration staging ----------------------------------------------

    def _on_load_waa(self, payload: bytes) -> None:
        n = math.isqrt(len(payload))
        if n * n != len(payload) or n == 0:
            raise ProtocolError(
                ErrorCode.LENGTH, f"W_AA payload of {len(payload)} bytes is not square"
            )
        if n > self.n_max:
            raise ProtocolError(ErrorCode.RANGE, f"n={n} exceeds cap {self.n_max}")
        self._waa = payload
        self._net = None
        self._ack(Opcode.LOAD_WAA)

    def _on_load_win(self, payload: bytes) -> None:
        if not payload:
            raise ProtocolError(ErrorCode.LENGTH, "W_IN payload is empty")
        self._win = payload
        self._net = None
        self._ack(Opcode.LOAD_WIN)

    def _on_neuron_params(self, payload: bytes) -> None:
        self._neuron = unpack_neuron_params(payload)
        self._net = None
        self._ack(Opcode.NEURON_PARAMS)

    def _on_stdp_params(self, payload: bytes) -> None:
        self._stdp = unpack_stdp_params(payload)
        self._net = None
        self._ack(Opcode.STDP_PARAMS)

    def _on_mask_aa(self, payload: bytes) -> None:
        self._mask_aa = payload
        self._net = None
        self._ack(Opcode.LOAD_MASK_AA)

    def _on_mask_in(self, payload: bytes) -> None:
        self._mask_in = payload
        self._net = None
        self._ack(Opcode.LOAD_MASK_IN)

    def _on_set_monitor(self, payload: bytes) -> None:
        if len(payload) != 2:
            raise ProtocolError(ErrorCode.LENGTH, "SET_MONITOR takes a u16 index")
        (idx,) = struct.unpack("<H", payload)
        if self._net is not None:
            if idx >= self._net.n:
                raise ProtocolError(ErrorCode.RANGE, f"monitor index {idx} >= n")
            self._net.monitored = idx
        self._monitor = idx
        self._ack(Opcode.SET_MONITOR)

    def _on_spikes(self, payload: bytes) -> None:
        events = decode_spikes(payload)
        if events and self._queue and events[0].time < self._queue[-1].time:
            raise ProtocolError(
                ErrorCode.STREAM, "spike frame rewinds the queued stream"
            )
        self._queue.extend(events)
        self._ack(Opcode.SPIKES)

    # -- execution -----------------------------------------------------------

    def _dims(self) -> tuple[int, int]:
        n = math.isqrt(len(self._waa))
        if len(self._win) % n:
            raise ProtocolError(
                ErrorCode.LENGTH,
                f"W_IN length {len(self._win)} not a multiple of n={n}",
            )
        n_in = len(self._win) // n
        if n_in > 65535:
            raise ProtocolError(ErrorCode.RANGE, f"n_in={n_in} exceeds 65535")
        return n, n_in

    def _build_config(self) -> NetworkConfig:
        missing = [
            name
            for name, val in (
                ("W_AA", self._waa),
                ("W_IN", self._win),
                ("NEURON_PARAMS", self._neuron),
                ("STDP_PARAMS", self._stdp),
            )
            if val is None
        ]
        if missing:
            raise ProtocolError(
                ErrorCode.ORDER, "RUN before configuration: missing " + ", ".join(missing)
            )
        n, n_in = self._dims()
        w_aa = np.frombuffer(self._waa, dtype=np.int8).reshape(n, n)
        w_in = np.frombuffer(self._win, dtype=np.int8).reshape(n, n_in)
        mask_aa = (
            unpack_mask(self._mask_aa, (n, n))
            if self._mask_aa is not None
            else np.zeros((n, n), dtype=np.uint8)
        )
        mask_in = (
            unpack_mask(self._mask_in, (n, n_in))
            if self._mask_in is not None
            else np.zeros((n, n_in), dtype=np.uint8)
        )
        config = NetworkConfig(
            n=n,
            n_in=n_in,
            w_aa=w_aa,
            w_in=w_in,
            enable_stdp_aa=mask_aa,
            enable_stdp_in=mask_in,
            neuron_params=self._neuron,
            stdp_params=self._stdp,
            monitored_neuron=self._monitor,
        )
        try:
            config.validate(self.n_max)
        except ValueError as exc:
            raise ProtocolError(ErrorCode.RANGE, str(exc)) from exc
        return config

    def _on_run(self, payload: bytes) -> None:
        if len(payload) != RUN_STRUCT.size:
            raise ProtocolError(ErrorCode.LENGTH, "RUN takes t_end u32 + flags u8")
        t_end, flags = RUN_STRUCT.unpack(payload)
        if flags & ~RUN_FLAG_DUMP_WEIGHTS:
            raise ProtocolError(ErrorCode.RANGE, f"reserved RUN flags set: {flags:#x}")
        if self._net is None:
            self._net = Network(self._build_config(), n_max=self.n_max)
        queue, self._queue = self._queue, []
        for ev in queue:
            if ev.address >= self._net.n_in:
                raise ProtocolError(
                    ErrorCode.STREAM,
                    f"queued address {ev.address} >= n_in {self._net.n_in}",
                )
        try:
            trace = self._net.run(queue, t_end)
        except ValueError as exc:
            raise ProtocolError(ErrorCode.RANGE, str(exc)) from exc
        for chunk in encode_raster_chunks(trace.raster):
            write_frame(self.transport, Opcode.RASTER_CHUNK, chunk)
        for chunk in encode_membrane_chunks(trace.membrane):
            write_frame(self.transport, Opcode.MEMBRANE_CHUNK, chunk)
        if flags & RUN_FLAG_DUMP_WEIGHTS:
            write_frame(self.transport, Opcode.WEIGHTS_AA, pack_weights(trace.final_w_aa))
            write_frame(self.transport, Opcode.WEIGHTS_IN, pack_weights(trace.final_w_in))
        write_frame(
            self.transport, Opcode.DONE, struct.pack("<II", t_end, len(trace.raster))
        )

    def _on_read_weights(self, payload: bytes) -> None:
        if payload:
            raise ProtocolError(ErrorCode.LENGTH, "READ_WEIGHTS takes no payload")
        if self._net is not None:
            w_aa, w_in = self._net.readback_weights()
        else:
            if self._waa is None or self._win is None:
                raise ProtocolError(
                    ErrorCode.ORDER, "READ_WEIGHTS before any weight load"
                )
            n, n_in = self._dims()
            w_aa = np.frombuffer(self._waa, dtype=np.int8).reshape(n, n)
            w_in = np.frombuffer(self._win, dtype=np.int8).reshape(n, n_in)
        write_frame(self.transport, Opcode.WEIGHTS_AA, pack_weights(w_aa))
        write_frame(self.transport, Opcode.WEIGHTS_IN, pack_weights(w_in))


# ---------------------------------------------------------------------------
# Serve entry points
# ---------------------------------------------------------------------------


def serve_tcp(
    host: str = "127.0.0.1",
    port: int = 9900,
    n_max: int = N_MAX_DEFAULT,
    once: bool = False,
    ready=None,
) -> None:
    """Listen for host connections, one session at a time."""
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as server:
        server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        server.bind((host, port))
        server.listen(1)
        if ready is not None:
            ready(server.getsockname()[1])
        while True:
            conn, _ = server.accept()
            with conn:
                # replies span several small frames; don't let Nagle and
                # the peer's delayed ACK serialize them at ~40ms each
                conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                transport = Transport.from_socket(conn)
                try:
                    EmulatorSession(transport, n_max=n_max).serve()
                finally:
                    transport.close()
            if once:
                return


def serve_device(path: str, n_max: int = N_MAX_DEFAULT) -> None:
    """Serve one session over a serial device (or any r+b path)."""
    transport = Transport.from_device(path)
    try:
        EmulatorSession(transport, n_max=n_max).serve()
    finally:
        transport.close()
