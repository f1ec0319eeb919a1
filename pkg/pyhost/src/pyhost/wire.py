"""Byte-level encoding of the emulator wire protocol.

This module is a self-contained description of what travels on the wire;
it deliberately depends on nothing but the standard library so the client
can run on machines that never see the emulator's code.

Every frame is ``opcode u8 + length u32 LE + payload``.  Multi-byte
fields are little-endian except the spike-word address, which the
on-device stream format fixes as big-endian.

Host -> emulator frames
    0x01 LOAD_WAA       row-major int8, n*n bytes (n inferred by isqrt)
    0x02 LOAD_WIN       row-major int8, n*n_in bytes
    0x03 NEURON_PARAMS  v_th, leak, v_reset, syn_leak (i32) + refractory u16
    0x04 STDP_PARAMS    dw_pos, dw_neg, t_pre, t_post, enabled (u8 each)
    0x05 LOAD_MASK_AA   bit-packed 0/1 matrix, row-major, MSB first
    0x06 LOAD_MASK_IN   same packing, n x n_in
    0x07 SPIKES         3-byte spike words (address u16 BE + delta u8)
    0x08 RUN            t_end u32 + flags u8 (bit 0: dump weights after)
    0x09 READ_WEIGHTS   empty payload
    0x0A SET_MONITOR    neuron index u16

Emulator -> host frames
    0x0B RASTER_CHUNK   records of (t u32, neuron u16)
    0x0C MEMBRANE_CHUNK records of (t u32, v_raw i32)
    0x0D WEIGHTS_AA     rows u16 + cols u16 + row-major int8
    0x0E WEIGHTS_IN     same layout
    0x0F DONE           t_end u32 + total spike count u32
    0x10 ACK            the acknowledged opcode, one byte
    0x7F ERROR          error code u8 + utf-8 message

Spike streams are delta-compressed: each word advances time by its delta
relative to the previous word, starting from t=0 at the head of every
SPIKES payload.  Gaps longer than 255 steps are bridged by heartbeat
words carrying the reserved address 0xFFFF and delta 255.
"""

from __future__ import annotations

import operator
import struct
from enum import IntEnum

__all__ = [
    "Opcode",
    "ErrorCode",
    "FRAME_HEADER",
    "MAX_PAYLOAD",
    "HEARTBEAT_ADDRESS",
    "RUN_FLAG_DUMP_WEIGHTS",
    "frame",
    "parse_frame_header",
    "encode_spikes",
    "decode_spikes",
    "pack_neuron_params",
    "pack_stdp_params",
    "pack_matrix_i8",
    "pack_mask",
    "pack_run",
    "pack_monitor",
    "decode_raster_chunk",
    "decode_membrane_chunk",
    "decode_weights",
    "decode_done",
    "decode_error",
    "as_int_matrix",
]

FRAME_HEADER = struct.Struct("<BI")
SPIKE_WORD = struct.Struct(">HB")
NEURON_PARAMS_STRUCT = struct.Struct("<iiiiH")
STDP_PARAMS_STRUCT = struct.Struct("<BBBBB")
RUN_STRUCT = struct.Struct("<IB")
MONITOR_STRUCT = struct.Struct("<H")
RASTER_RECORD = struct.Struct("<IH")
MEMBRANE_RECORD = struct.Struct("<Ii")
WEIGHTS_HEADER = struct.Struct("<HH")
DONE_STRUCT = struct.Struct("<II")

MAX_PAYLOAD = 1 << 24
HEARTBEAT_ADDRESS = 0xFFFF
RUN_FLAG_DUMP_WEIGHTS = 0x01

I32_MIN, I32_MAX = -(1 << 31), (1 << 31) - 1


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


# ---------------------------------------------------------------------------
# Framing
# ---------------------------------------------------------------------------


def frame(opcode: int, payload: bytes = b"") -> bytes:
    """Prefix a payload with its opcode + length header."""
    if len(payload) > MAX_PAYLOAD:
        raise ValueError(f"payload of {len(payload)} bytes exceeds {MAX_PAYLOAD}")
    return FRAME_HEADER.pack(opcode, len(payload)) + payload


def parse_frame_header(header: bytes) -> tuple[int, int]:
    """Split the 5 header bytes into (opcode, payload length)."""
    opcode, length = FRAME_HEADER.unpack(header)
    if length > MAX_PAYLOAD:
        raise ValueError(f"declared length {length} exceeds {MAX_PAYLOAD}")
    return opcode, length


# ---------------------------------------------------------------------------
# Spike-word codec
# ---------------------------------------------------------------------------


def encode_spikes(events) -> bytes:
    """Delta-compress ``(time, address)`` pairs into 3-byte spike words.

    Events must be sorted by time; deltas are taken against t=0 at the
    start of the payload so each SPIKES frame stands on its own.
    """
    out = bytearray()
    t = 0
    for time, address in events:
        time = operator.index(time)
        address = operator.index(address)
        if time < t:  # also rejects a negative first timestamp
            raise ValueError("events must be time-sorted")
        if not 0 <= address < HEARTBEAT_ADDRESS:
            raise ValueError(f"address {address} not encodable")
        gap = time - t
        if gap > 255:
            out += SPIKE_WORD.pack(HEARTBEAT_ADDRESS, 255) * (gap // 255)
            gap %= 255
        out += SPIKE_WORD.pack(address, gap)
        t = time
    return bytes(out)


def decode_spikes(data: bytes) -> list[tuple[int, int]]:
    """Exact inverse of :func:`encode_spikes`; heartbeats are consumed."""
    if len(data) % SPIKE_WORD.size:
        raise ValueError("trailing partial spike word")
    events: list[tuple[int, int]] = []
    t = 0
    for address, delta in SPIKE_WORD.iter_unpack(data):
        t += delta
        if address != HEARTBEAT_ADDRESS:
            events.append((t, address))
    return events


# ---------------------------------------------------------------------------
# Host -> emulator payloads
# ---------------------------------------------------------------------------


def _check_range(name: str, value: int, lo: int, hi: int) -> int:
    value = operator.index(value)
    if not lo <= value <= hi:
        raise ValueError(f"{name}={value} outside [{lo}, {hi}]")
    return value


def pack_neuron_params(
    v_th: int, leak: int, v_reset: int, syn_leak: int, refractory_steps: int
) -> bytes:
    return NEURON_PARAMS_STRUCT.pack(
        _check_range("v_th", v_th, I32_MIN, I32_MAX),
        _check_range("leak", leak, I32_MIN, I32_MAX),
        _check_range("v_reset", v_reset, I32_MIN, I32_MAX),
        _check_range("syn_leak", syn_leak, I32_MIN, I32_MAX),
        _check_range("refractory_steps", refractory_steps, 0, 0xFFFF),
    )


def pack_stdp_params(
    dw_pos: int, dw_neg: int, t_pre: int, t_post: int, enabled: bool
) -> bytes:
    return STDP_PARAMS_STRUCT.pack(
        _check_range("dw_pos", dw_pos, 0, 255),
        _check_range("dw_neg", dw_neg, 0, 255),
        _check_range("t_pre", t_pre, 0, 255),
        _check_range("t_post", t_post, 0, 255),
        1 if enabled else 0,
    )


def as_int_matrix(matrix, what: str) -> list[list[int]]:
    """Normalize a nested sequence or array-like into rectangular int rows."""
    if hasattr(matrix, "tolist"):
        matrix = matrix.tolist()
    rows = [list(row.tolist()) if hasattr(row, "tolist") else list(row)
            for row in matrix]
    if not rows or not rows[0]:
        raise ValueError(f"{what} must be a non-empty matrix")
    width = len(rows[0])
    for row in rows:
        if len(row) != width:
            raise ValueError(f"{what} rows have uneven lengths")
    return [[operator.index(cell) for cell in row] for row in rows]


def pack_matrix_i8(matrix, what: str = "matrix") -> bytes:
    """Serialize a weight matrix as row-major int8 (two's complement)."""
    rows = as_int_matrix(matrix, what)
    for row in rows:
        for cell in row:
            if not -128 <= cell <= 127:
                raise ValueError(f"{what} entry {cell} outside [-128, 127]")
    return b"".join(bytes(cell & 0xFF for cell in row) for row in rows)


def pack_mask(mask, what: str = "mask") -> bytes:
    """Bit-pack a 0/1 matrix row-major, MSB first, zero-padded."""
    rows = as_int_matrix(mask, what)
    bits = [cell for row in rows for cell in row]
    for bit in bits:
        if bit not in (0, 1):
            raise ValueError(f"{what} entries must be 0 or 1, got {bit}")
    out = bytearray((len(bits) + 7) // 8)
    for i, bit in enumerate(bits):
        if bit:
            out[i >> 3] |= 0x80 >> (i & 7)
    return bytes(out)


def pack_run(t_end: int, flags: int = 0) -> bytes:
    return RUN_STRUCT.pack(
        _check_range("t_end", t_end, 0, 0xFFFFFFFF),
        _check_range("flags", flags, 0, 0xFF),
    )


def pack_monitor(neuron: int) -> bytes:
    return MONITOR_STRUCT.pack(_check_range("neuron", neuron, 0, 0xFFFF))


# ---------------------------------------------------------------------------
# Emulator -> host payloads
# ---------------------------------------------------------------------------


def decode_raster_chunk(payload: bytes) -> list[tuple[int, int]]:
    if len(payload) % RASTER_RECORD.size:
        raise ValueError("partial raster record")
    return [(t, k) for t, k in RASTER_RECORD.iter_unpack(payload)]


def decode_membrane_chunk(payload: bytes) -> list[tuple[int, int]]:
    if len(payload) % MEMBRANE_RECORD.size:
        raise ValueError("partial membrane record")
    return [(t, v) for t, v in MEMBRANE_RECORD.iter_unpack(payload)]


def decode_weights(payload: bytes) -> list[list[int]]:
    """Unpack a WEIGHTS_* dump into nested lists of signed ints."""
    if len(payload) < WEIGHTS_HEADER.size:
        raise ValueError("weight dump too short")
    rows, cols = WEIGHTS_HEADER.unpack_from(payload)
    body = payload[WEIGHTS_HEADER.size:]
    if len(body) != rows * cols:
        raise ValueError(
            f"weight dump holds {len(body)} bytes, header says {rows}x{cols}"
        )
    signed = [b - 256 if b >= 128 else b for b in body]
    return [signed[r * cols:(r + 1) * cols] for r in range(rows)]


def decode_done(payload: bytes) -> tuple[int, int]:
    if len(payload) != DONE_STRUCT.size:
        raise ValueError("DONE payload must be 8 bytes")
    t_end, n_spikes = DONE_STRUCT.unpack(payload)
    return t_end, n_spikes


def decode_error(payload: bytes) -> tuple[int, str]:
    if not payload:
        raise ValueError("ERROR payload missing the code byte")
    return payload[0], payload[1:].decode("utf-8", errors="replace")
