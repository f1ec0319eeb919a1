"""Host-side session driver for the emulator wire protocol.

The client is a thin, stateful wrapper: it frames requests, pairs them
with acknowledgements, and decodes readbacks.  All numerics live on the
emulator side; nothing here interprets weights or membrane values beyond
carrying them as plain ints.

Typical use::

    with ClientSession.connect("127.0.0.1", 9900) as session:
        session.load_network(w_aa, w_in)
        session.set_params(v_th=20480, leak=512, v_reset=0, syn_leak=6144)
        session.send_spikes([(0, 3), (2, 1)])
        result = session.run(64)
        print(result.raster)

One session drives one connection; sessions are not thread-safe and the
protocol has no concept of concurrent requests.
"""

from __future__ import annotations

import socket
from dataclasses import dataclass

from . import wire
from .wire import ErrorCode, Opcode

__all__ = [
    "ClientSession",
    "RunResult",
    "StreamTransport",
    "HostError",
    "TransportError",
    "EmulatorError",
    "ProtocolDesyncError",
    "ClientStateError",
]


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------


class HostError(Exception):
    """Base class for everything this client raises on purpose."""


class TransportError(HostError):
    """The byte stream failed or closed mid-conversation."""


class EmulatorError(HostError):
    """The emulator answered with an ERROR frame.

    ``code`` carries the on-wire error code (an :class:`ErrorCode` when
    recognized, a bare int otherwise) and ``message`` the emulator's text.
    """

    def __init__(self, code: int, message: str):
        try:
            code = ErrorCode(code)
            label = code.name
        except ValueError:
            label = f"code {code}"
        super().__init__(f"emulator error [{label}]: {message}")
        self.code = code
        self.message = message


class ProtocolDesyncError(HostError):
    """The emulator sent a frame this client did not expect."""


class ClientStateError(HostError):
    """The call does not make sense in the session's current state."""


# ---------------------------------------------------------------------------
# Transports
# ---------------------------------------------------------------------------


class StreamTransport:
    """A reliable blocking byte stream over a pair of binary file objects."""

    def __init__(self, reader, writer):
        self._reader = reader
        self._writer = writer

    @classmethod
    def open_tcp(cls, host: str, port: int, *, timeout=None) -> "StreamTransport":
        """Connect to a TCP endpoint; ``timeout`` bounds connection setup."""
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise TransportError(f"cannot connect to {host}:{port}: {exc}") from exc
        sock.settimeout(None)
        # command/response traffic: never hold small frames for Nagle
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        f = sock.makefile("rwb")
        transport = cls(f, f)
        transport._socket = sock
        return transport

    @classmethod
    def open_device(cls, path: str) -> "StreamTransport":
        """Open a serial character device (or any readable+writable path)."""
        try:
            f = open(path, "r+b", buffering=0)
        except OSError as exc:
            raise TransportError(f"cannot open device {path}: {exc}") from exc
        return cls(f, f)

    def read_exact(self, n: int) -> bytes:
        buf = bytearray()
        while len(buf) < n:
            try:
                chunk = self._reader.read(n - len(buf))
            except OSError as exc:
                raise TransportError(f"read failed: {exc}") from exc
            if not chunk:
                raise TransportError("connection closed by the emulator")
            buf += chunk
        return bytes(buf)

    def write(self, data: bytes) -> None:
        try:
            self._writer.write(data)
            self._writer.flush()
        except OSError as exc:
            raise TransportError(f"write failed: {exc}") from exc

    def close(self) -> None:
        for f in {self._reader, self._writer}:
            try:
                f.close()
            except OSError:
                pass
        sock = getattr(self, "_socket", None)
        if sock is not None:
            try:
                sock.close()
            except OSError:
                pass


# ---------------------------------------------------------------------------
# Session
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    """Everything one RUN reported back."""

    t_end: int
    n_spikes: int
    raster: list[tuple[int, int]]
    membrane: list[tuple[int, int]]
    weights_aa: list[list[int]] | None = None
    weights_in: list[list[int]] | None = None


class ClientSession:
    """One configure/run/readback conversation with an emulator.

    The session tracks which configuration pieces have been staged so
    ``state`` can report idle/configured, but enforcement stays with the
    emulator: a premature RUN surfaces as an :class:`EmulatorError` with
    the protocol's ORDER code, exactly as it appears on the wire.
    """

    _REQUIRED = ("w_aa", "w_in", "neuron_params", "stdp_params")

    def __init__(self, transport):
        self.transport = transport
        self._staged: set[str] = set()
        self._closed = False
        self._last_run: RunResult | None = None

    @classmethod
    def connect(cls, host: str, port: int, *, timeout=None) -> "ClientSession":
        """Open a session over TCP."""
        return cls(StreamTransport.open_tcp(host, port, timeout=timeout))

    @classmethod
    def open_device(cls, path: str) -> "ClientSession":
        """Open a session over a serial character device."""
        return cls(StreamTransport.open_device(path))

    # -- lifecycle -----------------------------------------------------------

    @property
    def state(self) -> str:
        if self._closed:
            return "closed"
        if all(piece in self._staged for piece in self._REQUIRED):
            return "configured"
        return "idle"

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self.transport.close()

    def __enter__(self) -> "ClientSession":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    # -- plumbing ------------------------------------------------------------

    def _require_open(self) -> None:
        if self._closed:
            raise ClientStateError("session is closed")

    def _send(self, opcode: Opcode, payload: bytes = b"") -> None:
        self.transport.write(wire.frame(opcode, payload))

    def _read_reply(self) -> tuple[int, bytes]:
        header = self.transport.read_exact(wire.FRAME_HEADER.size)
        try:
            opcode, length = wire.parse_frame_header(header)
        except ValueError as exc:
            raise ProtocolDesyncError(str(exc)) from exc
        return opcode, self.transport.read_exact(length)

    def _raise_if_error(self, opcode: int, payload: bytes) -> None:
        if opcode == Opcode.ERROR:
            try:
                code, message = wire.decode_error(payload)
            except ValueError as exc:
                raise ProtocolDesyncError(str(exc)) from exc
            raise EmulatorError(code, message)

    def _transact_ack(self, opcode: Opcode, payload: bytes) -> None:
        """Send one frame and consume the matching ACK."""
        self._send(opcode, payload)
        reply, body = self._read_reply()
        self._raise_if_error(reply, body)
        if reply != Opcode.ACK or body != bytes([opcode]):
            raise ProtocolDesyncError(
                f"expected ACK of 0x{opcode:02x}, got opcode 0x{reply:02x}"
            )

    # -- configuration -------------------------------------------------------

    def load_network(self, w_aa, w_in, *, mask_aa=None, mask_in=None) -> None:
        """Stage the weight matrices (and optionally the plasticity masks).

        ``w_aa`` must be square n x n, ``w_in`` n x n_in; nested lists and
        array-likes are both accepted.  Omitted masks leave the emulator's
        all-zero default in place (no plastic synapses).
        """
        self._require_open()
        aa_rows = wire.as_int_matrix(w_aa, "w_aa")
        if len(aa_rows) != len(aa_rows[0]):
            raise ValueError(
                f"w_aa must be square, got {len(aa_rows)}x{len(aa_rows[0])}"
            )
        in_rows = wire.as_int_matrix(w_in, "w_in")
        if len(in_rows) != len(aa_rows):
            raise ValueError(
                f"w_in has {len(in_rows)} rows, expected n={len(aa_rows)}"
            )
        self._transact_ack(Opcode.LOAD_WAA, wire.pack_matrix_i8(aa_rows, "w_aa"))
        self._staged.add("w_aa")
        self._transact_ack(Opcode.LOAD_WIN, wire.pack_matrix_i8(in_rows, "w_in"))
        self._staged.add("w_in")
        if mask_aa is not None:
            self._load_mask(Opcode.LOAD_MASK_AA, mask_aa, "mask_aa",
                            (len(aa_rows), len(aa_rows)))
        if mask_in is not None:
            self._load_mask(Opcode.LOAD_MASK_IN, mask_in, "mask_in",
                            (len(in_rows), len(in_rows[0])))

    def _load_mask(self, opcode: Opcode, mask, what: str,
                   shape: tuple[int, int]) -> None:
        rows = wire.as_int_matrix(mask, what)
        if (len(rows), len(rows[0])) != shape:
            raise ValueError(
                f"{what} shape {len(rows)}x{len(rows[0])} does not match "
                f"weights {shape[0]}x{shape[1]}"
            )
        self._transact_ack(opcode, wire.pack_mask(rows, what))

    def set_params(
        self,
        *,
        v_th: int,
        leak: int,
        v_reset: int = 0,
        syn_leak: int = 0,
        refractory_steps: int = 0,
        dw_pos: int = 1,
        dw_neg: int = 1,
        t_pre: int = 1,
        t_post: int = 1,
        stdp_enabled: bool = False,
    ) -> None:
        """Stage neuron dynamics and plasticity parameters (raw Q1.7.10)."""
        self._require_open()
        self._transact_ack(
            Opcode.NEURON_PARAMS,
            wire.pack_neuron_params(v_th, leak, v_reset, syn_leak,
                                    refractory_steps),
        )
        self._staged.add("neuron_params")
        self._transact_ack(
            Opcode.STDP_PARAMS,
            wire.pack_stdp_params(dw_pos, dw_neg, t_pre, t_post, stdp_enabled),
        )
        self._staged.add("stdp_params")

    def set_monitor(self, neuron: int) -> None:
        """Point the membrane readback channel at one neuron."""
        self._require_open()
        self._transact_ack(Opcode.SET_MONITOR, wire.pack_monitor(neuron))

    # -- stimulus and execution -----------------------------------------------

    def send_spikes(self, events) -> None:
        """Queue ``(time, address)`` input events for the next run.

        Times are absolute simulation steps, sorted; the queue persists
        until a RUN consumes it, and later frames must not rewind it.
        """
        self._require_open()
        self._transact_ack(Opcode.SPIKES, wire.encode_spikes(events))

    def run(self, t_end: int, *, dump_weights: bool = False) -> RunResult:
        """Execute ``t_end`` steps and collect the full reply.

        Dynamic state starts fresh each run; learned weights carry over.
        With ``dump_weights`` the post-run matrices ride along in the
        result.  The reply is consumed to its DONE marker.
        """
        self._require_open()
        flags = wire.RUN_FLAG_DUMP_WEIGHTS if dump_weights else 0
        self._send(Opcode.RUN, wire.pack_run(t_end, flags))
        raster: list[tuple[int, int]] = []
        membrane: list[tuple[int, int]] = []
        weights_aa = weights_in = None
        while True:
            opcode, payload = self._read_reply()
            self._raise_if_error(opcode, payload)
            try:
                if opcode == Opcode.RASTER_CHUNK:
                    raster.extend(wire.decode_raster_chunk(payload))
                elif opcode == Opcode.MEMBRANE_CHUNK:
                    membrane.extend(wire.decode_membrane_chunk(payload))
                elif opcode == Opcode.WEIGHTS_AA:
                    weights_aa = wire.decode_weights(payload)
                elif opcode == Opcode.WEIGHTS_IN:
                    weights_in = wire.decode_weights(payload)
                elif opcode == Opcode.DONE:
                    done_t_end, n_spikes = wire.decode_done(payload)
                    break
                else:
                    raise ProtocolDesyncError(
                        f"unexpected opcode 0x{opcode:02x} in RUN reply"
                    )
            except ValueError as exc:
                raise ProtocolDesyncError(str(exc)) from exc
        result = RunResult(
            t_end=done_t_end,
            n_spikes=n_spikes,
            raster=raster,
            membrane=membrane,
            weights_aa=weights_aa,
            weights_in=weights_in,
        )
        self._last_run = result
        return result

    # -- readback --------------------------------------------------------------

    def read_raster(self) -> list[tuple[int, int]]:
        """Spikes ``(t, neuron)`` reported by the most recent run."""
        if self._last_run is None:
            raise ClientStateError("no completed run to read back")
        return list(self._last_run.raster)

    def read_membrane(self) -> list[tuple[int, int]]:
        """Monitored membrane trace ``(t, raw)`` from the most recent run."""
        if self._last_run is None:
            raise ClientStateError("no completed run to read back")
        return list(self._last_run.membrane)

    def read_weights(self) -> tuple[list[list[int]], list[list[int]]]:
        """Fetch the current ``(w_aa, w_in)`` matrices from the emulator."""
        self._require_open()
        self._send(Opcode.READ_WEIGHTS)
        matrices = []
        for expected in (Opcode.WEIGHTS_AA, Opcode.WEIGHTS_IN):
            opcode, payload = self._read_reply()
            self._raise_if_error(opcode, payload)
            if opcode != expected:
                raise ProtocolDesyncError(
                    f"expected opcode 0x{expected:02x}, got 0x{opcode:02x}"
                )
            try:
                matrices.append(wire.decode_weights(payload))
            except ValueError as exc:
                raise ProtocolDesyncError(str(exc)) from exc
        return matrices[0], matrices[1]
