"""pyhost: host-side client for the emulator wire protocol.

A pure-stdlib library for driving an emulator (or the eventual device)
over TCP or a serial character device: stage weights and parameters,
queue input spikes, run, and read back rasters, membrane traces, and
learned weights.
"""

from .client import (
    ClientSession,
    ClientStateError,
    EmulatorError,
    HostError,
    ProtocolDesyncError,
    RunResult,
    StreamTransport,
    TransportError,
)
from .wire import ErrorCode, Opcode

__version__ = "0.1.0"

__all__ = [
    "ClientSession",
    "RunResult",
    "StreamTransport",
    "HostError",
    "TransportError",
    "EmulatorError",
    "ProtocolDesyncError",
    "ClientStateError",
    "ErrorCode",
    "Opcode",
    "__version__",
]
