"""Shared fixtures: a live emulator to talk to.

The client's end-to-end tests run against the emulator package's serve
mode in a subprocess, exactly as a deployment would.  Everything skips
cleanly when the emulator is not installed, so the client's own unit
tests still run on machines that only have pyhost.
"""

import json
import os
import subprocess
import sys

import pytest

REPO_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), "..", ".."))
DIGITS_CSV = os.path.join(REPO_ROOT, "tests", "data", "digits.csv")


def have_emulator() -> bool:
    try:
        import spikecore  # noqa: F401
    except ImportError:
        return False
    return True


requires_emulator = pytest.mark.skipif(
    not have_emulator(), reason="emulator package not installed"
)


class ServeProc:
    """A ``serve --once`` subprocess and where it listens."""

    def __init__(self, n_max: int = 100):
        self.proc = subprocess.Popen(
            [sys.executable, "-m", "spikecore.cli", "serve",
             "--port", "0", "--once", "--n-max", str(n_max)],
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
        )
        line = self.proc.stdout.readline()
        info = json.loads(line)
        self.host, port = info["listening"].rsplit(":", 1)
        self.port = int(port)

    def finish(self) -> int:
        out, err = self.proc.communicate(timeout=30)
        if self.proc.returncode != 0:
            raise AssertionError(
                f"serve exited {self.proc.returncode}: {out!r} {err!r}"
            )
        return self.proc.returncode


@pytest.fixture
def emulator():
    """Yield (host, port) of a one-connection emulator; assert clean exit."""
    if not have_emulator():
        pytest.skip("emulator package not installed")
    server = ServeProc()
    yield server.host, server.port
    server.finish()


@pytest.fixture(scope="session")
def digits_csv():
    if not os.path.exists(DIGITS_CSV):
        pytest.skip("digits dataset not present")
    return DIGITS_CSV
