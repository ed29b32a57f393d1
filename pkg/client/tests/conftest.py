from __future__ import annotations

import signal
import subprocess
import sys

import pytest


@pytest.fixture(scope="session")
def server_address():
    """A live server, reached only through its public CLI and wire protocol."""
    process = subprocess.Popen(
        [sys.executable, "-m", "qfw", "serve", "--port", "0",
         "--nodes", "2", "--slots-per-node", "8",
         "--backend", "statevector", "--backend", "mock:0.05"],
        stdout=subprocess.PIPE,
        stderr=subprocess.STDOUT,
        text=True,
    )
    banner = process.stdout.readline().strip()
    assert "listening on" in banner, banner
    yield banner.rsplit(" ", 1)[-1]
    process.send_signal(signal.SIGTERM)
    process.wait(timeout=15)
