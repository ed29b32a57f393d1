from __future__ import annotations

import pytest

from qfw.service import ServerConfig, serve


@pytest.fixture
def server_factory():
    """Start servers on ephemeral ports and close them after the test."""
    started = []

    def make(**overrides):
        overrides.setdefault("port", 0)
        server = serve(ServerConfig(**overrides))
        started.append(server)
        return server

    yield make
    for server in started:
        server.close(grace=5.0)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion."""
    rows = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            if getattr(report, "when", "call") != "call":
                continue
            if "test_acceptance" in report.nodeid:
                name = report.nodeid.split("::")[-1]
                rows.append((name, outcome.upper()))
    if not rows:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in sorted(rows):
        terminalreporter.write_line(f"{outcome:<6} {name}")
