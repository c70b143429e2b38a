import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request, capsys):
    """Record one acceptance line and echo it past output capture."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(criterion: int, ok: bool, detail: str) -> None:
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} {detail}"
        lines.append(line)
        with capsys.disabled():
            print(f"\n{line}")

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
