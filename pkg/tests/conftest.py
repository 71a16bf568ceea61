import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ----------------------------------------------------------------- acceptance summary
ACCEPTANCE: list[tuple[str, str, str]] = []


@pytest.fixture
def record():
    """``record(criterion, passed, detail)`` adds one line to the acceptance summary."""

    def add(criterion: str, passed: bool, detail: str = ""):
        verdict = "PASS" if passed else "FAIL"
        line = f"criterion {criterion}: {verdict}  {detail}".rstrip()
        print(line)
        ACCEPTANCE.append((criterion, verdict, detail))
        return passed

    return add


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    order = {}
    for crit, verdict, detail in ACCEPTANCE:
        order.setdefault(crit, []).append((verdict, detail))
    for crit in sorted(order, key=lambda c: (int(c.split()[0]), c)):
        for verdict, detail in order[crit]:
            terminalreporter.write_line(f"criterion {crit}: {verdict}  {detail}".rstrip())
