import logging

import pytest
from hypothesis import settings

from wcsnet.config import default_config
from wcsnet.kernel import build_kernel

settings.register_profile("default", max_examples=25, deadline=None)
settings.load_profile("default")

# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def record(criterion: str, passed: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (passed, detail)
    print(f"{criterion}: {'PASS' if passed else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1])):
        ok, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{name}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(autouse=True)
def _quiet_closed_form_warning():
    logging.getLogger("wcsnet.kernel").setLevel(logging.ERROR)
    yield


@pytest.fixture(scope="session")
def cfg():
    return default_config()


@pytest.fixture(scope="session")
def kernel(cfg):
    return build_kernel(cfg)


@pytest.fixture(scope="session")
def default_sim(cfg):
    from wcsnet.montecarlo import run

    return run(cfg, 10**6)
