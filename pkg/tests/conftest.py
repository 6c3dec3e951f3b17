from __future__ import annotations

import numpy as np
import pytest

from laguerre_gridshell.cyclide import CyclideParams, angle_to_conformal
from laguerre_gridshell.laguerre import map_from_recipe
from laguerre_gridshell.pipeline import default_config, surface_setup

DEFAULT_Z = -0.0005


@pytest.fixture(scope="session")
def default_setup():
    """(params, center) of the default 10 m patch."""
    return surface_setup(default_config())


@pytest.fixture(scope="session")
def default_map():
    return map_from_recipe(default_config()["transformation"])


@pytest.fixture(scope="session")
def unit_params():
    return CyclideParams(2.144, (-0.1 * np.pi, 0.1 * np.pi),
                         (0.0, float(angle_to_conformal(0.15 * np.pi))), 1.0)


# one line per acceptance criterion, printed after the run
ACCEPTANCE: list[tuple[str, bool, str]] = []


def record(name: str, ok: bool, detail: str) -> bool:
    ACCEPTANCE.append((name, bool(ok), detail))
    print(f"{'PASS' if ok else 'FAIL'} criterion {name}: {detail}")
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {name}: {detail}")
