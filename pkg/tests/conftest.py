import os

import pytest
from hypothesis import HealthCheck, settings

from frontrecon.fluxlib import FluxCurve

settings.register_profile(
    "repo",
    deadline=None,
    max_examples=int(os.environ.get("HYPOTHESIS_EXAMPLES", "40")),
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.load_profile("repo")


@pytest.fixture(scope="session")
def quad():
    return FluxCurve.quadratic_flux()


@pytest.fixture(scope="session")
def cubic():
    """Concave then convex on [0, 1], one inflection at 1/2."""
    return FluxCurve.from_callables(
        lambda u: u**3 - 1.5 * u**2 + u,
        lambda u: 3 * u * u - 3 * u + 1,
        0.0,
        1.0,
        lip_df=3.0,
        inflections=(0.5,),
        name="cubic",
    )


_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
