import os

import pytest
from hypothesis import HealthCheck, settings

from aereach import load_model, model_path

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("thorough", max_examples=1000, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def models():
    return {name: load_model(model_path(name)) for name in ("testmodel", "sir", "sir_point", "honeybees")}


@pytest.fixture(scope="session")
def reach_of(models):
    """Memoized ``compute_reach`` so slow benchmark runs happen once per session.

    Results carry their own wall time, so timing checks stay meaningful.
    """
    from aereach.reach import ReachOptions, compute_reach

    cache = {}

    def run(name, **opts):
        key = (name, tuple(sorted(opts.items())))
        if key not in cache:
            cache[key] = compute_reach(models[name], ReachOptions(**opts))
        return cache[key]

    return run


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion.

    ``verdict(label, ok, detail)`` prints the line, keeps it for the terminal
    summary and returns ``ok`` so the caller can assert on it.
    """

    def record(label: str, ok: bool, detail: str = "") -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  ({detail})" if detail else "")
        print(line)
        _ACCEPTANCE_LINES.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
