import numpy as np
import pytest

from finray_qd.design import benchmark_design
from finray_qd.grasp import EvalConfig, ObjectSet, RigidObjectSpec
from finray_qd.sim import SimConfig


@pytest.fixture(scope="session")
def benchmark():
    return benchmark_design()


@pytest.fixture(scope="session")
def fast_sim():
    """Coarse, quick simulation settings for unit tests."""
    return SimConfig(dt=0.01, h_min=1.5, h_max=4.0, grip_time=0.5,
                     settle_max_steps=150)


@pytest.fixture(scope="session")
def fast_eval(fast_sim):
    return EvalConfig(sim=fast_sim)


@pytest.fixture(scope="session")
def tiny_objects():
    return ObjectSet(objects=(
        RigidObjectSpec("ball", "sphere", {"radius": 12.0}, 0.05),
        RigidObjectSpec("can", "cylinder", {"radius": 15.0, "height": 40.0}, 0.12),
    ))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


@pytest.fixture(scope="session")
def acceptance_record():
    """Callable used by the acceptance tests to log their PASS details."""

    def _record(name: str, detail: str) -> None:
        ACCEPTANCE_RESULTS.append((name, detail))

    return _record


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, printed after the run."""
    failed = [rep.nodeid.split("::")[-1]
              for rep in terminalreporter.stats.get("failed", [])
              if "test_criterion_" in rep.nodeid]
    if not ACCEPTANCE_RESULTS and not failed:
        return
    terminalreporter.section("acceptance criteria")
    for name, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"PASS criterion {name}: {detail}")
    for nodeid in failed:
        terminalreporter.write_line(f"FAIL {nodeid}")
