import pytest

from resilnet.network import Flow, build_topology
from resilnet.scenario import reference_flows, reference_topology, scenario_from_dict
from resilnet.sim import STRATEGIES, RunConfig, mix_seed, run


@pytest.fixture
def topo():
    return build_topology(reference_topology())


@pytest.fixture
def flows():
    return [Flow(**f) for f in reference_flows()]


MINI = {
    "extends": "detection", "name": "mini",
    "run": {"duration": 500.0, "runs": 3},
    "attacks": [{
        "id": "flood_cut", "kind": "coordinated", "alignment": 5.0,
        "cyber": {"kind": "ddos_flood", "targets": ["mec_0"], "start": 200.0, "duration": 200.0,
                  "intensity": 40.0, "ramp": 10.0},
        "physical": {"kind": "fiber_cut", "targets": ["gnb_0--mec_0"], "duration": 195.0},
    }],
}


@pytest.fixture(scope="session")
def mini():
    """A 500 s flood-and-cut scenario, short enough for unit tests."""
    return scenario_from_dict(MINI)


@pytest.fixture(scope="session")
def mini_runs(mini):
    return {s: run(RunConfig(mini, s, seed=mix_seed(1, 0))) for s in STRATEGIES}


# -- acceptance reporting -------------------------------------------------------

_CRITERIA: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = "PASS" if rep.outcome == "passed" else "FAIL"
        detail = getattr(item, "criterion_detail", "")
        _CRITERIA[number] = (status, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[number]
        line = f"criterion {number:>2}: {status}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
