import json
import time

import pytest
from hypothesis import HealthCheck, settings

from previewsafe.artifacts import write_artifacts
from previewsafe.problem import bundled, load_problem, problem_from_dict
from previewsafe.synthesis import common_safe_set, con_inv, max_controlled_invariant

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("default")

# one line per acceptance criterion, printed after the run
CRITERIA: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def criterion(request):
    """Record pass/fail of an acceptance criterion; use as ``with criterion("AC-1", "detail"):``."""

    class _Recorder:
        def __call__(self, name, detail=""):
            return _Scope(name, detail)

    class _Scope:
        def __init__(self, name, detail):
            self.name = name
            self.detail = detail

        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            ok = exc_type is None
            prev_ok, prev_detail = CRITERIA.get(self.name, (True, ""))
            detail = "; ".join(d for d in (prev_detail, self.detail if ok else f"{self.detail} -> {exc}") if d)
            CRITERIA[self.name] = (prev_ok and ok, detail)
            return False

    return _Recorder()


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(CRITERIA, key=lambda s: int(s.split("-")[1])):
        ok, detail = CRITERIA[name]
        terminalreporter.write_line(f"{name} {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def toy_problem():
    return load_problem(bundled("toy.json"))


@pytest.fixture(scope="session")
def cruise_problem():
    return load_problem(bundled("cruise.json"))


@pytest.fixture(scope="session")
def cruise_solution(cruise_problem):
    p = cruise_problem
    return con_inv(p.system, p.automaton, p.safety, p.options.fixpoint())


@pytest.fixture(scope="session")
def toy_solution(toy_problem):
    p = toy_problem
    return con_inv(p.system, p.automaton, p.safety, p.options.fixpoint())


# preview time and holding time pairs compared on the continuous examples
TIMING_PAIRS = [(1, 1), (1, 2), (2, 2), (1, 5)]


def with_timing(data: dict, tau_c: int, tau_d: int) -> dict:
    """Copy of a problem with every preview time set to ``tau_c`` and every holding time to ``tau_d``."""
    data = json.loads(json.dumps(data))
    for edge in data["automaton"]["edges"]:
        edge["preview"] = [tau_c, tau_c]
    data["automaton"]["holding"] = {q: tau_d for q in data["automaton"]["holding"]}
    return data


def timing_sweep(name: str):
    """Winning sets for every timing pair plus the preview-agnostic baseline."""
    base = json.loads(bundled(name).read_text())
    out = {}
    for pair in TIMING_PAIRS:
        p = problem_from_dict(with_timing(base, *pair))
        started = time.perf_counter()
        result, cert = con_inv(p.system, p.automaton, p.safety, p.options.fixpoint())
        out[pair] = (p, result, cert, time.perf_counter() - started)
    p = problem_from_dict(base)
    inv = max_controlled_invariant(p.system, common_safe_set(p.system, p.safety), p.options.fixpoint())
    return out, inv


@pytest.fixture(scope="session")
def lane_sweep():
    return timing_sweep("lane4d.json")


@pytest.fixture(scope="session")
def hills_sweep():
    return timing_sweep("cruise_hills.json")


@pytest.fixture(scope="session")
def lane_artifacts(lane_sweep, tmp_path_factory):
    p, result, cert, _ = lane_sweep[0][(1, 2)]
    out_dir = tmp_path_factory.mktemp("lane")
    write_artifacts(out_dir, p, result, cert)
    return p, out_dir, result.W
