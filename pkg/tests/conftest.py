import numpy as np
import pytest

from graphdarts.graph import GraphShape, SuperGraph

ACCEPTANCE = {}
NOTES = {}


def grad_close(analytic, numeric, rel=1e-4, abs_tol=1e-6, scale=1e-3):
    """Relative check, switching to absolute when the gradient is tiny."""
    if abs(numeric) < scale:
        return abs(analytic - numeric) < abs_tol
    return abs(analytic - numeric) / abs(numeric) < rel


def random_supergraph(rng, S=None, K=None, mode=None, activation=None):
    S = S or int(rng.integers(1, 4))
    K = K or int(rng.integers(1, 4))
    mode = mode or ("regular", "fair")[int(rng.integers(2))]
    activation = activation or ("identity", "logistic")[int(rng.integers(2))]
    g = SuperGraph.create(GraphShape(S, K, 1, activation), mode, rng)
    g.set_alpha(rng.normal(0.0, 1.0, size=(g.shape.n_edges, 8)))
    # spread b away from its zero init so its gradient is exercised
    for pid in g.params.ids(["w"]):
        if pid.endswith(":b"):
            g.params.set_value(pid, rng.uniform(-0.5, 0.5))
        else:
            g.params.set_value(pid, rng.uniform(-0.7, 0.7))
    return g


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def note(request):
    """Collects measured values for the acceptance summary."""
    lines = NOTES.setdefault(request.node.name, [])
    return lines.append


def pytest_runtest_logreport(report):
    if "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or report.failed:
        if ACCEPTANCE.get(name) != "failed":
            ACCEPTANCE[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in sorted(ACCEPTANCE.items()):
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
        for line in NOTES.get(name, []):
            terminalreporter.write_line(f"      {line}")
