import numpy as np
import pytest

from gappde.geometry import make_endpoint_config
from gappde.jets import JetField, multi_indices

# ten two-endpoint configurations covering both region kinds, symmetric and
# lopsided placements, gaps in the bulk and near the edge
SWEEP_SPECS = [
    ((-0.5, 0.7), "J"), ((-1.2, 0.3), "J"), ((0.1, 1.4), "J"), ((-0.8, 0.8), "Jc"),
    ((-1.5, -0.2), "Jc"), ((0.4, 1.1), "Jc"), ((-0.3, 1.6), "J"), ((-1.0, 1.0), "J"),
    ((0.5, 2.2), "Jc"), ((-2.0, -0.6), "Jc"),
]
THREE_SPECS = [((-1.1, 0.2, 0.9), "Jc"), ((-0.9, 0.3, 1.2), "J")]

SWEEP = [make_endpoint_config(e, k) for e, k in SWEEP_SPECS]
THREE = [make_endpoint_config(e, k) for e, k in THREE_SPECS]

ACCEPTANCE_LINES: list[str] = []


def random_jet(config, order=4, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    jet = JetField(config.N, order, config=config)
    for a in multi_indices(config.N, order):
        jet.partials[a] = scale * rng.normal()
    return jet


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
