import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lurecons import AgentDynamics, complete_graph, graph_matrices, spectral_data
from lurecons.graph import build_graph

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

OSC_A = np.array([[0.0, 1.0], [-1.0, 0.0]])
OSC_B = np.array([[0.0], [1.0]])


@pytest.fixture
def oscillator():
    return AgentDynamics(OSC_A, OSC_B)


@pytest.fixture
def integrator():
    return AgentDynamics(np.zeros((1, 1)), np.ones((1, 1)))


@pytest.fixture
def k3():
    return graph_matrices(complete_graph(3))


@pytest.fixture
def p3():
    return graph_matrices(build_graph(3, [(1, 2), (2, 3)]))


@pytest.fixture
def k3_spectral(k3):
    return spectral_data(k3)


@pytest.fixture
def report_line(capsys):
    """Print straight to the terminal, bypassing capture."""
    def emit(text):
        with capsys.disabled():
            print(f"\n{text}")
    return emit
