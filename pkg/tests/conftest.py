import numpy as np
import pytest

from distlab import graph as gr
from distlab import problem as pb

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def fig2():
    return gr.fig2_graph()


@pytest.fixture
def dropped(fig2):
    return gr.drop_agent(fig2, 0)


@pytest.fixture
def pair():
    """Two agents, weight 1/2 each way."""
    return gr.LaplacianGraph(np.array([[0.5, -0.5], [-0.5, 0.5]]))


@pytest.fixture
def problem():
    return pb.sample(5, 3, 7)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
