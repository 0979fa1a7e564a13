import os

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import HealthCheck, settings

from stkr.graph_data import GraphDataset, canonical_edges, load_dataset_dir
from stkr.kernel import gram_from_weights

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CORA_DIR = os.path.join(ROOT, "data", "cora")

# 1-based edges 1-4, 2-4, 5-4, 2-6, 5-6, 6-3 of the six-node example graph
SIX_NODE_EDGES = [(0, 3), (1, 3), (4, 3), (1, 5), (4, 5), (5, 2)]


def psd_weights(seed, N, density=0.15):
    """Nonnegative p.s.d. weights ``B^T B`` with no empty rows."""
    rng = np.random.Generator(np.random.Philox(seed))
    B = sp.random(2 * N, N, density=density, random_state=rng, format="csc").toarray()
    empty = B.sum(axis=0) == 0
    B[rng.integers(0, 2 * N, empty.sum()), np.flatnonzero(empty)] = 1.0
    return B.T @ B


def psd_gram(seed, N, n, density=0.15):
    return gram_from_weights(psd_weights(seed, N, density), n)


def random_graph(seed, N, p=0.2):
    rng = np.random.Generator(np.random.Philox(seed))
    A = np.triu(rng.random((N, N)) < p, 1)
    i, j = np.nonzero(A)
    labels = rng.integers(0, 3, N)
    labels[:3] = [0, 1, 2]
    return GraphDataset(N, np.column_stack([i, j]), labels, 3, name=f"rand{seed}")


@pytest.fixture(scope="session")
def six_node():
    return GraphDataset(6, canonical_edges(SIX_NODE_EDGES, 6), np.array([0, 1, 0, 1, 0, 1]), 2, "six_node")


@pytest.fixture(scope="session")
def cora():
    if not os.path.exists(os.path.join(CORA_DIR, "edges.txt")):
        pytest.skip("Cora files not present")
    return load_dataset_dir(CORA_DIR)


ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


@pytest.fixture
def acceptance_report(request):
    """Record one ``PASS``/``FAIL`` line, printed now and again in the summary."""
    lines = request.config.stash[ACCEPTANCE]

    def report(number, name, ok, detail):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {name}: {detail}"
        lines.append((number, line))
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
