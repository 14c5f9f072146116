import numpy as np
import pytest

from rackslot.model import Instance

ACCEPTANCE_LINES = []


def make_t1():
    lam = [[0, 0.1, 0.9], [0.1, 0, 0.5], [0.9, 0.5, 0]]
    return Instance.from_arrays([2, 2], [1, 1, 1], lam)


def make_t2():
    return Instance.from_arrays([1, 1], [1], [[0.0]], pre_affinity=[[[0.3]], [[0.7]]])


def random_instance(rng, N, M, max_cap=3, max_cost=1, max_pre=2, feasible=True):
    lam = np.triu(rng.random((N, N)), k=1)
    lam = lam + lam.T
    costs = rng.integers(1, max_cost + 1, size=N) if max_cost > 1 else np.ones(N, dtype=int)
    caps = rng.integers(0, max_cap + 1, size=M)
    pre = [rng.random((int(rng.integers(0, max_pre + 1)), N)).tolist() for _ in range(M)]
    if feasible:
        # widen shelves until a least-loaded packing fits
        loads = np.zeros(M, dtype=int)
        for c in costs:
            loads[int(np.argmin(loads))] += c
        caps = np.maximum(caps, loads)
    return Instance.from_arrays(caps.tolist(), costs.tolist(), lam, pre_affinity=pre)


@pytest.fixture
def t1():
    return make_t1()


@pytest.fixture
def t2():
    return make_t2()


@pytest.fixture
def acceptance_report():
    def record(criterion, passed, detail=""):
        ACCEPTANCE_LINES.append(f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
