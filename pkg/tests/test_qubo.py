import io
import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rackslot.annealer import assignment_energy
from rackslot.model import Assignment, Instance, objective_lambda
from rackslot.qubo import (
    PenaltyWeights, QuboModel, SlackMode, build_qubo, decode_bits, default_weights, encode_assignment,
    export_ising, export_qubo, import_ising, import_qubo, ising_energy, qubo_energy, slack_encoding, to_ising,
)

from conftest import make_t1, random_instance
from oracles import bounded_slack_coeffs, hamiltonian, hamiltonian_terms


def subset_sums(coeffs):
    return {sum(c for c, b in zip(coeffs, bits) if b) for bits in itertools.product((0, 1), repeat=len(coeffs))}


def test_slack_encoding_examples():
    assert slack_encoding(5) == [1, 2, 2]
    assert slack_encoding(3) == [1, 2]
    assert slack_encoding(2) == [1, 1]
    assert slack_encoding(0) == []
    assert slack_encoding(5, "binary") == [1, 2, 4]
    with pytest.raises(ValueError):
        slack_encoding(-1)


@pytest.mark.parametrize("R", range(0, 70))
def test_bounded_slack_reaches_exactly_0_to_R(R):
    coeffs = slack_encoding(R, SlackMode.BOUNDED)
    assert coeffs == bounded_slack_coeffs(R)
    assert subset_sums(coeffs) == set(range(R + 1))


@pytest.mark.parametrize("R", range(1, 40))
def test_binary_slack_is_powers_of_two(R):
    coeffs = slack_encoding(R, SlackMode.BINARY)
    assert coeffs == [2**l for l in range(len(coeffs))]
    assert 2 ** (len(coeffs) - 1) <= R < 2 ** len(coeffs)


def test_default_weights():
    t1 = make_t1()
    w = default_weights(t1)
    assert (w.A, w.B, w.C) == (pytest.approx(2.5), 1.0, pytest.approx(2.5))
    t2 = Instance.from_arrays([1, 1], [1], [[0.0]], pre_affinity=[[[0.3]], [[0.7]]])
    assert default_weights(t2).A == pytest.approx(2.0)
    zero = Instance.from_arrays([2, 2], [1, 1], np.zeros((2, 2)))
    w0 = default_weights(zero)
    assert (w0.A, w0.B, w0.C) == (1.0, 1.0, 1.0)


def test_penalty_weights_positive():
    with pytest.raises(ValueError):
        PenaltyWeights(0, 1, 1)
    with pytest.raises(ValueError):
        PenaltyWeights(1, -1, 1)


def test_build_t1():
    t1 = make_t1()
    w = default_weights(t1)
    model = build_qubo(t1, w)
    assert model.num_vars == 3 * 2 + 2 + 2
    assert qubo_energy(model, np.zeros(10)) == pytest.approx(w.A * 3 + w.C * (4 + 4))
    bits = encode_assignment(t1, Assignment((0, 0, 1)), model)
    ha, hb, hc = hamiltonian_terms(t1, w, bits)
    assert ha == 0 and hc == 0
    assert qubo_energy(model, bits) == pytest.approx(w.B * 0.1, abs=1e-12)


def test_empty_model():
    inst = Instance.from_arrays([0], [], np.zeros((0, 0)))
    model = build_qubo(inst)
    assert model.num_vars == 0 and model.offset == 0
    assert qubo_energy(model, []) == 0
    assert export_qubo(model) == "qubo 0 0.0\n"


def test_energy_length_mismatch():
    model = build_qubo(make_t1())
    with pytest.raises(ValueError):
        qubo_energy(model, np.zeros(9))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), N=st.integers(0, 5), M=st.integers(1, 3),
       mode=st.sampled_from(["bounded", "binary"]))
def test_energy_matches_term_by_term_oracle(seed, N, M, mode):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, N, M, max_cap=5, max_cost=3, feasible=False)
    w = PenaltyWeights(*rng.uniform(0.5, 4.0, size=3))
    model = build_qubo(inst, w, mode)
    coeffs = [slack_encoding(int(r), mode) for r in inst.capacities]
    assert model.num_vars == N * M + sum(len(c) for c in coeffs)
    for _ in range(20):
        bits = rng.integers(0, 2, size=model.num_vars)
        assert qubo_energy(model, bits) == pytest.approx(hamiltonian(inst, w, bits, coeffs), rel=1e-9, abs=1e-9)


def test_offset_at_zero_bits():
    rng = np.random.default_rng(5)
    for _ in range(10):
        inst = random_instance(rng, 4, 3, max_cap=6)
        w = default_weights(inst)
        model = build_qubo(inst, w)
        expected = w.A * inst.num_pallets + w.C * float((inst.capacities**2).sum())
        assert qubo_energy(model, np.zeros(model.num_vars)) == pytest.approx(expected)


def test_layout_indices(t1):
    model = build_qubo(t1)
    layout = model.layout
    assert layout.alloc_index(2, 1) == 5
    assert layout.describe(5) == ("x", 2, 1)
    assert list(layout.slack_indices(0)) == [6, 7]
    assert layout.describe(9) == ("slack", 1, 1)


def test_encode_overloaded(t1):
    w = default_weights(t1)
    model = build_qubo(t1, w)
    bits = encode_assignment(t1, Assignment((0, 0, 0)), model)
    assert list(bits[6:8]) == [0, 0]
    assert qubo_energy(model, bits) == pytest.approx(w.B * 1.5 + w.C * 1)


def test_encode_empty():
    inst = Instance.from_arrays([2], [], np.zeros((0, 0)))
    model = build_qubo(inst)
    bits = encode_assignment(inst, Assignment(()), model)
    assert len(bits) == model.num_vars == 2


def test_decode(t1):
    model = build_qubo(t1)
    a = Assignment((0, 0, 1))
    report = decode_bits(model, encode_assignment(t1, a, model))
    assert report.valid and report.assignment == a
    zero = decode_bits(model, np.zeros(10))
    assert not zero.valid and zero.violating == (0, 1, 2)
    bits = encode_assignment(t1, a, model)
    bits[model.layout.alloc_index(0, 1)] = 1
    both = decode_bits(model, bits)
    assert both.violating == (0,) and both.shelf_sets[0] == {0, 1}


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), N=st.integers(1, 6), M=st.integers(1, 3))
def test_feasible_assignment_energy_is_objective(seed, N, M):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, N, M, max_cap=6, max_cost=2)
    w = default_weights(inst)
    model = build_qubo(inst, w)
    caps = inst.capacities
    for _ in range(10):
        shelf_of = rng.integers(0, M, size=N)
        loads = np.bincount(shelf_of, weights=inst.costs, minlength=M)
        bits = encode_assignment(inst, shelf_of.tolist(), model)
        assert decode_bits(model, bits).assignment == Assignment(tuple(shelf_of))
        if np.all(loads <= caps):
            assert qubo_energy(model, bits) == pytest.approx(w.B * objective_lambda(inst, shelf_of.tolist()), abs=1e-9)


def test_slack_minimum_matches_assignment_energy():
    rng = np.random.default_rng(11)
    for _ in range(15):
        inst = random_instance(rng, 4, 2, max_cap=7, max_cost=3, feasible=False)
        w = PenaltyWeights(3.0, 1.0, 2.0)
        model = build_qubo(inst, w)
        n_alloc = model.layout.num_alloc
        for _ in range(10):
            shelf_of = rng.integers(0, 2, size=4).tolist()
            bits = encode_assignment(inst, shelf_of, model)
            best = min(
                qubo_energy(model, np.concatenate([bits[:n_alloc], s]))
                for s in itertools.product((0, 1), repeat=model.num_vars - n_alloc)
            )
            assert assignment_energy(inst, w, shelf_of) == pytest.approx(best, abs=1e-9)


def test_to_ising_single_variable():
    model = QuboModel(1, {0: 2.0}, {}, 0.0)
    ising = to_ising(model)
    assert ising.biases == {0: 1.0} and ising.offset == 1.0 and ising.couplings == {}


def test_to_ising_empty():
    ising = to_ising(QuboModel(0, {}, {}, 0.0))
    assert ising.biases == {} and ising.couplings == {} and ising.offset == 0.0


def test_to_ising_energy_equivalence_t1():
    model = build_qubo(make_t1())
    ising = to_ising(model)
    rng = np.random.default_rng(0)
    for _ in range(100):
        b = rng.integers(0, 2, size=model.num_vars)
        e = qubo_energy(model, b)
        assert ising_energy(ising, 2 * b - 1) == pytest.approx(e, rel=1e-9, abs=1e-9)


def test_export_format():
    model = QuboModel(2, {0: 1.5}, {(0, 1): -0.25}, 3.0)
    text = export_qubo(model)
    assert text.splitlines() == ["qubo 2 3.0", "0 0 1.5", "0 1 -0.25"]
    buf = io.StringIO()
    export_qubo(model, buf)
    assert buf.getvalue() == text


def test_export_round_trip_exhaustive(tmp_path):
    model = build_qubo(make_t1())
    path = tmp_path / "t1.qubo"
    export_qubo(model, path)
    back = import_qubo(path)
    assert back.same_coefficients(model)
    for bits in itertools.product((0, 1), repeat=10):
        assert qubo_energy(back, bits) == qubo_energy(model, bits)


def test_ising_round_trip():
    ising = to_ising(build_qubo(make_t1()))
    text = export_ising(ising)
    assert text.startswith("ising 10 ")
    back = import_ising(text)
    assert back.biases == ising.biases and back.couplings == ising.couplings and back.offset == ising.offset


def test_import_errors():
    with pytest.raises(ValueError, match="line 1"):
        import_qubo("ising 2 0\n")
    with pytest.raises(ValueError, match="line 2"):
        import_qubo("qubo 2 0\n0 x 1\n")
    with pytest.raises(ValueError, match="line 2"):
        import_qubo("qubo 2 0\n1 0 1\n")
