import itertools
from functools import reduce

import numpy as np
import pytest

from magicprep.circuit import Circuit, Instruction, build_memory_circuit
from magicprep.stabsim.tableau import Tableau, apply_instruction, reference_run, run_tableau

P = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1, -1]).astype(complex),
}
H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
S = np.diag([1, 1j])
SQRT_X = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]])
ONE_Q = {"H": H, "S": S, "S_DAG": S.conj().T, "SQRT_X": SQRT_X, "X": P["X"], "Y": P["Y"], "Z": P["Z"]}
N = 3


def _op1(u, q):
    return reduce(np.kron, [u if k == q else np.eye(2) for k in range(N)])


def _op2(name, a, b):
    dim = 2**N
    m = np.zeros((dim, dim), complex)
    for i in range(dim):
        bits = [(i >> (N - 1 - k)) & 1 for k in range(N)]
        if name == "CNOT":
            out = list(bits)
            out[b] ^= bits[a]
            j = sum(v << (N - 1 - k) for k, v in enumerate(out))
            m[j, i] = 1
        else:
            m[i, i] = -1 if bits[a] and bits[b] else 1
    return m


def _random_clifford(rng, length=25):
    ops = []
    for _ in range(length):
        if rng.random() < 0.4:
            a, b = rng.choice(N, 2, replace=False)
            ops.append(Instruction(str(rng.choice(["CNOT", "CZ"])), (int(a), int(b))))
        else:
            ops.append(Instruction(str(rng.choice(sorted(ONE_Q))), (int(rng.integers(N)),)))
    return ops


@pytest.mark.parametrize("seed", range(20))
def test_expectations_match_state_vector(seed):
    rng = np.random.default_rng(seed)
    ops = _random_clifford(rng)
    t = Tableau(N)
    psi = np.zeros(2**N, complex)
    psi[0] = 1
    for ins in ops:
        apply_instruction(t, ins)
        if len(ins.qubits) == 1:
            psi = _op1(ONE_Q[ins.name], ins.qubits[0]) @ psi
        else:
            psi = _op2(ins.name, *ins.qubits) @ psi
    for word in itertools.product("IXYZ", repeat=N):
        if set(word) == {"I"}:
            continue
        m = reduce(np.kron, [P[c] for c in word])
        exact = np.vdot(psi, m @ psi).real
        got = t.expectation({q: c for q, c in enumerate(word) if c != "I"})
        assert got == pytest.approx(exact, abs=1e-9)


@pytest.mark.parametrize("basis,prep,expected", [
    ("Z", [], 0), ("Z", ["X"], 1), ("X", ["H"], 0), ("X", ["X", "H"], 1),
    ("Y", ["H", "S"], 0), ("Y", ["H", "S_DAG"], 1), ("Y", ["SQRT_X"], 1),
])
def test_deterministic_measurements(basis, prep, expected):
    t = Tableau(1)
    for g in prep:
        apply_instruction(t, Instruction(g, (0,)))
    out, det = t.measure(0, basis)
    assert det and out == expected


def test_random_measurement_forced():
    t = Tableau(1)
    t.h(0)
    out, det = t.measure_z(0, forced=1)
    assert not det and out == 1
    assert t.measure_z(0) == (1, True)


def test_bell_pair_correlation():
    c = Circuit((Instruction("H", (0,)), Instruction("CNOT", (0, 1)),
                 Instruction("MEASURE", (0,), basis="Z"), Instruction("MEASURE", (1,), basis="Z")))
    for forced in (0, 1):
        run = run_tableau(c, choose=lambda o, f=forced: f)
        assert list(run.bits) == [forced, forced]
        assert list(run.deterministic) == [False, True]


@pytest.mark.parametrize("gate_set", ["CNOT", "CZ"])
@pytest.mark.parametrize("phi,basis,ideal", [
    (0.0, "X", 0), (np.pi, "X", 1), (np.pi / 2, "Y", 0), (3 * np.pi / 2, "Y", 1),
])
def test_logical_readout_of_cardinal_states(layout3, gate_set, phi, basis, ideal):
    from magicprep.detectors.model import build_detector_model

    c = build_memory_circuit(layout3, np.pi / 2, phi, 2, basis, gate_set)
    run = reference_run(c)
    model = build_detector_model(c, layout3)
    assert not model.detector_bits(run.bits[None, :]).any()
    assert int(model.observable_bits(run.bits[None, :])[0, 0]) == ideal


def test_non_clifford_rejected(layout3):
    c = build_memory_circuit(layout3, 1.0, 0.3, 1, "Z")
    with pytest.raises(ValueError):
        reference_run(c)
