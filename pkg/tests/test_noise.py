from fractions import Fraction

import numpy as np
import pytest

from magicprep.circuit import Circuit, Instruction, build_memory_circuit
from magicprep.noise import NoiseParams, apply_noise
from magicprep.stabsim.frame import propagate


def test_uniform_overrides_every_rate():
    assert NoiseParams(p1=0.1, uniform=0.01).resolved() == {"p1": 0.01, "p2": 0.01, "p_init": 0.01, "p_meas": 0.01}
    with pytest.raises(ValueError):
        NoiseParams(p1=1.5)
    with pytest.raises(ValueError):
        NoiseParams.from_mapping({"p_idle": 0.1})


def test_channel_counts_and_shares(layout3):
    c = build_memory_circuit(layout3, np.pi / 2, np.pi / 2, 2, "Y")
    noisy = apply_noise(c, NoiseParams(p1=0.1, p2=0.2, p_init=0.3, p_meas=0.4))
    kinds = {}
    for ch in noisy.channels:
        kinds.setdefault(ch.kind, []).append(ch)
    assert len(kinds["DEPOL2"]) == c.count("CNOT")
    assert len(kinds["DEPOL1"]) == c.count("H") + c.count("SQRT_X")
    assert len(kinds["RESET_FLIP"]) == c.count("RESET")
    assert len(kinds["MEAS_FLIP"]) == c.count("MEASURE")
    assert all(ch.share == Fraction(1, 15) and len(ch.terms) == 15 for ch in kinds["DEPOL2"])
    assert all(ch.share == Fraction(1, 3) for ch in kinds["DEPOL1"])
    assert all(ch.before for ch in kinds["MEAS_FLIP"])
    assert not any(ch.before for ch in kinds["DEPOL2"])
    # no channel on virtual rotations or ticks
    sites = {ch.site for ch in noisy.channels}
    assert all(c.instructions[s].name not in ("Z_ROT", "TICK") for s in sites)


def test_ideal_readout_is_noiseless(layout3):
    c = build_memory_circuit(layout3, 0, 0, 1, "Z", ideal_readout=True)
    noisy = apply_noise(c, NoiseParams(uniform=0.1))
    data_sites = {c.measurements[c.tag_index[("data", q)]] for q in layout3.data_qubits}
    assert not data_sites & {ch.site for ch in noisy.channels}


def _freq_check(circuit, params, expected, shots=200_000, seed=3):
    noisy = apply_noise(circuit, params)
    res = propagate(noisy, shots, np.random.default_rng(seed))
    bits = res.flip_bits()
    for col, p in expected.items():
        f = bits[:, col].mean()
        sd = np.sqrt(p * (1 - p) / shots)
        assert abs(f - p) < 5 * sd + 1e-12, (col, f, p)
    return bits


def test_reset_and_measurement_flip_frequency():
    c = Circuit((Instruction("RESET", (0,)), Instruction("TICK"), Instruction("MEASURE", (0,), basis="Z")))
    _freq_check(c, NoiseParams(p_init=0.2), {0: 0.2})
    _freq_check(c, NoiseParams(p_meas=0.1), {0: 0.1})
    both = 0.2 * 0.9 + 0.8 * 0.1
    _freq_check(c, NoiseParams(p_init=0.2, p_meas=0.1), {0: both})


def test_two_qubit_depolarizing_frequency():
    c = Circuit((
        Instruction("RESET", (0,)), Instruction("RESET", (1,)), Instruction("TICK"),
        Instruction("CNOT", (0, 1)), Instruction("TICK"),
        Instruction("MEASURE", (0,), basis="Z"), Instruction("MEASURE", (1,), basis="Z"),
    ))
    p = 0.3
    bits = _freq_check(c, NoiseParams(p2=p), {0: 8 * p / 15, 1: 8 * p / 15})
    both = (bits[:, 0] & bits[:, 1]).mean()
    assert abs(both - 4 * p / 15) < 5 * np.sqrt(4 * p / 15 / len(bits))


def test_single_qubit_depolarizing_frequency():
    c = Circuit((Instruction("RESET", (0,)), Instruction("TICK"), Instruction("H", (0,)),
                 Instruction("TICK"), Instruction("MEASURE", (0,), basis="X")))
    _freq_check(c, NoiseParams(p1=0.3), {0: 0.2})
