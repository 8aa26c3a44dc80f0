import numpy as np
import pytest

from magicprep.circuit import build_memory_circuit
from magicprep.noise import NoiseParams, apply_noise
from magicprep.stabsim.records import read_records, sample_batches, sample_shots, write_records
from magicprep.stabsim.tableau import reference_run


def test_write_read_round_trip(tmp_path, rng):
    blocks = [rng.integers(0, 2, size=(n, 37), dtype=np.uint8) for n in (5, 0, 11)]
    path = tmp_path / "r.txt"
    n = write_records(path, {"num_measurements": 37, "seed": 4}, blocks)
    assert n == 16
    header, bits = read_records(path)
    assert header["seed"] == 4
    np.testing.assert_array_equal(bits, np.concatenate([b for b in blocks if len(b)]))


def test_read_rejects_bad_lines(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text('{"num_measurements": 3}\n010\n01\n')
    with pytest.raises(ValueError):
        read_records(p)
    p.write_text('{"num_measurements": 3}\n012\n')
    with pytest.raises(ValueError):
        read_records(p)
    p.write_text("")
    with pytest.raises(ValueError):
        read_records(p)


def test_shot_stream_matches_batches(layout3):
    c = build_memory_circuit(layout3, np.pi / 2, np.pi / 2, 2, "Y")
    noisy = apply_noise(c, NoiseParams(uniform=0.01))
    ref = reference_run(c)
    blocks = np.concatenate([b for _, b in sample_batches(noisy, ref, 300, 7, batch_size=128)])
    shots = list(sample_shots(noisy, ref, 300, 7, batch_size=128))
    assert [s.shot_id for s in shots] == list(range(300))
    np.testing.assert_array_equal(np.stack([s.bits for s in shots]), blocks)
    assert shots[3].to_line() == "".join(map(str, blocks[3]))


def test_mismatched_reference_rejected(layout3):
    c1 = build_memory_circuit(layout3, 0, 0, 1, "Z")
    c2 = build_memory_circuit(layout3, 0, 0, 2, "Z")
    with pytest.raises(ValueError):
        next(sample_batches(apply_noise(c1, NoiseParams()), reference_run(c2), 10, 0))
