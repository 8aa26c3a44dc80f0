import numpy as np
import pytest

from magicprep.circuit import build_memory_circuit, build_prep_circuit
from magicprep.detectors.model import build_detector_model, final_reconstructable
from magicprep.noise import NoiseParams, apply_noise
from magicprep.stabsim.frame import all_fault_terms, single_fault_signatures


@pytest.mark.parametrize("d", [3, 5, 7])
@pytest.mark.parametrize("rounds", [1, 2, 4])
@pytest.mark.parametrize("basis", ["X", "Z"])
def test_detector_counts(d, rounds, basis):
    from magicprep.layout import build_layout

    lay = build_layout(d)
    c = build_memory_circuit(lay, 0 if basis == "Z" else np.pi / 2, 0, rounds, basis)
    m = build_detector_model(c, lay)
    n_stab = d * d - 1
    n_final = n_stab // 2
    assert m.num_detectors == n_stab // 2 + (rounds - 1) * n_stab + n_final
    assert len(m.observables) == 1
    assert sum(det.final for det in m.detectors) == n_final


def test_y_readout_final_detectors(layout3):
    with_extra = final_reconstructable(layout3, "Y", True)
    assert with_extra and all(
        layout3.stabilizers[i].kind in ("X", "Z") for i in with_extra
    )
    assert final_reconstructable(layout3, "Y", False) == []
    c = build_memory_circuit(layout3, np.pi / 2, np.pi / 2, 1, "Y", extra_qubits=False)
    m = build_detector_model(c, layout3)
    assert m.num_detectors == 4
    assert m.observables[0].name == "LY" and len(m.observables[0].ordinals) == 5


def test_post_rounds_truncates(layout3):
    c = build_memory_circuit(layout3, 0, 0, 3, "Z")
    m = build_detector_model(c, layout3, post_rounds=2)
    assert m.num_detectors == 4 + 8
    assert not any(det.final for det in m.detectors)
    with pytest.raises(ValueError):
        build_detector_model(c, layout3, post_rounds=4)
    with pytest.raises(ValueError):
        build_detector_model(c, layout3, basis="X")


def test_fault_list_consistent_with_propagation(layout3):
    c = build_memory_circuit(layout3, np.pi / 2, 0, 2, "X", "CZ")
    noisy = apply_noise(c, NoiseParams(p1=1e-3, p2=2e-3, p_init=3e-3, p_meas=4e-3))
    m = build_detector_model(noisy, layout3)
    terms = all_fault_terms(noisy)
    sig = single_fault_signatures(noisy, terms)
    by_key = {(f.site, f.term): f for f in m.faults}
    nonzero = 0
    for k, (ch, term) in enumerate(terms):
        dets = set(np.flatnonzero(m.detector_bits(sig.flips[k])[0]).tolist())
        obs = set(np.flatnonzero(m.observable_bits(sig.flips[k])[0]).tolist())
        f = by_key.get((ch.site, term))
        if dets or obs:
            nonzero += 1
            assert f is not None and set(f.detectors) == dets and set(f.observables) == obs
            assert f.probability == pytest.approx(ch.term_probability)
        else:
            assert f is None
    assert nonzero == len(m.faults)
    assert "detector D0" in m.to_text()


def test_silent_logical_faults_only_in_prep_round(layout3):
    """After the preparation round every stabilizer is watched, so a single
    fault that flips the observable must fire a detector."""
    c = build_memory_circuit(layout3, 0, 0, 3, "Z")
    noisy = apply_noise(c, NoiseParams(uniform=1e-3))
    m = build_detector_model(noisy, layout3)
    end_round1 = max(c.measurements[c.tag_index[("stab", s, 1)]] for s in range(len(layout3.stabilizers)))
    silent = [f for f in m.faults if f.observables and not f.detectors]
    assert silent
    assert all(f.site <= end_round1 for f in silent)


def test_open_prep_circuit_has_no_observable(layout3):
    c = build_prep_circuit(layout3, 0, 0)
    m = build_detector_model(c, layout3)
    assert m.observables == () and m.num_detectors == 4
