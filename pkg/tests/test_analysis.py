import math

import numpy as np
import pytest
from sklearn.base import clone

from magicprep.analysis import (
    CorrMatrix,
    DetectionStats,
    EmptyRetainedError,
    ErrorPerRoundFit,
    InsufficientShotsError,
    PostSelectionResult,
    correlation_matrix,
    corr_csv,
    decay_model,
    def_and_correlation,
    def_csv,
    density_from_bloch,
    exact_logical_expectations,
    fit_error_per_round,
    ideal_observables,
    post_select,
    project_psd,
    state_fidelity,
    target_state,
    tomography,
    tomography_from_expectations,
)
from magicprep.circuit import build_memory_circuit
from magicprep.detectors.model import build_detector_model
from magicprep.stabsim.tableau import reference_run


def test_post_selection_counts():
    r = PostSelectionResult(total=100, retained=80, raw_errors=10, det_errors=4)
    assert r.retained_fraction == 0.8
    assert r.eps_raw == 0.1 and r.eps_det == 0.05 and r.ratio == pytest.approx(2.0)
    assert r.ratio_se > 0
    m = r.merge(PostSelectionResult(50, 50, 0, 0))
    assert (m.total, m.retained, m.raw_errors, m.det_errors) == (150, 130, 10, 4)
    with pytest.raises(ValueError):
        r.merge(PostSelectionResult(1, 1, 0, 0, "TWO_ROUNDS"))
    with pytest.raises(EmptyRetainedError):
        PostSelectionResult(10, 0, 3, 0).eps_det
    assert PostSelectionResult(10, 5, 1, 0).ratio == math.inf


def test_post_select_on_shots(layout3):
    c = build_memory_circuit(layout3, math.pi / 2, math.pi / 2, 2, "Y")
    model = build_detector_model(c, layout3)
    ideal = ideal_observables(c, layout3, model)
    ref = reference_run(c).bits
    bits = np.tile(ref, (4, 1))
    # shot 1: flip a round-1 deterministic stabilizer; shot 2: flip the centre readout
    d0 = model.detectors[0].ordinals[0]
    bits[1, d0] ^= 1
    bits[2, c.tag_index[("data", layout3.center)]] ^= 1
    r = post_select(bits, model, ideal, "PREP_ROUND")
    assert (r.total, r.retained, r.raw_errors, r.det_errors) == (4, 3, 1, 1)
    r2 = post_select(bits, model, ideal, "TWO_ROUNDS")
    assert r2.retained == 3
    flips = np.zeros((4, 1), np.uint8)
    flips[2] = 1
    assert post_select(bits, model, ideal, predicted_flips=flips).raw_errors == 0


@pytest.mark.parametrize("phi,expected", [(0, {"X": 1, "Y": 0, "Z": 0}), (math.pi / 2, {"X": 0, "Y": 1, "Z": 0}),
                                          (math.pi, {"X": -1, "Y": 0, "Z": 0})])
def test_exact_logical_expectations(layout5, phi, expected):
    for gs in ("CNOT", "CZ"):
        assert exact_logical_expectations(layout5, math.pi / 2, phi, gs, rounds=2) == expected


def test_ideal_observable_random_raises(layout3):
    c = build_memory_circuit(layout3, 0, 0, 1, "X")
    with pytest.raises(ValueError):
        ideal_observables(c, layout3, build_detector_model(c, layout3))


def test_fidelity_and_projection():
    psi = target_state(1.0, 0.4)
    rho = np.outer(psi, psi.conj())
    assert state_fidelity(rho, rho) == pytest.approx(1.0)
    mixed = density_from_bloch([0, 0, 0])
    assert state_fidelity(mixed, rho) == pytest.approx(0.5)
    fixed = project_psd(density_from_bloch([1.0, 1.0, 0.0]))
    assert np.all(np.linalg.eigvalsh(fixed) >= -1e-12)
    assert np.trace(fixed).real == pytest.approx(1.0)


def test_tomography(rng):
    n = 20000
    # |+i>: Y always +1, X and Z random
    out = {"X": rng.integers(0, 2, n), "Y": np.zeros(n, np.uint8), "Z": rng.integers(0, 2, n)}
    t = tomography(out, math.pi / 2, math.pi / 2)
    assert t.fidelity > 0.99
    assert t.expectations["Y"] == 1.0
    with pytest.raises(InsufficientShotsError):
        tomography({b: np.zeros(10) for b in "XYZ"}, 0, 0)
    t2 = tomography_from_expectations({"X": 0, "Y": 0, "Z": 0.8}, 0, 0)
    assert t2.fidelity == pytest.approx(0.9)


@pytest.mark.parametrize("eps", [0.05, 0.25, 0.45])
@pytest.mark.parametrize("k0", [0.0, 0.7, -1.3])
def test_fit_recovers_exact_curves(eps, k0):
    k = np.arange(1, 11)
    fit = fit_error_per_round(k, decay_model(k, eps, k0))
    assert fit.eps == pytest.approx(eps, abs=1e-9)


def test_fit_rejects_short_series():
    with pytest.raises(ValueError):
        fit_error_per_round([1, 2], [0.9, 0.8])


def test_fit_estimator():
    k = np.arange(1, 9, dtype=float)
    y = decay_model(k, 0.02, 0.5)
    est = ErrorPerRoundFit().fit(k, y)
    assert est.eps_ == pytest.approx(0.02, abs=1e-9)
    np.testing.assert_allclose(est.predict(k), y, atol=1e-12)
    assert est.score(k, y) == pytest.approx(1.0)
    assert clone(est).get_params() == {"absolute_sigma": True}


def test_correlation_recovers_pair_probability(rng):
    n = 400_000
    p_pair, p_a, p_b = 0.03, 0.02, 0.05
    pair = rng.random(n) < p_pair
    a = pair ^ (rng.random(n) < p_a)
    b = pair ^ (rng.random(n) < p_b)
    c = rng.random(n) < 0.04
    ev = np.stack([a, b, c], axis=1).astype(np.uint8)
    stats = DetectionStats().update(ev[: n // 2]).merge(DetectionStats().update(ev[n // 2 :]))
    m = correlation_matrix(stats.s1 / stats.n, stats.s2 / stats.n)
    assert m[0, 1] == pytest.approx(p_pair, abs=0.003)
    assert m[0, 2] < 0.003 and m[1, 2] < 0.003
    assert np.allclose(m, m.T) and np.all(np.diag(m) == 0)


def test_def_and_corr_tables(layout3, rng):
    c = build_memory_circuit(layout3, 0, 0, 3, "Z")
    model = build_detector_model(c, layout3)
    events = (rng.random((20000, model.num_detectors)) < 0.1).astype(np.uint8)
    dm, cm = def_and_correlation(events, model)
    assert dm.values.shape == (8, 4)
    assert np.nanmax(np.abs(dm.values - 0.1)) < 0.01
    assert np.isnan(dm.values[0, 0])  # Z1 is random in round 1
    text = def_csv(dm, [s.name for s in layout3.stabilizers])
    assert text.splitlines()[0] == ",round1,round2,round3,final(data)"
    assert isinstance(cm, CorrMatrix) and len(corr_csv(cm).splitlines()) == model.num_detectors + 1
    with pytest.raises(InsufficientShotsError):
        def_and_correlation(events[:100], model)
