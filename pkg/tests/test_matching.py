
import numpy as np
import pytest
from sklearn.base import clone

from magicprep.circuit import build_memory_circuit
from magicprep.detectors.matching import (
    MatchingDecoder,
    brute_force_matching,
    build_matching_graph,
    decode,
    edge_weight,
)
from magicprep.detectors.model import Detector, DetectorModel, FaultEntry, Observable, build_detector_model
from magicprep.noise import NoiseParams, apply_noise


def _toy(faults):
    dets = tuple(Detector((i,), "Z", i, 1) for i in range(4))
    obs = (Observable("L", (0,)),)
    return DetectorModel(dets, obs, tuple(FaultEntry(p, frozenset(d), frozenset(o), 0, "X", "p1") for p, d, o in faults))


# boundary - 0 - 1 - 2 - 3 - boundary; crossing the left boundary flips the observable
TOY = [
    (0.01, {0}, {0}),
    (0.01, {0, 1}, set()),
    (0.01, {1, 2}, set()),
    (0.01, {2, 3}, set()),
    (0.01, {3}, set()),
]


def test_edge_weight():
    assert edge_weight(0.5) == pytest.approx(1e-9)
    assert edge_weight(0.1) == pytest.approx(np.log(9))
    with pytest.raises(ValueError):
        edge_weight(0.0)


def test_empty_syndrome_predicts_nothing():
    dec = MatchingDecoder().fit(_toy(TOY))
    assert dec.predict(np.zeros((3, 4), np.uint8)).sum() == 0
    assert dec.matching_weight([]) == 0.0


@pytest.mark.parametrize("fired,flip", [
    ([0], 1), ([3], 0), ([0, 1], 0), ([1, 2], 0), ([0, 3], 1), ([1], 1), ([2], 0), ([0, 1, 2, 3], 0),
])
def test_toy_chain(fired, flip):
    dec = MatchingDecoder().fit(_toy(TOY))
    assert dec.decode(fired)[0] == flip
    assert decode(build_matching_graph(_toy(TOY)), fired)[0] == flip


def test_hyperedge_decomposition_and_drop():
    model = _toy(TOY + [(0.002, {0, 1, 2}, {0}), (0.002, {0, 2, 3}, set())])
    g = build_matching_graph(model)
    # {0,1,2}+L0 -> (0,b)+(1,2); {0,2,3} needs (0,b)+(2,3) with mask 1 != 0, or (0,2) missing
    assert g.dropped == (6,)
    p01 = g.edges[(1, 2)][0]
    assert p01 == pytest.approx(0.01 * 0.998 + 0.002 * 0.99)


def test_parallel_edges_merge():
    g = build_matching_graph(_toy(TOY + [(0.02, {0, 1}, set()), (0.05, {2, 3}, {0})]))
    assert g.edges[(0, 1)] == (pytest.approx(0.01 * 0.98 + 0.02 * 0.99), 0)
    # conflicting observable: the likelier edge wins
    assert g.edges[(2, 3)] == (0.05, 1)


def test_unmatchable_raises():
    dets = tuple(Detector((i,), "Z", i, 1) for i in range(3))
    model = DetectorModel(dets, (), (FaultEntry(0.1, frozenset({0, 1}), frozenset(), 0, "X", "p1"),))
    dec = MatchingDecoder().fit(model)
    with pytest.raises(ValueError):
        dec.decode([0])


@pytest.fixture(scope="module")
def surface_model():
    from magicprep.layout import build_layout

    lay = build_layout(3)
    c = build_memory_circuit(lay, 0, 0, 3, "Z")
    return build_detector_model(apply_noise(c, NoiseParams(uniform=1e-3)), lay)


def test_blossom_matches_brute_force(surface_model):
    dec = MatchingDecoder().fit(surface_model)
    rng = np.random.default_rng(0)
    n = surface_model.num_detectors
    for _ in range(60):
        k = int(rng.integers(1, 9))
        fired = sorted(rng.choice(n, size=k, replace=False).tolist())
        assert dec.matching_weight(fired) == pytest.approx(brute_force_matching(dec.graph_, fired), rel=1e-9, abs=1e-9)


def test_single_faults_are_corrected(surface_model):
    """Every graphlike fault whose edge is unambiguous is decoded exactly."""
    dec = MatchingDecoder().fit(surface_model)
    wrong = 0
    for f in surface_model.faults:
        if not f.detectors or len(f.detectors) > 2:
            continue
        key = tuple(sorted(f.detectors)) if len(f.detectors) == 2 else (min(f.detectors), dec.graph_.boundary)
        mask = sum(1 << o for o in f.observables)
        if dec.graph_.edges[key][1] != mask:
            continue  # parallel edge with a different logical effect
        wrong += int(dec.decode(sorted(f.detectors))[0] != (mask & 1))
    assert wrong == 0


def test_estimator_api(surface_model):
    dec = MatchingDecoder(cache_size=8)
    assert dec.get_params() == {"cache_size": 8}
    assert clone(dec).get_params() == {"cache_size": 8}
    dec.fit(surface_model)
    events = np.zeros((2, surface_model.num_detectors), np.uint8)
    events[1, [0, 1]] = 1
    out = dec.predict(events)
    assert out.shape == (2, 1) and out.dtype == np.uint8
