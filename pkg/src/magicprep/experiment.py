"""Experiment configuration and the batched Monte Carlo driver."""
from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

import numpy as np

from .analysis import (
    fit_error_per_round,
    DetectionStats,
    PostSelectionResult,
    POST_SELECTION_MODES,
    def_and_correlation,
    ideal_observables,
    post_select,
)
from .circuit import GATE_SETS, Circuit, _cardinal, build_memory_circuit, parse_circuit
from .detectors.matching import MatchingDecoder
from .detectors.model import DetectorModel, build_detector_model
from .faultenum import enumerate_coefficients, predict_first_order
from .layout import SurfaceCodeLayout, build_layout
from .noise import NoiseParams, NoisyCircuit, apply_noise
from .stabsim.frame import DEFAULT_BATCH, batch_ranges
from .stabsim.records import sample_batches
from .stabsim.tableau import reference_run

NAMED_STATES: dict[str, tuple[float, float]] = {
    "ZERO": (0.0, 0.0),
    "ONE": (math.pi, 0.0),
    "PLUS": (math.pi / 2, 0.0),
    "MINUS": (math.pi / 2, math.pi),
    "PLUS_I": (math.pi / 2, math.pi / 2),
    "MINUS_I": (math.pi / 2, 3 * math.pi / 2),
    "A_PI4": (math.pi / 2, math.pi / 4),
    "H": (math.pi / 4, 0.0),
    "T": (math.acos(1 / math.sqrt(3)), math.pi / 4),
}


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


@dataclass(frozen=True)
class ExperimentConfig:
    distance: int = 3
    gate_set: str = "CNOT"
    state: str | None = "PLUS_I"
    theta: float | None = None
    phi: float | None = None
    noise: NoiseParams = field(default_factory=NoiseParams)
    rounds: int = 1
    basis: str = "Y"
    post_selection: str = "PREP_ROUND"
    shots: int = 10_000
    seed: int = 0
    batch_size: int = DEFAULT_BATCH
    workers: int = 1
    extra_qubits: bool = True
    ideal_readout: bool = False
    decode: bool = False
    record_path: str | None = None
    report_path: str | None = None
    csv_dir: str | None = None

    def __post_init__(self):
        d = self.distance
        if isinstance(d, bool) or not isinstance(d, int) or d < 3 or d % 2 == 0:
            raise ConfigError(f"distance: must be an odd integer >= 3, got {d!r}")
        if self.gate_set not in GATE_SETS:
            raise ConfigError(f"gate_set: must be one of {GATE_SETS}, got {self.gate_set!r}")
        if self.state is not None and self.state not in NAMED_STATES:
            raise ConfigError(f"state: unknown name {self.state!r}; known: {sorted(NAMED_STATES)}")
        if self.state is None and (self.theta is None or self.phi is None):
            raise ConfigError("theta/phi: give both angles or a named state")
        if not isinstance(self.rounds, int) or self.rounds < 1:
            raise ConfigError(f"rounds: must be an integer >= 1, got {self.rounds!r}")
        if self.basis not in ("X", "Y", "Z"):
            raise ConfigError(f"basis: must be X, Y or Z, got {self.basis!r}")
        if self.post_selection not in POST_SELECTION_MODES:
            raise ConfigError(f"post_selection: must be one of {sorted(POST_SELECTION_MODES)}, got {self.post_selection!r}")
        if POST_SELECTION_MODES[self.post_selection] > self.rounds:
            raise ConfigError(f"post_selection: {self.post_selection} needs rounds >= {POST_SELECTION_MODES[self.post_selection]}")
        if not isinstance(self.shots, int) or self.shots < 1:
            raise ConfigError(f"shots: must be a positive integer, got {self.shots!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed: must be a non-negative integer, got {self.seed!r}")
        if self.batch_size < 64:
            raise ConfigError("batch_size: must be at least 64")
        if self.workers < 1:
            raise ConfigError("workers: must be at least 1")

    @property
    def angles(self) -> tuple[float, float]:
        if self.state is not None:
            return NAMED_STATES[self.state]
        return float(self.theta), float(self.phi)

    @property
    def samplable(self) -> bool:
        return all(_cardinal(a) is not None for a in self.angles)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["noise"] = {k: v for k, v in dataclasses.asdict(self.noise).items()}
        return out

    @classmethod
    def from_dict(cls, m: Mapping[str, Any]) -> "ExperimentConfig":
        m = dict(m)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(m) - names - {"p1", "p2", "p_init", "p_meas", "p_uniform", "uniform"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        noise = m.pop("noise", None) or {}
        for k in ("p1", "p2", "p_init", "p_meas", "p_uniform", "uniform"):
            if k in m:
                noise[k] = m.pop(k)
        try:
            m["noise"] = noise if isinstance(noise, NoiseParams) else NoiseParams.from_mapping(noise)
        except ValueError as exc:
            raise ConfigError(f"noise: {exc}") from exc
        return cls(**m)


@dataclass
class Setup:
    layout: SurfaceCodeLayout
    circuit: Circuit
    noisy: NoisyCircuit
    model: DetectorModel
    ideal: np.ndarray
    reference_bits: np.ndarray


def build_setup(cfg: ExperimentConfig, circuit: Circuit | None = None, with_faults: bool | None = None) -> Setup:
    layout = build_layout(cfg.distance)
    theta, phi = cfg.angles
    if circuit is None:
        circuit = build_memory_circuit(
            layout, theta, phi, cfg.rounds, cfg.basis, cfg.gate_set, cfg.extra_qubits, cfg.ideal_readout
        )
    noisy = apply_noise(circuit, cfg.noise)
    need_faults = cfg.decode if with_faults is None else with_faults
    model = build_detector_model(noisy if need_faults else circuit, layout)
    ref = reference_run(circuit)
    ideal = ideal_observables(circuit, layout, model)
    return Setup(layout, circuit, noisy, model, ideal, ref.bits)


@dataclass
class BatchSummary:
    post: PostSelectionResult
    decoded: PostSelectionResult | None
    stats: DetectionStats
    bits: list[tuple[int, np.ndarray]] = field(default_factory=list)

    def merge(self, other: "BatchSummary") -> "BatchSummary":
        dec = None
        if self.decoded is not None and other.decoded is not None:
            dec = self.decoded.merge(other.decoded)
        return BatchSummary(self.post.merge(other.post), dec, self.stats.merge(other.stats), self.bits + other.bits)


def _summarise(setup: Setup, cfg: ExperimentConfig, bits: np.ndarray, decoder: MatchingDecoder | None) -> BatchSummary:
    post = post_select(bits, setup.model, setup.ideal, cfg.post_selection)
    events = setup.model.detector_bits(bits)
    decoded = None
    if decoder is not None:
        flips = decoder.predict(events)
        decoded = post_select(bits, setup.model, setup.ideal, cfg.post_selection, predicted_flips=flips)
    return BatchSummary(post, decoded, DetectionStats().update(events))


def _run_batches(cfg: ExperimentConfig, circuit_text: str | None, batch_ids: list[int], keep_bits: bool) -> BatchSummary:
    circuit = parse_circuit(circuit_text) if circuit_text is not None else None
    setup = build_setup(cfg, circuit)
    decoder = MatchingDecoder().fit(setup.model) if cfg.decode else None
    ref = reference_run(setup.circuit)
    total: BatchSummary | None = None
    for start, bits in sample_batches(setup.noisy, ref, cfg.shots, cfg.seed, cfg.batch_size, batch_ids):
        s = _summarise(setup, cfg, bits, decoder)
        if keep_bits:
            s.bits.append((start, bits))
        total = s if total is None else total.merge(s)
    assert total is not None
    return total


def simulate(cfg: ExperimentConfig, circuit: Circuit | None = None, keep_bits: bool = False) -> BatchSummary:
    """Sample ``cfg.shots`` shots, optionally across worker processes.

    Batches are assigned round-robin; each batch has its own RNG stream, so
    the merged result does not depend on the worker count.
    """
    if not cfg.samplable and circuit is None:
        raise ConfigError("state: sampling needs cardinal angles (multiples of pi/2); use enumerate for magic states")
    ids = [b for b, _, _ in batch_ranges(cfg.shots, cfg.batch_size)]
    text = circuit.to_text() if circuit is not None else None
    if cfg.workers == 1 or len(ids) == 1:
        parts = [_run_batches(cfg, text, ids, keep_bits)]
    else:
        chunks = [ids[w :: cfg.workers] for w in range(cfg.workers)]
        chunks = [c for c in chunks if c]
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(_run_batches, [cfg] * len(chunks), [text] * len(chunks), chunks, [keep_bits] * len(chunks)))
    out = parts[0]
    for p in parts[1:]:
        out = out.merge(p)
    out.bits.sort(key=lambda t: t[0])
    return out


def first_order_prediction(cfg: ExperimentConfig) -> dict:
    """Exact-coefficient prediction, used for states the sampler cannot handle."""
    theta, phi = cfg.angles
    mtype = "H_TYPE" if math.isclose(theta, math.pi / 2, abs_tol=1e-12) else "T_TYPE"
    rounds = POST_SELECTION_MODES[cfg.post_selection]
    rep = enumerate_coefficients(build_layout(cfg.distance), cfg.gate_set, mtype, rounds, angles=(theta, phi))
    return {
        "magic_type": mtype,
        "post_rounds": rounds,
        "coefficients": {k: f"{v.numerator}/{v.denominator}" for k, v in rep.coefficients().items()},
        "predicted_logical_error": predict_first_order(rep, cfg.noise),
    }


def summary_report(cfg: ExperimentConfig, setup: Setup, result: BatchSummary) -> dict:
    rep: dict[str, Any] = {
        "config": cfg.to_dict(),
        "circuit": dict(setup.circuit.metadata),
        "num_measurements": setup.circuit.num_measurements,
        "num_detectors": setup.model.num_detectors,
        "observable": setup.model.observables[0].name if setup.model.observables else None,
        "ideal_observable": int(setup.ideal[0]) if len(setup.ideal) else None,
        "post_selection": result.post.to_dict(),
    }
    if result.decoded is not None:
        rep["decoded"] = result.decoded.to_dict()
        rep["decoder"] = {"kind": "minimum-weight perfect matching (blossom)", "edge_weight": "-ln(p/(1-p))"}
    stats = result.stats
    if stats.n:
        rep["detection_event_fraction"] = {
            d.name: float(v) for d, v in zip(setup.model.detectors, stats.s1 / stats.n)
        }
    return rep


def def_corr(setup: Setup, result: BatchSummary, min_shots: int = 10_000):
    return def_and_correlation(result.stats, setup.model, min_shots=min_shots)


def iter_bits(result: BatchSummary) -> Iterable[np.ndarray]:
    for _, b in result.bits:
        yield b


def error_per_round(base: ExperimentConfig, max_rounds: int) -> dict:
    """Fidelity after 1..max_rounds rounds, with and without decoding, and the
    decay fit of each series.

    Each round count gets its own seed derived from ``base.seed``. Nothing is
    post-selected: the fidelity is one minus the logical error over all shots.
    """
    if max_rounds < 3:
        raise ConfigError("max_rounds: need at least 3 rounds to fit")
    ks = list(range(1, max_rounds + 1))
    series: dict[str, list[float]] = {"raw": [], "raw_se": [], "decoded": [], "decoded_se": []}
    for k in ks:
        seed = int(np.random.SeedSequence([base.seed, k]).generate_state(1)[0])
        cfg = dataclasses.replace(base, rounds=k, seed=seed, decode=True, post_selection="PREP_ROUND")
        res = simulate(cfg)
        floor = 1.0 / cfg.shots  # keeps zero-error points from getting infinite weight
        series["raw"].append(1.0 - res.post.eps_raw)
        series["raw_se"].append(max(res.post.eps_raw_se, floor))
        series["decoded"].append(1.0 - res.decoded.eps_raw)
        series["decoded_se"].append(max(res.decoded.eps_raw_se, floor))
    fits = {
        "uncorrected": fit_error_per_round(ks, series["raw"], series["raw_se"]).to_dict(),
        "corrected": fit_error_per_round(ks, series["decoded"], series["decoded_se"]).to_dict(),
    }
    return {"config": base.to_dict(), "rounds": ks, "fidelity": series, "fit": fits}
