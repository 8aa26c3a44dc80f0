"""Detectors, logical observables and the single-fault detector error model."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..circuit import Circuit
from ..layout import SurfaceCodeLayout
from ..noise import NoisyCircuit
from ..stabsim.frame import all_fault_terms, single_fault_signatures


@dataclass(frozen=True)
class Detector:
    """Parity of ``ordinals`` that is 0 without faults.

    ``round`` is the extraction round the detector closes; final detectors
    built from the data readout carry ``round = rounds + 1`` and ``final``.
    """

    ordinals: tuple[int, ...]
    kind: str
    stabilizer: int
    round: int
    final: bool = False

    @property
    def name(self) -> str:
        return f"{self.kind}{self.stabilizer}@{'final' if self.final else self.round}"


@dataclass(frozen=True)
class Observable:
    name: str
    ordinals: tuple[int, ...]


@dataclass(frozen=True)
class FaultEntry:
    probability: float
    detectors: frozenset[int]
    observables: frozenset[int]
    site: int
    term: str
    param: str


@dataclass(frozen=True)
class DetectorModel:
    detectors: tuple[Detector, ...]
    observables: tuple[Observable, ...]
    faults: tuple[FaultEntry, ...] = ()
    metadata: Mapping[str, str] = field(default_factory=dict)

    @property
    def num_detectors(self) -> int:
        return len(self.detectors)

    def _parity(self, groups: Sequence[tuple[int, ...]], bits: np.ndarray) -> np.ndarray:
        bits = np.atleast_2d(np.asarray(bits, np.uint8))
        out = np.zeros((bits.shape[0], len(groups)), np.uint8)
        for k, ords in enumerate(groups):
            if ords:
                out[:, k] = np.bitwise_xor.reduce(bits[:, list(ords)], axis=1)
        return out

    def detector_bits(self, bits: np.ndarray) -> np.ndarray:
        """Measurement bits (n, n_meas) -> detection events (n, n_det)."""
        return self._parity([d.ordinals for d in self.detectors], bits)

    def observable_bits(self, bits: np.ndarray) -> np.ndarray:
        """Measurement bits (n, n_meas) -> raw observable values (n, n_obs)."""
        return self._parity([o.ordinals for o in self.observables], bits)

    def detectors_up_to_round(self, last_round: int) -> np.ndarray:
        """Indices of non-final detectors closing in rounds ``<= last_round``."""
        return np.array([i for i, d in enumerate(self.detectors) if not d.final and d.round <= last_round], np.int64)

    def to_text(self) -> str:
        lines = [f"# {k}={v}" for k, v in self.metadata.items()]
        for i, d in enumerate(self.detectors):
            lines.append(f"detector D{i} {d.name} " + " ".join(map(str, d.ordinals)))
        for i, o in enumerate(self.observables):
            lines.append(f"observable L{i} {o.name} " + " ".join(map(str, o.ordinals)))
        for f in self.faults:
            dets = " ".join(f"D{k}" for k in sorted(f.detectors))
            obs = " ".join(f"L{k}" for k in sorted(f.observables))
            lines.append(f"fault {f.probability!r} site={f.site} {f.param}:{f.term} | {dets} | {obs}".rstrip())
        return "\n".join(lines) + "\n"


def final_reconstructable(layout: SurfaceCodeLayout, basis: str, extra_qubits: bool) -> list[int]:
    """Stabilizers whose whole support is read out in their own basis."""
    from ..circuit import logical_measurement_bases

    if basis == "Y" and not extra_qubits:
        return []
    bases = logical_measurement_bases(layout, basis, extra_qubits)
    return [i for i, s in enumerate(layout.stabilizers) if all(bases[q] == s.kind for q in s.support)]


def observable_definitions(layout: SurfaceCodeLayout, basis: str) -> list[tuple[str, list[int]]]:
    """Data qubits whose readout parity gives the logical value."""
    if basis == "Z":
        return [("LZ", sorted(layout.logical_z))]
    if basis == "X":
        return [("LX", sorted(layout.logical_x))]
    if basis == "Y":
        return [("LY", sorted(layout.logical_x | layout.logical_z))]
    raise ValueError(f"bad logical basis {basis!r}")


def define_detectors(
    circuit: Circuit, layout: SurfaceCodeLayout, post_rounds: int | None = None
) -> tuple[list[Detector], list[Observable]]:
    if int(circuit.metadata.get("distance", -1)) != layout.distance:
        raise ValueError("circuit and layout distances differ")
    rounds = circuit.rounds
    if rounds < 1:
        raise ValueError("circuit has no extraction round")
    last = rounds if post_rounds is None else int(post_rounds)
    if not 1 <= last <= rounds:
        raise ValueError(f"post_rounds must lie in [1, {rounds}], got {post_rounds}")
    ti = circuit.tag_index
    stabs = layout.stabilizers
    dets: list[Detector] = []
    for i in sorted(layout.deterministic_stabilizers):
        dets.append(Detector((ti[("stab", i, 1)],), stabs[i].kind, i, 1))
    for r in range(2, last + 1):
        for i, s in enumerate(stabs):
            dets.append(Detector((ti[("stab", i, r - 1)], ti[("stab", i, r)]), s.kind, i, r))
    obs: list[Observable] = []
    basis = circuit.metadata.get("final_basis")
    if basis is not None:
        extra = circuit.metadata.get("extra_qubits", "True") == "True"
        if last == rounds:
            for i in final_reconstructable(layout, basis, extra):
                s = stabs[i]
                ords = sorted(ti[("data", q)] for q in s.support) + [ti[("stab", i, rounds)]]
                dets.append(Detector(tuple(ords), s.kind, i, rounds + 1, final=True))
        for name, qs in observable_definitions(layout, basis):
            obs.append(Observable(name, tuple(ti[("data", q)] for q in qs)))
    return dets, obs


def build_detector_model(
    circuit: Circuit | NoisyCircuit,
    layout: SurfaceCodeLayout,
    basis: str | None = None,
    post_rounds: int | None = None,
) -> DetectorModel:
    """Detectors and observables for ``circuit``.

    Passing a :class:`NoisyCircuit` also derives the fault list: each channel
    term is propagated alone and recorded with the detectors and observables
    it flips. Terms that flip nothing are omitted.
    """
    noisy = circuit if isinstance(circuit, NoisyCircuit) else None
    base = noisy.base if noisy is not None else circuit
    if basis is not None and base.metadata.get("final_basis") != basis:
        raise ValueError(f"circuit ends in basis {base.metadata.get('final_basis')}, not {basis}")
    dets, obs = define_detectors(base, layout, post_rounds)
    meta = {
        "distance": str(layout.distance),
        "rounds": str(base.rounds),
        "post_rounds": str(post_rounds if post_rounds is not None else base.rounds),
        "final_basis": base.metadata.get("final_basis", "none"),
    }
    faults: list[FaultEntry] = []
    if noisy is not None:
        if not base.is_clifford():
            raise ValueError("fault propagation needs cardinal magic angles")
        terms = all_fault_terms(noisy, skip=lambda ch: ch.p <= 0.0)
        sig = single_fault_signatures(noisy, terms)
        model = DetectorModel(tuple(dets), tuple(obs))
        dbits = model.detector_bits(sig.flips) if len(terms) else np.zeros((0, len(dets)), np.uint8)
        obits = model.observable_bits(sig.flips) if len(terms) else np.zeros((0, len(obs)), np.uint8)
        for k, (ch, term) in enumerate(terms):
            dset = frozenset(np.flatnonzero(dbits[k]).tolist())
            oset = frozenset(np.flatnonzero(obits[k]).tolist())
            if dset or oset:
                faults.append(FaultEntry(ch.term_probability, dset, oset, ch.site, term, ch.param))
    return DetectorModel(tuple(dets), tuple(obs), tuple(faults), meta)
