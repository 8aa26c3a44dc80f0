"""Exact first-order logical error coefficients of the preparation protocol.

Every single channel term is classified as

* ``DETECTED``: it fires a post-selection detector in the rounds in scope;
* ``LOGICAL``: it fires none and leaves a frame that anticommutes with the
  logical X or logical Z operator;
* ``HARMLESS``: neither.

Faults on the magic qubit before encoding (its reset and the noisy gates of
its rotation sequence) cannot be pushed through the non-Clifford rotation, so
they are judged on the single-qubit state at the point they occur: a Pauli
that does not stabilize that state corrupts the encoded state. The centre is
outside every deterministic stabilizer, so such faults are never detected;
this is checked, not assumed.

Coefficients are sums of exact term shares (1/3, 1/15, 1) of LOGICAL faults,
giving ``p_L = a p1 + b p2 + c p_init`` to first order.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from .circuit import GATE_SETS, MAGIC_TYPES, Circuit, append_syndrome_rounds, build_prep_circuit
from .layout import SurfaceCodeLayout, build_layout
from .noise import Channel, NoiseParams, NoisyCircuit, apply_noise
from .stabsim.frame import all_fault_terms, single_fault_signatures

LOGICAL = "LOGICAL"
DETECTED = "DETECTED"
HARMLESS = "HARMLESS"

# representative targets; classification of the magic-qubit faults depends
# only on whether intermediate states are stabilizer states
TYPE_ANGLES = {
    "H_TYPE": (math.pi / 2, math.pi / 4),
    "T_TYPE": (math.acos(1 / math.sqrt(3)), math.pi / 4),
}

_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
_SQRT_X = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]])


def _z_rot(angle: float) -> np.ndarray:
    return np.diag([1.0, np.exp(1j * angle)])


@dataclass(frozen=True)
class FaultRecord:
    site: int
    instruction: str
    qubits: tuple[int, ...]
    term: str
    param: str
    share: Fraction
    classification: str
    reason: str


@dataclass(frozen=True)
class CoefficientReport:
    a: Fraction
    b: Fraction
    c: Fraction
    gate_set: str
    magic_type: str
    distance: int
    post_rounds: int
    ledger: tuple[FaultRecord, ...] = ()
    m: Fraction = Fraction(0)  # p_meas coefficient, absent from the first-order formula
    metadata: Mapping[str, str] = field(default_factory=dict)

    def coefficients(self) -> dict[str, Fraction]:
        return {"a": self.a, "b": self.b, "c": self.c}

    def contributions(self, param: str) -> dict[str, Fraction]:
        """LOGICAL share per instruction name for one parameter."""
        out: dict[str, Fraction] = {}
        for r in self.ledger:
            if r.classification == LOGICAL and r.param == param:
                out[r.instruction] = out.get(r.instruction, Fraction(0)) + r.share
        return out

    def to_dict(self, with_ledger: bool = True) -> dict:
        out = {
            "distance": self.distance,
            "gate_set": self.gate_set,
            "magic_type": self.magic_type,
            "post_rounds": self.post_rounds,
            "a": _frac(self.a),
            "b": _frac(self.b),
            "c": _frac(self.c),
            "p_meas_coefficient": _frac(self.m),
            "metadata": dict(self.metadata),
        }
        if with_ledger:
            out["ledger"] = [
                {
                    "site": r.site,
                    "instruction": r.instruction,
                    "qubits": list(r.qubits),
                    "term": r.term,
                    "param": r.param,
                    "share": _frac(r.share),
                    "classification": r.classification,
                    "reason": r.reason,
                }
                for r in self.ledger
            ]
        return out

    def to_json(self, with_ledger: bool = True) -> str:
        return json.dumps(self.to_dict(with_ledger), indent=2, sort_keys=True)


def _frac(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def parse_fraction(text: str) -> Fraction:
    return Fraction(text)


def _magic_prep_sites(circuit: Circuit, center: int) -> list[int]:
    """Instruction indices of the centre reset and its rotation sequence."""
    ins = circuit.instructions
    last = max(i for i, op in enumerate(ins) if center in op.qubits and op.name in ("SQRT_X", "Z_ROT"))
    return [i for i in range(last + 1) if center in ins[i].qubits and ins[i].name != "TICK"]


def _states_after(circuit: Circuit, sites: list[int]) -> dict[int, np.ndarray]:
    """Ideal magic-qubit state right after each site of its preparation."""
    psi = np.array([1, 0], dtype=complex)
    out = {}
    for i in sites:
        op = circuit.instructions[i]
        if op.name == "RESET":
            psi = np.array([1, 0], dtype=complex)
        elif op.name == "SQRT_X":
            psi = _SQRT_X @ psi
        elif op.name == "Z_ROT":
            psi = _z_rot(op.angle) @ psi
        elif op.name in _PAULI:
            psi = _PAULI[op.name] @ psi
        else:
            raise ValueError(f"unexpected {op.name} in the magic-qubit preparation")
        out[i] = psi
    return out


def _stabilizes(pauli: str, psi: np.ndarray) -> bool:
    return abs(abs(np.vdot(psi, _PAULI[pauli] @ psi)) - 1.0) < 1e-9


def classify_faults(noisy: NoisyCircuit, layout: SurfaceCodeLayout, post_rounds: int) -> list[FaultRecord]:
    """Ledger entry for every (channel, term) of ``noisy``."""
    circuit = noisy.base
    ti = circuit.tag_index
    center = layout.center
    magic_sites = set(_magic_prep_sites(circuit, center))
    states = _states_after(circuit, sorted(magic_sites))

    def detectors(flips: np.ndarray) -> np.ndarray:
        cols = [flips[:, ti[("stab", s, 1)]] for s in sorted(layout.deterministic_stabilizers)]
        for r in range(2, post_rounds + 1):
            for s in range(len(layout.stabilizers)):
                cols.append(flips[:, ti[("stab", s, r)]] ^ flips[:, ti[("stab", s, r - 1)]])
        return np.stack(cols, axis=1).any(axis=1)

    def logical(x: np.ndarray, z: np.ndarray) -> np.ndarray:
        lx = np.bitwise_xor.reduce(z[:, sorted(layout.logical_x)], axis=1)
        lz = np.bitwise_xor.reduce(x[:, sorted(layout.logical_z)], axis=1)
        return (lx | lz).astype(bool)

    in_magic = lambda ch: ch.site in magic_sites  # noqa: E731
    terms = all_fault_terms(noisy, skip=in_magic)
    sig = single_fault_signatures(noisy, terms)
    det = detectors(sig.flips) if terms else np.zeros(0, bool)
    log = logical(sig.x, sig.z) if terms else np.zeros(0, bool)

    # a corrupted magic qubit looks like an X, Y or Z on the centre once the
    # rotation is done; confirm none of those is ever detected
    probe_site = max(magic_sites)
    probe = [
        (Channel(probe_site, "PROBE", "none", (center,), ("X", "Y", "Z"), 0.0), t) for t in ("X", "Y", "Z")
    ]
    psig = single_fault_signatures(noisy, probe)
    centre_undetected = not detectors(psig.flips).any()

    records: list[FaultRecord] = []
    k = 0
    for ch in noisy.channels:
        op = circuit.instructions[ch.site]
        for term in ch.terms:
            share = ch.share
            if ch.site in magic_sites:
                if _stabilizes(term, states[ch.site]):
                    cls, why = HARMLESS, "stabilizes the magic-qubit state at this point"
                elif centre_undetected:
                    cls, why = LOGICAL, "corrupts the magic-qubit state before encoding"
                else:
                    cls, why = DETECTED, "corrupts the magic qubit but the centre is watched"
            else:
                if det[k]:
                    cls, why = DETECTED, "fires a post-selection detector"
                elif log[k]:
                    cls, why = LOGICAL, "undetected and flips a logical operator"
                else:
                    cls, why = HARMLESS, "undetected and commutes with both logical operators"
                k += 1
            records.append(FaultRecord(ch.site, op.name, ch.qubits, term, ch.param, share, cls, why))
    return records


def enumeration_circuit(
    layout: SurfaceCodeLayout, gate_set: str, magic_type: str, post_rounds: int, angles: tuple[float, float] | None = None
) -> Circuit:
    theta, phi = angles if angles is not None else TYPE_ANGLES[magic_type]
    c = build_prep_circuit(layout, theta, phi, gate_set, magic_type)
    return append_syndrome_rounds(c, layout, post_rounds - 1)


def enumerate_coefficients(
    layout: SurfaceCodeLayout | int,
    gate_set: str,
    magic_type: str,
    post_rounds: int,
    angles: tuple[float, float] | None = None,
) -> CoefficientReport:
    """Exact a, b, c for one configuration, with the full fault ledger.

    ``angles`` picks the target state; by default a representative state of
    ``magic_type``.
    """
    if isinstance(layout, int) and not isinstance(layout, bool):
        layout = build_layout(layout)
    if gate_set not in GATE_SETS:
        raise ValueError(f"unknown gate set {gate_set!r}")
    if magic_type not in MAGIC_TYPES:
        raise ValueError(f"unknown magic type {magic_type!r}")
    if post_rounds not in (1, 2):
        raise ValueError("post_rounds must be 1 or 2")
    circuit = enumeration_circuit(layout, gate_set, magic_type, post_rounds, angles)
    # any nonzero rate works: only term shares enter the coefficients
    noisy = apply_noise(circuit, NoiseParams(uniform=0.5))
    ledger = classify_faults(noisy, layout, post_rounds)
    sums = {"p1": Fraction(0), "p2": Fraction(0), "p_init": Fraction(0), "p_meas": Fraction(0)}
    for r in ledger:
        if r.classification == LOGICAL:
            sums[r.param] += r.share
    return CoefficientReport(
        a=sums["p1"],
        b=sums["p2"],
        c=sums["p_init"],
        m=sums["p_meas"],
        gate_set=gate_set,
        magic_type=magic_type,
        distance=layout.distance,
        post_rounds=post_rounds,
        ledger=tuple(ledger),
        metadata={"schedule": circuit.metadata["schedule"], "theta": circuit.metadata["theta"], "phi": circuit.metadata["phi"]},
    )


def predict_first_order(report: CoefficientReport, params: NoiseParams) -> float:
    """``a p1 + b p2 + c p_init``."""
    r = params.resolved()
    return float(report.a) * r["p1"] + float(report.b) * r["p2"] + float(report.c) * r["p_init"]


def golden_coefficients(gate_set: str, magic_type: str, distance: int, post_rounds: int) -> dict[str, Fraction]:
    """Reference table values for the preparation protocol."""
    d = Fraction(distance)
    if post_rounds == 1:
        b = Fraction(94, 15) if distance == 3 else Fraction(38, 15) + 4 * d / 3
    else:
        b = Fraction(2, 15) + 4 * d / 5
    t = magic_type == "T_TYPE"
    if gate_set == "CNOT":
        a = Fraction(5, 3) if t else Fraction(2, 3)
    elif post_rounds == 1:
        a = (Fraction(13, 3) if t else Fraction(10, 3)) + 4 * d / 3
    else:
        a = (Fraction(7, 3) if t else Fraction(4, 3)) + d
    return {"a": a, "b": b, "c": Fraction(1)}


@dataclass(frozen=True)
class TableCell:
    report: CoefficientReport
    expected: dict[str, Fraction]

    @property
    def matches(self) -> bool:
        return self.report.coefficients() == self.expected


def coefficient_table(
    distances: Iterable[int] = (3, 5, 7, 9),
    gate_sets: Iterable[str] = GATE_SETS,
    magic_types: Iterable[str] = MAGIC_TYPES,
    rounds: Iterable[int] = (1, 2),
) -> list[TableCell]:
    cells = []
    for d in distances:
        layout = build_layout(d)
        for g in gate_sets:
            for t in magic_types:
                for r in rounds:
                    rep = enumerate_coefficients(layout, g, t, r)
                    cells.append(TableCell(rep, golden_coefficients(g, t, d, r)))
    return cells
