"""Sparse Pauli strings with exact phase."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

_MUL = {
    ("X", "Y"): (1j, "Z"),
    ("Y", "Z"): (1j, "X"),
    ("Z", "X"): (1j, "Y"),
    ("Y", "X"): (-1j, "Z"),
    ("Z", "Y"): (-1j, "X"),
    ("X", "Z"): (-1j, "Y"),
}

# conjugation U P U^dagger for the single-qubit Cliffords we use
_CONJ1 = {
    "H": {"X": (1, "Z"), "Y": (-1, "Y"), "Z": (1, "X")},
    "S": {"X": (1, "Y"), "Y": (-1, "X"), "Z": (1, "Z")},
    "S_DAG": {"X": (-1, "Y"), "Y": (1, "X"), "Z": (1, "Z")},
    "SQRT_X": {"X": (1, "X"), "Y": (1, "Z"), "Z": (-1, "Y")},
    "X": {"X": (1, "X"), "Y": (-1, "Y"), "Z": (-1, "Z")},
    "Y": {"X": (-1, "X"), "Y": (1, "Y"), "Z": (-1, "Z")},
    "Z": {"X": (-1, "X"), "Y": (-1, "Y"), "Z": (1, "Z")},
}


@dataclass(frozen=True)
class PauliString:
    ops: Mapping[int, str] = field(default_factory=dict)
    sign: complex = 1

    def __post_init__(self):
        clean = {int(q): p for q, p in self.ops.items() if p != "I"}
        for p in clean.values():
            if p not in "XYZ":
                raise ValueError(f"bad Pauli {p!r}")
        if self.sign not in (1, -1, 1j, -1j):
            raise ValueError(f"sign must be a fourth root of unity, got {self.sign}")
        object.__setattr__(self, "ops", clean)

    @classmethod
    def from_str(cls, text: str, qubits=None) -> "PauliString":
        sign = 1
        if text[:1] in "+-":
            sign = -1 if text[0] == "-" else 1
            text = text[1:]
        if qubits is None:
            qubits = range(len(text))
        return cls(dict(zip(qubits, text)), sign)

    def __mul__(self, other: "PauliString") -> "PauliString":
        phase = self.sign * other.sign
        ops = dict(self.ops)
        for q, b in other.ops.items():
            a = ops.get(q)
            if a is None:
                ops[q] = b
            elif a == b:
                del ops[q]
            else:
                f, c = _MUL[(a, b)]
                phase *= f
                ops[q] = c
        return PauliString(ops, _snap(phase))

    def commutes(self, other: "PauliString") -> bool:
        anti = sum(1 for q, a in self.ops.items() if q in other.ops and other.ops[q] != a)
        return anti % 2 == 0

    @property
    def weight(self) -> int:
        return len(self.ops)

    def conjugate(self, gate: str, qubits: tuple[int, ...]) -> "PauliString":
        """Return ``U P U^dagger`` for a Clifford gate ``U``."""
        ops = dict(self.ops)
        sign = self.sign
        if gate in _CONJ1:
            (q,) = qubits
            if q in ops:
                s, p = _CONJ1[gate][ops[q]]
                ops[q] = p
                sign *= s
            return PauliString(ops, _snap(sign))
        if gate == "CNOT":
            c, t = qubits
            # X_c -> X_c X_t, Z_t -> Z_c Z_t; multiply images in order
            out = PauliString({}, sign)
            for q, p in sorted(ops.items()):
                out = out * _image_cnot(q, p, c, t)
            return out
        if gate == "CZ":
            a, b = qubits
            out = PauliString({}, sign)
            for q, p in sorted(ops.items()):
                out = out * _image_cz(q, p, a, b)
            return out
        raise ValueError(f"no conjugation rule for {gate}")

    def __str__(self) -> str:
        s = {1: "+", -1: "-", 1j: "+i", -1j: "-i"}[self.sign]
        return s + "".join(f"{p}{q}" for q, p in sorted(self.ops.items()))


def _snap(z: complex) -> complex:
    for r in (1, -1, 1j, -1j):
        if abs(z - r) < 1e-9:
            return r
    raise ValueError(z)


def _image_cnot(q, p, c, t) -> PauliString:
    if q == c:
        return {"X": PauliString({c: "X", t: "X"}), "Z": PauliString({c: "Z"}), "Y": PauliString({c: "Y", t: "X"})}[p]
    if q == t:
        return {"X": PauliString({t: "X"}), "Z": PauliString({c: "Z", t: "Z"}), "Y": PauliString({c: "Z", t: "Y"})}[p]
    return PauliString({q: p})


def _image_cz(q, p, a, b) -> PauliString:
    if q in (a, b):
        o = b if q == a else a
        return {"X": PauliString({q: "X", o: "Z"}), "Z": PauliString({q: "Z"}), "Y": PauliString({q: "Y", o: "Z"})}[p]
    return PauliString({q: p})
