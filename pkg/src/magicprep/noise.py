"""Circuit-level Pauli noise: one channel per noisy instruction."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .circuit import GATE1, GATE2, Circuit

PAULIS1 = ("X", "Y", "Z")
PAULIS2 = tuple(a + b for a, b in itertools.product("IXYZ", repeat=2) if a + b != "II")

# Pauli that flips a measurement in each basis
_MEAS_FLIP = {"Z": "X", "X": "Z", "Y": "X"}


@dataclass(frozen=True)
class NoiseParams:
    p1: float = 0.0
    p2: float = 0.0
    p_init: float = 0.0
    p_meas: float = 0.0
    uniform: float | None = None

    def __post_init__(self):
        for name in ("p1", "p2", "p_init", "p_meas", "uniform"):
            v = getattr(self, name)
            if v is None:
                continue
            if not 0.0 <= float(v) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    @classmethod
    def from_uniform(cls, p: float) -> "NoiseParams":
        return cls(uniform=p)

    def resolved(self) -> dict[str, float]:
        if self.uniform is not None:
            u = float(self.uniform)
            return {"p1": u, "p2": u, "p_init": u, "p_meas": u}
        return {"p1": self.p1, "p2": self.p2, "p_init": self.p_init, "p_meas": self.p_meas}

    @classmethod
    def from_mapping(cls, m: Mapping[str, float]) -> "NoiseParams":
        keys = {"p1": "p1", "p2": "p2", "p_init": "p_init", "p_meas": "p_meas", "p_uniform": "uniform", "uniform": "uniform"}
        kw = {}
        for k, v in m.items():
            if k not in keys:
                raise ValueError(f"unknown noise key {k!r}")
            if v is not None:
                kw[keys[k]] = float(v)
        return cls(**kw)


@dataclass(frozen=True)
class Channel:
    """Noise attached to instruction ``site``.

    ``terms`` are Pauli strings over ``qubits``; each fires with probability
    ``p * share`` where ``share`` is exact (1/3, 1/15 or 1). ``before`` marks
    measurement flips, which act just before the (ideal) measurement.
    """

    site: int
    kind: str  # DEPOL1, DEPOL2, RESET_FLIP, MEAS_FLIP
    param: str  # p1, p2, p_init, p_meas
    qubits: tuple[int, ...]
    terms: tuple[str, ...]
    p: float
    before: bool = False

    @property
    def share(self) -> Fraction:
        return Fraction(1, len(self.terms))

    @property
    def term_probability(self) -> float:
        return self.p / len(self.terms)


@dataclass(frozen=True)
class NoisyCircuit:
    base: Circuit
    channels: tuple[Channel, ...]
    params: NoiseParams = field(default_factory=NoiseParams)

    def by_site(self) -> dict[int, list[Channel]]:
        out: dict[int, list[Channel]] = {}
        for ch in self.channels:
            out.setdefault(ch.site, []).append(ch)
        return out


def channel_for(site: int, ins, rates: Mapping[str, float]) -> Channel:
    name = ins.name
    if name in GATE2:
        return Channel(site, "DEPOL2", "p2", ins.qubits, PAULIS2, rates["p2"])
    if name in GATE1:
        return Channel(site, "DEPOL1", "p1", ins.qubits, PAULIS1, rates["p1"])
    if name == "RESET":
        return Channel(site, "RESET_FLIP", "p_init", ins.qubits, ("X",), rates["p_init"])
    if name == "PREP_PLUS":
        return Channel(site, "RESET_FLIP", "p_init", ins.qubits, ("Z",), rates["p_init"])
    if name == "MEASURE":
        return Channel(site, "MEAS_FLIP", "p_meas", ins.qubits, (_MEAS_FLIP[ins.basis],), rates["p_meas"], before=True)
    raise ValueError(f"no channel for {name}")


def apply_noise(circuit: Circuit, params: NoiseParams) -> NoisyCircuit:
    """Attach one channel to every ``noise_site`` instruction."""
    if not isinstance(params, NoiseParams):
        raise TypeError("params must be NoiseParams")
    rates = params.resolved()
    channels = tuple(
        channel_for(i, ins, rates) for i, ins in enumerate(circuit.instructions) if ins.noise_site
    )
    return NoisyCircuit(circuit, channels, params)
