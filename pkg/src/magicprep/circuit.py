"""Circuit IR and builders for the preparation round and syndrome extraction.

One :class:`Instruction` is one gate application (one qubit or one pair), so
noise channels attach one-to-one to instructions. ``TICK`` separates
timesteps.

Two-qubit schedule (four layers per round, corners of each ancilla)::

    layer   X ancilla   Z ancilla
    A       NE          NE
    B       NW          SE
    C       SE          NW
    D       SW          SW

X-ancilla hooks land on horizontal data pairs and Z-ancilla hooks on vertical
pairs, i.e. perpendicular to the logical operator of the same Pauli type.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Mapping, Sequence

from .layout import Region, SurfaceCodeLayout

SCHEDULE = (("NE", "NE"), ("NW", "SE"), ("SE", "NW"), ("SW", "SW"))
SCHEDULE_NAME = "X:NE,NW,SE,SW Z:NE,SE,NW,SW"

GATE1 = frozenset({"H", "S", "S_DAG", "SQRT_X", "Z_ROT", "X", "Y", "Z"})
GATE2 = frozenset({"CNOT", "CZ"})
RESETS = frozenset({"RESET", "PREP_PLUS"})
GATE_SETS = ("CNOT", "CZ")
MAGIC_TYPES = ("H_TYPE", "T_TYPE")


@dataclass(frozen=True)
class Instruction:
    name: str
    qubits: tuple[int, ...] = ()
    angle: float | None = None
    basis: str | None = None
    noisy: bool = True
    tag: tuple | None = None

    def __post_init__(self):
        n = self.name
        if n == "TICK":
            if self.qubits:
                raise ValueError("TICK takes no qubits")
        elif n in GATE2:
            if len(self.qubits) != 2 or self.qubits[0] == self.qubits[1]:
                raise ValueError(f"{n} needs two distinct qubits")
        elif n in GATE1 or n in RESETS or n == "MEASURE":
            if len(self.qubits) != 1:
                raise ValueError(f"{n} acts on one qubit")
        else:
            raise ValueError(f"unknown instruction {n!r}")
        if n == "Z_ROT" and self.angle is None:
            raise ValueError("Z_ROT needs an angle")
        if n == "MEASURE" and self.basis not in ("X", "Y", "Z"):
            raise ValueError(f"bad measurement basis {self.basis!r}")

    @property
    def noise_site(self) -> bool:
        # virtual Z rotations are error free
        return self.noisy and self.name not in ("TICK", "Z_ROT")


@dataclass(frozen=True)
class Circuit:
    instructions: tuple[Instruction, ...]
    metadata: Mapping[str, str] = field(default_factory=dict)

    @cached_property
    def measurements(self) -> tuple[int, ...]:
        """Instruction indices of measurements, in ordinal order."""
        return tuple(i for i, ins in enumerate(self.instructions) if ins.name == "MEASURE")

    @cached_property
    def measurement_index(self) -> dict[tuple[int, int], int]:
        """``(qubit, occurrence) -> ordinal``."""
        seen: dict[int, int] = {}
        out = {}
        for ordinal, i in enumerate(self.measurements):
            q = self.instructions[i].qubits[0]
            k = seen.get(q, 0)
            out[(q, k)] = ordinal
            seen[q] = k + 1
        return out

    @cached_property
    def tag_index(self) -> dict[tuple, int]:
        return {self.instructions[i].tag: o for o, i in enumerate(self.measurements) if self.instructions[i].tag}

    @property
    def num_measurements(self) -> int:
        return len(self.measurements)

    @cached_property
    def num_qubits(self) -> int:
        return 1 + max((q for ins in self.instructions for q in ins.qubits), default=-1)

    @property
    def rounds(self) -> int:
        return int(self.metadata.get("rounds", 0))

    def timesteps(self) -> list[list[Instruction]]:
        steps: list[list[Instruction]] = [[]]
        for ins in self.instructions:
            if ins.name == "TICK":
                steps.append([])
            else:
                steps[-1].append(ins)
        return [s for s in steps if s]

    def count(self, name: str) -> int:
        return sum(1 for ins in self.instructions if ins.name == name)

    def is_clifford(self) -> bool:
        return all(_cardinal(ins.angle) is not None for ins in self.instructions if ins.name == "Z_ROT")

    def to_text(self) -> str:
        return format_circuit(self)


def _cardinal(angle: float | None) -> int | None:
    """Return k if ``angle`` is k*pi/2 (mod 2pi), else None."""
    if angle is None:
        return None
    k = angle / (math.pi / 2)
    r = round(k)
    if abs(k - r) > 1e-9:
        return None
    return r % 4


def _check_timesteps(instructions: Sequence[Instruction]) -> None:
    busy: set[int] = set()
    for ins in instructions:
        if ins.name == "TICK":
            busy.clear()
            continue
        for q in ins.qubits:
            if q in busy:
                raise ValueError(f"qubit {q} used twice in one timestep")
            busy.add(q)


def _make(steps: Iterable[Sequence[Instruction]], metadata: Mapping[str, str], prefix=()) -> Circuit:
    out = list(prefix)
    for step in steps:
        if not step:
            continue
        if out and out[-1].name != "TICK":
            out.append(Instruction("TICK"))
        out.extend(step)
    _check_timesteps(out)
    return Circuit(tuple(out), dict(metadata))


def magic_sequence(theta: float, phi: float, magic_type: str | None = None) -> list[Instruction]:
    """Gate list taking ``|0>`` to ``cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>``.

    The full form is ``Z(phi) SQRT_X Z(pi - theta) SQRT_X``. Equatorial
    targets (theta = pi/2) need only ``Z(phi + pi/2) SQRT_X``. ``magic_type``
    forces one of the two forms: H_TYPE (one noisy SQRT_X) or T_TYPE (two).
    Qubit ids are left as 0; callers remap.
    """
    if magic_type is None:
        magic_type = "H_TYPE" if math.isclose(theta, math.pi / 2, abs_tol=1e-12) else "T_TYPE"
    if magic_type == "H_TYPE":
        if not math.isclose(theta, math.pi / 2, abs_tol=1e-12):
            raise ValueError("the one-gate sequence only reaches equatorial states (theta = pi/2)")
        return [Instruction("SQRT_X", (0,)), Instruction("Z_ROT", (0,), angle=_wrap(phi + math.pi / 2))]
    if magic_type == "T_TYPE":
        return [
            Instruction("SQRT_X", (0,)),
            Instruction("Z_ROT", (0,), angle=_wrap(math.pi - theta)),
            Instruction("SQRT_X", (0,)),
            Instruction("Z_ROT", (0,), angle=_wrap(phi)),
        ]
    raise ValueError(f"unknown magic type {magic_type!r}")


def _wrap(angle: float) -> float:
    a = math.fmod(angle, 2 * math.pi)
    if a < 0:
        a += 2 * math.pi
    return 0.0 if math.isclose(a, 2 * math.pi, abs_tol=1e-12) else a


def _round_steps(layout: SurfaceCodeLayout, gate_set: str, rnd: int) -> list[list[Instruction]]:
    """Timesteps of one extraction round, starting after ancilla reset."""
    xs = [s for s in layout.stabilizers if s.kind == "X"]
    zs = [s for s in layout.stabilizers if s.kind == "Z"]
    steps: list[list[Instruction]] = []
    if gate_set == "CNOT":
        steps.append([Instruction("H", (s.ancilla,)) for s in xs])
        for xc, zc in SCHEDULE:
            layer = [Instruction("CNOT", (s.ancilla, s.corners[xc])) for s in xs if xc in s.corners]
            layer += [Instruction("CNOT", (s.corners[zc], s.ancilla)) for s in zs if zc in s.corners]
            steps.append(layer)
        steps.append([Instruction("H", (s.ancilla,)) for s in xs])
    elif gate_set == "CZ":
        # CNOT(c, t) = H_t CZ H_t; Z-ancilla sandwiches collapse to one H pair
        steps.append([Instruction("H", (s.ancilla,)) for s in xs + zs])
        for xc, zc in SCHEDULE:
            targets = [s.corners[xc] for s in xs if xc in s.corners]
            steps.append([Instruction("H", (q,)) for q in targets])
            layer = [Instruction("CZ", (s.ancilla, s.corners[xc])) for s in xs if xc in s.corners]
            layer += [Instruction("CZ", (s.corners[zc], s.ancilla)) for s in zs if zc in s.corners]
            steps.append(layer)
            steps.append([Instruction("H", (q,)) for q in targets])
        steps.append([Instruction("H", (s.ancilla,)) for s in xs + zs])
    else:
        raise ValueError(f"unknown gate set {gate_set!r}")
    index = {s.ancilla: i for i, s in enumerate(layout.stabilizers)}
    steps.append(
        [Instruction("MEASURE", (s.ancilla,), basis="Z", tag=("stab", index[s.ancilla], rnd)) for s in layout.stabilizers]
    )
    return _compact(steps)


def _compact(steps: list[list[Instruction]]) -> list[list[Instruction]]:
    """Fold consecutive 1q-gate steps acting on disjoint qubits into one step."""
    out: list[list[Instruction]] = []
    for step in steps:
        if not step:
            continue
        if out and all(i.name in GATE1 for i in step) and all(i.name in GATE1 for i in out[-1]):
            used = {q for i in out[-1] for q in i.qubits}
            if not used & {q for i in step for q in i.qubits}:
                out[-1] = out[-1] + step
                continue
        out.append(step)
    return out


def cancel_hadamard_pairs(circuit: Circuit) -> Circuit:
    """Remove H·H pairs that are adjacent on their qubit, then drop empty steps."""
    ins = list(circuit.instructions)
    last: dict[int, int] = {}
    dead: set[int] = set()
    for i, op in enumerate(ins):
        for q in op.qubits:
            j = last.get(q)
            if op.name == "H" and j is not None and ins[j].name == "H" and j not in dead:
                dead.update((i, j))
                last.pop(q)
            else:
                last[q] = i
    steps = [[]]
    for i, op in enumerate(ins):
        if op.name == "TICK":
            steps.append([])
        elif i not in dead:
            steps[-1].append(op)
    return _make(_compact(steps), circuit.metadata)


def build_prep_circuit(
    layout: SurfaceCodeLayout,
    theta: float,
    phi: float,
    gate_set: str = "CNOT",
    magic_type: str | None = None,
) -> Circuit:
    """Reset everything, prepare the product state, run one extraction round."""
    if gate_set not in GATE_SETS:
        raise ValueError(f"unknown gate set {gate_set!r}; expected one of {GATE_SETS}")
    center = layout.center
    plus = sorted(layout.region_members(Region.I, Region.III))
    seq = [replace(i, qubits=(center,)) for i in magic_sequence(theta, phi, magic_type)]
    mtype = "H_TYPE" if len(seq) == 2 else "T_TYPE"

    steps: list[list[Instruction]] = [[Instruction("RESET", (q.id,)) for q in layout.qubits]]
    steps.append([Instruction("H", (q,)) for q in plus] + [seq[0]])
    steps.extend([g] for g in seq[1:])
    steps.extend(_round_steps(layout, gate_set, 1))
    meta = {
        "distance": str(layout.distance),
        "gate_set": gate_set,
        "rounds": "1",
        "magic_type": mtype,
        "theta": repr(float(theta)),
        "phi": repr(float(phi)),
        "schedule": SCHEDULE_NAME,
    }
    circuit = _make(steps, meta)
    if gate_set == "CZ":
        circuit = cancel_hadamard_pairs(circuit)
    return circuit


def append_syndrome_rounds(circuit: Circuit, layout: SurfaceCodeLayout, k: int) -> Circuit:
    """Append ``k`` further extraction rounds (ancilla reset, gates, measure)."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return circuit
    _check_match(circuit, layout)
    if "final_basis" in circuit.metadata:
        raise ValueError("cannot add rounds after the logical measurement")
    gate_set = circuit.metadata["gate_set"]
    r0 = circuit.rounds
    steps: list[list[Instruction]] = []
    for r in range(r0 + 1, r0 + k + 1):
        steps.append([Instruction("RESET", (s.ancilla,)) for s in layout.stabilizers])
        steps.extend(_round_steps(layout, gate_set, r))
    meta = dict(circuit.metadata, rounds=str(r0 + k))
    out = _make(steps, meta, prefix=circuit.instructions)
    if gate_set == "CZ":
        out = cancel_hadamard_pairs(out)
    return out


def logical_measurement_bases(layout: SurfaceCodeLayout, basis: str, extra_qubits: bool = True) -> dict[int, str]:
    """Data qubit -> measurement basis for a logical readout."""
    if basis in ("X", "Z"):
        return {q: basis for q in layout.data_qubits}
    if basis != "Y":
        raise ValueError(f"bad logical basis {basis!r}")
    c = layout.center
    out = {}
    for q in layout.data_qubits:
        if q == c:
            out[q] = "Y"
        elif q in layout.logical_x:
            out[q] = "X"
        elif q in layout.logical_z:
            out[q] = "Z"
        elif layout.regions[q] in (Region.I, Region.III):
            out[q] = "X"
        else:
            out[q] = "Z"
    return out


def append_logical_measurement(
    circuit: Circuit,
    layout: SurfaceCodeLayout,
    basis: str,
    extra_qubits: bool = True,
    ideal: bool = False,
) -> Circuit:
    """Measure every data qubit for a logical X, Y or Z readout.

    For Y the centre goes in Y, the rest of the X column in X and the rest of
    the Z row in Z. Other data qubits are measured in the basis of their
    region (X on I/III, Z on II/IV); with ``extra_qubits=False`` those
    outcomes are kept in the record but never used by detectors.
    ``ideal=True`` makes the readout noiseless.
    """
    _check_match(circuit, layout)
    if "final_basis" in circuit.metadata:
        raise ValueError("circuit already ends in a logical measurement")
    bases = logical_measurement_bases(layout, basis, extra_qubits)
    step = [
        Instruction("MEASURE", (q,), basis=bases[q], noisy=not ideal, tag=("data", q))
        for q in layout.data_qubits
    ]
    meta = dict(circuit.metadata, final_basis=basis, extra_qubits=str(bool(extra_qubits)), ideal_readout=str(bool(ideal)))
    return _make([step], meta, prefix=circuit.instructions)


def _check_match(circuit: Circuit, layout: SurfaceCodeLayout) -> None:
    if int(circuit.metadata.get("distance", -1)) != layout.distance:
        raise ValueError("circuit and layout distances differ")


def build_memory_circuit(
    layout: SurfaceCodeLayout,
    theta: float,
    phi: float,
    rounds: int,
    basis: str,
    gate_set: str = "CNOT",
    extra_qubits: bool = True,
    ideal_readout: bool = False,
    magic_type: str | None = None,
) -> Circuit:
    """Preparation round, ``rounds - 1`` further rounds, logical readout."""
    if rounds < 1:
        raise ValueError("rounds counts the preparation round and must be >= 1")
    c = build_prep_circuit(layout, theta, phi, gate_set, magic_type)
    c = append_syndrome_rounds(c, layout, rounds - 1)
    return append_logical_measurement(c, layout, basis, extra_qubits, ideal_readout)


# ---------------------------------------------------------------- text format


def _fmt(ins: Instruction) -> str:
    if ins.name == "TICK":
        return "TICK"
    head = ins.name
    if ins.name == "Z_ROT":
        head = f"Z_ROT({ins.angle!r})"
    elif ins.name == "MEASURE":
        head = f"MEASURE_{ins.basis}"
    parts = [head, *map(str, ins.qubits)]
    if ins.tag is not None:
        parts.append("@" + ":".join(map(str, ins.tag)))
    if not ins.noisy:
        parts.append("!ideal")
    return " ".join(parts)


def format_circuit(circuit: Circuit) -> str:
    lines = [f"# {k}={v}" for k, v in circuit.metadata.items()]
    lines += [_fmt(i) for i in circuit.instructions]
    return "\n".join(lines) + "\n"


def _parse_tag(text: str) -> tuple:
    parts = text.split(":")
    return (parts[0], *map(int, parts[1:]))


def parse_circuit(text: str) -> Circuit:
    meta: dict[str, str] = {}
    ins: list[Instruction] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, val = line[1:].strip().partition("=")
            if sep:
                meta[key.strip()] = val.strip()
            continue
        tokens = line.split()
        head, rest = tokens[0], tokens[1:]
        noisy = True
        tag = None
        if rest and rest[-1] == "!ideal":
            noisy = False
            rest = rest[:-1]
        if rest and rest[-1].startswith("@"):
            tag = _parse_tag(rest[-1][1:])
            rest = rest[:-1]
        try:
            qubits = tuple(int(t) for t in rest)
            if head.startswith("Z_ROT(") and head.endswith(")"):
                ins.append(Instruction("Z_ROT", qubits, angle=float(head[6:-1]), noisy=noisy))
            elif head.startswith("MEASURE_"):
                ins.append(Instruction("MEASURE", qubits, basis=head[8:], noisy=noisy, tag=tag))
            else:
                ins.append(Instruction(head, qubits, noisy=noisy, tag=tag))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    _check_timesteps(ins)
    return Circuit(tuple(ins), meta)
