"""Rotated surface code geometry and the five-region preparation partition.

Coordinates: data qubit ``(row, col)`` with ``0 <= row, col < d``. Ancillas
are indexed by plaquette corner ``(i, j)`` with ``0 <= i, j <= d``; the
ancilla sits at ``(i - 1/2, j - 1/2)`` and touches the data qubits
``NW=(i-1, j-1)``, ``NE=(i-1, j)``, ``SW=(i, j-1)``, ``SE=(i, j)`` that exist.

Weight-2 X stabilizers sit on the top and bottom boundaries, weight-2 Z
stabilizers on the left and right boundaries. With this orientation the
logical X operator is the centre column and the logical Z operator is the
centre row.

Regions (``c = (d - 1) // 2``)::

    I    top triangle     {(r, col): r < c, r <= col <= d - 2 - r}
    II   I rotated 90 degrees clockwise    (right)
    III  I rotated 180 degrees             (bottom)
    IV   I rotated 270 degrees             (left)

I and III hold ``|+>`` qubits, II and IV hold ``|0>`` qubits. Region I
contains the upper arm of the logical X column; region II the right arm of
the logical Z row.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping

CORNERS = ("NW", "NE", "SW", "SE")


class Region(str, enum.Enum):
    CENTER = "CENTER"
    I = "I"
    II = "II"
    III = "III"
    IV = "IV"


class PrepKind(str, enum.Enum):
    ZERO = "ZERO"
    PLUS = "PLUS"
    MAGIC = "MAGIC"


@dataclass(frozen=True)
class Coord:
    row: int
    col: int


@dataclass(frozen=True)
class Qubit:
    id: int
    role: str  # "data", "X" or "Z"
    coord: Coord


@dataclass(frozen=True)
class StabilizerSpec:
    """One stabilizer generator.

    ``corners`` maps the corner names present in ``CORNERS`` to data ids; its
    values are the support.
    """

    kind: str
    ancilla: int
    label: int
    plaquette: Coord
    corners: Mapping[str, int]

    @property
    def support(self) -> frozenset[int]:
        return frozenset(self.corners.values())

    @property
    def name(self) -> str:
        return f"{self.kind}{self.label}"


@dataclass(frozen=True)
class Prep:
    kind: PrepKind
    theta: float = 0.0
    phi: float = 0.0


@dataclass(frozen=True)
class SurfaceCodeLayout:
    distance: int
    qubits: tuple[Qubit, ...]
    stabilizers: tuple[StabilizerSpec, ...]
    regions: Mapping[int, Region]
    logical_x: frozenset[int]
    logical_z: frozenset[int]
    deterministic_stabilizers: frozenset[int]
    _by_name: Mapping[str, int] = field(repr=False, compare=False, default_factory=dict)

    @property
    def num_qubits(self) -> int:
        return len(self.qubits)

    @property
    def data_qubits(self) -> tuple[int, ...]:
        return tuple(q.id for q in self.qubits if q.role == "data")

    @property
    def center(self) -> int:
        c = self.distance // 2
        return c * self.distance + c

    def data_id(self, row: int, col: int) -> int:
        return row * self.distance + col

    def stabilizer(self, name: str) -> StabilizerSpec:
        return self.stabilizers[self._by_name[name]]

    def stabilizers_of_kind(self, kind: str) -> list[int]:
        return [i for i, s in enumerate(self.stabilizers) if s.kind == kind]

    def deterministic_names(self) -> set[str]:
        return {self.stabilizers[i].name for i in self.deterministic_stabilizers}

    def region_members(self, *regions: Region) -> set[int]:
        wanted = set(regions)
        return {q for q, r in self.regions.items() if r in wanted}


def _region_of(row: int, col: int, d: int) -> Region:
    c = (d - 1) // 2
    if row == c and col == c:
        return Region.CENTER

    def in_top_triangle(r: int, k: int) -> bool:
        return r < c and r <= k <= d - 2 - r

    if in_top_triangle(row, col):
        return Region.I
    # inverse rotations: a point p is in rot90(I) iff rot90^-1(p) is in I
    if in_top_triangle(d - 1 - col, row):
        return Region.II
    if in_top_triangle(d - 1 - row, d - 1 - col):
        return Region.III
    if in_top_triangle(col, d - 1 - row):
        return Region.IV
    raise AssertionError(f"unassigned data qubit ({row}, {col}) at d={d}")


def build_layout(distance: int) -> SurfaceCodeLayout:
    """Build the distance-``distance`` rotated code with its region partition."""
    if not isinstance(distance, int) or isinstance(distance, bool):
        raise TypeError("distance must be an int")
    if distance < 3 or distance % 2 == 0:
        raise ValueError(f"distance must be odd and >= 3, got {distance}")
    d = distance

    qubits: list[Qubit] = [Qubit(r * d + k, "data", Coord(r, k)) for r in range(d) for k in range(d)]

    plaquettes: dict[str, list[tuple[int, int]]] = {"X": [], "Z": []}
    for i in range(d + 1):
        for j in range(d + 1):
            kind = "X" if (i + j) % 2 else "Z"
            bulk = 1 <= i <= d - 1 and 1 <= j <= d - 1
            top_bottom = (i == 0 or i == d) and 1 <= j <= d - 1
            left_right = (j == 0 or j == d) and 1 <= i <= d - 1
            if bulk or (kind == "X" and top_bottom) or (kind == "Z" and left_right):
                plaquettes[kind].append((i, j))

    stabilizers: list[StabilizerSpec] = []
    next_id = d * d
    for kind in ("Z", "X"):
        for label, (i, j) in enumerate(plaquettes[kind], start=1):
            corners = {}
            for name, (r, k) in zip(CORNERS, ((i - 1, j - 1), (i - 1, j), (i, j - 1), (i, j))):
                if 0 <= r < d and 0 <= k < d:
                    corners[name] = r * d + k
            qubits.append(Qubit(next_id, kind, Coord(i, j)))
            stabilizers.append(StabilizerSpec(kind, next_id, label, Coord(i, j), corners))
            next_id += 1

    regions = {r * d + k: _region_of(r, k, d) for r in range(d) for k in range(d)}
    c = (d - 1) // 2
    logical_x = frozenset(r * d + c for r in range(d))
    logical_z = frozenset(c * d + k for k in range(d))

    plus = {q for q, reg in regions.items() if reg in (Region.I, Region.III)}
    zero = {q for q, reg in regions.items() if reg in (Region.II, Region.IV)}
    deterministic = frozenset(
        idx
        for idx, s in enumerate(stabilizers)
        if (s.kind == "X" and s.support <= plus) or (s.kind == "Z" and s.support <= zero)
    )
    by_name = {s.name: idx for idx, s in enumerate(stabilizers)}
    return SurfaceCodeLayout(
        distance=d,
        qubits=tuple(qubits),
        stabilizers=tuple(stabilizers),
        regions=regions,
        logical_x=logical_x,
        logical_z=logical_z,
        deterministic_stabilizers=deterministic,
        _by_name=by_name,
    )


def initial_product_state(layout: SurfaceCodeLayout, theta: float, phi: float) -> dict[int, Prep]:
    """Per-data-qubit preparation: magic at the centre, ``|+>`` on I/III, ``|0>`` on II/IV."""
    out = {}
    for q, reg in layout.regions.items():
        if reg is Region.CENTER:
            out[q] = Prep(PrepKind.MAGIC, float(theta), float(phi))
        elif reg in (Region.I, Region.III):
            out[q] = Prep(PrepKind.PLUS)
        else:
            out[q] = Prep(PrepKind.ZERO)
    return out


def bloch_vector(theta: float, phi: float) -> tuple[float, float, float]:
    return (math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta))


def export_layout(layout: SurfaceCodeLayout) -> str:
    """Plain-text dump of qubits, stabilizers and regions (used by golden tests)."""
    d = layout.distance
    lines = [
        f"# distance={d}",
        "# regions: I=top triangle (|+>), II=right (|0>), III=bottom (|+>), IV=left (|0>)",
        "# logical_x=centre column (X basis), logical_z=centre row (Z basis)",
        "[qubits]",
    ]
    for q in layout.qubits:
        extra = f" region={layout.regions[q.id].value}" if q.role == "data" else ""
        lines.append(f"{q.id} {q.role} {q.coord.row} {q.coord.col}{extra}")
    lines.append("[stabilizers]")
    for idx, s in enumerate(layout.stabilizers):
        det = " deterministic" if idx in layout.deterministic_stabilizers else ""
        corners = " ".join(f"{k}={v}" for k, v in s.corners.items())
        lines.append(f"{s.name} ancilla={s.ancilla} {corners}{det}")
    lines.append("[grid]")
    for r in range(d):
        lines.append(" ".join(layout.regions[r * d + k].value.rjust(6) for k in range(d)))
    lines.append(f"logical_x {' '.join(map(str, sorted(layout.logical_x)))}")
    lines.append(f"logical_z {' '.join(map(str, sorted(layout.logical_z)))}")
    return "\n".join(lines) + "\n"
