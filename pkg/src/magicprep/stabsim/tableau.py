"""Stabilizer tableau with destabilizers and sign bits (CHP style).

Rows ``0..n-1`` are destabilizers, rows ``n..2n-1`` stabilizers. Phases are
tracked exactly, so this engine is independent of the frame simulator, which
ignores signs.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..circuit import Circuit, _cardinal


def _g(x1, z1, x2, z2):
    """Exponent of i picked up when multiplying single-qubit Paulis (vectorised)."""
    x1 = x1.astype(np.int8)
    z1 = z1.astype(np.int8)
    x2 = x2.astype(np.int8)
    z2 = z2.astype(np.int8)
    out = np.zeros(np.broadcast(x1, x2).shape, np.int8)
    y = (x1 == 1) & (z1 == 1)
    xo = (x1 == 1) & (z1 == 0)
    zo = (x1 == 0) & (z1 == 1)
    out = np.where(y, z2 - x2, out)
    out = np.where(xo, z2 * (2 * x2 - 1), out)
    out = np.where(zo, x2 * (1 - 2 * z2), out)
    return out


class Tableau:
    def __init__(self, n: int):
        self.n = n
        self.x = np.zeros((2 * n, n), bool)
        self.z = np.zeros((2 * n, n), bool)
        self.r = np.zeros(2 * n, bool)
        idx = np.arange(n)
        self.x[idx, idx] = True
        self.z[n + idx, idx] = True

    def copy(self) -> "Tableau":
        t = Tableau.__new__(Tableau)
        t.n = self.n
        t.x, t.z, t.r = self.x.copy(), self.z.copy(), self.r.copy()
        return t

    # -- gates
    def h(self, q):
        self.r ^= self.x[:, q] & self.z[:, q]
        self.x[:, q], self.z[:, q] = self.z[:, q].copy(), self.x[:, q].copy()

    def s(self, q):
        self.r ^= self.x[:, q] & self.z[:, q]
        self.z[:, q] ^= self.x[:, q]

    def s_dag(self, q):
        self.r ^= self.x[:, q] & ~self.z[:, q]
        self.z[:, q] ^= self.x[:, q]

    def sqrt_x(self, q):
        self.h(q)
        self.s(q)
        self.h(q)

    def pauli(self, q, p: str):
        if p == "X":
            self.r ^= self.z[:, q]
        elif p == "Z":
            self.r ^= self.x[:, q]
        elif p == "Y":
            self.r ^= self.x[:, q] ^ self.z[:, q]

    def cnot(self, c, t):
        self.r ^= self.x[:, c] & self.z[:, t] & ~(self.x[:, t] ^ self.z[:, c])
        self.x[:, t] ^= self.x[:, c]
        self.z[:, c] ^= self.z[:, t]

    def cz(self, a, b):
        self.h(b)
        self.cnot(a, b)
        self.h(b)

    # -- rows
    def _rowmul(self, h: np.ndarray, i: int):
        """Rows ``h`` <- rows ``h`` * row ``i``."""
        if len(h) == 0:
            return
        g = _g(self.x[i][None, :], self.z[i][None, :], self.x[h], self.z[h]).sum(axis=1, dtype=np.int64)
        tot = 2 * self.r[h].astype(np.int64) + 2 * int(self.r[i]) + g
        self.r[h] = (tot % 4) == 2
        self.x[h] ^= self.x[i]
        self.z[h] ^= self.z[i]

    def measure_z(self, q: int, forced: int | None = None, rng: np.random.Generator | None = None) -> tuple[int, bool]:
        """Return ``(outcome, deterministic)``.

        Random outcomes take ``forced`` if given, else a draw from ``rng``,
        else 0.
        """
        n = self.n
        stab = np.nonzero(self.x[n:, q])[0]
        if len(stab):
            p = n + stab[0]
            rows = np.nonzero(self.x[:, q])[0]
            rows = rows[rows != p]
            self._rowmul(rows, p)
            self.x[p - n], self.z[p - n], self.r[p - n] = self.x[p].copy(), self.z[p].copy(), self.r[p]
            self.x[p] = False
            self.z[p] = False
            self.z[p, q] = True
            if forced is not None:
                out = int(forced)
            elif rng is not None:
                out = int(rng.integers(2))
            else:
                out = 0
            self.r[p] = bool(out)
            return out, False
        sx = np.zeros(n, bool)
        sz = np.zeros(n, bool)
        phase = 0
        for i in np.nonzero(self.x[:n, q])[0]:
            row = n + i
            phase += 2 * int(self.r[row]) + int(_g(self.x[row], self.z[row], sx, sz).sum())
            sx ^= self.x[row]
            sz ^= self.z[row]
        return int((phase % 4) == 2), True

    def measure(self, q: int, basis: str, **kw) -> tuple[int, bool]:
        if basis == "Z":
            return self.measure_z(q, **kw)
        if basis == "X":
            self.h(q)
            out = self.measure_z(q, **kw)
            self.h(q)
            return out
        if basis == "Y":
            self.s_dag(q)
            self.h(q)
            out = self.measure_z(q, **kw)
            self.h(q)
            self.s(q)
            return out
        raise ValueError(basis)

    def reset(self, q: int):
        out, _ = self.measure_z(q)
        if out:
            self.pauli(q, "X")

    def expectation(self, pauli: dict[int, str]) -> int:
        """Exact ``<P>`` of a Hermitian Pauli product: +1, -1 or 0."""
        n = self.n
        px = np.zeros(n, bool)
        pz = np.zeros(n, bool)
        for q, p in pauli.items():
            px[q] = p in "XY"
            pz[q] = p in "ZY"
        stab_anti = (self.x[n:] & pz) ^ (self.z[n:] & px)
        if np.logical_xor.reduce(stab_anti, axis=1).any():
            return 0
        sx = np.zeros(n, bool)
        sz = np.zeros(n, bool)
        phase = 0
        destab_anti = np.logical_xor.reduce((self.x[:n] & pz) ^ (self.z[:n] & px), axis=1)
        for i in np.flatnonzero(destab_anti):
            row = n + i
            phase += 2 * int(self.r[row]) + int(_g(self.x[row], self.z[row], sx, sz).sum())
            sx ^= self.x[row]
            sz ^= self.z[row]
        if not (np.array_equal(sx, px) and np.array_equal(sz, pz)):
            raise RuntimeError("tableau is inconsistent: commuting Pauli is not in the stabilizer group")
        return -1 if phase % 4 == 2 else 1

    def stabilizer_rows(self) -> list[str]:
        rows = []
        for i in range(self.n, 2 * self.n):
            s = "-" if self.r[i] else "+"
            s += "".join("_XZY"[int(a) + 2 * int(b)] for a, b in zip(self.x[i], self.z[i]))
            rows.append(s)
        return rows


def apply_instruction(t: Tableau, ins) -> None:
    name, qs = ins.name, ins.qubits
    if name == "TICK":
        return
    if name == "H":
        t.h(qs[0])
    elif name == "S":
        t.s(qs[0])
    elif name == "S_DAG":
        t.s_dag(qs[0])
    elif name == "SQRT_X":
        t.sqrt_x(qs[0])
    elif name in ("X", "Y", "Z"):
        t.pauli(qs[0], name)
    elif name == "Z_ROT":
        k = _cardinal(ins.angle)
        if k is None:
            raise ValueError(f"Z_ROT({ins.angle}) is not a stabilizer operation")
        if k == 1:
            t.s(qs[0])
        elif k == 2:
            t.pauli(qs[0], "Z")
        elif k == 3:
            t.s_dag(qs[0])
    elif name == "CNOT":
        t.cnot(*qs)
    elif name == "CZ":
        t.cz(*qs)
    elif name == "RESET":
        t.reset(qs[0])
    elif name == "PREP_PLUS":
        t.reset(qs[0])
        t.h(qs[0])
    else:
        raise ValueError(f"tableau cannot apply {name}")


@dataclass
class ReferenceRun:
    tableau: Tableau
    bits: np.ndarray  # (n_meas,) uint8
    deterministic: np.ndarray  # (n_meas,) bool


def run_tableau(
    circuit: Circuit,
    faults: dict[int, list[tuple[tuple[int, ...], str, bool]]] | None = None,
    choose: Callable[[int], int] | None = None,
    rng: np.random.Generator | None = None,
) -> ReferenceRun:
    """Simulate ``circuit`` exactly.

    ``faults`` maps an instruction index to ``(qubits, pauli term, before)``
    insertions. ``choose(ordinal)`` fixes random measurement outcomes.
    """
    if not circuit.is_clifford():
        raise ValueError("reference runs need cardinal magic angles (theta, phi multiples of pi/2)")
    t = Tableau(circuit.num_qubits)
    bits = []
    det = []
    faults = faults or {}
    for i, ins in enumerate(circuit.instructions):
        for qs, term, before in faults.get(i, ()):
            if before:
                for q, p in zip(qs, term):
                    t.pauli(q, p)
        if ins.name == "MEASURE":
            ordinal = len(bits)
            forced = choose(ordinal) if choose is not None else None
            out, d = t.measure(ins.qubits[0], ins.basis, forced=forced, rng=rng)
            bits.append(out)
            det.append(d)
        else:
            apply_instruction(t, ins)
        for qs, term, before in faults.get(i, ()):
            if not before:
                for q, p in zip(qs, term):
                    t.pauli(q, p)
    return ReferenceRun(t, np.array(bits, np.uint8), np.array(det, bool))


def reference_run(circuit: Circuit, rng: np.random.Generator | None = None) -> ReferenceRun:
    """Noiseless run giving reference bits and determinism flags."""
    return run_tableau(circuit, rng=rng)
