"""Pauli-frame propagation, bit-packed across shots.

Bit ``s % 64`` of word ``s // 64`` in row ``q`` of ``x``/``z`` holds the X/Z
component of the frame on qubit ``q`` in shot ``s``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

import numpy as np

from ..circuit import _cardinal
from ..noise import Channel, NoisyCircuit

WORD = 64
DEFAULT_BATCH = 1 << 16


def n_words(n_shots: int) -> int:
    return (n_shots + WORD - 1) // WORD


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """(n_rows, n_shots) 0/1 -> (n_rows, n_words) uint64."""
    bits = np.asarray(bits, dtype=np.uint8)
    rows, n = bits.shape
    pad = n_words(n) * WORD - n
    if pad:
        bits = np.concatenate([bits, np.zeros((rows, pad), np.uint8)], axis=1)
    return np.packbits(bits, axis=1, bitorder="little").view(np.uint64)


def unpack_bits(words: np.ndarray, n_shots: int) -> np.ndarray:
    """(n_rows, n_words) uint64 -> (n_rows, n_shots) uint8."""
    words = np.ascontiguousarray(words, dtype=np.uint64)
    return np.unpackbits(words.view(np.uint8), axis=1, bitorder="little")[:, :n_shots]


def _pauli_bits(term: str) -> list[tuple[int, int]]:
    return [(int(c in "XY"), int(c in "ZY")) for c in term]


class _Frames:
    def __init__(self, n_qubits: int, n_shots: int, rng: np.random.Generator | None):
        self.n = n_shots
        self.w = n_words(n_shots)
        self.x = np.zeros((n_qubits, self.w), np.uint64)
        self.z = np.zeros((n_qubits, self.w), np.uint64)
        self.rng = rng

    def _random_word_row(self) -> np.ndarray:
        return self.rng.integers(0, np.iinfo(np.uint64).max, size=self.w, dtype=np.uint64, endpoint=True)

    def apply(self, ins) -> np.ndarray | None:
        x, z = self.x, self.z
        name = ins.name
        qs = ins.qubits
        if name == "TICK":
            return None
        if name == "H":
            q = qs[0]
            x[q], z[q] = z[q].copy(), x[q].copy()
        elif name in ("S", "S_DAG"):
            z[qs[0]] ^= x[qs[0]]
        elif name == "SQRT_X":
            x[qs[0]] ^= z[qs[0]]
        elif name == "Z_ROT":
            k = _cardinal(ins.angle)
            if k is None:
                # a non-Clifford rotation is harmless only to an empty frame
                if x[qs[0]].any() or z[qs[0]].any():
                    raise ValueError(f"Z_ROT({ins.angle}) is not Clifford; frames need cardinal angles")
            elif k % 2:
                z[qs[0]] ^= x[qs[0]]
        elif name in ("X", "Y", "Z"):
            pass
        elif name == "CNOT":
            c, t = qs
            x[t] ^= x[c]
            z[c] ^= z[t]
        elif name == "CZ":
            a, b = qs
            z[a] ^= x[b]
            z[b] ^= x[a]
        elif name == "RESET":
            q = qs[0]
            x[q] = 0
            z[q] = self._random_word_row() if self.rng is not None else 0
        elif name == "PREP_PLUS":
            q = qs[0]
            z[q] = 0
            x[q] = self._random_word_row() if self.rng is not None else 0
        elif name == "MEASURE":
            q = qs[0]
            if ins.basis == "Z":
                flip = x[q].copy()
            elif ins.basis == "X":
                flip = z[q].copy()
            else:
                flip = x[q] ^ z[q]
            if self.rng is not None:
                r = self._random_word_row()
                if ins.basis == "Z":
                    z[q] ^= r
                elif ins.basis == "X":
                    x[q] ^= r
                else:
                    x[q] ^= r
                    z[q] ^= r
            return flip
        else:
            raise ValueError(f"frame simulator cannot apply {name}")
        return None

    def xor_pauli(self, qubits: Sequence[int], term: str, shots: np.ndarray) -> None:
        if len(shots) == 0:
            return
        words = shots >> 6
        bits = np.left_shift(np.uint64(1), (shots & 63).astype(np.uint64))
        for q, (bx, bz) in zip(qubits, _pauli_bits(term)):
            if bx:
                np.bitwise_xor.at(self.x[q], words, bits)
            if bz:
                np.bitwise_xor.at(self.z[q], words, bits)

    def sample_channel(self, ch: Channel) -> None:
        p = ch.p
        if p <= 0.0:
            return
        k = int(self.rng.binomial(self.n, p))
        if k == 0:
            return
        shots = np.sort(self.rng.choice(self.n, size=k, replace=False)).astype(np.int64)
        which = self.rng.integers(0, len(ch.terms), size=k)
        for t, term in enumerate(ch.terms):
            self.xor_pauli(ch.qubits, term, shots[which == t])


@dataclass
class FrameResult:
    flips: np.ndarray  # (n_meas, n_words) uint64
    x: np.ndarray  # final frames
    z: np.ndarray
    n_shots: int

    def flip_bits(self) -> np.ndarray:
        """(n_shots, n_meas) uint8."""
        return unpack_bits(self.flips, self.n_shots).T.copy()


def propagate(
    noisy: NoisyCircuit,
    n_shots: int,
    rng: np.random.Generator | None = None,
    injections: Mapping[int, Sequence[tuple[Channel, str, np.ndarray]]] | None = None,
    sample: bool = True,
) -> FrameResult:
    """Run frames through the circuit.

    With ``rng`` set, reset/measurement randomisation is on and (if
    ``sample``) every channel is sampled. ``injections`` maps a channel site
    to ``(channel, term, shots)`` triples applied deterministically, which is
    how single faults are pushed through the circuit.
    """
    circuit = noisy.base
    frames = _Frames(circuit.num_qubits, n_shots, rng)
    by_site = noisy.by_site()
    injections = injections or {}
    flips = np.zeros((circuit.num_measurements, frames.w), np.uint64)
    m = 0
    for i, ins in enumerate(circuit.instructions):
        chans = by_site.get(i, ())
        inj = injections.get(i, ())
        for ch in chans:
            if ch.before and sample and rng is not None:
                frames.sample_channel(ch)
        for ch, term, shots in inj:
            if ch.before:
                frames.xor_pauli(ch.qubits, term, shots)
        out = frames.apply(ins)
        if out is not None:
            flips[m] = out
            m += 1
        for ch in chans:
            if not ch.before and sample and rng is not None:
                frames.sample_channel(ch)
        for ch, term, shots in inj:
            if not ch.before:
                frames.xor_pauli(ch.qubits, term, shots)
    return FrameResult(flips, frames.x, frames.z, n_shots)


def batch_rng(seed: int, batch: int) -> np.random.Generator:
    """Counter-based stream for batch ``batch`` of a run seeded with ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(batch),))
    return np.random.Generator(np.random.Philox(ss))


def batch_ranges(n_shots: int, batch_size: int = DEFAULT_BATCH) -> list[tuple[int, int, int]]:
    """``(batch id, first shot, count)`` covering ``n_shots``."""
    out = []
    b = 0
    start = 0
    while start < n_shots:
        cnt = min(batch_size, n_shots - start)
        out.append((b, start, cnt))
        b += 1
        start += cnt
    return out


def sample_flip_batches(
    noisy: NoisyCircuit,
    n_shots: int,
    seed: int,
    batch_size: int = DEFAULT_BATCH,
    batches: Sequence[int] | None = None,
) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(first shot id, flips (n, n_meas) uint8)`` per batch."""
    if not noisy.base.is_clifford():
        raise ValueError("sampling needs a Clifford circuit (cardinal magic angles)")
    for b, start, cnt in batch_ranges(n_shots, batch_size):
        if batches is not None and b not in batches:
            continue
        res = propagate(noisy, cnt, batch_rng(seed, b))
        yield start, res.flip_bits()


@dataclass
class FaultSignatures:
    """Per-fault measurement flips and final frames, one row per fault."""

    faults: list[tuple[Channel, str]]
    flips: np.ndarray  # (n_faults, n_meas) uint8
    x: np.ndarray  # (n_faults, n_qubits) uint8
    z: np.ndarray


def single_fault_signatures(
    noisy: NoisyCircuit, faults: Sequence[tuple[Channel, str]], chunk: int = 1 << 14
) -> FaultSignatures:
    """Propagate each ``(channel, term)`` alone, one fault per shot."""
    flips, xs, zs = [], [], []
    for lo in range(0, len(faults), chunk):
        part = faults[lo : lo + chunk]
        inj: dict[int, list] = {}
        for k, (ch, term) in enumerate(part):
            inj.setdefault(ch.site, []).append((ch, term, np.array([k], np.int64)))
        res = propagate(noisy, len(part), rng=None, injections=inj, sample=False)
        flips.append(unpack_bits(res.flips, len(part)).T)
        xs.append(unpack_bits(res.x, len(part)).T)
        zs.append(unpack_bits(res.z, len(part)).T)
    n_meas = noisy.base.num_measurements
    n_q = noisy.base.num_qubits
    cat = lambda parts, w: np.concatenate(parts) if parts else np.zeros((0, w), np.uint8)  # noqa: E731
    return FaultSignatures(list(faults), cat(flips, n_meas), cat(xs, n_q), cat(zs, n_q))


def all_fault_terms(noisy: NoisyCircuit, skip=None) -> list[tuple[Channel, str]]:
    """Every ``(channel, term)`` pair, minus channels where ``skip(ch)`` is true."""
    return [(ch, t) for ch in noisy.channels if not (skip and skip(ch)) for t in ch.terms]
