"""Shot sampling over a reference run, and the record file format.

A record file starts with one JSON header line, followed by one line per shot
holding that shot's measurement bits as a ``0``/``1`` string in ordinal order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from ..noise import NoisyCircuit
from .frame import DEFAULT_BATCH, sample_flip_batches
from .tableau import ReferenceRun


@dataclass(frozen=True)
class ShotRecord:
    bits: np.ndarray  # (n_meas,) uint8
    shot_id: int
    seed: int
    metadata: dict = field(default_factory=dict)

    def to_line(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)


def sample_batches(
    noisy: NoisyCircuit,
    reference: ReferenceRun,
    n_shots: int,
    seed: int,
    batch_size: int = DEFAULT_BATCH,
    batches: Sequence[int] | None = None,
) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(first shot id, bits (n, n_meas) uint8)`` blocks.

    Bits are the reference bits XOR the sampled frame flips. Batch ``b`` only
    depends on ``(seed, b)``, so disjoint batch lists can run in separate
    workers and still reproduce a single-worker run.
    """
    if len(reference.bits) != noisy.base.num_measurements:
        raise ValueError("reference run does not match the circuit")
    ref = reference.bits.astype(np.uint8)
    for start, flips in sample_flip_batches(noisy, n_shots, seed, batch_size, batches):
        yield start, flips ^ ref


def sample_shots(
    noisy: NoisyCircuit,
    reference: ReferenceRun,
    n_shots: int,
    seed: int,
    batch_size: int = DEFAULT_BATCH,
) -> Iterator[ShotRecord]:
    """Stream of per-shot records; see :func:`sample_batches`."""
    for start, block in sample_batches(noisy, reference, n_shots, seed, batch_size):
        for k, row in enumerate(block):
            yield ShotRecord(row, start + k, seed)


def write_records(path: str | Path, header: dict, blocks: Iterable[np.ndarray]) -> int:
    """Write a record file; returns the number of shots written."""
    n = 0
    with open(path, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for block in blocks:
            block = np.asarray(block, np.uint8)
            if block.size == 0:
                continue
            chars = np.ascontiguousarray(block + ord("0"), dtype=np.uint8)
            lines = chars.view(f"S{block.shape[1]}").ravel()
            fh.write("\n".join(s.decode() for s in lines) + "\n")
            n += len(block)
    return n


def read_records(path: str | Path) -> tuple[dict, np.ndarray]:
    """Return ``(header, bits (n_shots, n_meas) uint8)``."""
    with open(path) as fh:
        first = fh.readline()
        if not first:
            raise ValueError(f"{path}: empty record file")
        header = json.loads(first)
        rows = [line.strip() for line in fh if line.strip()]
    width = int(header.get("num_measurements", len(rows[0]) if rows else 0))
    if not rows:
        return header, np.zeros((0, width), np.uint8)
    if any(len(r) != width for r in rows):
        raise ValueError(f"{path}: shot lines must all have {width} bits")
    raw = np.frombuffer("".join(rows).encode(), np.uint8).reshape(len(rows), width)
    bits = raw - ord("0")
    if bits.max() > 1:
        raise ValueError(f"{path}: shot lines may only contain 0 and 1")
    return header, bits
