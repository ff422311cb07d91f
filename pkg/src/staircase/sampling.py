"""Seeded, counter-based samplers for the input measures.

Every sample is a pure function of (seed, purpose tag, sample index): the
Philox block counter is positioned at ``index * blocks_per_sample``, so any
sample can be regenerated without replaying the stream. Streams made from one
master seed with different purpose tags get unrelated Philox keys.
"""
from __future__ import annotations

import copy
import math
import zlib
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .fourier import MAX_EXACT_VARS, cube

HIST_CHUNK = 256
MAX_DATASET_ENTRIES = 200_000_000


@dataclass(frozen=True)
class Measure:
    tag: str = "unbiased"
    n: int = 1
    p: float = 0.5

    def __post_init__(self):
        if self.tag not in ("unbiased", "biased", "gaussian"):
            raise ValueError(f"unknown measure {self.tag!r}")
        if self.tag == "biased" and not 0.0 < self.p < 1.0:
            raise ValueError("biased measure needs p in (0, 1)")
        if self.n < 1:
            raise ValueError("n must be >= 1")

    @property
    def on_cube(self) -> bool:
        return self.tag != "gaussian"

    def blocks_per_sample(self) -> int:
        if self.tag == "unbiased":
            return math.ceil(math.ceil(self.n / 64) / 4)
        if self.tag == "biased":
            return math.ceil(self.n / 4)
        return math.ceil(2 * math.ceil(self.n / 2) / 4)

    def point_probabilities(self) -> np.ndarray:
        """Probability of each cube point in bitmask order."""
        if not self.on_cube:
            raise ValueError("the Gaussian measure has no cube support")
        if self.tag == "unbiased":
            return np.full(1 << self.n, 1.0 / (1 << self.n))
        x = cube(self.n)
        return np.prod(np.where(x > 0, self.p, 1.0 - self.p), axis=1)


def derive_key(seed: int, tag: str) -> np.ndarray:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(zlib.crc32(tag.encode()),))
    return ss.generate_state(2, dtype=np.uint64)


def sample_points(measure: Measure, seed: int, tag: str, start: int, count: int) -> np.ndarray:
    """Points ``start .. start + count - 1`` of the (seed, tag) sequence."""
    bps = measure.blocks_per_sample()
    bg = np.random.Philox(key=derive_key(seed, tag), counter=[start * bps, 0, 0, 0])
    raw = bg.random_raw(count * bps * 4).reshape(count, bps * 4)
    n = measure.n
    if measure.tag == "unbiased":
        words = math.ceil(n / 64)
        bits = np.unpackbits(
            np.ascontiguousarray(raw[:, :words]).view(np.uint8), axis=1, bitorder="little"
        )[:, :n]
        return 1.0 - 2.0 * bits
    u = (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53
    if measure.tag == "biased":
        return np.where(u[:, :n] < measure.p, 1.0, -1.0)
    u = u + 2.0**-54
    half = u.shape[1] // 2
    r = np.sqrt(-2.0 * np.log(u[:, :half]))
    theta = 2.0 * np.pi * u[:, half : 2 * half]
    z = np.concatenate([r * np.cos(theta), r * np.sin(theta)], axis=1)
    return z[:, :n]


@dataclass
class LabeledStream:
    """Noiseless labeled examples (x, target(x)).

    Fresh regime (``data is None``): the counter is the index of the next
    sample and only moves forward. Cyclic regime: a fixed dataset of m rows
    walked in order, wrapping around; the counter is the position.
    """

    measure: Measure
    target: Callable[[np.ndarray], np.ndarray]
    seed: int
    tag: str = "train"
    counter: int = 0
    hist_counter: int = 0
    data: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)
    _chunk: tuple | None = field(default=None, repr=False, compare=False)

    def clone(self) -> "LabeledStream":
        return copy.copy(self)

    def sample_at(self, start: int, count: int) -> tuple[np.ndarray, np.ndarray]:
        x = sample_points(self.measure, self.seed, self.tag, start, count)
        return x, np.asarray(self.target(x), dtype=float)

    def draw(self, count: int) -> tuple[np.ndarray, np.ndarray]:
        if count < 1:
            raise ValueError("count must be >= 1")
        if self.data is None:
            out = self.sample_at(self.counter, count)
            self.counter += count
            return out
        X, y = self.data
        rows = (self.counter + np.arange(count)) % X.shape[0]
        self.counter = int((self.counter + count) % X.shape[0])
        return X[rows], y[rows]

    def cube_labels(self) -> np.ndarray:
        if not self.measure.on_cube or self.measure.n > MAX_EXACT_VARS:
            raise ValueError("cube enumeration unavailable for this measure")
        return np.asarray(self.target(cube(self.measure.n)), dtype=float)

    def draw_histograms(self, batches: int, B: int, probs: np.ndarray | None = None) -> np.ndarray:
        """Multinomial counts of ``batches`` i.i.d. minibatches of size B.

        A minibatch average of any per-sample quantity depends on the batch only
        through these counts, so this is an exact stand-in for drawing the
        points themselves. ``probs`` defaults to the measure's mass on each
        cube point; callers may pass the mass of coarser cells (groups of
        points on which their per-sample quantity is constant). Batch ``t`` is
        a pure function of (seed, tag, t, probs).
        """
        if self.data is not None:
            raise ValueError("histogram batches need the fresh-sample regime")
        if probs is None:
            probs = self.measure.point_probabilities()
        probs = np.asarray(probs, dtype=float)
        ident = (B, probs.size, hash(probs.tobytes()))
        key = derive_key(self.seed, self.tag + "/hist")
        first, last = self.hist_counter, self.hist_counter + batches
        out = np.empty((batches, probs.size), dtype=np.int64)
        filled = 0
        for chunk in range(first // HIST_CHUNK, (last - 1) // HIST_CHUNK + 1):
            if self._chunk is not None and self._chunk[:2] == (chunk, ident):
                block = self._chunk[2]
            else:
                rng = np.random.Generator(np.random.Philox(key=key, counter=[0, chunk, 0, 0]))
                block = rng.multinomial(B, probs, size=HIST_CHUNK)
                self._chunk = (chunk, ident, block)
            lo = max(first, chunk * HIST_CHUNK) - chunk * HIST_CHUNK
            hi = min(last, (chunk + 1) * HIST_CHUNK) - chunk * HIST_CHUNK
            out[filled : filled + hi - lo] = block[lo:hi]
            filled += hi - lo
        return out

    def advance_histograms(self, used: int) -> None:
        self.hist_counter += used


def make_stream(measure: Measure, target, seed: int, tag: str = "train") -> LabeledStream:
    return LabeledStream(measure, target, seed, tag)


def make_cyclic_dataset(
    measure: Measure, target, m: int, seed: int, tag: str = "train", max_entries: int = MAX_DATASET_ENTRIES
) -> LabeledStream:
    if m < 1:
        raise ValueError("m must be >= 1")
    if m * measure.n > max_entries:
        raise MemoryError(f"dataset of {m} x {measure.n} exceeds the cap of {max_entries} entries")
    x = sample_points(measure, seed, tag, 0, m)
    y = np.asarray(target(x), dtype=float)
    return LabeledStream(measure, target, seed, tag, data=(x, y))


def draw(stream: LabeledStream, count: int) -> tuple[np.ndarray, np.ndarray]:
    return stream.draw(count)
