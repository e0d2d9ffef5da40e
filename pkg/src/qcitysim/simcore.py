"""Seedable Monte Carlo kernel: RNG streams, trial orchestration, statistics."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

DEFAULT_TRIALS = 10


@dataclass
class RngStream:
    """Uniform generator bound to one ``(seed, stream_id)`` pair.

    The underlying bit generator is PCG64 keyed through ``SeedSequence``
    with ``stream_id`` as spawn key, so deriving a stream needs no shared
    state. A stream must stay inside one execution context.
    """

    seed: int
    stream_id: int
    gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not (0 <= self.seed < 2**64 and 0 <= self.stream_id < 2**64):
            raise ValueError("seed and stream_id must be unsigned 64-bit integers")
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self.gen = np.random.Generator(np.random.PCG64(ss))

    def uniform(self, size=None):
        """Draws from the half-open interval [0, 1)."""
        return self.gen.random(size)

    def uniform_open_low(self, size=None):
        """Draws from (0, 1]; safe to pass to ``log``."""
        return 1.0 - self.gen.random(size)


def make_rng(seed: int, stream_id: int) -> RngStream:
    return RngStream(int(seed), int(stream_id))


def stream_key(*labels) -> int:
    """Stable 64-bit stream id from arbitrary labels (link name, point, ...).

    Uses blake2b over the labels' ``repr`` so ids are identical across
    platforms and Python hash seeds.
    """
    h = hashlib.blake2b(repr(labels).encode("utf-8"), digest_size=8)
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True)
class RateEstimate:
    mean: float
    std: float
    n_trials: int
    n_sent_per_trial: int

    def __post_init__(self) -> None:
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if not (0.0 <= self.mean <= 1.0) or self.std < 0.0:
            raise ValueError(f"invalid rate estimate mean={self.mean} std={self.std}")

    @property
    def sem(self) -> float:
        """Standard error of the mean across trials."""
        return self.std / math.sqrt(self.n_trials)

    @classmethod
    def from_counts(cls, counts: Sequence[tuple[int, int]]) -> "RateEstimate":
        if not counts:
            raise ValueError("at least one trial is required")
        rates = []
        for arrived, sent in counts:
            if sent <= 0:
                raise ValueError("experiment reported n_sent = 0")
            if arrived < 0 or arrived > sent:
                raise ValueError(f"n_arrived={arrived} outside [0, n_sent={sent}]")
            rates.append(arrived / sent)
        n = len(rates)
        # fsum keeps the result independent of reduction order
        mean = math.fsum(rates) / n
        std = math.sqrt(math.fsum((r - mean) ** 2 for r in rates) / (n - 1)) if n > 1 else 0.0
        return cls(mean=min(max(mean, 0.0), 1.0), std=std, n_trials=n,
                   n_sent_per_trial=int(counts[0][1]))


def run_trials(
    experiment: Callable[[RngStream], tuple],
    n_trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    key: object = 0,
) -> RateEstimate:
    """Run ``experiment`` once per trial on its own stream and aggregate.

    ``experiment`` returns ``(n_arrived, n_sent, ...)``; trailing fields are
    ignored here. Trial ``i`` uses stream ``stream_key(key, i)``.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    counts = []
    for i in range(n_trials):
        out = experiment(make_rng(seed, stream_key(key, i)))
        counts.append((int(out[0]), int(out[1])))
    return RateEstimate.from_counts(counts)
