"""Per-phase batch timing model and online measurement.

A training batch decomposes into four phases: forward through the feature
block (ff), forward through the classifier (fc), backward through the
classifier (bc) and backward through the feature block (bf). The backward
feature phase dominates, which is what makes freezing the feature block
worthwhile for slow clients.

A client's ground-truth timings are the base profile divided by its speed
factor. Online measurement averages per-batch samples perturbed by
multiplicative Gaussian noise; with zero noise the measurement reproduces the
ground truth exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Fractions of a nominal 1-second batch on a full-speed client.
DEFAULT_BASE_TIMINGS: "PhaseTimings"

_NOISE_FLOOR = 1e-9


@dataclass(frozen=True)
class PhaseTimings:
    """Seconds per batch spent in each of the four phases."""

    ff: float
    fc: float
    bc: float
    bf: float

    def __post_init__(self) -> None:
        for name in ("ff", "fc", "bc", "bf"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ValueError(f"phase time {name} must be positive, got {v}")

    @property
    def frozen_time(self) -> float:
        """Per-batch cost when the feature block is frozen (no bf phase)."""
        return self.ff + self.fc + self.bc

    @property
    def full_time(self) -> float:
        return self.ff + self.fc + self.bc + self.bf


DEFAULT_BASE_TIMINGS = PhaseTimings(ff=0.15, fc=0.05, bc=0.15, bf=0.65)


@dataclass(frozen=True)
class ClientProfile:
    """What the federator knows about a client when it schedules."""

    client_id: int
    timings: PhaseTimings
    remaining_updates: int

    def estimated_remaining_time(self) -> float:
        return self.remaining_updates * self.timings.full_time


def scale_timings(base: PhaseTimings, speed_factor: float) -> PhaseTimings:
    """Ground-truth timings of a client running at the given speed factor.

    A factor of 1.0 is the reference machine; 0.5 means every phase takes
    twice as long. Phase proportions are preserved.
    """
    if speed_factor <= 0:
        raise ValueError(f"speed_factor must be positive, got {speed_factor}")
    return PhaseTimings(
        ff=base.ff / speed_factor,
        fc=base.fc / speed_factor,
        bc=base.bc / speed_factor,
        bf=base.bf / speed_factor,
    )


def measure(
    client_id: int,
    true_timings: PhaseTimings,
    total_updates: int,
    profile_batches: int,
    noise_sigma: float,
    rng: int | np.random.Generator,
    batches_awaiting_schedule: int = 0,
) -> ClientProfile:
    """Profile a client over its first `profile_batches` updates.

    Each profiled batch yields one noisy sample per phase (multiplicative
    Gaussian noise, clamped positive); the reported value is the per-phase
    mean. remaining_updates subtracts both the profiled batches and any
    batches the client executed while the schedule was being computed.
    """
    if total_updates < 1:
        raise ValueError(f"total_updates must be >= 1, got {total_updates}")
    if not 1 <= profile_batches <= total_updates:
        raise ValueError(
            f"profile_batches must be in [1, {total_updates}], got {profile_batches}"
        )
    if noise_sigma < 0:
        raise ValueError(f"noise_sigma must be >= 0, got {noise_sigma}")
    if batches_awaiting_schedule < 0:
        raise ValueError(
            f"batches_awaiting_schedule must be >= 0, got {batches_awaiting_schedule}"
        )
    remaining = total_updates - profile_batches - batches_awaiting_schedule
    if remaining < 0:
        raise ValueError(
            f"client {client_id} executed more batches than its budget of "
            f"{total_updates}"
        )
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    factors = np.maximum(
        gen.normal(1.0, noise_sigma, size=(profile_batches, 4)), _NOISE_FLOOR
    )
    means = factors.mean(axis=0)
    measured = PhaseTimings(
        ff=true_timings.ff * means[0],
        fc=true_timings.fc * means[1],
        bc=true_timings.bc * means[2],
        bf=true_timings.bf * means[3],
    )
    return ClientProfile(
        client_id=client_id, timings=measured, remaining_updates=remaining
    )
