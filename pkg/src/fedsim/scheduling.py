"""Centralized freeze-and-offload scheduling.

Given the profiles of the clients selected for a round, the federator
estimates each client's remaining completion time, splits the clients into a
sending set (slower than the mean) and a receiving set (at or below the
mean), and greedily pairs each sender with the receiver that minimizes the
estimated pair completion time, discounted by how similar the two clients'
class distributions are. Every receiver is used at most once per round.

The pair completion estimate scans offload points d = 1..min(remaining
updates) and evaluates

    max((r_a - d) * t_a + d * x_b, (r_b - d) * t_b)

where t_a, t_b are full per-batch times, x_b is the receiver's backward
feature phase time and r_a, r_b are remaining update counts. The scan exits
as soon as the cost rises, which is safe because both arms are linear in d.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .profiling import ClientProfile
from .similarity import SimilarityMatrix


@dataclass(frozen=True)
class OffloadAssignment:
    weak_client_id: int
    strong_client_id: int
    offload_point: int
    estimated_completion: float

    def to_dict(self) -> dict:
        return {
            "weak_client_id": self.weak_client_id,
            "strong_client_id": self.strong_client_id,
            "offload_point": self.offload_point,
            "estimated_completion": self.estimated_completion,
        }


@dataclass(frozen=True)
class OffloadSchedule:
    assignments: tuple[OffloadAssignment, ...]
    sending_ids: tuple[int, ...]
    receiving_ids: tuple[int, ...]
    mean_completion: float
    round_index: int

    def to_dict(self) -> dict:
        return {
            "round_index": self.round_index,
            "mean_completion": self.mean_completion,
            "sending_ids": list(self.sending_ids),
            "receiving_ids": list(self.receiving_ids),
            "assignments": [a.to_dict() for a in self.assignments],
        }


def mean_completion_time(profiles: list[ClientProfile]) -> float:
    """Mean of the clients' estimated remaining completion times."""
    if not profiles:
        raise ValueError("mean_completion_time needs at least one profile")
    return sum(p.estimated_remaining_time() for p in profiles) / len(profiles)


def split_sending_receiving(
    profiles: list[ClientProfile], mean_completion: float
) -> tuple[list[ClientProfile], list[ClientProfile]]:
    """Split profiles around the mean estimate.

    Clients strictly above the mean are senders, everyone else (ties
    included) receives. Senders come back sorted by ascending estimate,
    receivers by descending estimate; equal estimates fall back to ascending
    client id so the schedule is reproducible.
    """
    sending = [p for p in profiles if p.estimated_remaining_time() > mean_completion]
    receiving = [p for p in profiles if p.estimated_remaining_time() <= mean_completion]
    sending.sort(key=lambda p: (p.estimated_remaining_time(), p.client_id))
    receiving.sort(key=lambda p: (-p.estimated_remaining_time(), p.client_id))
    return sending, receiving


def find_offload_point(
    weak_batch_time: float,
    strong_batch_time: float,
    strong_offload_batch_time: float,
    weak_remaining: int,
    strong_remaining: int,
) -> tuple[float, int]:
    """Best offload point for a weak/strong pair.

    Returns (estimated completion time, d) where d is the number of the weak
    client's trailing updates handed to the strong client. The scan stops at
    the first cost increase and reports the d that achieved the returned
    cost.
    """
    if weak_batch_time <= 0 or strong_batch_time <= 0 or strong_offload_batch_time <= 0:
        raise ValueError("batch times must be positive")
    if weak_remaining < 1 or strong_remaining < 1:
        raise ValueError("remaining update counts must be >= 1")
    best = math.inf
    d = 0
    for d in range(1, min(weak_remaining, strong_remaining) + 1):
        current = max(
            (weak_remaining - d) * weak_batch_time + d * strong_offload_batch_time,
            (strong_remaining - d) * strong_batch_time,
        )
        if current > best:
            return best, d - 1
        best = current
    return best, d


def build_schedule(
    profiles: list[ClientProfile],
    similarity: SimilarityMatrix,
    similarity_factor: float,
    round_index: int = 0,
) -> OffloadSchedule:
    """Pair senders with receivers for one round.

    Senders are visited in ascending-estimate order; for each one every
    still-unused receiver is scored with the offload-point estimate scaled by
    ``1 + ln(S * f + 1)`` and the cheapest receiver wins (ties go to the
    lower client id). With f == 0 the similarity term vanishes and the choice
    depends on timing alone.
    """
    if similarity_factor < 0:
        raise ValueError(f"similarity_factor must be >= 0, got {similarity_factor}")
    known = set(similarity.client_ids)
    for p in profiles:
        if p.client_id not in known:
            raise ValueError(f"client {p.client_id} missing from similarity matrix")

    mean = mean_completion_time(profiles)
    sending, receiving = split_sending_receiving(profiles, mean)
    available = list(receiving)
    assignments: list[OffloadAssignment] = []

    for weak in sending:
        if not available:
            break
        if weak.remaining_updates < 1:
            continue
        best_cost = math.inf
        best_pick: tuple[ClientProfile, float, int] | None = None
        for strong in available:
            if strong.remaining_updates < 1:
                continue
            completion, point = find_offload_point(
                weak.timings.full_time,
                strong.timings.full_time,
                strong.timings.bf,
                weak.remaining_updates,
                strong.remaining_updates,
            )
            s = similarity.get(weak.client_id, strong.client_id)
            cost = completion * (1.0 + math.log(s * similarity_factor + 1.0))
            if cost < best_cost or (
                cost == best_cost
                and best_pick is not None
                and strong.client_id < best_pick[0].client_id
            ):
                best_cost = cost
                best_pick = (strong, completion, point)
        if best_pick is None:
            continue
        strong, completion, point = best_pick
        assignments.append(
            OffloadAssignment(
                weak_client_id=weak.client_id,
                strong_client_id=strong.client_id,
                offload_point=point,
                estimated_completion=completion,
            )
        )
        available.remove(strong)

    return OffloadSchedule(
        assignments=tuple(assignments),
        sending_ids=tuple(p.client_id for p in sending),
        receiving_ids=tuple(p.client_id for p in receiving),
        mean_completion=mean,
        round_index=round_index,
    )
