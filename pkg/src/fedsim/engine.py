"""Virtual-time federated training engine.

Rounds are simulated with a discrete-event queue ordered by (virtual time,
sequence number). Training itself is real: every selected client runs SGD on
its own partition, so round durations *and* model quality react to the
scheduling strategy. Virtual time never waits on wall-clock time; per-batch
costs come from the four-phase timing model in `profiling`.

Strategies
----------
* fedavg: every selected client trains its full budget; weighted average.
* fedprox: fedavg plus a proximal pull toward the round's global model.
* fednova: fedavg-style selection with normalized averaging.
* tifl: clients pre-grouped into speed tiers; each round samples one tier.
* deadline: fedavg, but contributions arriving after a deadline are dropped.
* freeze_offload: clients profile their first batches, the federator pairs
  stragglers with fast receivers, stragglers freeze their feature block and
  finish classifier-only while the receiver trains the frozen block's
  remaining updates on its own data; the federator recombines both parts.

In a freeze_offload round a weak client with budget U and offload point op
trains U - op full batches (batches already executed when the schedule
arrives count toward that target; if it has been passed the handoff is
immediate), hands its feature block plus a classifier snapshot to the
receiver, and finishes its remaining updates classifier-only. The receiver
first completes its own budget, then trains the received feature block for
the same remaining updates on its own data. Every update of the weak
client's budget therefore executes exactly once per block, split across the
two machines after the handoff.
"""

from __future__ import annotations

import enum
import heapq
import itertools
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .data import ClientPartition, Dataset, generate_synthetic, partition
from .model import (
    Batch,
    ClassifierBlock,
    FeatureBlock,
    Gradients,
    PartitionedModel,
    backward_frozen,
    backward_full,
    forward,
    init_model,
    merge,
    sgd_step,
    split,
)
from .profiling import ClientProfile, PhaseTimings, measure, scale_timings
from .scheduling import OffloadSchedule, build_schedule
from .seeding import (
    TAG_BATCHES,
    TAG_MODEL_INIT,
    TAG_PROFILE,
    TAG_SELECTION,
    TAG_SPEEDS,
    spawn_rng,
)
from .similarity import ClassCountSubmission, SimilarityMatrix, SimilarityOracle


# --------------------------------------------------------------------------
# Strategies
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FedAvg:
    @property
    def label(self) -> str:
        return "fedavg"


@dataclass(frozen=True)
class FedProx:
    mu: float = 0.01

    @property
    def label(self) -> str:
        return f"fedprox_mu{self.mu:g}"


@dataclass(frozen=True)
class FedNova:
    @property
    def label(self) -> str:
        return "fednova"


@dataclass(frozen=True)
class Tifl:
    num_tiers: int = 3

    @property
    def label(self) -> str:
        return f"tifl_t{self.num_tiers}"


@dataclass(frozen=True)
class DeadlineDrop:
    multiplier: float = 1.0

    @property
    def label(self) -> str:
        return f"deadline_m{self.multiplier:g}"


@dataclass(frozen=True)
class FreezeOffload:
    similarity_factor: float = 1.0
    profile_batches: int = 1
    profile_noise_sigma: float = 0.0

    @property
    def label(self) -> str:
        return f"freeze_offload_f{self.similarity_factor:g}"


Strategy = FedAvg | FedProx | FedNova | Tifl | DeadlineDrop | FreezeOffload


# --------------------------------------------------------------------------
# Events
# --------------------------------------------------------------------------


class EventKind(enum.Enum):
    ROUND_START = "round_start"
    PROFILE_REPORT = "profile_report"
    SCHEDULE_DISPATCH = "schedule_dispatch"
    OFFLOAD_HANDOFF = "offload_handoff"
    MODEL_SUBMIT = "model_submit"
    ROUND_END = "round_end"


@dataclass(frozen=True)
class Event:
    kind: EventKind
    round_index: int
    client_id: int | None = None
    payload: Any = None


class EventQueue:
    """Min-heap of events keyed by (time, insertion sequence)."""

    def __init__(self) -> None:
        self._heap: list[tuple[float, int, Event]] = []
        self._seq = itertools.count()
        self._last_popped = -math.inf

    def push(self, time: float, event: Event) -> None:
        if not math.isfinite(time):
            raise ValueError(f"event time must be finite, got {time}")
        heapq.heappush(self._heap, (time, next(self._seq), event))

    def pop(self) -> tuple[float, Event]:
        time, _, event = heapq.heappop(self._heap)
        assert time >= self._last_popped, "event queue went backwards in time"
        self._last_popped = time
        return time, event

    def __len__(self) -> int:
        return len(self._heap)


# --------------------------------------------------------------------------
# Client-side pieces
# --------------------------------------------------------------------------


class BatchCursor:
    """Deterministic endless stream of mini-batches over a client's samples."""

    def __init__(
        self,
        inputs: np.ndarray,
        labels: np.ndarray,
        indices: np.ndarray,
        batch_size: int,
        rng: np.random.Generator,
    ) -> None:
        if batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {batch_size}")
        if indices.shape[0] < 1:
            raise ValueError("cursor needs at least one sample")
        self._inputs = inputs
        self._labels = labels
        self._indices = np.asarray(indices, dtype=np.int64)
        self._batch_size = batch_size
        self._rng = rng
        self._order = self._rng.permutation(self._indices)
        self._pos = 0

    def _take(self, n: int) -> np.ndarray:
        out: list[np.ndarray] = []
        while n > 0:
            if self._pos >= self._order.shape[0]:
                self._order = self._rng.permutation(self._indices)
                self._pos = 0
            chunk = self._order[self._pos : self._pos + n]
            out.append(chunk)
            self._pos += chunk.shape[0]
            n -= chunk.shape[0]
        return np.concatenate(out)

    def next_batch(self) -> Batch:
        idx = self._take(self._batch_size)
        return Batch(inputs=self._inputs[idx], labels=self._labels[idx])


@dataclass
class ClientState:
    client_id: int
    speed_factor: float
    timings: PhaseTimings
    partition: ClientPartition
    model: PartitionedModel | None = None
    cursor: BatchCursor | None = None
    remaining_updates: int = 0

    @property
    def num_samples(self) -> int:
        return self.partition.size


def local_train(
    model: PartitionedModel,
    cursor: BatchCursor,
    updates: int,
    learning_rate: float,
    timings: PhaseTimings,
    mode: str = "full",
    prox_mu: float = 0.0,
    anchor: PartitionedModel | None = None,
) -> tuple[PartitionedModel, float]:
    """Run `updates` SGD steps and return (new model, virtual seconds spent).

    In "frozen" mode only the classifier block moves and the per-batch cost
    drops to the three non-bf phases.
    """
    if updates < 0:
        raise ValueError(f"updates must be >= 0, got {updates}")
    if mode not in ("full", "frozen"):
        raise ValueError(f"unknown training mode {mode!r}")
    per_batch = timings.full_time if mode == "full" else timings.frozen_time
    for _ in range(updates):
        batch = cursor.next_batch()
        if mode == "full":
            grads = backward_full(model, batch)
            if prox_mu != 0.0:
                if anchor is None:
                    raise ValueError("proximal training requires an anchor model")
                grads = Gradients(
                    feature_weights=grads.feature_weights
                    + prox_mu * (model.feature_weights - anchor.feature_weights),
                    feature_bias=grads.feature_bias
                    + prox_mu * (model.feature_bias - anchor.feature_bias),
                    classifier_weights=grads.classifier_weights
                    + prox_mu * (model.classifier_weights - anchor.classifier_weights),
                    classifier_bias=grads.classifier_bias
                    + prox_mu * (model.classifier_bias - anchor.classifier_bias),
                )
        else:
            grads = backward_frozen(model, batch)
        model = sgd_step(model, grads, learning_rate)
    return model, updates * per_batch


def execute_offloaded(
    feature: FeatureBlock,
    classifier_snapshot: ClassifierBlock,
    cursor: BatchCursor,
    updates: int,
    learning_rate: float,
    timings: PhaseTimings,
) -> tuple[FeatureBlock, float]:
    """Train someone else's feature block on local data.

    The donated classifier snapshot stays fixed; only the feature block
    moves. Virtual cost is the backward-feature phase per batch, the only
    phase the receiving client runs that it would not otherwise run.
    """
    if updates < 0:
        raise ValueError(f"updates must be >= 0, got {updates}")
    model = merge(feature, classifier_snapshot)
    for _ in range(updates):
        batch = cursor.next_batch()
        grads = backward_full(model, batch)
        if not (
            np.all(np.isfinite(grads.feature_weights))
            and np.all(np.isfinite(grads.feature_bias))
        ):
            raise ValueError("non-finite gradient values")
        model = PartitionedModel(
            feature_weights=model.feature_weights - learning_rate * grads.feature_weights,
            feature_bias=model.feature_bias - learning_rate * grads.feature_bias,
            classifier_weights=model.classifier_weights,
            classifier_bias=model.classifier_bias,
            num_classes=model.num_classes,
        )
    trained, _ = split(model)
    return trained, updates * timings.bf


# --------------------------------------------------------------------------
# Aggregation
# --------------------------------------------------------------------------


def aggregate_fedavg(
    models: list[PartitionedModel], weights: list[float]
) -> PartitionedModel:
    """Weighted parameter average, weights proportional to sample counts."""
    if not models:
        raise ValueError("aggregate_fedavg needs at least one model")
    if len(models) != len(weights):
        raise ValueError(f"{len(models)} models but {len(weights)} weights")
    if any(w <= 0 for w in weights):
        raise ValueError("aggregation weights must be positive")
    total = sum(weights)
    acc = [np.zeros_like(a) for a in models[0].arrays()]
    for model, w in zip(models, weights):
        p = w / total
        for slot, arr in zip(acc, model.arrays()):
            slot += p * arr
    return PartitionedModel(acc[0], acc[1], acc[2], acc[3], models[0].num_classes)


def aggregate_fednova(
    global_model: PartitionedModel,
    models: list[PartitionedModel],
    weights: list[float],
    local_steps: list[int],
) -> PartitionedModel:
    """Normalized averaging: per-client deltas divided by their step counts.

    new = global + (sum_k p_k tau_k) * sum_k p_k (w_k - global) / tau_k
    """
    if not models:
        raise ValueError("aggregate_fednova needs at least one model")
    if not len(models) == len(weights) == len(local_steps):
        raise ValueError("models, weights and local_steps must align")
    if any(t < 1 for t in local_steps):
        raise ValueError("local step counts must be >= 1")
    total = sum(weights)
    p = [w / total for w in weights]
    effective = sum(pi * tau for pi, tau in zip(p, local_steps))
    acc = [np.zeros_like(a) for a in global_model.arrays()]
    for model, pi, tau in zip(models, p, local_steps):
        for slot, arr, base in zip(acc, model.arrays(), global_model.arrays()):
            slot += pi * (arr - base) / tau
    merged = [
        base + effective * slot for base, slot in zip(global_model.arrays(), acc)
    ]
    return PartitionedModel(
        merged[0], merged[1], merged[2], merged[3], global_model.num_classes
    )


def evaluate_accuracy(model: PartitionedModel, dataset: Dataset) -> float:
    """Share of correctly classified held-out samples."""
    idx = dataset.test_indices
    batch = Batch(inputs=dataset.inputs[idx], labels=dataset.labels[idx])
    _, probs = forward(model, batch)
    return float(np.mean(np.argmax(probs, axis=1) == batch.labels))


# --------------------------------------------------------------------------
# Round traces
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class OffloadRecord:
    """Audit row for one executed handoff (all times relative to round start)."""

    weak_client_id: int
    strong_client_id: int
    offload_point: int
    full_batches: int
    frozen_batches: int
    offloaded_batches: int
    handoff_time: float

    def to_dict(self) -> dict:
        return {
            "weak_client_id": self.weak_client_id,
            "strong_client_id": self.strong_client_id,
            "offload_point": self.offload_point,
            "full_batches": self.full_batches,
            "frozen_batches": self.frozen_batches,
            "offloaded_batches": self.offloaded_batches,
            "handoff_time": self.handoff_time,
        }


@dataclass(frozen=True)
class RoundTrace:
    round_index: int
    duration: float
    accuracy: float
    selected: tuple[int, ...]
    completion_times: dict[int, float]
    dropped: tuple[int, ...]
    num_offloads: int
    schedule: OffloadSchedule | None = None
    offload_records: tuple[OffloadRecord, ...] = ()


@dataclass(frozen=True)
class ExperimentSummary:
    strategy_label: str
    seed: int
    rounds: int
    total_time: float
    final_accuracy: float
    best_accuracy: float
    mean_round_duration: float
    sd_round_duration: float

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy_label,
            "seed": self.seed,
            "rounds": self.rounds,
            "total_time_s": self.total_time,
            "final_accuracy": self.final_accuracy,
            "best_accuracy": self.best_accuracy,
            "mean_round_duration_s": self.mean_round_duration,
            "sd_round_duration_s": self.sd_round_duration,
        }


@dataclass
class ExperimentResult:
    strategy_label: str
    seed: int
    traces: list[RoundTrace]
    summary: ExperimentSummary


# --------------------------------------------------------------------------
# Experiment state
# --------------------------------------------------------------------------


@dataclass
class ExperimentState:
    config: Any
    strategy: Strategy
    seed: int
    dataset: Dataset
    clients: list[ClientState]
    global_model: PartitionedModel
    similarity: SimilarityMatrix | None = None
    tiers: list[list[int]] | None = None
    clock: float = 0.0

    def client(self, client_id: int) -> ClientState:
        return self.clients[client_id]


def _batches_done(start: float, per_batch: float, now: float, cap: int) -> int:
    """Number of whole batches finished by `now`, robust to float rounding."""
    if now < start:
        return 0
    k = int((now - start) / per_batch)
    while k + 1 <= cap and start + (k + 1) * per_batch <= now:
        k += 1
    while k > 0 and start + k * per_batch > now:
        k -= 1
    return min(k, cap)


def select_clients(
    num_clients: int, count: int, round_index: int, seed: int
) -> list[int]:
    """Uniform selection without replacement, reproducible per (seed, round)."""
    if not 1 <= count <= num_clients:
        raise ValueError(
            f"cannot select {count} clients out of {num_clients}"
        )
    rng = spawn_rng(seed, TAG_SELECTION, round_index)
    chosen = rng.choice(num_clients, size=count, replace=False)
    return sorted(int(c) for c in chosen)


def _select_tiered(
    tiers: list[list[int]], count: int, round_index: int, seed: int
) -> list[int]:
    tier = tiers[round_index % len(tiers)]
    take = min(count, len(tier))
    rng = spawn_rng(seed, TAG_SELECTION, round_index)
    chosen = rng.choice(len(tier), size=take, replace=False)
    return sorted(int(tier[int(i)]) for i in chosen)


def build_tiers(clients: list[ClientState], num_tiers: int) -> list[list[int]]:
    """Near-equal-size groups ordered fastest to slowest by full batch time."""
    if not 1 <= num_tiers <= len(clients):
        raise ValueError(
            f"num_tiers must be in [1, {len(clients)}], got {num_tiers}"
        )
    order = sorted(clients, key=lambda c: (c.timings.full_time, c.client_id))
    ids = np.asarray([c.client_id for c in order])
    return [[int(x) for x in part] for part in np.array_split(ids, num_tiers)]


# --------------------------------------------------------------------------
# Round execution
# --------------------------------------------------------------------------


class _RoundRunner:
    """Event handlers and bookkeeping for a single round."""

    def __init__(self, state: ExperimentState, round_index: int) -> None:
        self.state = state
        self.strategy = state.strategy
        self.round_index = round_index
        self.start = state.clock
        cfg = state.config
        self.updates = cfg.training.local_updates
        self.lr = cfg.training.learning_rate
        self.queue = EventQueue()
        self.selected: list[int] = []
        # Per-client submitted parts: client -> {part kind: (object, rel time)}
        self.parts: dict[int, dict[str, tuple[Any, float]]] = {}
        self.expected_parts: int | None = None
        self.seen_parts = 0
        self.dropped: tuple[int, ...] = ()
        self.deadline: float | None = None
        self.schedule: OffloadSchedule | None = None
        self.records: list[OffloadRecord] = []
        self.profile_reports: set[int] = set()
        # Clients whose planned full-budget completion was overtaken by an
        # offload instruction; their pending submit event is void.
        self.redirected: set[int] = set()
        self.whole_done: set[int] = set()
        self.trace: RoundTrace | None = None

    # -- helpers ----------------------------------------------------------

    def _reset_client(self, cid: int) -> ClientState:
        c = self.state.client(cid)
        c.model = self.state.global_model.copy()
        c.cursor = BatchCursor(
            self.state.dataset.inputs,
            self.state.dataset.labels,
            c.partition.sample_indices,
            self.state.config.training.batch_size,
            spawn_rng(self.state.seed, TAG_BATCHES, self.round_index, cid),
        )
        c.remaining_updates = self.updates
        return c

    def _submit(self, time: float, cid: int, kind: str, payload: Any) -> None:
        self.queue.push(
            time,
            Event(
                EventKind.MODEL_SUBMIT,
                round_index=self.round_index,
                client_id=cid,
                payload=(kind, payload),
            ),
        )

    def _push_pending_whole(self, cid: int) -> None:
        """Announce the client's full-budget completion time up front.

        The model itself is trained lazily when the event pops (or earlier if
        an offload handler needs the client's cursor state first); the virtual
        completion time is fixed either way.
        """
        c = self.state.client(cid)
        done_t = self.start + self.updates * c.timings.full_time
        self._submit(done_t, cid, "whole_pending", None)

    def _train_whole_now(self, cid: int) -> None:
        """Run the client's full local budget if it has not run yet."""
        if cid in self.whole_done:
            return
        c = self.state.client(cid)
        prox_mu = self.strategy.mu if isinstance(self.strategy, FedProx) else 0.0
        model, _ = local_train(
            c.model,
            c.cursor,
            self.updates,
            self.lr,
            c.timings,
            mode="full",
            prox_mu=prox_mu,
            anchor=self.state.global_model if prox_mu != 0.0 else None,
        )
        c.model = model
        c.remaining_updates = 0
        self.whole_done.add(cid)

    # -- event handlers ----------------------------------------------------

    def on_round_start(self) -> None:
        if isinstance(self.strategy, FreezeOffload):
            # Clients train from the first batch; the schedule only matters
            # for those still running when it arrives. The part count is
            # known once the schedule is built.
            self.expected_parts = None
            for cid in self.selected:
                c = self.state.client(cid)
                self._push_pending_whole(cid)
                report_t = (
                    self.start
                    + self.strategy.profile_batches * c.timings.full_time
                )
                self.queue.push(
                    report_t,
                    Event(
                        EventKind.PROFILE_REPORT,
                        round_index=self.round_index,
                        client_id=cid,
                    ),
                )
            return

        if isinstance(self.strategy, DeadlineDrop):
            completions = {
                cid: self.updates * self.state.client(cid).timings.full_time
                for cid in self.selected
            }
            self.deadline = self.strategy.multiplier * (
                sum(completions.values()) / len(completions)
            )
            self.dropped = tuple(
                cid for cid in self.selected if completions[cid] > self.deadline
            )

        self.expected_parts = len(self.selected)
        for cid in self.selected:
            self._push_pending_whole(cid)

    def on_profile_report(self, time: float, cid: int) -> None:
        self.profile_reports.add(cid)
        if len(self.profile_reports) < len(self.selected):
            return
        # Last report in: this moment is the schedule computation time.
        dispatch_t = time + self.state.config.latency.dispatch
        self.queue.push(
            dispatch_t,
            Event(
                EventKind.SCHEDULE_DISPATCH,
                round_index=self.round_index,
                payload=time,
            ),
        )

    def on_schedule_dispatch(self, arrival: float, computed_at: float) -> None:
        assert isinstance(self.strategy, FreezeOffload)
        strat = self.strategy
        executed: dict[int, int] = {}
        profiles: list[ClientProfile] = []
        for cid in self.selected:
            c = self.state.client(cid)
            done = _batches_done(
                self.start, c.timings.full_time, computed_at, self.updates
            )
            executed[cid] = done
            profiles.append(
                measure(
                    cid,
                    c.timings,
                    self.updates,
                    strat.profile_batches,
                    strat.profile_noise_sigma,
                    spawn_rng(self.state.seed, TAG_PROFILE, self.round_index, cid),
                    batches_awaiting_schedule=done - strat.profile_batches,
                )
            )
        if self.state.similarity is None:
            raise RuntimeError("freeze_offload requires a similarity matrix")
        self.schedule = build_schedule(
            profiles, self.state.similarity, strat.similarity_factor, self.round_index
        )

        expected = len(self.selected)
        for a in self.schedule.assignments:
            cid = a.weak_client_id
            c = self.state.client(cid)
            done_now = _batches_done(
                self.start, c.timings.full_time, arrival, self.updates
            )
            if done_now >= self.updates:
                # Finished before the instruction arrived; its pending whole
                # submission stands and nothing is offloaded.
                continue
            planned = self.updates - a.offload_point
            full_batches = min(self.updates, max(done_now, planned))
            remaining = self.updates - full_batches
            handoff_t = max(arrival, self.start + full_batches * c.timings.full_time)
            self.redirected.add(cid)
            expected += 1  # the weak client now submits two parts
            self.queue.push(
                handoff_t,
                Event(
                    EventKind.OFFLOAD_HANDOFF,
                    round_index=self.round_index,
                    client_id=cid,
                    payload=(a, full_batches, remaining),
                ),
            )
        self.expected_parts = expected
        self._maybe_finish(arrival)

    def on_offload_handoff(self, handoff_t: float, cid: int, payload: Any) -> None:
        assignment, full_batches, remaining = payload
        weak = self.state.client(cid)
        strong = self.state.client(assignment.strong_client_id)
        model_full, _ = local_train(
            weak.model, weak.cursor, full_batches, self.lr, weak.timings, mode="full"
        )
        self.records.append(
            OffloadRecord(
                weak_client_id=cid,
                strong_client_id=strong.client_id,
                offload_point=assignment.offload_point,
                full_batches=full_batches,
                frozen_batches=remaining,
                offloaded_batches=remaining,
                handoff_time=handoff_t - self.start,
            )
        )

        feature_block, classifier_snapshot = split(model_full)
        frozen_model, frozen_spent = local_train(
            model_full, weak.cursor, remaining, self.lr, weak.timings, mode="frozen"
        )
        weak.model = frozen_model
        weak.remaining_updates = 0
        self._submit(handoff_t + frozen_spent, cid, "classifier_part", frozen_model)

        # The receiver trains the donated block only after its own budget; it
        # must therefore consume its own batches from the stream first.
        self._train_whole_now(strong.client_id)
        block_arrival = handoff_t + self.state.config.latency.transfer
        own_done = self.start + self.updates * strong.timings.full_time
        offload_start = max(block_arrival, own_done)
        trained_block, offload_spent = execute_offloaded(
            feature_block,
            classifier_snapshot,
            strong.cursor,
            remaining,
            self.lr,
            strong.timings,
        )
        self._submit(offload_start + offload_spent, cid, "feature_part", trained_block)

    def on_model_submit(self, time: float, cid: int, payload: Any) -> None:
        kind, obj = payload
        if kind == "whole_pending":
            if cid in self.redirected:
                # An offload instruction reached this client before it
                # finished, so this completion never happens.
                return
            self._train_whole_now(cid)
            kind, obj = "whole", self.state.client(cid).model
        self.parts.setdefault(cid, {})[kind] = (obj, time - self.start)
        self.seen_parts += 1
        self._maybe_finish(time)

    def _maybe_finish(self, now: float) -> None:
        if self.expected_parts is not None and self.seen_parts == self.expected_parts:
            self.queue.push(
                now, Event(EventKind.ROUND_END, round_index=self.round_index)
            )
            self.expected_parts = -1  # push exactly once

    def on_round_end(self) -> None:
        contributions: dict[int, tuple[PartitionedModel, float]] = {}
        for cid in self.selected:
            parts = self.parts[cid]
            if "whole" in parts:
                model, t = parts["whole"]
                contributions[cid] = (model, t)
            else:
                classifier_model, t1 = parts["classifier_part"]
                feature_block, t2 = parts["feature_part"]
                _, classifier_block = split(classifier_model)
                contributions[cid] = (
                    merge(feature_block, classifier_block),
                    max(t1, t2),
                )

        included = [cid for cid in self.selected if cid not in set(self.dropped)]
        models = [contributions[cid][0] for cid in included]
        weights = [float(self.state.client(cid).num_samples) for cid in included]

        if models:
            if isinstance(self.strategy, FedNova):
                new_global = aggregate_fednova(
                    self.state.global_model,
                    models,
                    weights,
                    [self.updates] * len(models),
                )
            else:
                new_global = aggregate_fedavg(models, weights)
            self.state.global_model = new_global
            duration = max(contributions[cid][1] for cid in included)
        else:
            # Every contribution missed the deadline; the round closes at the
            # deadline with the global model unchanged.
            duration = self.deadline if self.deadline is not None else 0.0

        accuracy = evaluate_accuracy(self.state.global_model, self.state.dataset)
        self.trace = RoundTrace(
            round_index=self.round_index,
            duration=duration,
            accuracy=accuracy,
            selected=tuple(self.selected),
            completion_times={
                cid: contributions[cid][1] for cid in self.selected
            },
            dropped=self.dropped,
            num_offloads=len(self.schedule.assignments) if self.schedule else 0,
            schedule=self.schedule,
            offload_records=tuple(self.records),
        )

    # -- driver -------------------------------------------------------------

    def run(self) -> RoundTrace:
        cfg = self.state.config
        if isinstance(self.strategy, Tifl):
            assert self.state.tiers is not None
            self.selected = _select_tiered(
                self.state.tiers,
                cfg.clients.per_round,
                self.round_index,
                self.state.seed,
            )
        else:
            self.selected = select_clients(
                len(self.state.clients),
                cfg.clients.per_round,
                self.round_index,
                self.state.seed,
            )
        for cid in self.selected:
            self._reset_client(cid)

        self.queue.push(
            self.start, Event(EventKind.ROUND_START, round_index=self.round_index)
        )
        while len(self.queue):
            time, event = self.queue.pop()
            assert (
                event.round_index == self.round_index
            ), f"stale event from round {event.round_index} in round {self.round_index}"
            if event.kind is EventKind.ROUND_START:
                self.on_round_start()
            elif event.kind is EventKind.PROFILE_REPORT:
                self.on_profile_report(time, event.client_id)
            elif event.kind is EventKind.SCHEDULE_DISPATCH:
                self.on_schedule_dispatch(time, event.payload)
            elif event.kind is EventKind.OFFLOAD_HANDOFF:
                self.on_offload_handoff(time, event.client_id, event.payload)
            elif event.kind is EventKind.MODEL_SUBMIT:
                self.on_model_submit(time, event.client_id, event.payload)
            elif event.kind is EventKind.ROUND_END:
                self.on_round_end()
        if self.trace is None:
            raise RuntimeError("round finished without a round-end event")
        self.state.clock = self.start + self.trace.duration
        return self.trace


def run_round(state: ExperimentState, round_index: int) -> RoundTrace:
    """Simulate one round under the state's strategy and advance the clock."""
    return _RoundRunner(state, round_index).run()


# --------------------------------------------------------------------------
# Experiment driver
# --------------------------------------------------------------------------


def _draw_speed_factors(config, seed: int) -> list[float]:
    clients = config.clients
    if clients.speed_factors is not None:
        return [float(f) for f in clients.speed_factors]
    rng = spawn_rng(seed, TAG_SPEEDS)
    return [
        float(f)
        for f in rng.uniform(clients.speed_low, clients.speed_high, clients.count)
    ]


def build_state(config, strategy: Strategy, seed: int) -> ExperimentState:
    """Materialize dataset, clients and the initial global model."""
    dataset = generate_synthetic(
        num_classes=config.dataset.num_classes,
        samples_per_class=config.dataset.samples_per_class,
        input_dim=config.dataset.input_dim,
        seed=seed,
        noise_sigma=config.dataset.noise_sigma,
    )
    partitions = partition(
        dataset,
        config.clients.count,
        mode=config.partition.mode,
        classes_per_client=config.partition.classes_per_client,
        sizes=config.partition.sizes,
        seed=seed,
    )
    speeds = _draw_speed_factors(config, seed)
    base = config.profile.base
    clients = [
        ClientState(
            client_id=i,
            speed_factor=speeds[i],
            timings=scale_timings(base, speeds[i]),
            partition=partitions[i],
        )
        for i in range(config.clients.count)
    ]
    init_seed = int(
        np.random.SeedSequence([seed, TAG_MODEL_INIT]).generate_state(1)[0]
    )
    global_model = init_model(
        config.dataset.input_dim,
        config.training.hidden_dim,
        config.dataset.num_classes,
        init_seed,
    )

    similarity = None
    if isinstance(strategy, FreezeOffload):
        oracle = SimilarityOracle(
            [c.client_id for c in clients], dataset.num_classes
        )
        for c in clients:
            oracle.submit(
                ClassCountSubmission(
                    client_id=c.client_id,
                    counts=tuple(int(x) for x in c.partition.class_counts),
                )
            )
        similarity = oracle.compute_matrix()

    tiers = build_tiers(clients, strategy.num_tiers) if isinstance(strategy, Tifl) else None

    return ExperimentState(
        config=config,
        strategy=strategy,
        seed=seed,
        dataset=dataset,
        clients=clients,
        global_model=global_model,
        similarity=similarity,
        tiers=tiers,
    )


def run_experiment(config, strategy: Strategy, seed: int) -> ExperimentResult:
    """Run all configured rounds for one strategy and seed."""
    state = build_state(config, strategy, seed)
    traces = [run_round(state, r) for r in range(config.training.rounds)]
    durations = np.asarray([t.duration for t in traces], dtype=np.float64)
    accuracies = [t.accuracy for t in traces]
    summary = ExperimentSummary(
        strategy_label=strategy.label,
        seed=seed,
        rounds=len(traces),
        total_time=float(durations.sum()),
        final_accuracy=accuracies[-1] if accuracies else 0.0,
        best_accuracy=max(accuracies) if accuracies else 0.0,
        mean_round_duration=float(durations.mean()) if len(durations) else 0.0,
        sd_round_duration=float(durations.std()) if len(durations) else 0.0,
    )
    return ExperimentResult(
        strategy_label=strategy.label, seed=seed, traces=traces, summary=summary
    )
