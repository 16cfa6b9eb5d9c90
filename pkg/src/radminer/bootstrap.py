"""Iterative hard-example-mining loop: score the pool, serve a queue, fold
human labels back into training, retrain, advance.

The pure state machine lives in :func:`init_state` / :func:`open_annotation_round`
/ :func:`submit_label` / :func:`close_round`. :class:`BootstrapSession` owns a
state directory and adds the append-only event log; loading a session replays
the log from scratch, which is cheap at desk scale because retraining only
happens at round boundaries and is fully deterministic.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping

from . import classifier
from .classifier import (
    ClassifierModel,
    FeatureConfig,
    Hyper,
    LabeledSentence,
    Prediction,
)

EVENT_LOG_NAME = "events.log"
SEED_DATA_NAME = "seed_data.jsonl"
POOL_NAME = "pool.jsonl"
CONFIG_NAME = "config.json"
STATE_SNAPSHOT_NAME = "state.json"
MODELS_DIR = "models"


class BootstrapError(Exception):
    """Base class for annotation-loop contract violations."""


class RoundStateError(BootstrapError):
    """Round opened twice, closed while closed, or opened on an empty pool."""


class UnservedSentenceError(BootstrapError):
    def __init__(self, sentence_id: str):
        super().__init__(f"sentence {sentence_id!r} is not on the open annotation queue")
        self.sentence_id = sentence_id


class DuplicateLabelError(BootstrapError):
    def __init__(self, sentence_id: str):
        super().__init__(f"sentence {sentence_id!r} already has a label this iteration")
        self.sentence_id = sentence_id


class QuotaNotMetError(BootstrapError):
    def __init__(self, remaining: int):
        super().__init__(f"false-positive quota not met: {remaining} more negatives needed")
        self.remaining = remaining


class ReplayError(BootstrapError):
    """Event-log replay diverged from the recorded state."""


@dataclass(frozen=True)
class BootstrapConfig:
    queue_size: int = 100
    fp_quota: int = 400
    max_iterations: int = 4
    split_ratio: float = 0.9
    train_seed: int = 0
    class_weighting: bool = False
    hyper: Hyper = field(default_factory=Hyper)
    feature: FeatureConfig = field(default_factory=FeatureConfig)

    def __post_init__(self) -> None:
        if self.queue_size < 1:
            raise ValueError("queue_size must be >= 1")
        if self.fp_quota < 1:
            raise ValueError("fp_quota must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    def as_dict(self) -> dict:
        return {
            "queue_size": self.queue_size,
            "fp_quota": self.fp_quota,
            "max_iterations": self.max_iterations,
            "split_ratio": self.split_ratio,
            "train_seed": self.train_seed,
            "class_weighting": self.class_weighting,
            "hyper": {
                "learning_rate": self.hyper.learning_rate,
                "batch_size": self.hyper.batch_size,
                "epochs": self.hyper.epochs,
            },
            "feature": {
                "dimension": self.feature.dimension,
                "hash_seed": self.feature.hash_seed,
            },
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "BootstrapConfig":
        hyper = Hyper(**raw.get("hyper", {}))
        feature = FeatureConfig(**raw.get("feature", {}))
        return cls(
            queue_size=raw.get("queue_size", 100),
            fp_quota=raw.get("fp_quota", 400),
            max_iterations=raw.get("max_iterations", 4),
            split_ratio=raw.get("split_ratio", 0.9),
            train_seed=raw.get("train_seed", 0),
            class_weighting=raw.get("class_weighting", False),
            hyper=hyper,
            feature=feature,
        )


@dataclass(frozen=True)
class AnnotationRecord:
    sentence_id: str
    label: bool  # True = positive, False = negative (a mined false positive)
    annotator_id: str = "anonymous"
    timestamp: float = 0.0


@dataclass
class HistoryEntry:
    iteration: int
    precision_at_k: float
    k: int
    labels_collected: int
    fp_collected: int
    positives_collected: int
    model_hash: str

    def as_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "precision_at_k": self.precision_at_k,
            "k": self.k,
            "labels_collected": self.labels_collected,
            "fp_collected": self.fp_collected,
            "positives_collected": self.positives_collected,
            "model_hash": self.model_hash,
        }


@dataclass
class BootstrapState:
    config: BootstrapConfig
    iteration: int
    model: ClassifierModel
    training_set: list[LabeledSentence]
    pool: dict[str, str]  # sentence_id -> text, insertion-ordered
    history: list[HistoryEntry] = field(default_factory=list)
    round_open: bool = False
    ranking: list[Prediction] = field(default_factory=list)
    open_queue: list[str] = field(default_factory=list)
    collected: dict[str, AnnotationRecord] = field(default_factory=dict)
    fp_collected: int = 0
    _next_rank: int = 0
    _scores: dict[str, float] = field(default_factory=dict)

    @property
    def training_ids(self) -> set[str]:
        return {item.sentence_id for item in self.training_set if item.sentence_id}

    def queue_view(self) -> list[tuple[str, str, float]]:
        return [(sid, self.pool[sid], self._scores[sid]) for sid in self.open_queue]


def init_state(
    seed_data: list[LabeledSentence],
    pool: Mapping[str, str] | Iterable[tuple[str, str]],
    config: BootstrapConfig | None = None,
) -> BootstrapState:
    """Train the initial classifier and wrap it with the unlabeled pool."""
    if config is None:
        config = BootstrapConfig()
    pool_map = dict(pool.items() if isinstance(pool, Mapping) else pool)
    seed_ids = {item.sentence_id for item in seed_data if item.sentence_id}
    overlap = seed_ids & pool_map.keys()
    if overlap:
        raise BootstrapError(f"pool overlaps seed data on sentence ids: {sorted(overlap)[:10]}")
    model, _ = classifier.train(
        seed_data,
        split_ratio=config.split_ratio,
        seed=config.train_seed,
        config=config.feature,
        hyper=config.hyper,
        class_weighting=config.class_weighting,
    )
    return BootstrapState(
        config=config,
        iteration=0,
        model=model,
        training_set=list(seed_data),
        pool=pool_map,
    )


def open_annotation_round(state: BootstrapState) -> list[tuple[str, str, float]]:
    """Score and rank the pool, then serve the top-K as the open queue."""
    if state.round_open:
        raise RoundStateError("an annotation round is already open")
    if not state.pool:
        raise RoundStateError("cannot open a round on an empty pool")
    predictions = classifier.score(state.model, state.pool.items())
    state.ranking = classifier.rank_descending(predictions)
    state._scores = {p.sentence_id: p.score for p in state.ranking}
    k = min(state.config.queue_size, len(state.ranking))
    state.open_queue = [p.sentence_id for p in state.ranking[:k]]
    state._next_rank = k
    state.collected = {}
    state.fp_collected = 0
    state.round_open = True
    return state.queue_view()


def submit_label(state: BootstrapState, record: AnnotationRecord) -> dict:
    """Store one label, refill the queue, and report quota progress."""
    if not state.round_open:
        raise RoundStateError("no annotation round is open")
    if record.sentence_id in state.collected:
        raise DuplicateLabelError(record.sentence_id)
    if record.sentence_id not in state.open_queue:
        raise UnservedSentenceError(record.sentence_id)
    state.collected[record.sentence_id] = record
    state.open_queue.remove(record.sentence_id)
    if not record.label:
        state.fp_collected += 1
    while len(state.open_queue) < state.config.queue_size and state._next_rank < len(state.ranking):
        state.open_queue.append(state.ranking[state._next_rank].sentence_id)
        state._next_rank += 1
    return {
        "accepted": True,
        "sentence_id": record.sentence_id,
        "fp_collected": state.fp_collected,
        "fp_quota": state.config.fp_quota,
        "quota_met": state.fp_collected >= state.config.fp_quota,
    }


def _round_precision(state: BootstrapState) -> float:
    """Precision over the K highest-ranked sentences that received labels."""
    k = state.config.queue_size
    labeled = [p for p in state.ranking if p.sentence_id in state.collected][:k]
    if not labeled:
        return 0.0
    positives = sum(1 for p in labeled if state.collected[p.sentence_id].label)
    return positives / len(labeled)


def close_round(state: BootstrapState) -> BootstrapState:
    """Fold collected labels into training, retrain from scratch, advance t."""
    if not state.round_open:
        raise RoundStateError("no annotation round is open")
    quota_met = state.fp_collected >= state.config.fp_quota
    exhausted = not state.open_queue and state._next_rank >= len(state.ranking)
    if not quota_met and not exhausted:
        raise QuotaNotMetError(state.config.fp_quota - state.fp_collected)

    precision = _round_precision(state)
    next_iteration = state.iteration + 1
    for sid, record in state.collected.items():
        state.training_set.append(
            LabeledSentence(
                text=state.pool[sid],
                label=record.label,
                source=f"bootstrap:{next_iteration}",
                sentence_id=sid,
            )
        )
    for sid in state.collected:
        del state.pool[sid]

    model, _ = classifier.train(
        state.training_set,
        split_ratio=state.config.split_ratio,
        seed=state.config.train_seed,
        config=state.config.feature,
        hyper=state.config.hyper,
        class_weighting=state.config.class_weighting,
    )
    positives = sum(1 for record in state.collected.values() if record.label)
    state.history.append(
        HistoryEntry(
            iteration=state.iteration,
            precision_at_k=precision,
            k=state.config.queue_size,
            labels_collected=len(state.collected),
            fp_collected=state.fp_collected,
            positives_collected=positives,
            model_hash=model.model_hash(),
        )
    )
    state.model = model
    state.iteration = next_iteration
    state.round_open = False
    state.ranking = []
    state.open_queue = []
    state.collected = {}
    state.fp_collected = 0
    state._next_rank = 0
    state._scores = {}
    return state


def simulate_annotator(
    truth: Mapping[str, bool], noise: float = 0.0, seed: int = 0
) -> Callable[[str], bool]:
    """Test double for the human: answers from the truth map, flipping labels
    with probability ``noise`` using a seeded RNG (same query order, same flips)."""
    import random

    rng = random.Random(seed)

    def annotate(sentence_id: str) -> bool:
        if sentence_id not in truth:
            raise KeyError(f"no ground truth for sentence {sentence_id!r}")
        label = truth[sentence_id]
        if noise > 0.0 and rng.random() < noise:
            return not label
        return label

    return annotate


# ---------------------------------------------------------------------------
# Persistence: state directory + append-only event log
# ---------------------------------------------------------------------------


def _write_jsonl(path: Path, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")


def _read_jsonl(path: Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def _file_sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class BootstrapSession:
    """Single-writer owner of a bootstrap state directory.

    Layout: ``config.json``, ``seed_data.jsonl``, ``pool.jsonl`` (the immutable
    inputs), ``events.log`` (append-only JSONL of round transitions and labels),
    ``models/`` (one model file per trained classifier), ``state.json`` (a
    human-readable snapshot, never read back).
    """

    def __init__(self, directory: Path, state: BootstrapState):
        self.directory = Path(directory)
        self.state = state
        self._lock = threading.Lock()

    # -- construction ------------------------------------------------------

    @classmethod
    def create(
        cls,
        directory: Path | str,
        seed_data: list[LabeledSentence],
        pool: Mapping[str, str] | Iterable[tuple[str, str]],
        config: BootstrapConfig | None = None,
    ) -> "BootstrapSession":
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        if (directory / EVENT_LOG_NAME).exists():
            raise BootstrapError(f"session directory already initialized: {directory}")
        if config is None:
            config = BootstrapConfig()
        pool_map = dict(pool.items() if isinstance(pool, Mapping) else pool)

        _write_jsonl(
            directory / SEED_DATA_NAME,
            (
                {"text": s.text, "label": s.label, "source": s.source, "sentence_id": s.sentence_id}
                for s in seed_data
            ),
        )
        _write_jsonl(directory / POOL_NAME, ({"sentence_id": k, "text": v} for k, v in pool_map.items()))
        (directory / CONFIG_NAME).write_text(json.dumps(config.as_dict(), indent=2) + "\n", encoding="utf-8")
        (directory / MODELS_DIR).mkdir(exist_ok=True)

        state = init_state(seed_data, pool_map, config)
        session = cls(directory, state)
        session._save_model(0)
        session._append_event(
            "init",
            {
                "seed_data_sha256": _file_sha256(directory / SEED_DATA_NAME),
                "pool_sha256": _file_sha256(directory / POOL_NAME),
                "model_hash": state.model.model_hash(),
            },
        )
        session._write_snapshot()
        return session

    @classmethod
    def open(cls, directory: Path | str) -> "BootstrapSession":
        """Rebuild the session by replaying the event log from the stored inputs."""
        directory = Path(directory)
        log_path = directory / EVENT_LOG_NAME
        if not log_path.exists():
            raise BootstrapError(f"not a session directory (no {EVENT_LOG_NAME}): {directory}")
        state = replay_events(directory)
        return cls(directory, state)

    # -- event log ---------------------------------------------------------

    def _append_event(self, event_type: str, payload: dict) -> None:
        record = {
            "type": event_type,
            "iteration": self.state.iteration,
            "payload": payload,
            "timestamp": time.time(),
        }
        with open(self.directory / EVENT_LOG_NAME, "a", encoding="utf-8") as handle:
            handle.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
            handle.flush()

    def _save_model(self, iteration: int) -> Path:
        path = self.directory / MODELS_DIR / f"model_t{iteration}.bin"
        self.state.model.save(path)
        return path

    def _write_snapshot(self) -> None:
        snapshot = {
            "iteration": self.state.iteration,
            "round_open": self.state.round_open,
            "fp_collected": self.state.fp_collected,
            "fp_quota": self.state.config.fp_quota,
            "training_size": len(self.state.training_set),
            "pool_size": len(self.state.pool),
            "model_hash": self.state.model.model_hash(),
            "history": [entry.as_dict() for entry in self.state.history],
        }
        (self.directory / STATE_SNAPSHOT_NAME).write_text(
            json.dumps(snapshot, indent=2) + "\n", encoding="utf-8"
        )

    # -- state transitions (single writer) ----------------------------------

    def open_round(self) -> list[tuple[str, str, float]]:
        with self._lock:
            queue = open_annotation_round(self.state)
            self._append_event("round_opened", {"queue_size": len(queue)})
            self._write_snapshot()
            return queue

    def submit(self, record: AnnotationRecord) -> dict:
        """Apply one label; closes the round automatically once the quota is met."""
        with self._lock:
            ack = submit_label(self.state, record)
            self._append_event(
                "label",
                {
                    "sentence_id": record.sentence_id,
                    "label": "positive" if record.label else "negative",
                    "annotator_id": record.annotator_id,
                    "annotated_at": record.timestamp,
                },
            )
            if ack["quota_met"]:
                self._close(auto=True)
                ack["round_closed"] = True
                ack["iteration"] = self.state.iteration
            else:
                ack["round_closed"] = False
            return ack

    def close_round(self) -> dict:
        with self._lock:
            if not self.state.round_open:
                raise RoundStateError("no annotation round is open")
            quota_met = self.state.fp_collected >= self.state.config.fp_quota
            exhausted = not self.state.open_queue and self.state._next_rank >= len(self.state.ranking)
            if not quota_met and not exhausted:
                raise QuotaNotMetError(self.state.config.fp_quota - self.state.fp_collected)
            self._close(auto=False)
            return {"iteration": self.state.iteration, "history": self.state.history[-1].as_dict()}

    def _close(self, auto: bool) -> None:
        close_round(self.state)
        entry = self.state.history[-1]
        self._save_model(self.state.iteration)
        self._append_event(
            "round_closed",
            {"auto": auto, "precision_at_k": entry.precision_at_k, "model_hash": entry.model_hash},
        )
        self._write_snapshot()

    # -- read-side views -----------------------------------------------------

    def queue_view(self) -> dict:
        with self._lock:
            return {
                "iteration": self.state.iteration,
                "round_open": self.state.round_open,
                "fp_collected": self.state.fp_collected,
                "fp_quota": self.state.config.fp_quota,
                "items": [
                    {"sentence_id": sid, "text": text, "score": score}
                    for sid, text, score in self.state.queue_view()
                ],
            }

    def history_view(self) -> dict:
        with self._lock:
            return {
                "iteration": self.state.iteration,
                "history": [entry.as_dict() for entry in self.state.history],
            }


def load_session_inputs(directory: Path) -> tuple[list[LabeledSentence], dict[str, str], BootstrapConfig]:
    seed_rows = _read_jsonl(directory / SEED_DATA_NAME)
    seed_data = [
        LabeledSentence(
            text=row["text"], label=row["label"], source=row["source"], sentence_id=row.get("sentence_id")
        )
        for row in seed_rows
    ]
    pool_rows = _read_jsonl(directory / POOL_NAME)
    pool = {row["sentence_id"]: row["text"] for row in pool_rows}
    config = BootstrapConfig.from_dict(json.loads((directory / CONFIG_NAME).read_text()))
    return seed_data, pool, config


def replay_events(directory: Path, verify_hashes: bool = True) -> BootstrapState:
    """Reconstruct state by re-running every event from the log in order."""
    directory = Path(directory)
    seed_data, pool, config = load_session_inputs(directory)
    events = _read_jsonl(directory / EVENT_LOG_NAME)
    if not events or events[0]["type"] != "init":
        raise ReplayError("event log must start with an init event")

    state = init_state(seed_data, pool, config)
    init_hash = events[0]["payload"].get("model_hash")
    if verify_hashes and init_hash and state.model.model_hash() != init_hash:
        raise ReplayError("replayed initial model hash differs from the event log")

    for event in events[1:]:
        kind = event["type"]
        payload = event.get("payload", {})
        if kind == "round_opened":
            open_annotation_round(state)
        elif kind == "label":
            record = AnnotationRecord(
                sentence_id=payload["sentence_id"],
                label=payload["label"] == "positive",
                annotator_id=payload.get("annotator_id", "anonymous"),
                timestamp=payload.get("annotated_at", 0.0),
            )
            submit_label(state, record)
        elif kind == "round_closed":
            close_round(state)
            recorded = payload.get("model_hash")
            if verify_hashes and recorded and state.history[-1].model_hash != recorded:
                raise ReplayError(
                    f"replayed model hash for iteration {state.iteration} differs from the event log"
                )
        else:
            raise ReplayError(f"unknown event type {kind!r}")
    return state
