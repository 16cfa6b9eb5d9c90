"""Binary sentence classifier behind a train/score-over-raw-text contract.

The bundled implementation is a logistic model over hashed n-gram features
(word unigrams/bigrams plus character 3-5 grams), trained with mini-batch
Adam. Feature indices come from 64-bit FNV-1a, so a model file plus this
module is fully self-describing: no external vocabulary, and identical inputs
reproduce identical model bytes.

A transformer-backed implementation would plug in behind the same
``train``/``score`` surface; typical fine-tuning settings for such a plugin
(learning_rate 2e-5, batch_size 4) differ from the linear defaults below.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_U64 = (1 << 64) - 1

FEATURE_FAMILIES = ("w1", "w2", "c3", "c4", "c5")
_CHAR_NGRAM_SIZES = (3, 4, 5)
_SEP = b"\x1f"

_WORD_RE = re.compile(r"[a-z0-9]+(?:['-][a-z0-9]+)*")

MODEL_MAGIC = b"RMDL"
MODEL_FORMAT_VERSION = 1

DEFAULT_DIMENSION = 1 << 18
MIN_DIMENSION = 1 << 10


class TrainingError(Exception):
    """Training could not proceed (bad data or diverging loss)."""


def fnv1a64(data: bytes, seed: int = 0) -> int:
    """64-bit FNV-1a; ``seed`` is XORed into the offset basis (0 = standard FNV-1a)."""
    h = FNV_OFFSET ^ (seed & _U64)
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _U64
    return h


@dataclass(frozen=True)
class FeatureConfig:
    dimension: int = DEFAULT_DIMENSION
    hash_seed: int = 0
    families: tuple[str, ...] = FEATURE_FAMILIES

    def __post_init__(self) -> None:
        if self.dimension < MIN_DIMENSION or self.dimension & (self.dimension - 1):
            raise ValueError(f"dimension must be a power of two >= {MIN_DIMENSION}, got {self.dimension}")
        if tuple(self.families) != FEATURE_FAMILIES:
            raise ValueError(f"unsupported feature families: {self.families}")

    def content_hash(self) -> bytes:
        payload = json.dumps(
            {"dimension": self.dimension, "hash_seed": self.hash_seed, "families": list(self.families)},
            sort_keys=True,
            separators=(",", ":"),
        ).encode()
        return hashlib.sha256(payload).digest()


@dataclass(frozen=True)
class LabeledSentence:
    text: str
    label: bool  # True = positive
    source: str = "seed_positive"  # seed_positive | seed_negative | bootstrap:<t>
    sentence_id: str | None = None


@dataclass(frozen=True)
class Prediction:
    sentence_id: str
    score: float


@dataclass(frozen=True)
class Hyper:
    learning_rate: float = 0.05
    batch_size: int = 32
    epochs: int = 5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8


@dataclass
class ValidationMetrics:
    accuracy: float
    precision: float
    recall: float
    n_train: int
    n_validation: int
    final_loss: float

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "n_train": self.n_train,
            "n_validation": self.n_validation,
            "final_loss": self.final_loss,
        }


def _normalize_for_chars(text: str) -> str:
    return re.sub(r"\s+", " ", text.lower()).strip()


def words(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


class Featurizer:
    """Maps raw text to hashed feature indices; memoizes word-level hashes."""

    def __init__(self, config: FeatureConfig):
        self.config = config
        self._mask = config.dimension - 1
        self._word_cache: dict[str, int] = {}
        self._bigram_cache: dict[tuple[str, str], int] = {}
        # FNV is sequential, so the per-family prefix can be folded once.
        self._prefix: dict[str, int] = {}
        for family in config.families:
            h = FNV_OFFSET ^ (config.hash_seed & _U64)
            for byte in family.encode() + _SEP:
                h ^= byte
                h = (h * FNV_PRIME) & _U64
            self._prefix[family] = h

    def _finish(self, start: int, data: bytes) -> int:
        h = start
        for byte in data:
            h ^= byte
            h = (h * FNV_PRIME) & _U64
        return h & self._mask

    def _word_index(self, word: str) -> int:
        idx = self._word_cache.get(word)
        if idx is None:
            idx = self._finish(self._prefix["w1"], word.encode())
            self._word_cache[word] = idx
        return idx

    def _bigram_index(self, pair: tuple[str, str]) -> int:
        idx = self._bigram_cache.get(pair)
        if idx is None:
            idx = self._finish(self._prefix["w2"], f"{pair[0]} {pair[1]}".encode())
            self._bigram_cache[pair] = idx
        return idx

    def feature_counts(self, text: str) -> dict[int, int]:
        """Sparse index -> count vector; empty when the text yields no word tokens."""
        token_list = words(text)
        if not token_list:
            return {}
        counts: dict[int, int] = {}

        def bump(idx: int) -> None:
            counts[idx] = counts.get(idx, 0) + 1

        for word in token_list:
            bump(self._word_index(word))
        for pair in zip(token_list, token_list[1:]):
            bump(self._bigram_index(pair))
        chars = _normalize_for_chars(text)
        for n in _CHAR_NGRAM_SIZES:
            prefix = self._prefix[f"c{n}"]
            for i in range(len(chars) - n + 1):
                bump(self._finish(prefix, chars[i : i + n].encode()))
        return counts

    def feature_indices(self, text: str) -> np.ndarray:
        """Occurrence-level index array (repeats included); fast path for ASCII text."""
        token_list = words(text)
        if not token_list:
            return np.empty(0, dtype=np.int64)
        chars = _normalize_for_chars(text)
        word_idx = [self._word_index(w) for w in token_list]
        word_idx += [self._bigram_index(p) for p in zip(token_list, token_list[1:])]
        parts = [np.asarray(word_idx, dtype=np.int64)]
        if chars.isascii():
            arr = np.frombuffer(chars.encode(), dtype=np.uint8)
            for n in _CHAR_NGRAM_SIZES:
                if len(arr) < n:
                    continue
                window = np.lib.stride_tricks.sliding_window_view(arr, n).astype(np.uint64)
                h = np.full(window.shape[0], self._prefix[f"c{n}"], dtype=np.uint64)
                prime = np.uint64(FNV_PRIME)
                for k in range(n):
                    h = (h ^ window[:, k]) * prime
                parts.append((h & np.uint64(self._mask)).astype(np.int64))
        else:
            for n in _CHAR_NGRAM_SIZES:
                prefix = self._prefix[f"c{n}"]
                grams = [self._finish(prefix, chars[i : i + n].encode()) for i in range(len(chars) - n + 1)]
                parts.append(np.asarray(grams, dtype=np.int64))
        return np.concatenate(parts)


def featurize(text: str, config: FeatureConfig) -> dict[int, int]:
    """Sparse hashed-feature vector of ``text`` (index -> term count)."""
    return Featurizer(config).feature_counts(text)


@dataclass
class ClassifierModel:
    weight_vector: np.ndarray  # dense float64, length = config.dimension
    bias: float
    feature_config: FeatureConfig
    trained_on: int
    version: int = MODEL_FORMAT_VERSION
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.weight_vector)) or not math.isfinite(self.bias):
            raise ValueError("model weights must be finite")

    def sparse_weights(self) -> dict[int, float]:
        (nonzero,) = np.nonzero(self.weight_vector)
        return {int(i): float(self.weight_vector[i]) for i in nonzero}

    def to_bytes(self) -> bytes:
        meta = json.dumps(self.metadata, sort_keys=True, separators=(",", ":")).encode()
        (nonzero,) = np.nonzero(self.weight_vector)
        out = bytearray()
        out += MODEL_MAGIC
        out += struct.pack("<I", self.version)
        out += self.feature_config.content_hash()
        out += struct.pack("<Qq", self.feature_config.dimension, self.feature_config.hash_seed)
        out += struct.pack("<d", self.bias)
        out += struct.pack("<Q", self.trained_on)
        out += struct.pack("<I", len(meta)) + meta
        out += struct.pack("<Q", len(nonzero))
        for i in nonzero:
            out += struct.pack("<Qd", int(i), float(self.weight_vector[i]))
        return bytes(out)

    def save(self, path: Path | str) -> None:
        Path(path).write_bytes(self.to_bytes())

    def model_hash(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "ClassifierModel":
        view = memoryview(blob)
        if bytes(view[:4]) != MODEL_MAGIC:
            raise ValueError("not a classifier model file (bad magic)")
        offset = 4
        (version,) = struct.unpack_from("<I", view, offset)
        offset += 4
        if version != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {version}")
        config_hash = bytes(view[offset : offset + 32])
        offset += 32
        dimension, hash_seed = struct.unpack_from("<Qq", view, offset)
        offset += 16
        config = FeatureConfig(dimension=dimension, hash_seed=hash_seed)
        if config.content_hash() != config_hash:
            raise ValueError("feature-config hash mismatch: model and featurizer have drifted")
        (bias,) = struct.unpack_from("<d", view, offset)
        offset += 8
        (trained_on,) = struct.unpack_from("<Q", view, offset)
        offset += 8
        (meta_len,) = struct.unpack_from("<I", view, offset)
        offset += 4
        metadata = json.loads(bytes(view[offset : offset + meta_len]) or b"{}")
        offset += meta_len
        (n_weights,) = struct.unpack_from("<Q", view, offset)
        offset += 8
        weights = np.zeros(dimension, dtype=np.float64)
        for _ in range(n_weights):
            idx, value = struct.unpack_from("<Qd", view, offset)
            offset += 16
            weights[idx] = value
        return cls(weights, bias, config, trained_on, version, metadata)

    @classmethod
    def load(cls, path: Path | str) -> "ClassifierModel":
        return cls.from_bytes(Path(path).read_bytes())

    def export_text(self) -> str:
        lines = [
            f"format_version\t{self.version}",
            f"dimension\t{self.feature_config.dimension}",
            f"hash_seed\t{self.feature_config.hash_seed}",
            f"families\t{','.join(self.feature_config.families)}",
            f"trained_on\t{self.trained_on}",
            f"bias\t{self.bias!r}",
            f"metadata\t{json.dumps(self.metadata, sort_keys=True)}",
        ]
        (nonzero,) = np.nonzero(self.weight_vector)
        for i in nonzero:
            lines.append(f"{int(i)}\t{float(self.weight_vector[i])!r}")
        return "\n".join(lines) + "\n"


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _segment_sums(weights: np.ndarray, rows: Sequence[np.ndarray]) -> np.ndarray:
    lengths = np.array([len(r) for r in rows], dtype=np.int64)
    if lengths.sum() == 0:
        return np.zeros(len(rows))
    cat = np.concatenate([r for r in rows if len(r)]) if (lengths == 0).any() else np.concatenate(rows)
    seg = np.repeat(np.arange(len(rows)), lengths)
    return np.bincount(seg, weights=weights[cat], minlength=len(rows))


def logistic_loss_and_grad(
    weights: np.ndarray,
    bias: float,
    rows: Sequence[np.ndarray],
    labels: np.ndarray,
    sample_weights: np.ndarray | None = None,
) -> tuple[float, np.ndarray, float]:
    """Mean logistic loss and its analytic gradient over occurrence-index rows.

    Feature values are term counts, represented as repeated indices in each row.
    """
    n = len(rows)
    if sample_weights is None:
        sample_weights = np.ones(n)
    z = _segment_sums(weights, rows) + bias
    # log(1 + e^z) - y*z, computed stably.
    losses = np.logaddexp(0.0, z) - labels * z
    loss = float(np.dot(sample_weights, losses) / n)
    err = sample_weights * (_sigmoid(z) - labels) / n
    grad_w = np.zeros_like(weights)
    lengths = np.array([len(r) for r in rows], dtype=np.int64)
    if lengths.sum():
        cat = np.concatenate([r for r in rows if len(r)]) if (lengths == 0).any() else np.concatenate(rows)
        per_occurrence = np.repeat(err, lengths)
        np.add.at(grad_w, cat, per_occurrence)
    grad_b = float(err.sum())
    return loss, grad_w, grad_b


def split_train_validation(
    data: Sequence[LabeledSentence], split_ratio: float, seed: int
) -> tuple[list[LabeledSentence], list[LabeledSentence]]:
    """Deterministic shuffled split; first ``split_ratio`` of the shuffle trains."""
    if not 0.0 < split_ratio < 1.0:
        raise ValueError(f"split_ratio must be in (0, 1), got {split_ratio}")
    order = list(range(len(data)))
    random.Random(seed).shuffle(order)
    n_train = int(len(data) * split_ratio)
    train_idx, val_idx = order[:n_train], order[n_train:]
    return [data[i] for i in train_idx], [data[i] for i in val_idx]


def train(
    data: Sequence[LabeledSentence],
    split_ratio: float = 0.9,
    seed: int = 0,
    config: FeatureConfig | None = None,
    hyper: Hyper | None = None,
    class_weighting: bool = False,
) -> tuple[ClassifierModel, ValidationMetrics]:
    """Train the logistic model; deterministic given (data order, seed, hyper)."""
    if config is None:
        config = FeatureConfig()
    if hyper is None:
        hyper = Hyper()
    labels_present = {item.label for item in data}
    if labels_present != {True, False}:
        raise TrainingError("training data must contain both positive and negative examples")

    train_set, val_set = split_train_validation(data, split_ratio, seed)

    featurizer = Featurizer(config)
    rows = [featurizer.feature_indices(item.text) for item in train_set]
    y = np.array([1.0 if item.label else 0.0 for item in train_set])

    if class_weighting:
        n_pos = float(y.sum())
        n_neg = float(len(y) - y.sum())
        w_pos = len(y) / (2.0 * n_pos)
        w_neg = len(y) / (2.0 * n_neg)
        sample_weights = np.where(y == 1.0, w_pos, w_neg)
    else:
        sample_weights = np.ones(len(y))

    dim = config.dimension
    weights = np.zeros(dim)
    bias = 0.0
    m = np.zeros(dim)
    v = np.zeros(dim)
    m_b = 0.0
    v_b = 0.0
    step = 0
    b1, b2, eps = hyper.adam_beta1, hyper.adam_beta2, hyper.adam_epsilon

    rng = random.Random(seed + 1)
    order = list(range(len(train_set)))
    last_loss = float("nan")
    for _ in range(hyper.epochs):
        rng.shuffle(order)
        epoch_loss = 0.0
        n_batches = 0
        for batch_start in range(0, len(order), hyper.batch_size):
            batch = order[batch_start : batch_start + hyper.batch_size]
            batch_rows = [rows[i] for i in batch]
            loss, grad_w, grad_b = logistic_loss_and_grad(
                weights, bias, batch_rows, y[batch], sample_weights[batch]
            )
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss at step {step}: {loss}")
            epoch_loss += loss
            n_batches += 1
            step += 1
            lengths = np.array([len(r) for r in batch_rows], dtype=np.int64)
            if lengths.sum():
                cat = np.concatenate([r for r in batch_rows if len(r)])
                touched = np.unique(cat)
                g = grad_w[touched]
                m[touched] = b1 * m[touched] + (1.0 - b1) * g
                v[touched] = b2 * v[touched] + (1.0 - b2) * g * g
                m_hat = m[touched] / (1.0 - b1**step)
                v_hat = v[touched] / (1.0 - b2**step)
                weights[touched] -= hyper.learning_rate * m_hat / (np.sqrt(v_hat) + eps)
            m_b = b1 * m_b + (1.0 - b1) * grad_b
            v_b = b2 * v_b + (1.0 - b2) * grad_b * grad_b
            bias -= hyper.learning_rate * (m_b / (1.0 - b1**step)) / (math.sqrt(v_b / (1.0 - b2**step)) + eps)
        last_loss = epoch_loss / max(n_batches, 1)

    metadata = {
        "seed": seed,
        "split_ratio": split_ratio,
        "learning_rate": hyper.learning_rate,
        "batch_size": hyper.batch_size,
        "epochs": hyper.epochs,
        "class_weighting": class_weighting,
    }
    model = ClassifierModel(weights, bias, config, trained_on=len(train_set), metadata=metadata)

    val_rows = [featurizer.feature_indices(item.text) for item in val_set]
    metrics = _evaluate(model, val_rows, [item.label for item in val_set], len(train_set), last_loss)
    return model, metrics


def _evaluate(
    model: ClassifierModel,
    rows: Sequence[np.ndarray],
    labels: Sequence[bool],
    n_train: int,
    final_loss: float,
) -> ValidationMetrics:
    if not rows:
        return ValidationMetrics(0.0, 0.0, 0.0, n_train, 0, final_loss)
    z = _segment_sums(model.weight_vector, rows) + model.bias
    predicted = _sigmoid(z) >= 0.5
    actual = np.array(labels, dtype=bool)
    tp = int(np.sum(predicted & actual))
    fp = int(np.sum(predicted & ~actual))
    fn = int(np.sum(~predicted & actual))
    accuracy = float(np.mean(predicted == actual))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return ValidationMetrics(accuracy, precision, recall, n_train, len(rows), final_loss)


def score_texts(model: ClassifierModel, texts: Sequence[str], featurizer: Featurizer | None = None) -> np.ndarray:
    """Sigmoid scores for a batch of raw texts, in input order."""
    if featurizer is None:
        featurizer = Featurizer(model.feature_config)
    rows = [featurizer.feature_indices(text) for text in texts]
    z = _segment_sums(model.weight_vector, rows) + model.bias
    return _sigmoid(z)


def score(
    model: ClassifierModel,
    sentences: Iterable[tuple[str, str]],
    batch_size: int = 4096,
) -> Iterator[Prediction]:
    """Score (sentence_id, text) pairs; output order matches input order."""
    featurizer = Featurizer(model.feature_config)
    batch: list[tuple[str, str]] = []

    def flush() -> Iterator[Prediction]:
        if not batch:
            return
        scores = score_texts(model, [text for _, text in batch], featurizer)
        for (sid, _), value in zip(batch, scores):
            yield Prediction(sid, float(value))
        batch.clear()

    for pair in sentences:
        batch.append(pair)
        if len(batch) >= batch_size:
            yield from flush()
    yield from flush()


def rank_descending(predictions: Iterable[Prediction]) -> list[Prediction]:
    """Sort by score descending; ties broken by sentence_id ascending."""
    return sorted(predictions, key=lambda p: (-p.score, p.sentence_id))


def precision_at_k(ranked: Sequence[Prediction], truth: Mapping[str, bool], k: int) -> float:
    """Fraction of true positives among the K highest-ranked predictions."""
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    if k > len(ranked):
        raise ValueError(f"k={k} exceeds ranking length {len(ranked)}")
    positives = 0
    for prediction in ranked[:k]:
        if prediction.sentence_id not in truth:
            raise ValueError(f"no ground-truth label for sentence {prediction.sentence_id!r}")
        if truth[prediction.sentence_id]:
            positives += 1
    return positives / k
