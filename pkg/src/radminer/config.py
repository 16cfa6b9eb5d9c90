"""Single declarative run configuration, one section per pipeline stage.

Every CLI verb and the HTTP service read the same YAML document; settings not
present fall back to the defaults below. All randomness in a run flows from
``run.seed``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

import yaml

from .bootstrap import BootstrapConfig
from .classifier import FeatureConfig, Hyper
from .corpus import CorpusFilter, parse_publish_date

DEFAULT_CONFIG_YAML = """\
# radminer run configuration. One file governs every stage; all randomness
# flows from run.seed. A transformer-backed classifier plugin would typically
# train with learning_rate 2.0e-5 and batch_size 4; the bundled linear model
# uses the defaults below instead.
run:
  seed: 0
  out_dir: runs/out

corpus:
  min_publish_date: 2019-11-30   # exclusive lower bound
  include_undated: false

classifier:
  dimension: 262144              # power of two
  hash_seed: 0
  learning_rate: 0.05
  batch_size: 32
  epochs: 5
  split_ratio: 0.9
  class_weighting: false
  decision_threshold: 0.5

bootstrap:
  queue_size: 100
  fp_quota: 400
  max_iterations: 4

report:
  min_frequency: 3
  exemplar_cap: 5

synth:
  pool_sentences: 50000
  corpus_articles: 2081
  corpus_sentences: 360000
"""


@dataclass
class RunConfig:
    seed: int = 0
    out_dir: Path = Path("runs/out")
    min_publish_date: date | None = date(2019, 11, 30)
    include_undated: bool = False
    dimension: int = 1 << 18
    hash_seed: int = 0
    learning_rate: float = 0.05
    batch_size: int = 32
    epochs: int = 5
    split_ratio: float = 0.9
    class_weighting: bool = False
    decision_threshold: float = 0.5
    queue_size: int = 100
    fp_quota: int = 400
    max_iterations: int = 4
    min_frequency: int = 3
    exemplar_cap: int = 5
    synth_pool_sentences: int = 50_000
    synth_corpus_articles: int = 2081
    synth_corpus_sentences: int = 360_000
    raw: dict = field(default_factory=dict)

    def corpus_filter(self) -> CorpusFilter:
        return CorpusFilter(min_publish_date=self.min_publish_date, include_undated=self.include_undated)

    def feature_config(self) -> FeatureConfig:
        return FeatureConfig(dimension=self.dimension, hash_seed=self.hash_seed)

    def hyper(self) -> Hyper:
        return Hyper(learning_rate=self.learning_rate, batch_size=self.batch_size, epochs=self.epochs)

    def bootstrap_config(self) -> BootstrapConfig:
        return BootstrapConfig(
            queue_size=self.queue_size,
            fp_quota=self.fp_quota,
            max_iterations=self.max_iterations,
            split_ratio=self.split_ratio,
            train_seed=self.seed,
            class_weighting=self.class_weighting,
            hyper=self.hyper(),
            feature=self.feature_config(),
        )

    def snapshot(self) -> dict:
        return {
            "run": {"seed": self.seed, "out_dir": str(self.out_dir)},
            "corpus": {
                "min_publish_date": self.min_publish_date.isoformat() if self.min_publish_date else None,
                "include_undated": self.include_undated,
            },
            "classifier": {
                "dimension": self.dimension,
                "hash_seed": self.hash_seed,
                "learning_rate": self.learning_rate,
                "batch_size": self.batch_size,
                "epochs": self.epochs,
                "split_ratio": self.split_ratio,
                "class_weighting": self.class_weighting,
                "decision_threshold": self.decision_threshold,
            },
            "bootstrap": {
                "queue_size": self.queue_size,
                "fp_quota": self.fp_quota,
                "max_iterations": self.max_iterations,
            },
            "report": {"min_frequency": self.min_frequency, "exemplar_cap": self.exemplar_cap},
            "synth": {
                "pool_sentences": self.synth_pool_sentences,
                "corpus_articles": self.synth_corpus_articles,
                "corpus_sentences": self.synth_corpus_sentences,
            },
        }


def _parse_date(value) -> date | None:
    if value is None or value == "":
        return None
    if isinstance(value, date):
        return value
    return parse_publish_date(str(value))


def load_config(path: Path | str | None = None, overrides: dict | None = None) -> RunConfig:
    """Load YAML config; missing file or sections fall back to defaults."""
    raw: dict = {}
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        raw = yaml.safe_load(text) or {}
        if not isinstance(raw, dict):
            raise ValueError(f"config root must be a mapping: {path}")
    config = RunConfig(raw=raw)

    run = raw.get("run", {})
    config.seed = int(run.get("seed", config.seed))
    config.out_dir = Path(run.get("out_dir", config.out_dir))

    corpus = raw.get("corpus", {})
    if "min_publish_date" in corpus:
        config.min_publish_date = _parse_date(corpus["min_publish_date"])
    config.include_undated = bool(corpus.get("include_undated", config.include_undated))

    cls = raw.get("classifier", {})
    config.dimension = int(cls.get("dimension", config.dimension))
    config.hash_seed = int(cls.get("hash_seed", config.hash_seed))
    config.learning_rate = float(cls.get("learning_rate", config.learning_rate))
    config.batch_size = int(cls.get("batch_size", config.batch_size))
    config.epochs = int(cls.get("epochs", config.epochs))
    config.split_ratio = float(cls.get("split_ratio", config.split_ratio))
    config.class_weighting = bool(cls.get("class_weighting", config.class_weighting))
    config.decision_threshold = float(cls.get("decision_threshold", config.decision_threshold))

    boot = raw.get("bootstrap", {})
    config.queue_size = int(boot.get("queue_size", config.queue_size))
    config.fp_quota = int(boot.get("fp_quota", config.fp_quota))
    config.max_iterations = int(boot.get("max_iterations", config.max_iterations))

    report = raw.get("report", {})
    config.min_frequency = int(report.get("min_frequency", config.min_frequency))
    config.exemplar_cap = int(report.get("exemplar_cap", config.exemplar_cap))

    synth = raw.get("synth", {})
    config.synth_pool_sentences = int(synth.get("pool_sentences", config.synth_pool_sentences))
    config.synth_corpus_articles = int(synth.get("corpus_articles", config.synth_corpus_articles))
    config.synth_corpus_sentences = int(synth.get("corpus_sentences", config.synth_corpus_sentences))

    for key, value in (overrides or {}).items():
        if value is not None:
            setattr(config, key, value)
    return config
