"""Seeded synthetic corpora for end-to-end experiments.

The pool is built around a deliberate register shift. Seed positives are
report-style sentences over a *core* finding vocabulary; pool positives are
literature-style sentences naming *novel* findings the initial classifier has
never seen, so at first their rank rests on report-register context words
alone.

Pool sentences are organized in strata of decreasing context-word density and
decreasing ambiguity. Ambiguity is modeled as exact textual twins of true
positives labeled negative (the same sentence judged differently in a
different document context, e.g. quoted inside methods prose or a figure
caption); being feature-identical, twins can never be separated by the
classifier and fix each stratum's precision ceiling. Because a stratum's
context words absorb negative updates in proportion to its twin density, the
strata reorder themselves by cleanliness as rounds progress: every mining
round serves the next-cleanest stratum, so precision at the top ratchets
upward while each round still finds its false-positive quota nearby.
"""

from __future__ import annotations

import json
import random
import time
from dataclasses import dataclass
from pathlib import Path

from .bootstrap import (
    AnnotationRecord,
    BootstrapConfig,
    BootstrapSession,
    simulate_annotator,
)
from .classifier import LabeledSentence

FINDINGS_CORE = [
    "consolidation",
    "pleural effusion",
    "ground-glass opacity",
    "pulmonary edema",
    "interlobular septal thickening",
    "air bronchogram",
    "bilateral infiltrates",
    "lymphadenopathy",
    "atelectasis",
    "pneumothorax",
    "pericardial effusion",
    "patchy shadows",
]

# Novel vocabulary planted in the pool; avoids sharing words (and, as far as
# the domain allows, character n-grams) with the core seed vocabulary, so the
# initial classifier genuinely has not seen it.
FINDINGS_NOVEL = [
    "crazy-paving pattern",
    "halo sign",
    "mosaic attenuation",
    "gas trapping",
    "tree-in-bud micronodules",
    "subsolid nodularity",
    "reversed halo distribution",
    "centrilobular micronodules",
    "airway wall irregularity",
    "parenchymal bands",
    "architectural distortion",
    "traction dilatation",
    "cavitary changes",
    "curvilinear lines",
    "perivascular cuffing",
    "mosaic perfusion",
    "fibrotic streaks",
    "cystic clustering",
    "reticulonodular haze",
    "apical capping",
    "hilar enlargement",
    "costophrenic blunting",
    "perihilar flaring",
    "basilar collapse",
]

QUALITY_PHRASES = [
    "consistent technical quality",
    "stable acquisition settings",
    "uniform calibration results",
    "reproducible positioning accuracy",
    "satisfactory detector performance",
    "acceptable noise levels",
    "adequate inspiratory effort",
    "reliable reconstruction kernels",
    "shorter reading times",
    "lower radiation dose",
    "fewer repeat acquisitions",
    "higher interobserver agreement",
]

LOCATIONS = [
    "in the right lower lobe",
    "in both lungs",
    "in the left upper lobe",
    "with peripheral distribution",
    "in bilateral lower lobes",
    "predominantly involving the upper lungs",
    "along the bronchovascular bundle",
    "in the lingula",
    "near the pleura",
    "in the right middle lobe",
]

MODALITIES = [
    "Chest CT",
    "HRCT",
    "Chest radiography",
    "Computed tomography",
    "High-resolution CT",
    "The chest X-ray",
    "Follow-up chest CT",
]

REPORT_TEMPLATES = [
    "There is {finding} {location}.",
    "Impression: {finding} {location}, unchanged from the prior examination.",
    "{modality} of the chest demonstrates {finding} and {finding2}.",
    "Interval development of {finding} {location}.",
    "Stable {finding2} with new {finding} {location}.",
    "Findings are consistent with {finding} accompanied by {finding2}.",
    "Small {finding} is seen {location}.",
    "Persistent {finding} with adjacent {finding2} {location}.",
]

GENERIC_TEMPLATES = [
    "The basic reproduction number was estimated at 2.{n} from contact-tracing data.",
    "Social distancing measures reduced transmission during week {n}.",
    "Serum samples were tested by enzyme-linked immunosorbent assay.",
    "The median incubation period was {n} days in this cohort.",
    "Public health authorities issued revised quarantine guidance.",
    "Vaccine candidates entered phase {n} clinical trials this quarter.",
    "The survey collected demographic information from {n} households.",
    "Genomic sequencing identified {n} distinct viral lineages.",
    "Hand hygiene compliance improved after the training intervention.",
    "Travel restrictions were associated with delayed epidemic onset.",
    "Healthcare workers completed training on personal protective equipment.",
    "The case fatality ratio varied across age groups in {n} provinces.",
    "Antibody titers declined over {n} weeks of follow-up.",
    "School closures affected an estimated {n} million students.",
    "Contact tracing identified {n} secondary cases per index case.",
    "The preprint was revised after peer review comments.",
    "Supply chains for reagents were disrupted for {n} weeks.",
    "Wastewater surveillance detected viral fragments in {n} districts.",
    "Economic support packages targeted affected small businesses.",
    "Mathematical models projected the epidemic peak within {n} weeks.",
    "Symptom onset preceded laboratory confirmation by {n} days.",
    "Telemedicine consultations increased during the lockdown period.",
    "The cohort enrolled {n} adults across three provinces.",
    "Sequence alignment revealed conserved regions in the spike gene.",
]


def _fill(template: str, rng: random.Random, slot_vocab: list[str] | None = None) -> str:
    text = template
    if "{modality}" in text:
        text = text.replace("{modality}", rng.choice(MODALITIES))
    for placeholder in ("{finding}", "{finding2}"):
        if placeholder in text:
            vocab = slot_vocab if slot_vocab else FINDINGS_CORE
            text = text.replace(placeholder, rng.choice(vocab))
    if "{location}" in text:
        text = text.replace("{location}", rng.choice(LOCATIONS))
    while "{n}" in text:
        text = text.replace("{n}", str(rng.randint(2, 90)), 1)
    return text


def make_seed_data(n_pos: int = 2350, n_neg: int = 3000, seed: int = 0) -> list[LabeledSentence]:
    """Report-register positives over the core vocabulary, generic negatives."""
    rng = random.Random(seed)
    data: list[LabeledSentence] = []
    for i in range(n_pos):
        text = _fill(rng.choice(REPORT_TEMPLATES), rng, FINDINGS_CORE)
        data.append(LabeledSentence(text=text, label=True, source="seed_positive", sentence_id=f"seedp{i:05d}"))
    for i in range(n_neg):
        text = _fill(rng.choice(GENERIC_TEMPLATES), rng)
        data.append(LabeledSentence(text=text, label=False, source="seed_negative", sentence_id=f"seedn{i:05d}"))
    return data


# Each stratum owns an exclusive slice of report-register context (modality
# phrases, locations, framing words the seed classifier was trained on).
# Until a stratum is served, none of its context words appear in any label,
# so its rank level holds exactly at its seed-trained hotness; the hotness
# counts (4 > 3 > 2 > 1 hot elements) therefore pin the serving order to
# stratum 0, 1, 2, 3 across rounds regardless of what earlier rounds taught.
_STRATUM_MODALITIES = [
    ("Chest CT", "HRCT"),
    ("Chest radiography", "Computed tomography"),
    ("High-resolution CT", "The chest X-ray"),
    ("Follow-up chest CT",),
]
_STRATUM_LOCATIONS = [
    ("in the right lower lobe", "in both lungs", "in bilateral lower lobes"),
    ("in the left upper lobe", "near the pleura"),
    (),
    (),
]


def _pool_positive(rng: random.Random, stratum: int, slots: list[str]) -> str:
    """Literature-register sentence; context hotness decreases per stratum."""
    modality = rng.choice(_STRATUM_MODALITIES[stratum])
    a, b = rng.sample(slots, 2)
    if rng.random() < 0.3:
        b = f"no {b}"
    if stratum == 0:
        return f"{modality} demonstrates persistent {a} and {b} {rng.choice(_STRATUM_LOCATIONS[0])}."
    if stratum == 1:
        return f"Impression on {modality[0].lower()}{modality[1:]}: {a} and {b} {rng.choice(_STRATUM_LOCATIONS[1])}."
    if stratum == 2:
        return f"{modality} findings were consistent with {a} and {b}."
    return f"On day {rng.randint(2, 60)}, {modality[0].lower()}{modality[1:]} showed {a} and {b}."


@dataclass(frozen=True)
class PoolSpec:
    """Stratum sizes include ambiguous twins; each size exceeds the label depth
    a 400-negative quota implies at the stratum's twin rate, so a round's
    consumption stays inside its stratum."""

    n_sentences: int = 50_000
    stratum_sizes: tuple[int, ...] = (1400, 1900, 2900, 700)
    ambiguity: tuple[float, ...] = (0.90, 0.50, 0.25, 0.04)
    seed: int = 0


def make_pool(spec: PoolSpec | None = None) -> tuple[dict[str, str], dict[str, bool]]:
    """Unlabeled pool plus ground truth; ids are shuffled but deterministic."""
    if spec is None:
        spec = PoolSpec()
    rng = random.Random(spec.seed)
    entries: list[tuple[str, bool]] = []

    for stratum, size in enumerate(spec.stratum_sizes):
        twin_rate = spec.ambiguity[stratum]
        produced = 0
        while produced < size:
            text = _pool_positive(rng, stratum, FINDINGS_NOVEL)
            entries.append((text, True))
            produced += 1
            if produced < size and rng.random() < twin_rate:
                entries.append((text, False))
                produced += 1

    n_generic = spec.n_sentences - len(entries)
    if n_generic < 0:
        raise ValueError("pool spec exceeds n_sentences")
    for _ in range(n_generic):
        entries.append((_fill(rng.choice(GENERIC_TEMPLATES), rng), False))

    rng.shuffle(entries)
    pool: dict[str, str] = {}
    truth: dict[str, bool] = {}
    for i, (text, label) in enumerate(entries):
        sid = f"pool{i:06d}"
        pool[sid] = text
        truth[sid] = label
    return pool, truth


def make_corpus_tree(
    directory: Path | str,
    n_articles: int = 2081,
    target_sentences: int = 360_000,
    seed: int = 0,
    undated_share: float = 0.02,
    predate_share: float = 0.03,
) -> int:
    """Write a paper-scale JSON corpus under ``directory``; returns sentences written.

    Most articles are dated after 2019-11-30 so a default date filter keeps them;
    a small slice is earlier or undated to exercise filtering.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    per_article = max(1, target_sentences // n_articles)
    written = 0
    for a in range(n_articles):
        article_id = f"synth{a:05d}"
        if rng.random() < undated_share:
            publish_date = None
        elif rng.random() < predate_share:
            publish_date = f"2019-{rng.randint(1, 10):02d}-{rng.randint(1, 28):02d}"
        else:
            month = rng.randint(12, 23)  # Dec 2019 .. Nov 2020
            year = 2019 + (month - 1) // 12
            publish_date = f"{year}-{(month - 1) % 12 + 1:02d}-{rng.randint(1, 28):02d}"
        sentences: list[str] = []
        for _ in range(per_article):
            roll = rng.random()
            if roll < 0.02:
                sentences.append(_fill(rng.choice(REPORT_TEMPLATES), rng, FINDINGS_CORE))
            elif roll < 0.05:
                sentences.append(_pool_positive(rng, rng.randrange(4), FINDINGS_NOVEL))
            elif roll < 0.07:
                q1, q2 = rng.sample(QUALITY_PHRASES, 2)
                sentences.append(
                    f"Imaging audits found {q1} and {q2} across {rng.randint(3, 40)} units."
                )
            else:
                sentences.append(_fill(rng.choice(GENERIC_TEMPLATES), rng))
        written += len(sentences)
        paragraphs = [" ".join(sentences[i : i + 5]) for i in range(0, len(sentences), 5)]
        doc = {
            "article_id": article_id,
            "title": f"Synthetic study {a}",
            "paragraphs": paragraphs,
        }
        if publish_date is not None:
            doc["publish_date"] = publish_date
        with open(directory / f"{article_id}.json", "w", encoding="utf-8") as handle:
            json.dump(doc, handle, ensure_ascii=False)
    return written


@dataclass
class TrendResult:
    precisions: list[float]
    history: list[dict]
    labels_per_round: list[int]
    runtime_seconds: float
    session_dir: str

    def as_dict(self) -> dict:
        return {
            "precisions": self.precisions,
            "history": self.history,
            "labels_per_round": self.labels_per_round,
            "runtime_seconds": self.runtime_seconds,
            "session_dir": self.session_dir,
        }


def run_trend_experiment(
    workdir: Path | str,
    n_pool: int = 50_000,
    rounds: int = 4,
    seed: int = 0,
    config: BootstrapConfig | None = None,
    noise: float = 0.0,
) -> TrendResult:
    """Full mining loop against the synthetic pool with an oracle annotator.

    Labels queue items front-first each round until the false-positive quota
    auto-closes the round (or the pool runs dry), for ``rounds`` rounds.
    """
    started = time.monotonic()
    workdir = Path(workdir)
    if config is None:
        config = BootstrapConfig(train_seed=seed)
    seed_data = make_seed_data(seed=seed)
    pool, truth = make_pool(PoolSpec(n_sentences=n_pool, seed=seed + 1))
    annotator = simulate_annotator(truth, noise=noise, seed=seed + 2)

    session = BootstrapSession.create(workdir, seed_data, pool, config)
    labels_per_round: list[int] = []
    for _ in range(rounds):
        if not session.state.pool:
            break
        session.open_round()
        labels = 0
        while session.state.round_open:
            if not session.state.open_queue:
                session.close_round()
                break
            sid = session.state.open_queue[0]
            record = AnnotationRecord(
                sentence_id=sid,
                label=annotator(sid),
                annotator_id="oracle",
                timestamp=time.time(),
            )
            session.submit(record)
            labels += 1
        labels_per_round.append(labels)

    history = [entry.as_dict() for entry in session.state.history]
    return TrendResult(
        precisions=[entry["precision_at_k"] for entry in history],
        history=history,
        labels_per_round=labels_per_round,
        runtime_seconds=time.monotonic() - started,
        session_dir=str(workdir),
    )
