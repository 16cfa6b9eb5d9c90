"""Command-line entry point: one verb per pipeline stage.

All verbs accept ``--config`` (the single YAML run configuration), ``--seed``
(overriding ``run.seed``), and ``--out`` (overriding ``run.out_dir``).
"""

from __future__ import annotations

import argparse
import json
import sys
import uuid
from pathlib import Path

from . import classifier, report as report_mod, synth
from .bootstrap import BootstrapError, BootstrapSession, replay_events
from .config import DEFAULT_CONFIG_YAML, RunConfig, load_config
from .corpus import CorpusError, IngestReport, ingest_corpus, parse_publish_date, segment_sentences
from .npx import aggregate_phrases
from .report import PipelineRun, ReportError


def _load(args: argparse.Namespace) -> RunConfig:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        overrides["out_dir"] = Path(args.out)
    return load_config(args.config, overrides)


def _run_ledger(config: RunConfig) -> tuple[PipelineRun, Path]:
    config.out_dir.mkdir(parents=True, exist_ok=True)
    path = config.out_dir / "run.json"
    run = PipelineRun.load_or_create(path, run_id=uuid.uuid4().hex[:12], config_snapshot=config.snapshot())
    return run, path


def cmd_init_config(args: argparse.Namespace) -> int:
    target = Path(args.path)
    if target.exists() and not args.force:
        print(f"refusing to overwrite existing {target} (use --force)", file=sys.stderr)
        return 1
    target.write_text(DEFAULT_CONFIG_YAML, encoding="utf-8")
    print(f"wrote default configuration to {target}")
    return 0


def cmd_ingest(args: argparse.Namespace) -> int:
    config = _load(args)
    corpus_filter = config.corpus_filter()
    if args.min_date:
        corpus_filter = type(corpus_filter)(
            min_publish_date=parse_publish_date(args.min_date),
            include_undated=corpus_filter.include_undated,
        )
    run, run_path = _run_ledger(config)
    ingest_report = IngestReport()
    store_path = config.out_dir / "sentences.jsonl"
    try:
        with open(store_path, "w", encoding="utf-8") as handle:
            for article in ingest_corpus(args.root, corpus_filter, ingest_report):
                for sentence in segment_sentences(article):
                    row = {
                        "sentence_id": sentence.sid,
                        "article_id": sentence.article_id,
                        "paragraph": sentence.paragraph,
                        "index": sentence.index,
                        "text": sentence.text,
                        "start": sentence.start,
                        "end": sentence.end,
                    }
                    handle.write(json.dumps(row, ensure_ascii=False) + "\n")
                    ingest_report.sentences_emitted += 1
    except CorpusError as exc:
        print(f"ingest failed: {exc}", file=sys.stderr)
        return 1
    (config.out_dir / "ingest_report.json").write_text(
        json.dumps(ingest_report.as_dict(), indent=2) + "\n", encoding="utf-8"
    )
    run.mark(
        "ingest",
        articles_kept=ingest_report.articles_kept,
        sentences=ingest_report.sentences_emitted,
        files_skipped=ingest_report.files_skipped,
    )
    run.save(run_path)
    print(
        f"ingested {ingest_report.articles_kept} articles "
        f"({ingest_report.sentences_emitted} sentences, {ingest_report.files_skipped} files skipped) "
        f"-> {store_path}"
    )
    return 0


def _read_labeled(path: Path) -> list[classifier.LabeledSentence]:
    data = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            data.append(
                classifier.LabeledSentence(
                    text=row["text"],
                    label=bool(row["label"]),
                    source=row.get("source", "seed_positive"),
                    sentence_id=row.get("sentence_id"),
                )
            )
    return data


def cmd_train(args: argparse.Namespace) -> int:
    config = _load(args)
    run, run_path = _run_ledger(config)
    data = _read_labeled(Path(args.data))
    try:
        model, metrics = classifier.train(
            data,
            split_ratio=config.split_ratio,
            seed=config.seed,
            config=config.feature_config(),
            hyper=config.hyper(),
            class_weighting=config.class_weighting,
        )
    except classifier.TrainingError as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        return 1
    model_path = config.out_dir / "model.bin"
    model.save(model_path)
    (config.out_dir / "model.txt").write_text(model.export_text(), encoding="utf-8")
    (config.out_dir / "train_metrics.json").write_text(
        json.dumps(metrics.as_dict(), indent=2) + "\n", encoding="utf-8"
    )
    run.mark("train", model_hash=model.model_hash(), accuracy=metrics.accuracy)
    run.save(run_path)
    print(
        f"trained on {metrics.n_train} examples "
        f"(val accuracy {metrics.accuracy:.4f}, precision {metrics.precision:.4f}, recall {metrics.recall:.4f}) "
        f"-> {model_path}"
    )
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    config = _load(args)
    run, run_path = _run_ledger(config)
    model = classifier.ClassifierModel.load(args.model or config.out_dir / "model.bin")
    store_path = Path(args.sentences or config.out_dir / "sentences.jsonl")
    predictions_path = config.out_dir / "predictions.tsv"
    count = 0
    with open(predictions_path, "w", encoding="utf-8") as out:
        out.write("sentence_id\tscore\n")
        pairs = ((r.sentence_id, r.text) for r in report_mod.read_sentence_store(store_path))
        for prediction in classifier.score(model, pairs):
            out.write(f"{prediction.sentence_id}\t{prediction.score:.10f}\n")
            count += 1
    run.mark("score", sentences=count)
    run.save(run_path)
    print(f"scored {count} sentences -> {predictions_path}")
    return 0


def cmd_bootstrap_serve(args: argparse.Namespace) -> int:
    config = _load(args)
    state_dir = Path(args.state_dir or config.out_dir / "bootstrap")
    if args.init:
        seed_data = _read_labeled(Path(args.seed_data))
        pool = {
            r.sentence_id: r.text
            for r in report_mod.read_sentence_store(Path(args.pool or config.out_dir / "sentences.jsonl"))
        }
        session = BootstrapSession.create(state_dir, seed_data, pool, config.bootstrap_config())
        print(f"initialized bootstrap session at {state_dir} (t=0)")
    else:
        session = BootstrapSession.open(state_dir)
        print(f"loaded bootstrap session at {state_dir} (t={session.state.iteration})")

    if args.open_round and not session.state.round_open:
        session.open_round()
        print(f"opened annotation round (queue of {len(session.state.open_queue)})")

    if args.apply_labels:
        applied = 0
        with open(args.apply_labels, encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                row = json.loads(line)
                from .bootstrap import AnnotationRecord

                record = AnnotationRecord(
                    sentence_id=row["sentence_id"],
                    label=row["label"] == "positive" if isinstance(row["label"], str) else bool(row["label"]),
                    annotator_id=row.get("annotator_id", "cli"),
                    timestamp=float(row.get("timestamp", 0.0)),
                )
                session.submit(record)
                applied += 1
        print(f"applied {applied} labels (t={session.state.iteration}, fp={session.state.fp_collected})")
        return 0

    if args.no_serve:
        return 0

    import uvicorn

    from .api import create_app

    app = create_app(session, report_path=args.report or config.out_dir / "report.json")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_extract(args: argparse.Namespace) -> int:
    config = _load(args)
    run, run_path = _run_ledger(config)
    store_path = Path(args.sentences or config.out_dir / "sentences.jsonl")
    predictions_path = Path(args.predictions or config.out_dir / "predictions.tsv")
    if not predictions_path.exists():
        print(f"extract requires predictions; run score first ({predictions_path} missing)", file=sys.stderr)
        return 1

    positive_ids = set()
    with open(predictions_path, encoding="utf-8") as handle:
        next(handle)  # header
        for line in handle:
            sid, score = line.rstrip("\n").split("\t")
            if float(score) >= config.decision_threshold:
                positive_ids.add(sid)

    selected = (r for r in report_mod.read_sentence_store(store_path) if r.sentence_id in positive_ids)
    phrases_path = config.out_dir / "phrases.jsonl"
    count = report_mod.write_phrase_store(phrases_path, report_mod.extract_phrases(selected))
    stats = aggregate_phrases(report_mod.read_phrase_store(phrases_path), config.exemplar_cap)
    stats_path = config.out_dir / "phrase_stats.json"
    stats_path.write_text(
        json.dumps(
            [{"normalized": s.normalized, "frequency": s.frequency, "exemplars": s.exemplars} for s in stats],
            indent=2,
            ensure_ascii=False,
        )
        + "\n",
        encoding="utf-8",
    )
    run.mark("extract", phrases=count, distinct=len(stats), positive_sentences=len(positive_ids))
    run.save(run_path)
    print(f"extracted {count} noun phrases ({len(stats)} distinct) from {len(positive_ids)} positive sentences")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    config = _load(args)
    run, run_path = _run_ledger(config)
    try:
        run.require("extract")
    except ReportError as exc:
        print(f"report failed: {exc}", file=sys.stderr)
        return 1
    min_frequency = args.min_freq if args.min_freq is not None else config.min_frequency

    stats_rows = json.loads((config.out_dir / "phrase_stats.json").read_text(encoding="utf-8"))
    from .npx import PhraseStat

    stats = [PhraseStat(r["normalized"], r["frequency"], r["exemplars"]) for r in stats_rows]
    phrases = list(report_mod.read_phrase_store(config.out_dir / "phrases.jsonl"))
    texts = {
        r.sentence_id: r.text
        for r in report_mod.read_sentence_store(config.out_dir / "sentences.jsonl")
    }
    try:
        rendered = report_mod.render_report(stats, phrases, texts, min_frequency, config.exemplar_cap)
    except ReportError as exc:
        print(f"report failed: {exc}", file=sys.stderr)
        return 1
    (config.out_dir / "report.tsv").write_text(rendered.to_tsv(), encoding="utf-8")
    (config.out_dir / "report.json").write_text(
        json.dumps(rendered.as_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    run.mark("report", phrases=len(rendered.entries), min_frequency=min_frequency)
    run.save(run_path)
    print(f"rendered report with {len(rendered.entries)} phrases (min frequency {min_frequency})")
    return 0


def cmd_replay_log(args: argparse.Namespace) -> int:
    config = _load(args)
    state_dir = Path(args.state_dir or config.out_dir / "bootstrap")
    try:
        state = replay_events(state_dir)
    except BootstrapError as exc:
        print(f"replay failed: {exc}", file=sys.stderr)
        return 1
    print(
        f"replay ok: t={state.iteration}, model_hash={state.model.model_hash()}, "
        f"queue={len(state.open_queue)}, training={len(state.training_set)}, pool={len(state.pool)}"
    )
    return 0


def cmd_synth_experiment(args: argparse.Namespace) -> int:
    config = _load(args)
    workdir = Path(args.state_dir or config.out_dir / "synth_bootstrap")
    result = synth.run_trend_experiment(
        workdir,
        n_pool=config.synth_pool_sentences,
        rounds=config.max_iterations,
        seed=config.seed,
        config=config.bootstrap_config(),
        noise=args.noise,
    )
    out_path = config.out_dir / "synth_experiment.json"
    config.out_dir.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(result.as_dict(), indent=2) + "\n", encoding="utf-8")
    print("round  precision@K  labels")
    for entry, labels in zip(result.history, result.labels_per_round):
        print(f"{entry['iteration']:>5}  {entry['precision_at_k']:>11.2f}  {labels:>6}")
    print(f"runtime {result.runtime_seconds:.1f}s -> {out_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radminer", description="Literature mining for radiological findings.")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", default=None, help="YAML run configuration")
        p.add_argument("--seed", type=int, default=None, help="override run.seed")
        p.add_argument("--out", default=None, help="override run.out_dir")

    p = sub.add_parser("init-config", help="write the default configuration file")
    p.add_argument("path", nargs="?", default="radminer.yaml")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_init_config)

    p = sub.add_parser("ingest", help="ingest a corpus directory into a sentence store")
    common(p)
    p.add_argument("--root", required=True, help="corpus root directory")
    p.add_argument("--min-date", default=None, help="exclusive publish-date lower bound (YYYY[-MM[-DD]])")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train the classifier on labeled sentences")
    common(p)
    p.add_argument("--data", required=True, help="labeled sentences (jsonl: text, label, source)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score a sentence store with a trained model")
    common(p)
    p.add_argument("--model", default=None)
    p.add_argument("--sentences", default=None)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("bootstrap-serve", help="serve (or batch-drive) the annotation loop")
    common(p)
    p.add_argument("--state-dir", default=None)
    p.add_argument("--init", action="store_true", help="initialize a new session")
    p.add_argument("--seed-data", default=None, help="labeled seed sentences (jsonl) for --init")
    p.add_argument("--pool", default=None, help="sentence store used as the unlabeled pool for --init")
    p.add_argument("--open-round", action="store_true", help="open an annotation round if none is open")
    p.add_argument("--apply-labels", default=None, help="jsonl of labels to apply in batch, then exit")
    p.add_argument("--no-serve", action="store_true", help="do not start the HTTP server")
    p.add_argument("--report", default=None, help="rendered report.json to serve")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8400)
    p.set_defaults(func=cmd_bootstrap_serve)

    p = sub.add_parser("extract", help="extract noun phrases from classified-positive sentences")
    common(p)
    p.add_argument("--sentences", default=None)
    p.add_argument("--predictions", default=None)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("report", help="render the phrase report")
    common(p)
    p.add_argument("--min-freq", type=int, default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("replay-log", help="rebuild bootstrap state from its event log and verify hashes")
    common(p)
    p.add_argument("--state-dir", default=None)
    p.set_defaults(func=cmd_replay_log)

    p = sub.add_parser("synth-experiment", help="run the synthetic bootstrap-trend experiment")
    common(p)
    p.add_argument("--state-dir", default=None)
    p.add_argument("--noise", type=float, default=0.0, help="annotator label-noise rate")
    p.set_defaults(func=cmd_synth_experiment)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
