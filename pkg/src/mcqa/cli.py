"""Command line pipeline: demo data, validation, training, fusion weight
learning, evaluation, answer statistics, and transfer matrices.

Exit codes: 0 success, 1 usage, 2 data or config problem, 3 numeric
failure.  Models live under MODEL_DIR/{qtype}/{cue}.mcca with shared
variants under MODEL_DIR/shared/ and fusion weights in fusion.json.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .cca import CcaEmbedding
from .config import RunConfig, load_config
from .data import load_features, load_questions, validate_dataset
from .errors import ConfigError, McqaError, NumericError
from .evaluate import (
    EvalReport,
    Tally,
    cue_word_statistics,
    evaluate,
    load_lexicons,
    score_questions,
    train_shared_embedding,
    training_pairs,
    transfer_matrix,
)
from .fusion import learn_weights, load_weights, save_weights
from .synthetic import write_demo_dataset
from .text import WordVectorTable, tokenize

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _load_world(cfg: RunConfig):
    return load_features(cfg.features), WordVectorTable.load(cfg.word_vectors)


def _by_qtype(questions) -> dict[str, list]:
    out: dict[str, list] = {}
    for q in questions:
        out.setdefault(q.qtype, []).append(q)
    return dict(sorted(out.items()))


def _model_path(model_dir, qtype: str, cue: str) -> Path:
    return Path(model_dir) / qtype / f"{cue}.mcca"


def _load_models(model_dir, qtypes, cues, *, shared: bool = False):
    """Per-qtype cue models; with shared=True every qtype gets the shared set."""
    out = {}
    for qtype in qtypes:
        source = "shared" if shared else qtype
        models = {}
        for cue in cues:
            path = _model_path(model_dir, source, cue)
            if not path.exists():
                raise ConfigError(f"missing model file {path}; run 'train' first")
            models[cue] = CcaEmbedding.load(path)
        out[qtype] = models
    return out


# --- subcommands ----------------------------------------------------------


def _cmd_demo(args) -> int:
    paths = write_demo_dataset(args.out_dir, seed=args.seed)
    for role in sorted(paths):
        print(f"{role}: {paths[role]}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = load_config(args.config)
    store, table = _load_world(cfg)
    splits = [args.split] if args.split else sorted(cfg.questions)
    total_problems = 0
    for split in splits:
        questions = load_questions(cfg.split(split))
        problems = validate_dataset(store, questions, cfg.cue_names())
        oov = sum(
            1 for q in questions for c in q.candidates
            if not any(t in table for t in tokenize(c))
        )
        print(f"{split}: {len(questions)} questions, "
              f"{len(problems)} missing-feature problems, {oov} all-OOV candidates")
        for p in problems[:10]:
            print(f"  question {p.question_id}: image {p.image_id} lacks channel {p.channel}")
        if len(problems) > 10:
            print(f"  ... and {len(problems) - 10} more")
        total_problems += len(problems)
    return EXIT_OK if total_problems == 0 else EXIT_DATA


def _cmd_train(args) -> int:
    cfg = load_config(args.config)
    store, table = _load_world(cfg)
    questions = load_questions(cfg.split(args.split))
    by_type = _by_qtype(questions)
    per_cue_training: dict[str, dict[str, tuple]] = {c: {} for c in cfg.cue_names()}
    for qtype, qs in by_type.items():
        for cue in cfg.cue_names():
            X, Y = training_pairs(store, table, qs, cue)
            per_cue_training[cue][qtype] = (X, Y)
            model = CcaEmbedding(k=cfg.k, reg=cfg.reg, power=cfg.power).fit(X, Y)
            path = _model_path(args.model_dir, qtype, cue)
            path.parent.mkdir(parents=True, exist_ok=True)
            model.save(path)
            top = ", ".join(f"{c:.3f}" for c in model.corr_[:3])
            print(f"{qtype}/{cue}: n={len(qs)} k={model.k} corr[:3]=[{top}] -> {path}")
    for cue in cfg.cue_names():
        shared = train_shared_embedding(per_cue_training[cue], cfg.k, cfg.reg, cfg.power)
        path = _model_path(args.model_dir, "shared", cue)
        path.parent.mkdir(parents=True, exist_ok=True)
        shared.save(path)
        print(f"shared/{cue}: types={sorted(per_cue_training[cue])} -> {path}")
    return EXIT_OK


def _cmd_fuse_learn(args) -> int:
    cfg = load_config(args.config)
    store, table = _load_world(cfg)
    questions = load_questions(cfg.split(args.split))
    by_type = _by_qtype(questions)
    models = _load_models(args.model_dir, by_type, cfg.cue_names())
    weights = {}
    for qtype, qs in by_type.items():
        tensor, _ = score_questions(
            models[qtype], store, table, qs,
            cues=cfg.cue_names(), cue_configs=cfg.cue_configs(), threads=args.threads,
        )
        w = learn_weights(tensor, qtype, cfg.grid_step, normalization=cfg.normalization)
        weights[qtype] = w
        shown = ", ".join(f"{c}={v:.2f}" for c, v in zip(w.cues, w.w))
        print(f"{qtype}: [{shown}] val accuracy {w.val_accuracy:.4f} on {len(qs)}")
    path = save_weights(weights, Path(args.model_dir) / "fusion.json")
    print(f"fusion weights -> {path}")
    return EXIT_OK


def _merge_reports(reports: list[EvalReport]) -> EvalReport:
    per_qtype = {}
    for r in reports:
        per_qtype.update(r.per_qtype)
    overall = Tally(
        sum(t.n for t in per_qtype.values()), sum(t.correct for t in per_qtype.values())
    )
    per_cue = None
    if reports and reports[0].per_cue is not None:
        per_cue = {
            cue: Tally(
                sum(r.per_cue[cue].n for r in reports),
                sum(r.per_cue[cue].correct for r in reports),
            )
            for cue in reports[0].per_cue
        }
    warnings = tuple(sorted(w for r in reports for w in r.warnings))
    return EvalReport(per_qtype=per_qtype, overall=overall, per_cue=per_cue, warnings=warnings)


def _cmd_eval(args) -> int:
    cfg = load_config(args.config)
    store, table = _load_world(cfg)
    questions = load_questions(cfg.split(args.split))
    by_type = _by_qtype(questions)
    models = _load_models(args.model_dir, by_type, cfg.cue_names(), shared=args.shared)
    weights = load_weights(Path(args.model_dir) / "fusion.json")
    reports = []
    for qtype, qs in by_type.items():
        reports.append(
            evaluate(
                models[qtype], weights, store, table, qs,
                cue_configs=cfg.cue_configs(), normalization=cfg.normalization,
                per_cue=args.per_cue, threads=args.threads,
            )
        )
    report = _merge_reports(reports)
    print(report.to_text(), end="")
    if args.report_dir:
        report_dir = Path(args.report_dir)
        report_dir.mkdir(parents=True, exist_ok=True)
        stem = "eval-shared" if args.shared else "eval"
        (report_dir / f"{stem}.json").write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        (report_dir / f"{stem}.txt").write_text(report.to_text(), encoding="utf-8")
        print(f"report -> {report_dir / (stem + '.json')}")
    return EXIT_OK


def _cmd_stats(args) -> int:
    cfg = load_config(args.config)
    if cfg.lexicons is None:
        raise ConfigError("config has no 'lexicons' entry")
    questions = load_questions(cfg.split(args.split))
    stats = cue_word_statistics(questions, load_lexicons(cfg.lexicons), over=args.over)
    print(stats.to_text(), end="")
    if args.out:
        Path(args.out).write_text(
            json.dumps(stats.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        print(f"stats -> {args.out}")
    return EXIT_OK


def _cmd_transfer(args) -> int:
    cfg = load_config(args.config)
    if args.cue not in cfg.cue_names():
        raise ConfigError(f"cue {args.cue!r} not in config cues {list(cfg.cue_names())}")
    store, table = _load_world(cfg)
    questions = load_questions(cfg.split(args.split))
    by_type = _by_qtype(questions)
    models = _load_models(args.model_dir, by_type, (args.cue,))
    report = transfer_matrix(
        {t: models[t][args.cue] for t in by_type}, by_type, store, table,
        cue=args.cue, threads=args.threads,
    )
    print(report.to_text(), end="")
    if args.out_csv:
        Path(args.out_csv).write_text(report.to_csv(), encoding="utf-8")
        print(f"matrix -> {args.out_csv}")
    if args.out_json:
        Path(args.out_json).write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        print(f"matrix -> {args.out_json}")
    return EXIT_OK


# --- wiring ---------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mcqa", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("demo", help="write a deterministic synthetic dataset")
    p.add_argument("out_dir")
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=_cmd_demo)

    p = sub.add_parser("validate", help="check feature coverage and vocabulary")
    p.add_argument("config")
    p.add_argument("--split", default=None, help="one split (default: all)")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("train", help="fit per-type and shared embeddings")
    p.add_argument("config")
    p.add_argument("model_dir")
    p.add_argument("--split", default="train")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("fuse-learn", help="grid-search fusion weights per question type")
    p.add_argument("config")
    p.add_argument("model_dir")
    p.add_argument("--split", default="val")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=_cmd_fuse_learn)

    p = sub.add_parser("eval", help="answer questions and report accuracy")
    p.add_argument("config")
    p.add_argument("model_dir")
    p.add_argument("--split", default="test")
    p.add_argument("--report-dir", default=None)
    p.add_argument("--per-cue", action="store_true", help="also report single-cue accuracy")
    p.add_argument("--shared", action="store_true", help="use the shared embeddings")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("stats", help="answer-lexicon statistics per question type")
    p.add_argument("config")
    p.add_argument("--split", default="train")
    p.add_argument("--over", choices=("gold", "all"), default="gold")
    p.add_argument("--out", default=None, help="also write JSON here")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("transfer", help="cross-type accuracy matrix for one cue")
    p.add_argument("config")
    p.add_argument("model_dir")
    p.add_argument("--cue", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out-csv", default=None)
    p.add_argument("--out-json", default=None)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=_cmd_transfer)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except McqaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
