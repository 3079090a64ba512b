"""Experiment harness: accuracy reports, answer-lexicon statistics,
shared-embedding training, and cross-type transfer matrices.

Per-question scoring is pure and merged associatively, so results are
identical for any question order and any worker count.  Questions whose
prompt or image-side vector is degenerate contribute a zeroed score row
plus a warning instead of failing the batch.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cca import DEFAULT_POWER, DEFAULT_REG, CcaEmbedding
from .cues import (
    CueConfig,
    score_cue_fullimage,
    score_cue_region,
    score_cue_region_per_candidate,
)
from .data import FeatureStore, QuestionInstance, validate_dataset
from .errors import (
    DataError,
    DegeneratePhrase,
    DimMismatch,
    MissingFeatures,
    MissingGold,
    NoKnownTokens,
    UnknownQtype,
    ZeroProjection,
)
from .fusion import CueScoreTensor, FusionWeights, decide, fuse_scores
from .text import WordVectorTable, tokenize
from .validation import resolve_threads


@dataclass(frozen=True)
class Tally:
    """Exact integer counts; accuracy is their quotient."""

    n: int
    correct: int

    @property
    def accuracy(self) -> float:
        return self.correct / self.n if self.n else 0.0

    def to_dict(self) -> dict:
        return {"n": self.n, "correct": self.correct, "accuracy": self.accuracy}


@dataclass
class EvalReport:
    per_qtype: dict[str, Tally]
    overall: Tally
    per_cue: dict[str, Tally] | None = None
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        out = {
            "overall": self.overall.to_dict(),
            "per_qtype": {t: tally.to_dict() for t, tally in sorted(self.per_qtype.items())},
        }
        if self.per_cue is not None:
            out["per_cue"] = {c: tally.to_dict() for c, tally in sorted(self.per_cue.items())}
        if self.warnings:
            out["warnings"] = list(self.warnings)
        return out

    def to_text(self) -> str:
        rows = [(t, tally) for t, tally in sorted(self.per_qtype.items())]
        rows.append(("overall", self.overall))
        lines = [_format_table(("question type", "n", "correct", "accuracy"), rows)]
        if self.per_cue is not None:
            cue_rows = [(c, tally) for c, tally in sorted(self.per_cue.items())]
            lines.append("")
            lines.append("single-cue accuracy (all question types)")
            lines.append(_format_table(("cue", "n", "correct", "accuracy"), cue_rows))
        if self.warnings:
            lines.append("")
            lines.append(f"{len(self.warnings)} warnings:")
            lines.extend("  " + w for w in self.warnings)
        return "\n".join(lines) + "\n"


def _format_table(header: tuple[str, ...], rows) -> str:
    table = [header]
    for name, tally in rows:
        table.append((name, str(tally.n), str(tally.correct), f"{tally.accuracy:.4f}"))
    widths = [max(len(r[i]) for r in table) for i in range(len(header))]
    out = []
    for r in table:
        cells = [r[0].ljust(widths[0])] + [r[i].rjust(widths[i]) for i in range(1, len(header))]
        out.append("  ".join(cells))
    return "\n".join(out)


# --- scoring ------------------------------------------------------------


def _entry_vector(regions) -> np.ndarray:
    """Image-level vector of an entry: its single region, or the region mean."""
    if len(regions) == 1:
        return regions[0].vec
    return np.mean([r.vec for r in regions], axis=0)


def _embed_candidates(table: WordVectorTable, question: QuestionInstance):
    embeds = []
    for cand in question.candidates:
        try:
            embeds.append(table.embed_phrase(cand))
        except (NoKnownTokens, DegeneratePhrase):
            embeds.append(None)
    return embeds


def _score_one_cue(model, cfg, regions, question, embeds, table, cue):
    """One cue's score row; degenerate prompts/images zero the row with a note."""
    n = len(question.candidates)
    try:
        if cfg.mode == "fullimage":
            cs = score_cue_fullimage(
                model, _entry_vector(regions), embeds, question_id=question.id, cue=cue
            )
        elif cfg.query == "candidate":
            cs = score_cue_region_per_candidate(
                model, regions, embeds, top_m=cfg.top_m, question_id=question.id, cue=cue
            )
        else:
            query = table.embed_phrase(question.prompt)
            cs = score_cue_region(
                model, regions, query, embeds, top_m=cfg.top_m, question_id=question.id, cue=cue
            )
    except (NoKnownTokens, DegeneratePhrase, ZeroProjection) as exc:
        note = f"question {question.id}: cue {cue}: scores zeroed ({exc})"
        return np.zeros(n, dtype=np.float64), [note]
    notes = [
        f"question {question.id}: cue {cue}: candidate {i} scored 0 (degenerate embedding)"
        for i in cs.zeroed
    ]
    return cs.scores, notes


def score_questions(
    models: dict[str, CcaEmbedding],
    store: FeatureStore,
    table: WordVectorTable,
    questions,
    *,
    cues=None,
    cue_configs: dict[str, CueConfig] | None = None,
    threads: int | None = None,
) -> tuple[CueScoreTensor, list[str]]:
    """Score every question under every cue; returns a tensor plus warnings.

    Raises MissingFeatures unless every question's image has features in
    every scored channel (the validate_dataset precondition).
    """
    cue_order = tuple(cues) if cues is not None else tuple(sorted(models))
    missing = [c for c in cue_order if c not in models]
    if missing:
        raise DataError(f"no model supplied for cues {missing}")
    configs = {c: (cue_configs or {}).get(c, CueConfig()) for c in cue_order}
    problems = validate_dataset(store, questions, cue_order)
    if problems:
        p = problems[0]
        raise MissingFeatures(
            f"{len(problems)} (question, channel) pairs lack features; "
            f"first: question {p.question_id!r} image {p.image_id!r} channel {p.channel!r}"
        )

    def worker(question: QuestionInstance):
        embeds = _embed_candidates(table, question)
        rows, notes = [], []
        for cue in cue_order:
            regions = store.regions(cue, question.image_id)
            row, cue_notes = _score_one_cue(
                models[cue], configs[cue], regions, question, embeds, table, cue
            )
            rows.append(row)
            notes.extend(cue_notes)
        return np.stack(rows), notes

    n_workers = resolve_threads(threads)
    if n_workers == 1 or len(questions) < 2:
        results = [worker(q) for q in questions]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(worker, questions))

    tensor = CueScoreTensor(
        question_ids=tuple(q.id for q in questions),
        cues=cue_order,
        scores=[r[0] for r in results],
        gold=tuple(q.gold for q in questions),
        qtypes=tuple(q.qtype for q in questions),
    )
    warnings = sorted(note for _, notes in results for note in notes)
    return tensor, warnings


def evaluate(
    models: dict[str, CcaEmbedding],
    weights: dict[str, FusionWeights],
    store: FeatureStore,
    table: WordVectorTable,
    questions,
    *,
    cue_configs: dict[str, CueConfig] | None = None,
    default_weights: FusionWeights | None = None,
    normalization: str = "off",
    per_cue: bool = False,
    threads: int | None = None,
) -> EvalReport:
    """Answer every question by fused cue scores and tally accuracy per type.

    ``models`` maps cue channel -> embedding (one model per cue for this
    call; evaluate per question type separately when embeddings are
    type-specific).  ``weights`` maps question type -> FusionWeights;
    types without an entry fall back to ``default_weights`` or raise
    UnknownQtype.
    """
    questions = list(questions)
    for q in questions:
        if q.gold is None:
            raise MissingGold(f"question {q.id!r} has no gold index")
        if q.qtype not in weights and default_weights is None:
            raise UnknownQtype(f"no fusion weights for qtype {q.qtype!r} and no default")
    cue_order = tuple(sorted(models))
    tensor, warns = score_questions(
        models, store, table, questions,
        cues=cue_order, cue_configs=cue_configs, threads=threads,
    )

    per_qtype_counts: dict[str, list[int]] = {}
    cue_correct = {c: 0 for c in cue_order}
    for i, q in enumerate(questions):
        w = weights.get(q.qtype, default_weights)
        rows = [tensor.cues.index(c) for c in w.cues]
        mat = tensor.scores[i]
        fused = fuse_scores(w, mat[rows], cues=w.cues, normalization=normalization)
        counts = per_qtype_counts.setdefault(q.qtype, [0, 0])
        counts[0] += 1
        counts[1] += int(decide(fused) == q.gold)
        if per_cue:
            for j, c in enumerate(tensor.cues):
                cue_correct[c] += int(decide(mat[j]) == q.gold)

    per_qtype = {t: Tally(n, c) for t, (n, c) in per_qtype_counts.items()}
    overall = Tally(
        sum(t.n for t in per_qtype.values()), sum(t.correct for t in per_qtype.values())
    )
    per_cue_tallies = (
        {c: Tally(len(questions), cue_correct[c]) for c in cue_order} if per_cue else None
    )
    return EvalReport(per_qtype=per_qtype, overall=overall, per_cue=per_cue_tallies,
                      warnings=tuple(warns))


def single_cue_tally(
    model: CcaEmbedding,
    store: FeatureStore,
    table: WordVectorTable,
    questions,
    cue: str,
    *,
    cue_config: CueConfig | None = None,
    threads: int | None = None,
) -> Tally:
    """Accuracy of one embedding scoring one cue channel alone."""
    questions = list(questions)
    for q in questions:
        if q.gold is None:
            raise MissingGold(f"question {q.id!r} has no gold index")
    tensor, _ = score_questions(
        {cue: model}, store, table, questions,
        cues=(cue,), cue_configs={cue: cue_config or CueConfig()}, threads=threads,
    )
    correct = sum(
        int(decide(mat[0]) == g) for mat, g in zip(tensor.scores, tensor.gold)
    )
    return Tally(len(questions), correct)


def training_pairs(
    store: FeatureStore,
    table: WordVectorTable,
    questions,
    cue: str,
) -> tuple[np.ndarray, np.ndarray]:
    """Paired training views for one cue: image entry vectors against
    embedded gold answers, one row per question.

    Training data must be clean: a missing gold index raises MissingGold
    and an unembeddable gold answer propagates its error.
    """
    xs, ys = [], []
    for q in questions:
        if q.gold is None:
            raise MissingGold(f"question {q.id!r} has no gold index")
        xs.append(_entry_vector(store.regions(cue, q.image_id)))
        ys.append(table.embed_phrase(q.candidates[q.gold]))
    if not xs:
        raise DataError("no questions supplied")
    return np.stack(xs), np.stack(ys)


# --- answer lexicon statistics -------------------------------------------


@dataclass(frozen=True)
class LexiconEntry:
    answers_total: int
    answers_matching: int

    @property
    def fraction(self) -> float:
        return self.answers_matching / self.answers_total if self.answers_total else 0.0

    def to_dict(self) -> dict:
        return {
            "answers_total": self.answers_total,
            "answers_matching": self.answers_matching,
            "fraction": self.fraction,
        }


@dataclass
class LexiconStats:
    """Per (question type, lexicon): how many answers contain a lexicon word."""

    per: dict[str, dict[str, LexiconEntry]]

    def to_dict(self) -> dict:
        return {
            t: {name: e.to_dict() for name, e in sorted(entries.items())}
            for t, entries in sorted(self.per.items())
        }

    def to_text(self) -> str:
        header = ("question type", "lexicon", "answers", "matching", "fraction")
        table = [header]
        for t, entries in sorted(self.per.items()):
            for name, e in sorted(entries.items()):
                table.append(
                    (t, name, str(e.answers_total), str(e.answers_matching), f"{e.fraction:.4f}")
                )
        widths = [max(len(r[i]) for r in table) for i in range(len(header))]
        lines = []
        for r in table:
            cells = [r[0].ljust(widths[0]), r[1].ljust(widths[1])]
            cells += [r[i].rjust(widths[i]) for i in range(2, len(header))]
            lines.append("  ".join(cells))
        return "\n".join(lines) + "\n"


def cue_word_statistics(questions, lexicons: dict[str, object], *, over: str = "gold") -> LexiconStats:
    """Fraction of answers per question type containing any lexicon word.

    ``over="gold"`` counts only gold answers (questions without gold are
    skipped); ``over="all"`` counts every candidate.  An answer matches a
    lexicon when any of its tokens is in the lexicon's word set.
    """
    if over not in ("gold", "all"):
        raise DataError(f"over must be 'gold' or 'all', got {over!r}")
    sets = {name: frozenset(str(w).lower() for w in words) for name, words in lexicons.items()}
    totals: dict[str, int] = {}
    matches: dict[str, dict[str, int]] = {}
    for q in questions:
        if over == "gold":
            answers = [q.candidates[q.gold]] if q.gold is not None else []
        else:
            answers = list(q.candidates)
        if q.qtype not in totals:
            totals[q.qtype] = 0
            matches[q.qtype] = {name: 0 for name in sets}
        totals[q.qtype] += len(answers)
        for answer in answers:
            tokens = set(tokenize(answer))
            for name, words in sets.items():
                if tokens & words:
                    matches[q.qtype][name] += 1
    per = {
        t: {name: LexiconEntry(totals[t], matches[t][name]) for name in sets}
        for t in totals
    }
    return LexiconStats(per=per)


def load_lexicons(path) -> dict[str, list[str]]:
    """Read a JSON object mapping lexicon name -> list of words."""
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(obj, dict) or not all(
        isinstance(v, list) and all(isinstance(w, str) for w in v) for v in obj.values()
    ):
        raise DataError(f"{path}: expected an object mapping name -> list of words")
    return obj


# --- shared embeddings and transfer ---------------------------------------


def train_shared_embedding(
    per_type_training: dict[str, tuple],
    k: int,
    reg: float = DEFAULT_REG,
    power: float = DEFAULT_POWER,
) -> CcaEmbedding:
    """One embedding over the union of several types' training pairs.

    Rows are concatenated in sorted type order; with a single type this is
    byte-identical to fitting that type alone.
    """
    if not per_type_training:
        raise DataError("need at least one question type")
    names = sorted(per_type_training)
    xs, ys = [], []
    dim_x = dim_y = None
    for name in names:
        X, Y = per_type_training[name]
        X, Y = np.asarray(X, dtype=np.float64), np.asarray(Y, dtype=np.float64)
        if X.ndim != 2 or Y.ndim != 2:
            raise DimMismatch(f"type {name!r}: training views must be 2-D")
        if dim_x is None:
            dim_x, dim_y = X.shape[1], Y.shape[1]
        elif X.shape[1] != dim_x or Y.shape[1] != dim_y:
            raise DimMismatch(
                f"type {name!r} has dims ({X.shape[1]}, {Y.shape[1]}), expected ({dim_x}, {dim_y})"
            )
        xs.append(X)
        ys.append(Y)
    return CcaEmbedding(k=k, reg=reg, power=power).fit(np.concatenate(xs), np.concatenate(ys))


@dataclass
class TransferReport:
    """Accuracy of each type's embedding on each type's questions.

    ``matrix[i, j]`` is the accuracy of the model trained on ``types[i]``
    answering ``types[j]``; incompatible pairs hold NaN and are listed in
    ``errors`` as (train_type, test_type, message).
    """

    types: tuple[str, ...]
    cue: str
    matrix: np.ndarray
    errors: tuple[tuple[str, str, str], ...] = ()

    def to_dict(self) -> dict:
        return {
            "cue": self.cue,
            "types": list(self.types),
            "matrix": [[None if np.isnan(v) else v for v in row] for row in self.matrix],
            "errors": [
                {"train_type": a, "test_type": b, "error": msg} for a, b, msg in self.errors
            ],
        }

    def to_csv(self) -> str:
        lines = ["train\\test," + ",".join(self.types)]
        for name, row in zip(self.types, self.matrix):
            cells = ["nan" if np.isnan(v) else repr(float(v)) for v in row]
            lines.append(name + "," + ",".join(cells))
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        width = max([len(t) for t in self.types] + [10])
        lines = [" " * width + "  " + "  ".join(t.rjust(width) for t in self.types)]
        for name, row in zip(self.types, self.matrix):
            cells = [("nan" if np.isnan(v) else f"{v:.4f}").rjust(width) for v in row]
            lines.append(name.ljust(width) + "  " + "  ".join(cells))
        out = "\n".join(lines) + "\n"
        if self.errors:
            out += "".join(
                f"error: {a} -> {b}: {msg}\n" for a, b, msg in self.errors
            )
        return out


def transfer_matrix(
    models: dict[str, CcaEmbedding],
    datasets: dict[str, list[QuestionInstance]],
    store: FeatureStore,
    table: WordVectorTable,
    *,
    cue: str,
    threads: int | None = None,
) -> TransferReport:
    """Cross-type accuracy grid using single-cue whole-image scoring.

    Row and column order is the sorted type names.  A DimMismatch for one
    (train, test) pair marks that cell NaN and records the error instead
    of failing the whole grid.
    """
    if sorted(models) != sorted(datasets):
        raise DataError(
            f"models cover types {sorted(models)} but datasets cover {sorted(datasets)}"
        )
    types = tuple(sorted(models))
    matrix = np.full((len(types), len(types)), np.nan)
    errors = []
    for i, train_type in enumerate(types):
        for j, test_type in enumerate(types):
            try:
                tally = single_cue_tally(
                    models[train_type], store, table, datasets[test_type], cue, threads=threads
                )
                matrix[i, j] = tally.accuracy
            except DimMismatch as exc:
                errors.append((train_type, test_type, str(exc)))
    return TransferReport(types=types, cue=cue, matrix=matrix, errors=tuple(errors))
