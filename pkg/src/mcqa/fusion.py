"""Late fusion of per-cue candidate scores and simplex-grid weight learning.

Weight learning is an exhaustive search over the simplex grid whose
coordinates are multiples of ``grid_step`` (so ``1/grid_step`` must be an
integer).  Cue counts are small, which makes enumeration exact and
reproducible; the selection rule is a total order (validation accuracy,
then weight vectors compared lexicographically descending), so the result
is independent of enumeration or evaluation order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .errors import (
    BadGridStep,
    CueOrderMismatch,
    DataError,
    DimMismatch,
    EmptyCandidates,
    MissingGold,
    NonFiniteInput,
    UnknownQtype,
)

NORMALIZATION_MODES = ("off", "zscore")


@dataclass(frozen=True)
class FusionWeights:
    """Per-question-type simplex weights over cue channels."""

    qtype: str
    cues: tuple[str, ...]
    w: np.ndarray
    val_accuracy: float | None = None  # not serialized

    def __post_init__(self):
        object.__setattr__(self, "cues", tuple(self.cues))
        w = np.asarray(self.w, dtype=np.float64)
        object.__setattr__(self, "w", w)
        if w.ndim != 1 or w.shape[0] != len(self.cues):
            raise DimMismatch(f"weights shape {w.shape} does not match {len(self.cues)} cues")
        if len(self.cues) == 0:
            raise DataError("need at least one cue")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise DataError(f"weights must be finite and >= 0, got {w}")
        if abs(float(w.sum()) - 1.0) > 1e-9:
            raise DataError(f"weights must sum to 1 within 1e-9, got sum {w.sum()!r}")

    def to_dict(self) -> dict:
        return {"qtype": self.qtype, "cues": list(self.cues), "w": [float(v) for v in self.w]}

    @classmethod
    def from_dict(cls, obj: dict) -> "FusionWeights":
        for key in ("qtype", "cues", "w"):
            if key not in obj:
                raise DataError(f"fusion weights object missing {key!r}")
        return cls(qtype=obj["qtype"], cues=tuple(obj["cues"]), w=np.asarray(obj["w"], dtype=np.float64))


def save_weights(weights_by_qtype: dict[str, FusionWeights], path) -> Path:
    path = Path(path)
    payload = [weights_by_qtype[qtype].to_dict() for qtype in sorted(weights_by_qtype)]
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return path


def load_weights(path) -> dict[str, FusionWeights]:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(payload, list):
        raise DataError(f"{path}: expected a JSON array of weight objects")
    out = {}
    for obj in payload:
        w = FusionWeights.from_dict(obj)
        if w.qtype in out:
            raise DataError(f"{path}: duplicate weights for qtype {w.qtype!r}")
        out[w.qtype] = w
    return out


@dataclass
class CueScoreTensor:
    """Per-question, per-cue, per-candidate scores.

    ``scores[i]`` is a (n_cues, n_candidates_i) matrix; candidate counts
    may differ between questions but are consistent across cues within
    one question.  ``qtypes`` and ``gold`` are optional per-question
    annotations used by weight learning.
    """

    question_ids: tuple[str, ...]
    cues: tuple[str, ...]
    scores: list[np.ndarray]
    gold: tuple | None = None
    qtypes: tuple[str, ...] | None = None

    def __post_init__(self):
        self.question_ids = tuple(self.question_ids)
        self.cues = tuple(self.cues)
        n = len(self.question_ids)
        if len(self.scores) != n:
            raise DimMismatch(f"{len(self.scores)} score matrices for {n} questions")
        checked = []
        for qid, mat in zip(self.question_ids, self.scores):
            mat = np.asarray(mat, dtype=np.float64)
            if mat.ndim != 2 or mat.shape[0] != len(self.cues):
                raise DimMismatch(
                    f"question {qid!r}: score matrix shape {mat.shape}, expected ({len(self.cues)}, n_candidates)"
                )
            if not np.all(np.isfinite(mat)):
                raise NonFiniteInput(f"question {qid!r}: scores contain NaN or infinity")
            checked.append(mat)
        self.scores = checked
        if self.gold is not None:
            self.gold = tuple(self.gold)
            if len(self.gold) != n:
                raise DimMismatch(f"{len(self.gold)} gold labels for {n} questions")
        if self.qtypes is not None:
            self.qtypes = tuple(self.qtypes)
            if len(self.qtypes) != n:
                raise DimMismatch(f"{len(self.qtypes)} qtypes for {n} questions")

    def __len__(self) -> int:
        return len(self.question_ids)

    def select_qtype(self, qtype: str) -> "CueScoreTensor":
        if self.qtypes is None:
            raise DataError("tensor carries no qtype annotations")
        idx = [i for i, t in enumerate(self.qtypes) if t == qtype]
        return CueScoreTensor(
            question_ids=tuple(self.question_ids[i] for i in idx),
            cues=self.cues,
            scores=[self.scores[i] for i in idx],
            gold=None if self.gold is None else tuple(self.gold[i] for i in idx),
            qtypes=tuple(self.qtypes[i] for i in idx),
        )


def _normalize_rows(per_cue: np.ndarray, mode: str) -> np.ndarray:
    if mode == "off":
        return per_cue
    if mode == "zscore":
        out = np.zeros_like(per_cue)
        for i, row in enumerate(per_cue):
            std = float(row.std())
            if std > 1e-12:
                out[i] = (row - row.mean()) / std
        return out
    raise DataError(f"unknown normalization mode {mode!r}; expected one of {NORMALIZATION_MODES}")


def fuse_scores(
    weights: FusionWeights,
    per_cue,
    *,
    cues=None,
    normalization: str = "off",
) -> np.ndarray:
    """Weighted sum of per-cue score rows after optional per-cue normalization.

    ``per_cue`` is (n_cues, n_candidates) in the weight vector's cue order;
    pass ``cues`` to have that order checked.  zscore normalization is per
    cue across candidates; a zero-variance row is left at 0.
    """
    if cues is not None and tuple(cues) != weights.cues:
        raise CueOrderMismatch(f"score rows are {tuple(cues)}, weights expect {weights.cues}")
    mat = np.asarray(per_cue, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] != len(weights.cues):
        raise DimMismatch(f"per-cue matrix shape {mat.shape}, expected ({len(weights.cues)}, n_candidates)")
    if not np.all(np.isfinite(mat)):
        raise NonFiniteInput("per-cue scores contain NaN or infinity")
    return weights.w @ _normalize_rows(mat, normalization)


def decide(fused) -> int:
    """Index of the maximum fused score; ties break to the lowest index."""
    arr = np.asarray(fused, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] == 0:
        raise EmptyCandidates(f"fused scores must be a non-empty vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput("fused scores contain NaN or infinity")
    return int(np.argmax(arr))


def simplex_units(n_cues: int, grid_step: float) -> tuple[int, list[tuple[int, ...]]]:
    """All integer compositions backing the simplex grid.

    Returns ``(m, parts)`` where ``m = 1/grid_step`` and each entry of
    ``parts`` sums to m; the corresponding weights are ``units / m``.
    """
    if not np.isfinite(grid_step) or not 0 < grid_step <= 1:
        raise BadGridStep(f"grid_step must lie in (0, 1], got {grid_step!r}")
    m = round(1.0 / grid_step)
    if abs(1.0 / grid_step - m) > 1e-9:
        raise BadGridStep(f"1/grid_step must be an integer, got 1/{grid_step} = {1.0 / grid_step}")
    if n_cues < 1:
        raise DataError("need at least one cue")
    parts = []
    for bars in combinations(range(m + n_cues - 1), n_cues - 1):
        prev = -1
        units = []
        for b in bars:
            units.append(b - prev - 1)
            prev = b
        units.append(m + n_cues - 2 - prev)
        parts.append(tuple(units))
    return m, parts


def learn_weights(
    tensor: CueScoreTensor,
    qtype: str,
    grid_step: float = 0.1,
    *,
    normalization: str = "off",
) -> FusionWeights:
    """Exhaustive simplex-grid search for the accuracy-maximizing cue weights.

    Evaluates every grid point with fuse_scores + decide against the
    tensor's gold labels.  Accuracy ties break to the weight vector that
    is lexicographically largest (more weight on earlier-listed cues).
    """
    sub = tensor.select_qtype(qtype) if tensor.qtypes is not None else tensor
    if len(sub) == 0:
        raise UnknownQtype(f"tensor has no questions of qtype {qtype!r}")
    if sub.gold is None or any(g is None for g in sub.gold):
        raise MissingGold(f"weight learning for {qtype!r} requires gold labels on every question")
    _normalize_rows(np.zeros((1, 1)), normalization)  # validate mode up front
    m, parts = simplex_units(len(sub.cues), grid_step)

    best_w: tuple[float, ...] | None = None
    best_correct = -1
    for units in parts:
        w = tuple(u / m for u in units)
        fw = FusionWeights(qtype=qtype, cues=sub.cues, w=np.array(w))
        correct = 0
        for mat, gold in zip(sub.scores, sub.gold):
            if decide(fuse_scores(fw, mat, normalization=normalization)) == gold:
                correct += 1
        if correct > best_correct or (correct == best_correct and w > best_w):
            best_correct, best_w = correct, w
    return FusionWeights(
        qtype=qtype,
        cues=sub.cues,
        w=np.array(best_w),
        val_accuracy=best_correct / len(sub),
    )
