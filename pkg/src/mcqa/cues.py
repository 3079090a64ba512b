"""Per-candidate similarity scores for one question under one cue channel.

All functions are pure over immutable inputs and loop candidate-by-candidate
(and region-by-region) through the model's similarity primitive, so their
output is bit-identical to a naive composition of the same calls.

A candidate whose embedding is missing (``None``) or projects to zero scores
0 and is flagged in ``CueScores.zeroed`` instead of failing the batch.
Degenerate regions are skipped during selection; selection fails with
ZeroProjection only when the query itself (or every region) is degenerate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cca import CcaEmbedding, ZERO_NORM, projected_cosine
from .errors import DataError, EmptyRegionList, ZeroProjection

DEFAULT_TOP_M = 1


@dataclass(frozen=True)
class CueScores:
    """Scores for one (question, cue) pair, one entry per candidate."""

    question_id: str
    cue: str
    scores: np.ndarray
    chosen_region: int | None = None
    zeroed: tuple[int, ...] = ()


@dataclass(frozen=True)
class CueConfig:
    """How a cue channel is scored.

    mode: "fullimage" scores against the entry's (mean) vector; "region"
    selects a region first.  query: "prompt" selects once per question
    using the embedded prompt, "candidate" re-selects per candidate.
    top_m: with mode="region", average the vectors of the top-m regions
    instead of taking only the best one.
    """

    mode: str = "fullimage"
    query: str = "prompt"
    top_m: int = DEFAULT_TOP_M

    def __post_init__(self):
        if self.mode not in ("fullimage", "region"):
            raise DataError(f"cue mode must be 'fullimage' or 'region', got {self.mode!r}")
        if self.query not in ("prompt", "candidate"):
            raise DataError(f"cue query must be 'prompt' or 'candidate', got {self.query!r}")
        if not isinstance(self.top_m, int) or isinstance(self.top_m, bool) or self.top_m < 1:
            raise DataError(f"top_m must be a positive integer, got {self.top_m!r}")


def _candidate_scores(model: CcaEmbedding, px: np.ndarray, candidate_embeddings):
    scores = np.zeros(len(candidate_embeddings), dtype=np.float64)
    zeroed = []
    for i, emb in enumerate(candidate_embeddings):
        if emb is None:
            zeroed.append(i)
            continue
        py = model.transform_y(np.asarray(emb, dtype=np.float64))
        try:
            scores[i] = projected_cosine(px, py)
        except ZeroProjection:
            zeroed.append(i)
    return scores, tuple(zeroed)


def score_cue_fullimage(
    model: CcaEmbedding,
    image_vec,
    candidate_embeddings,
    *,
    question_id: str = "",
    cue: str = "",
) -> CueScores:
    """Score every candidate against one image-level feature vector."""
    if len(candidate_embeddings) == 0:
        raise DataError("need at least one candidate embedding")
    px = model.transform_x(np.asarray(image_vec, dtype=np.float64))
    if np.linalg.norm(px) < ZERO_NORM:
        raise ZeroProjection("image vector projects to zero")
    scores, zeroed = _candidate_scores(model, px, candidate_embeddings)
    return CueScores(question_id, cue, scores, chosen_region=None, zeroed=zeroed)


def _region_scores(model: CcaEmbedding, regions, query_embedding) -> list[float | None]:
    """Similarity of each region to the query; None marks degenerate regions."""
    pq = model.transform_y(np.asarray(query_embedding, dtype=np.float64))
    if np.linalg.norm(pq) < ZERO_NORM:
        raise ZeroProjection("query embedding projects to zero")
    out: list[float | None] = []
    for region in regions:
        px = model.transform_x(region.vec)
        try:
            out.append(projected_cosine(px, pq))
        except ZeroProjection:
            out.append(None)
    return out


def select_region(model: CcaEmbedding, regions, query_embedding) -> tuple[int, float]:
    """Index and score of the region most similar to the query embedding.

    Ties break to the lowest index.  Degenerate regions are never selected;
    if all regions are degenerate this raises ZeroProjection.
    """
    if len(regions) == 0:
        raise EmptyRegionList("no regions to select from")
    best_i = -1
    best_s = -np.inf
    for i, s in enumerate(_region_scores(model, regions, query_embedding)):
        if s is not None and s > best_s:
            best_i, best_s = i, s
    if best_i < 0:
        raise ZeroProjection("every region projects to zero")
    return best_i, best_s


def _pooled_region_vector(model, regions, query_embedding, top_m: int) -> tuple[int, np.ndarray]:
    """Best region index plus the mean vector of the top-m scoring regions."""
    if len(regions) == 0:
        raise EmptyRegionList("no regions to select from")
    scored = [
        (i, s)
        for i, s in enumerate(_region_scores(model, regions, query_embedding))
        if s is not None
    ]
    if not scored:
        raise ZeroProjection("every region projects to zero")
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    chosen = scored[: min(top_m, len(scored))]
    pooled = np.mean([regions[i].vec for i, _ in chosen], axis=0)
    return chosen[0][0], pooled


def score_cue_region(
    model: CcaEmbedding,
    regions,
    query_embedding,
    candidate_embeddings,
    *,
    top_m: int = DEFAULT_TOP_M,
    question_id: str = "",
    cue: str = "",
) -> CueScores:
    """Select the query's best region, then score every candidate against it.

    With ``top_m == 1`` this equals select_region followed by full-image
    scoring of the selected region's vector, exactly.
    """
    if top_m == 1:
        idx, _ = select_region(model, regions, query_embedding)
        vec = regions[idx].vec
    else:
        idx, vec = _pooled_region_vector(model, regions, query_embedding, top_m)
    base = score_cue_fullimage(
        model, vec, candidate_embeddings, question_id=question_id, cue=cue
    )
    return CueScores(question_id, cue, base.scores, chosen_region=idx, zeroed=base.zeroed)


def score_cue_region_per_candidate(
    model: CcaEmbedding,
    regions,
    candidate_embeddings,
    *,
    top_m: int = DEFAULT_TOP_M,
    question_id: str = "",
    cue: str = "",
) -> CueScores:
    """Region cue with each candidate acting as its own selection query.

    Candidates whose embedding is missing or degenerate score 0 and are
    flagged; ``chosen_region`` is None because the selection varies per
    candidate.
    """
    if len(candidate_embeddings) == 0:
        raise DataError("need at least one candidate embedding")
    if len(regions) == 0:
        raise EmptyRegionList("no regions to select from")
    scores = np.zeros(len(candidate_embeddings), dtype=np.float64)
    zeroed = []
    for i, emb in enumerate(candidate_embeddings):
        if emb is None:
            zeroed.append(i)
            continue
        try:
            if top_m == 1:
                _, best = select_region(model, regions, emb)
                scores[i] = best
            else:
                _, vec = _pooled_region_vector(model, regions, emb, top_m)
                scores[i] = model.similarity(vec, emb)
        except ZeroProjection:
            zeroed.append(i)
    return CueScores(question_id, cue, scores, chosen_region=None, zeroed=tuple(zeroed))
