"""Shared test utilities: independent oracles and synthetic QA worlds.

Oracles here deliberately avoid the library's linear algebra paths so
that agreement is evidence, not circularity.
"""

from __future__ import annotations

import numpy as np

from mcqa import FeatureStore, QuestionInstance, RegionFeature, WordVectorTable


def angle_grid_corr(X, Y, step_deg: float = 0.5) -> float:
    """Brute-force top canonical correlation for 2-D views: scan direction
    pairs on an angle grid and take the best absolute Pearson correlation.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    assert X.shape[1] == 2 and Y.shape[1] == 2
    angles = np.deg2rad(np.arange(0.0, 180.0, step_deg))
    dirs = np.stack([np.cos(angles), np.sin(angles)])
    U = (X - X.mean(axis=0)) @ dirs
    V = (Y - Y.mean(axis=0)) @ dirs
    U = U / np.linalg.norm(U, axis=0)
    V = V / np.linalg.norm(V, axis=0)
    return float(np.max(np.abs(U.T @ V)))


def naive_cosine(a, b) -> float:
    num = sum(float(x) * float(y) for x, y in zip(a, b))
    na = sum(float(x) * float(x) for x in a) ** 0.5
    nb = sum(float(y) * float(y) for y in b) ** 0.5
    return max(-1.0, min(1.0, num / (na * nb)))


def naive_similarity(model, x, y) -> float:
    """Recompute model.similarity from fitted attributes, without calling
    any transform method.
    """
    scale = model.corr_ ** model._fitted_power
    px = ((np.asarray(x, dtype=np.float64) - model.mean_x_) @ model.basis_x_) * scale
    py = ((np.asarray(y, dtype=np.float64) - model.mean_y_) @ model.basis_y_) * scale
    return naive_cosine(px, py)


def relative_noise(rng, signal, sigma: float):
    """Add white noise scaled to sigma times the signal's RMS amplitude."""
    signal = np.asarray(signal, dtype=np.float64)
    scale = sigma * np.linalg.norm(signal) / np.sqrt(signal.size)
    return signal + scale * rng.standard_normal(signal.size)


def build_qa_world(
    rng,
    A,
    B,
    n_questions: int,
    *,
    qtype: str = "t",
    sigma: float = 0.2,
    prefix: str = "t",
    channel: str = "image",
    gold_background: bool = False,
    x_nuisance=None,
    y_nuisance=None,
    store: FeatureStore | None = None,
    vectors: dict | None = None,
    start: int = 0,
):
    """Single-region multiple-choice world with one fresh word per candidate.

    Each question draws a latent code z; its image feature is A z plus
    relative noise and its gold answer word's vector is B z plus relative
    noise.  Distractor words get fresh latent codes.  With
    ``gold_background`` the gold word also gets a fresh code, making all
    four candidates exchangeable (chance-level control).  ``x_nuisance``
    and ``y_nuisance`` are optional maps adding independent background
    latents to every image and word vector, modelling content that other
    question types care about but this one does not.
    """
    latent = A.shape[1]
    dim_image, dim_text = A.shape[0], B.shape[0]
    store = store if store is not None else FeatureStore()
    vectors = vectors if vectors is not None else {}
    questions = []
    for i in range(start, start + n_questions):
        z = rng.standard_normal(latent)
        image_signal = A @ z
        if x_nuisance is not None:
            image_signal = image_signal + x_nuisance @ rng.standard_normal(x_nuisance.shape[1])
        image_vec = relative_noise(rng, image_signal, sigma)
        gold = int(rng.integers(4))
        words = []
        for j in range(4):
            zj = z if (j == gold and not gold_background) else rng.standard_normal(latent)
            word_signal = B @ zj
            if y_nuisance is not None:
                word_signal = word_signal + y_nuisance @ rng.standard_normal(y_nuisance.shape[1])
            vectors[f"{prefix}q{i}c{j}"] = relative_noise(rng, word_signal, sigma)
            words.append(f"{prefix}q{i}c{j}")
        store.add_entry(
            channel, dim_image, f"{prefix}img{i}",
            [RegionFeature((0.0, 0.0, 1.0, 1.0), image_vec)],
        )
        questions.append(
            QuestionInstance(
                id=f"{prefix}q{i}", qtype=qtype, image_id=f"{prefix}img{i}",
                prompt="which one", candidates=tuple(words), gold=gold,
            )
        )
    table = WordVectorTable(dim_text, vectors)
    return store, table, questions


def brute_force_weights(tensor, qtype, grid_step, *, normalization="off"):
    """Independent exhaustive reimplementation of fusion weight learning:
    nested loops over integer grid compositions, plain python scoring.
    """
    m = round(1.0 / grid_step)
    assert abs(m * grid_step - 1.0) <= 1e-9
    idx = [
        i for i in range(len(tensor.question_ids))
        if tensor.qtypes is None or tensor.qtypes[i] == qtype
    ]
    n_cues = len(tensor.cues)

    def compositions(total, parts):
        if parts == 1:
            yield (total,)
            return
        for first in range(total + 1):
            for rest in compositions(total - first, parts - 1):
                yield (first,) + rest

    best = None
    for units in compositions(m, n_cues):
        w = tuple(u / m for u in units)
        correct = 0
        for i in idx:
            mat = np.asarray(tensor.scores[i], dtype=np.float64)
            if normalization == "zscore":
                rows = []
                for row in mat:
                    mu, sd = row.mean(), row.std()
                    rows.append(np.zeros_like(row) if sd <= 1e-12 else (row - mu) / sd)
                mat = np.stack(rows)
            fused = [
                sum(w[c] * mat[c, j] for c in range(n_cues)) for j in range(mat.shape[1])
            ]
            pred = max(range(len(fused)), key=lambda j: (fused[j], -j))
            correct += int(pred == tensor.gold[i])
        key = (correct, w)
        if best is None or key > best:
            best = key
    return np.asarray(best[1]), best[0] / len(idx)
