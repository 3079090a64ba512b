"""Deterministic synthetic data: paired-view samples for experiments and a
small on-disk demo dataset exercising the full pipeline.

The demo world plants a shared latent code per answer word.  Word vectors
are a linear map of the code plus noise; image features of a question's
image are another linear map of its gold answer's code plus noise.  The
"image" channel holds one whole-image region; the "focus" channel holds
several regions of which only one carries the gold code, so region
selection matters there.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .data import (
    FeatureStore,
    QuestionInstance,
    RegionFeature,
    save_features,
    save_questions,
    whole_image_bbox,
)
from .text import WordVectorTable

SCENE_WORDS = (
    "beach", "bridge", "canyon", "desert", "forest", "garden", "harbor", "kitchen",
    "library", "market", "meadow", "office", "plaza", "station", "street", "valley",
)
ACTION_WORDS = (
    "climbing", "cooking", "dancing", "driving", "fishing", "hiking", "jumping",
    "painting", "reading", "rowing", "running", "singing", "skating", "swimming",
    "typing", "writing",
)
FILLER_WORDS = (
    "a", "an", "and", "doing", "in", "is", "of", "one", "person", "photo",
    "place", "shown", "the", "this", "what", "where",
)
PROMPTS = {
    "scene": "what place is shown in this photo",
    "action": "what is the person doing in this photo",
}


def paired_views(rng, n: int, latent: int, dim_x: int, dim_y: int, noise: float = 0.1):
    """Two views of a shared latent sample: X = zA' + noise, Y = zB' + noise."""
    z = rng.standard_normal((n, latent))
    A = rng.standard_normal((dim_x, latent))
    B = rng.standard_normal((dim_y, latent))
    X = z @ A.T + noise * rng.standard_normal((n, dim_x))
    Y = z @ B.T + noise * rng.standard_normal((n, dim_y))
    return X, Y


def _demo_vocabulary(rng, latent: int, dim_t: int, noise: float):
    codes = {w: rng.standard_normal(latent) for w in SCENE_WORDS + ACTION_WORDS}
    B = rng.standard_normal((dim_t, latent)) / np.sqrt(latent)
    vectors = {
        w: B @ codes[w] + noise * rng.standard_normal(dim_t) for w in sorted(codes)
    }
    for w in FILLER_WORDS:
        vectors[w] = 0.05 * rng.standard_normal(dim_t)
    return codes, vectors


def _demo_question(rng, idx: int, qtype: str, pool) -> tuple[QuestionInstance, str]:
    gold_word = pool[rng.integers(len(pool))]
    others = [w for w in pool if w != gold_word]
    picks = rng.choice(len(others), size=3, replace=False)
    candidates = [gold_word] + [others[p] for p in picks]
    order = rng.permutation(4)
    candidates = [candidates[o] for o in order]
    question = QuestionInstance(
        id=f"q{idx:04d}",
        qtype=qtype,
        image_id=f"img{idx:04d}",
        prompt=PROMPTS[qtype],
        candidates=tuple(candidates),
        gold=candidates.index(gold_word),
    )
    return question, gold_word


def write_demo_dataset(
    out_dir,
    *,
    seed: int = 7,
    n_train: int = 240,
    n_val: int = 120,
    n_test: int = 120,
    latent: int = 8,
    dim_image: int = 24,
    dim_focus: int = 20,
    dim_text: int = 16,
    n_regions: int = 3,
    noise: float = 0.08,
    image_noise: float = 0.85,
) -> dict:
    """Write word vectors, features, question splits, lexicons, and a run
    config under ``out_dir``; returns the paths keyed by role.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    codes, vectors = _demo_vocabulary(rng, latent, dim_text, noise)
    table = WordVectorTable(dim_text, vectors)
    words_path = table.save(out_dir / "words.vec")

    A_image = rng.standard_normal((dim_image, latent)) / np.sqrt(latent)
    A_focus = rng.standard_normal((dim_focus, latent)) / np.sqrt(latent)
    all_words = SCENE_WORDS + ACTION_WORDS

    store = FeatureStore()
    questions = []
    total = n_train + n_val + n_test
    for idx in range(total):
        qtype = "scene" if idx % 2 == 0 else "action"
        pool = SCENE_WORDS if qtype == "scene" else ACTION_WORDS
        question, gold_word = _demo_question(rng, idx, qtype, pool)
        questions.append(question)

        image_vec = A_image @ codes[gold_word] + image_noise * rng.standard_normal(dim_image)
        store.add_entry(
            "image", dim_image, question.image_id,
            [RegionFeature(whole_image_bbox(256, 256), image_vec)],
        )

        # Distractor regions carry codes of words outside this question's
        # candidate set, so only the planted region rewards the gold query.
        planted = int(rng.integers(n_regions))
        outside = [w for w in all_words if w not in question.candidates]
        regions = []
        for r in range(n_regions):
            word = gold_word if r == planted else outside[rng.integers(len(outside))]
            vec = A_focus @ codes[word] + noise * rng.standard_normal(dim_focus)
            regions.append(RegionFeature((40.0 * r, 20.0 * (r % 2), 40.0, 40.0), vec))
        store.add_entry("focus", dim_focus, question.image_id, regions)

    manifest_path = save_features(store, out_dir / "features")

    questions_dir = out_dir / "questions"
    questions_dir.mkdir(exist_ok=True)
    splits = {
        "train": questions[:n_train],
        "val": questions[n_train : n_train + n_val],
        "test": questions[n_train + n_val :],
    }
    split_paths = {
        name: save_questions(qs, questions_dir / f"{name}.jsonl")
        for name, qs in splits.items()
    }

    lexicons_path = out_dir / "lexicons.json"
    lexicons_path.write_text(
        json.dumps(
            {
                "scene_words": sorted(SCENE_WORDS),
                "action_words": sorted(ACTION_WORDS),
                "fillers": sorted(FILLER_WORDS),
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )

    config_path = out_dir / "config.json"
    config_path.write_text(
        json.dumps(
            {
                "word_vectors": "words.vec",
                "features": "features/features.json",
                "questions": {name: f"questions/{name}.jsonl" for name in splits},
                "lexicons": "lexicons.json",
                "cues": [
                    {"name": "image", "mode": "fullimage"},
                    {"name": "focus", "mode": "region", "query": "candidate"},
                ],
                "k": 8,
                "reg": 1e-4,
                "power": 4.0,
                "grid_step": 0.1,
                "normalization": "off",
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )

    return {
        "config": config_path,
        "word_vectors": words_path,
        "features": manifest_path,
        "lexicons": lexicons_path,
        **{f"questions_{name}": path for name, path in split_paths.items()},
    }
