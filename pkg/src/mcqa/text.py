"""Phrase embeddings from a word-vector table.

Phrases are lowercased and split on maximal runs of non-alphanumeric
characters; in-vocabulary token vectors are averaged and L2-normalized.
Out-of-vocabulary tokens are skipped rather than zero-filled so they
never bias the average toward the origin.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .errors import DegeneratePhrase, DuplicateToken, EmptyFile, NoKnownTokens, ParseError
from .validation import readonly

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase ASCII-alphanumeric tokens of ``text``, in order."""
    return _TOKEN_RE.findall(text.lower())


class WordVectorTable:
    """Immutable token -> vector lookup with fixed dimensionality."""

    def __init__(self, dim: int, vectors: dict[str, np.ndarray]):
        if dim < 1:
            raise ParseError(f"vector dimension must be >= 1, got {dim}")
        self.dim = int(dim)
        self._vectors: dict[str, np.ndarray] = {}
        for token, vec in vectors.items():
            if tokenize(token) != [token]:
                raise ParseError(f"tokens must be single lowercase alphanumeric units, got {token!r}")
            arr = np.asarray(vec, dtype=np.float64)
            if arr.shape != (self.dim,):
                raise ParseError(f"vector for {token!r} has shape {arr.shape}, expected ({self.dim},)")
            if not np.all(np.isfinite(arr)):
                raise ParseError(f"vector for {token!r} is not finite")
            self._vectors[token] = readonly(np.ascontiguousarray(arr))

    def __contains__(self, token: str) -> bool:
        return token in self._vectors

    def __len__(self) -> int:
        return len(self._vectors)

    def get(self, token: str) -> np.ndarray | None:
        return self._vectors.get(token)

    def tokens(self) -> list[str]:
        return sorted(self._vectors)

    @classmethod
    def load(cls, path) -> "WordVectorTable":
        """Parse a GloVe-style text file: token then ``dim`` numbers per line.

        Duplicate tokens (after lowercasing) and malformed lines are
        rejected with the offending line number; blank lines are skipped.
        """
        path = Path(path)
        dim: int | None = None
        vectors: dict[str, np.ndarray] = {}
        with path.open("r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                parts = raw.split()
                if not parts:
                    continue
                token, values = parts[0].lower(), parts[1:]
                if dim is None:
                    if not values:
                        raise ParseError("entry has no vector values", path=str(path), line=lineno)
                    dim = len(values)
                if len(values) != dim:
                    raise ParseError(
                        f"expected {dim} values, got {len(values)}", path=str(path), line=lineno
                    )
                try:
                    vec = np.array([float(v) for v in values], dtype=np.float64)
                except ValueError:
                    raise ParseError("non-numeric vector entry", path=str(path), line=lineno) from None
                if not np.all(np.isfinite(vec)):
                    raise ParseError("non-finite vector entry", path=str(path), line=lineno)
                if token in vectors:
                    raise DuplicateToken(f"{path}:{lineno}: duplicate token {token!r}")
                vectors[token] = vec
        if dim is None:
            raise EmptyFile(f"{path} contains no word vectors")
        return cls(dim, vectors)

    def save(self, path) -> Path:
        """Write the table back out in the same text format (round-trippable)."""
        path = Path(path)
        with path.open("w", encoding="utf-8") as fh:
            for token in self.tokens():
                vec = self._vectors[token]
                fh.write(token + " " + " ".join(repr(float(v)) for v in vec) + "\n")
        return path

    def embed_phrase(self, phrase: str) -> np.ndarray:
        """L2-normalized average of the in-vocabulary token vectors of ``phrase``.

        Tokens are summed in sorted order so any permutation of the phrase
        produces a bit-identical embedding.  Raises NoKnownTokens when
        nothing is in vocabulary, DegeneratePhrase when the average cancels
        to (numerically) zero.
        """
        known = sorted(t for t in tokenize(phrase) if t in self._vectors)
        if not known:
            raise NoKnownTokens(f"no in-vocabulary tokens in {phrase!r}")
        total = np.zeros(self.dim, dtype=np.float64)
        for token in known:
            total += self._vectors[token]
        mean = total / len(known)
        norm = float(np.linalg.norm(mean))
        if norm < 1e-12:
            raise DegeneratePhrase(f"token vectors of {phrase!r} average to zero")
        return mean / norm
