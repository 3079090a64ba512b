"""Regularized two-view CCA and correlation-weighted cross-modal similarity.

The solver whitens each view's (ridge-regularized) covariance with a
symmetric inverse square root and takes the SVD of the whitened
cross-covariance; this is numerically stabler than the generalized
eigenproblem formulation.  Projected coordinates are weighted by the
canonical correlations raised to a configurable power before cosine
scoring, which is the standard "normalized CCA" retrieval form.

Covariances use the biased 1/n estimator, so duplicating every sample
leaves a fitted model unchanged.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .errors import (
    BadK,
    DataError,
    DimMismatch,
    InsufficientSamples,
    MagicMismatch,
    NonFiniteInput,
    RankDeficient,
    RowCountMismatch,
    TruncatedFile,
    ZeroProjection,
)
from .validation import as_matrix, as_vector, readonly

MODEL_MAGIC = b"MCCA"
MODEL_VERSION = 1
DEFAULT_REG = 1e-4
DEFAULT_POWER = 4.0

_HEADER = struct.Struct("<4sIIIIdd")  # magic, version, dim_x, dim_y, k, power, reg
_EIG_CLAMP = 1e-12
ZERO_NORM = 1e-12


def projected_cosine(px: np.ndarray, py: np.ndarray) -> float:
    """Cosine of two already-projected vectors, clipped into [-1, 1].

    Raises ZeroProjection when either norm falls below ``ZERO_NORM``.
    """
    npx = np.linalg.norm(px)
    npy = np.linalg.norm(py)
    if npx < ZERO_NORM or npy < ZERO_NORM:
        raise ZeroProjection(
            f"projection norms ({npx:.3e}, {npy:.3e}) too small for cosine scoring"
        )
    c = float(px @ py / (npx * npy))
    return min(1.0, max(-1.0, c))


def _inverse_sqrt(cov: np.ndarray, *, regularized: bool, name: str) -> np.ndarray:
    """Symmetric inverse square root via eigendecomposition.

    With ``regularized=False`` a singular covariance raises RankDeficient;
    otherwise eigenvalues are clamped at a small floor and inverted.
    """
    evals, evecs = np.linalg.eigh(cov)
    if not regularized:
        tol = max(float(evals[-1]), 0.0) * cov.shape[0] * np.finfo(np.float64).eps
        if float(evals[0]) <= tol:
            raise RankDeficient(
                f"{name} covariance is singular with reg=0; supply reg > 0"
            )
    evals = np.maximum(evals, _EIG_CLAMP)
    return (evecs / np.sqrt(evals)) @ evecs.T


class CcaEmbedding(BaseEstimator):
    """Two-view canonical correlation embedding with eigenvalue-weighted scoring.

    Parameters
    ----------
    k : int
        Number of canonical component pairs to retain; at most
        min(dim_x, dim_y).
    reg : float
        Relative ridge coefficient.  Each view covariance C receives
        ``reg * trace(C) / dim`` on its diagonal, making the setting
        scale-free across feature magnitudes.
    power : float
        Exponent applied to the canonical correlations when weighting
        projected coordinates (0 disables weighting).

    Attributes (after fit)
    ----------------------
    dim_x_, dim_y_ : view dimensionalities.
    mean_x_, mean_y_ : training means, subtracted before projection.
    basis_x_, basis_y_ : (dim, k) projection bases, paired by column.
    corr_ : canonical correlations in [0, 1], non-increasing.

    Canonical directions are sign-ambiguous; each pair is flipped so the
    X-side column's largest-magnitude entry is positive (ties broken by
    lowest index), which makes fitting deterministic.
    """

    def __init__(self, k: int = 2, reg: float = DEFAULT_REG, power: float = DEFAULT_POWER):
        self.k = k
        self.reg = reg
        self.power = power

    # ----- fitting ------------------------------------------------------

    def fit(self, X, Y) -> "CcaEmbedding":
        """Fit on paired rows of the two views.

        X : (n, dim_x) array.  Y : (n, dim_y) array.  Accumulation and the
        solve run in float64 regardless of the input dtype.
        """
        X = as_matrix(X, "X")
        Y = as_matrix(Y, "Y")
        if X.shape[0] != Y.shape[0]:
            raise RowCountMismatch(f"X has {X.shape[0]} rows, Y has {Y.shape[0]}")
        n = X.shape[0]
        if n < 2:
            raise InsufficientSamples(f"need at least 2 samples, got {n}")
        dim_x, dim_y = X.shape[1], Y.shape[1]
        k, reg, power = self._validated_params(dim_x, dim_y)

        mean_x = X.mean(axis=0)
        mean_y = Y.mean(axis=0)
        Xc = X - mean_x
        Yc = Y - mean_y
        cxx = Xc.T @ Xc / n
        cyy = Yc.T @ Yc / n
        cxy = Xc.T @ Yc / n
        if reg > 0.0:
            cxx = cxx + (reg * np.trace(cxx) / dim_x) * np.eye(dim_x)
            cyy = cyy + (reg * np.trace(cyy) / dim_y) * np.eye(dim_y)

        isqrt_x = _inverse_sqrt(cxx, regularized=reg > 0.0, name="X")
        isqrt_y = _inverse_sqrt(cyy, regularized=reg > 0.0, name="Y")
        u, s, vt = np.linalg.svd(isqrt_x @ cxy @ isqrt_y, full_matrices=False)

        basis_x = isqrt_x @ u[:, :k]
        basis_y = isqrt_y @ vt[:k].T
        for j in range(k):
            col = basis_x[:, j]
            if col[int(np.argmax(np.abs(col)))] < 0:
                basis_x[:, j] = -basis_x[:, j]
                basis_y[:, j] = -basis_y[:, j]
        corr = np.clip(s[:k], 0.0, 1.0)

        self._set_fitted(dim_x, dim_y, mean_x, mean_y, basis_x, basis_y, corr, power, reg)
        return self

    def _validated_params(self, dim_x: int, dim_y: int) -> tuple[int, float, float]:
        k = self.k
        if isinstance(k, bool) or not isinstance(k, (int, np.integer)):
            raise BadK(f"k must be an integer, got {k!r}")
        if not 1 <= k <= min(dim_x, dim_y):
            raise BadK(f"k={k} out of range [1, {min(dim_x, dim_y)}]")
        reg = float(self.reg)
        if not np.isfinite(reg) or reg < 0:
            raise DataError(f"reg must be finite and >= 0, got {self.reg!r}")
        power = float(self.power)
        if not np.isfinite(power) or power < 0:
            raise DataError(f"power must be finite and >= 0, got {self.power!r}")
        return int(k), reg, power

    def _set_fitted(self, dim_x, dim_y, mean_x, mean_y, basis_x, basis_y, corr, power, reg):
        self.dim_x_ = int(dim_x)
        self.dim_y_ = int(dim_y)
        self.mean_x_ = readonly(np.ascontiguousarray(mean_x, dtype=np.float64))
        self.mean_y_ = readonly(np.ascontiguousarray(mean_y, dtype=np.float64))
        self.basis_x_ = readonly(np.ascontiguousarray(basis_x, dtype=np.float64))
        self.basis_y_ = readonly(np.ascontiguousarray(basis_y, dtype=np.float64))
        self.corr_ = readonly(np.ascontiguousarray(corr, dtype=np.float64))
        self._fitted_power = float(power)
        self._fitted_reg = float(reg)
        self._scale = readonly(self.corr_ ** self._fitted_power)

    @classmethod
    def from_parameters(
        cls,
        mean_x,
        mean_y,
        basis_x,
        basis_y,
        corr,
        *,
        power: float = DEFAULT_POWER,
        reg: float = DEFAULT_REG,
    ) -> "CcaEmbedding":
        """Build a fitted model directly from its parameter arrays."""
        basis_x = as_matrix(basis_x, "basis_x")
        basis_y = as_matrix(basis_y, "basis_y")
        dim_x, k = basis_x.shape
        dim_y, k_y = basis_y.shape
        if k_y != k:
            raise DimMismatch(f"basis_x has {k} columns but basis_y has {k_y}")
        if not 1 <= k <= min(dim_x, dim_y):
            raise BadK(f"k={k} out of range [1, {min(dim_x, dim_y)}]")
        mean_x = as_vector(mean_x, "mean_x", dim=dim_x)
        mean_y = as_vector(mean_y, "mean_y", dim=dim_y)
        corr = as_vector(corr, "corr", dim=k)
        if np.any(corr < 0.0) or np.any(corr > 1.0 + 1e-9):
            raise DataError(f"corr entries must lie in [0, 1], got {corr}")
        if np.any(np.diff(corr) > 1e-9):
            raise DataError(f"corr must be non-increasing, got {corr}")
        if not (np.isfinite(power) and power >= 0):
            raise DataError(f"power must be finite and >= 0, got {power!r}")
        if not (np.isfinite(reg) and reg >= 0):
            raise DataError(f"reg must be finite and >= 0, got {reg!r}")
        model = cls(k=k, reg=float(reg), power=float(power))
        model._set_fitted(dim_x, dim_y, mean_x, mean_y, basis_x, basis_y, corr, power, reg)
        return model

    # ----- projection and scoring ----------------------------------------

    def _projected(self, v, mean: np.ndarray, basis: np.ndarray, name: str) -> np.ndarray:
        arr = np.asarray(v, dtype=np.float64)
        single = arr.ndim == 1
        if single:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[1] != mean.shape[0]:
            raise DimMismatch(
                f"{name} has shape {np.shape(v)}, expected last dimension {mean.shape[0]}"
            )
        if not np.all(np.isfinite(arr)):
            raise NonFiniteInput(f"{name} contains NaN or infinity")
        z = ((arr - mean) @ basis) * self._scale
        return z[0] if single else z

    def transform_x(self, x) -> np.ndarray:
        """Project X-view input into the weighted embedding space.

        Accepts a single vector of length dim_x or an (n, dim_x) matrix;
        output is diag(corr**power) . basis_x.T . (x - mean_x) per row.
        """
        check_is_fitted(self, "corr_")
        return self._projected(x, self.mean_x_, self.basis_x_, "x")

    def transform_y(self, y) -> np.ndarray:
        """Y-view counterpart of :meth:`transform_x`."""
        check_is_fitted(self, "corr_")
        return self._projected(y, self.mean_y_, self.basis_y_, "y")

    def transform(self, X, Y=None):
        """scikit-learn style transform: X scores, or (X, Y) score pair."""
        if Y is None:
            return self.transform_x(X)
        return self.transform_x(X), self.transform_y(Y)

    def similarity(self, x, y) -> float:
        """Cosine similarity of the projected views; always in [-1, 1].

        Raises ZeroProjection when either vector projects to (numerically)
        zero, e.g. an X-view query equal to the training mean.
        """
        px = self.transform_x(np.asarray(x, dtype=np.float64))
        py = self.transform_y(np.asarray(y, dtype=np.float64))
        if px.ndim != 1 or py.ndim != 1:
            raise DimMismatch("similarity expects single vectors, not batches")
        return projected_cosine(px, py)

    def canonical_correlations(self) -> np.ndarray:
        """The fitted canonical correlations, non-increasing."""
        check_is_fitted(self, "corr_")
        return self.corr_.copy()

    # ----- serialization --------------------------------------------------

    def to_bytes(self) -> bytes:
        """Serialize to the MCCA binary layout (little-endian, bit-exact)."""
        check_is_fitted(self, "corr_")
        header = _HEADER.pack(
            MODEL_MAGIC,
            MODEL_VERSION,
            self.dim_x_,
            self.dim_y_,
            self.corr_.shape[0],
            self._fitted_power,
            self._fitted_reg,
        )
        return b"".join(
            (
                header,
                self.mean_x_.astype("<f8", copy=False).tobytes(),
                self.mean_y_.astype("<f8", copy=False).tobytes(),
                self.basis_x_.astype("<f8", copy=False).tobytes(order="F"),
                self.basis_y_.astype("<f8", copy=False).tobytes(order="F"),
                self.corr_.astype("<f8", copy=False).tobytes(),
            )
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "CcaEmbedding":
        if len(data) < _HEADER.size:
            raise TruncatedFile(f"model blob has {len(data)} bytes, header needs {_HEADER.size}")
        magic, version, dim_x, dim_y, k, power, reg = _HEADER.unpack_from(data)
        if magic != MODEL_MAGIC:
            raise MagicMismatch(f"expected magic {MODEL_MAGIC!r}, got {magic!r}")
        if version != MODEL_VERSION:
            raise DataError(f"unsupported model version {version}")
        counts = (dim_x, dim_y, dim_x * k, dim_y * k, k)
        expected = _HEADER.size + 8 * sum(counts)
        if len(data) < expected:
            raise TruncatedFile(f"model blob has {len(data)} bytes, expected {expected}")
        if len(data) > expected:
            raise DataError(f"model blob has {len(data) - expected} trailing bytes")
        offset = _HEADER.size
        arrays = []
        for count in counts:
            arrays.append(np.frombuffer(data, dtype="<f8", count=count, offset=offset).astype(np.float64))
            offset += 8 * count
        mean_x, mean_y, bx_flat, by_flat, corr = arrays
        basis_x = bx_flat.reshape((dim_x, k), order="F")
        basis_y = by_flat.reshape((dim_y, k), order="F")
        return cls.from_parameters(mean_x, mean_y, basis_x, basis_y, corr, power=power, reg=reg)

    def save(self, path) -> Path:
        path = Path(path)
        path.write_bytes(self.to_bytes())
        return path

    @classmethod
    def load(cls, path) -> "CcaEmbedding":
        return cls.from_bytes(Path(path).read_bytes())
