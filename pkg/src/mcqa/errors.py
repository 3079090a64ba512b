"""Exception hierarchy.

Two families matter to callers: :class:`DataError` for invalid or
inconsistent inputs (bad files, shape mismatches, missing fields) and
:class:`NumericError` for numerical failures (singular covariances,
degenerate vectors).  The CLI maps them to exit codes 2 and 3.
"""

from __future__ import annotations


class McqaError(Exception):
    """Base class for every error raised by this package."""


class DataError(McqaError, ValueError):
    """Invalid, inconsistent, or missing input data or parameters."""


class NumericError(McqaError):
    """Numerical failure: singular matrices, degenerate vectors, non-finite values."""


# --- two-view embedding -----------------------------------------------------

class RowCountMismatch(DataError):
    """The two views have different sample counts."""


class InsufficientSamples(DataError):
    """Fewer than two training samples."""


class BadK(DataError):
    """Requested component count is out of range for the view dimensions."""


class DimMismatch(DataError):
    """A vector or matrix has the wrong dimensionality."""


class NonFiniteInput(NumericError):
    """Input contains NaN or infinity."""


class RankDeficient(NumericError):
    """A view covariance is singular and no ridge was requested."""


class ZeroProjection(NumericError):
    """A vector projects to (numerically) zero; cosine similarity is undefined."""


# --- text embedding ---------------------------------------------------------

class ParseError(DataError):
    """A text input file has a malformed line."""

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class DuplicateToken(DataError):
    """The word-vector file defines the same token twice."""


class EmptyFile(DataError):
    """The word-vector file contains no entries."""


class NoKnownTokens(DataError):
    """Every token of a phrase is out of vocabulary (or the phrase is empty)."""


class DegeneratePhrase(NumericError):
    """The averaged word vectors of a phrase cancel to (numerically) zero."""


# --- feature and question files ---------------------------------------------

class MagicMismatch(DataError):
    """A binary file does not start with the expected magic bytes."""


class TruncatedFile(DataError):
    """A binary file is shorter than its header claims, or an index references rows past its end."""


class DuplicateImageId(DataError):
    """A channel index lists the same image twice."""


class MissingField(DataError):
    """A question record lacks a required field."""


class BadGoldIndex(DataError):
    """A question's gold index is not a valid candidate position."""


# --- scoring and fusion -----------------------------------------------------

class EmptyRegionList(DataError):
    """Region selection was asked to choose from zero regions."""


class EmptyCandidates(DataError):
    """A decision was requested over zero candidates."""


class CueOrderMismatch(DataError):
    """Per-cue score rows are not in the weight vector's cue order."""


class MissingGold(DataError):
    """An operation requiring gold labels saw a question without one."""


class BadGridStep(DataError):
    """The simplex grid step is not a divisor of 1 in (0, 1]."""


# --- evaluation and CLI -----------------------------------------------------

class MissingFeatures(DataError):
    """Questions reference images with no features in a required channel."""


class UnknownQtype(DataError):
    """No fusion weights (and no default) exist for a question type."""


class ConfigError(DataError):
    """The run configuration file is invalid."""
