"""
trajlet.exceptions

Exception hierarchy for trajlet. Every error carries a machine-readable
category, and optionally the file, line, or index that caused it, and the
third-party exception it wraps.

:author: trajlet contributors
:license: GNU General Public License v3
"""


from typing import Any, ClassVar, Dict, Optional

from pydantic import ValidationError as PydanticValidationError


__all__ = (
    'TrajletError',

    'DegenerateTrajectory',
    'InvalidTrajectory',
    'LengthMismatch',
    'EmptySequence',

    'ZeroDisplacement',
    'ZeroSpectrum',

    'SequenceTooLong',
    'NonFiniteActivation',
    'TapeMismatch',
    'ZeroEmbedding',
    'EncodingError',
    'QueryError',

    'NoTripletsInBatch',
    'NonFiniteLoss',
    'PoolTooSmall',

    'TooFewVectors',
    'UnknownId',

    'EmptyCandidates',
    'MissingLabels',

    'BankTooLarge',
    'WaypointCountMismatch',

    'ParseError',
    'FormatError',
    'ConfigError',
)


class TrajletError(Exception):
    """
    Base exception for all trajlet exceptions.

    :param message: The error message
    :param filename: Optional filename where the error occurred
    :param lineno: Optional line number where the error occurred
    :param index: Optional element index (batch row, query number) involved
    :param original_exception: Optional original exception that caused this
      error
    """

    category: ClassVar[str] = 'error'


    def __init__(
            self,
            message: str,
            filename: Optional[str] = None,
            lineno: Optional[int] = None,
            index: Optional[int] = None,
            original_exception: Optional[BaseException] = None):

        self.message = message
        self.filename = filename
        self.lineno = lineno
        self.index = index
        self.original_exception = original_exception

        super().__init__(self._format_message())


    def _format_message(self) -> str:
        parts = [self.message]

        if self.filename:
            location = self.filename
            if self.lineno:
                location = f"{location}:{self.lineno}"
            parts.append(f"  Location: {location}")

        if self.index is not None:
            parts.append(f"  Index: {self.index}")

        if self.original_exception is not None:
            exc_type = type(self.original_exception).__name__
            parts.append(f"  Original error: {exc_type}: {self.original_exception}")

        return "\n".join(parts)


class DegenerateTrajectory(TrajletError):
    """
    A trajectory with fewer than two points.
    """

    category = 'degenerate-trajectory'


class InvalidTrajectory(TrajletError):
    """
    A trajectory with a bad shape or non-finite coordinates.
    """

    category = 'invalid-trajectory'


class LengthMismatch(TrajletError):
    """
    Two sequences that must be the same length are not.
    """

    category = 'length-mismatch'


class EmptySequence(TrajletError):
    category = 'empty-sequence'


class ZeroDisplacement(TrajletError):
    """
    The overall displacement of a trajectory is too small for its direction
    to be defined, so the cosine term is undefined.
    """

    category = 'zero-displacement'


class ZeroSpectrum(TrajletError):
    """
    A spectral feature was computed from an all-zero sequence and cannot be
    compared.
    """

    category = 'zero-spectrum'


class SequenceTooLong(TrajletError):
    category = 'sequence-too-long'


class NonFiniteActivation(TrajletError):
    """
    The encoder produced a NaN or infinite value, which means training has
    diverged.
    """

    category = 'non-finite-activation'


class TapeMismatch(TrajletError):
    """
    A backward pass was requested with a gradient or parameter set that does
    not belong to the recorded forward pass.
    """

    category = 'tape-mismatch'


class ZeroEmbedding(TrajletError):
    category = 'zero-embedding'


class EncodingError(TrajletError):
    """
    Wraps an encoder failure with the id of the trajectory being embedded.

    :param traj_id: The id of the trajectory that failed
    :param original_error: The encoder error
    """

    category = 'encoding-error'


    def __init__(self, traj_id: str, original_error: TrajletError):
        self.traj_id = traj_id
        super().__init__(
            f"Could not embed trajectory '{traj_id}'",
            original_exception=original_error)


class QueryError(TrajletError):
    """
    Wraps a failure while answering one query with that query's id.

    :param query_id: The id of the query trajectory
    :param original_error: The error raised for it
    """

    category = 'query-error'


    def __init__(self, query_id: str, original_error: TrajletError):
        self.query_id = query_id
        super().__init__(
            f"Query '{query_id}' failed",
            original_exception=original_error)


class NoTripletsInBatch(TrajletError):
    """
    A training batch that yields no triplet. The trainer records it on the
    skipped step's :class:`~trajlet.training.StepRecord` and carries on;
    ``index`` is the step number.
    """

    category = 'no-triplets'


class PoolTooSmall(TrajletError):
    """
    Fewer usable training trajectories than one batch needs.
    """

    category = 'pool-too-small'


class NonFiniteLoss(TrajletError):
    """
    The triplet loss became NaN or infinite. Training aborts.

    :param step: The training step that produced the loss
    :param diagnostic: Extra values describing the batch
    """

    category = 'non-finite-loss'


    def __init__(self, step: int, diagnostic: Optional[Dict[str, Any]] = None):
        self.step = step
        self.diagnostic = diagnostic or {}

        message = f"Non-finite triplet loss at step {step}"
        for key, value in sorted(self.diagnostic.items()):
            message += f"\n  {key}: {value}"

        super().__init__(message)


class TooFewVectors(TrajletError):
    category = 'too-few-vectors'


class UnknownId(TrajletError):
    category = 'unknown-id'


class EmptyCandidates(TrajletError):
    category = 'empty-candidates'


class MissingLabels(TrajletError):
    category = 'missing-labels'


class BankTooLarge(TrajletError):
    category = 'bank-too-large'


class WaypointCountMismatch(TrajletError):
    category = 'waypoint-count-mismatch'


class ParseError(TrajletError):
    """
    A malformed line in a trajectory file, or a malformed YAML document.

    :param reason: What is wrong with the line
    :param filename: The file being parsed
    :param lineno: The 1-based line number
    """

    category = 'parse-error'


    def __init__(
            self,
            reason: str,
            filename: Optional[str] = None,
            lineno: Optional[int] = None,
            original_exception: Optional[BaseException] = None):

        self.reason = reason
        super().__init__(
            f"Parse error: {reason}",
            filename=filename,
            lineno=lineno,
            original_exception=original_exception)


class FormatError(TrajletError):
    """
    A binary artifact (checkpoint, bank, distance matrix) has the wrong magic,
    an unsupported version, or is truncated.
    """

    category = 'format-error'


class ConfigError(TrajletError):
    """
    Wraps pydantic validation errors (or the ValueError raised by a
    cross-field check) with the source of the configuration.

    :param original_error: The original validation error
    :param what: Which configuration object failed to validate
    :param filename: Optional configuration file it came from
    """

    category = 'config-error'


    def __init__(
            self,
            original_error: Exception,
            what: str,
            filename: Optional[str] = None):

        self.what = what

        message = f"Invalid {what} configuration"
        if isinstance(original_error, PydanticValidationError):
            for error in original_error.errors():
                loc = '.'.join(str(part) for part in error.get('loc', ()))
                msg = error.get('msg', 'invalid')
                message += f"\n  {loc or '<root>'}: {msg}"
        else:
            message += f"\n  {original_error}"

        super().__init__(
            message,
            filename=filename,
            original_exception=original_error)


# The end.
