"""Exception types raised across the package.

Every failure mode the pipeline distinguishes gets its own class so callers
(and the CLI) can react to specific conditions instead of parsing messages.
Missing input files raise the builtin ``FileNotFoundError``.
"""


class DDTimeError(Exception):
    """Base class for all package-specific errors."""


# --- delimited-text loading ---

class RaggedRowsError(DDTimeError):
    """Rows of a delimited file disagree on column count."""


class NonNumericCellError(DDTimeError):
    """A data cell could not be parsed as a number."""


class EmptyFileError(DDTimeError):
    """The input file contains no data rows."""


class NonFiniteValueError(DDTimeError):
    """A loaded value is NaN or infinite."""


# --- splitting / windowing ---

class EmptySplitError(DDTimeError):
    """A requested chronological split would leave a segment empty."""


class NoWindowsError(DDTimeError):
    """The series is too short to produce a single window."""


# --- numerical contracts ---

class ShapeMismatchError(DDTimeError):
    """Array arguments disagree on shape or length."""


class InvalidDistributionError(DDTimeError):
    """A probability vector has a zero/negative entry or does not sum to one."""


class DegenerateSegmentError(DDTimeError):
    """A sampled trajectory segment has (numerically) zero length."""


class DivergenceError(DDTimeError):
    """Training or unrolled optimization produced a non-finite loss."""


# --- binary formats ---

class BufferFormatError(DDTimeError):
    """Base class for replay-buffer / synthetic-file format errors."""


class BadMagicError(BufferFormatError):
    """File does not start with the expected magic bytes."""


class VersionMismatchError(BufferFormatError):
    """File was written with an unsupported format version."""


class TruncatedFileError(BufferFormatError):
    """File ends before the declared payload is complete."""


class ChecksumError(BufferFormatError):
    """Payload bytes do not match the stored CRC32."""


# --- configuration ---

class ConfigError(DDTimeError):
    """A run configuration file is malformed or inconsistent."""
