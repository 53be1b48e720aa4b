"""Exception hierarchy; the CLI maps these onto exit codes."""


class BlastError(Exception):
    pass


class DataError(BlastError, ValueError):
    """Bad or inconsistent input data (CLI exit code 3)."""


class SampleFormatError(DataError):
    pass


class BadMagicError(SampleFormatError):
    pass


class TruncatedPayloadError(SampleFormatError):
    pass


class ShapeMismatchError(SampleFormatError):
    pass


class ProbeFormatError(DataError):
    pass


class ProbeCountError(ProbeFormatError):
    pass


class OffLatticeError(ProbeFormatError):
    pass


class NonNumericRowError(ProbeFormatError):
    pass


class NoTimeRowsError(ProbeFormatError):
    pass


class NumericError(BlastError, ArithmeticError):
    """Non-finite values during training or inference (CLI exit code 4)."""
