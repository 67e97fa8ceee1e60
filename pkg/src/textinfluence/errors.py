"""Exception hierarchy.

Every error carries an ``exit_code`` so the command-line layer can map it to
a process status without a lookup table: 2 for bad input, 1 for numeric or
runtime failures.
"""


class TextInfluenceError(Exception):
    exit_code = 1


class ValidationError(TextInfluenceError, ValueError):
    exit_code = 2


class NumericError(TextInfluenceError, ArithmeticError):
    exit_code = 1


class DimMismatch(ValidationError):
    pass


class NonFinite(ValidationError):
    pass


class InvalidClass(ValidationError):
    pass


class EmptyBank(ValidationError):
    pass


class DuplicateConcept(ValidationError):
    pass


class KTooLarge(ValidationError):
    pass


class EmptyInput(ValidationError):
    pass


class CountMismatch(ValidationError):
    pass


class BadMagic(ValidationError):
    pass


class TruncatedFile(ValidationError):
    pass


class TrailingData(ValidationError):
    pass


class ZeroNorm(NumericError):
    pass


class SingularSystem(NumericError):
    pass


class DegenerateDirection(NumericError):
    pass


class AllDegenerate(NumericError):
    pass


class HttpError(TextInfluenceError):
    pass


class ParseError(TextInfluenceError):
    pass


class StallLimit(UserWarning):
    """Generation stopped early because rounds stopped producing new concepts."""
