"""Exception hierarchy shared by every flagstat module."""


class FlagstatError(Exception):
    """Base class for all library errors."""


class InvalidInput(FlagstatError, ValueError):
    pass


class ShapeMismatch(InvalidInput):
    pass


class NotOrthonormal(InvalidInput):
    def __init__(self, deviation, message=None):
        self.deviation = float(deviation)
        super().__init__(message or f"columns not orthonormal (max deviation {self.deviation:.3e})")


class SignatureMismatch(InvalidInput):
    pass


class UnsupportedSignature(InvalidInput):
    pass


class EmptyInput(InvalidInput):
    pass


class NumericalFailure(FlagstatError, ArithmeticError):
    pass


class RankDeficient(NumericalFailure):
    def __init__(self, column, message=None):
        self.column = int(column)
        super().__init__(message or f"matrix is rank deficient at column {self.column}")


class ContractionSingularity(NumericalFailure):
    """Raised when an SO(4) point sits on the contraction horizon (M[3, 3] ~ 0)."""
