"""Exceptions raised by the tensor engine."""


class ShapeError(ValueError):
    """Operand shapes are incompatible with the requested op."""


class GradientError(ArithmeticError):
    """Backward pass or gradient check cannot proceed."""
