"""Exception types raised across the toolkit."""


class PatternForgeError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(PatternForgeError, ValueError):
    """A pattern document has missing, extra or mistyped fields."""


class InvariantError(PatternForgeError, ValueError):
    """A parsed pattern violates a structural invariant."""


class NumericError(PatternForgeError, ValueError):
    """A non-finite number was found where a finite one is required."""


class GeometryError(PatternForgeError, ValueError):
    """Geometry that cannot be evaluated, clipped or triangulated."""


class StitchError(PatternForgeError, RuntimeError):
    """Stitched edges were discretized inconsistently."""


class BudgetError(PatternForgeError, ValueError):
    """A face budget that cannot be met."""


class FormatError(PatternForgeError, ValueError):
    """Malformed mesh or token file."""


class VocabError(PatternForgeError, ValueError):
    """A pattern does not fit in the token vocabulary."""


class DuplicateName(VocabError):
    pass


class RangeError(PatternForgeError, ValueError):
    """A value lies outside the configured quantization range."""


class ConfigError(PatternForgeError, ValueError):
    pass


class LengthError(PatternForgeError, ValueError):
    """A token sequence would exceed the maximum length."""


class ShapeError(PatternForgeError, ValueError):
    """Loss inputs with mismatched lengths or widths."""


class EmptyMesh(PatternForgeError, ValueError):
    pass


class MalformedSequence(PatternForgeError, ValueError):
    """A token sequence that breaks the grammar of its scheme."""

    def __init__(self, position: int, reason: str):
        super().__init__(f"malformed sequence at position {position}: {reason}")
        self.position = position
        self.reason = reason


class UnmatchedStitch(MalformedSequence):
    """A stitch slot that occurs only once."""

    def __init__(self, position: int, slot: int):
        super().__init__(position, f"stitch slot S{slot} is unmatched")
        self.slot = slot
