"""Error taxonomy shared across the pipeline.

Two families only: bad metadata/parameters/values (maps to CLI exit 2) and
bad tensor/weight geometry (maps to CLI exit 3).  Both subclass ValueError
so library callers can catch them generically.
"""


class ValidationError(ValueError):
    """Invalid metadata, parameter, range, or file content.

    The message names the offending field or argument so command-line
    diagnostics stay actionable.
    """


class ShapeError(ValueError):
    """Array-dimension or weight-shape mismatch."""
