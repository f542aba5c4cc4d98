"""Error types shared across the package.

The CLI maps these onto exit codes: InputSchemaError -> 2, DegenerateDataError -> 3.
"""


class InputSchemaError(ValueError):
    """An input file or request violates the documented schema.

    The message names the offending file and field.
    """


class DegenerateDataError(ValueError):
    """The data is structurally valid but too degenerate to process.

    Examples: no structure detections, an empty calibration set, a tuning
    set with no incorrect records.
    """
