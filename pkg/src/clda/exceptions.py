"""Exception types shared across the pipeline.

Validation/format problems (bad files, bad config) are distinct from
degenerate-data conditions hit at runtime; the CLI maps the former to
exit code 1 and the latter to exit code 2.
"""


class FeatureFormatError(ValueError):
    """A feature, verbalizer, model, or answer file violates its contract."""


class CleansingError(RuntimeError):
    """Cleansing cannot produce a usable certain dataset.

    Raised when every cluster is maximally entropic (no certain clusters),
    when the EW threshold removes everything ("threshold too strong"), or
    when majority filtering leaves nothing behind.
    """


class DegenerateFitError(RuntimeError):
    """Classifier fit is impossible: a single class and no prior model."""
