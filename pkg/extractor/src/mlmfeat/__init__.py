"""Masked-LM feature extraction for the weakly-supervised pipeline."""

from mlmfeat.extract import ExtractionJob, ExtractionResult, extract, load_verbalizer
from mlmfeat.featfile import write_feature_file
from mlmfeat.template import INPUT_PLACEHOLDER, MASK_PLACEHOLDER, Template, templify

__version__ = "0.1.0"

__all__ = [
    "ExtractionJob",
    "ExtractionResult",
    "extract",
    "load_verbalizer",
    "write_feature_file",
    "Template",
    "templify",
    "MASK_PLACEHOLDER",
    "INPUT_PLACEHOLDER",
    "__version__",
]
