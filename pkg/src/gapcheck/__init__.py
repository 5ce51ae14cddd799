"""gapcheck: detect and score gaps in machine-generated legal analysis.

The pipeline: load generation records and expert annotations (:mod:`gapcheck.corpus`),
screen generations with citation and redundancy heuristics (:mod:`gapcheck.citescreen`),
classify gap categories with a few-shot LLM detector (:mod:`gapcheck.detector`),
and score predictions (:mod:`gapcheck.metrics`). The ``gapcheck`` CLI ties the
pieces together; ``gapcheck-annotate`` serves the human annotation workflow.
"""

__version__ = "0.1.0"

from gapcheck.taxonomy import (
    GapCategory,
    GapLabelSet,
    LabelError,
    category_info,
    is_acceptable,
    parse_label_list,
)

__all__ = [
    "GapCategory",
    "GapLabelSet",
    "LabelError",
    "category_info",
    "is_acceptable",
    "parse_label_list",
    "__version__",
]
