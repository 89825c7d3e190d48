"""Numerical toolkit for quasiregular linearizers, the Zorich map and its power map."""

from __future__ import annotations

from .errors import (
    AnalysisError,
    BranchError,
    DegenerateMapError,
    DomainError,
    EstimateFailure,
    QrdynError,
    TruncationError,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisError",
    "BranchError",
    "DegenerateMapError",
    "DomainError",
    "EstimateFailure",
    "QrdynError",
    "TruncationError",
    "__version__",
]
