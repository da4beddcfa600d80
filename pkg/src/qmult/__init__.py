"""Numerical toolkit for q-multiplicative sequences.

Gowers norms, polynomial-phase correlations, digit-sum progression counts
and correlation coefficients, all in exact 64-bit fixed-point phase
arithmetic with deterministic summation.
"""

__version__ = "0.1.0"

from .numerics import BudgetExceeded  # noqa: E402
from .seqcore import QMultSeq, DigitalSeq, SeqSpec, SpecError, build, parse_spec  # noqa: E402

__all__ = [
    "__version__",
    "BudgetExceeded",
    "QMultSeq",
    "DigitalSeq",
    "SeqSpec",
    "SpecError",
    "build",
    "parse_spec",
]
