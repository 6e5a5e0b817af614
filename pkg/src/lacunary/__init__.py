"""Finite-window computations for Schur multipliers, Littlewood decompositions and L-sets."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    GuardError,
    InputError,
    LacunaryError,
    NonConvergenceError,
    UnsupportedOperationError,
    VerificationError,
    WrongVariantError,
)
from .group_core import FiniteSet, FreeGroup, IntegerGroup, NaturalSemigroup, ball, sphere  # noqa: F401
from .window_builder import Product, Window, build_window, relation_window  # noqa: F401
