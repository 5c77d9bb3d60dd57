"""Semiring-generic belief propagation and combinatorial solvers built on it."""
from .semiring import (MAX_PRODUCT, MIN_MAX, MIN_SUM, OR_AND, SUM_PRODUCT, SemiringSpec, combine,
                       get_semiring, indicator, marginalize, power)
from .factor_graph import Factor, FactorGraph, clamp, evaluate_joint, materialize_kernel
from .bp import BPConfig, MessageState, bethe_integral, extract_assignment, run

__version__ = "0.1.0"
