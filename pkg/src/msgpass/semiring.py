"""Commutative semirings used by every inference routine.

A semiring is described by its two operations, their identities and a few
vectorised helpers. Scalars and numpy arrays are both accepted by the
operations; results follow the saturation rules below.

Saturation: in min_sum, (+inf) + (-inf) is +inf (a violated constraint
dominates anything else).
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

INF = float("inf")

SEMIRING_NAMES = ("sum_product", "min_sum", "max_product", "min_max", "or_and")


def _add_saturating(a, b):
    with np.errstate(invalid="ignore"):
        r = np.add(a, b)
    if np.ndim(r) == 0:
        return INF if r != r else float(r)
    if np.isnan(r).any():
        r = np.where(np.isnan(r), INF, r)
    return r


def _sub_saturating(a, b):
    # a - b where b is finite or equal to a; inf - inf counts as 0
    with np.errstate(invalid="ignore"):
        r = np.subtract(a, b)
    if np.ndim(r) == 0:
        return 0.0 if r != r else float(r)
    if np.isnan(r).any():
        r = np.where(np.isnan(r), 0.0, r)
    return r


@dataclass(frozen=True)
class SemiringSpec:
    name: str
    one_oplus: float
    one_otimes: float
    has_inverse: bool
    _oplus: Callable
    _otimes: Callable
    _reduce_oplus: Callable
    _reduce_otimes: Callable
    # True when x <= y in the semiring order means x "wins" under oplus
    oplus_is_min: bool | None
    oplus_ufunc: np.ufunc = np.add
    otimes_ufunc: np.ufunc = np.multiply

    def oplus(self, a, b):
        return self._oplus(a, b)

    def otimes(self, a, b):
        return self._otimes(a, b)

    def reduce_oplus(self, arr, axis=None):
        return self._reduce_oplus(arr, axis=axis)

    def reduce_otimes(self, arr, axis=None):
        return self._reduce_otimes(arr, axis=axis)

    def indicator(self, cond):
        """1(cond): one_otimes when true, one_oplus when false. Works elementwise."""
        if isinstance(cond, (bool, np.bool_)):
            return self.one_otimes if cond else self.one_oplus
        return np.where(cond, self.one_otimes, self.one_oplus)

    def inverse(self, a):
        if not self.has_inverse:
            raise TypeError(f"{self.name} has no multiplicative inverse")
        if np.any(np.asarray(a) == self.one_oplus):
            raise ValueError(f"cannot invert the annihilator in {self.name}")
        if self.name == "min_sum":
            return np.negative(a) if np.ndim(a) else -float(a)
        return np.divide(1.0, a) if np.ndim(a) else 1.0 / float(a)

    def divide(self, a, b):
        """a (x) inverse(b); b must be free of annihilators."""
        if self.name == "min_sum":
            return _sub_saturating(a, b)
        if not self.has_inverse:
            raise TypeError(f"{self.name} has no multiplicative inverse")
        return np.divide(a, b)

    def power(self, a, k):
        k_frac = Fraction(k).limit_denominator(10**9) if not isinstance(k, Fraction) else k
        is_int = k_frac.denominator == 1
        if self.name == "sum_product":
            return float(a) ** float(k_frac)
        if self.name == "min_sum":
            if a in (INF, -INF) and k_frac == 0:
                return 0.0
            return float(a) * float(k_frac)
        if not is_int or k_frac < 0:
            raise ValueError(f"rational or negative power is unsupported in {self.name}")
        n = int(k_frac)
        if n == 0:
            return self.one_otimes
        if self.name == "max_product":
            return float(a) ** n
        # idempotent otimes
        return a

    def normalize(self, msg):
        """Return (normalized message, ok). ok is False for an all-annihilator vector."""
        if self.name == "sum_product" or self.name == "max_product":
            z = msg.sum() if self.name == "sum_product" else msg.max()
            if not z > 0 or not np.isfinite(z):
                return msg, False
            return msg / z, True
        if self.name == "min_sum":
            m = msg.min()
            if m == INF:
                return msg, False
            if m == -INF:
                return np.where(msg == -INF, 0.0, INF), True
            return msg - m, True
        # min_max, or_and: no normalization
        if np.all(msg == self.one_oplus):
            return msg, False
        return msg, True

    def uniform(self, n):
        if self.name == "sum_product":
            return np.full(n, 1.0 / n)
        return np.full(n, float(self.one_otimes))

    def better(self, a, b):
        """True when a is strictly preferred to b by the oplus order."""
        if self.oplus_is_min:
            return a < b
        return a > b

    def extremum_index(self, vec):
        return int(np.argmin(vec) if self.oplus_is_min else np.argmax(vec))

    def accumulate_otimes(self, arr, axis=0):
        with np.errstate(invalid="ignore"):
            r = self.otimes_ufunc.accumulate(arr, axis=axis)
        if self.name == "min_sum" and np.isnan(r).any():
            r = np.where(np.isnan(r), INF, r)
        return r

    def accumulate_oplus(self, arr, axis=0):
        return self.oplus_ufunc.accumulate(arr, axis=axis)

    def __repr__(self):
        return f"SemiringSpec({self.name})"


def _min_reduce(arr, axis=None):
    return np.min(arr, axis=axis)


def _max_reduce(arr, axis=None):
    return np.max(arr, axis=axis)


def _sum_reduce(arr, axis=None):
    return np.sum(arr, axis=axis)


def _prod_reduce(arr, axis=None):
    return np.prod(arr, axis=axis)


def _add_reduce(arr, axis=None):
    with np.errstate(invalid="ignore"):
        r = np.sum(arr, axis=axis)
    if np.ndim(r) == 0:
        if r != r:
            return INF
        return r
    return np.where(np.isnan(r), INF, r)


SUM_PRODUCT = SemiringSpec("sum_product", 0.0, 1.0, True, np.add, np.multiply,
                           _sum_reduce, _prod_reduce, None, np.add, np.multiply)
MIN_SUM = SemiringSpec("min_sum", INF, 0.0, True, np.minimum, _add_saturating,
                       _min_reduce, _add_reduce, True, np.minimum, np.add)
MAX_PRODUCT = SemiringSpec("max_product", 0.0, 1.0, True, np.maximum, np.multiply,
                           _max_reduce, _prod_reduce, False, np.maximum, np.multiply)
MIN_MAX = SemiringSpec("min_max", INF, -INF, False, np.minimum, np.maximum,
                       _min_reduce, _max_reduce, True, np.minimum, np.maximum)
OR_AND = SemiringSpec("or_and", 0.0, 1.0, False, np.maximum, np.minimum,
                      _max_reduce, _min_reduce, False, np.maximum, np.minimum)

_BY_NAME = {s.name: s for s in (SUM_PRODUCT, MIN_SUM, MAX_PRODUCT, MIN_MAX, OR_AND)}


def get_semiring(name: str | SemiringSpec) -> SemiringSpec:
    """Look up a semiring by its name; CLI spellings with dashes are accepted."""
    if isinstance(name, SemiringSpec):
        return name
    key = name.strip().lower().replace("-", "_")
    if key not in _BY_NAME:
        raise KeyError(f"unknown semiring {name!r}; choose from {', '.join(SEMIRING_NAMES)}")
    return _BY_NAME[key]


def combine(s: SemiringSpec, a, b):
    """a (x) b"""
    return s.otimes(a, b)


def marginalize(s: SemiringSpec, a, b):
    """a (+) b"""
    return s.oplus(a, b)


def power(s: SemiringSpec, a, k):
    return s.power(a, k)


def indicator(s: SemiringSpec, cond):
    return s.indicator(cond)
