"""Error-free float transforms and double-double arithmetic.

A double-double value represents a real number as an unevaluated sum
``hi + lo`` of two floats with ``|lo| <= ulp(hi)/2``, giving roughly
106 bits of significand (about 31-32 decimal digits).  That is a little
less than IEEE binary128 (113 bits, ~34 digits), but the exponent range
is the full double range and every operation below compiles to ordinary
double arithmetic, so the kernels vectorize over numpy arrays as-is.

All kernels are branch-free except the square root, so every function
accepts either Python floats or numpy arrays and broadcasts like any
ufunc expression.

``math.fma`` is not available on this interpreter, so ``two_prod`` uses
the Dekker splitting path; :data:`TWO_PROD_PATH` records which path was
compiled in so build logs can report it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Dekker's splitter for binary64: 2**27 + 1.
_SPLITTER = 134217729.0

# No math.fma in this interpreter (added in CPython 3.13); the product
# residual comes from Dekker splitting instead.
TWO_PROD_PATH = "dekker-split"


def two_sum(a, b):
    """Return ``(s, e)`` with ``s = fl(a + b)`` and ``s + e == a + b`` exactly.

    Knuth's branch-free version: correct for any ordering of magnitudes,
    and symmetric in its arguments bit-for-bit.
    """
    s = a + b
    v = s - a
    e = (a - (s - v)) + (b - v)
    return s, e


def quick_two_sum(a, b):
    """two_sum specialized to ``|a| >= |b|`` (three flops instead of six)."""
    s = a + b
    e = b - (s - a)
    return s, e


def split(a):
    """Dekker split: ``a == hi + lo`` with both halves 26-bit exact."""
    t = _SPLITTER * a
    hi = t - (t - a)
    lo = a - hi
    return hi, lo


def two_prod(a, b):
    """Return ``(p, e)`` with ``p = fl(a * b)`` and ``p + e == a * b`` exactly."""
    p = a * b
    ah, al = split(a)
    bh, bl = split(b)
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def dd_add(x, y):
    """Add two double-double values given as (hi, lo) pairs.

    The classic accurate sum: both hi and lo parts go through exact
    transforms, followed by two renormalizations.  The result is
    symmetric in x and y bit-for-bit because every intermediate is.
    """
    xh, xl = x
    yh, yl = y
    s, e = two_sum(xh, yh)
    t, f = two_sum(xl, yl)
    e = e + t
    s, e = quick_two_sum(s, e)
    e = e + f
    return quick_two_sum(s, e)


def dd_mul(x, y):
    """Multiply two double-double values given as (hi, lo) pairs."""
    xh, xl = x
    yh, yl = y
    p, e = two_prod(xh, yh)
    e = e + (xh * yl + xl * yh)
    return quick_two_sum(p, e)


def dd_neg(x):
    return -x[0], -x[1]


def dd_sqrt(x):
    """Square root of a scalar double-double ``x = (hi, lo)``.

    One Newton/Karp correction on top of the double sqrt; raises
    ``ValueError`` on negative input (callers that want clamping must
    clamp before calling).
    """
    hi, lo = x
    if hi < 0.0:
        raise ValueError("dd_sqrt of negative value")
    if hi == 0.0:
        return 0.0, 0.0
    a = math.sqrt(hi)
    p, e = two_prod(a, a)
    d = dd_add(x, (-p, -e))
    corr = (d[0] + d[1]) / (2.0 * a)
    return quick_two_sum(a, corr)


def dd_sum(hi, lo):
    """Sum the double-double entries of paired (hi, lo) arrays.

    Pairwise (balanced-tree) reduction, front half against back half,
    so the evaluation order is deterministic and independent of any
    BLAS blocking.  Returns a scalar (hi, lo) pair.
    """
    h = np.asarray(hi, dtype=float).copy()
    l = np.asarray(lo, dtype=float).copy()
    n = h.size
    while n > 1:
        half = (n + 1) // 2
        m = n - half
        h[:m], l[:m] = dd_add((h[:m], l[:m]), (h[half:n], l[half:n]))
        n = half
    return float(h[0]), float(l[0])


@dataclass(frozen=True)
class DoubleDouble:
    """Convenience wrapper over the (hi, lo) pair kernels.

    The functional kernels above are what the numerical code calls (they
    vectorize); this class exists for scalar work and tests.
    """

    hi: float
    lo: float = 0.0

    @staticmethod
    def from_float(a: float) -> "DoubleDouble":
        return DoubleDouble(float(a), 0.0)

    def __add__(self, other: "DoubleDouble") -> "DoubleDouble":
        return DoubleDouble(*dd_add((self.hi, self.lo), (other.hi, other.lo)))

    def __sub__(self, other: "DoubleDouble") -> "DoubleDouble":
        return DoubleDouble(*dd_add((self.hi, self.lo), (-other.hi, -other.lo)))

    def __mul__(self, other: "DoubleDouble") -> "DoubleDouble":
        return DoubleDouble(*dd_mul((self.hi, self.lo), (other.hi, other.lo)))

    def __neg__(self) -> "DoubleDouble":
        return DoubleDouble(-self.hi, -self.lo)

    def sqrt(self) -> "DoubleDouble":
        return DoubleDouble(*dd_sqrt((self.hi, self.lo)))

    def __float__(self) -> float:
        return self.hi + self.lo
