"""Directed rounding on top of round-to-nearest IEEE doubles.

All outward rounding in the package funnels through this module.  Sums and
products use error-free transformations to detect exact results, so an exact
operation is not widened.  Inexact ones move one representable step in the
requested direction, which is rigorous because the hardware result is
correctly rounded.  Transcendental endpoints come from mpmath's directed
rounding at 53 bits.
"""

from __future__ import annotations

import math
import sys

from mpmath.libmp import (
    from_float,
    mpf_abs,
    mpf_add,
    mpf_cos,
    mpf_exp,
    mpf_log,
    mpf_shift,
    mpf_sin,
    mpf_sub,
    round_ceiling,
    round_floor,
    round_nearest,
    to_float,
)

INF = math.inf
MAX_FLOAT = sys.float_info.max
# unit roundoff (half an ulp of 1) and the smallest subnormal
HALF_EPS = 2.0**-53
TINY = 2.0**-1074

_SPLIT = 134217729.0  # 2**27 + 1
_SPLIT_LIMIT = 2.0**995
_UNDERFLOW_LIMIT = 2.0**-969

_nextafter = math.nextafter
_isfinite = math.isfinite


def down(x: float) -> float:
    """The next representable value below ``x``."""
    return _nextafter(x, -INF)


def up(x: float) -> float:
    """The next representable value above ``x``."""
    return _nextafter(x, INF)


def two_sum_err(a: float, b: float, s: float) -> float:
    """Exact ``a + b - s`` for ``s = fl(a + b)`` (Knuth's TwoSum)."""
    bb = s - a
    return (a - (s - bb)) + (b - bb)


def two_prod_err(a: float, b: float, p: float) -> float:
    """Exact ``a * b - p`` for ``p = fl(a * b)`` (Dekker's product).

    Valid only when neither splitting overflows nor the error underflows;
    callers check :func:`_dekker_safe` first.
    """
    t = _SPLIT * a
    ah = t - (t - a)
    al = a - ah
    t = _SPLIT * b
    bh = t - (t - b)
    bl = b - bh
    return ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _dekker_safe(a: float, b: float, p: float) -> bool:
    return (
        abs(a) < _SPLIT_LIMIT
        and abs(b) < _SPLIT_LIMIT
        and (abs(p) > _UNDERFLOW_LIMIT or (p == 0.0 and (a == 0.0 or b == 0.0)))
    )


def add_down(a: float, b: float) -> float:
    s = a + b
    if s != s:
        return -INF
    if not _isfinite(s):
        if s == INF and _isfinite(a) and _isfinite(b):
            return MAX_FLOAT
        return s
    return _nextafter(s, -INF) if two_sum_err(a, b, s) < 0.0 else s


def add_up(a: float, b: float) -> float:
    s = a + b
    if s != s:
        return INF
    if not _isfinite(s):
        if s == -INF and _isfinite(a) and _isfinite(b):
            return -MAX_FLOAT
        return s
    return _nextafter(s, INF) if two_sum_err(a, b, s) > 0.0 else s


def sub_down(a: float, b: float) -> float:
    return add_down(a, -b)


def sub_up(a: float, b: float) -> float:
    return add_up(a, -b)


def mul_down(a: float, b: float) -> float:
    p = a * b
    if p != p:
        return 0.0  # 0 * inf inside an interval product
    if not _isfinite(p):
        if p == INF and _isfinite(a) and _isfinite(b):
            return MAX_FLOAT
        return p
    if p == 0.0 and a != 0.0 and b != 0.0:
        return 0.0 if (a > 0.0) == (b > 0.0) else -TINY
    if _dekker_safe(a, b, p):
        return _nextafter(p, -INF) if two_prod_err(a, b, p) < 0.0 else p
    return _nextafter(p, -INF)


def mul_up(a: float, b: float) -> float:
    p = a * b
    if p != p:
        return 0.0
    if not _isfinite(p):
        if p == -INF and _isfinite(a) and _isfinite(b):
            return -MAX_FLOAT
        return p
    if p == 0.0 and a != 0.0 and b != 0.0:
        return TINY if (a > 0.0) == (b > 0.0) else 0.0
    if _dekker_safe(a, b, p):
        return _nextafter(p, INF) if two_prod_err(a, b, p) > 0.0 else p
    return _nextafter(p, INF)


def _quotient_error_sign(a: float, b: float, q: float) -> int | None:
    """Sign of ``a/b - q`` computed exactly, or None when that is not safe."""
    p = q * b
    if not _dekker_safe(q, b, p):
        return None
    e = two_prod_err(q, b, p)
    d = a - p
    if two_sum_err(a, -p, d) != 0.0:
        return None
    r = d - e  # a - q*b exactly up to the sign of a rounded difference
    if r == 0.0:
        return 0
    return 1 if (r > 0.0) == (b > 0.0) else -1


def div_down(a: float, b: float) -> float:
    q = a / b
    if q != q:
        return -INF
    if not _isfinite(q):
        if q == INF and _isfinite(a) and b != 0.0:
            return MAX_FLOAT
        return q
    sign = _quotient_error_sign(a, b, q)
    if sign is not None and sign >= 0:
        return q
    return _nextafter(q, -INF)


def div_up(a: float, b: float) -> float:
    q = a / b
    if q != q:
        return INF
    if not _isfinite(q):
        if q == -INF and _isfinite(a) and b != 0.0:
            return -MAX_FLOAT
        return q
    sign = _quotient_error_sign(a, b, q)
    if sign is not None and sign <= 0:
        return q
    return _nextafter(q, INF)


def sqrt_down(x: float) -> float:
    r = math.sqrt(x)
    p = r * r
    if p == x and two_prod_err(r, r, p) == 0.0:
        return r
    return max(_nextafter(r, -INF), 0.0)


def sqrt_up(x: float) -> float:
    r = math.sqrt(x)
    if r == INF:
        return r
    p = r * r
    if p == x and two_prod_err(r, r, p) == 0.0:
        return r
    return _nextafter(r, INF)


def sum_up(values) -> float:
    """Upper bound on the exact sum of nonnegative floats."""
    total = 0.0
    for v in values:
        total = add_up(total, v)
    return total


def error_bound(abs_sum: float, count: int) -> float:
    """Bound on the accumulated rounding error of ``count`` round-to-nearest
    operations whose exact results have magnitudes summing to ``abs_sum``."""
    if abs_sum == 0.0 and count == 0:
        return 0.0
    return up(abs_sum * (HALF_EPS * (1.0 + 2.0**-40)) + count * TINY)


_MPF_FUNCS = {"exp": mpf_exp, "log": mpf_log, "sin": mpf_sin, "cos": mpf_cos}


def _mpf_to_float(value, rnd) -> float:
    out = to_float(value, rnd=rnd)
    if out == INF and rnd == round_floor:
        return MAX_FLOAT
    if out == -INF and rnd == round_ceiling:
        return -MAX_FLOAT
    return out


_WORK_PREC = 128
_EXACT = {("exp", 0.0): 1.0, ("log", 1.0): 0.0, ("sin", 0.0): 0.0, ("cos", 0.0): 1.0}


def _elem_bound(name: str, x: float, rounding) -> float:
    # mpmath's directed modes are not guaranteed correctly rounded, so work
    # at higher precision and widen by a relative margin far above its error
    exact = _EXACT.get((name, x))
    if exact is not None:
        return exact
    v = _MPF_FUNCS[name](from_float(x), _WORK_PREC, round_nearest)
    margin = mpf_shift(mpf_abs(v), -100)
    if rounding == round_floor:
        v = mpf_sub(v, margin, _WORK_PREC, round_floor)
    else:
        v = mpf_add(v, margin, _WORK_PREC, round_ceiling)
    out = _mpf_to_float(v, rounding)
    if name in ("sin", "cos"):
        out = min(max(out, -1.0), 1.0)
    return out


def elem_down(name: str, x: float) -> float:
    """Rigorous lower bound of ``name(x)`` for name in exp/log/sin/cos."""
    if x == INF and name in ("exp", "log"):
        return MAX_FLOAT
    return _elem_bound(name, x, round_floor)


def elem_up(name: str, x: float) -> float:
    """Rigorous upper bound of ``name(x)`` for name in exp/log/sin/cos."""
    if x == INF and name in ("exp", "log"):
        return INF
    return _elem_bound(name, x, round_ceiling)


def is_power_of_two(x: float) -> bool:
    return x != 0.0 and _isfinite(x) and abs(math.frexp(x)[0]) == 0.5


def exact_sum_bounds(values: list) -> tuple[float, float]:
    """Tightest float bounds on the exact sum of ``values``.

    ``math.fsum`` rounds the exact sum correctly; a second pass over the
    residual tells on which side the exact sum lies.
    """
    try:
        s = math.fsum(values)
    except (OverflowError, ValueError):
        return -INF, INF
    if not _isfinite(s):
        return (s, s) if all(_isfinite(v) or v == s for v in values) else (-INF, INF)
    values.append(-s)
    r = math.fsum(values)
    values.pop()
    lo = s if r >= 0.0 else _nextafter(s, -INF)
    hi = s if r <= 0.0 else _nextafter(s, INF)
    return lo, hi


def product_parts(a: float, b: float) -> tuple[float, float, float]:
    """``(p, e, slack)`` with ``a*b`` in ``p + e + [-slack, slack]``."""
    p = a * b
    if p != p:
        return 0.0, 0.0, 0.0
    if _isfinite(p) and _dekker_safe(a, b, p):
        return p, two_prod_err(a, b, p), 0.0
    if not _isfinite(p):
        return p, 0.0, 0.0
    return p, 0.0, abs(p) * 2.0**-52 + TINY
