"""Affine arithmetic over shared noise symbols.

An :class:`AffineForm` denotes ``center + sum(coeff[j] * eps_j)`` with every
``eps_j`` in ``[-1, 1]``.  Rounding errors and nonlinear remainders are folded
into one fresh symbol per operation, so a form's full range always encloses
the exact real result.  Symbols can later be restricted to sub-ranges of
``[-1, 1]`` when a form is turned back into an interval.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import _rounding as rnd
from .interval import Box, DomainError, Interval

SymbolRestriction = Mapping[int, Interval]

_abs = abs
_SUBNORMAL_EDGE = 2.0**-1021


class NoiseContext:
    """Issues noise-symbol indices for one computation.

    Symbols created through :meth:`new_input` are protected: the symbol cap
    never merges them, since they carry the correlation with the inputs.
    """

    def __init__(self, max_symbols: int = 48):
        self.next_index = 0
        self.inputs: set[int] = set()
        self.max_symbols = max_symbols

    def fresh(self) -> int:
        idx = self.next_index
        self.next_index += 1
        return idx

    def new_input(self) -> int:
        idx = self.fresh()
        self.inputs.add(idx)
        return idx


class AffineForm:
    __slots__ = ("center", "terms", "ctx")

    def __init__(self, center: float, terms: dict[int, float] | None = None,
                 ctx: NoiseContext | None = None):
        self.center = float(center)
        self.terms = terms if terms is not None else {}
        self.ctx = ctx

    # construction -------------------------------------------------------------
    @classmethod
    def constant(cls, value: float, ctx: NoiseContext | None = None) -> AffineForm:
        return cls(value, {}, ctx)

    @classmethod
    def from_interval(cls, iv: Interval, ctx: NoiseContext, protected: bool = False) -> AffineForm:
        """Form ``c + r*eps`` covering ``iv`` with a new symbol (none for points)."""
        if iv.is_empty():
            raise DomainError("cannot build an affine form from an empty interval")
        c = iv.mid()
        r = iv.outer_rad(c)
        if r == 0.0:
            return cls(c, {}, ctx)
        idx = ctx.new_input() if protected else ctx.fresh()
        return cls(c, {idx: r}, ctx)

    # inspection ----------------------------------------------------------------
    def is_constant(self) -> bool:
        return not self.terms

    def radius_up(self) -> float:
        """Upper bound on the sum of absolute coefficients."""
        n = len(self.terms)
        if n <= 1:
            return _abs(next(iter(self.terms.values()))) if n else 0.0
        return rnd.exact_sum_bounds([_abs(v) for v in self.terms.values()])[1]

    def range(self) -> Interval:
        """Full instantiation, every symbol over ``[-1, 1]``."""
        if not self.terms:
            return Interval(self.center)
        mags = [_abs(v) for v in self.terms.values()]
        lo = rnd.exact_sum_bounds([self.center] + [-m for m in mags])[0]
        mags.append(self.center)
        hi = rnd.exact_sum_bounds(mags)[1]
        return Interval(lo, hi)

    def instantiate(self, restr: SymbolRestriction | None = None) -> Interval:
        """Interval enclosure with some symbols restricted to sub-ranges."""
        if not restr:
            return self.range()
        lo_parts = [self.center]
        hi_parts = [self.center]
        parts = rnd.product_parts
        for idx, coeff in self.terms.items():
            r = restr.get(idx)
            if r is None:
                a = _abs(coeff)
                lo_parts.append(-a)
                hi_parts.append(a)
                continue
            if r.lo == 0.0 and r.hi == 0.0:
                continue
            p1, e1, s1 = parts(coeff, r.lo)
            p2, e2, s2 = parts(coeff, r.hi)
            if (p1 + e1, p1) > (p2 + e2, p2):
                p1, e1, s1, p2, e2, s2 = p2, e2, s2, p1, e1, s1
            lo_parts.extend((p1, e1, -s1))
            hi_parts.extend((p2, e2, s2))
        return Interval(rnd.exact_sum_bounds(lo_parts)[0], rnd.exact_sum_bounds(hi_parts)[1])

    def value_at(self, eps: Mapping[int, float]) -> float:
        """Float evaluation at a symbol assignment (missing symbols are 0)."""
        return self.center + sum(c * eps.get(i, 0.0) for i, c in self.terms.items())

    # arithmetic -------------------------------------------------------------------
    def _ctx_with(self, other) -> NoiseContext | None:
        if self.ctx is not None:
            return self.ctx
        return getattr(other, "ctx", None)

    def __neg__(self) -> AffineForm:
        return AffineForm(-self.center, {k: -v for k, v in self.terms.items()}, self.ctx)

    def __pos__(self) -> AffineForm:
        return self

    def __add__(self, other):
        if isinstance(other, AffineForm):
            return _add(self, other, 1.0)
        if isinstance(other, (int, float)):
            return _shift(self, float(other))
        if isinstance(other, Interval):
            return _add(self, _lift(other, self.ctx), 1.0)
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, AffineForm):
            return _add(self, other, -1.0)
        if isinstance(other, (int, float)):
            return _shift(self, -float(other))
        if isinstance(other, Interval):
            return _add(self, _lift(other, self.ctx), -1.0)
        return NotImplemented

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        if isinstance(other, AffineForm):
            return _mul(self, other)
        if isinstance(other, (int, float)):
            return self.scale(float(other))
        if isinstance(other, Interval):
            if other.is_point():
                return self.scale(other.lo)
            return _mul(self, _lift(other, self.ctx))
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            other = float(other)
            if other == 0.0:
                raise DomainError("division of an affine form by 0")
            if rnd.is_power_of_two(other):
                return self.scale(1.0 / other)
            return _mul(self, _lift(Interval(1.0) / Interval(other), self.ctx))
        if isinstance(other, Interval):
            return self * other.reciprocal()
        if isinstance(other, AffineForm):
            return _mul(self, other.reciprocal())
        return NotImplemented

    def __rtruediv__(self, other):
        if isinstance(other, (int, float, Interval)):
            return self.reciprocal() * other
        return NotImplemented

    def __pow__(self, n):
        if isinstance(n, int):
            return self.pow_int(n)
        return NotImplemented

    def scale(self, s: float) -> AffineForm:
        if s == 0.0:
            return AffineForm(0.0, {}, self.ctx)
        if s == 1.0:
            return self
        terms = {k: v * s for k, v in self.terms.items()}
        c = self.center * s
        count = len(terms) + (c != 0.0)
        if rnd.is_power_of_two(s):
            # exact unless a result lands in the subnormal range
            smallest = min((_abs(v) for v in terms.values()), default=math.inf)
            if c != 0.0:
                smallest = min(smallest, _abs(c))
            err = rnd.error_bound(0.0, count) if smallest < _SUBNORMAL_EDGE else 0.0
        else:
            mag = _abs(c)
            for v in terms.values():
                mag += _abs(v)
            err = rnd.error_bound(mag, count)
        return _finish(c, terms, err, self.ctx)

    # nonlinear unary functions ------------------------------------------------------
    def sqr(self) -> AffineForm:
        return self.pow_int(2)

    def pow_int(self, n: int) -> AffineForm:
        if n == 0:
            return AffineForm(1.0, {}, self.ctx)
        if n == 1:
            return self
        if n < 0:
            x = self.range()
            if x.lo <= 0.0 <= x.hi:
                raise DomainError(f"negative power of an affine form with range {x}")
        return self._unary(lambda iv: iv.pow_int(n),
                           lambda iv: iv.pow_int(n - 1) * n)

    def reciprocal(self) -> AffineForm:
        x = self.range()
        if x.lo <= 0.0 <= x.hi:
            raise DomainError(f"division by an affine form with range {x}, which contains 0")
        return self._unary(Interval.reciprocal, lambda iv: -(iv.pow_int(-2)))

    def sqrt(self) -> AffineForm:
        x = self.range()
        if x.lo < 0.0:
            raise DomainError(f"sqrt of an affine form with range {x}")
        if x.lo == 0.0:
            # derivative unbounded at 0; fall back to the interval image
            return self._unary(Interval.sqrt, lambda iv: Interval(0.0, math.inf))
        return self._unary(Interval.sqrt, lambda iv: Interval(0.5) / iv.sqrt())

    def exp(self) -> AffineForm:
        return self._unary(Interval.exp, Interval.exp)

    def log(self) -> AffineForm:
        x = self.range()
        if x.lo <= 0.0:
            raise DomainError(f"log of an affine form with range {x}")
        return self._unary(Interval.log, Interval.reciprocal)

    def sin(self) -> AffineForm:
        return self._unary(Interval.sin, Interval.cos)

    def cos(self) -> AffineForm:
        return self._unary(Interval.cos, lambda iv: -iv.sin())

    def _unary(self, f: Callable[[Interval], Interval],
               df: Callable[[Interval], Interval]) -> AffineForm:
        """Min-range linearization ``f(x) ~ alpha*x + zeta +- delta``.

        ``alpha`` is the end of the derivative enclosure closest to zero, which
        makes ``f(x) - alpha*x`` monotone over the whole range of the form; its
        image is then read off at the two endpoints.  When the derivative
        changes sign the slope is 0 and the interval image is used.
        """
        x = self.range()
        if x.is_point() or not x.is_finite():
            img = f(x)
            if img.is_point():
                return AffineForm(img.lo, {}, self.ctx)
            return _from_range(img, self.ctx)
        d = df(x)
        if d.is_finite() and d.lo > 0.0:
            alpha, increasing = d.lo, True
        elif d.is_finite() and d.hi < 0.0:
            alpha, increasing = d.hi, False
        else:
            alpha = 0.0
        if alpha == 0.0:
            return _from_range(f(x), self.ctx)
        g_lo = f(Interval(x.lo)) - Interval(x.lo) * alpha
        g_hi = f(Interval(x.hi)) - Interval(x.hi) * alpha
        g = Interval(g_lo.lo, g_hi.hi) if increasing else Interval(g_hi.lo, g_lo.hi)
        zeta = g.mid()
        delta = g.outer_rad(zeta)
        lin = self.scale(alpha)
        return _shift(lin, zeta, extra=delta)

    # rendering -------------------------------------------------------------------------
    def __repr__(self) -> str:
        parts = [repr(self.center)]
        for k in sorted(self.terms):
            v = self.terms[k]
            parts.append(f"{'-' if v < 0 else '+'} {abs(v)!r}*e{k}")
        return "AffineForm(" + " ".join(parts) + ")"


def _lift(iv: Interval, ctx: NoiseContext | None) -> AffineForm:
    if iv.is_point():
        return AffineForm(iv.lo, {}, ctx)
    if ctx is None:
        raise ValueError("a noise context is needed to lift a non-point interval")
    return AffineForm.from_interval(iv, ctx)


def _from_range(iv: Interval, ctx: NoiseContext | None) -> AffineForm:
    c = iv.mid()
    r = iv.outer_rad(c)
    return _finish(c, {}, r, ctx)


def _finish(center: float, terms: dict[int, float], err: float,
            ctx: NoiseContext | None) -> AffineForm:
    if err > 0.0:
        if ctx is None:
            raise ValueError("a noise context is needed to record a rounding error")
        terms[ctx.fresh()] = err
    if ctx is not None and len(terms) > ctx.max_symbols:
        _condense(terms, ctx)
    return AffineForm(center, terms, ctx)


def _condense(terms: dict[int, float], ctx: NoiseContext) -> None:
    """Merge the smallest unprotected symbols into one fresh symbol,
    going down to a low-water mark below the cap."""
    cap = ctx.max_symbols
    protected = ctx.inputs
    keys = [k for k in terms if k not in protected]
    if len(keys) < 2:
        return
    count = min(len(keys), max(2, len(terms) - (cap - max(1, cap // 8)) + 1))
    mags = np.abs(np.fromiter((terms[k] for k in keys), dtype=float, count=len(keys)))
    if count < len(keys):
        chosen = np.argpartition(mags, count - 1)[:count]
    else:
        chosen = np.arange(len(keys))
    for c in chosen.tolist():
        del terms[keys[c]]
    total = math.fsum(mags[chosen].tolist())
    terms[ctx.fresh()] = rnd.up(total)  # fsum is correctly rounded


def _shift(a: AffineForm, s: float, extra: float = 0.0) -> AffineForm:
    c = a.center + s
    err = extra
    e = rnd.two_sum_err(a.center, s, c) if math.isfinite(c) else math.inf
    if e != 0.0:
        err = rnd.add_up(err, _abs(e))
    return _finish(c, dict(a.terms), err, a.ctx)


def _add(a: AffineForm, b: AffineForm, sign: float) -> AffineForm:
    ctx = a._ctx_with(b)
    terms = dict(a.terms)
    err = 0.0
    two_sum_err = rnd.two_sum_err
    for k, v in b.terms.items():
        if sign < 0.0:
            v = -v
        w = terms.get(k)
        if w is None:
            terms[k] = v
            continue
        s = w + v
        e = two_sum_err(w, v, s)
        if e != 0.0:
            err += _abs(e)
        if s == 0.0:
            del terms[k]
        else:
            terms[k] = s
    bc = b.center if sign > 0.0 else -b.center
    c = a.center + bc
    e = two_sum_err(a.center, bc, c)
    if e != 0.0:
        err += _abs(e)
    if err != 0.0:
        # each TwoSum error is exact; only their float sum needs a margin
        err = rnd.add_up(err, rnd.error_bound(err, len(terms) + 1))
    if not math.isfinite(c) or err != err:
        err = math.inf
    return _finish(c, terms, err, ctx)


def _mul(a: AffineForm, b: AffineForm) -> AffineForm:
    if not b.terms:
        return a.scale(b.center)
    if not a.terms:
        return b.scale(a.center)
    ctx = a._ctx_with(b)
    ca, cb = a.center, b.center
    terms: dict[int, float] = {}
    mag = 0.0
    count = 0
    if cb != 0.0:
        count += len(a.terms)
        for k, v in a.terms.items():
            p = cb * v
            terms[k] = p
            mag += _abs(p)
    if ca != 0.0:
        count += len(b.terms)
        for k, v in b.terms.items():
            p = ca * v
            mag += _abs(p)
            w = terms.get(k)
            if w is None:
                terms[k] = p
            else:
                s = w + p
                mag += _abs(s)
                terms[k] = s
                count += 1
    c = ca * cb
    mag += _abs(c)
    err = rnd.error_bound(mag, count + 1) if (count or c != 0.0) else 0.0
    rem = rnd.mul_up(a.radius_up(), b.radius_up())
    for k in [k for k, v in terms.items() if v == 0.0]:
        del terms[k]
    return _finish(c, terms, rnd.add_up(err, rem), ctx)


def af_from_box(b: Box, ctx: NoiseContext, protected: bool = True) -> list[AffineForm]:
    """One affine form per box component, each with its own new symbol."""
    if b.is_empty():
        raise DomainError("af_from_box on an empty box")
    return [AffineForm.from_interval(c, ctx, protected=protected) for c in b]


def af_instantiate(a: AffineForm, restr: SymbolRestriction | None = None) -> Interval:
    return a.instantiate(restr)


def restriction(pairs: Iterable[tuple[int, Interval | Sequence[float]]]) -> dict[int, Interval]:
    """Build a symbol restriction, checking each range lies in ``[-1, 1]``."""
    out: dict[int, Interval] = {}
    for idx, r in pairs:
        iv = r if isinstance(r, Interval) else Interval(*r)
        if iv.is_empty() or iv.lo < -1.0 or iv.hi > 1.0:
            raise ValueError(f"restriction {iv} of symbol {idx} is not inside [-1, 1]")
        out[idx] = iv
    return out

