"""Forward-mode automatic differentiation over any scalar type.

:class:`Dual1` carries a value and a sparse gradient, :class:`Dual2` adds a
sparse upper-triangular Hessian.  The scalar type ``S`` can be a float, an
:class:`~aereach.interval.Interval` or an :class:`~aereach.affine.AffineForm`;
mixed operations with plain constants of those types are supported.
"""

from __future__ import annotations

from typing import Callable, Mapping, Sequence

from . import _scalar as sc
from .affine import AffineForm
from .interval import Box, Interval


class Dual1:
    """Value with a gradient ``{variable index: partial derivative}``."""

    __slots__ = ("value", "grad")

    def __init__(self, value, grad: dict | None = None):
        self.value = value
        self.grad = grad if grad is not None else {}

    def partial(self, i: int, zero=0.0):
        return self.grad.get(i, zero)

    def _chain(self, value, deriv) -> Dual1:
        return Dual1(value, {k: g * deriv for k, g in self.grad.items()})

    def __add__(self, o):
        if isinstance(o, Dual1):
            g = dict(self.grad)
            for k, v in o.grad.items():
                w = g.get(k)
                g[k] = v if w is None else w + v
            return Dual1(self.value + o.value, g)
        if isinstance(o, Dual2):
            return NotImplemented
        return Dual1(self.value + o, self.grad)

    __radd__ = __add__

    def __neg__(self) -> Dual1:
        return Dual1(-self.value, {k: -v for k, v in self.grad.items()})

    def __sub__(self, o):
        if isinstance(o, Dual1):
            g = dict(self.grad)
            for k, v in o.grad.items():
                w = g.get(k)
                g[k] = -v if w is None else w - v
            return Dual1(self.value - o.value, g)
        if isinstance(o, Dual2):
            return NotImplemented
        return Dual1(self.value - o, self.grad)

    def __rsub__(self, o):
        return Dual1(o - self.value, {k: -v for k, v in self.grad.items()})

    def __mul__(self, o):
        if isinstance(o, Dual1):
            a, b = self.value, o.value
            g = {k: v * b for k, v in self.grad.items()}
            for k, v in o.grad.items():
                w = g.get(k)
                g[k] = a * v if w is None else w + a * v
            return Dual1(a * b, g)
        if isinstance(o, Dual2):
            return NotImplemented
        return Dual1(self.value * o, {k: v * o for k, v in self.grad.items()})

    __rmul__ = __mul__

    def reciprocal(self) -> Dual1:
        inv = sc.reciprocal(self.value)
        return self._chain(inv, -(inv * inv))

    def __truediv__(self, o):
        if isinstance(o, Dual1):
            return self * o.reciprocal()
        if isinstance(o, Dual2):
            return NotImplemented
        inv = sc.reciprocal(o)
        return self * inv

    def __rtruediv__(self, o):
        return self.reciprocal() * o

    def pow_int(self, n: int) -> Dual1:
        if n == 0:
            return Dual1(sc.pow_int(self.value, 0), {})
        if n == 1:
            return self
        if n == 2:
            return self._chain(sc.pow_int(self.value, 2), self.value * 2.0)
        return self._chain(sc.pow_int(self.value, n), sc.pow_int(self.value, n - 1) * float(n))

    def __pow__(self, n):
        if isinstance(n, int):
            return self.pow_int(n)
        return NotImplemented

    def exp(self) -> Dual1:
        e = sc.exp(self.value)
        return self._chain(e, e)

    def log(self) -> Dual1:
        return self._chain(sc.log(self.value), sc.reciprocal(self.value))

    def sqrt(self) -> Dual1:
        s = sc.sqrt(self.value)
        return self._chain(s, sc.reciprocal(s) * 0.5)

    def sin(self) -> Dual1:
        return self._chain(sc.sin(self.value), sc.cos(self.value))

    def cos(self) -> Dual1:
        return self._chain(sc.cos(self.value), -sc.sin(self.value))

    def __repr__(self) -> str:
        return f"Dual1({self.value!r}, {self.grad!r})"


def _hkey(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i <= j else (j, i)


class Dual2:
    """Second-order dual number.  Hessian entries are stored once per pair
    ``i <= j``, so the Hessian is symmetric by construction."""

    __slots__ = ("value", "grad", "hess")

    def __init__(self, value, grad: dict | None = None, hess: dict | None = None):
        self.value = value
        self.grad = grad if grad is not None else {}
        self.hess = hess if hess is not None else {}

    def partial(self, i: int, zero=0.0):
        return self.grad.get(i, zero)

    def second(self, i: int, j: int, zero=0.0):
        return self.hess.get(_hkey(i, j), zero)

    def _chain(self, value, d1, d2) -> Dual2:
        """Apply a unary function with first and second derivatives d1, d2."""
        grad = {k: g * d1 for k, g in self.grad.items()}
        hess = {k: h * d1 for k, h in self.hess.items()}
        items = sorted(self.grad.items())
        for a, (i, gi) in enumerate(items):
            gi2 = gi * d2
            for j, gj in items[a:]:
                term = gi2 * gj
                key = (i, j)
                h = hess.get(key)
                hess[key] = term if h is None else h + term
        return Dual2(value, grad, hess)

    def _scaled(self, value, s) -> Dual2:
        return Dual2(value, {k: g * s for k, g in self.grad.items()},
                     {k: h * s for k, h in self.hess.items()})

    def __add__(self, o):
        if isinstance(o, Dual2):
            return Dual2(self.value + o.value, _merge(self.grad, o.grad, 1.0),
                         _merge(self.hess, o.hess, 1.0))
        return Dual2(self.value + o, self.grad, self.hess)

    __radd__ = __add__

    def __neg__(self) -> Dual2:
        return self._scaled(-self.value, -1.0)

    def __sub__(self, o):
        if isinstance(o, Dual2):
            return Dual2(self.value - o.value, _merge(self.grad, o.grad, -1.0),
                         _merge(self.hess, o.hess, -1.0))
        return Dual2(self.value - o, self.grad, self.hess)

    def __rsub__(self, o):
        return (-self) + o

    def __mul__(self, o):
        if not isinstance(o, Dual2):
            return self._scaled(self.value * o, o)
        a, b = self.value, o.value
        grad = {k: v * b for k, v in self.grad.items()}
        for k, v in o.grad.items():
            w = grad.get(k)
            grad[k] = a * v if w is None else w + a * v
        hess = {k: v * b for k, v in self.hess.items()}
        for k, v in o.hess.items():
            w = hess.get(k)
            hess[k] = a * v if w is None else w + a * v
        # cross terms g_a[i] g_b[j] + g_a[j] g_b[i]
        keys = sorted(set(self.grad) | set(o.grad))
        for p, i in enumerate(keys):
            ai, bi = self.grad.get(i), o.grad.get(i)
            for j in keys[p:]:
                aj, bj = self.grad.get(j), o.grad.get(j)
                term = None
                if ai is not None and bj is not None:
                    term = ai * bj
                if i != j and aj is not None and bi is not None:
                    t2 = aj * bi
                    term = t2 if term is None else term + t2
                elif i == j and term is not None:
                    term = term * 2.0
                if term is None:
                    continue
                w = hess.get((i, j))
                hess[(i, j)] = term if w is None else w + term
        return Dual2(a * b, grad, hess)

    __rmul__ = __mul__

    def reciprocal(self) -> Dual2:
        inv = sc.reciprocal(self.value)
        inv2 = inv * inv
        return self._chain(inv, -inv2, inv2 * inv * 2.0)

    def __truediv__(self, o):
        if isinstance(o, Dual2):
            return self * o.reciprocal()
        return self * sc.reciprocal(o)

    def __rtruediv__(self, o):
        return self.reciprocal() * o

    def pow_int(self, n: int) -> Dual2:
        if n == 0:
            return Dual2(sc.pow_int(self.value, 0))
        if n == 1:
            return self
        v = self.value
        d1 = sc.pow_int(v, n - 1) * float(n)
        d2 = sc.pow_int(v, n - 2) * float(n * (n - 1)) if n != 2 else 2.0
        return self._chain(sc.pow_int(v, n), d1, d2)

    def __pow__(self, n):
        if isinstance(n, int):
            return self.pow_int(n)
        return NotImplemented

    def exp(self) -> Dual2:
        e = sc.exp(self.value)
        return self._chain(e, e, e)

    def log(self) -> Dual2:
        inv = sc.reciprocal(self.value)
        return self._chain(sc.log(self.value), inv, -(inv * inv))

    def sqrt(self) -> Dual2:
        s = sc.sqrt(self.value)
        inv = sc.reciprocal(s)
        # d/dx sqrt = 1/(2 sqrt x), d2 = -1/(4 x sqrt x)
        return self._chain(s, inv * 0.5, -(inv * inv * inv) * 0.25)

    def sin(self) -> Dual2:
        s, c = sc.sin(self.value), sc.cos(self.value)
        return self._chain(s, c, -s)

    def cos(self) -> Dual2:
        s, c = sc.sin(self.value), sc.cos(self.value)
        return self._chain(c, -s, -c)

    def __repr__(self) -> str:
        return f"Dual2({self.value!r}, {self.grad!r}, {self.hess!r})"


def _merge(a: dict, b: dict, sign: float) -> dict:
    out = dict(a)
    for k, v in b.items():
        w = out.get(k)
        if sign < 0.0:
            out[k] = -v if w is None else w - v
        else:
            out[k] = v if w is None else w + v
    return out


def unit_of(value):
    """The multiplicative unit in the scalar type of ``value``."""
    if isinstance(value, Interval):
        return Interval(1.0)
    if isinstance(value, AffineForm):
        return AffineForm(1.0, {}, value.ctx)
    return 1.0


def zero_of(value):
    if isinstance(value, Interval):
        return Interval(0.0)
    if isinstance(value, AffineForm):
        return AffineForm(0.0, {}, value.ctx)
    return 0.0


def seed_dual1(values: Sequence) -> list[Dual1]:
    """Independent variables: the i-th gets gradient e_i."""
    return [Dual1(v, {i: unit_of(v)}) for i, v in enumerate(values)]


def seed_dual2(values: Sequence) -> list[Dual2]:
    return [Dual2(v, {i: unit_of(v)}, {}) for i, v in enumerate(values)]


def jacobian_eval(exprs, env: Mapping[str, object], params: Mapping[str, float] | None = None):
    """Jacobian of ``exprs`` with respect to the variables of ``env``.

    Entry ``[i][j]`` is the partial derivative of expression i with respect
    to the j-th variable of ``env`` (in insertion order), computed in the
    scalar type of the environment values.
    """
    from .expr import compile_expr

    names = list(env)
    index = {n: i for i, n in enumerate(names)}
    values = seed_dual1([env[n] for n in names])
    zeros = [zero_of(env[n]) for n in names]
    rows = []
    for e in exprs:
        out = compile_expr(e, index, params or {})(values)
        if not isinstance(out, Dual1):
            out = Dual1(out, {})
        rows.append([out.grad.get(j, zeros[j]) for j in range(len(names))])
    return rows


def hessian_bound(expr, b: Box, names: Sequence[str],
                  params: Mapping[str, float] | None = None) -> list[list[Interval]]:
    """Interval enclosure of the Hessian of ``expr`` over the box ``b``."""
    from .expr import compile_expr

    index = {n: i for i, n in enumerate(names)}
    values = seed_dual2(list(b))
    out = compile_expr(expr, index, params or {})(values)
    m = len(names)
    zero = Interval(0.0)
    if not isinstance(out, Dual2):
        return [[zero] * m for _ in range(m)]
    return [[_as_iv(out.second(i, j, zero)) for j in range(m)] for i in range(m)]


def _as_iv(x) -> Interval:
    return x if isinstance(x, Interval) else Interval(x)


Evaluator = Callable[[Sequence], object]
