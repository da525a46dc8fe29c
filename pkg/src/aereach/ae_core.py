"""Inner and outer range bounds for one scalar function over a box.

All extensions start from a :class:`Linearization`: the enclosed value at an
expansion point plus gradient enclosures written as affine forms over one
noise symbol per input.  Restricting those symbols gives gradient bounds on
any sub-box without re-evaluating the function.

Inputs split into existential ones (controls and states, whose whole range
must be reachable) and universal ones (disturbances, the result must hold for
every value).  The under-interval is then a subset of the robust range
``{z : for all w there is u with f(u, w) = z}``; the over-interval encloses
the plain range.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from . import _rounding as rnd
from .affine import AffineForm, NoiseContext
from .autodiff import Dual1, Dual2, seed_dual1, seed_dual2
from .expr import Expr, compile_expr, variables
from .interval import EMPTY, Box, Interval

GradientBounds = list  # list[Interval] of |df/dx_j|, one per input

ZERO = Interval(0.0)
CENTERED = Interval(0.0)


@dataclass(frozen=True)
class QuantifierSplit:
    """Partition of input indices into universal and existential ones."""

    universal: frozenset[int]
    existential: frozenset[int]

    def __post_init__(self):
        if self.universal & self.existential:
            raise ValueError("an input cannot be both universal and existential")

    @classmethod
    def all_existential(cls, m: int) -> QuantifierSplit:
        return cls(frozenset(), frozenset(range(m)))

    @classmethod
    def with_universal(cls, m: int, universal: Iterable[int]) -> QuantifierSplit:
        u = frozenset(universal)
        return cls(u, frozenset(range(m)) - u)

    def check(self, m: int) -> None:
        if self.universal | self.existential != frozenset(range(m)):
            raise ValueError(f"split does not cover the {m} inputs exactly")


@dataclass(frozen=True)
class RangePair:
    under: Interval
    over: Interval

    def __iter__(self):
        yield self.under
        yield self.over


@dataclass
class Linearization:
    """Data of one scalar function needed by every extension.

    Input ``j`` is parameterized as ``c_j + outer[j] * eps_j`` with
    ``eps_j = symbols[j]``.  ``inner[j]`` is the radius (around the same
    center) of a box known to lie inside the true input set, or ``None`` when
    there is no such box; such inputs can only be treated universally.
    ``grad[j]`` encloses the partial derivative over the whole
    parameterized box, as an affine form in the symbols.
    """

    value: Interval
    grad: list
    symbols: list
    outer: list
    inner: list
    grad0: list | None = None
    hess: list | None = None

    @property
    def m(self) -> int:
        return len(self.grad)


@dataclass(frozen=True)
class RingPartition:
    """Uniform square rings around the box center.

    ``breakpoints[j]`` lists ``c_j + (i/k) r_j`` for ``i = -k..k`` and
    ``dx[i-1]`` is the deviation vector of ring ``i`` (``r / k`` for every
    ring, as the breakpoints are uniform).
    """

    k: int
    breakpoints: tuple[tuple[float, ...], ...]
    dx: tuple[tuple[float, ...], ...]

    @classmethod
    def uniform(cls, b: Box, k: int) -> RingPartition:
        if k < 1:
            raise ValueError("k must be at least 1")
        cs, rs = b.center(), b.radius()
        bps = []
        for comp, c, r in zip(b, cs, rs):
            pts = [c + (i / k) * r for i in range(-k, k + 1)]
            pts[0], pts[-1], pts[k] = comp.lo, comp.hi, c
            bps.append(tuple(pts))
        step = tuple(r / k for r in rs)
        return cls(k, tuple(bps), tuple(step for _ in range(k)))


# --------------------------------------------------------------------------
# helpers

def _bound(g, restr: Mapping[int, Interval] | None) -> Interval:
    if isinstance(g, AffineForm):
        return g.instantiate(restr)
    if isinstance(g, Interval):
        return g
    return Interval(g)


def _roles(lin: Linearization, universal: Iterable[int]) -> tuple[list[int], list[int]]:
    """Existential and universal input indices that actually vary."""
    uni = set(universal)
    ex, un = [], []
    for j in range(lin.m):
        if lin.symbols[j] is None or lin.outer[j] == 0.0:
            continue
        if j in uni or lin.inner[j] is None:
            un.append(j)
        else:
            ex.append(j)
    return ex, un


def _dot(weights: Sequence[float], radii: Sequence[float]) -> Interval:
    total = Interval(0.0)
    for w, r in zip(weights, radii):
        total = total + Interval(w) * Interval(r)
    return total


def _under(center: Interval, shrink: Interval, grow: Interval) -> Interval:
    """``[c.hi - shrink + grow, c.lo + shrink - grow]`` rounded inward."""
    lo = (Interval(center.hi) - shrink + grow).hi
    hi = (Interval(center.lo) + shrink - grow).lo
    return Interval(lo, hi) if lo <= hi else EMPTY


def _over(center: Interval, widen: Interval, narrow: Interval) -> Interval:
    """``[c.lo - widen + narrow, c.hi + widen - narrow]`` rounded outward."""
    lo = (Interval(center.lo) - widen + narrow).lo
    hi = (Interval(center.hi) + widen - narrow).hi
    return Interval(lo, hi) if lo <= hi else EMPTY


def _sym(lin: Linearization, j: int) -> int:
    return lin.symbols[j]


def mv_gradient_bounds(lin: Linearization, ex: Sequence[int], un: Sequence[int]
                       ) -> tuple[GradientBounds, GradientBounds]:
    """Absolute gradient bounds over the successive-centering regions.

    Existential input ``j`` is bounded with earlier existential inputs at
    their centers and everything else free; universal input ``j`` with all
    existential inputs centered and earlier universal inputs centered.
    """
    restr: dict[int, Interval] = {}
    ex_bounds = []
    for j in ex:
        ex_bounds.append(abs(_bound(lin.grad[j], restr)))
        restr[_sym(lin, j)] = CENTERED
    un_bounds = []
    for j in un:
        un_bounds.append(abs(_bound(lin.grad[j], restr)))
        restr[_sym(lin, j)] = CENTERED
    return ex_bounds, un_bounds


def _mv(lin: Linearization, universal: Iterable[int]) -> RangePair:
    ex, un = _roles(lin, universal)
    gex, gun = mv_gradient_bounds(lin, ex, un)
    r_in = [lin.inner[j] for j in ex]
    r_ex = [lin.outer[j] for j in ex]
    r_un = [lin.outer[j] for j in un]
    under = _under(lin.value, _dot([g.lo for g in gex], r_in), _dot([g.hi for g in gun], r_un))
    over = _over(lin.value, _dot([g.hi for g in gex], r_ex), _dot([g.lo for g in gun], r_un))
    return RangePair(under, over)


def mv_bounds(lin: Linearization, universal: Iterable[int] = (), clip: bool = True) -> RangePair:
    """Mean-value under/over bounds, robust with respect to ``universal``.

    With ``clip`` the robust result is intersected with the plain one; both
    are valid, and the intersection makes the robust pair nested in the
    plain pair.
    """
    universal = set(universal)
    pair = _mv(lin, universal)
    if clip and _roles(lin, universal)[1]:
        plain = _mv(lin, ())
        pair = RangePair(pair.under.intersect(plain.under), pair.over.intersect(plain.over))
    return pair


def _ring_restriction(lin: Linearization, dims: Sequence[int], scale: Sequence[float],
                      k: int, i: int, face: int, side: float) -> dict[int, Interval]:
    restr = {}
    outer_t = Interval(i) / Interval(k)
    inner_t = Interval(i - 1) / Interval(k)
    unit = Interval(-1.0, 1.0)
    for d, rho in zip(dims, scale):
        hi = (outer_t * rho).hi
        if d == face:
            lo = (inner_t * rho).lo
            iv = Interval(lo, hi) if side > 0 else Interval(-hi, -lo)
        else:
            iv = Interval(-hi, hi)
        restr[_sym(lin, d)] = iv.intersect(unit)
    return restr


def ring_gradient_bounds(lin: Linearization, dims: Sequence[int], scale: Sequence[float],
                         k: int) -> list[GradientBounds]:
    """Per-ring absolute gradient bounds for the inputs ``dims``.

    Ring ``i`` of the box scaled by ``scale`` (per dimension, relative to the
    parameterized box) is covered by its ``2 len(dims)`` face boxes; the
    bound is the hull over the faces.  Symbols outside ``dims`` stay free.
    """
    rings = []
    for i in range(1, k + 1):
        bounds = [EMPTY] * len(dims)
        for face in dims:
            for side in (1.0, -1.0):
                restr = _ring_restriction(lin, dims, scale, k, i, face, side)
                for p, j in enumerate(dims):
                    bounds[p] = bounds[p].hull(abs(_bound(lin.grad[j], restr)))
        rings.append(bounds)
    return rings


def _quad(lin: Linearization, universal: Iterable[int], k: int) -> RangePair:
    ex, un = _roles(lin, universal)
    # w-term: existential inputs centered, universal ones successively
    _, gun = mv_gradient_bounds(lin, [], un) if not ex else _w_bounds(lin, ex, un)
    r_un = [lin.outer[j] for j in un]
    w_hi = _dot([g.hi for g in gun], r_un)
    w_lo = _dot([g.lo for g in gun], r_un)

    rho = [lin.inner[j] / lin.outer[j] for j in ex]
    under_rings = ring_gradient_bounds(lin, ex, rho, k)
    if all(r == 1.0 for r in rho):
        over_rings = under_rings
    else:
        over_rings = ring_gradient_bounds(lin, ex, [1.0] * len(ex), k)
    dx_in = [Interval(lin.inner[j]) / Interval(k) for j in ex]
    dx_out = [Interval(lin.outer[j]) / Interval(k) for j in ex]
    shrink = Interval(0.0)
    widen = Interval(0.0)
    for ring_u, ring_o in zip(under_rings, over_rings):
        for g, d in zip(ring_u, dx_in):
            shrink = shrink + Interval(g.lo) * Interval(d.lo)
        for g, d in zip(ring_o, dx_out):
            widen = widen + Interval(g.hi) * Interval(d.hi)
    return RangePair(_under(lin.value, shrink, w_hi), _over(lin.value, widen, w_lo))


def _w_bounds(lin: Linearization, ex: Sequence[int], un: Sequence[int]):
    restr = {_sym(lin, j): CENTERED for j in ex}
    out = []
    for j in un:
        out.append(abs(_bound(lin.grad[j], restr)))
        restr[_sym(lin, j)] = CENTERED
    return [], out


def quadrature_bounds(lin: Linearization, universal: Iterable[int] = (), k: int = 10,
                      clip: bool = True) -> RangePair:
    """Ring quadrature bounds, combined with the mean-value pair.

    The under-intervals are hulled (both lie in the robust range, which is
    an interval) and the over-intervals intersected, so the result is never
    worse than the mean-value pair.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    universal = set(universal)
    quad = _quad(lin, universal, k)
    mv = mv_bounds(lin, universal, clip=clip)
    return RangePair(quad.under.hull(mv.under), quad.over.intersect(mv.over))


def taylor2_bounds(lin: Linearization, universal: Iterable[int] = ()) -> RangePair:
    """Second-order bounds from the center gradient and a Hessian enclosure."""
    if lin.grad0 is None or lin.hess is None:
        raise ValueError("taylor2 needs a linearization with grad0 and hess")
    ex, un = _roles(lin, universal)
    g0 = [abs(_bound(g, None)) for g in lin.grad0]
    alpha = _under(lin.value,
                   _dot([g0[j].lo for j in ex], [lin.inner[j] for j in ex]),
                   _dot([g0[j].hi for j in un], [lin.outer[j] for j in un]))
    d_under = {j: lin.inner[j] for j in ex}
    d_under.update({j: lin.outer[j] for j in un})
    beta_under = _quadratic_remainder(lin.hess, d_under)
    if alpha.is_empty():
        under = EMPTY
    else:
        lo = (Interval(alpha.lo) + beta_under.hi).hi
        hi = (Interval(alpha.hi) + beta_under.lo).lo
        under = Interval(lo, hi) if lo <= hi else EMPTY
    varying = ex + un
    d_over = {j: lin.outer[j] for j in varying}
    first = _dot([g0[j].hi for j in varying], [lin.outer[j] for j in varying])
    beta_over = _quadratic_remainder(lin.hess, d_over)
    over = Interval(lin.value.lo) - first + beta_over.lo
    over = Interval(over.lo, (Interval(lin.value.hi) + first + beta_over.hi).hi)
    return RangePair(under, over)


def _quadratic_remainder(hess, d: Mapping[int, float]) -> Interval:
    """Enclosure of ``1/2 h^T H h`` over ``|h_j| <= d_j``."""
    total = Interval(0.0)
    idx = sorted(d)
    for p, i in enumerate(idx):
        di = Interval(d[i])
        total = total + Interval(0.5) * hess[i][i] * Interval(0.0, (di * di).hi)
        for j in idx[p + 1:]:
            dd = (di * Interval(d[j])).hi
            total = total + hess[i][j] * Interval(-dd, dd)
    return total


# --------------------------------------------------------------------------
# building linearizations from expressions

def natural_names(exprs: Sequence[Expr]) -> list[str]:
    """Variables of ``exprs`` sorted with embedded numbers compared
    numerically (x2 before x10)."""
    names = set()
    for e in exprs:
        names |= variables(e)

    def key(s: str):
        return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", s)]

    return sorted(names, key=key)


def linearize(exprs: Sequence[Expr], b: Box, names: Sequence[str] | None = None,
              params: Mapping[str, float] | None = None, order: int = 1,
              inner_box: Box | None = None, max_symbols: int = 48) -> list[Linearization]:
    """Linearize each expression over the box ``b`` around its center.

    ``inner_box`` (default ``b``) is the set existential inputs must stay
    inside; it matters when ``b`` was widened outward for rounding.
    """
    names = list(names) if names is not None else natural_names(exprs)
    if len(names) != len(b):
        raise ValueError(f"box has {len(b)} components for {len(names)} variables")
    if b.is_empty():
        raise ValueError("cannot linearize over an empty box")
    params = params or {}
    inner_box = inner_box or b
    index = {n: i for i, n in enumerate(names)}
    ctx = NoiseContext(max_symbols)
    centers, outer, inner, symbols, forms = [], [], [], [], []
    for comp, icomp in zip(b, inner_box):
        c = comp.mid()
        r = comp.outer_rad(c)
        centers.append(c)
        outer.append(r)
        inner.append(icomp.inner_rad(c) if icomp.contains(c) else None)
        if r > 0.0:
            s = ctx.new_input()
            symbols.append(s)
            forms.append(AffineForm(c, {s: r}, ctx))
        else:
            symbols.append(None)
            forms.append(AffineForm(c, {}, ctx))
    fns = [compile_expr(e, index, params) for e in exprs]
    duals = seed_dual1(forms)
    thin = [Interval(c) for c in centers]
    zero = AffineForm(0.0, {}, ctx)
    out = []
    for fn in fns:
        res = fn(duals)
        grad = [res.grad.get(j, zero) if isinstance(res, Dual1) else zero for j in range(len(names))]
        value = _to_interval(fn(thin))
        lin = Linearization(value, grad, list(symbols), list(outer), list(inner))
        if order >= 2:
            g0 = fn(seed_dual1(thin))
            lin.grad0 = [_to_interval(g0.grad.get(j, 0.0)) if isinstance(g0, Dual1) else ZERO
                         for j in range(len(names))]
            wide = [Interval(rnd.sub_down(c, r), rnd.add_up(c, r)) for c, r in zip(centers, outer)]
            h = fn(seed_dual2(wide))
            m = len(names)
            lin.hess = [[_to_interval(h.second(i, j, 0.0)) if isinstance(h, Dual2) else ZERO
                         for j in range(m)] for i in range(m)]
        out.append(lin)
    return out


def _to_interval(x) -> Interval:
    if isinstance(x, Interval):
        return x
    if isinstance(x, AffineForm):
        return x.range()
    return Interval(x)


# --------------------------------------------------------------------------
# expression-level entry points

def _single(comp: Expr, b: Box, names, params, order: int = 1) -> Linearization:
    return linearize([comp], b, names, params, order=order)[0]


def mean_value_range(comp: Expr, b: Box, names: Sequence[str] | None = None,
                     params: Mapping[str, float] | None = None) -> RangePair:
    """Mean-value under/over range of ``comp`` over ``b``."""
    return mv_bounds(_single(comp, b, names, params))


def robust_mean_value_range(comp: Expr, b: Box, split: QuantifierSplit,
                            names: Sequence[str] | None = None,
                            params: Mapping[str, float] | None = None) -> RangePair:
    """Mean-value bounds whose under-interval holds for every value of the
    universal inputs."""
    split.check(len(b))
    return mv_bounds(_single(comp, b, names, params), split.universal)


def taylor2_range(comp: Expr, b: Box, split: QuantifierSplit | None = None,
                  names: Sequence[str] | None = None,
                  params: Mapping[str, float] | None = None) -> RangePair:
    split = split or QuantifierSplit.all_existential(len(b))
    split.check(len(b))
    return taylor2_bounds(_single(comp, b, names, params, order=2), split.universal)


def quadrature_range(comp: Expr, b: Box, k: int = 10, split: QuantifierSplit | None = None,
                     names: Sequence[str] | None = None,
                     params: Mapping[str, float] | None = None) -> RangePair:
    split = split or QuantifierSplit.all_existential(len(b))
    split.check(len(b))
    return quadrature_bounds(_single(comp, b, names, params), split.universal, k)
