"""Joint n-dimensional bounds and preconditioned parallelotopes.

A joint under-approximation takes one scalar under-interval per output
component.  Component ``i`` treats the inputs assigned to it by a
:class:`PiMap` as existential and all other inputs as universal, so the box
of component intervals lies inside the image.

Preconditioning applies an approximate inverse ``C`` of the center Jacobian
first, which turns images of boxes into nearly axis-aligned sets.  The result
is a :class:`SkewedBox` ``{y : C y in z}``.  ``C`` is an ordinary float
matrix used inside rigorous arithmetic, so the claim never depends on an
exact inverse.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Callable, Mapping, Sequence

import numpy as np

from . import _rounding as rnd
from .ae_core import (
    Linearization,
    QuantifierSplit,
    RangePair,
    linearize,
    mv_bounds,
    natural_names,
    quadrature_bounds,
    taylor2_bounds,
)
from .affine import AffineForm, NoiseContext
from .autodiff import Dual1, Dual2
from .expr import Expr, compile_expr
from .interval import EMPTY, Box, Interval

METHODS = ("mv", "taylor2", "quad")


@dataclass(frozen=True)
class PiMap:
    """Assignment of inputs to the output component they are existential for."""

    assignment: Mapping[int, int]

    @classmethod
    def identity(cls, n: int) -> PiMap:
        return cls({i: i for i in range(n)})

    def preimage(self, i: int) -> set[int]:
        return {j for j, t in self.assignment.items() if t == i}

    def validate(self, m: int, n: int, split: QuantifierSplit | None = None) -> None:
        for j, t in self.assignment.items():
            if not 0 <= j < m:
                raise ValueError(f"pi assigns nonexistent input {j}")
            if not 0 <= t < n:
                raise ValueError(f"pi targets nonexistent component {t}")
            if split is not None and j in split.universal:
                raise ValueError(f"pi assigns universal input {j}")
        missing = set(range(n)) - set(self.assignment.values())
        if missing:
            raise ValueError(f"components {sorted(missing)} have no assigned input")


def component_bounds(lin: Linearization, universal, method: str = "mv", k: int = 10,
                     clip: bool = False) -> RangePair:
    """The chosen scalar extension on one linearized component."""
    if method == "mv":
        return mv_bounds(lin, universal, clip=clip)
    if method == "taylor2":
        return taylor2_bounds(lin, universal)
    if method == "quad":
        return quadrature_bounds(lin, universal, k, clip=clip)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def _under_box(lins: Sequence[Linearization], pi: PiMap, universal: set[int],
               method: str, k: int) -> Box:
    comps = []
    m = lins[0].m if lins else 0
    for i, lin in enumerate(lins):
        uni = (set(range(m)) - pi.preimage(i)) | universal
        comps.append(component_bounds(lin, uni, method, k).under)
    if any(c.is_empty() for c in comps):
        return Box([EMPTY] * len(lins))
    return Box(comps)


def joint_under(f: Sequence[Expr], b: Box, pi: PiMap | None = None, method: str = "mv",
                split: QuantifierSplit | None = None, k: int = 10,
                names: Sequence[str] | None = None,
                params: Mapping[str, float] | None = None) -> Box:
    """Box inside the (robust) image of ``b`` under ``f``; empty if any
    component's under-interval is empty."""
    split = split or QuantifierSplit.all_existential(len(b))
    split.check(len(b))
    pi = pi or PiMap.identity(len(f))
    pi.validate(len(b), len(f), split)
    lins = linearize(f, b, names, params, order=2 if method == "taylor2" else 1)
    return _under_box(lins, pi, set(split.universal), method, k)


def joint_over(f: Sequence[Expr], b: Box, method: str = "mv",
               split: QuantifierSplit | None = None, k: int = 10,
               names: Sequence[str] | None = None,
               params: Mapping[str, float] | None = None) -> Box:
    """Componentwise over-intervals of the (robust) image."""
    split = split or QuantifierSplit.all_existential(len(b))
    split.check(len(b))
    lins = linearize(f, b, names, params, order=2 if method == "taylor2" else 1)
    return Box(component_bounds(lin, split.universal, method, k).over for lin in lins)


# --------------------------------------------------------------------------
# skewed boxes

def _mat(a) -> tuple[tuple[float, ...], ...]:
    return tuple(tuple(float(v) for v in row) for row in np.asarray(a, dtype=float))


def _vec(a) -> tuple[float, ...]:
    return tuple(float(v) for v in np.asarray(a, dtype=float).ravel())


def _iv_matvec(C, v: Sequence[Interval]) -> list[Interval]:
    out = []
    for row in C:
        acc = Interval(0.0)
        for cij, vj in zip(row, v):
            if cij != 0.0:
                acc = acc + vj * cij
        out.append(acc)
    return out


def _iv_matmul(C, A) -> list[list[Interval]]:
    """Enclosure of the exact product of two float matrices."""
    n, p = len(C), len(A[0])
    out = []
    for i in range(n):
        row = []
        for j in range(p):
            lo_parts, hi_parts = [], []
            for l in range(len(A)):
                pr, e, s = rnd.product_parts(C[i][l], A[l][j])
                lo_parts.extend((pr, e, -s))
                hi_parts.extend((pr, e, s))
            row.append(Interval(rnd.exact_sum_bounds(lo_parts)[0], rnd.exact_sum_bounds(hi_parts)[1]))
        out.append(row)
    return out


def _is_identity(C) -> bool:
    return all(C[i][j] == (1.0 if i == j else 0.0) for i in range(len(C)) for j in range(len(C)))


@dataclass(frozen=True)
class SkewedBox:
    """Parallelotope ``{y : C y in z}`` with a generator form.

    The generator set is ``{gen_center + gen_matrix diag(gen_radius) e : e in
    [-1, 1]^n}``.  For under-approximations it lies inside the constraint set,
    for over-approximations it contains it.  ``mu`` bounds ``||I - C
    gen_matrix||_inf``; ``mu < 1`` certifies that ``C`` is invertible.
    ``lam`` is the certified shrink factor (under) or the largest inflation
    ratio (over).
    """

    C: tuple[tuple[float, ...], ...]
    z: Box
    gen_center: tuple[float, ...]
    gen_matrix: tuple[tuple[float, ...], ...]
    gen_radius: tuple[float, ...]
    lam: float
    mu: float
    role: str = "over"

    @property
    def n(self) -> int:
        return len(self.z)

    @classmethod
    def from_box(cls, b: Box, role: str = "over") -> SkewedBox:
        n = len(b)
        eye = _mat(np.eye(n))
        c = b.center()
        r = tuple((comp.inner_rad(ci) if role == "under" else comp.outer_rad(ci))
                  for comp, ci in zip(b, c))
        return cls(eye, b, tuple(c), eye, r, 1.0, 0.0, role)

    def is_axis_aligned(self) -> bool:
        return _is_identity(self.C)

    def projection(self) -> list[Interval]:
        """Interval hull of the set along each axis, rounded for the role.

        For the under role the result lies inside the true projection of the
        generator set; for the over role it encloses the projection of the
        constraint set.
        """
        if self.is_axis_aligned() and (self.role == "over" or self.lam == 1.0):
            return list(self.z)
        out = []
        for i in range(self.n):
            parts = []
            for g, r in zip(self.gen_matrix[i], self.gen_radius):
                p, e, s = rnd.product_parts(abs(g), r)
                parts.append((p, e, s))
            if self.role == "under":
                lo_spread = rnd.exact_sum_bounds([x for p, e, s in parts for x in (p, e, -s)])[0]
                c = self.gen_center[i]
                lo = (Interval(c) - lo_spread).hi
                hi = (Interval(c) + lo_spread).lo
                out.append(Interval(lo, hi) if lo <= hi else EMPTY)
            else:
                spread = rnd.exact_sum_bounds([x for p, e, s in parts for x in (p, e, s)])[1]
                c = self.gen_center[i]
                out.append(Interval((Interval(c) - spread).lo, (Interval(c) + spread).hi))
        return out

    def corner_boxes(self) -> list[list[Interval]]:
        """Rigorous enclosures of the 2^n generator corners."""
        out = []
        n = self.n
        for signs in product((-1.0, 1.0), repeat=n):
            pt = []
            for i in range(n):
                acc = Interval(self.gen_center[i])
                for j in range(n):
                    if self.gen_radius[j] != 0.0 and self.gen_matrix[i][j] != 0.0:
                        acc = acc + Interval(self.gen_matrix[i][j]) * Interval(signs[j] * self.gen_radius[j])
                pt.append(acc)
            out.append(pt)
        return out

    def corners(self) -> np.ndarray:
        """Float generator corners (for plotting and sampling checks)."""
        n = self.n
        G = np.asarray(self.gen_matrix) * np.asarray(self.gen_radius)
        signs = np.array(list(product((-1.0, 1.0), repeat=n)))
        return np.asarray(self.gen_center) + signs @ G.T

    def constraint_contains_box(self, pt: Sequence[Interval]) -> bool:
        """Whether every point of the interval vector ``pt`` satisfies C y in z."""
        for zi, ci in zip(self.z, _iv_matvec(self.C, pt)):
            if not zi.contains(ci):
                return False
        return True

    def contains_generator_of(self, other: SkewedBox) -> bool:
        """Rigorous check that all corners of ``other``'s generator set, and
        so the whole parallelotope, lie in this constraint set.

        Row ``i`` of ``C y`` peaks over the corners at ``(C c)_i +
        sum_j |(C G)_ij| r_j``; bounding that directly is tighter than
        enclosing each corner first.
        """
        Cg = _iv_matvec(self.C, [Interval(v) for v in other.gen_center])
        M = _iv_matmul(self.C, other.gen_matrix)
        for i, zi in enumerate(self.z):
            spread = 0.0
            for mij, r in zip(M[i], other.gen_radius):
                mag = mij.mag()
                if r != 0.0 and mag != 0.0:
                    spread = rnd.add_up(spread, rnd.mul_up(mag, r))
            if rnd.sub_down(Cg[i].lo, spread) < zi.lo or rnd.add_up(Cg[i].hi, spread) > zi.hi:
                return False
        return True

    def contains_points(self, pts: np.ndarray) -> np.ndarray:
        """Boolean mask of sample points certainly inside the constraint set.

        ``C @ y`` is computed in floats; its error is bounded by
        ``gamma_n |C| |y|`` and points within that margin of the boundary
        count as outside.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        C = np.asarray(self.C)
        n = C.shape[1]
        lo = np.array([c.lo for c in self.z])
        hi = np.array([c.hi for c in self.z])
        if self.is_axis_aligned():
            return np.all((pts >= lo) & (pts <= hi), axis=1)
        y = pts @ C.T
        gamma = (n + 1) * 2.0**-53 / (1 - (n + 1) * 2.0**-53)
        err = gamma * (np.abs(pts) @ np.abs(C).T) * (1 + 2.0**-40) + 1e-300
        return np.all((y - err >= lo) & (y + err <= hi), axis=1)

    def excludes_points(self, pts: np.ndarray, rel_slack: float = 0.0) -> np.ndarray:
        """Boolean mask of points outside the constraint set by more than the
        float error of ``C @ y`` plus ``rel_slack * (|C| |y|)``.

        ``rel_slack`` absorbs rounding already present in ``pts``, such as
        that of a float simulation.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        C = np.asarray(self.C)
        n = C.shape[1]
        lo = np.array([c.lo for c in self.z])
        hi = np.array([c.hi for c in self.z])
        gamma = (n + 1) * 2.0**-53 / (1 - (n + 1) * 2.0**-53)
        scale = np.abs(pts) @ np.abs(C).T
        err = (gamma * (1 + 2.0**-40) + rel_slack) * scale
        with np.errstate(invalid="ignore"):
            y = pts @ C.T
            out = (y + err < lo) | (y - err > hi)
        return np.any(out, axis=1)

    def to_json(self) -> dict:
        return {
            "role": self.role,
            "C": [list(r) for r in self.C],
            "z": [[c.lo, c.hi] for c in self.z],
            "gen_center": list(self.gen_center),
            "gen_matrix": [list(r) for r in self.gen_matrix],
            "gen_radius": list(self.gen_radius),
            "lambda": self.lam,
            "mu": self.mu,
        }

    @classmethod
    def from_json(cls, d: dict) -> SkewedBox:
        return cls(
            _mat(d["C"]), Box(Interval(lo, hi) for lo, hi in d["z"]), _vec(d["gen_center"]),
            _mat(d["gen_matrix"]), _vec(d["gen_radius"]), float(d["lambda"]), float(d["mu"]),
            d.get("role", "over"),
        )


class CertificationError(ArithmeticError):
    """The generator could not be certified (C not shown to be regular)."""


def _regularity(C, A) -> tuple[list[list[Interval]], float]:
    """Enclosure of C A and an upper bound on ||I - C A||_inf."""
    M = _iv_matmul(C, A)
    n = len(M)
    mu = 0.0
    for i in range(n):
        row = 0.0
        for j in range(n):
            e = (Interval(1.0 if i == j else 0.0) - M[i][j]).mag()
            row = rnd.add_up(row, e)
        mu = max(mu, row)
    return M, mu


def certify_generator(C, z: Box, A, role: str = "shrink", gen_center=None, gen_radius=None):
    """Certify a generator form for ``{y : C y in z}``.

    ``role="shrink"`` returns ``(lam, mu, center, radius)`` with
    ``radius = lam * gen_radius`` such that the generator set lies in the
    constraint set; ``role="inflate"`` returns the same tuple with a radius
    vector such that the generator set contains the constraint set.
    Raises :class:`CertificationError` when ``mu >= 1``.
    """
    C = _mat(C)
    A = _mat(A)
    n = len(z)
    if gen_center is None:
        gen_center = _vec(np.asarray(A) @ np.asarray(z.center()))
    gen_center = _vec(gen_center)
    M, mu = _regularity(C, A)
    if not mu < 1.0:
        raise CertificationError(f"||I - C A|| may reach {mu!r}")
    Cg = _iv_matvec(C, [Interval(v) for v in gen_center])
    if role == "shrink":
        r0 = _vec(gen_radius if gen_radius is not None else z.radius())
        lam = 1.0
        for i in range(n):
            slack = min(rnd.sub_down(Cg[i].lo, z[i].lo), rnd.sub_down(z[i].hi, Cg[i].hi))
            spread = 0.0
            for j in range(n):
                if r0[j]:
                    spread = rnd.add_up(spread, rnd.mul_up(M[i][j].mag(), r0[j]))
            if slack < 0.0:
                lam = 0.0
            elif spread > 0.0:
                lam = min(lam, rnd.div_down(slack, spread))
        lam = max(lam, 0.0)
        radius = tuple(rnd.mul_down(lam, r) if lam != 1.0 else r for r in r0)
        return lam, mu, gen_center, radius
    if role == "inflate":
        dz = [zi - ci for zi, ci in zip(z, Cg)]
        top = max((d.mag() for d in dz), default=0.0)
        bound = rnd.div_up(top, rnd.sub_down(1.0, mu)) if top else 0.0
        radius = []
        for i in range(n):
            rowsum = 0.0
            for j in range(n):
                rowsum = rnd.add_up(rowsum, (Interval(1.0 if i == j else 0.0) - M[i][j]).mag())
            radius.append(rnd.add_up(dz[i].mag(), rnd.mul_up(rowsum, bound)))
        r0 = z.radius()
        ratios = [r / q for r, q in zip(radius, r0) if q > 0.0]
        return max(ratios, default=1.0), mu, gen_center, tuple(radius)
    raise ValueError(f"unknown role {role!r}")


# --------------------------------------------------------------------------
# evaluation over a generator form

def linearize_generator(step: Callable[[Sequence], list], gen_center, gen_matrix, gen_radius,
                        inputs: Sequence[tuple[Interval, Interval]] = (), order: int = 1,
                        max_symbols: int = 48) -> list[Linearization]:
    """Linearize ``y -> step(gen_center + gen_matrix e, inputs)``.

    The parameters are ``e_j`` in ``[-gen_radius_j, gen_radius_j]`` followed
    by the inputs; each input is a pair ``(outer, inner)`` of intervals.
    Gradients are taken with respect to ``e`` and the inputs.
    """
    n = len(gen_center)
    ctx = NoiseContext(max_symbols)
    symbols, outer, inner = [], [], []
    e_forms = []
    for r in gen_radius:
        if r > 0.0:
            s = ctx.new_input()
            symbols.append(s)
            e_forms.append(AffineForm(0.0, {s: r}, ctx))
        else:
            symbols.append(None)
            e_forms.append(None)
        outer.append(r)
        inner.append(r)
    zero = AffineForm(0.0, {}, ctx)
    one = AffineForm(1.0, {}, ctx)
    state = []
    for i in range(n):
        x = AffineForm(gen_center[i], {}, ctx)
        for j in range(n):
            if e_forms[j] is not None and gen_matrix[i][j] != 0.0:
                x = x + e_forms[j].scale(gen_matrix[i][j])
        grad = {j: AffineForm(gen_matrix[i][j], {}, ctx) for j in range(n) if gen_matrix[i][j] != 0.0}
        state.append(Dual1(x, grad))
    in_values, in_centers, in_wide = [], [], []
    for l, (o, inn) in enumerate(inputs):
        c = o.mid()
        R = o.outer_rad(c)
        in_centers.append(c)
        in_wide.append(Interval(rnd.sub_down(c, R), rnd.add_up(c, R)))
        if R > 0.0:
            s = ctx.new_input()
            symbols.append(s)
            form = AffineForm(c, {s: R}, ctx)
        else:
            symbols.append(None)
            form = AffineForm(c, {}, ctx)
        outer.append(R)
        inner.append(inn.inner_rad(c) if (not inn.is_empty() and inn.contains(c)) else None)
        in_values.append(Dual1(form, {n + l: one}))
    m = n + len(inputs)
    res = step(state + in_values)
    value = step([Interval(v) for v in gen_center] + [Interval(c) for c in in_centers])
    lins = []
    for i, r in enumerate(res):
        grad = [r.grad.get(j, zero) if isinstance(r, Dual1) else zero for j in range(m)]
        lins.append(Linearization(_iv(value[i]), grad, list(symbols), list(outer), list(inner)))
    if order >= 2:
        thin = []
        for i in range(n):
            thin.append(Dual1(Interval(gen_center[i]),
                              {j: Interval(gen_matrix[i][j]) for j in range(n) if gen_matrix[i][j] != 0.0}))
        thin += [Dual1(Interval(c), {n + l: Interval(1.0)}) for l, c in enumerate(in_centers)]
        g0 = step(thin)
        wide = []
        for i in range(n):
            x = Interval(gen_center[i])
            for j in range(n):
                if gen_radius[j] > 0.0 and gen_matrix[i][j] != 0.0:
                    x = x + Interval(gen_matrix[i][j]) * Interval(-gen_radius[j], gen_radius[j])
            wide.append(Dual2(x, {j: Interval(gen_matrix[i][j]) for j in range(n) if gen_matrix[i][j] != 0.0}))
        wide += [Dual2(w, {n + l: Interval(1.0)}) for l, w in enumerate(in_wide)]
        h = step(wide)
        for i, lin in enumerate(lins):
            lin.grad0 = [_iv(g0[i].grad.get(j, 0.0)) if isinstance(g0[i], Dual1) else Interval(0.0)
                         for j in range(m)]
            lin.hess = [[_iv(h[i].second(a, b, 0.0)) if isinstance(h[i], Dual2) else Interval(0.0)
                         for b in range(m)] for a in range(m)]
    return lins


def _iv(x) -> Interval:
    if isinstance(x, Interval):
        return x
    if isinstance(x, AffineForm):
        return x.range()
    return Interval(x)


def center_jacobian(lins: Sequence[Linearization], n: int) -> np.ndarray:
    """Float midpoint of the gradient enclosures of the first ``n`` inputs."""
    A = np.zeros((len(lins), n))
    for i, lin in enumerate(lins):
        for j in range(n):
            g = _iv(lin.grad[j])
            A[i, j] = g.mid() if g.is_finite() else np.nan
    return A


def choose_preconditioner(A: np.ndarray, warnings: list[str] | None = None,
                          label: str = "") -> tuple[np.ndarray, np.ndarray]:
    """``(C, A')`` with ``C`` an approximate inverse of ``A`` and ``A' = A``,
    or identities when ``A`` is not safely invertible."""
    n = A.shape[0]
    eye = np.eye(n)
    reason = None
    if not np.all(np.isfinite(A)):
        reason = "non-finite center Jacobian"
    else:
        try:
            C = np.linalg.inv(A)
            if not np.all(np.isfinite(C)) or np.linalg.cond(A) > 1e12:
                reason = "ill-conditioned center Jacobian"
        except np.linalg.LinAlgError:
            reason = "singular center Jacobian"
    if reason is None:
        _, mu = _regularity(_mat(C), _mat(A))
        if not mu < 0.5:
            reason = f"approximate inverse not certified (mu={mu:.3g})"
    if reason is not None:
        if warnings is not None:
            warnings.append(f"{label}identity preconditioning used: {reason}")
        return eye, eye
    return C, A


def apply_preconditioner(C: np.ndarray, lins: Sequence[Linearization]) -> list[Linearization]:
    """Linearizations of ``C f`` from those of ``f``."""
    Cm = _mat(C)
    if _is_identity(Cm):
        return list(lins)
    m = lins[0].m
    out = []
    for row in Cm:
        value = Interval(0.0)
        grad = [None] * m
        for cil, lin in zip(row, lins):
            if cil == 0.0:
                continue
            value = value + lin.value * cil
            for j in range(m):
                term = lin.grad[j] * cil
                grad[j] = term if grad[j] is None else grad[j] + term
        ctx = next((g.ctx for g in lins[0].grad if isinstance(g, AffineForm)), None)
        grad = [g if g is not None else AffineForm(0.0, {}, ctx) for g in grad]
        new = Linearization(value, grad, list(lins[0].symbols), list(lins[0].outer), list(lins[0].inner))
        if lins[0].grad0 is not None:
            new.grad0 = [_combine_iv(row, [lin.grad0[j] for lin in lins]) for j in range(m)]
            new.hess = [[_combine_iv(row, [lin.hess[a][b] for lin in lins]) for b in range(m)]
                        for a in range(m)]
        out.append(new)
    return out


def _combine_iv(row, vals) -> Interval:
    acc = Interval(0.0)
    for c, v in zip(row, vals):
        if c != 0.0:
            acc = acc + v * c
    return acc


def under_from_linearizations(lins, C, A, pi: PiMap, universal: set[int], method: str, k: int,
                              warnings: list[str] | None = None,
                              clip: Box | None = None) -> SkewedBox | None:
    """Certified under parallelotope from the linearizations of ``C f``.

    ``clip`` intersects the constraint box first; any subset of a valid
    under box is still one.
    """
    z = _under_box(lins, pi, universal, method, k)
    if clip is not None:
        z = z.intersect(clip)
    if z.is_empty():
        return None
    try:
        lam, mu, gc, gr = certify_generator(C, z, A, "shrink")
    except CertificationError as exc:
        if warnings is not None:
            warnings.append(f"under generator not certified: {exc}")
        return None
    if lam <= 0.0:
        return None
    return SkewedBox(_mat(C), z, gc, _mat(A), gr, lam, mu, "under")


def over_from_linearizations(lins, C, A, method: str, k: int,
                             universal: set[int] = frozenset()) -> SkewedBox:
    """Over parallelotope from the linearizations of ``C f``; raises
    :class:`CertificationError` when ``C`` cannot be shown regular."""
    z = Box(component_bounds(lin, universal, method, k).over for lin in lins)
    if not all(c.is_finite() for c in z):
        n = len(z)
        eye = _mat(np.eye(n))
        zz = Box([Interval.entire()] * n)
        return SkewedBox(eye, zz, (0.0,) * n, eye, (np.inf,) * n, np.inf, 0.0, "over")
    lam, mu, gc, gr = certify_generator(C, z, A, "inflate")
    return SkewedBox(_mat(C), z, gc, _mat(A), gr, lam, mu, "over")


def preconditioned_step(f: Sequence[Expr], inp: SkewedBox, pi: PiMap | None = None,
                        method: str = "mv", split: QuantifierSplit | None = None, k: int = 10,
                        names: Sequence[str] | None = None,
                        params: Mapping[str, float] | None = None,
                        warnings: list[str] | None = None):
    """Under and over parallelotopes of the image of ``inp``'s generator set.

    ``split`` marks universal inputs among the n state inputs.  Returns
    ``(under, over)``; ``under`` is None when no under set could be
    certified.
    """
    n = inp.n
    names = list(names) if names is not None else natural_names(f)
    split = split or QuantifierSplit.all_existential(n)
    pi = pi or PiMap.identity(len(f))
    pi.validate(n, len(f), split)
    index = {nm: i for i, nm in enumerate(names)}
    fns = [compile_expr(e, index, params or {}) for e in f]

    def step(values):
        return [fn(values) for fn in fns]

    order = 2 if method == "taylor2" else 1
    lins = linearize_generator(step, inp.gen_center, inp.gen_matrix, inp.gen_radius, (), order)
    warnings = warnings if warnings is not None else []
    C, A = choose_preconditioner(center_jacobian(lins, n), warnings)
    pre = apply_preconditioner(C, lins)
    under = under_from_linearizations(pre, C, A, pi, set(split.universal), method, k, warnings)
    over = over_from_linearizations(pre, C, A, method, k)
    return under, over
