"""Bounded-horizon reachability of discrete-time systems.

Two schemes are offered.  ``reach_iterate`` maps the previous under and over
sets through one step of the dynamics at a time.  ``reach_unroll`` tracks
the k-fold composition and its Jacobian with respect to the initial state,
so its under-approximations do not depend on earlier ones being non-empty.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .ae_core import Linearization
from .affine import AffineForm, NoiseContext
from .autodiff import Dual1, Dual2
from .expr import SystemModel
from .interval import EMPTY, Box, Interval
from .joint_range import (
    CertificationError,
    PiMap,
    SkewedBox,
    _mat,
    apply_preconditioner,
    center_jacobian,
    choose_preconditioner,
    component_bounds,
    linearize_generator,
    over_from_linearizations,
    under_from_linearizations,
)
from . import _rounding as rnd

ORDERS = ("mv", "taylor2")
PRECONDITIONERS = ("none", "jacobian-center")
REACH_METHODS = ("iterate", "unroll")
ITERATE_SYMBOL_CAP = 48
UNROLL_SYMBOL_CAP = 400


@dataclass(frozen=True)
class ReachOptions:
    method: str = "iterate"
    order: str = "mv"
    quadrature_k: int = 1
    precondition: str = "jacobian-center"
    robust: bool = False
    seed: int = 0
    steps: int | None = None
    max_symbols: int | None = None

    def __post_init__(self):
        if self.method not in REACH_METHODS:
            raise ValueError(f"method must be one of {REACH_METHODS}")
        if self.order not in ORDERS:
            raise ValueError(f"order must be one of {ORDERS}")
        if self.precondition not in PRECONDITIONERS:
            raise ValueError(f"precondition must be one of {PRECONDITIONERS}")
        if self.quadrature_k < 1:
            raise ValueError("quadrature_k must be at least 1")
        if self.quadrature_k > 1 and self.order != "mv":
            raise ValueError("quadrature applies to the mean-value order only")
        if self.steps is not None and self.steps < 0:
            raise ValueError("steps must be nonnegative")
        if self.max_symbols is not None and self.max_symbols < 1:
            raise ValueError("max_symbols must be at least 1")

    @property
    def symbol_cap(self) -> int:
        """Noise symbols kept per affine form.  Unrolling accumulates error
        terms over the whole horizon, so it needs a much larger budget."""
        if self.max_symbols is not None:
            return self.max_symbols
        return UNROLL_SYMBOL_CAP if self.method == "unroll" else ITERATE_SYMBOL_CAP

    @property
    def extension(self) -> str:
        if self.order == "taylor2":
            return "taylor2"
        return "quad" if self.quadrature_k > 1 else "mv"


@dataclass
class StepResult:
    step: int
    under: SkewedBox | None
    over: SkewedBox
    under_proj: list[Interval]
    over_proj: list[Interval]

    def to_json(self) -> dict:
        return {
            "step": self.step,
            "under": None if self.under is None else self.under.to_json(),
            "over": self.over.to_json(),
            "under_proj": [[c.lo, c.hi] for c in self.under_proj],
            "over_proj": [[c.lo, c.hi] for c in self.over_proj],
        }

    @classmethod
    def from_json(cls, d: dict) -> StepResult:
        return cls(
            d["step"],
            None if d["under"] is None else SkewedBox.from_json(d["under"]),
            SkewedBox.from_json(d["over"]),
            [Interval(lo, hi) for lo, hi in d["under_proj"]],
            [Interval(lo, hi) for lo, hi in d["over_proj"]],
        )


@dataclass
class ReachResult:
    model: str
    states: tuple[str, ...]
    options: ReachOptions
    steps: list[StepResult] = field(default_factory=list)
    wall_time: float = 0.0
    warnings: list[str] = field(default_factory=list)
    empty_under_onset: int | None = None

    def to_json(self) -> dict:
        return {
            "model": self.model,
            "states": list(self.states),
            "options": {k: getattr(self.options, k) for k in self.options.__dataclass_fields__},
            "wall_time": self.wall_time,
            "warnings": list(self.warnings),
            "empty_under_onset": self.empty_under_onset,
            "steps": [s.to_json() for s in self.steps],
        }

    @classmethod
    def from_json(cls, d: dict) -> ReachResult:
        return cls(
            d["model"], tuple(d["states"]), ReachOptions(**d["options"]),
            [StepResult.from_json(s) for s in d["steps"]], d["wall_time"], list(d["warnings"]),
            d["empty_under_onset"],
        )


def _empty_proj(n: int) -> list[Interval]:
    return [EMPTY] * n


def _unbounded(n: int) -> SkewedBox:
    eye = _mat(np.eye(n))
    return SkewedBox(eye, Box([Interval.entire()] * n), (0.0,) * n, eye, (math.inf,) * n,
                     math.inf, 0.0, "over")


def _is_unbounded(s: SkewedBox) -> bool:
    return not all(c.is_finite() for c in s.z) or not all(math.isfinite(r) for r in s.gen_radius)


def _over_with_fallback(lins, C, A, method, k, warnings, step) -> SkewedBox:
    pre = apply_preconditioner(C, lins)
    try:
        return over_from_linearizations(pre, C, A, method, k)
    except CertificationError as exc:
        warnings.append(f"step {step}: over generator not certified ({exc}); identity used")
        eye = np.eye(len(lins))
        return over_from_linearizations(lins, eye, eye, method, k)


def _input_pairs(model: SystemModel) -> list[tuple[Interval, Interval]]:
    return (list(zip(model.control_box, model.control_box_inner))
            + list(zip(model.disturbance_box, model.disturbance_box_inner)))


def _assign_inputs(model: SystemModel, robust: bool, A_inputs: np.ndarray, offset: int,
                   assignment: dict[int, int], universal: set[int]) -> None:
    """Extend a pi assignment with one step's inputs starting at ``offset``.

    Controls follow the model's pi declarations (unassigned ones are
    universal).  Disturbances are universal in robust mode; otherwise each
    goes to the component it influences most at the center.
    """
    nc = len(model.controls)
    for l, name in enumerate(model.controls):
        if name in model.pi:
            assignment[offset + l] = model.pi[name]
        else:
            universal.add(offset + l)
    for d in range(len(model.disturbances)):
        p = offset + nc + d
        if robust:
            universal.add(p)
        else:
            col = np.abs(A_inputs[:, nc + d]) if A_inputs.size else np.zeros(1)
            col = np.where(np.isfinite(col), col, 0.0)
            assignment[p] = int(np.argmax(col))


def _input_center_jacobian(lins: Sequence[Linearization], cols: Sequence[int]) -> np.ndarray:
    A = np.zeros((len(lins), len(cols)))
    for i, lin in enumerate(lins):
        for q, j in enumerate(cols):
            g = lin.grad[j]
            iv = g.range() if isinstance(g, AffineForm) else g
            A[i, q] = iv.mid() if iv.is_finite() else np.nan
    return A


def _steps(model: SystemModel, opts: ReachOptions) -> int:
    return model.horizon if opts.steps is None else opts.steps


def _initial_step(model: SystemModel) -> StepResult:
    over = SkewedBox.from_box(model.init, "over")
    if model.init_inner.is_empty():
        under = None
        under_proj = _empty_proj(model.n)
    else:
        under = SkewedBox.from_box(model.init_inner, "under")
        under_proj = list(model.init_inner)
    return StepResult(0, under, over, under_proj, list(model.init))


def _image_under(model: SystemModel, opts: ReachOptions, step_fn, src: SkewedBox, pairs,
                 robust: bool, frame, clip: Box | None, warnings: list[str], label: str):
    """Under parallelotope of the image of ``src``'s generator set.

    ``frame`` fixes the preconditioner ``(C, A)``; otherwise it is chosen
    from the center Jacobian.  Returns the set and the frame used.
    """
    n = model.n
    order = 2 if opts.order == "taylor2" else 1
    lins = linearize_generator(step_fn, src.gen_center, src.gen_matrix, src.gen_radius,
                               pairs, order, opts.symbol_cap)
    if frame is None:
        if opts.precondition == "jacobian-center":
            frame = choose_preconditioner(center_jacobian(lins, n), warnings, label)
        else:
            frame = (np.eye(n), np.eye(n))
    C, A = frame
    pre = apply_preconditioner(C, lins)
    assignment = {i: i for i in range(n)}
    universal: set[int] = set()
    _assign_inputs(model, robust, _input_center_jacobian(pre, range(n, n + len(pairs))),
                   n, assignment, universal)
    under = under_from_linearizations(pre, C, A, PiMap(assignment), universal, opts.extension,
                                      opts.quadrature_k, warnings, clip)
    return under, frame


def reach_iterate(model: SystemModel, opts: ReachOptions | None = None) -> ReachResult:
    """Iterated images: each step maps the previous under and over sets."""
    opts = opts or ReachOptions()
    if opts.method != "iterate":
        raise ValueError("reach_iterate needs options with method='iterate'")
    t0 = time.perf_counter()
    n = model.n
    step_fn = model.compile(rigorous=True)
    method, k = opts.extension, opts.quadrature_k
    order = 2 if opts.order == "taylor2" else 1
    pairs = _input_pairs(model)
    over_pairs = [(o, o) for o, _ in pairs]
    result = ReachResult(model.name, model.states, opts)
    first = _initial_step(model)
    result.steps.append(first)
    under, over = first.under, first.over
    if under is None:
        result.empty_under_onset = 0
        result.warnings.append("initial set has no inner box; under chain empty from step 0")
    # in robust mode the plain under chain runs alongside: it supplies the
    # preconditioner and a clip box, which keeps robust sets inside plain ones
    coupled = opts.robust and bool(model.disturbances)
    plain = under if coupled else None
    for step in range(1, _steps(model, opts) + 1):
        was_nonempty = under is not None
        if coupled:
            frame = None
            if plain is not None:
                plain, frame = _image_under(model, opts, step_fn, plain, pairs, False, None, None,
                                            result.warnings, f"step {step} under: ")
            if under is not None:
                if plain is None:
                    under = None
                else:
                    under, _ = _image_under(model, opts, step_fn, under, pairs, True, frame, plain.z,
                                            result.warnings, f"step {step} under: ")
        elif under is not None:
            under, _ = _image_under(model, opts, step_fn, under, pairs, opts.robust, None, None,
                                    result.warnings, f"step {step} under: ")
        if was_nonempty and under is None:
            result.empty_under_onset = step
            result.warnings.append(f"under-approximation empty from step {step} on; "
                                   "over-approximation continues")
        if _is_unbounded(over):
            over = _unbounded(n)
        else:
            lins_o = linearize_generator(step_fn, over.gen_center, over.gen_matrix, over.gen_radius,
                                         over_pairs, order, opts.symbol_cap)
            if opts.precondition == "jacobian-center":
                C, A = choose_preconditioner(center_jacobian(lins_o, n), result.warnings,
                                             f"step {step} over: ")
            else:
                C = A = np.eye(n)
            over = _over_with_fallback(lins_o, C, A, method, k, result.warnings, step)
            if _is_unbounded(over):
                result.warnings.append(f"over-approximation unbounded from step {step} on")
                over = _unbounded(n)
        under_proj = under.projection() if under is not None else _empty_proj(n)
        result.steps.append(StepResult(step, under, over, under_proj, over.projection()))
    result.wall_time = time.perf_counter() - t0
    return result


class _Unrolled:
    """State of the unrolled composition.

    Values and Jacobians of the k-fold map are affine forms over the input
    symbols, differentiated with respect to every parameter with a nonzero
    radius (initial states, then inputs step by step).  Jacobian columns of
    zero-radius parameters never enter a bound, so they are tracked in
    floats along the center trajectory for the preconditioner only.  The
    center image itself is enclosed by thin-interval iteration.
    """

    def __init__(self, model: SystemModel, opts: ReachOptions):
        self.step = model.compile(rigorous=True)
        self.step_float = model.compile(rigorous=False)
        self.ctx = NoiseContext(opts.symbol_cap)
        self.order = 2 if opts.order == "taylor2" else 1
        self.symbols: list[int | None] = []
        self.outer: list[float] = []
        self.inner: list[float | None] = []
        self.z: list = []
        self.z_float: list = []
        self.center: list = []
        self.g0: list = []
        self.h: list = []
        self._append(list(zip(model.init, model.init_inner)), self.z, self.z_float, self.center,
                     self.g0, self.h)

    def _append(self, pairs, z, z_float, center, g0, h) -> list[int]:
        one = AffineForm(1.0, {}, self.ctx)
        idx = []
        for o, inn in pairs:
            p = len(self.symbols)
            idx.append(p)
            c = o.mid()
            R = o.outer_rad(c)
            if R > 0.0:
                s = self.ctx.new_input()
                z.append(Dual1(AffineForm(c, {s: R}, self.ctx), {p: one}))
                z_float.append(Dual1(c, {}))
            else:
                s = None
                z.append(Dual1(AffineForm(c, {}, self.ctx), {}))
                z_float.append(Dual1(c, {p: 1.0}))
            self.symbols.append(s)
            self.outer.append(R)
            self.inner.append(inn.inner_rad(c) if (not inn.is_empty() and inn.contains(c)) else None)
            center.append(Interval(c))
            if self.order == 2:
                g0.append(Dual1(Interval(c), {p: Interval(1.0)}))
                h.append(Dual2(Interval(rnd.sub_down(c, R), rnd.add_up(c, R)), {p: Interval(1.0)}))
        return idx

    def advance(self, pairs) -> list[int]:
        """Apply one step; returns the parameter indices of this step's inputs."""
        z_in, f_in, c_in, g_in, h_in = [], [], [], [], []
        idx = self._append(pairs, z_in, f_in, c_in, g_in, h_in)
        self.z = self.step(self.z + z_in)
        self.z_float = self.step_float(self.z_float + f_in)
        self.center = [_iv(v) for v in self.step(self.center + c_in)]
        if self.order == 2:
            self.g0 = self.step(self.g0 + g_in)
            h = self.step(self.h + h_in)
            # tighten value and gradient enclosures with the affine ones
            for i, hi in enumerate(h):
                zi = self.z[i]
                value = _iv(hi.value).intersect(zi.value.range())
                grad = {}
                for p, g in hi.grad.items():
                    a = zi.grad.get(p)
                    grad[p] = _iv(g).intersect(a.range()) if isinstance(a, AffineForm) else _iv(g)
                h[i] = Dual2(value, grad, hi.hess)
            self.h = h
        return idx

    def linearizations(self) -> list[Linearization]:
        P = len(self.symbols)
        zero = AffineForm(0.0, {}, self.ctx)
        lins = []
        for i, zi in enumerate(self.z):
            grad = []
            for p in range(P):
                if self.outer[p] > 0.0:
                    grad.append(zi.grad.get(p, zero))
                else:
                    # weighted by a zero radius everywhere; only the
                    # preconditioner reads it
                    d = self.z_float[i].grad.get(p, 0.0)
                    grad.append(AffineForm(float(d) if math.isfinite(d) else 0.0, {}, self.ctx))
            lin = Linearization(self.center[i], grad, list(self.symbols), list(self.outer),
                                list(self.inner))
            if self.order == 2:
                g0 = self.g0[i]
                lin.grad0 = [_iv(g0.grad.get(p, 0.0)) for p in range(P)]
                lin.hess = [[_iv(self.h[i].second(a, b, 0.0)) for b in range(P)] for a in range(P)]
            lins.append(lin)
        return lins


def _iv(x) -> Interval:
    if isinstance(x, Interval):
        return x
    if isinstance(x, AffineForm):
        return x.range()
    return Interval(x)


def reach_unroll(model: SystemModel, opts: ReachOptions | None = None) -> ReachResult:
    """Reach sets of the k-fold composition over the initial box."""
    opts = opts or ReachOptions(method="unroll")
    if opts.method != "unroll":
        raise ValueError("reach_unroll needs options with method='unroll'")
    t0 = time.perf_counter()
    n = model.n
    method, k = opts.extension, opts.quadrature_k
    pairs = _input_pairs(model)
    nc = len(model.controls)
    result = ReachResult(model.name, model.states, opts)
    first = _initial_step(model)
    result.steps.append(first)
    if first.under is None:
        result.warnings.append("initial set has no inner box")
    state = _Unrolled(model, opts)
    # plain roles, and in robust mode the robust ones; robust results are
    # clipped to the plain ones so the two modes nest
    coupled = opts.robust and bool(model.disturbances)
    assignment = {i: i for i in range(n)}
    universal: set[int] = set()
    r_assignment = {i: i for i in range(n)}
    r_universal: set[int] = set()
    proj_universal: set[int] = set()
    for step in range(1, _steps(model, opts) + 1):
        idx = state.advance(pairs)
        lins = state.linearizations()
        if opts.robust:
            proj_universal.update(idx[nc:])
        # projected bounds: states and controls existential
        under_proj, over_proj = [], []
        for lin in lins:
            under_iv = component_bounds(lin, proj_universal, method, k).under
            pair = component_bounds(lin, (), method, k)
            under_proj.append(under_iv.intersect(pair.under) if coupled else under_iv)
            over_proj.append(pair.over)
        if opts.precondition == "jacobian-center":
            C, A = choose_preconditioner(center_jacobian(lins, n), result.warnings,
                                         f"step {step}: ")
        else:
            C = A = np.eye(n)
        pre = apply_preconditioner(C, lins)
        if idx:
            A_in = _input_center_jacobian(pre, idx)
            _assign_inputs(model, False if coupled else opts.robust, A_in, idx[0], assignment, universal)
            if coupled:
                _assign_inputs(model, True, A_in, idx[0], r_assignment, r_universal)
        under = under_from_linearizations(pre, C, A, PiMap(dict(assignment)), set(universal),
                                          method, k, result.warnings)
        if coupled and under is not None:
            under = under_from_linearizations(pre, C, A, PiMap(dict(r_assignment)), set(r_universal),
                                              method, k, result.warnings, clip=under.z)
        if under is None and result.empty_under_onset is None:
            result.empty_under_onset = step
            result.warnings.append(f"joint under-approximation first empty at step {step}")
        over = _over_with_fallback(lins, C, A, method, k, result.warnings, step)
        if _is_unbounded(over):
            over = _unbounded(n)
        over_proj = [a.intersect(b) for a, b in zip(over_proj, over.projection())]
        result.steps.append(StepResult(step, under, over, under_proj, over_proj))
    result.wall_time = time.perf_counter() - t0
    return result


def compute_reach(model: SystemModel, opts: ReachOptions) -> ReachResult:
    """Dispatch on ``opts.method``."""
    if opts.method == "iterate":
        return reach_iterate(model, opts)
    return reach_unroll(model, opts)


# --------------------------------------------------------------------------
# sampling oracle

def iter_samples(model: SystemModel, N: int, seed: int, steps: int | None = None
                 ) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(k, points)`` with an ``(N, n)`` array of sampled states.

    Initial states and each step's inputs are drawn uniformly from their
    boxes; the dynamics run in float arithmetic on all trajectories at once.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    steps = model.horizon if steps is None else steps
    rng = np.random.default_rng(seed)
    step_fn = model.compile(rigorous=False)

    def draw(box: Box) -> list[np.ndarray]:
        return [rng.uniform(c.lo, c.hi, size=N) if c.lo < c.hi else np.full(N, c.lo) for c in box]

    x = draw(model.init)
    yield 0, np.column_stack(x)
    in_box = Box(list(model.control_box) + list(model.disturbance_box))
    for k in range(1, steps + 1):
        u = draw(in_box)
        out = step_fn(x + u)
        x = [np.broadcast_to(np.asarray(v, dtype=float), (N,)).copy() for v in out]
        yield k, np.column_stack(x)


def simulate_samples(model: SystemModel, N: int, seed: int, steps: int | None = None
                     ) -> list[np.ndarray]:
    """Per-step point clouds, index k holding the states after k steps."""
    return [pts for _, pts in iter_samples(model, N, seed, steps)]


# relative rounding a float trajectory may pick up per step
SAMPLE_ROUNDING_PER_STEP = 64 * 2.0**-53


def count_violations(result: ReachResult, model: SystemModel, N: int, seed: int) -> list[tuple[int, int]]:
    """``(step, count)`` for every step where sampled states leave the over set.

    The samples come from a float simulation, so a point counts only when it
    is outside by more than the rounding that simulation may have accumulated.
    """
    out = []
    for k, pts in iter_samples(model, N, seed, len(result.steps) - 1):
        outside = result.steps[k].over.excludes_points(pts, SAMPLE_ROUNDING_PER_STEP * k)
        bad = int(np.count_nonzero(outside))
        if bad:
            out.append((k, bad))
    return out
