"""Expression trees and the model-file language.

Expressions compile to nested closures so the dynamics can be evaluated many
times in any scalar type (float, numpy array, Interval, AffineForm, duals).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from . import _scalar as sc
from .interval import Box, DomainError, Interval
from ._rounding import down, up


# --------------------------------------------------------------------------
# AST

class Expr:
    """Base class of expression nodes."""

    __slots__ = ()


@dataclass(frozen=True)
class Const(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Param(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class PowInt(Expr):
    base: Expr
    n: int


@dataclass(frozen=True)
class Func(Expr):
    """Elementary function application; ``name`` is one of sin, cos, exp,
    log, sqrt."""

    name: str
    arg: Expr


def Sin(arg: Expr) -> Func:
    return Func("sin", arg)


def Cos(arg: Expr) -> Func:
    return Func("cos", arg)


def Exp(arg: Expr) -> Func:
    return Func("exp", arg)


def Log(arg: Expr) -> Func:
    return Func("log", arg)


def Sqrt(arg: Expr) -> Func:
    return Func("sqrt", arg)


FUNCTION_NAMES = frozenset(sc.FUNCTIONS)
_BINARY = {Add: "+", Sub: "-", Mul: "*", Div: "/"}


def children(e: Expr) -> tuple[Expr, ...]:
    if isinstance(e, (Add, Sub, Mul, Div)):
        return (e.left, e.right)
    if isinstance(e, (Neg, Func)):
        return (e.arg,)
    if isinstance(e, PowInt):
        return (e.base,)
    return ()


def variables(e: Expr) -> set[str]:
    """Names of the Var nodes occurring in ``e``."""
    if isinstance(e, Var):
        return {e.name}
    out: set[str] = set()
    for c in children(e):
        out |= variables(c)
    return out


# --------------------------------------------------------------------------
# errors

class ExprError(ValueError):
    pass


class ExprDomainError(DomainError):
    """A domain error raised while evaluating ``subexpr``."""

    def __init__(self, subexpr: str, cause: Exception):
        super().__init__(f"{cause} (in `{subexpr}`)")
        self.subexpr = subexpr


class ModelError(ValueError):
    """Syntax or validation error in a model file, with its location."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {message}")
        self.message = message
        self.line = line
        self.col = col


# --------------------------------------------------------------------------
# pretty printing

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, PowInt: 4}


def _prec(e: Expr) -> int:
    return _PREC.get(type(e), 5)


def to_text(e: Expr) -> str:
    """Render ``e`` in the model language with minimal parentheses."""

    def wrap(x: Expr, min_prec: int) -> str:
        s = to_text(x)
        return f"({s})" if _prec(x) < min_prec else s

    if isinstance(e, Const):
        s = repr(e.value)
        return f"({s})" if e.value < 0 or s.startswith("-") else s
    if isinstance(e, (Var, Param)):
        return e.name
    if isinstance(e, (Add, Sub)):
        return f"{wrap(e.left, 1)} {_BINARY[type(e)]} {wrap(e.right, 2)}"
    if isinstance(e, (Mul, Div)):
        return f"{wrap(e.left, 2)}{_BINARY[type(e)]}{wrap(e.right, 3)}"
    if isinstance(e, Neg):
        return "-" + wrap(e.arg, 3)
    if isinstance(e, PowInt):
        return f"{wrap(e.base, 5)}^{e.n}"
    if isinstance(e, Func):
        return f"{e.name}({to_text(e.arg)})"
    raise TypeError(f"not an expression node: {e!r}")


# --------------------------------------------------------------------------
# tokenizer and expression parser

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t]+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*'?)
  | (?P<op>\*\*|->|[-+*/^()\[\],=])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    col: int  # 1-based


def _tokenize(text: str, line: int, col0: int = 1) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ModelError(f"unexpected character {text[pos]!r}", line, col0 + pos)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), col0 + pos))
        pos = m.end()
    toks.append(_Tok("end", "", col0 + len(text)))
    return toks


class _ExprParser:
    """Recursive descent over the grammar::

        expr  := term (("+" | "-") term)*
        term  := unary (("*" | "/") unary)*
        unary := "-" unary | "+" unary | power
        power := atom (("^" | "**") ["-"] INT)?
        atom  := NUMBER | IDENT | FUNC "(" expr ")" | "(" expr ")"
    """

    def __init__(self, toks: list[_Tok], line: int, resolve: Callable[[str, int], Expr]):
        self.toks = toks
        self.i = 0
        self.line = line
        self.resolve = resolve

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.peek()
        raise ModelError(msg, self.line, tok.col)

    def expect(self, text: str) -> _Tok:
        t = self.peek()
        if t.text != text:
            self.error(f"expected {text!r}, found {t.text or 'end of line'!r}")
        return self.take()

    def parse_all(self) -> Expr:
        e = self.expr()
        if self.peek().kind != "end":
            self.error(f"unexpected {self.peek().text!r}")
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek().text in ("+", "-"):
            op = self.take().text
            r = self.term()
            e = Add(e, r) if op == "+" else Sub(e, r)
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek().text in ("*", "/"):
            op = self.take().text
            r = self.unary()
            e = Mul(e, r) if op == "*" else Div(e, r)
        return e

    def unary(self) -> Expr:
        t = self.peek()
        if t.text == "-":
            self.take()
            return Neg(self.unary())
        if t.text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek().text in ("^", "**"):
            self.take()
            sign = 1
            if self.peek().text == "-":
                self.take()
                sign = -1
            t = self.peek()
            if t.kind != "num" or not t.text.isdigit():
                self.error("exponent must be an integer literal")
            self.take()
            return PowInt(base, sign * int(t.text))
        return base

    def atom(self) -> Expr:
        t = self.take()
        if t.kind == "num":
            return Const(float(t.text))
        if t.kind == "ident":
            if t.text in FUNCTION_NAMES and self.peek().text == "(":
                self.take()
                arg = self.expr()
                self.expect(")")
                return Func(t.text, arg)
            return self.resolve(t.text, t.col)
        if t.text == "(":
            e = self.expr()
            self.expect(")")
            return e
        self.error(f"unexpected {t.text or 'end of line'!r}", t)
        raise AssertionError  # unreachable


def parse_expr(text: str, params: Sequence[str] = (), known: Sequence[str] | None = None) -> Expr:
    """Parse one expression.

    Identifiers listed in ``params`` become :class:`Param` nodes, others
    :class:`Var` nodes.  When ``known`` is given, any other identifier is an
    error.
    """
    pset = set(params)
    kset = None if known is None else set(known) | pset

    def resolve(name: str, col: int) -> Expr:
        if kset is not None and name not in kset:
            raise ModelError(f"undeclared identifier {name!r}", 1, col)
        return Param(name) if name in pset else Var(name)

    return _ExprParser(_tokenize(text, 1), 1, resolve).parse_all()


# --------------------------------------------------------------------------
# compilation and evaluation

def _const_interval(e: Expr, params: Mapping[str, float]) -> Interval | None:
    """Rigorous value of a variable-free subtree, or None if it has variables."""
    if isinstance(e, Const):
        return Interval(e.value)
    if isinstance(e, Param):
        return Interval(params[e.name])
    if isinstance(e, Var):
        return None
    parts = [_const_interval(c, params) for c in children(e)]
    if any(p is None for p in parts):
        return None
    return _apply(e, parts)


def _apply(e: Expr, args: list):
    if isinstance(e, Add):
        return args[0] + args[1]
    if isinstance(e, Sub):
        return args[0] - args[1]
    if isinstance(e, Mul):
        return args[0] * args[1]
    if isinstance(e, Div):
        return args[0] / args[1]
    if isinstance(e, Neg):
        return -args[0]
    if isinstance(e, PowInt):
        return sc.pow_int(args[0], e.n)
    if isinstance(e, Func):
        return sc.FUNCTIONS[e.name](args[0])
    raise TypeError(f"not an expression node: {e!r}")


def compile_expr(e: Expr, index: Mapping[str, int], params: Mapping[str, float],
                 rigorous: bool = True) -> Callable[[Sequence], object]:
    """Turn ``e`` into a function of a value sequence ordered by ``index``.

    With ``rigorous`` set, variable-free subtrees are folded into intervals
    (kept as floats when the interval is a single point) so constants like
    ``0.7*0.001`` are enclosed instead of rounded.  Otherwise they are folded
    in plain float arithmetic, which suits sampling and finite differences.
    """
    if rigorous:
        k = _const_interval(e, params) if not isinstance(e, Var) else None
        if k is not None:
            value = k.lo if k.is_point() else k
            return lambda v: value
    else:
        if not (variables(e)):
            value = float(_eval_float_const(e, params))
            return lambda v: value

    if isinstance(e, Var):
        try:
            i = index[e.name]
        except KeyError:
            raise ExprError(f"unbound variable {e.name!r}") from None
        return lambda v: v[i]
    if isinstance(e, (Const, Param)):  # pragma: no cover - folded above
        raise AssertionError
    sub = [compile_expr(c, index, params, rigorous) for c in children(e)]
    if isinstance(e, Add):
        a, b = sub
        return lambda v: a(v) + b(v)
    if isinstance(e, Sub):
        a, b = sub
        return lambda v: a(v) - b(v)
    if isinstance(e, Mul):
        a, b = sub
        return lambda v: a(v) * b(v)
    if isinstance(e, Neg):
        (a,) = sub
        return lambda v: -a(v)
    if isinstance(e, PowInt):
        (a,) = sub
        n = e.n
        pw = sc.pow_int
        if n == 2:
            return _guarded(lambda v: pw(a(v), 2), e)
        return _guarded(lambda v: pw(a(v), n), e)
    if isinstance(e, Div):
        a, b = sub
        return _guarded(lambda v: a(v) / b(v), e)
    if isinstance(e, Func):
        (a,) = sub
        fn = sc.FUNCTIONS[e.name]
        return _guarded(lambda v: fn(a(v)), e)
    raise TypeError(f"not an expression node: {e!r}")


def _guarded(fn: Callable, e: Expr) -> Callable:
    def run(v):
        try:
            return fn(v)
        except ExprDomainError:
            raise
        except (DomainError, ZeroDivisionError, ValueError) as exc:
            raise ExprDomainError(to_text(e), exc) from exc

    return run


def _eval_float_const(e: Expr, params: Mapping[str, float]) -> float:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Param):
        return params[e.name]
    return _apply(e, [_eval_float_const(c, params) for c in children(e)])


def eval_expr(e: Expr, env: Mapping[str, object], params: Mapping[str, float] | None = None,
              rigorous: bool | None = None):
    """Evaluate ``e`` with variables bound by ``env``.

    Constant subtrees are enclosed rigorously unless every bound value is a
    plain float (or ``rigorous`` is given explicitly).
    """
    names = list(env)
    if rigorous is None:
        rigorous = not all(isinstance(env[n], (int, float)) for n in names)
    fn = compile_expr(e, {n: i for i, n in enumerate(names)}, params or {}, rigorous)
    return fn([env[n] for n in names])


# --------------------------------------------------------------------------
# system models

@dataclass(frozen=True)
class SystemModel:
    """A discrete-time system ``x' = f(x, u, w)``.

    Boxes parsed from decimal literals come in two versions: the outer one
    (endpoints rounded outward when the decimal is not a float) is used for
    over-approximation, the inner one for under-approximation.
    """

    name: str
    states: tuple[str, ...]
    dynamics: tuple[Expr, ...]
    init: Box
    controls: tuple[str, ...] = ()
    control_box: Box = field(default_factory=lambda: Box([]))
    disturbances: tuple[str, ...] = ()
    disturbance_box: Box = field(default_factory=lambda: Box([]))
    params: Mapping[str, float] = field(default_factory=dict)
    horizon: int = 1
    pi: Mapping[str, int] = field(default_factory=dict)
    init_inner: Box | None = None
    control_box_inner: Box | None = None
    disturbance_box_inner: Box | None = None

    def __post_init__(self):
        if len(self.dynamics) != len(self.states):
            raise ValueError("one dynamics expression is needed per state")
        if len(self.init) != len(self.states):
            raise ValueError("the initial box must have one interval per state")
        for attr, outer in (("init_inner", self.init), ("control_box_inner", self.control_box),
                            ("disturbance_box_inner", self.disturbance_box)):
            if getattr(self, attr) is None:
                object.__setattr__(self, attr, outer)
        for name, target in self.pi.items():
            if name in self.disturbances:
                raise ValueError(f"pi cannot assign disturbance {name!r}")
            if not 0 <= target < len(self.states):
                raise ValueError(f"pi target {target} of {name!r} is out of range")

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def inputs(self) -> tuple[str, ...]:
        return self.controls + self.disturbances

    @property
    def variables(self) -> tuple[str, ...]:
        """States, then controls, then disturbances: the argument order of
        :meth:`compile`."""
        return self.states + self.controls + self.disturbances

    def compile(self, rigorous: bool = True) -> Callable[[Sequence], list]:
        """Next-state function of a value list ordered as :attr:`variables`."""
        index = {n: i for i, n in enumerate(self.variables)}
        fns = [compile_expr(e, index, self.params, rigorous) for e in self.dynamics]

        def step(values: Sequence) -> list:
            return [f(values) for f in fns]

        return step


def _literal_bounds(text: str) -> tuple[float, float]:
    """Floats just below and above the decimal ``text`` (equal if exact)."""
    x = float(text)
    exact = Fraction(text)
    fx = Fraction(x)
    if fx == exact:
        return x, x
    return (x, up(x)) if fx < exact else (down(x), x)


class _ModelParser:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.name = "model"
        self.states: list[str] = []
        self.params: dict[str, float] = {}
        self.controls: list[tuple[str, Interval, Interval]] = []
        self.disturbances: list[tuple[str, Interval, Interval]] = []
        self.init: dict[str, tuple[Interval, Interval]] = {}
        self.dynamics: dict[str, Expr] = {}
        self.pi: dict[str, int] = {}
        self.pi_pending: list[tuple[str, str, int, int]] = []
        self.horizon = 1
        self.in_dynamics = False
        self.line_no = 0

    def declared(self) -> set[str]:
        return (set(self.states) | set(self.params)
                | {c[0] for c in self.controls} | {d[0] for d in self.disturbances})

    def err(self, msg: str, col: int = 1):
        raise ModelError(msg, self.line_no, col)

    def parse(self) -> SystemModel:
        for self.line_no, raw in enumerate(self.lines, start=1):
            body = raw.split("#", 1)[0].rstrip()
            if not body.strip():
                continue
            indent = len(body) - len(body.lstrip())
            toks = _tokenize(body.lstrip(), self.line_no, indent + 1)
            self.line(toks)
        return self.finish()

    def line(self, toks: list[_Tok]):
        head = toks[0]
        if head.kind == "ident" and head.text.endswith("'"):
            if not self.in_dynamics:
                self.err("update equations must follow a `dynamics` line", head.col)
            self.dynamic(toks)
            return
        keyword = head.text
        handler = {
            "system": self.system, "states": self.state_decl, "state": self.state_decl,
            "param": self.param, "control": self.control, "disturbance": self.disturbance,
            "init": self.init_decl, "horizon": self.horizon_decl, "pi": self.pi_decl,
            "dynamics": self.dynamics_start,
        }.get(keyword)
        if handler is None or head.kind != "ident":
            self.err(f"unknown statement {keyword!r}", head.col)
        handler(toks[1:])

    # statement handlers -------------------------------------------------------
    def ident(self, t: _Tok, what: str) -> str:
        if t.kind != "ident" or t.text.endswith("'"):
            self.err(f"expected {what} name, found {t.text or 'end of line'!r}", t.col)
        if t.text in FUNCTION_NAMES:
            self.err(f"{t.text!r} is a reserved function name", t.col)
        return t.text

    def expect(self, toks: list[_Tok], i: int, text: str) -> int:
        if toks[i].text != text:
            self.err(f"expected {text!r}, found {toks[i].text or 'end of line'!r}", toks[i].col)
        return i + 1

    def number(self, toks: list[_Tok], i: int) -> tuple[str, int]:
        sign = ""
        if toks[i].text in ("-", "+"):
            sign = "-" if toks[i].text == "-" else ""
            i += 1
        if toks[i].kind != "num":
            self.err(f"expected a number, found {toks[i].text or 'end of line'!r}", toks[i].col)
        return sign + toks[i].text, i + 1

    def interval(self, toks: list[_Tok], i: int) -> tuple[Interval, Interval, int]:
        """``[a, b]`` or a single number; returns outer and inner intervals."""
        if toks[i].text == "[":
            start = toks[i]
            a, i = self.number(toks, i + 1)
            i = self.expect(toks, i, ",")
            b, i = self.number(toks, i)
            i = self.expect(toks, i, "]")
        else:
            start = toks[i]
            a, i = self.number(toks, i)
            b = a
        alo, ahi = _literal_bounds(a)
        blo, bhi = _literal_bounds(b)
        if Fraction(a) > Fraction(b):
            self.err(f"empty interval [{a}, {b}]", start.col)
        outer = Interval(alo, bhi)
        # an inexact point literal has no float inside it: its inner set is empty
        inner = Interval(ahi, blo)
        return outer, inner, i

    def end(self, toks: list[_Tok], i: int):
        if toks[i].kind != "end":
            self.err(f"unexpected {toks[i].text!r}", toks[i].col)

    def new_name(self, t: _Tok, what: str) -> str:
        name = self.ident(t, what)
        if name in self.declared():
            self.err(f"{name!r} is declared twice", t.col)
        return name

    def system(self, toks):
        self.name = self.ident(toks[0], "system")
        self.end(toks, 1)

    def state_decl(self, toks):
        i = 0
        while True:
            self.states.append(self.new_name(toks[i], "state"))
            i += 1
            if toks[i].text == ",":
                i += 1
                continue
            self.end(toks, i)
            return

    def param(self, toks):
        i = 0
        while True:
            name = self.new_name(toks[i], "parameter")
            i = self.expect(toks, i + 1, "=")
            value, i = self.number(toks, i)
            self.params[name] = float(value)
            if toks[i].text == ",":
                i += 1
                continue
            self.end(toks, i)
            return

    def ranged(self, toks, what: str, dest: list):
        name = self.new_name(toks[0], what)
        if toks[1].text != "in":
            self.err(f"expected 'in', found {toks[1].text or 'end of line'!r}", toks[1].col)
        outer, inner, i = self.interval(toks, 2)
        self.end(toks, i)
        dest.append((name, outer, inner))

    def control(self, toks):
        self.ranged(toks, "control", self.controls)

    def disturbance(self, toks):
        self.ranged(toks, "disturbance", self.disturbances)

    def init_decl(self, toks):
        i = 0
        while True:
            t = toks[i]
            name = self.ident(t, "state")
            if name not in self.states:
                self.err(f"initial value for undeclared state {name!r}", t.col)
            if name in self.init:
                self.err(f"initial value of {name!r} given twice", t.col)
            i = self.expect(toks, i + 1, "=")
            outer, inner, i = self.interval(toks, i)
            self.init[name] = (outer, inner)
            if toks[i].text == ",":
                i += 1
            if toks[i].kind == "end":
                return

    def horizon_decl(self, toks):
        t = toks[0]
        if t.kind != "num" or not t.text.isdigit():
            self.err("horizon must be a nonnegative integer", t.col)
        self.horizon = int(t.text)
        self.end(toks, 1)

    def pi_decl(self, toks):
        src = self.ident(toks[0], "input")
        i = self.expect(toks, 1, "->")
        dst = self.ident(toks[i], "state")
        self.end(toks, i + 1)
        self.pi_pending.append((src, dst, toks[0].col, toks[i].col))

    def dynamics_start(self, toks):
        self.end(toks, 0)
        self.in_dynamics = True

    def dynamic(self, toks):
        head = toks[0]
        name = head.text[:-1]
        if name not in self.states:
            self.err(f"update equation for undeclared state {name!r}", head.col)
        if name in self.dynamics:
            self.err(f"state {name!r} has two update equations", head.col)
        if toks[1].text != "=":
            self.err(f"expected '=', found {toks[1].text or 'end of line'!r}", toks[1].col)
        params = set(self.params)
        known = self.declared()
        line = self.line_no

        def resolve(ident: str, col: int) -> Expr:
            if ident not in known:
                raise ModelError(f"undeclared identifier {ident!r}", line, col)
            return Param(ident) if ident in params else Var(ident)

        self.dynamics[name] = _ExprParser(toks[2:], line, resolve).parse_all()

    def finish(self) -> SystemModel:
        self.line_no = len(self.lines) + 1
        if not self.states:
            self.err("no states declared")
        missing = [s for s in self.states if s not in self.dynamics]
        if missing:
            self.err(f"dimension mismatch: no update equation for {', '.join(missing)}")
        no_init = [s for s in self.states if s not in self.init]
        if no_init:
            self.err(f"no initial value for {', '.join(no_init)}")
        controls = [c[0] for c in self.controls]
        disturbances = [d[0] for d in self.disturbances]
        for src, dst, scol, dcol in self.pi_pending:
            if src in disturbances:
                raise ModelError(f"pi cannot assign disturbance {src!r}", self.line_no, scol)
            if src not in controls:
                raise ModelError(f"pi source {src!r} is not a declared control", self.line_no, scol)
            if dst not in self.states:
                raise ModelError(f"pi targets nonexistent component {dst!r}", self.line_no, dcol)
            self.pi[src] = self.states.index(dst)
        return SystemModel(
            name=self.name,
            states=tuple(self.states),
            dynamics=tuple(self.dynamics[s] for s in self.states),
            init=Box(self.init[s][0] for s in self.states),
            init_inner=Box(self.init[s][1] for s in self.states),
            controls=tuple(controls),
            control_box=Box(c[1] for c in self.controls),
            control_box_inner=Box(c[2] for c in self.controls),
            disturbances=tuple(disturbances),
            disturbance_box=Box(d[1] for d in self.disturbances),
            disturbance_box_inner=Box(d[2] for d in self.disturbances),
            params=dict(self.params),
            horizon=self.horizon,
            pi=dict(self.pi),
        )


def parse_model(text: str) -> SystemModel:
    """Parse a model file; raises :class:`ModelError` with line and column."""
    return _ModelParser(text).parse()


def load_model(path) -> SystemModel:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())
