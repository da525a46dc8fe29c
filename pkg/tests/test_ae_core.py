import itertools

import numpy as np
import pytest

from aereach.ae_core import (QuantifierSplit, RangePair, RingPartition, _quad, linearize, mean_value_range,
                             mv_bounds, quadrature_range, robust_mean_value_range, taylor2_range)
from aereach.autodiff import jacobian_eval
from aereach.expr import compile_expr, parse_expr
from aereach.interval import EMPTY, Box, Interval

SQUARE_MINUS_X = parse_expr("x^2 - x")
CUBIC = parse_expr("x^3 + x^2 + x + 1")


def close(iv, lo, hi, tol=1e-12):
    return abs(iv.lo - lo) <= tol and abs(iv.hi - hi) <= tol


def test_mean_value_on_square_minus_x():
    under, over = mean_value_range(SQUARE_MINUS_X, Box([(2, 3)]))
    assert close(under, 2.25, 5.25) and close(over, 1.25, 6.25)
    assert under.lo >= 2.25 and under.hi <= 5.25
    assert over.lo <= 1.25 and over.hi >= 6.25


def test_constant_and_linear_are_exact():
    under, over = mean_value_range(parse_expr("0*x + 1.5"), Box([(-4, 7)]))
    assert under == over == Interval(1.5)
    under, over = mean_value_range(parse_expr("x1 + x2"), Box([(0, 1), (0, 1)]))
    assert under == over == Interval(0.0, 2.0)


def test_robust_linear_examples():
    f = parse_expr("u - w")
    names = ["w", "u"]
    split = QuantifierSplit.with_universal(2, [0])
    under, over = robust_mean_value_range(f, Box([(-1, 1), (-2, 2)]), split, names)
    assert under == Interval(-1.0, 1.0)
    # the over-interval encloses the robust range, here exactly [-1, 1]
    assert over == Interval(-1.0, 1.0)
    under, _ = robust_mean_value_range(f, Box([(-2, 2), (-1, 1)]), split, names)
    assert under.is_empty()


def test_robust_with_no_universal_inputs_is_identical():
    b = Box([(2, 3)])
    assert robust_mean_value_range(SQUARE_MINUS_X, b, QuantifierSplit.all_existential(1)) == mean_value_range(SQUARE_MINUS_X, b)


def test_split_must_partition_inputs():
    with pytest.raises(ValueError):
        QuantifierSplit(frozenset({0}), frozenset({0, 1}))
    with pytest.raises(ValueError):
        robust_mean_value_range(SQUARE_MINUS_X, Box([(2, 3)]), QuantifierSplit(frozenset(), frozenset()))


def test_taylor2_cubic_example():
    under, over = taylor2_range(CUBIC, Box([(-0.25, 0.25)]))
    assert close(under, 0.859375, 1.25)
    assert over.contains(under)
    mv_under, _ = mean_value_range(CUBIC, Box([(-0.25, 0.25)]))
    assert close(mv_under, 0.875, 1.125)
    assert under.contains(mv_under) and under != mv_under


def test_taylor2_zero_center_gradient_gives_empty_under():
    under, over = taylor2_range(parse_expr("x^2"), Box([(-1, 1)]))
    assert under.is_empty()
    assert over.contains(Interval(0.0, 1.0))


def test_quadrature_hand_example():
    under, over = quadrature_range(parse_expr("x^2"), Box([(0, 2)]), k=2)
    assert close(under, 0.5, 1.5) and close(over, -2.5, 4.5)


def test_quadrature_k1_matches_mean_value():
    b = Box([(2, 3)])
    assert quadrature_range(SQUARE_MINUS_X, b, k=1) == mean_value_range(SQUARE_MINUS_X, b)


@pytest.mark.parametrize("k", [1, 3, 10])
def test_quadrature_linear_is_exact(k):
    under, over = quadrature_range(parse_expr("2*x"), Box([(0, 1)]), k=k)
    assert under == over == Interval(0.0, 2.0)


def test_quadrature_rejects_bad_k():
    with pytest.raises(ValueError):
        quadrature_range(SQUARE_MINUS_X, Box([(2, 3)]), k=0)


def test_ring_partition_breakpoints():
    p = RingPartition.uniform(Box([(0, 2), (-1, 1)]), 4)
    assert p.breakpoints[0] == (0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0)
    assert p.breakpoints[1][4] == 0.0 and p.breakpoints[1][0] == -1.0
    assert len(p.dx) == 4 and all(d == (0.25, 0.25) for d in p.dx)
    assert sum(d[0] for d in p.dx) == 1.0


def random_cubic(rng):
    terms = []
    for i, j in itertools.product(range(4), range(4)):
        if i + j <= 3 and rng.random() < 0.7:
            terms.append(f"({rng.normal():.6f})*x1^{i}*x2^{j}")
    return parse_expr(" + ".join(terms) or "0")


def random_box(rng):
    c = rng.uniform(-2, 2, size=2)
    r = rng.uniform(0.05, 1.0, size=2)
    return Box([(float(a - s), float(a + s)) for a, s in zip(c, r)])


def corpus():
    rng = np.random.default_rng(2024)
    return [(random_cubic(rng), random_box(rng)) for _ in range(20)]


CORPUS = corpus()
SPLITS = [QuantifierSplit.all_existential(2), QuantifierSplit.with_universal(2, [1])]


def extensions(f, b):
    """Every extension as ``(name, is_robust, pair)``."""
    yield "mv", False, mean_value_range(f, b)
    yield "taylor2", False, taylor2_range(f, b)
    yield "quadrature", False, quadrature_range(f, b, k=10)
    yield "robust-mv", True, robust_mean_value_range(f, b, SPLITS[1])
    yield "robust-quadrature", True, quadrature_range(f, b, k=10, split=SPLITS[1])
    yield "robust-taylor2", True, taylor2_range(f, b, SPLITS[1])


def grid_oracle(f, b, n=400):
    """Grid estimates of the plain range and of the robust range with x2
    universal, plus the Lipschitz slack bounding their error."""
    xs = np.linspace(b[0].lo, b[0].hi, n)
    ys = np.linspace(b[1].lo, b[1].hi, n)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    vals = np.asarray(compile_expr(f, {"x1": 0, "x2": 1}, {}, rigorous=False)([X, Y]), dtype=float)
    vals = np.broadcast_to(vals, X.shape)
    (grad,) = jacobian_eval([f], {"x1": b[0], "x2": b[1]})
    lip = [max(abs(g.lo), abs(g.hi)) if isinstance(g, Interval) else abs(g) for g in grad]
    spacing = [(c.hi - c.lo) / (n - 1) for c in b]
    slack = sum(L * h / 2 for L, h in zip(lip, spacing))
    plain = (float(vals.min()), float(vals.max()))
    # for all x2 there is x1: intersect the x1-ranges of every x2 column
    robust = (float(vals.min(axis=0).max()), float(vals.max(axis=0).min()))
    return plain, robust, slack


@pytest.mark.parametrize("idx", range(20))
def test_brute_force_soundness(idx):
    f, b = CORPUS[idx]
    plain, robust, slack = grid_oracle(f, b)
    fp = 1e-12 * max(1.0, abs(plain[0]), abs(plain[1]))  # float error of the grid evaluation
    for name, is_robust, (under, over) in extensions(f, b):
        lo, hi = robust if is_robust else plain
        s = slack + fp
        if is_robust:
            # only checkable when the grid proves the robust range non-empty
            if lo + s < hi - s:
                assert over.lo <= lo + s and hi - s <= over.hi, name
        else:
            # grid points are points of the range
            assert over.lo <= lo + fp and hi - fp <= over.hi, name
        if under.is_empty():
            continue
        assert lo - s <= under.lo and under.hi <= hi + s, name
        assert over.contains(under), name


def full_box_mv(lin):
    """Mean-value pair with every gradient bounded over the whole box."""
    c = lin.value
    lo_sum = hi_sum = 0.0
    for g, r in zip(lin.grad, lin.outer):
        a = abs(g.instantiate())
        lo_sum += a.lo * r
        hi_sum += a.hi * r
    return RangePair(Interval(c.hi - lo_sum, c.lo + lo_sum) if c.hi - lo_sum <= c.lo + lo_sum else EMPTY,
                     Interval(c.lo - hi_sum, c.hi + hi_sum))


@pytest.mark.parametrize("idx", range(20))
def test_quadrature_dominance(idx):
    f, b = CORPUS[idx]
    (lin,) = linearize([f], b)
    tol = 1e-12 * max(1.0, abs(lin.value.lo))
    for split in SPLITS:
        combined = quadrature_range(f, b, k=10, split=split)
        mv = mv_bounds(lin, split.universal)
        assert mv.over.contains(combined.over)
        assert mv.under.is_empty() or combined.under.contains(mv.under)
    rings = _quad(lin, (), 10)
    box = full_box_mv(lin)
    assert rings.over.lo >= box.over.lo - tol and rings.over.hi <= box.over.hi + tol
    if not box.under.is_empty():
        assert rings.under.lo <= box.under.lo + tol and rings.under.hi >= box.under.hi - tol


@pytest.mark.parametrize("idx", range(20))
def test_robust_containment(idx):
    f, b = CORPUS[idx]
    plain = mean_value_range(f, b)
    for u in ([0], [1], [0, 1]):
        robust = robust_mean_value_range(f, b, QuantifierSplit.with_universal(2, u))
        assert plain.over.contains(robust.over)
        assert robust.under.is_empty() or plain.under.contains(robust.under)


def test_sandwich_on_wide_boxes():
    rng = np.random.default_rng(5)
    for _ in range(30):
        f = random_cubic(rng)
        c = rng.uniform(-3, 3, size=2)
        b = Box([(float(x - 2), float(x + 2)) for x in c])
        for _, _, (under, over) in extensions(f, b):
            assert under.is_empty() or over.contains(under)
