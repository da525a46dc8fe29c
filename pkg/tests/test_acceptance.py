"""Acceptance criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v``; the lines are repeated in an
"acceptance criteria" section at the end of the pytest report.
"""
import time

import numpy as np
import pytest

import test_ae_core
import test_autodiff
import test_joint_range
import test_reach
from aereach.ae_core import mean_value_range, quadrature_range, taylor2_range
from aereach.affine import NoiseContext, af_from_box, af_instantiate, restriction
from aereach.autodiff import jacobian_eval
from aereach.expr import parse_expr
from aereach.interval import Box
from aereach.joint_range import SkewedBox, joint_over, joint_under, preconditioned_step
from aereach.reach import ReachOptions, compute_reach, count_violations

PAIR_MAP = [parse_expr("2*x1^2 - x1*x2 - 1"), parse_expr("x1^2 + x2^2 - 2")]
PAIR_BOX = Box([(0.9, 1.1), (0.9, 1.1)])


def near(iv, lo, hi, tol):
    return not iv.is_empty() and abs(iv.lo - lo) <= tol and abs(iv.hi - hi) <= tol


def fmt(iv):
    return "empty" if iv.is_empty() else f"[{iv.lo:.6g}, {iv.hi:.6g}]"


def failures(check, cases):
    """Run ``check(case)`` on every case and list the ones that raise AssertionError."""
    bad = []
    for case in cases:
        try:
            check(case)
        except AssertionError:
            bad.append(case)
    return bad


def test_c1_mean_value_exactness(verdict):
    f, b = parse_expr("x^2 - x"), Box([(2, 3)])
    under, over = mean_value_range(f, b)
    best = min(_timed(lambda: mean_value_range(f, b)) for _ in range(20))
    ok = near(under, 2.25, 5.25, 1e-12) and near(over, 1.25, 6.25, 1e-12) and best < 1e-3
    assert verdict("1 mean-value exactness on x^2 - x", ok,
                   f"under {fmt(under)}, over {fmt(over)}, {best * 1e3:.3f} ms")


def _timed(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def test_c2_taylor2_exactness(verdict):
    f, b = parse_expr("x^3 + x^2 + x + 1"), Box([(-0.25, 0.25)])
    t2 = taylor2_range(f, b).under
    mv = mean_value_range(f, b).under
    ok = (near(t2, 0.859375, 1.25, 1e-12) and near(mv, 0.875, 1.125, 1e-12)
          and t2.contains(mv) and t2 != mv)
    assert verdict("2 order-2 under strictly wider than mean-value under", ok,
                   f"taylor2 {fmt(t2)}, mv {fmt(mv)}")


def test_c3_affine_jacobian_instantiation(verdict):
    ctx = NoiseContext()
    x1, x2 = af_from_box(PAIR_BOX, ctx)
    (row,) = jacobian_eval([parse_expr("2*x1^2 + 2*x2^2 - 2*x1*x2 - 2")], {"x1": x1, "x2": x2})
    d11 = row[0]
    s1, s2 = next(iter(x1.terms)), next(iter(x2.terms))
    whole = af_instantiate(d11)
    # inner ring of a k = 10 partition: each symbol restricted to [-1/10, 1/10]
    ring = af_instantiate(d11, restriction([(s1, (-0.1, 0.1)), (s2, (-0.1, 0.1))]))
    ok = near(whole, 1.4, 2.6, 1e-9) and near(ring, 1.94, 2.06, 1e-9)
    assert verdict("3 affine Jacobian entry instantiation", ok, f"whole {fmt(whole)}, ring {fmt(ring)}")


def _componentwise():
    unders = [quadrature_range(f, PAIR_BOX, k=10).under for f in PAIR_MAP]
    overs = joint_over(PAIR_MAP, PAIR_BOX, method="quad")
    return unders, overs


def test_c4_joint_under_without_preconditioning_is_empty(verdict):
    joint = {m: joint_under(PAIR_MAP, PAIR_BOX, method=m) for m in ("mv", "taylor2", "quad")}
    ok = all(z.is_empty() for z in joint.values())
    assert verdict("4a joint under empty without preconditioning", ok,
                   ", ".join(f"{m}: {'empty' if z.is_empty() else z}" for m, z in joint.items()))


def test_c4_second_component_bounds(verdict):
    unders, overs = _componentwise()
    ok = near(unders[1], -0.38, 0.38, 0.01) and near(overs[1], -0.42, 0.42, 0.01)
    assert verdict("4b f2 under ~ [-0.38, 0.38] and over ~ [-0.42, 0.42]", ok,
                   f"under {fmt(unders[1])}, over {fmt(overs[1])}")


@pytest.mark.xfail(strict=True, reason="f1 ranges over [-0.37, 0.43]: sound bounds sit on the 0.01 "
                                       "tolerance edge, and 0.37 and 0.43 are not binary floats")
def test_c4_first_component_bounds(verdict):
    pairs = {"mv": mean_value_range(PAIR_MAP[0], PAIR_BOX), "taylor2": taylor2_range(PAIR_MAP[0], PAIR_BOX),
             "quad": quadrature_range(PAIR_MAP[0], PAIR_BOX, k=10)}

    def miss(pair):
        u, o = pair
        if u.is_empty():
            return float("inf")
        return max(abs(u.lo + 0.38), abs(u.hi - 0.38), abs(o.lo + 0.42), abs(o.hi - 0.42)) - 0.01

    best = min(pairs, key=lambda m: miss(pairs[m]))
    u, o = pairs[best]
    ok = miss(pairs[best]) <= 0.0
    assert verdict("4c f1 under ~ [-0.38, 0.38] and over ~ [-0.42, 0.42]", ok,
                   f"closest is {best}: under {fmt(u)}, over {fmt(o)}, "
                   f"beyond tolerance by {miss(pairs[best]):.2g}; true range [-0.37, 0.43]")


def test_c4_preconditioned_pair(verdict):
    under, _ = preconditioned_step(PAIR_MAP, SkewedBox.from_box(PAIR_BOX, "under"))
    _, over = preconditioned_step(PAIR_MAP, SkewedBox.from_box(PAIR_BOX, "over"))
    nonempty = under is not None and not under.z.is_empty()
    corners_in = nonempty and bool(over.contains_points(under.corners()).all())
    pts = np.random.default_rng(45).uniform(0.9, 1.1, size=(100_000, 2))
    img = test_joint_range.pair_image(pts)
    inside = int(over.contains_points(img).sum())
    ok = nonempty and corners_in and inside == len(img)
    assert verdict("4d preconditioned under non-empty, corners in over, samples in over", ok,
                   f"{inside} of {len(img)} samples inside")


def test_c5_test_model(verdict, models, reach_of):
    r = reach_of("testmodel", method="iterate")
    nonempty = all(s.under is not None for s in r.steps)
    violations = count_violations(r, models["testmodel"], 10_000, 42)
    ok = len(r.steps) == 26 and nonempty and not violations and r.wall_time < 2.0
    assert verdict("5 test model, 25 steps, iterate", ok,
                   f"under non-empty at all steps: {nonempty}, violations {violations}, "
                   f"{r.wall_time:.2f} s")


def test_c6_sir(verdict, models, reach_of):
    r = reach_of("sir", method="iterate")
    last = r.steps[-1]
    violations = count_violations(r, models["sir"], 10_000, 42)
    ok = len(r.steps) == 61 and last.under is not None and not violations and r.wall_time < 5.0
    assert verdict("6a SIR, 60 steps, iterate", ok,
                   f"step 60 under {'non-empty' if last.under else 'empty'}, violations {violations}, "
                   f"{r.wall_time:.2f} s")


def test_c6_sir_point_initial_state(verdict, reach_of):
    it = reach_of("sir_point", method="iterate")
    un = reach_of("sir_point", method="unroll")
    onset = it.empty_under_onset
    all_nonempty = len(un.steps) == 61 and all(not c.is_empty() for s in un.steps for c in s.under_proj)
    ok = onset is not None and onset <= 5 and all_nonempty
    assert verdict("6b SIR with x3 = 0: iterate empties early, unroll stays non-empty", ok,
                   f"iterate onset {onset}, unroll projected unders non-empty at all steps: {all_nonempty}")


@pytest.mark.slow
def test_c7_honeybees_iterate(verdict, reach_of):
    r = reach_of("honeybees", method="iterate")
    onset = r.empty_under_onset
    ok = len(r.steps) == 1501 and r.wall_time < 30.0 and onset is not None and onset < 1500
    assert verdict("7a honeybees, 1500 steps, iterate", ok, f"onset {onset}, {r.wall_time:.1f} s")


@pytest.mark.slow
def test_c7_honeybees_unroll(verdict, reach_of):
    r = reach_of("honeybees", method="unroll")
    last = r.steps[-1].under_proj
    ok = len(r.steps) == 1501 and r.wall_time < 300.0 and all(not c.is_empty() for c in last)
    assert verdict("7b honeybees, 1500 steps, unroll", ok,
                   f"step 1500 unders {', '.join(fmt(c) for c in last)}, {r.wall_time:.1f} s")


def test_c8a_brute_force_oracle(verdict):
    bad = failures(test_ae_core.test_brute_force_soundness, range(20))
    assert verdict("8a grid oracle on 20 random cubics", not bad, f"failing cases {bad}")


def test_c8b_quadrature_dominance(verdict):
    bad = failures(test_ae_core.test_quadrature_dominance, range(20))
    assert verdict("8b quadrature dominates mean value", not bad, f"failing cases {bad}")


def test_c8c_gradients_vs_finite_differences(verdict):
    bad = failures(lambda _: test_autodiff.test_gradients_match_finite_differences_on_random_corpus(), [0])
    assert verdict("8c AD gradients vs central differences on 100 expressions", not bad)


@pytest.mark.slow
def test_c8d_reach_invariants(verdict, reach_of):
    names = ["testmodel", "sir", "sir_point", "honeybees"]
    sandwich = failures(lambda n: test_reach.test_cross_algorithm_sandwich(reach_of, n), names)
    shrink = failures(test_reach.test_robust_mode_shrinks_under, ["iterate", "unroll"])

    def benchmark_shrink(case):
        name, method = case
        plain = reach_of(name, method=method)
        robust = reach_of(name, method=method, robust=True)
        for p, r in zip(plain.steps, robust.steps):
            if r.under is not None:
                assert p.under is not None and p.under.contains_generator_of(r.under)

    shrink += failures(benchmark_shrink, [(n, m) for n in names for m in ("iterate", "unroll")])
    assert verdict("8d cross-algorithm sandwich and robust shrink", not (sandwich or shrink),
                   f"sandwich failures {sandwich}, shrink failures {shrink}")


def test_robust_run_reuses_plain_run_without_disturbances(models):
    # with no disturbance inputs the robust chains coincide with the plain ones
    plain = compute_reach(models["sir"], ReachOptions())
    robust = compute_reach(models["sir"], ReachOptions(robust=True))
    assert [s.under_proj for s in plain.steps] == [s.under_proj for s in robust.steps]
