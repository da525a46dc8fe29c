import json

import numpy as np
import pytest

from aereach.expr import parse_model
from aereach.interval import Box, Interval
from aereach.reach import (ReachOptions, ReachResult, compute_reach, count_violations, reach_iterate,
                           reach_unroll, simulate_samples)

HALVING = parse_model("states z\ninit z = [1, 2]\nhorizon 4\ndynamics\n  z' = 0.5*z\n")

DISTURBED = parse_model("""
system disturbed
states x, y
disturbance w in [-0.002, 0.002]
init x = [0.9, 1.0], y = [0.4, 0.5]
horizon 15
dynamics
  x' = x + 0.1*y - 0.05*x*y + w
  y' = 0.95*y + 0.02*x^2 + w*y
""")

FAST = ["testmodel", "sir", "sir_point"]
ALL = FAST + ["honeybees"]
METHODS = ["iterate", "unroll"]


def test_options_validation():
    with pytest.raises(ValueError):
        ReachOptions(method="sideways")
    with pytest.raises(ValueError):
        ReachOptions(quadrature_k=0)
    with pytest.raises(ValueError):
        ReachOptions(order="taylor2", quadrature_k=4)
    with pytest.raises(ValueError):
        ReachOptions(max_symbols=0)
    assert ReachOptions(method="unroll").symbol_cap > ReachOptions().symbol_cap
    assert ReachOptions(max_symbols=7).symbol_cap == 7


def test_wrong_method_is_rejected(models):
    with pytest.raises(ValueError):
        reach_iterate(models["sir"], ReachOptions(method="unroll"))
    with pytest.raises(ValueError):
        reach_unroll(models["sir"], ReachOptions(method="iterate"))


@pytest.mark.parametrize("method", METHODS)
def test_zero_steps_returns_initial_box(models, method):
    m = models["sir"]
    r = compute_reach(m, ReachOptions(method=method, steps=0))
    assert len(r.steps) == 1
    s = r.steps[0]
    assert s.over_proj == list(m.init) and s.under_proj == list(m.init_inner)


@pytest.mark.parametrize("method", METHODS)
@pytest.mark.parametrize("precondition", ["none", "jacobian-center"])
def test_linear_contraction_is_exact(method, precondition):
    r = compute_reach(HALVING, ReachOptions(method=method, precondition=precondition))
    assert len(r.steps) == 5
    for k, s in enumerate(r.steps):
        expect = Interval(0.5**k, 2 * 0.5**k)
        assert s.under_proj[0] == expect and s.over_proj[0] == expect


@pytest.mark.parametrize("name", ALL)
@pytest.mark.parametrize("method", METHODS)
def test_step_zero_is_initial_box(models, reach_of, name, method):
    m = models[name]
    s = reach_of(name, method=method).steps[0]
    assert s.over_proj == list(m.init) and s.under_proj == list(m.init_inner)


@pytest.mark.parametrize("name", ALL)
@pytest.mark.parametrize("method", METHODS)
def test_projected_under_inside_projected_over(reach_of, name, method):
    for s in reach_of(name, method=method).steps:
        if s.under is not None:
            assert all(o.contains(u) for u, o in zip(s.under_proj, s.over_proj) if not u.is_empty())
            assert s.over.contains_generator_of(s.under) or not all(c.is_finite() for c in s.over.z)


@pytest.mark.parametrize("name", ALL)
@pytest.mark.parametrize("method", METHODS)
def test_samples_stay_inside_over(models, reach_of, name, method):
    r = reach_of(name, method=method)
    assert count_violations(r, models[name], 10_000, 42) == []


@pytest.mark.parametrize("name", ALL)
def test_cross_algorithm_sandwich(reach_of, name):
    it = reach_of(name, method="iterate")
    un = reach_of(name, method="unroll")
    for a, b in zip(it.steps, un.steps):
        if a.under is not None:
            assert b.over.contains_generator_of(a.under), (name, a.step)
        if b.under is not None:
            assert a.over.contains_generator_of(b.under), (name, b.step)
        for ua, ub, oa, ob in zip(a.under_proj, b.under_proj, a.over_proj, b.over_proj):
            assert ua.is_empty() or ob.contains(ua)
            assert ub.is_empty() or oa.contains(ub)


@pytest.mark.parametrize("method", METHODS)
def test_robust_mode_shrinks_under(method):
    plain = compute_reach(DISTURBED, ReachOptions(method=method))
    robust = compute_reach(DISTURBED, ReachOptions(method=method, robust=True))
    nonempty = 0
    for p, r in zip(plain.steps, robust.steps):
        if r.under is None:
            continue
        nonempty += 1
        assert p.under is not None and p.under.contains_generator_of(r.under), p.step
        for pu, ru in zip(p.under_proj, r.under_proj):
            assert ru.is_empty() or pu.contains(ru)
    assert nonempty > 1
    assert count_violations(robust, DISTURBED, 5000, 1) == []


def test_point_initial_state_defeats_iterate_but_not_unroll(reach_of):
    it = reach_of("sir_point", method="iterate")
    un = reach_of("sir_point", method="unroll")
    assert it.empty_under_onset is not None and 1 <= it.empty_under_onset <= 5
    assert any("empty" in w for w in it.warnings)
    for s in un.steps[1:]:
        assert all(not c.is_empty() for c in s.under_proj), s.step


def test_sampling_is_deterministic(models):
    a = simulate_samples(models["sir"], 200, seed=9)
    b = simulate_samples(models["sir"], 200, seed=9)
    c = simulate_samples(models["sir"], 200, seed=10)
    assert len(a) == 61 and all(np.array_equal(x, y) for x, y in zip(a, b))
    assert not np.array_equal(a[5], c[5])


def test_point_initial_set_gives_one_trajectory():
    pts = simulate_samples(HALVING.__class__(name="p", states=("z",), dynamics=HALVING.dynamics,
                                             init=Box([3.0]), horizon=3), 50, seed=0)
    for k, cloud in enumerate(pts):
        assert np.all(cloud == 3.0 * 0.5**k)


def test_sampling_rejects_empty_count(models):
    with pytest.raises(ValueError):
        simulate_samples(models["sir"], 0, seed=0)


def test_result_json_round_trip(reach_of):
    r = reach_of("sir", method="iterate")
    again = ReachResult.from_json(json.loads(json.dumps(r.to_json())))
    assert again.options == r.options and again.warnings == r.warnings
    for a, b in zip(r.steps, again.steps):
        assert a.under_proj == b.under_proj and a.over_proj == b.over_proj
        assert a.under == b.under and a.over == b.over
