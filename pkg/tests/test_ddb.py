import math
from fractions import Fraction as F

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from oracles import ddb_closed_forms, ddb_double_product, ddb_primal_sdp
from pointgames.ddb import (
    DDBGame,
    complete_fair,
    ddb_dual_bound_pb,
    ddb_dual_certificate_check,
    ddb_primal_seesaw_pb,
    ddb_recursion,
    ddb_simulate_exact,
    ddb_simulate_honest,
    fair_family_n3,
    fair_family_n5,
    random_fair_game,
)
from pointgames.exactmath import InputError

FIXTURE = DDBGame((F(1, 3), F(3, 4), F(1)))
IRRATIONAL = DDBGame((1 - 1 / math.sqrt(2), 1 / math.sqrt(2), 1.0))

interior = st.fractions(min_value=F(1, 20), max_value=F(19, 20), max_denominator=20)


def test_game_validation():
    with pytest.raises(InputError):
        DDBGame(())
    with pytest.raises(InputError):
        DDBGame((F(1, 2), F(1, 2)))
    with pytest.raises(InputError):
        DDBGame((F(0), F(1)))
    with pytest.raises(InputError):
        DDBGame((F(3, 2), F(1)))
    assert DDBGame.parse("1/3, 3/4, 1") == FIXTURE
    with pytest.raises(InputError):
        DDBGame.parse("1/3,x,1")


@pytest.mark.parametrize(
    "p, pa, pb",
    [
        ((F(1, 2), F(1, 2), F(1)), F(3, 4), F(1, 4)),
        ((F(1, 3), F(1, 2), F(1)), F(2, 3), F(1, 3)),
        ((F(1, 3), F(3, 4), F(1)), F(1, 2), F(1, 2)),
        ((F(1),), F(1), F(0)),
    ],
)
def test_recursion_examples(p, pa, pb):
    rec = ddb_recursion(DDBGame(p))
    assert (rec.pa[-1], rec.pb[-1], rec.pu[-1]) == (pa, pb, 0)
    assert (pa, pb) == ddb_closed_forms(p)


@given(st.lists(interior, min_size=0, max_size=6))
def test_recursion_conserves_and_matches_products(head):
    p = tuple(head) + (F(1),)
    rec = ddb_recursion(DDBGame(p))
    for _, a, b, u in rec.rows():
        assert a + b + u == 1
    assert (rec.pa[-1], rec.pb[-1]) == ddb_closed_forms(p)


def test_simulation_matches_recursion():
    rng = np.random.default_rng(2)
    for _ in range(100):
        n = int(rng.integers(1, 8))
        p = tuple(float(v) for v in rng.uniform(0.05, 0.95, n - 1)) + (1.0,)
        g = DDBGame(p)
        sim = ddb_simulate_honest(g)
        rec = ddb_recursion(g)
        assert sim.outcome == pytest.approx((rec.pa[-1], rec.pb[-1]), abs=1e-10)
        assert max(sim.closed_form_errors) <= 1e-10
        assert sim.max_abort <= 1e-12 and sim.norm_error <= 1e-12


def test_exact_simulation_never_aborts():
    out = ddb_simulate_exact(FIXTURE)
    assert out["aborts"] == [0, 0, 0]
    assert sorted(out["squares"].values()) == [F(1, 2), F(1, 2)]
    with pytest.raises(InputError):
        ddb_simulate_exact(IRRATIONAL)


def test_fair_families():
    assert fair_family_n3(F(1, 3)) == FIXTURE
    for g in (fair_family_n3(F(1, 5)), fair_family_n5(F(1, 5), F(1, 3), F(1, 4))):
        assert g.fair
    with pytest.raises(InputError):
        complete_fair([F(9, 10)], 3)
    with pytest.raises(InputError):
        complete_fair([], 1)


def test_bound_fixture_is_two_thirds():
    assert ddb_dual_bound_pb(FIXTURE) == F(2, 3)


def test_bound_irrational_instance():
    assert abs(ddb_dual_bound_pb(IRRATIONAL) - 1 / math.sqrt(2)) <= 1e-12
    r = sympy.sqrt(2)
    exact = ddb_double_product([1 - 1 / r, 1 / r, sympy.Integer(1)])
    assert sympy.simplify(exact - 1 / r) == 0


def test_bound_refuses_unfair():
    with pytest.raises(InputError):
        ddb_dual_bound_pb(DDBGame((F(1, 2), F(1, 2), F(1))))


def test_certificate_fixture():
    rep = ddb_dual_certificate_check(FIXTURE)
    assert rep.accepted and not rep.failures
    assert rep.u0 == F(2, 3)
    assert rep.u[:2] == [F(2, 3), F(1)]
    assert rep.b[-1] == 1
    with pytest.raises(InputError):
        ddb_dual_certificate_check(IRRATIONAL)


@settings(max_examples=20)
@given(st.fractions(min_value=F(1, 50), max_value=F(49, 100), max_denominator=100))
def test_certificate_on_n3_family(p1):
    g = fair_family_n3(p1)
    rep = ddb_dual_certificate_check(g)
    assert rep.accepted
    assert rep.u0 == ddb_dual_bound_pb(g) == ddb_double_product(g.p)


def test_certificate_random_lengths():
    rng = np.random.default_rng(9)
    for n in (2, 3, 4, 5, 6, 7):
        g = random_fair_game(n, rng)
        rep = ddb_dual_certificate_check(g)
        assert rep.accepted, rep.failures
        assert rep.u0 == ddb_double_product(g.p)


def test_seesaw_trivial_lengths():
    assert ddb_primal_seesaw_pb(DDBGame((F(1),))).value == 0
    with pytest.raises(InputError):
        ddb_primal_seesaw_pb(DDBGame(tuple([F(1, 2)] * 8) + (F(1),)))


@pytest.mark.parametrize("g", [FIXTURE, IRRATIONAL], ids=["rational", "irrational"])
def test_seesaw_meets_bound(g):
    res = ddb_primal_seesaw_pb(g, seed=1)
    bound = float(ddb_dual_bound_pb(g))
    assert res.value <= bound + 1e-6
    assert abs(res.value - bound) <= 1e-3
    assert all(b >= a - 1e-12 for a, b in zip(res.history, res.history[1:]))


def test_seesaw_is_deterministic():
    a = ddb_primal_seesaw_pb(FIXTURE, seed=3, iters=50)
    b = ddb_primal_seesaw_pb(FIXTURE, seed=3, iters=50)
    assert a.value == b.value and a.history == b.history


@pytest.mark.parametrize("g", [FIXTURE, fair_family_n5(F(1, 5), F(1, 3), F(1, 4))], ids=["n3", "n5"])
def test_primal_sdp_agrees(g):
    sdp = ddb_primal_sdp(g.p)
    assert sdp == pytest.approx(float(ddb_dual_bound_pb(g)), abs=1e-6)
    assert ddb_primal_seesaw_pb(g).value == pytest.approx(sdp, abs=1e-6)
