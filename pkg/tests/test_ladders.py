from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from pointgames.core import HORIZONTAL, VERTICAL, PointFn1D, check_valid_fn_1d, check_valid_fn_2d
from pointgames.exactmath import InputError
from pointgames.games import verify_tipg
from pointgames.ladders import (
    FamilyParams,
    SearchExhausted,
    build_bias_sixth_tipg,
    build_family_tipg,
    check_family_feasibility,
    continuum_cutoff,
    family_ratio,
    interpolate,
    rung_from_polynomial,
    search_family,
    search_family_params,
    sixth_delta,
)

third = F(1, 3)


def test_constant_rung():
    r = rung_from_polynomial([F(2, 3), 1, F(5, 3), 2], [F(4, 9)] * 4)
    assert r == PointFn1D([(F(2, 3), -1), (1, 2), (F(5, 3), -2), (2, 1)])


def test_zero_polynomial_gives_zero_rung():
    assert not rung_from_polynomial([0, 1], [0, 0])


def test_linear_rung():
    r = rung_from_polynomial([1, 2, 3], [2, 1, 0])
    assert r == PointFn1D([(1, -1), (2, 1)])
    assert check_valid_fn_1d(r).valid


@pytest.mark.parametrize(
    "xs, vals",
    [
        ([1], [1]),
        ([1, 1, 2], [1, 1, 1]),
        ([-1, 1, 2], [1, 1, 1]),
        ([0, 1, 2], [0, 1, 0]),  # degree 2 on three points
        ([0, 1, 2], [-1, -1, -1]),
    ],
)
def test_rung_errors(xs, vals):
    with pytest.raises(InputError):
        rung_from_polynomial(xs, vals)


@settings(max_examples=60)
@given(
    st.lists(st.fractions(min_value=0, max_value=4, max_denominator=6), min_size=3, max_size=6, unique=True),
    st.lists(st.fractions(min_value=0, max_value=3, max_denominator=5), min_size=1, max_size=4),
)
def test_rungs_from_nonneg_polynomials_are_valid(xs, roots):
    # squares keep f(-lam) >= 0
    deg = len(xs) - 2
    rs = roots[: deg // 2]

    def f(x):
        out = F(1)
        for r in rs:
            out *= (x - r) ** 2
        return out

    rung = rung_from_polynomial(xs, [f(x) for x in xs])
    assert rung.total() == 0
    assert check_valid_fn_1d(rung).valid


def test_interpolate_recovers_polynomial():
    p = interpolate([0, 1, 2, 3], [1, 2, 5, 10])
    assert p.coeffs == (1, 0, 1)


def test_sixth_smallest_gamma():
    t = build_bias_sixth_tipg(4)
    rep = verify_tipg(t)
    assert rep.accepted and rep.final_point == (F(10, 11), F(10, 11))
    assert t.v == t.h.transpose()


def test_sixth_gamma_bounds():
    for bad in (3, 0, 4.0):
        with pytest.raises(InputError):
            build_bias_sixth_tipg(bad)


def test_sixth_delta():
    assert sixth_delta(100) == F(8, 299)
    assert (2 + sixth_delta(100)) / 3 == F(202, 299)
    # the final point approaches 2/3 from above
    assert all(sixth_delta(g) > sixth_delta(g + 1) > 0 for g in range(4, 60))


@pytest.mark.parametrize("gamma", [5, 9, 30])
def test_sixth_final_point(gamma):
    rep = verify_tipg(build_bias_sixth_tipg(gamma))
    z = (2 + sixth_delta(gamma)) / 3
    assert rep.accepted and rep.final_point == (z, z)


@pytest.fixture(scope="module")
def family_k1():
    params = FamilyParams(1, F(7, 200), 512, F(7, 10))
    return params, build_family_tipg(params)


def test_family_k1_accepted(family_k1):
    params, fam = family_k1
    assert check_family_feasibility(params)
    rep = verify_tipg(fam.tipg())
    assert rep.accepted and rep.final_point == (F(7, 10), F(7, 10))


def test_family_is_symmetric(family_k1):
    _, fam = family_k1
    assert fam.v == fam.h.transpose()


def test_family_lines_conserve(family_k1):
    _, fam = family_k1
    for _, line in fam.h.lines(HORIZONTAL).items():
        assert line.total() == 0
    assert check_valid_fn_2d(fam.h, HORIZONTAL).valid
    assert check_valid_fn_2d(fam.v, VERTICAL).valid


def test_literal_rung_formula_ratio(family_k1):
    _, fam = family_k1
    assert fam.literal_ratio == {-1: F(-1), 1: F(1)}


def test_literal_ratio_k2():
    fam = build_family_tipg(FamilyParams(2, F(13, 400), 64, F(13, 20)))
    assert fam.literal_ratio == {i: F(1, i) for i in (-2, -1, 1, 2)}


def test_family_below_cutoff_is_infeasible():
    zs = F(3, 5)
    for J in (10, 20, 40):
        for gamma in (J, 2 * J, 8 * J):
            assert not check_family_feasibility(FamilyParams(1, zs / J, gamma, zs))


def test_infeasible_family_is_rejected():
    params = FamilyParams(1, F(7, 50), 5, F(7, 10))
    assert family_ratio(params) > 1
    assert not verify_tipg(build_family_tipg(params).tipg()).accepted


def test_family_param_errors():
    with pytest.raises(InputError):
        FamilyParams(1, F(1, 2), 10, F(7, 10))  # k eps >= 1/2
    with pytest.raises(InputError):
        FamilyParams(1, F(7, 100), 4, F(7, 10))  # gamma <= 4k
    with pytest.raises(InputError):
        FamilyParams(1, F(7, 100), 9, F(7, 10))  # gamma < zstar / eps
    with pytest.raises(InputError):
        FamilyParams(0, F(7, 100), 20, F(7, 10))
    with pytest.raises(InputError):
        FamilyParams(1, F(1, 15), 40, F(7, 10))  # zstar / eps not integral


def test_smallest_gamma_evaluates():
    params = FamilyParams(2, F(1, 15), 9, F(3, 5))
    fam = build_family_tipg(params)
    assert fam.h.total() == 0
    family_ratio(params)


def test_search_finds_feasible_k1_and_k2():
    for k, gap in ((1, F(1, 30)), (2, F(1, 20))):
        params = search_family_params(k, gap)
        assert params.zstar == continuum_cutoff(k) + gap
        assert check_family_feasibility(params)


def test_search_k2_verifies():
    params = search_family_params(2, F(1, 20))
    rep = verify_tipg(build_family_tipg(params).tipg())
    assert rep.accepted and rep.final_point == (F(13, 20), F(13, 20))


def test_search_errors():
    with pytest.raises(InputError):
        search_family(1, 0)
    with pytest.raises(InputError):
        search_family(1, F(1, 2))
    with pytest.raises(SearchExhausted) as e:
        search_family_params(1, F(1, 1000), max_j=20, max_gamma=64)
    assert e.value.result.trace and not e.value.result.found


def test_search_budget_is_monotone():
    small = search_family(1, F(1, 30), max_gamma=256)
    big = search_family(1, F(1, 30), max_gamma=1024)
    assert not small.found and big.found
    assert all(r > 1 for _, _, r in small.trace)


def test_continuum_cutoff():
    assert continuum_cutoff(1) == F(2, 3)
    assert continuum_cutoff(2) == F(3, 5)
    for k in range(1, 30):
        assert F(1, 2) < continuum_cutoff(k) <= F(1, 2) + F(1, 2 * (2 * k + 1)) < F(1, 2) + F(1, 2 * k)
    with pytest.raises(InputError):
        continuum_cutoff(0)
