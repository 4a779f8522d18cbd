from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from pointgames.core import PointFn2D, check_transition_2d, point
from pointgames.exactmath import InputError
from pointgames.games import (
    TDPG,
    TIPG,
    RepeatBlock,
    alternate,
    game_from_json,
    game_to_json,
    spekkens_rudolph_tdpg,
    start_frame,
    strictify_tdpg,
    tdpg_to_tipg,
    tipg_to_tdpg,
    trivial_tdpg,
    verify_tdpg,
    verify_tipg,
)
from pointgames.ladders import build_bias_sixth_tipg

half = F(1, 2)


def test_trivial_game():
    rep = verify_tdpg(trivial_tdpg())
    assert rep.accepted and rep.final_point == (half, F(1))
    assert rep.bias == half


def test_spekkens_rudolph_game():
    rep = verify_tdpg(spekkens_rudolph_tdpg())
    assert rep.accepted and rep.final_point == (F(3, 4), F(2, 3))
    # beta = x, alpha = 1/(2x) on the tradeoff curve
    assert rep.final_point[1] == 1 / (2 * rep.final_point[0])
    assert rep.bias == F(1, 4)


def test_lowering_is_located():
    g = spekkens_rudolph_tdpg()
    frames = list(g.frames)
    x = F(3, 4)
    # the raise 1/6[3,0] -> 1/6[3,1] becomes a lowering of [0,1]
    frames[2] = point(x, 0, F(1, 3)) + point(3, 0, F(1, 6)) + point(0, half, half)
    rep = verify_tdpg(TDPG(tuple(frames), half, half))
    assert not rep.accepted
    assert rep.failures and rep.failures[0][0].startswith("frame 1->2")


def test_boundary_frames_checked():
    g = trivial_tdpg()
    bad = TDPG((point(1, 0), *g.frames[1:]), half, half)
    assert not verify_tdpg(bad).accepted
    two = TDPG(g.frames[:-1] + (point(half, 1, half) + point(1, 1, half),), half, half)
    assert not verify_tdpg(two).accepted


def test_sixth_tipg_gamma100():
    rep = verify_tipg(build_bias_sixth_tipg(100))
    assert rep.accepted
    assert rep.final_point == (F(606, 897), F(606, 897)) == (F(202, 299), F(202, 299))


def test_perturbed_rung_rejected():
    t = build_bias_sixth_tipg(20)
    (xy, w) = next(iter(t.h.items()))
    h = t.h + PointFn2D([(xy, F(1, 1000))])
    rep = verify_tipg(TIPG(h, t.v, t.pa, t.pb))
    assert not rep.accepted and rep.failures


def test_tdpg_to_tipg_trivial():
    t = tdpg_to_tipg(trivial_tdpg())
    assert t.v == point(1, 1, half) - point(1, 0, half)
    assert t.h == point(half, 1) - point(1, 1, half) - point(0, 1, half)
    assert verify_tipg(t).final_point == (half, F(1))


def test_identity_padding_does_not_change_tipg():
    g = trivial_tdpg()
    padded = TDPG((g.frames[0], g.frames[0], g.frames[1], g.frames[1], g.frames[2]), half, half)
    assert verify_tdpg(padded).accepted
    a, b = tdpg_to_tipg(g), tdpg_to_tipg(padded)
    assert (a.h, a.v) == (b.h, b.v)


@pytest.mark.parametrize("make", [trivial_tdpg, spekkens_rudolph_tdpg])
def test_round_trip_keeps_final_point(make):
    g = make()
    assert verify_tipg(tdpg_to_tipg(g)).final_point == verify_tdpg(g).final_point


@pytest.mark.parametrize("make", [trivial_tdpg, spekkens_rudolph_tdpg])
@pytest.mark.parametrize("eps", [F(1, 10), F(1, 100)])
def test_conversion_soundness(make, eps):
    t = tdpg_to_tipg(make())
    beta, alpha = verify_tipg(t).final_point
    g = tipg_to_tdpg(t, eps)
    rep = verify_tdpg(g)
    assert rep.accepted
    b2, a2 = rep.final_point
    assert beta <= b2 <= beta + eps and alpha <= a2 <= alpha + eps


def test_conversion_of_smallest_ladder():
    t = build_bias_sixth_tipg(4)
    g = tipg_to_tdpg(t, F(1, 10))
    rep = verify_tdpg(g)
    assert rep.accepted
    assert rep.final_point == (F(10, 11) + F(1, 10), F(10, 11) + F(1, 10))
    assert any(isinstance(f, RepeatBlock) for f in g.frames)


def test_no_catalyst_needed():
    # all honest weight with Bob; h raises it, v is empty
    t = TIPG(point(2, 0) - point(1, 0), PointFn2D(), F(0), F(1))
    g = tipg_to_tdpg(t, F(1, 10))
    rep = verify_tdpg(g)
    assert rep.accepted and rep.final_point == (F(2), F(0))
    assert g.frame_count() == 3


def test_conversion_preconditions():
    with pytest.raises(InputError):
        tipg_to_tdpg(tdpg_to_tipg(trivial_tdpg()), 0)
    # a catalyst is needed but Alice's honest weight is zero
    one_sided = tdpg_to_tipg(trivial_tdpg(F(0), F(1)))
    with pytest.raises(InputError):
        tipg_to_tdpg(one_sided, F(1, 10))


def test_strictify_trivial():
    g = strictify_tdpg(trivial_tdpg(), F(1, 10))
    rep = verify_tdpg(g, strict=True)
    assert rep.accepted
    assert rep.final_point == (half + F(1, 20), 1 + F(1, 20))
    with pytest.raises(InputError):
        strictify_tdpg(trivial_tdpg(), 0)


def test_strictify_again_is_accepted():
    g = strictify_tdpg(spekkens_rudolph_tdpg(), F(1, 100))
    g2 = strictify_tdpg(g, F(1, 100))
    assert verify_tdpg(g2, strict=True).accepted


def test_alternation_starts_vertical():
    # S-R starts with a horizontal split, so an identity frame goes first
    frames = alternate(spekkens_rudolph_tdpg())
    assert frames[0] == frames[1]
    kinds = [check_transition_2d(a, b).kind for a, b in zip(frames, frames[1:])]
    for i, k in enumerate(kinds):
        assert k in ("both", "vertical" if i % 2 == 0 else "horizontal")


@pytest.mark.parametrize("make", [trivial_tdpg, spekkens_rudolph_tdpg])
def test_json_round_trip(make):
    g = make()
    assert game_from_json(game_to_json(g)) == g
    t = tdpg_to_tipg(g)
    assert game_from_json(game_to_json(t)) == t


def test_json_round_trip_with_repeat_block():
    g = tipg_to_tdpg(build_bias_sixth_tipg(4), F(1, 10))
    assert game_from_json(game_to_json(g)) == g


def test_unknown_document_type():
    with pytest.raises(InputError):
        game_from_json({"type": "movie"})


@settings(max_examples=30)
@given(st.fractions(min_value=F(1, 10), max_value=F(9, 10), max_denominator=20))
def test_trivial_family_frames_conserve(pa):
    g = trivial_tdpg(pa, 1 - pa)
    rep = verify_tdpg(g)
    assert rep.accepted
    for f in g.expanded():
        assert f.total() == 1
    assert rep.bias == max(rep.final_point) - half


def test_start_frame():
    assert start_frame(F(1, 3), F(2, 3)) == point(1, 0, F(2, 3)) + point(0, 1, F(1, 3))
