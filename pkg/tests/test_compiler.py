import json
from fractions import Fraction as F

import numpy as np
import pytest
from scipy.stats import ortho_group

from pointgames.compiler import (
    UBP,
    Protocol,
    RealizationError,
    cheating_probability,
    compile_tdpg,
    frame_distance,
    honest_run,
    prob_extract,
    projections_to_unitary,
    realize_transition,
    ubp_from_json,
    ubp_to_json,
    ubp_to_tdpg,
    verify_tdpg_tolerant,
    verify_ubp,
)
from pointgames.core import PointFn1D
from pointgames.exactmath import InputError
from pointgames.games import spekkens_rudolph_tdpg, trivial_tdpg, verify_tdpg

EPS = F(1, 100)


@pytest.fixture(scope="module", params=["trivial", "sr"])
def compiled(request):
    g = trivial_tdpg() if request.param == "trivial" else spekkens_rudolph_tdpg()
    return g, compile_tdpg(g, eps=EPS)


def test_prob_extract_vector_and_density():
    assert prob_extract(np.diag([1.0, 2.0, 2.0]), np.array([0.6, 0.8, 0.0])) == pytest.approx({1.0: 0.36, 2.0: 0.64})
    assert prob_extract(np.diag([1.0, 2.0]), np.eye(2) / 2) == pytest.approx({1.0: 0.5, 2.0: 0.5})


def test_prob_extract_clusters_degenerate_eigenvalues():
    # a rotated degenerate eigenspace is still one point
    Q = ortho_group.rvs(3, random_state=1)
    Z = Q @ np.diag([3.0, 3.0 + 1e-13, 5.0]) @ Q.T
    Z = (Z + Z.T) / 2
    out = prob_extract(Z, Q[:, 0])
    assert len(out) <= 2
    near = [w for z, w in out.items() if abs(z - 3) < 1e-9]
    assert near == [pytest.approx(1.0)]
    with pytest.raises(InputError):
        prob_extract(np.array([[0.0, 1.0], [0.0, 0.0]]), np.ones(2))


S = [0, F(1, 2), 1, F(3, 2), 2]


def test_realize_raise_and_identity():
    p, q = PointFn1D([(1, F(1, 2))]), PointFn1D([(F(3, 2), F(1, 2))])
    r = realize_transition(p, q, S)
    assert r.branch == "raise" and r.ok
    assert realize_transition(p, p, S).branch == "identity"


def test_realize_merge():
    e = F(1, 100)
    p = PointFn1D([(F(1, 2), F(1, 4)), (F(3, 2), F(1, 4))])
    q = PointFn1D([(1 + e, F(1, 2))])
    r = realize_transition(p, q, [F(1, 2), F(3, 2), 1 + e])
    assert r.ok and r.psd_slack >= -1e-8


def test_realize_rung_by_sdp():
    e = F(1, 100)
    p = PointFn1D([(F(2, 3), F(1, 10)), (F(5, 3), F(2, 10))])
    q = PointFn1D([(1 + e, F(2, 10)), (2 + e, F(1, 10))])
    r = realize_transition(p, q, sorted({F(2, 3), F(5, 3), 1 + e, 2 + e}))
    assert r.ok
    assert np.allclose(r.U @ r.U.T, np.eye(len(r.U)), atol=1e-10)


def test_realize_rejects_invalid():
    p, q = PointFn1D([(1, F(1, 2))]), PointFn1D([(F(1, 2), F(1, 2))])
    with pytest.raises(RealizationError):
        realize_transition(p, q, S)
    with pytest.raises(InputError):
        realize_transition(p, PointFn1D([(3, F(1, 2))]), S)


def test_compile_verifies(compiled):
    g, res = compiled
    rep = verify_ubp(res.ubp)
    assert rep.accepted and rep.min_slack >= -1e-8
    beta, alpha = verify_tdpg(g).final_point
    assert res.ubp.bound == pytest.approx((float(beta + EPS / 2), float(alpha + EPS / 2)))


def test_honest_run_is_fair(compiled):
    _, res = compiled
    run = honest_run(res.ubp.protocol)
    assert run.pa == pytest.approx(0.5, abs=1e-10) and run.pb == pytest.approx(0.5, abs=1e-10)
    assert max(run.abort_probabilities) <= 1e-12


def test_frames_recovered(compiled):
    _, res = compiled
    back, _ = ubp_to_tdpg(res.ubp)
    assert len(back.frames) == len(res.frames)
    assert max(frame_distance(a, b) for a, b in zip(back.frames, res.frames)) <= 1e-6
    assert verify_tdpg_tolerant(back)[0]


def test_lowered_bound_fails(compiled):
    _, res = compiled
    u = res.ubp
    bad = UBP(u.protocol, u.z_a, u.z_b, (u.bound[0] - 1e-3, u.bound[1]), u.header)
    assert not verify_ubp(bad).accepted


def test_random_unitary_fails(compiled):
    _, res = compiled
    p = res.ubp.protocol
    units = list(p.unitaries)
    units[0] = ortho_group.rvs(p.step_dim(1), random_state=4)
    q = Protocol(p.dims, p.n, p.psi_a0, p.psi_m0, p.psi_b0, units, p.pi_a1, p.pi_b0, p.projections)
    assert not verify_ubp(UBP(q, res.ubp.z_a, res.ubp.z_b, res.ubp.bound, res.ubp.header)).accepted


def test_json_round_trip(compiled):
    _, res = compiled
    u = ubp_from_json(json.loads(json.dumps(ubp_to_json(res.ubp))))
    assert u.bound == res.ubp.bound and verify_ubp(u).accepted
    with pytest.raises(InputError):
        ubp_from_json({"type": "tdpg"})


def test_projections_to_unitary(compiled):
    _, res = compiled
    eps = 1e-3
    w = projections_to_unitary(res.ubp, eps)
    rep = verify_ubp(w)
    assert rep.accepted
    assert w.protocol.projections is None
    n = res.ubp.protocol.n
    assert w.bound == pytest.approx((res.ubp.bound[0] + n * eps, res.ubp.bound[1] + n * eps))
    assert rep.honest == pytest.approx((0.5, 0.5), abs=1e-10)
    with pytest.raises(InputError):
        projections_to_unitary(res.ubp, 0)


def test_cheating_below_certificate():
    res = compile_tdpg(trivial_tdpg(), eps=EPS)
    beta, alpha = res.ubp.bound
    assert cheating_probability(res.ubp.protocol, "bob") <= beta + 1e-6
    assert cheating_probability(res.ubp.protocol, "alice") <= alpha + 1e-6
    with pytest.raises(InputError):
        cheating_probability(res.ubp.protocol, "eve")


def test_compile_preconditions():
    # not strict without eps
    with pytest.raises(InputError):
        compile_tdpg(trivial_tdpg())
