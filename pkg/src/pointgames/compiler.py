"""Compile point games into explicit protocols with dual certificates.

The game layer is exact.  Everything here is double precision: a TDPG with
strictly valid transitions becomes a protocol on

    A = span{|i, s_a>},  M = span{|s_a, s_b>},  B = span{|s_b, i>}

with one block unitary per message, abort projections after each message,
and dual operators diag(s) + Lambda on the flag-one half.  Each
one-dimensional transition p -> q is realized by an orthogonal matrix U with
U sqrt(q) = sqrt(p) and Z + Lambda P1 >= U^T Z U.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .core import HORIZONTAL, VERTICAL, PointFn1D, PointFn2D, check_transition_1d
from .exactmath import InputError, fraction_str
from .games import TDPG, start_frame, strictify_tdpg, verify_tdpg

SCHEMA_VERSION = 1
CLUSTER_TOL = 1e-7


class RealizationError(RuntimeError):
    """A one-dimensional transition could not be turned into a verified unitary."""


# ---------------------------------------------------------------------------
# linear algebra helpers


def _dense(m) -> np.ndarray:
    return m.toarray() if sp.issparse(m) else np.asarray(m, dtype=float)


def _as_operator(e, dim: int):
    """Projections may be stored as their diagonal."""
    if e is None:
        return None
    if not sp.issparse(e) and np.ndim(e) == 1:
        return sp.diags(np.asarray(e, dtype=float), format="csr")
    return sp.csr_matrix(e) if not sp.issparse(e) else e.tocsr()


def min_eigenvalue(m) -> float:
    """Smallest eigenvalue of a symmetric matrix, block by block over the
    connected components of its sparsity pattern."""
    if not sp.issparse(m):
        m = np.asarray(m, dtype=float)
        return float(np.linalg.eigvalsh((m + m.T) / 2)[0]) if m.size else 0.0
    m = sp.csr_matrix((m + m.T) / 2)
    m.eliminate_zeros()
    n = m.shape[0]
    if n == 0:
        return 0.0
    ncomp, labels = connected_components(m, directed=False)
    order = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order], np.arange(ncomp + 1))
    best = math.inf
    for c in range(ncomp):
        idx = order[bounds[c]:bounds[c + 1]]
        if len(idx) == 1:
            val = m[idx[0], idx[0]]
        else:
            val = np.linalg.eigvalsh(m[idx][:, idx].toarray())[0]
        best = min(best, float(val))
    return best


def _kron_id_left(k: int, m):
    return sp.kron(sp.identity(k, format="csr"), m, format="csr")


def _kron_id_right(m, k: int):
    return sp.kron(m, sp.identity(k, format="csr"), format="csr")


# ---------------------------------------------------------------------------
# Prob


def _clusters(vals: np.ndarray, tol: float) -> List[Tuple[float, np.ndarray]]:
    order = np.argsort(vals)
    groups: List[List[int]] = []
    for i in order:
        if groups and vals[i] - vals[groups[-1][-1]] <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    return [(float(np.mean(vals[g])), np.array(g)) for g in groups]


def prob_extract(Z, state, cluster_tol: float = CLUSTER_TOL) -> Dict[float, float]:
    """Weights of a state (vector or density matrix) on the eigenspaces of Z.

    Eigenvalues within cluster_tol of their neighbour share a support point
    placed at the cluster mean.  Returns {eigenvalue: weight}.
    """
    Z = _dense(Z)
    if Z.shape[0] != Z.shape[1] or not np.allclose(Z, Z.T, atol=1e-10):
        raise InputError("Z must be symmetric")
    vals, vecs = np.linalg.eigh(Z)
    state = np.asarray(state)
    out: Dict[float, float] = {}
    for z, idx in _clusters(vals, cluster_tol):
        v = vecs[:, idx]
        if state.ndim == 1:
            w = float(np.sum(np.abs(v.T @ state) ** 2))
        else:
            w = float(np.real(np.trace(v.T @ state @ v)))
        if w > 0:
            out[z] = out.get(z, 0.0) + w
    return out


def bipartite_prob(ZA, ZB, psi: np.ndarray, dims, cluster_tol: float = CLUSTER_TOL) -> Dict[Tuple[float, float], float]:
    dA, dM, dB = dims
    T = np.asarray(psi).reshape(dA, dM, dB)
    va, Va = np.linalg.eigh(_dense(ZA))
    vb, Vb = np.linalg.eigh(_dense(ZB))
    T = _sandwich(Va.T, T, Vb.T)
    P = np.sum(np.abs(T) ** 2, axis=1)
    out: Dict[Tuple[float, float], float] = {}
    for za, ia in _clusters(va, cluster_tol):
        for zb, ib in _clusters(vb, cluster_tol):
            w = float(P[np.ix_(ia, ib)].sum())
            if w > 1e-14:
                out[(za, zb)] = w
    return out


# ---------------------------------------------------------------------------
# one-dimensional realization


@dataclass
class Realization:
    U: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    psi: np.ndarray
    lam: float
    lam_required: float
    branch: str
    state_residual: float
    psd_slack: float

    @property
    def ok(self) -> bool:
        return self.state_residual <= 1e-9 and self.psd_slack >= -1e-8 * (1 + self.lam)


def _coupling(px, pw, qy, qw, balanced: bool) -> Tuple[np.ndarray, np.ndarray, np.ndarray, str]:
    """A = u v^T + A' with A^T sqrt(q) = sqrt(p), |A| <= 1 and
    A diag(px) A^T < diag(qy); u is the unit direction of sqrt(q) and A' is
    orthogonal to u (and to v when the positive parts carry equal weight).

    A' = 0 covers raises, merges and splits; anything else is handed to a
    small semidefinite program maximizing the margin."""
    m, n = len(qy), len(px)
    sq = np.sqrt(qw)
    u = sq / np.linalg.norm(sq)
    v = np.sqrt(pw) / np.linalg.norm(sq)
    if balanced:
        v = v / np.linalg.norm(v)
    # rank one: the margin is 1 - (sum q/y)(sum p x)/(sum q)^2 along u
    A = np.outer(u, v)
    C = np.diag(qy) - A @ np.diag(px) @ A.T
    if np.linalg.eigvalsh(C)[0] > 1e-14 * (1 + float(np.max(qy))):
        branch = "raise" if m == n == 1 else "merge" if m == 1 else "split" if n == 1 else "rank-one"
        return u, v, np.zeros((m, n)), branch
    return u, v, _coupling_sdp(px, qy, u, v, balanced), "sdp"


def _coupling_sdp(px, qy, u, v, balanced: bool) -> np.ndarray:
    import cvxpy as cp

    m, n = len(qy), len(px)
    Ap = cp.Variable((m, n))
    t = cp.Variable()
    A = np.outer(u, v) + Ap
    G1 = cp.Variable((m + n, m + n), symmetric=True)
    G2 = cp.Variable((m + n, m + n), symmetric=True)
    Dh = np.diag(np.sqrt(px))
    cons = [
        u @ Ap == 0,
        G1 == cp.bmat([[np.eye(m), A], [A.T, np.eye(n)]]),
        G2 == cp.bmat([[np.diag(qy) - t * np.eye(m), A @ Dh], [(A @ Dh).T, np.eye(n)]]),
        G1 >> 0,
        G2 >> 0,
        t <= float(np.min(qy)),
    ]
    if balanced:
        cons.append(Ap @ v == 0)
    prob = cp.Problem(cp.Maximize(t), cons)
    try:
        prob.solve(solver=cp.CLARABEL)
    except Exception:  # pragma: no cover - solver fallback
        prob.solve(solver=cp.SCS, eps=1e-10)
    if Ap.value is None or t.value is None or t.value <= 0:
        raise RealizationError(f"coupling search found no positive margin ({prob.status})")
    Apv = Ap.value - np.outer(u, u @ Ap.value)
    if balanced:
        Apv = Apv - np.outer(Apv @ v, v)
    # pull the free part inside the unit ball
    for _ in range(200):
        if np.linalg.eigvalsh(_gap(v, Apv, balanced))[0] >= -1e-15:
            break
        Apv *= 1 - 1e-6
    return Apv


def _gap(v, Ap, balanced: bool) -> np.ndarray:
    """I - A^T A for A = u v^T + A' with u^T A' = 0."""
    n = len(v)
    return np.eye(n) - np.outer(v, v) - Ap.T @ Ap


def _lambda_required(Zd: np.ndarray, P1: np.ndarray, X: np.ndarray) -> float:
    def slack(lam):
        return np.linalg.eigvalsh(np.diag(Zd + lam * P1) - X)[0]

    hi = max(1.0, float(np.max(Zd)))
    while slack(hi) < -1e-12:
        hi *= 2
        if hi > 1e12:
            return math.inf
    lo = 0.0
    if slack(lo) >= -1e-12:
        return 0.0
    for _ in range(60):
        mid = (lo + hi) / 2
        if slack(mid) >= -1e-12:
            hi = mid
        else:
            lo = mid
    return hi


def realize_transition(p: PointFn1D, q: PointFn1D, S: Sequence, lam: Optional[float] = None, check: bool = True) -> Realization:
    """Orthogonal U on span{|i,s>} with U sqrt(q) = sqrt(p) and
    Z + lam P1 >= U^T Z U, Z = sum_s s |0,s><0,s|.

    Lines with p == q get the identity.  Otherwise the transition must be
    strictly valid.  lam=None picks 4 max(S) doubled until it suffices.
    """
    p, q = PointFn1D(p), PointFn1D(q)
    S = sorted({Fraction(s) for s in S})
    if not set(p.support) <= set(S) or not set(q.support) <= set(S):
        raise InputError("supports must lie in S")
    N = len(S)
    pos = {s: i for i, s in enumerate(S)}
    Sf = np.array([float(s) for s in S])
    Zd = np.concatenate([Sf, np.zeros(N)])
    P1 = np.concatenate([np.zeros(N), np.ones(N)])
    psi_q = np.zeros(2 * N)
    psi_p = np.zeros(2 * N)
    for s, w in q.items():
        psi_q[pos[s]] = math.sqrt(w)
    for s, w in p.items():
        psi_p[pos[s]] = math.sqrt(w)

    if p == q:
        U = np.eye(2 * N)
        X = np.diag(Zd)
        lam_req = 0.0
        branch = "identity"
    else:
        if check:
            verdict = check_transition_1d(p, q, strict=True)
            if not verdict.valid or not verdict.strict:
                raise RealizationError(f"transition is not strictly valid: {verdict.reason}")
        pp = [(s, w) for s, w in p.items() if s > 0]
        qq = [(s, w) for s, w in q.items() if s > 0]
        px = np.array([float(s) for s, _ in pp])
        pw = np.array([float(w) for _, w in pp])
        qy = np.array([float(s) for s, _ in qq])
        qw = np.array([float(w) for _, w in qq])
        W = np.zeros((2 * N, N))
        if pp:
            balanced = sum(w for _, w in pp) == sum(w for _, w in qq)
            u, v, Ap, branch = _coupling(px, pw, qy, qw, balanced)
            A = np.outer(u, v) + Ap
            n = len(pp)
            vals, vecs = np.linalg.eigh(_gap(v, Ap, balanced))
            vals = np.where(vals < 1e-12, 0.0, vals)
            Bm = vecs @ np.diag(np.sqrt(vals)) @ vecs.T
            for c, (s, _) in enumerate(pp):
                col = np.zeros(2 * N)
                for r, (sq_, _) in enumerate(qq):
                    col[pos[sq_]] = A[r, c]
                for r, (sp_, _) in enumerate(pp):
                    col[N + pos[sp_]] = Bm[r, c]
                W[:, pos[s]] = col
        else:
            branch = "raise"
        used = {pos[s] for s, _ in pp}
        pool = [N + pos[s] for s in S if s not in dict(pp)]
        if S[0] == 0:
            rest = psi_q - W[:, sorted(used)] @ (W[:, sorted(used)].T @ psi_q) if used else psi_q.copy()
            nr = np.linalg.norm(rest)
            if p[Fraction(0)] > 0 and nr > 0:
                W[:, 0] = rest / nr
            else:
                W[pool.pop(0), 0] = 1.0
            used.add(0)
        for s in S:
            i = pos[s]
            if i in used:
                continue
            W[pool.pop(0), i] = 1.0
        # completion for the flag-one outputs
        comp = sla.null_space(W.T)
        full = np.hstack([W, comp])
        U = full.T
        X = (W * Sf) @ W.T
        lam_req = _lambda_required(Zd, P1, X)
    if lam is None:
        lam = 4 * max(float(S[-1]), 1e-9)
        for _ in range(10):
            if lam >= lam_req:
                break
            lam *= 2
    Y = np.diag(Zd + lam * P1)
    res = float(np.linalg.norm(U @ psi_q - psi_p))
    slack = float(np.linalg.eigvalsh(Y - U.T @ np.diag(Zd) @ U)[0])
    out = Realization(U, U.T @ np.diag(Zd) @ U, Y, psi_q, float(lam), lam_req, branch, res, slack)
    if check and not out.ok:
        raise RealizationError(
            f"realization failed verification ({branch}): state residual {res:.3e}, psd slack {slack:.3e}, "
            f"lambda {lam:.4g} (needs {lam_req:.4g})"
        )
    return out


# ---------------------------------------------------------------------------
# protocols


@dataclass
class Protocol:
    dims: Tuple[int, int, int]
    n: int
    psi_a0: np.ndarray
    psi_m0: np.ndarray
    psi_b0: np.ndarray
    unitaries: List  # U_1..U_n: odd on A(x)M, even on M(x)B
    pi_a1: np.ndarray
    pi_b0: np.ndarray
    projections: Optional[List] = None

    @property
    def psi0(self) -> np.ndarray:
        return np.kron(np.kron(self.psi_a0, self.psi_m0), self.psi_b0)

    def step_dim(self, i: int) -> int:
        dA, dM, dB = self.dims
        return dA * dM if i % 2 == 1 else dM * dB

    def projection(self, i: int):
        if self.projections is None:
            return None
        return _as_operator(self.projections[i - 1], self.step_dim(i))


@dataclass
class UBP:
    protocol: Protocol
    z_a: List[np.ndarray]
    z_b: List[np.ndarray]
    bound: Tuple[float, float]
    header: dict = field(default_factory=dict)


def _sandwich(L, T, R) -> np.ndarray:
    """(L (x) I (x) R) applied to a state tensor of shape (dA, dM, dB)."""
    dA, dM, dB = T.shape
    out = (L @ T.reshape(dA, dM * dB)).reshape(-1, dM, dB)
    return out @ R.T


@dataclass
class HonestRun:
    states: List[np.ndarray]
    pa: float
    pb: float
    abort_probabilities: List[float]


def _apply(p: Protocol, i: int, psi: np.ndarray) -> np.ndarray:
    dA, dM, dB = p.dims
    U = p.unitaries[i - 1]
    if i % 2 == 1:
        return np.asarray(U @ psi.reshape(dA * dM, dB)).reshape(-1)
    return np.asarray((U @ psi.reshape(dA, dM * dB).T).T).reshape(-1)


def _apply_projection(p: Protocol, i: int, psi: np.ndarray, complement: bool = False) -> np.ndarray:
    dA, dM, dB = p.dims
    E = p.projection(i)
    if E is None:
        return np.zeros_like(psi) if complement else psi
    if i % 2 == 1:
        v = psi.reshape(dA * dM, dB)
        w = np.asarray(E @ v)
    else:
        v = psi.reshape(dA, dM * dB).T
        w = np.asarray(E @ v)
    if complement:
        w = v - w
    return (w if i % 2 == 1 else w.T).reshape(-1)


def honest_run(p: Protocol) -> HonestRun:
    dA, dM, dB = p.dims
    psi = p.psi0
    if abs(np.linalg.norm(psi) - 1) > 1e-10:
        raise InputError("initial state is not normalized")
    states = [psi]
    aborts = []
    for i in range(1, p.n + 1):
        psi = _apply(p, i, psi)
        fail = float(np.linalg.norm(_apply_projection(p, i, psi, complement=True)) ** 2)
        aborts.append(fail)
        psi = _apply_projection(p, i, psi)
        states.append(psi)
    T = psi.reshape(dA, dM, dB)
    pa1 = _dense(p.pi_a1)
    pb0 = _dense(p.pi_b0)
    pa0 = np.eye(dA) - pa1
    pb1 = np.eye(dB) - pb0

    def weight(PA, PB):
        return float(np.sum(np.abs(_sandwich(PA, T, PB)) ** 2))

    PA = weight(pa0, pb0)
    PB = weight(pa1, pb1)
    return HonestRun(states, PA, PB, aborts)


# ---------------------------------------------------------------------------
# compiling a TDPG


def _coords(frames) -> Tuple[List[Fraction], List[Fraction]]:
    xs, ys = set(), set()
    for f in frames:
        for (x, y), _ in f.items():
            xs.add(x)
            ys.add(y)
    return sorted(xs), sorted(ys)


@dataclass
class CompileResult:
    ubp: UBP
    frames: List[PointFn2D]
    S_A: List[Fraction]
    S_B: List[Fraction]
    lam: float
    branches: Dict[str, int]


def compile_tdpg(g: TDPG, eps=None, lam: Optional[float] = None) -> CompileResult:
    """Protocol with projections plus dual certificate for a TDPG whose
    transitions alternate vertical, horizontal, ..., horizontal and are
    strictly valid.  With eps the game is strictified first and the bound
    moves by eps/2 per coordinate."""
    if eps is not None:
        g = strictify_tdpg(g, eps)
    rep = verify_tdpg(g, strict=True)
    if not rep.accepted:
        raise InputError(f"TDPG is not strictly valid: {rep.failures[:2]}")
    for t, kind in enumerate(rep.kinds):
        want = VERTICAL if t % 2 == 0 else HORIZONTAL
        if kind not in (want, "both"):
            raise InputError(f"transition {t} is {kind}; compile expects alternating vertical/horizontal starting vertical")
    frames = g.expanded()
    n = len(frames) - 1
    if n % 2:
        raise InputError("compile needs an even number of transitions ending horizontal")
    SA, SB = _coords(frames)
    nA, nB = len(SA), len(SB)
    ia = {s: i for i, s in enumerate(SA)}
    ib = {s: i for i, s in enumerate(SB)}
    beta, alpha = rep.final_point
    dA, dM, dB = 2 * nA, nA * nB, 2 * nB
    smax = float(max(SA[-1], SB[-1]))

    # realize every line first, then settle on one Lambda
    plans = []
    branches: Dict[str, int] = {}
    for i in range(1, n + 1):
        t = n - i
        p_fr, q_fr = frames[t], frames[t + 1]
        if i % 2 == 1:
            pl, ql = p_fr.lines(HORIZONTAL), q_fr.lines(HORIZONTAL)
            keys, S = SB, SA
        else:
            pl, ql = p_fr.lines(VERTICAL), q_fr.lines(VERTICAL)
            keys, S = SA, SB
        blocks = {}
        for c in keys:
            pline = pl.get(c, PointFn1D())
            qline = ql.get(c, PointFn1D())
            if pline == qline:
                continue
            try:
                r = realize_transition(pline, qline, S, lam=None, check=True)
            except RealizationError as exc:
                raise RealizationError(f"step {i} (frames {t}->{t + 1}) line {fraction_str(c)}: {exc}") from exc
            branches[r.branch] = branches.get(r.branch, 0) + 1
            blocks[c] = r
        plans.append(blocks)
    need = max([r.lam_required for b in plans for r in b.values()] + [0.0])
    if lam is None:
        lam = 4 * smax
        for _ in range(10):
            if lam > need * (1 + 1e-9):
                break
            lam *= 2
        if lam <= need:
            raise RealizationError(f"Lambda {lam} below the required {need}")
    elif lam < need:
        raise RealizationError(f"Lambda {lam} below the required {need}")

    unitaries = []
    projections = []
    for i, blocks in enumerate(plans, start=1):
        rows, cols, vals = [], [], []
        touched = set()
        if i % 2 == 1:
            for c, r in blocks.items():
                b = ib[c]
                idx = [(k * nA + s) * dM + s * nB + b for k in (0, 1) for s in range(nA)]
                _emit_block(r.U, idx, rows, cols, vals)
                touched.update(idx)
            dim = dA * dM
        else:
            for c, r in blocks.items():
                a = ia[c]
                idx = [(a * nB + s) * dB + s * 2 + k for k in (0, 1) for s in range(nB)]
                _emit_block(r.U, idx, rows, cols, vals)
                touched.update(idx)
            dim = dM * dB
        for d in range(dim):
            if d not in touched:
                rows.append(d)
                cols.append(d)
                vals.append(1.0)
        unitaries.append(sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim)))
        projections.append(_projection_diag(i, nA, nB))

    psi_a0 = np.zeros(dA)
    psi_a0[ia[beta]] = 1
    psi_m0 = np.zeros(dM)
    psi_m0[ia[beta] * nB + ib[alpha]] = 1
    psi_b0 = np.zeros(dB)
    psi_b0[ib[alpha] * 2] = 1
    pi_a1 = np.zeros((dA, dA))
    pi_a1[ia[Fraction(1)], ia[Fraction(1)]] = 1
    pi_b0 = np.zeros((dB, dB))
    pi_b0[ib[Fraction(1)] * 2, ib[Fraction(1)] * 2] = 1
    proto = Protocol((dA, dM, dB), n, psi_a0, psi_m0, psi_b0, unitaries, pi_a1, pi_b0, projections)

    za = np.diag(np.concatenate([[float(s) for s in SA], np.full(nA, lam)]))
    zb = np.diag(np.array([v for s in SB for v in (float(s), lam)]))
    z_a = [za.copy() for _ in range(n + 1)]
    z_b = [zb.copy() for _ in range(n + 1)]
    z_a[n] = pi_a1.copy()
    z_a[n - 1] = pi_a1.copy()
    z_b[n] = pi_b0.copy()
    header = {
        "schema": SCHEMA_VERSION,
        "lambda": lam,
        "S_A": [fraction_str(s) for s in SA],
        "S_B": [fraction_str(s) for s in SB],
        "bound_exact": [fraction_str(beta), fraction_str(alpha)],
        "eps": fraction_str(eps) if eps is not None else None,
    }
    ubp = UBP(proto, z_a, z_b, (float(beta), float(alpha)), header)
    return CompileResult(ubp, frames, SA, SB, lam, branches)


def _emit_block(U, idx, rows, cols, vals):
    for r, c in zip(*np.nonzero(np.abs(U) > 1e-15)):
        rows.append(idx[r])
        cols.append(idx[c])
        vals.append(U[r, c])


def _projection_diag(i: int, nA: int, nB: int) -> np.ndarray:
    if i % 2 == 1:
        d = np.zeros(2 * nA * nA * nB)
        for s in range(nA):
            for b in range(nB):
                d[s * nA * nB + s * nB + b] = 1
    else:
        d = np.zeros(nA * nB * 2 * nB)
        for a in range(nA):
            for s in range(nB):
                d[(a * nB + s) * 2 * nB + s * 2] = 1
    return d


# ---------------------------------------------------------------------------
# verification


@dataclass
class UBPReport:
    accepted: bool
    checks: List[Tuple[str, float, bool]]
    honest: Optional[Tuple[float, float]] = None
    chain: List[float] = field(default_factory=list)

    @property
    def failures(self):
        return [c for c in self.checks if not c[2]]

    @property
    def min_slack(self) -> float:
        vals = [v for name, v, _ in self.checks if name.startswith(("A step", "B step"))]
        return min(vals) if vals else 0.0

    def to_json(self) -> dict:
        return {
            "accepted": self.accepted,
            "honest": list(self.honest) if self.honest else None,
            "min_slack": self.min_slack,
            "failures": [{"check": n, "value": v} for n, v, _ in self.failures],
            "checks": [{"check": n, "value": v, "ok": ok} for n, v, ok in self.checks],
        }


def verify_ubp(u: UBP, tol: float = 1e-8) -> UBPReport:
    """Check every constraint of the certificate; inequalities by smallest
    eigenvalue with slack threshold -tol (1 + |Z|)."""
    p = u.protocol
    dA, dM, dB = p.dims
    n = p.n
    beta, alpha = u.bound
    checks: List[Tuple[str, float, bool]] = []

    def add(name, value, ok):
        checks.append((name, float(value), bool(ok)))

    for i, U in enumerate(p.unitaries, start=1):
        d = p.step_dim(i)
        Ud = sp.csr_matrix(U)
        dev = sp.linalg.norm(Ud.T @ Ud - sp.identity(d)) if d else 0.0
        add(f"unitary {i}", dev, dev <= 1e-10)
    for name, Z, d in [("Z_A", u.z_a, dA), ("Z_B", u.z_b, dB)]:
        for i, z in enumerate(Z):
            z = _dense(z)
            add(f"{name},{i} psd", np.linalg.eigvalsh((z + z.T) / 2)[0], np.linalg.eigvalsh((z + z.T) / 2)[0] >= -tol)
    ra = np.linalg.norm(_dense(u.z_a[0]) @ p.psi_a0 - beta * p.psi_a0)
    add("eigenvector A,0", ra, ra <= 1e-9)
    rb = np.linalg.norm(_dense(u.z_b[0]) @ p.psi_b0 - alpha * p.psi_b0)
    add("eigenvector B,0", rb, rb <= 1e-9)
    ta = np.linalg.norm(_dense(u.z_a[n]) - _dense(p.pi_a1))
    add("terminal A", ta, ta <= 1e-12)
    tb = np.linalg.norm(_dense(u.z_b[n]) - _dense(p.pi_b0))
    add("terminal B", tb, tb <= 1e-12)
    IM = sp.identity(dM, format="csr")
    for i in range(1, n + 1):
        U = sp.csr_matrix(p.unitaries[i - 1])
        E = p.projection(i)
        if i % 2 == 1:
            lhs = sp.kron(sp.csr_matrix(_dense(u.z_a[i - 1])), IM, format="csr")
            inner = sp.kron(sp.csr_matrix(_dense(u.z_a[i])), IM, format="csr")
            if E is not None:
                inner = E @ inner @ E
            m = lhs - U.T @ inner @ U
            scale = 1 + np.abs(_dense(u.z_a[i])).max()
            s = min_eigenvalue(m)
            add(f"A step {i}", s, s >= -tol * scale)
            eq = np.linalg.norm(_dense(u.z_b[i - 1]) - _dense(u.z_b[i]))
            add(f"B equal {i}", eq, eq <= 1e-12)
        else:
            lhs = sp.kron(IM, sp.csr_matrix(_dense(u.z_b[i - 1])), format="csr")
            inner = sp.kron(IM, sp.csr_matrix(_dense(u.z_b[i])), format="csr")
            if E is not None:
                inner = E @ inner @ E
            m = lhs - U.T @ inner @ U
            scale = 1 + np.abs(_dense(u.z_b[i])).max()
            s = min_eigenvalue(m)
            add(f"B step {i}", s, s >= -tol * scale)
            eq = np.linalg.norm(_dense(u.z_a[i - 1]) - _dense(u.z_a[i]))
            add(f"A equal {i}", eq, eq <= 1e-12)
    run = honest_run(p)
    for i, a in enumerate(run.abort_probabilities, start=1):
        add(f"honest projection {i}", a, a <= 1e-9)
    T = run.states[-1].reshape(dA, dM, dB)
    pa1 = _dense(p.pi_a1)
    pb0 = _dense(p.pi_b0)
    bad1 = np.linalg.norm(_sandwich(pa1, T, pb0))
    bad2 = np.linalg.norm(_sandwich(np.eye(dA) - pa1, T, np.eye(dB) - pb0))
    add("outcome agreement", max(bad1, bad2), max(bad1, bad2) <= 1e-9)
    chain = []
    for i, psi in enumerate(run.states):
        T = psi.reshape(dA, dM, dB)
        val = float(np.sum(T * _sandwich(_dense(u.z_a[i]), T, _dense(u.z_b[i]))))
        chain.append(val)
    mono = max([b - a for a, b in zip(chain, chain[1:])] + [0.0])
    add("certificate chain", mono, mono <= 1e-8)
    ok = all(c[2] for c in checks)
    return UBPReport(ok, checks, (run.pa, run.pb), chain)


# ---------------------------------------------------------------------------
# back to a point game


def _rational(v: float, bound: int = 10**6) -> Fraction:
    return Fraction(v).limit_denominator(bound)


def ubp_to_tdpg(u: UBP, cluster_tol: float = CLUSTER_TOL, denominator: int = 10**6) -> Tuple[TDPG, List[Dict]]:
    """Frames Prob(Z_A,n-i, Z_B,n-i, psi_n-i) in reverse time.

    Returns the rationalized TDPG and the raw floating-point frames."""
    p = u.protocol
    run = honest_run(p)
    raw = []
    for i in range(p.n, -1, -1):
        raw.append(bipartite_prob(u.z_a[i], u.z_b[i], run.states[i], p.dims, cluster_tol))
    frames = []
    for fr in raw:
        pts: Dict[Tuple[Fraction, Fraction], Fraction] = {}
        for (x, y), w in fr.items():
            key = (_rational(x, denominator), _rational(y, denominator))
            wr = _rational(w, denominator)
            if wr > 0:
                pts[key] = pts.get(key, Fraction(0)) + wr
        frames.append(PointFn2D(pts))
    pa = _rational(run.pa, denominator)
    return TDPG(tuple(frames), pa, 1 - pa), raw


def _tolerant_line_ok(d: PointFn1D, slack: float) -> bool:
    if abs(float(d.total())) > slack:
        return False
    zs = np.array([float(z) for z in d.support])
    ws = np.array([float(w) for _, w in d.items()])
    if not len(zs):
        return True
    lams = np.concatenate([np.logspace(-6, 6, 600), zs[zs > 0]])
    vals = (ws[None, :] * (lams[:, None] * zs[None, :] / (lams[:, None] + zs[None, :]))).sum(axis=1)
    return bool(np.min(vals) >= -slack * (1 + np.max(zs)) and float(d.first_moment()) >= -slack * (1 + np.max(zs)))


def verify_tdpg_tolerant(g: TDPG, slack: float = 1e-6) -> Tuple[bool, List[str]]:
    """Each transition exactly valid, or valid up to slack on a dense grid of
    operator monotone test functions."""
    frames = g.expanded()
    problems = []
    for t, (a, b) in enumerate(zip(frames, frames[1:])):
        d = b - a
        good = False
        for direction in (HORIZONTAL, VERTICAL):
            lines = d.lines(direction)
            if all(_tolerant_line_ok(line, slack) for line in lines.values()):
                good = True
                break
        if not good:
            problems.append(f"transition {t}")
    start = start_frame(g.pa, g.pb)
    if any(abs(float(frames[0][k] - w)) > slack for k, w in start.items()):
        problems.append("frame 0")
    last = frames[-1]
    if len(last) != 1 or abs(float(last.total()) - 1) > slack:
        problems.append("final frame")
    return not problems, problems


def frame_distance(a: PointFn2D, b: PointFn2D) -> float:
    keys = set(a.support) | set(b.support)
    return max([abs(float(a[k] - b[k])) for k in keys] + [0.0])


# ---------------------------------------------------------------------------
# from projections to plain unitaries


def _bits_above(c: int, labels: Sequence[int], i: int) -> bool:
    return any((c >> j) & 1 and labels[j] > i for j in range(len(labels)))


def _measure_unitary(E, k: int, j: int, inner: int):
    """Controlled [[E, I-E],[I-E, E]] on ancilla bit j (control: all other
    ancilla bits zero); ancillas are the left factor of size 2^k."""
    E = sp.csr_matrix(E)
    I = sp.identity(inner, format="csr")
    F = I - E
    blocks = []
    rows = []
    n = 1 << k
    mats = {}
    for c in range(n):
        if c & ~(1 << j) == 0:
            for c2 in (0, 1 << j):
                mats[(c, c2)] = E if c == c2 else F
        else:
            mats[(c, c)] = I
    return sp.bmat([[mats.get((r, c)) for c in range(n)] for r in range(n)], format="csr")


def projections_to_unitary(u: UBP, eps: float, lam0: Optional[float] = None, max_doublings: int = 40, tol: float = 1e-8) -> UBP:
    """Replace each abort projection by a controlled flip into a fresh
    ancilla qubit of the measuring party; the bound moves to
    (beta + n eps, alpha + n eps)."""
    p = u.protocol
    if p.projections is None:
        return u
    if eps <= 0:
        raise InputError("eps must be positive")
    n = p.n
    dA, dM, dB = p.dims
    a_steps = [i for i in range(1, n + 1) if i % 2 == 1]
    b_steps = [i for i in range(1, n + 1) if i % 2 == 0]
    kA, kB = len(a_steps), len(b_steps)
    NA, NB = 1 << kA, 1 << kB
    dA2, dB2 = NA * dA, NB * dB
    e0A = np.zeros(NA)
    e0A[0] = 1
    e0B = np.zeros(NB)
    e0B[0] = 1
    P0A = sp.csr_matrix(np.outer(e0A, e0A))
    P0B = sp.csr_matrix(np.outer(e0B, e0B))

    units = []
    for i in range(1, n + 1):
        U = sp.csr_matrix(p.unitaries[i - 1])
        E = p.projection(i)
        if i % 2 == 1:
            j = a_steps.index(i)
            Mi = _measure_unitary(E, kA, j, dA * dM)
            units.append(Mi @ _kron_id_left(NA, U))
        else:
            j = b_steps.index(i)
            # ancillas sit right of B, so reorder: build on (anc)x(M B) then permute
            Mi = _measure_unitary(E, kB, j, dM * dB)
            perm = _swap_perm(NB, dM * dB)
            Mi = perm @ Mi @ perm.T
            units.append(Mi @ _kron_id_right(U, NB))

    def FA(i):
        return sp.diags([1.0 if _bits_above(c, a_steps, i) else 0.0 for c in range(NA)], format="csr")

    def FB(i):
        return sp.diags([1.0 if _bits_above(c, b_steps, i) else 0.0 for c in range(NB)], format="csr")

    def za_new(i, lam):
        base = sp.kron(P0A, sp.csr_matrix(_dense(u.z_a[i]) + (n - i) * eps * np.eye(dA)), format="csr")
        return base + lam * sp.kron(FA(i), sp.identity(dA), format="csr")

    def zb_new(i, lam, shift):
        base = sp.kron(sp.csr_matrix(_dense(u.z_b[i]) + shift * eps * np.eye(dB)), P0B, format="csr")
        return base + lam * sp.kron(sp.identity(dB), FB(i), format="csr")

    start = lam0 if lam0 is not None else 4 * max(np.abs(_dense(z)).max() for z in u.z_a + u.z_b)
    IM = sp.identity(dM, format="csr")

    # Alice: Z'_{i} defined at even i, copied to i-1; Lambda_n = 0
    z_a_new: List = [None] * (n + 1)
    z_a_new[n] = za_new(n, 0.0)
    lam_next = 0.0
    for k in reversed(a_steps):
        hi = z_a_new[k + 1] if k + 1 <= n else z_a_new[n]
        z_a_new[k] = hi
        inner = sp.kron(hi, IM, format="csr")
        rhs = units[k - 1].T @ inner @ units[k - 1]
        lam = max(lam_next, start)
        for _ in range(max_doublings):
            cand = za_new(k - 1, lam)
            if min_eigenvalue(sp.kron(cand, IM, format="csr") - rhs) >= -tol * 1e-3:
                break
            lam *= 2
        else:
            raise RealizationError(f"no Lambda found for Alice step {k}")
        z_a_new[k - 1] = za_new(k - 1, lam)
        lam_next = lam
    # Bob: Z'_{i} defined at odd i (copied to i-1) with shift n - i + 1; Z'_n exact
    z_b_new: List = [None] * (n + 1)
    z_b_new[n] = zb_new(n, 0.0, 0)
    lam_next = 0.0
    for k in reversed(b_steps):
        hi = z_b_new[k + 1] if k + 1 <= n else z_b_new[n]
        if k < n:
            z_b_new[k] = hi
        inner = sp.kron(IM, hi, format="csr")
        rhs = units[k - 1].T @ inner @ units[k - 1]
        lam = max(lam_next, start)
        for _ in range(max_doublings):
            cand = zb_new(k - 1, lam, n - (k - 1) + 1)
            if min_eigenvalue(sp.kron(IM, cand, format="csr") - rhs) >= -tol * 1e-3:
                break
            lam *= 2
        else:
            raise RealizationError(f"no Lambda found for Bob step {k}")
        z_b_new[k - 1] = cand
        if k - 2 >= 0:
            z_b_new[k - 2] = cand
        lam_next = lam
    if z_b_new[n - 1] is None:
        z_b_new[n - 1] = z_b_new[n]

    psi_a0 = np.kron(e0A, p.psi_a0)
    psi_b0 = np.kron(p.psi_b0, e0B)
    pi_a1 = sp.kron(P0A, sp.csr_matrix(_dense(p.pi_a1))).toarray()
    pi_b0 = sp.kron(sp.csr_matrix(_dense(p.pi_b0)), P0B).toarray()
    proto = Protocol((dA2, dM, dB2), n, psi_a0, p.psi_m0, psi_b0, units, pi_a1, pi_b0, None)
    beta, alpha = u.bound
    header = dict(u.header)
    header.update({"eps_projection": eps, "ancillas": [kA, kB]})
    return UBP(proto, [_dense(z) for z in z_a_new], [_dense(z) for z in z_b_new], (beta + n * eps, alpha + n * eps), header)


def _swap_perm(a: int, b: int):
    """Permutation matrix P with P (x (x) y) = y (x) x for x in C^a, y in C^b."""
    idx = np.arange(a * b)
    x, y = idx // b, idx % b
    target = y * a + x
    return sp.csr_matrix((np.ones(a * b), (target, idx)), shape=(a * b, a * b))


# ---------------------------------------------------------------------------
# optimal cheating by the primal program (small protocols only)


def cheating_probability(p: Protocol, party: str = "bob") -> float:
    """Optimal cheating probability against an honest opponent, from the
    primal semidefinite program over the honest party's reduced states."""
    import cvxpy as cp

    dA, dM, dB = p.dims
    n = p.n
    if party == "bob":
        own_steps = lambda i: i % 2 == 1  # noqa: E731
        d, psi0, target, left = dA, p.psi_a0, _dense(p.pi_a1), True
    elif party == "alice":
        own_steps = lambda i: i % 2 == 0  # noqa: E731
        d, psi0, target, left = dB, p.psi_b0, _dense(p.pi_b0), False
    else:
        raise InputError("party must be 'alice' or 'bob'")
    if d * dM > 400:
        raise InputError("protocol too large for the primal program")
    rho = np.outer(psi0, psi0)
    cons = []
    cur = rho
    for i in range(1, n + 1):
        if not own_steps(i):
            continue
        R = cp.Variable((d * dM, d * dM), symmetric=True)
        cons.append(R >> 0)
        dims = [d, dM] if left else [dM, d]
        red = cp.partial_trace(R, dims, axis=1 if left else 0)
        cons.append(red == cur)
        U = _dense(p.unitaries[i - 1])
        E = p.projection(i)
        K = U if E is None else _dense(E) @ U
        out = K @ R @ K.T
        cur = cp.partial_trace(out, dims, axis=1 if left else 0)
    prob = cp.Problem(cp.Maximize(cp.trace(target @ cur)), cons)
    prob.solve(solver=cp.CLARABEL)
    return float(prob.value)


# ---------------------------------------------------------------------------
# JSON


def _matrix_json(m) -> dict:
    if sp.issparse(m):
        c = m.tocoo()
        return {"shape": list(c.shape), "sparse": {"rows": c.row.tolist(), "cols": c.col.tolist(), "vals": c.data.tolist()}}
    m = np.asarray(m, dtype=float)
    if m.ndim == 1:
        return {"shape": [m.shape[0]], "data": m.tolist()}
    return {"shape": list(m.shape), "data": m.reshape(-1).tolist()}


def _matrix_from_json(doc: dict):
    shape = tuple(doc["shape"])
    if "sparse" in doc:
        s = doc["sparse"]
        return sp.csr_matrix((s["vals"], (s["rows"], s["cols"])), shape=shape)
    return np.array(doc["data"], dtype=float).reshape(shape)


def ubp_to_json(u: UBP) -> dict:
    p = u.protocol
    return {
        "schema": SCHEMA_VERSION,
        "type": "ubp",
        "header": u.header,
        "bound": list(u.bound),
        "protocol": {
            "dims": list(p.dims),
            "n": p.n,
            "psi_a0": p.psi_a0.tolist(),
            "psi_m0": p.psi_m0.tolist(),
            "psi_b0": p.psi_b0.tolist(),
            "unitaries": [_matrix_json(U) for U in p.unitaries],
            "projections": None if p.projections is None else [_matrix_json(E) for E in p.projections],
            "pi_a1": _matrix_json(sp.csr_matrix(_dense(p.pi_a1))),
            "pi_b0": _matrix_json(sp.csr_matrix(_dense(p.pi_b0))),
        },
        "z_a": [_matrix_json(sp.csr_matrix(_dense(z))) for z in u.z_a],
        "z_b": [_matrix_json(sp.csr_matrix(_dense(z))) for z in u.z_b],
    }


def ubp_from_json(doc: dict) -> UBP:
    if doc.get("type") != "ubp":
        raise InputError("not a UBP document")
    if doc.get("schema") != SCHEMA_VERSION:
        raise InputError(f"unsupported schema {doc.get('schema')}")
    pd = doc["protocol"]
    proto = Protocol(
        tuple(pd["dims"]),
        int(pd["n"]),
        np.array(pd["psi_a0"], dtype=float),
        np.array(pd["psi_m0"], dtype=float),
        np.array(pd["psi_b0"], dtype=float),
        [sp.csr_matrix(_matrix_from_json(m)) for m in pd["unitaries"]],
        _dense(_matrix_from_json(pd["pi_a1"])),
        _dense(_matrix_from_json(pd["pi_b0"])),
        None if pd["projections"] is None else [_matrix_from_json(m) for m in pd["projections"]],
    )
    return UBP(
        proto,
        [_dense(_matrix_from_json(m)) for m in doc["z_a"]],
        [_dense(_matrix_from_json(m)) for m in doc["z_b"]],
        tuple(doc["bound"]),
        doc.get("header", {}),
    )
