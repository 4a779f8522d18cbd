"""Dip-Dip-Boom: a coherent version of the classical stopping game.

Players alternately announce Dip or Boom.  Message ``i`` is Boom with
probability ``p[i]`` and the speaker wins on Boom.  Alice owns the odd
messages.  The quantum protocol keeps one qutrit per player (states A, B, U)
and a message qubit; the receiver undoes the sender's rotation and aborts if
the message is still Boom.

The module offers exact honest statistics, a state-vector simulator (float
and an exact signed-square-root path), the closed-form dual value bounding a
cheating Bob and an exact check of the diagonal dual certificate behind it.
It also has a see-saw search for good Bob strategies, which gives lower
bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .exactmath import InputError, as_fraction, fraction_str

Real = Union[Fraction, float]

FLOAT_TOL = 1e-12

# qutrit labels
QA, QB, QU = 0, 1, 2
DIP, BOOM = 0, 1


def _parse_prob(value) -> Real:
    if isinstance(value, float):
        return value
    return as_fraction(value)


@dataclass(frozen=True)
class DDBGame:
    """Boom probabilities ``p[0..n-1]`` for messages 1..n."""

    p: Tuple[Real, ...]

    def __post_init__(self):
        p = tuple(_parse_prob(v) for v in self.p)
        object.__setattr__(self, "p", p)
        if not p:
            raise InputError("need at least one message")
        for i, v in enumerate(p, start=1):
            if not 0 <= v <= 1:
                raise InputError(f"p_{i} = {v} outside [0, 1]")
            if i < len(p) and v in (0, 1):
                raise InputError(f"p_{i} must be strictly between 0 and 1")
        if p[-1] != 1:
            raise InputError("the last message must be Boom with probability 1")

    @classmethod
    def parse(cls, text: str) -> "DDBGame":
        parts = [s for s in text.replace(" ", "").split(",") if s]
        vals = []
        for s in parts:
            try:
                vals.append(as_fraction(s))
            except InputError:
                try:
                    vals.append(float(s))
                except ValueError as exc:
                    raise InputError(f"bad probability {s!r}") from exc
        return cls(tuple(vals))

    @property
    def n(self) -> int:
        return len(self.p)

    @property
    def exact(self) -> bool:
        return all(isinstance(v, Fraction) for v in self.p)

    def prob(self, i: int) -> Real:
        """1-based access."""
        return self.p[i - 1]

    @property
    def fair(self) -> bool:
        rec = ddb_recursion(self)
        if self.exact:
            return rec.pa[-1] == rec.pb[-1] == Fraction(1, 2)
        return abs(rec.pa[-1] - 0.5) <= FLOAT_TOL and abs(rec.pb[-1] - 0.5) <= FLOAT_TOL

    def to_json(self) -> dict:
        return {"n": self.n, "p": [_num_json(v) for v in self.p]}


def _num_json(v):
    if isinstance(v, Fraction):
        return fraction_str(v)
    if v == math.inf:
        return "inf"
    return float(v)


@dataclass(frozen=True)
class Recursion:
    """Win/undecided probabilities after i messages, i = 0..n."""

    pa: Tuple[Real, ...]
    pb: Tuple[Real, ...]
    pu: Tuple[Real, ...]

    def rows(self):
        return list(zip(range(len(self.pa)), self.pa, self.pb, self.pu))


def ddb_recursion(g: DDBGame) -> Recursion:
    one = Fraction(1) if g.exact else 1.0
    zero = one * 0
    pa, pb, pu = [zero], [zero], [one]
    for i in range(1, g.n + 1):
        pi = g.prob(i)
        boom = pi * pu[-1]
        if i % 2:
            pa.append(pa[-1] + boom)
            pb.append(pb[-1])
        else:
            pa.append(pa[-1])
            pb.append(pb[-1] + boom)
        pu.append((1 - pi) * pu[-1])
    return Recursion(tuple(pa), tuple(pb), tuple(pu))


def complete_fair(prefix: Sequence, n: int) -> DDBGame:
    """Solve for p_{n-1} so the game with the given first n-2 values is fair.

    Raises InputError when no interior value works.
    """
    if n < 2:
        raise InputError("a fair game needs n >= 2")
    prefix = [_parse_prob(v) for v in prefix]
    if len(prefix) != n - 2:
        raise InputError(f"need {n - 2} leading probabilities, got {len(prefix)}")
    head = DDBGame(tuple(prefix) + (1,)) if prefix else None
    if head is not None:
        rec = ddb_recursion(head)
        pa, pb, pu = rec.pa[n - 2], rec.pb[n - 2], rec.pu[n - 2]
    else:
        pa, pb, pu = Fraction(0), Fraction(0), Fraction(1)
    # message n-1 belongs to Alice when n is even
    mine = pa if n % 2 == 0 else pb
    half = Fraction(1, 2) if isinstance(mine, Fraction) else 0.5
    q = (half - mine) / pu
    if not 0 < q < 1:
        raise InputError(f"no fair completion: p_{n - 1} would be {q}")
    return DDBGame(tuple(prefix) + (q, 1))


def fair_family_n3(p1) -> DDBGame:
    return complete_fair([p1], 3)


def fair_family_n5(p1, p2, p3) -> DDBGame:
    return complete_fair([p1, p2, p3], 5)


def random_fair_game(n: int, rng: np.random.Generator, denominator: int = 97, tries: int = 1000) -> DDBGame:
    """Rational fair game with random leading probabilities."""
    for _ in range(tries):
        prefix = [Fraction(int(rng.integers(1, denominator)), denominator) for _ in range(n - 2)]
        try:
            return complete_fair(prefix, n)
        except InputError:
            continue
    raise InputError(f"no fair game found for n={n} after {tries} draws")


# ---------------------------------------------------------------- simulation

def _idx(a: int, m: int, b: int) -> int:
    return a * 6 + m * 3 + b


def _rot_pairs(own_first: bool, alpha: Tuple[int, int], beta: Tuple[int, int]):
    """Index pairs (alpha, beta) over the untouched qutrit."""
    out = []
    for other in range(3):
        if own_first:
            out.append((_idx(alpha[0], alpha[1], other), _idx(beta[0], beta[1], other)))
        else:
            out.append((_idx(other, alpha[1], alpha[0]), _idx(other, beta[1], beta[0])))
    return out


def _rotate(state: np.ndarray, pairs, eps: float):
    c, s = math.sqrt(1 - eps), math.sqrt(eps)
    for ia, ib in pairs:
        xa, xb = state[ia], state[ib]
        state[ia] = c * xa - s * xb
        state[ib] = s * xa + c * xb


@dataclass
class HonestSimulation:
    final_state: np.ndarray
    outcome: Tuple[float, float]  # (Alice wins, Bob wins)
    abort_probabilities: List[float]
    closed_form_errors: List[float]
    norm_error: float

    @property
    def max_abort(self) -> float:
        return max(self.abort_probabilities, default=0.0)


def _closed_form(rec: Recursion, i: int) -> np.ndarray:
    v = np.zeros(18)
    v[_idx(QA, DIP, QA)] = math.sqrt(float(rec.pa[i]))
    v[_idx(QB, DIP, QB)] = math.sqrt(float(rec.pb[i]))
    v[_idx(QU, DIP, QU)] = math.sqrt(float(rec.pu[i]))
    return v


def ddb_simulate_honest(g: DDBGame) -> HonestSimulation:
    """Run the honest protocol on the 18-dimensional state vector."""
    rec = ddb_recursion(g)
    state = np.zeros(18)
    state[_idx(QU, DIP, QU)] = 1.0
    aborts, errs = [], []
    for i in range(1, g.n + 1):
        alice_speaks = i % 2 == 1
        x = QA if alice_speaks else QB
        _rotate(state, _rot_pairs(alice_speaks, (QU, DIP), (x, BOOM)), float(g.prob(i)))
        px = rec.pa[i] if alice_speaks else rec.pb[i]
        undo = float(g.prob(i) * rec.pu[i - 1] / px)
        _rotate(state, _rot_pairs(not alice_speaks, (QU, BOOM), (x, DIP)), undo)
        boom = [_idx(a, BOOM, b) for a in range(3) for b in range(3)]
        aborts.append(float(np.sum(state[boom] ** 2)))
        state[boom] = 0.0
        errs.append(float(np.max(np.abs(state - _closed_form(rec, i)))))
    probs = state ** 2
    alice = sum(probs[_idx(QA, m, b)] for m in range(2) for b in range(3))
    bob = sum(probs[_idx(QB, m, b)] for m in range(2) for b in range(3))
    # an undecided qutrit at the end makes each player claim the win
    undecided = sum(probs[_idx(QU, m, b)] for m in range(2) for b in range(3))
    return HonestSimulation(
        final_state=state,
        outcome=(float(alice + undecided), float(bob)),
        abort_probabilities=aborts,
        closed_form_errors=errs,
        norm_error=abs(float(np.sum(probs)) - 1.0),
    )


class NotRepresentable(ArithmeticError):
    """A sum of square roots left the signed-square-root form."""


def _is_square(q: Fraction) -> Optional[Fraction]:
    if q < 0:
        return None
    rn, rd = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if rn * rn == q.numerator and rd * rd == q.denominator:
        return Fraction(rn, rd)
    return None


def _ssum(x: Tuple[int, Fraction], y: Tuple[int, Fraction]) -> Tuple[int, Fraction]:
    """(s1 sqrt r1) + (s2 sqrt r2) as a signed square root, exactly."""
    (s1, r1), (s2, r2) = x, y
    if r1 == 0 or s1 == 0:
        return y
    if r2 == 0 or s2 == 0:
        return x
    m = _is_square(r1 * r2)
    if m is None:
        raise NotRepresentable(f"sqrt({r1}) + sqrt({r2})")
    sq = r1 + r2 + 2 * s1 * s2 * m
    if sq == 0:
        return (0, Fraction(0))
    sign = s1 if r1 > r2 else s2
    return (sign, sq)


def ddb_simulate_exact(g: DDBGame) -> Dict[str, object]:
    """Exact honest run for rational games.

    Amplitudes are stored as (sign, square).  Returns the exact abort
    probabilities (all zero for honest play) and the final squares.
    """
    if not g.exact:
        raise InputError("exact simulation needs rational probabilities")
    rec = ddb_recursion(g)
    state: Dict[int, Tuple[int, Fraction]] = {i: (0, Fraction(0)) for i in range(18)}
    state[_idx(QU, DIP, QU)] = (1, Fraction(1))

    def rotate(pairs, eps: Fraction):
        for ia, ib in pairs:
            (sa, ra), (sb, rb) = state[ia], state[ib]
            state[ia] = _ssum((sa, (1 - eps) * ra), (-sb, eps * rb))
            state[ib] = _ssum((sa, eps * ra), (sb, (1 - eps) * rb))

    aborts = []
    for i in range(1, g.n + 1):
        alice_speaks = i % 2 == 1
        x = QA if alice_speaks else QB
        rotate(_rot_pairs(alice_speaks, (QU, DIP), (x, BOOM)), g.prob(i))
        px = rec.pa[i] if alice_speaks else rec.pb[i]
        rotate(_rot_pairs(not alice_speaks, (QU, BOOM), (x, DIP)), g.prob(i) * rec.pu[i - 1] / px)
        boom = [_idx(a, BOOM, b) for a in range(3) for b in range(3)]
        aborts.append(sum((state[k][1] for k in boom), Fraction(0)))
        for k in boom:
            state[k] = (0, Fraction(0))
        expect = {_idx(QA, DIP, QA): rec.pa[i], _idx(QB, DIP, QB): rec.pb[i], _idx(QU, DIP, QU): rec.pu[i]}
        for k, (s, r) in state.items():
            want = expect.get(k, Fraction(0))
            if r != want or (r != 0 and s != 1):
                raise ArithmeticError(f"step {i}: amplitude at {k} is {s}*sqrt({r}), expected sqrt({want})")
    return {"aborts": aborts, "squares": {k: r for k, (s, r) in state.items() if r}}


# ---------------------------------------------------------------- dual bound

def _require_fair(g: DDBGame, what: str):
    if not g.fair:
        rec = ddb_recursion(g)
        raise InputError(
            f"{what} assumes a fair game (both players win with 1/2); "
            f"got P_A={_num_json(rec.pa[-1])}, P_B={_num_json(rec.pb[-1])}"
        )


def ddb_dual_bound_pb(g: DDBGame) -> Real:
    """Closed-form upper bound on a cheating Bob's winning probability."""
    _require_fair(g, "the dual bound")
    one = Fraction(1) if g.exact else 1.0
    total = one * 0
    all_prod = one      # prod_{k<j} (1-p_k)
    odd_prod = one      # same product over odd k only
    for j in range(1, g.n + 1):
        pj = g.prob(j)
        if j % 2 == 0:
            total += pj * all_prod * odd_prod
        all_prod *= 1 - pj
        if j % 2:
            odd_prod *= 1 - pj
    return 2 * total


@dataclass
class CertificateReport:
    accepted: bool
    u0: Real
    u: List[Real]
    b: List[Real]
    tilde: Dict[int, Real]
    failures: List[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "accepted": self.accepted,
            "u0": _num_json(self.u0),
            "u": [_num_json(v) for v in self.u],
            "b": [_num_json(v) for v in self.b],
            "tilde": {str(k): _num_json(v) for k, v in sorted(self.tilde.items())},
            "failures": list(self.failures),
        }


INF = math.inf


def ddb_dual_certificate_check(g: DDBGame) -> CertificateReport:
    """Build the diagonal dual point from the closed forms and check it exactly.

    The diagonal is (a_i, b_i, u_i) on (A, B, U), with every a_i = 0.  The
    values b_0 = b_1 are infinite.  They are kept as ``math.inf`` and each
    condition that touches them is evaluated in the limit.
    """
    _require_fair(g, "the certificate")
    if not g.exact:
        raise InputError("the exact certificate check needs rational probabilities")
    n = g.n
    rec = ddb_recursion(g)
    u0 = ddb_dual_bound_pb(g)
    fails: List[str] = []

    u: List[Fraction] = [u0]
    for i in range(1, n + 1):
        pi = g.prob(i)
        if i % 2 == 0:
            u.append(u[-1])
        elif pi == 1:
            # last Alice message: U feeds A only, and a_n may be 0
            u.append(Fraction(0))
        else:
            u.append(u[-1] / (1 - pi))
    if n % 2 == 1:
        # (the final odd step forces u_{n-1} = a_n = 0)
        u[n - 1] = Fraction(0)

    tilde = {i: g.prob(i) * rec.pu[i - 1] / rec.pb[i] for i in range(2, n + 1, 2)}

    b: List[Real] = [INF, INF]
    for i in range(2, n + 1):
        if i % 2:
            b.append(b[-1])
            continue
        t = tilde[i]
        up = u[i - 1]
        if b[i - 1] == INF:
            b.append(up / t)
        else:
            b.append(1 / (t / up + (1 - t) / b[i - 1]))

    for i in range(1, n + 1):
        if i % 2:
            # odd steps are equalities on the diagonal
            pi = g.prob(i)
            if b[i - 1] != b[i]:
                fails.append(f"step {i}: b changes across an odd step")
            if u[i - 1] != (1 - pi) * u[i]:
                fails.append(f"step {i}: u_{i - 1} != (1-p_{i}) u_{i}")
            continue
        if u[i - 1] < u[i]:
            fails.append(f"step {i}: u_{i - 1} < u_{i}")
        t = tilde[i]
        if not 0 < t <= 1:
            fails.append(f"step {i}: rotation parameter {t} outside (0, 1]")
        bi, bp = b[i], b[i - 1]
        d2 = u[i - 1] - t * bi
        if d2 < 0:
            fails.append(f"step {i}: 2x2 lower diagonal {d2} < 0")
        if bp == INF:
            # determinant is linear in b_{i-1} with slope d2 >= 0
            continue
        d1 = bp - (1 - t) * bi
        det = d1 * d2 - t * (1 - t) * bi * bi
        if d1 < 0:
            fails.append(f"step {i}: 2x2 upper diagonal {d1} < 0")
        if det < 0:
            fails.append(f"step {i}: 2x2 determinant {det} < 0")
    if any(v < 0 for v in u):
        fails.append("negative u entry")
    if b[n] != 1:
        fails.append(f"b_{n} = {_num_json(b[n])}, expected 1")
    return CertificateReport(not fails, u0, u, b, tilde, fails)


# ---------------------------------------------------------------- see-saw

def _rot_matrix(dim: int, pairs, eps: float) -> np.ndarray:
    m = np.eye(dim)
    c, s = math.sqrt(1 - eps), math.sqrt(eps)
    for ia, ib in pairs:
        m[ia, ia] = c
        m[ib, ib] = c
        m[ia, ib] = -s
        m[ib, ia] = s
    return m


def _alice_ops(g: DDBGame):
    """Alice's operators on qutrit (x) message, 6-dimensional."""
    rec = ddb_recursion(g)

    def am(a, m):
        return a * 2 + m

    ops = {}
    for i in range(1, g.n + 1):
        if i % 2:
            ops[("R", i)] = _rot_matrix(6, [(am(QU, DIP), am(QA, BOOM))], float(g.prob(i)))
        else:
            t = float(g.prob(i) * rec.pu[i - 1] / rec.pb[i])
            ops[("T", i)] = _rot_matrix(6, [(am(QU, BOOM), am(QB, DIP))], t)
    dip = np.diag([1.0 if m == DIP else 0.0 for a in range(3) for m in range(2)])
    win = np.diag([1.0 if a == QB else 0.0 for a in range(3) for m in range(2)])
    return ops, dip, win


@dataclass
class SeesawResult:
    value: float
    iterations: int
    converged: bool
    restarts: int
    history: List[float]


def _random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def ddb_primal_seesaw_pb(
    g: DDBGame,
    iters: int = 400,
    seed: int = 0,
    restarts: int = 4,
    register_dim: int = 9,
    tol: float = 1e-12,
) -> SeesawResult:
    """Lower bound on a cheating Bob's win probability against honest Alice.

    Bob keeps a private register and applies one unitary to (message,
    register) for each of his messages.  Alice runs her honest rotations and
    Boom checks.  Each sweep replaces one of Bob's unitaries by the polar
    factor of the objective's gradient.  The objective is convex in that
    unitary, so the update never decreases it.
    """
    if g.n > 7:
        raise InputError("see-saw is limited to n <= 7")
    ops, dip, win = _alice_ops(g)
    bob_steps = list(range(2, g.n + 1, 2))
    d_b = 2 * register_dim
    dim = 3 * d_b
    if not bob_steps:
        return SeesawResult(0.0, 0, True, 0, [0.0])
    eye_r = np.eye(register_dim)

    def lift(op6):
        # Alice's 6-dim operator on (qutrit, message), identity on the register
        return np.kron(op6, eye_r)

    def lift_bob(v):
        return np.kron(np.eye(3), v)

    # Alice's fixed operators between Bob's moves, in time order
    segments: List[np.ndarray] = []   # segments[k] acts right before Bob move k
    cur = lift(ops[("R", 1)])
    for i in range(2, g.n + 1):
        if i % 2 == 0:
            segments.append(cur)
            cur = lift(dip @ ops[("T", i)])
        else:
            cur = lift(ops[("R", i)]) @ cur
    tail = lift(win) @ cur

    psi0 = np.zeros(dim, dtype=complex)
    psi0[((QU * 2 + DIP) * register_dim)] = 1.0

    def value(vs):
        x = psi0
        for seg, v in zip(segments, vs):
            x = lift_bob(v) @ (seg @ x)
        x = tail @ x
        return float(np.vdot(x, x).real)

    rng = np.random.default_rng(seed)
    best: Optional[SeesawResult] = None
    for r in range(restarts):
        vs = [np.eye(d_b, dtype=complex) if r == 0 else _random_unitary(d_b, rng) for _ in bob_steps]
        hist = [value(vs)]
        converged = False
        it = 0
        for it in range(1, iters + 1):
            for k in range(len(vs)):
                # state just before Bob's move k
                x = psi0
                for seg, v in zip(segments[:k], vs[:k]):
                    x = lift_bob(v) @ (seg @ x)
                phi = segments[k] @ x
                # linear map after Bob's move k
                post = np.eye(dim, dtype=complex)
                for seg, v in zip(segments[k + 1:], vs[k + 1:]):
                    post = lift_bob(v) @ seg @ post
                post = tail @ post
                out = post @ (lift_bob(vs[k]) @ phi)
                y = post.conj().T @ out
                phi_m = phi.reshape(3, d_b)
                y_m = y.reshape(3, d_b)
                c = phi_m.T @ y_m.conj()           # sum_a |phi_a><y_a|
                w, _, xh = np.linalg.svd(c)
                vs[k] = (w @ xh).conj().T
            hist.append(value(vs))
            if abs(hist[-1] - hist[-2]) < tol:
                converged = True
                break
        res = SeesawResult(hist[-1], it, converged, r + 1, hist)
        if best is None or res.value > best.value:
            best = res
    best.restarts = restarts
    return best
