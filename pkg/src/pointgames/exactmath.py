"""Exact rational polynomials and sign decisions on half-lines.

Everything here works over ``fractions.Fraction``.  The sign engine converts
a polynomial to a primitive integer polynomial (a positive rescaling, so all
signs are preserved) and then runs Yun's square-free decomposition and a
Sturm chain built from positively scaled pseudo-remainders.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Iterable, Optional, Sequence, Tuple, Union

Number = Union[int, Fraction]


class InputError(ValueError):
    """Rejected input: a precondition of an exact operation does not hold."""


def as_fraction(value) -> Fraction:
    """Parse ints, Fractions and "a/b" strings.  Floats are refused."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise InputError(f"not a rational: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"not a rational: {value!r}") from exc
    raise InputError(f"not an exact rational: {value!r}")


def fraction_str(q: Fraction) -> str:
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class Polynomial:
    """Univariate polynomial with rational coefficients, ascending degree."""

    coeffs: Tuple[Fraction, ...] = ()

    def __post_init__(self):
        cs = [as_fraction(c) for c in self.coeffs]
        while cs and cs[-1] == 0:
            cs.pop()
        object.__setattr__(self, "coeffs", tuple(cs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    def leading(self) -> Fraction:
        return self.coeffs[-1] if self.coeffs else Fraction(0)

    def __call__(self, x: Number) -> Fraction:
        acc = Fraction(0)
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def __add__(self, other: "Polynomial") -> "Polynomial":
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (Fraction(0),) * (n - len(self.coeffs))
        b = other.coeffs + (Fraction(0),) * (n - len(other.coeffs))
        return Polynomial(tuple(x + y for x, y in zip(a, b)))

    def __neg__(self) -> "Polynomial":
        return Polynomial(tuple(-c for c in self.coeffs))

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __mul__(self, other) -> "Polynomial":
        if not isinstance(other, Polynomial):
            return Polynomial(tuple(c * other for c in self.coeffs))
        if self.is_zero or other.is_zero:
            return Polynomial()
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in enumerate(other.coeffs):
                    out[i + j] += a * b
        return Polynomial(tuple(out))

    __rmul__ = __mul__

    @classmethod
    def from_roots(cls, roots: Iterable[Number], lead: Number = 1) -> "Polynomial":
        p = cls((as_fraction(lead),))
        for r in roots:
            p = p * cls((-as_fraction(r), Fraction(1)))
        return p

    def __repr__(self):
        return "Polynomial([" + ", ".join(fraction_str(c) for c in self.coeffs) + "])"


@dataclass(frozen=True)
class SignVerdict:
    nonnegative: bool
    strictly_positive: bool
    witness: Optional[Fraction] = None
    # True when the witness is an exact zero or a point of negativity; an
    # irrational double root can only be approximated
    witness_exact: bool = True


# ---------------------------------------------------------------------------
# clearing denominators


def clear_denominators(points: Sequence[Tuple[Number, Number]]) -> Polynomial:
    """Numerator N of sum_j (-1/(lam+z_j)) d_j over the denominator prod(lam+z_k)."""
    zs = [as_fraction(z) for z, _ in points]
    ds = [as_fraction(d) for _, d in points]
    if len(set(zs)) != len(zs):
        raise InputError("duplicate support coordinates")
    if any(z < 0 for z in zs):
        raise InputError("negative support coordinate")
    total = Polynomial()
    for j, (zj, dj) in enumerate(zip(zs, ds)):
        if dj == 0:
            continue
        term = Polynomial.from_roots([-z for k, z in enumerate(zs) if k != j], -dj)
        total = total + term
    return total


# ---------------------------------------------------------------------------
# integer polynomial kernel (ascending lists of Python ints)


def _trim(p: list) -> list:
    while p and p[-1] == 0:
        p.pop()
    return p


def _primitive(p: Sequence[int]) -> list:
    p = _trim(list(p))
    if not p:
        return p
    g = abs(reduce(math.gcd, p))
    return [c // g for c in p]


def to_primitive_int(poly: Polynomial) -> list:
    """Positive rescaling of a rational polynomial to a primitive integer one."""
    if poly.is_zero:
        return []
    den = reduce(math.lcm, (c.denominator for c in poly.coeffs), 1)
    return _primitive([int(c * den) for c in poly.coeffs])


def _deriv(p: Sequence[int]) -> list:
    return [i * c for i, c in enumerate(p)][1:]


def _prem_positive(a: Sequence[int], b: Sequence[int]) -> list:
    """Remainder of a by b up to a positive factor."""
    r = list(a)
    db = len(b) - 1
    lb = b[-1]
    scale = abs(lb)
    sgn = 1 if lb > 0 else -1
    while len(r) - 1 >= db and r:
        shift = len(r) - 1 - db
        lr = r[-1]
        r = [scale * c for c in r]
        for i, c in enumerate(b):
            r[i + shift] -= sgn * lr * c
        _trim(r)
    return _primitive(r)


def _divmod_q(a: Sequence[Fraction], b: Sequence[Fraction]):
    r = [Fraction(c) for c in a]
    db = len(b) - 1
    q = [Fraction(0)] * max(len(a) - db, 1)
    while r and len(r) - 1 >= db:
        shift = len(r) - 1 - db
        f = r[-1] / b[-1]
        q[shift] = f
        for i, c in enumerate(b):
            r[i + shift] -= f * c
        _trim(r)
    return _trim(q), r


def _to_int(q: Sequence[Fraction]) -> list:
    q = list(q)
    if not q:
        return []
    den = reduce(math.lcm, (c.denominator for c in q), 1)
    return _primitive([int(c * den) for c in q])


def _exact_div(a: Sequence[int], b: Sequence[int]) -> list:
    """a / b (b divides a) up to a positive factor."""
    q, r = _divmod_q(a, b)
    if r:
        raise ArithmeticError("non-exact polynomial division")
    return _to_int(q)


def _gcd(a: Sequence[int], b: Sequence[int]) -> list:
    a, b = _primitive(a), _primitive(b)
    while b:
        a, b = b, _prem_positive(a, b)
    if a and a[-1] < 0:
        a = [-c for c in a]
    return a


def _monic(p: Sequence[int]) -> list:
    return [Fraction(c, p[-1]) for c in p]


def _yun(p: Sequence[int]) -> list:
    """Square-free factors [f1, f2, ...] with p ~ f1 * f2^2 * f3^3 ...

    Runs over the rationals with monic gcds so that the derivative identities
    of the algorithm hold exactly; factors are returned as primitive ints.
    """
    p = _primitive(p)
    if len(p) <= 1:
        return []
    P = [Fraction(c) for c in p]
    dP = [Fraction(c) for c in _deriv(p)]
    A = _monic(_gcd(p, _deriv(p)))
    B, _ = _divmod_q(P, A)
    C, _ = _divmod_q(dP, A)
    factors = []
    while len(B) > 1:
        dB = [i * c for i, c in enumerate(B)][1:]
        n = max(len(C), len(dB))
        D = _trim([(C[i] if i < len(C) else 0) - (dB[i] if i < len(dB) else 0) for i in range(n)])
        if D:
            A = _monic(_gcd(_to_int(B), _to_int(D)))
        else:
            A = [c / B[-1] for c in B]
        factors.append(_to_int(A))
        B, _ = _divmod_q(B, A)
        C = _divmod_q(D, A)[0] if D else []
    return factors


def _sign_at(p: Sequence[int], x: Fraction) -> int:
    """Sign of p(x), via den^deg * p(num/den) in integers."""
    num, den = x.numerator, x.denominator
    acc = p[-1]
    dpow = 1
    for c in reversed(p[:-1]):
        dpow *= den
        acc = acc * num + c * dpow
    return (acc > 0) - (acc < 0)


def _sturm_chain(p: Sequence[int]) -> list:
    chain = [_primitive(p)]
    d = _primitive(_deriv(p))
    if not d:
        return chain
    chain.append(d)
    while True:
        r = _prem_positive(chain[-2], chain[-1])
        if not r:
            break
        chain.append([-c for c in r])
    return chain


def _variations(signs: Iterable[int]) -> int:
    last = 0
    count = 0
    for s in signs:
        if s == 0:
            continue
        if last and s != last:
            count += 1
        last = s
    return count


def _signs_at_inf(chain) -> list:
    return [(q[-1] > 0) - (q[-1] < 0) for q in chain]


def _count(chain, a: Fraction, b: Optional[Fraction]) -> int:
    va = _variations(_sign_at(q, a) for q in chain)
    vb = _variations(_signs_at_inf(chain) if b is None else (_sign_at(q, b) for q in chain))
    return va - vb


def sturm_root_count(poly: Polynomial, a: Number, b: Optional[Number] = None) -> int:
    """Number of distinct real roots in (a, b]; b=None means +infinity."""
    a = as_fraction(a)
    if b is not None:
        b = as_fraction(b)
        if not a < b:
            raise InputError("need a < b")
    p = to_primitive_int(poly)
    if not p:
        raise InputError("zero polynomial has infinitely many roots")
    if len(p) == 1:
        return 0
    sqf = _exact_div(p, _gcd(p, _deriv(p)))
    return _count(_sturm_chain(sqf), a, b)


def _cauchy_bound(p: Sequence[int]) -> Fraction:
    lead = abs(p[-1])
    return 1 + Fraction(max(abs(c) for c in p[:-1]), lead) if len(p) > 1 else Fraction(1)


def _isolate(chain, lo: Fraction, hi: Fraction, count: int, out: list):
    """Split (lo, hi] until every piece holds one root; lo is never a root."""
    if count == 0:
        return
    if count == 1:
        out.append((lo, hi))
        return
    mid = (lo + hi) / 2
    c_left = _count(chain, lo, mid)
    _isolate(chain, lo, mid, c_left, out)
    _isolate(chain, mid, hi, count - c_left, out)


def _sample_points(sqf: Sequence[int], lam: Fraction) -> Tuple[list, list]:
    """Rational points meeting every root-free gap of sqf on (lam, inf),
    plus the exact rational roots met along the way."""
    chain = _sturm_chain(sqf)
    hi = max(_cauchy_bound(sqf), lam) + 1
    pieces: list = []
    _isolate(chain, lam, hi, _count(chain, lam, hi), pieces)
    samples, roots = [], []
    # left boundary of the current gap; points equal to it are allowed only
    # when it is not itself a root
    bound, inclusive = lam, False
    for lo, up in pieces:
        while not (lo > bound or (inclusive and lo == bound)):
            mid = (lo + up) / 2
            if _count(chain, lo, mid) == 1:
                up = mid
                if _sign_at(sqf, mid) == 0:
                    lo = (lo + mid) / 2
                    bound, inclusive = lo, True
            else:
                lo = mid
        samples.append(lo)
        if _sign_at(sqf, up) == 0:
            roots.append(up)
            bound, inclusive = up, False
        else:
            bound, inclusive = up, True
            samples.append(up)
    samples.append(hi)
    return sorted(set(s for s in samples if s > lam)), roots


def sign_on_shifted_axis(poly: Polynomial, lam: Number = 0) -> SignVerdict:
    """Decide N >= 0 and N > 0 on the open interval (lam, inf)."""
    lam = as_fraction(lam)
    if lam < 0:
        raise InputError("shift must be nonnegative")
    p = to_primitive_int(poly)
    if not p:
        return SignVerdict(True, False, lam + 1)
    if len(p) == 1:
        if p[0] > 0:
            return SignVerdict(True, True, None)
        return SignVerdict(False, False, lam + 1)
    factors = _yun(p)
    odd = [1]
    for m, f in enumerate(factors, start=1):
        if m % 2 == 1 and len(f) > 1:
            odd = _mul_int(odd, f)
    lead_pos = p[-1] > 0
    odd_free = len(odd) == 1 or _count(_sturm_chain(odd), lam, None) == 0
    nonneg = lead_pos and odd_free
    sqf = [1]
    for f in factors:
        if len(f) > 1:
            sqf = _mul_int(sqf, f)
    has_root = len(sqf) > 1 and _count(_sturm_chain(sqf), lam, None) > 0
    strict = nonneg and not has_root
    if strict:
        return SignVerdict(True, True, None)
    samples, roots = _sample_points(sqf, lam) if len(sqf) > 1 else ([lam + 1], [])
    if not nonneg:
        for s in samples:
            if _sign_at(p, s) < 0:
                # prefer a short witness when one is at hand
                t = simplest_between(lam, s)
                return SignVerdict(False, False, t if _sign_at(p, t) < 0 else s)
        raise AssertionError("sign engine found no negative sample")  # pragma: no cover
    if roots:
        return SignVerdict(True, False, roots[0])
    root, exact = _locate_root(sqf, lam)
    return SignVerdict(True, False, root, witness_exact=exact)


def simplest_between(lo: Fraction, hi: Fraction) -> Fraction:
    """The rational with smallest denominator in the open interval (lo, hi)."""
    if not lo < hi:
        raise InputError("empty interval")
    fl = math.floor(lo)
    if fl + 1 < hi:
        return Fraction(fl + 1)
    a, b = lo - fl, hi - fl
    if a == 0:
        # (0, b) with b <= 1: 1/n for the smallest n with 1/n < b
        return fl + Fraction(1, math.floor(1 / b) + 1)
    return fl + 1 / simplest_between(1 / b, 1 / a)


def _locate_root(sqf, lam: Fraction) -> Tuple[Fraction, bool]:
    """Leftmost root of sqf on (lam, inf): exact when rational, otherwise a
    close rational upper approximation."""
    chain = _sturm_chain(sqf)
    lo, hi = lam, max(_cauchy_bound(sqf), lam) + 1
    while _count(chain, lo, hi) > 1:
        mid = (lo + hi) / 2
        if _count(chain, lo, mid) > 0:
            hi = mid
        else:
            lo = mid
    for _ in range(200):
        if _sign_at(sqf, hi) == 0:
            return hi, True
        s = simplest_between(lo, hi)
        if _sign_at(sqf, s) == 0:
            return s, True
        if _count(chain, lo, s) > 0:
            hi = s
        else:
            lo = s
        if hi - lo < (1 + abs(hi)) / 2 ** 64:
            break
    return hi, False


def _mul_int(a: Sequence[int], b: Sequence[int]) -> list:
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def sign_on_open_positive_axis(poly: Polynomial) -> SignVerdict:
    return sign_on_shifted_axis(poly, 0)
