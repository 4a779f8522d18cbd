"""Explicit TIPG generators: polynomial rungs, the truncated bias-1/6 ladder
and the k-parameter family whose final point tends to (k+1)/(2k+1)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import PointFn1D, PointFn2D, point
from .exactmath import InputError, Polynomial, as_fraction, sign_on_open_positive_axis
from .games import TIPG


# ---------------------------------------------------------------------------
# rungs


def interpolate(xs: Sequence[Fraction], values: Sequence[Fraction]) -> Polynomial:
    """Exact Lagrange interpolant through (xs, values)."""
    total = Polynomial()
    for i, (xi, yi) in enumerate(zip(xs, values)):
        if yi == 0:
            continue
        den = Fraction(1)
        for j, xj in enumerate(xs):
            if j != i:
                den *= xi - xj
        total = total + Polynomial.from_roots([xj for j, xj in enumerate(xs) if j != i], yi / den)
    return total


def _rung_weights(xs: Sequence[Fraction], values: Sequence[Fraction]) -> List[Fraction]:
    out = []
    for i, xi in enumerate(xs):
        den = Fraction(1)
        for j, xj in enumerate(xs):
            if j != i:
                den *= xj - xi
        out.append(-values[i] / den)
    return out


def rung_from_polynomial(xs, f_values) -> PointFn1D:
    """Weights -f(x_i) / prod_{j != i}(x_j - x_i).

    The values must come from a polynomial f of degree at most len(xs) - 2
    with f(-lam) >= 0 for lam > 0; both facts are re-derived here from the
    exact interpolant and the call fails when either is missing.
    """
    xs = [as_fraction(x) for x in xs]
    vals = [as_fraction(v) for v in f_values]
    if len(xs) < 2 or len(xs) != len(vals):
        raise InputError("need at least two points and one value per point")
    if len(set(xs)) != len(xs):
        raise InputError("duplicate rung coordinates")
    if any(x < 0 for x in xs):
        raise InputError("negative rung coordinate")
    f = interpolate(xs, vals)
    if f.degree > len(xs) - 2:
        raise InputError(f"no degree certificate: interpolant has degree {f.degree} > {len(xs) - 2}")
    f_neg = Polynomial(tuple(c * (-1) ** i for i, c in enumerate(f.coeffs)))
    if not sign_on_open_positive_axis(f_neg).nonnegative:
        raise InputError("f(-lam) is negative for some lam > 0")
    return PointFn1D(zip(xs, _rung_weights(xs, vals)))


# ---------------------------------------------------------------------------
# bias 1/6


def sixth_delta(gamma: int) -> Fraction:
    return Fraction(8, 3 * gamma - 1)


def build_bias_sixth_tipg(gamma: int) -> TIPG:
    """Truncated ladder at height gamma/3 with the bottom fixed up so that the
    final point is ((2+delta)/3, (2+delta)/3), delta = 8/(3 gamma - 1)."""
    if not isinstance(gamma, int) or gamma < 4:
        raise InputError("gamma must be an integer >= 4")
    G = Fraction(gamma)
    third = Fraction(1, 3)
    C = Fraction(4, 9) * (3 / G) * (3 / (G + 1)) * (3 / (G - 2)) * (3 / (G - 1))

    def f(x, y):
        return C * ((G + 1) / 3 - x) * ((G + 2) / 3 - x) * ((G + 1) / 3 - y) * ((G + 2) / 3 - y)

    lad: Dict[Tuple[Fraction, Fraction], Fraction] = {}
    for k in range(3, gamma + 1):
        y = k * third
        xs = [(k - 2) * third, (k - 1) * third, (k + 1) * third, (k + 2) * third]
        for x, w in zip(xs, _rung_weights(xs, [f(x, y) for x in xs])):
            if w:
                lad[(x, y)] = lad.get((x, y), Fraction(0)) + w
    h_lad = PointFn2D(lad)
    delta = sixth_delta(gamma)
    d3 = (2 + delta) / 3
    half = Fraction(1, 2)
    extra = [
        ((0, 1), -half),
        ((third, 1), 1),
        ((2 * third, 1), -half),
        ((d3, 2 * third), half),
        ((1, 2 * third), half - h_lad[2 * third, 1]),
        ((4 * third, 2 * third), -h_lad[2 * third, 4 * third]),
        ((2 * third, d3), -half),
        ((d3, d3), half),
    ]
    h = h_lad + PointFn2D(extra)
    return TIPG(h, h.transpose(), half, half)


# ---------------------------------------------------------------------------
# the k family


@dataclass(frozen=True)
class FamilyParams:
    k: int
    eps: Fraction
    gamma: int
    zstar: Fraction

    def __post_init__(self):
        object.__setattr__(self, "eps", as_fraction(self.eps))
        object.__setattr__(self, "zstar", as_fraction(self.zstar))
        if not isinstance(self.k, int) or self.k < 1:
            raise InputError("k must be a positive integer")
        if self.eps <= 0:
            raise InputError("eps must be positive")
        if self.k * self.eps >= Fraction(1, 2):
            raise InputError("k * eps must be below 1/2")
        if not isinstance(self.gamma, int) or self.gamma <= 4 * self.k:
            raise InputError("gamma must be an integer above 4k")
        if not Fraction(1, 2) < self.zstar < 1:
            raise InputError("zstar must lie in (1/2, 1)")
        if (self.zstar / self.eps).denominator != 1:
            raise InputError("zstar / eps must be an integer")
        if self.gamma < self.zstar / self.eps:
            raise InputError("gamma must be at least zstar / eps")

    @property
    def jstar(self) -> int:
        return int(self.zstar / self.eps)

    def header(self) -> dict:
        from .exactmath import fraction_str

        return {"k": self.k, "eps": fraction_str(self.eps), "gamma": self.gamma, "zstar": fraction_str(self.zstar)}


@dataclass
class FamilyFns:
    params: FamilyParams
    g: Callable[[Fraction], Fraction]
    p: Callable[[Fraction], Fraction]
    C: Fraction
    D: Callable[[int], Fraction]
    h: PointFn2D
    v: PointFn2D
    # literal-formula rung weight divided by the weight actually used, per offset
    literal_ratio: Dict[int, Fraction] = field(default_factory=dict)

    def tipg(self) -> TIPG:
        return TIPG(self.h, self.v, Fraction(1, 2), Fraction(1, 2))


def _family_kernel(k: int, jstar: int, gamma: int):
    """g and the eps-free part of p at integer grid indices."""

    def g_idx(m: int) -> Fraction:
        out = Fraction(1)
        for l in range(1, k):
            out *= Fraction(jstar - l - m, jstar - l)
        for l in range(1, k + 1):
            out *= Fraction(gamma + l - m, gamma + l)
        return out

    def pbar(j: int) -> Fraction:
        # p(j eps) * eps^(2k+1)
        den = 1
        for l in range(-k, k + 1):
            den *= j + l
        return (-1) ** (k - 1) * g_idx(j) / den

    return g_idx, pbar


def build_family_tipg(params: FamilyParams) -> FamilyFns:
    k, eps, gamma, zs = params.k, params.eps, params.gamma, params.zstar
    J = params.jstar
    g_idx, pbar = _family_kernel(k, J, gamma)

    def g(z) -> Fraction:
        z = as_fraction(z)
        out = Fraction(1)
        for l in range(1, k):
            out *= (zs - l * eps - z) / (zs - l * eps)
        for l in range(1, k + 1):
            out *= ((gamma + l) * eps - z) / ((gamma + l) * eps)
        return out

    def p(z) -> Fraction:
        z = as_fraction(z)
        out = (-1) ** (k - 1) * g(z)
        for l in range(-k, k + 1):
            out /= z + l * eps
        return out

    def D(i: int) -> Fraction:
        out = eps ** (2 * k - 1)
        for l in range(-k, k + 1):
            if l != i:
                out *= l - i
        return out

    pbars = {j: pbar(j) for j in range(J, gamma + 1)}
    total = sum(pbars.values(), Fraction(0))
    C = eps ** (2 * k + 1) / total  # 1 / sum_j p(j eps)
    Cbar = 1 / total  # multiplies pbar

    half = Fraction(1, 2)
    pts: Dict[Tuple[Fraction, Fraction], Fraction] = {}

    def add(x, y, w):
        if w:
            key = (x, y)
            pts[key] = pts.get(key, Fraction(0)) + w

    add(Fraction(1), Fraction(0), -half)
    for j, pb in pbars.items():
        add(j * eps, Fraction(0), half * Cbar * pb)
    add(zs - k * eps, zs, -half)
    add(zs, zs, half)
    # per line y = j eps the rung over {0} and the 2k neighbours of j eps,
    # weighted by -f_j(x_i)/prod(x_m - x_i) with f_j = (-1)^(k-1) g(x) g(j eps)/(j eps)
    offs = [i for i in range(-k, k + 1) if i != 0]
    base = {}
    for i in offs:
        prod = 1
        for l in offs:
            if l != i:
                prod *= l - i
        base[i] = prod
    for j, pb in pbars.items():
        y = j * eps
        add(Fraction(0), y, -half * Cbar * pb)
        gj = g_idx(j)
        if gj == 0:
            continue
        for i in offs:
            gi = g_idx(j + i)
            if gi == 0:
                continue
            # weight in units where coordinates are divided by eps; the eps
            # powers are folded into Cbar
            w = (-1) ** (k - 1) * gi * gj / (Fraction(j) * (j + i) * base[i])
            add((j + i) * eps, y, half * Cbar * w)
    h = PointFn2D(pts)

    # the literal rung formula with D including the l = 0 factor
    literal = {}
    j = J + k if J + k <= gamma else J
    for i in offs:
        if g_idx(j + i) == 0 or g_idx(j) == 0:
            continue
        lit = (-1) ** k * g((j + i) * eps) * g(j * eps) / ((j * eps) * ((j + i) * eps) * D(i))
        used = (-1) ** (k - 1) * g((j + i) * eps) * g(j * eps) / (
            (j * eps) * ((j + i) * eps) * eps ** (2 * k - 1) * base[i]
        )
        literal[i] = lit / used
    return FamilyFns(params, g, p, C, D, h, h.transpose(), literal)


def family_ratio(params: FamilyParams) -> Fraction:
    """C * sum_j p(j eps)/(j eps); the family is feasible when this is <= 1."""
    _, pbar = _family_kernel(params.k, params.jstar, params.gamma)
    s0 = Fraction(0)
    s1 = Fraction(0)
    for j in range(params.jstar, params.gamma + 1):
        pb = pbar(j)
        s0 += pb
        s1 += pb / j
    return s1 / (params.eps * s0)


def check_family_feasibility(params: FamilyParams) -> bool:
    return family_ratio(params) <= 1


def _ratio_float(k: int, J: int, gamma: int, zstar: float) -> float:
    j = np.arange(J, gamma + 1, dtype=float)
    g = np.ones_like(j)
    for l in range(1, k):
        g *= (J - l - j) / (J - l)
    for l in range(1, k + 1):
        g *= (gamma + l - j) / (gamma + l)
    pb = (-1) ** (k - 1) * g
    for l in range(-k, k + 1):
        pb /= j + l
    return float(J * np.sum(pb / j) / (zstar * np.sum(pb)))


@dataclass
class SearchResult:
    params: Optional[FamilyParams]
    trace: List[Tuple[int, int, float]]

    @property
    def found(self) -> bool:
        return self.params is not None


class SearchExhausted(RuntimeError):
    def __init__(self, result: SearchResult):
        super().__init__(f"no feasible parameters within budget ({len(result.trace)} candidates tried)")
        self.result = result


def continuum_cutoff(k: int) -> Fraction:
    if not isinstance(k, int) or k < 1:
        raise InputError("k must be a positive integer")
    return Fraction(k + 1, 2 * k + 1)


def search_family_params(k: int, gap, max_j: int = 2560, max_gamma: int = 1 << 16) -> FamilyParams:
    """First feasible (J, gamma) for zstar = (k+1)/(2k+1) + gap.

    J runs over 10 * 2^a and gamma over 4k * 2^b (b >= 1, gamma >= J); a
    floating-point screen discards hopeless candidates and every accepted
    candidate is confirmed by the exact test.
    """
    res = search_family(k, gap, max_j, max_gamma)
    if res.params is None:
        raise SearchExhausted(res)
    return res.params


def search_family(k: int, gap, max_j: int = 2560, max_gamma: int = 1 << 16) -> SearchResult:
    gap = as_fraction(gap)
    if gap <= 0:
        raise InputError("gap must be positive: the limit itself is never attained")
    zstar = continuum_cutoff(k) + gap
    if zstar >= 1:
        raise InputError("gap too large")
    trace: List[Tuple[int, int, float]] = []
    J = 10
    while J <= max_j:
        eps = zstar / J
        if k * eps < Fraction(1, 2):
            b = 1
            while 4 * k * 2 ** b <= max_gamma:
                gamma = 4 * k * 2 ** b
                b += 1
                if gamma < J:
                    continue
                r = _ratio_float(k, J, gamma, float(zstar))
                trace.append((J, gamma, r))
                if r <= 1 + 1e-6:
                    params = FamilyParams(k, eps, gamma, zstar)
                    if check_family_feasibility(params):
                        return SearchResult(params, trace)
        J *= 2
    return SearchResult(None, trace)
