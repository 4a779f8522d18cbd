"""Random configurations, basic moves and adversarial mutations."""

from __future__ import annotations

from fractions import Fraction as F
from typing import Tuple

import numpy as np

from pointgames.core import (
    HORIZONTAL,
    VERTICAL,
    Config2D,
    PointFn1D,
    PointFn2D,
    apply_move,
    merge_move,
    raise_move,
    split_move,
    split_targets,
)


def rfrac(rng, lo: int, hi: int, den: int = 6) -> F:
    return F(int(rng.integers(lo * den, hi * den + 1)), den)


def random_config(rng, size: int = None) -> Config2D:
    size = size or int(rng.integers(2, 6))
    pts = {}
    for _ in range(size):
        xy = (rfrac(rng, 0, 3, 3), rfrac(rng, 0, 3, 3))
        pts[xy] = pts.get(xy, F(0)) + F(int(rng.integers(1, 10)), 12)
    return Config2D.of(PointFn2D(pts))


def _along(direction, xy):
    return (xy[0], xy[1]) if direction == HORIZONTAL else (xy[1], xy[0])


def random_move(rng, c: Config2D):
    """A raise, merge or split on c, with its direction."""
    direction = HORIZONTAL if rng.integers(2) else VERTICAL
    keys = list(c.support) if hasattr(c, "support") else [k for k, _ in c.items()]
    xy = keys[int(rng.integers(len(keys)))]
    z, line = _along(direction, xy)
    have = c[xy]
    w = have * F(int(rng.integers(1, 5)), 4)
    kind = ["raise", "merge", "split"][int(rng.integers(3))]
    if kind == "merge":
        mates = [k for k in keys if k != xy and _along(direction, k)[1] == line]
        if mates:
            other = mates[int(rng.integers(len(mates)))]
            w2 = c[other] * F(int(rng.integers(1, 5)), 4)
            return merge_move(direction, line, [(z, w), (_along(direction, other)[0], w2)]), direction
        kind = "raise"
    if kind == "split" and z > 0:
        w1 = w * F(int(rng.integers(1, 4)), 4)
        w2 = w - w1
        lo = w1 * z / w  # z1 must exceed this
        z1 = lo + (z - lo) * F(int(rng.integers(1, 8)), 4) + F(1, 24)
        if z1 == z:
            z1 += F(1, 12)
        t1, t2 = split_targets(z, w1, w2, z1)
        if t1 != t2:
            return split_move(direction, line, z, [(t1, w1), (t2, w2)]), direction
    return raise_move(direction, line, z, z + rfrac(rng, 0, 2, 4) + F(1, 4), w), direction


def random_valid_transition(rng) -> Tuple[Config2D, Config2D, str]:
    c = random_config(rng)
    m, direction = random_move(rng, c)
    return c, apply_move(c, m), direction


def mutate(rng, p: Config2D, q: Config2D) -> Tuple[PointFn2D, PointFn2D, str]:
    """(source, broken target, kind); the pair is never a valid transition."""
    kind = ["decrease", "left", "down", "extra", "low-merge"][int(rng.integers(5))]
    if kind in ("left", "down"):
        i = 0 if kind == "left" else 1
        movable = [k for k in p.support if k[i] > 0]
        if movable:
            src = movable[int(rng.integers(len(movable)))]
            moved = list(src)
            moved[i] = src[i] * F(int(rng.integers(0, 4)), 4)
            w = p[src]
            return p, p - PointFn2D([(src, w)]) + PointFn2D([(tuple(moved), w)]), kind
        kind = "extra"
    keys = list(q.support)
    xy = keys[int(rng.integers(len(keys)))]
    if kind == "decrease":
        return p, q - PointFn2D([(xy, q[xy] * F(int(rng.integers(1, 4)), 4))]), kind
    if kind == "extra":
        return p, q + PointFn2D([(xy, F(int(rng.integers(1, 5)), 7))]), kind
    # two points on one line merged strictly below their weighted mean
    lo, hi = rfrac(rng, 0, 2, 3), rfrac(rng, 3, 5, 3)
    line = rfrac(rng, 0, 3, 3)
    mean = (lo + hi) / 2
    target = mean - (mean - lo) * F(int(rng.integers(1, 4)), 4)
    if rng.integers(2):
        a, b, t = (lo, line), (hi, line), (target, line)
    else:
        a, b, t = (line, lo), (line, hi), (line, target)
    src = p + PointFn2D([(a, F(1, 4)), (b, F(1, 4))])
    return src, p + PointFn2D([(t, F(1, 2))]), kind


def random_1d_valid(rng) -> PointFn1D:
    """q - p for a random raise, merge or split on one line."""
    p, q, direction = random_valid_transition(rng)
    d = q - p
    lines = d.lines(direction)
    for _, fn in lines.items():
        if fn:
            return fn
    return PointFn1D()


def random_signed_1d(rng) -> PointFn1D:
    """Conserving function with random signs, valid or not."""
    k = int(rng.integers(2, 6))
    pts = {}
    for _ in range(k):
        pts[rfrac(rng, 0, 4, 4)] = F(int(rng.integers(-6, 7)), 5)
    items = list(pts.items())
    s = sum(w for _, w in items)
    z0, w0 = items[0]
    items[0] = (z0, w0 - s)
    return PointFn1D(items)
