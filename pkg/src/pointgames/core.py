"""Finitely supported point functions, validity predicates and basic moves.

A 1-D function ``d`` is valid when its weights sum to zero and
sum_z d(z) * (-1/(lam+z)) >= 0 for every lam in (shift, inf).  A 2-D function
is horizontally (vertically) valid when every line of constant y (x) is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

from .exactmath import (
    InputError,
    SignVerdict,
    as_fraction,
    clear_denominators,
    fraction_str,
    sign_on_shifted_axis,
)

HORIZONTAL = "horizontal"
VERTICAL = "vertical"
DIRECTIONS = (HORIZONTAL, VERTICAL)

# lines with more points than this take the one-sided shortcut when it applies
FAST_PATH_MIN_POINTS = 9


def _check_direction(direction: str) -> str:
    if direction not in DIRECTIONS:
        raise InputError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    return direction


class PointFn1D:
    """Immutable map from coordinate z >= 0 to a rational weight."""

    __slots__ = ("_w",)

    def __init__(self, items=None):
        acc: Dict[Fraction, Fraction] = {}
        if items is not None:
            pairs = items.items() if isinstance(items, (Mapping, PointFn1D)) else items
            for z, w in pairs:
                z, w = as_fraction(z), as_fraction(w)
                if z < 0:
                    raise InputError(f"negative coordinate {z}")
                acc[z] = acc.get(z, Fraction(0)) + w
        self._w = {z: w for z, w in sorted(acc.items()) if w != 0}

    def items(self):
        return self._w.items()

    @property
    def support(self) -> Tuple[Fraction, ...]:
        return tuple(self._w)

    def __getitem__(self, z) -> Fraction:
        return self._w.get(as_fraction(z), Fraction(0))

    def __len__(self):
        return len(self._w)

    def __bool__(self):
        return bool(self._w)

    def total(self) -> Fraction:
        return sum(self._w.values(), Fraction(0))

    def first_moment(self) -> Fraction:
        return sum((z * w for z, w in self._w.items()), Fraction(0))

    def is_nonnegative(self) -> bool:
        return all(w > 0 for w in self._w.values())

    def __add__(self, other: "PointFn1D") -> "PointFn1D":
        return PointFn1D(list(self.items()) + list(other.items()))

    def __neg__(self) -> "PointFn1D":
        return PointFn1D((z, -w) for z, w in self.items())

    def __sub__(self, other: "PointFn1D") -> "PointFn1D":
        return self + (-other)

    def scaled(self, a) -> "PointFn1D":
        a = as_fraction(a)
        return PointFn1D((z, a * w) for z, w in self.items())

    def __eq__(self, other):
        return isinstance(other, PointFn1D) and self._w == other._w

    def __hash__(self):
        return hash(tuple(self._w.items()))

    def __repr__(self):
        body = " ".join(f"{'+' if w > 0 else '-'}{fraction_str(abs(w))}[{fraction_str(z)}]" for z, w in self.items())
        return f"PointFn1D({body or '0'})"

    def to_json(self) -> dict:
        return {"points": [{"x": fraction_str(z), "w": fraction_str(w)} for z, w in self.items()]}

    @classmethod
    def from_json(cls, doc: dict) -> "PointFn1D":
        return cls((p["x"], p["w"]) for p in doc["points"])


class PointFn2D:
    """Immutable map from (x, y), both >= 0, to a rational weight."""

    __slots__ = ("_w",)

    def __init__(self, items=None):
        acc: Dict[Tuple[Fraction, Fraction], Fraction] = {}
        if items is not None:
            pairs = items.items() if isinstance(items, (Mapping, PointFn2D)) else items
            for (x, y), w in pairs:
                key = (as_fraction(x), as_fraction(y))
                if key[0] < 0 or key[1] < 0:
                    raise InputError(f"negative coordinate {key}")
                acc[key] = acc.get(key, Fraction(0)) + as_fraction(w)
        # canonical order is by (y, x)
        self._w = {k: w for k, w in sorted(acc.items(), key=lambda kv: (kv[0][1], kv[0][0])) if w != 0}

    @classmethod
    def _raw(cls, w: dict) -> "PointFn2D":
        obj = cls.__new__(cls)
        obj._w = {k: v for k, v in sorted(w.items(), key=lambda kv: (kv[0][1], kv[0][0])) if v != 0}
        return obj

    def items(self):
        return self._w.items()

    @property
    def support(self):
        return tuple(self._w)

    def __getitem__(self, xy) -> Fraction:
        x, y = xy
        return self._w.get((as_fraction(x), as_fraction(y)), Fraction(0))

    def __len__(self):
        return len(self._w)

    def __bool__(self):
        return bool(self._w)

    def total(self) -> Fraction:
        return sum(self._w.values(), Fraction(0))

    def is_nonnegative(self) -> bool:
        return all(w > 0 for w in self._w.values())

    def __add__(self, other: "PointFn2D") -> "PointFn2D":
        acc = dict(self._w)
        for k, w in other.items():
            acc[k] = acc.get(k, Fraction(0)) + w
        return PointFn2D._raw(acc)

    def __neg__(self) -> "PointFn2D":
        return PointFn2D._raw({k: -w for k, w in self.items()})

    def __sub__(self, other: "PointFn2D") -> "PointFn2D":
        return self + (-other)

    def scaled(self, a) -> "PointFn2D":
        a = as_fraction(a)
        return PointFn2D._raw({k: a * w for k, w in self.items()})

    def transpose(self) -> "PointFn2D":
        return PointFn2D._raw({(y, x): w for (x, y), w in self.items()})

    def positive_part(self) -> "PointFn2D":
        return PointFn2D._raw({k: w for k, w in self.items() if w > 0})

    def negative_part(self) -> "PointFn2D":
        """Magnitude of the negative part, as a nonnegative function."""
        return PointFn2D._raw({k: -w for k, w in self.items() if w < 0})

    def lines(self, direction: str) -> Dict[Fraction, PointFn1D]:
        """Group into 1-D functions: by y for horizontal, by x for vertical."""
        _check_direction(direction)
        groups: Dict[Fraction, list] = {}
        for (x, y), w in self.items():
            if direction == HORIZONTAL:
                groups.setdefault(y, []).append((x, w))
            else:
                groups.setdefault(x, []).append((y, w))
        return {c: PointFn1D(pts) for c, pts in sorted(groups.items())}

    def __eq__(self, other):
        return isinstance(other, PointFn2D) and self._w == other._w

    def __hash__(self):
        return hash(tuple(self._w.items()))

    def __repr__(self):
        body = " ".join(
            f"{'+' if w > 0 else '-'}{fraction_str(abs(w))}[{fraction_str(x)},{fraction_str(y)}]"
            for (x, y), w in self.items()
        )
        return f"{type(self).__name__}({body or '0'})"

    def to_json(self) -> dict:
        return {
            "points": [
                {"x": fraction_str(x), "y": fraction_str(y), "w": fraction_str(w)} for (x, y), w in self.items()
            ]
        }

    @classmethod
    def from_json(cls, doc: dict):
        return cls((((p["x"], p["y"]), p["w"]) for p in doc["points"]))


class Config2D(PointFn2D):
    """A configuration of points: every stored weight is strictly positive."""

    __slots__ = ()

    def __init__(self, items=None):
        super().__init__(items)
        if not self.is_nonnegative():
            bad = [k for k, w in self.items() if w < 0]
            raise InputError(f"configuration has negative weight at {bad[:3]}")

    @classmethod
    def of(cls, fn: PointFn2D) -> "Config2D":
        if not fn.is_nonnegative():
            raise InputError("configuration has negative weight")
        obj = cls.__new__(cls)
        obj._w = dict(fn.items())
        return obj


def point(x, y, w=1) -> PointFn2D:
    return PointFn2D([((x, y), w)])


def scale_fn(d, a):
    a = as_fraction(a)
    if a <= 0:
        raise InputError("scale factor must be positive")
    return d.scaled(a)


def add_fn(d1, d2):
    return d1 + d2


# ---------------------------------------------------------------------------
# validity of 1-D functions


@dataclass(frozen=True)
class FnVerdict:
    valid: bool
    conserved: bool
    strict: bool
    sign: Optional[SignVerdict] = None
    reason: str = ""

    def __bool__(self):
        return self.valid


def _integer_normalized(d: PointFn1D, shift: Fraction):
    """Rescale coordinates and weights to integers.  Validity is invariant
    under z -> s z (with the shift scaled alike) and under positive weight
    scaling, and integer data keeps the polynomial arithmetic cheap."""
    zden = reduce(math.lcm, (z.denominator for z in d.support), shift.denominator)
    wden = reduce(math.lcm, (w.denominator for _, w in d.items()), 1)
    pts = [(int(z * zden), int(w * wden)) for z, w in d.items()]
    g = reduce(math.gcd, (w for _, w in pts), 0)
    pts = [(z, w // g) for z, w in pts]
    return pts, shift * zden


def _one_sided(d: PointFn1D) -> Optional[Tuple[bool, str]]:
    """Exact verdict when only one point carries negative weight (a split or
    raise) or only one carries positive weight (a merge or raise)."""
    neg = [(z, -w) for z, w in d.items() if w < 0]
    pos = [(z, w) for z, w in d.items() if w > 0]
    if len(neg) == 1:
        x, mass = neg[0]
        if x == 0:
            return True, "mass leaves 0 only upward"
        if any(z == 0 for z, _ in pos):
            return False, "mass moved down to 0"
        ok = sum((w / z for z, w in pos), Fraction(0)) <= mass / x
        return ok, "split" if ok else "split increases sum of weight/z"
    if len(pos) == 1:
        y, mass = pos[0]
        mean = sum((z * w for z, w in neg), Fraction(0)) / mass
        ok = y >= mean
        return ok, "merge" if ok else "merge target below the mean"
    return None


def check_valid_fn_1d(d: PointFn1D, shift=0, strict: bool = False) -> FnVerdict:
    """Exact validity of a 1-D function on lam in (shift, inf).

    Strict mode also asks for a strictly positive numerator and a strictly
    increasing mean, i.e. strict inequality against every non-constant
    extremal monotone function.
    """
    shift = as_fraction(shift)
    if shift < 0:
        raise InputError("shift must be nonnegative")
    conserved = d.total() == 0
    if not conserved:
        return FnVerdict(False, False, False, None, f"weights sum to {fraction_str(d.total())}")
    if not d:
        return FnVerdict(True, True, False, None, "zero function")
    if not strict and shift == 0 and len(d) >= FAST_PATH_MIN_POINTS:
        quick = _one_sided(d)
        if quick is not None:
            return FnVerdict(quick[0], True, False, None, quick[1])
    pts, lam = _integer_normalized(d, shift)
    sign = sign_on_shifted_axis(clear_denominators(pts), lam)
    if not sign.nonnegative:
        return FnVerdict(False, True, False, sign, "numerator negative somewhere")
    is_strict = sign.strictly_positive and d.first_moment() > 0
    if strict and not is_strict:
        return FnVerdict(False, True, False, sign, "not strictly valid")
    return FnVerdict(True, True, is_strict, sign, "")


def check_transition_1d(p: PointFn1D, q: PointFn1D, strict: bool = False) -> FnVerdict:
    if not (p.is_nonnegative() and q.is_nonnegative()):
        raise InputError("transition endpoints must be nonnegative")
    return check_valid_fn_1d(q - p, 0, strict)


# ---------------------------------------------------------------------------
# 2-D


@dataclass
class LinesVerdict:
    direction: str
    valid: bool
    failures: List[Tuple[Fraction, FnVerdict]] = field(default_factory=list)
    strict: bool = False

    def __bool__(self):
        return self.valid


def check_valid_fn_2d(d: PointFn2D, direction: str, shift=0, strict: bool = False, executor=None) -> LinesVerdict:
    """Line-by-line check along ``direction``.  Lines absent from the support
    are trivially valid."""
    lines = d.lines(direction)
    keys = list(lines)
    if executor is not None and len(keys) > 1:
        verdicts = list(executor.map(_line_job, [(lines[c], shift, strict) for c in keys]))
    else:
        verdicts = [check_valid_fn_1d(lines[c], shift, strict) for c in keys]
    failures = [(c, v) for c, v in zip(keys, verdicts) if not v.valid]
    return LinesVerdict(direction, not failures, failures, all(v.strict for v in verdicts) and not failures)


def _line_job(args):
    fn, shift, strict = args
    return check_valid_fn_1d(fn, shift, strict)


@dataclass
class TransitionVerdict:
    horizontal: LinesVerdict
    vertical: LinesVerdict

    @property
    def kind(self) -> str:
        h, v = self.horizontal.valid, self.vertical.valid
        return {(True, True): "both", (True, False): HORIZONTAL, (False, True): VERTICAL}.get((h, v), "neither")

    def __bool__(self):
        return self.horizontal.valid or self.vertical.valid


def check_transition_2d(p: PointFn2D, q: PointFn2D, strict: bool = False) -> TransitionVerdict:
    if not (p.is_nonnegative() and q.is_nonnegative()):
        raise InputError("transition endpoints must be nonnegative")
    d = q - p
    return TransitionVerdict(check_valid_fn_2d(d, HORIZONTAL, 0, strict), check_valid_fn_2d(d, VERTICAL, 0, strict))


# ---------------------------------------------------------------------------
# basic moves


@dataclass(frozen=True)
class MoveSpec:
    """A raise, merge or split on one line.

    ``line`` is the fixed coordinate (y for horizontal moves, x for vertical
    ones); ``src`` and ``dst`` list (coordinate along the line, weight).
    """

    kind: str
    direction: str
    line: Fraction
    src: Tuple[Tuple[Fraction, Fraction], ...]
    dst: Tuple[Tuple[Fraction, Fraction], ...]

    def __post_init__(self):
        if self.kind not in ("raise", "merge", "split"):
            raise InputError(f"unknown move kind {self.kind!r}")
        _check_direction(self.direction)
        object.__setattr__(self, "line", as_fraction(self.line))
        object.__setattr__(self, "src", tuple((as_fraction(z), as_fraction(w)) for z, w in self.src))
        object.__setattr__(self, "dst", tuple((as_fraction(z), as_fraction(w)) for z, w in self.dst))
        if any(w <= 0 for _, w in self.src + self.dst):
            raise InputError("move weights must be positive")
        if any(z < 0 for z, _ in self.src + self.dst):
            raise InputError("negative coordinate in move")
        self._check_equations()

    def _check_equations(self):
        ws = sum((w for _, w in self.src), Fraction(0))
        if ws != sum((w for _, w in self.dst), Fraction(0)):
            raise InputError("move does not conserve weight")
        if self.kind == "raise":
            if len(self.src) != 1 or len(self.dst) != 1 or self.dst[0][0] < self.src[0][0]:
                raise InputError("raise needs one source and one target at or above it")
        elif self.kind == "merge":
            if len(self.dst) != 1 or len(self.src) < 2:
                raise InputError("merge needs at least two sources and one target")
            mean = sum((z * w for z, w in self.src), Fraction(0)) / ws
            if self.dst[0][0] != mean:
                raise InputError(f"merge target {self.dst[0][0]} is not the weighted mean {mean}")
        else:
            if len(self.src) != 1 or len(self.dst) < 2:
                raise InputError("split needs one source and at least two targets")
            z = self.src[0][0]
            if z == 0:
                if any(t != 0 for t, _ in self.dst):
                    raise InputError("a point at 0 can only split into points at 0")
            else:
                if any(t == 0 for t, _ in self.dst):
                    raise InputError("split target at 0 from a positive point")
                if sum((w / t for t, w in self.dst), Fraction(0)) != ws / z:
                    raise InputError("split does not conserve sum of weight/z")

    def _xy(self, z):
        return (z, self.line) if self.direction == HORIZONTAL else (self.line, z)

    def delta(self) -> PointFn2D:
        items = [(self._xy(z), -w) for z, w in self.src] + [(self._xy(z), w) for z, w in self.dst]
        return PointFn2D(items)


def raise_move(direction, line, z, z_new, w) -> MoveSpec:
    return MoveSpec("raise", direction, line, ((z, w),), ((z_new, w),))


def merge_move(direction, line, sources) -> MoveSpec:
    sources = [(as_fraction(z), as_fraction(w)) for z, w in sources]
    ws = sum(w for _, w in sources)
    mean = sum(z * w for z, w in sources) / ws
    return MoveSpec("merge", direction, line, tuple(sources), ((mean, ws),))


def split_move(direction, line, z, targets) -> MoveSpec:
    targets = tuple((as_fraction(t), as_fraction(w)) for t, w in targets)
    return MoveSpec("split", direction, line, ((z, sum(w for _, w in targets)),), targets)


def split_targets(z, w1, w2, z1) -> Tuple[Fraction, Fraction]:
    """Given a split of weight w1+w2 at z with w1 sent to z1, solve for the
    second target so that sum of weight/z is conserved."""
    z, w1, w2, z1 = map(as_fraction, (z, w1, w2, z1))
    rest = (w1 + w2) / z - w1 / z1
    if rest <= 0:
        raise InputError("no valid second target")
    return z1, w2 / rest


def apply_move(c: PointFn2D, m: MoveSpec) -> Config2D:
    for z, w in m.src:
        have = c[m._xy(z)]
        if have < w:
            raise InputError(f"insufficient weight at {m._xy(z)}: have {have}, need {w}")
    return Config2D.of(c + m.delta())
