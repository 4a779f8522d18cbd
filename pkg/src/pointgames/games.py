"""Time dependent and time independent point games.

Frames of a TDPG are stored in reverse time: frame 0 is the honest outcome
split ``pb[1,0] + pa[0,1]`` and the last frame is the single final point.

Besides explicit frames a TDPG may hold a :class:`RepeatBlock`, a cycle of
differences applied ``count`` times to the frame before it.  The catalyst
removal below needs millions of identical small steps, and every frame in a
block is an affine function of the repetition index, so a block is checked
exactly by testing each difference once and nonnegativity at the first and
last repetition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, List, Optional, Sequence, Tuple, Union

from .core import (
    HORIZONTAL,
    VERTICAL,
    Config2D,
    PointFn2D,
    check_valid_fn_2d,
    point,
)
from .exactmath import InputError, as_fraction, fraction_str


@dataclass(frozen=True)
class RepeatBlock:
    cycle: Tuple[PointFn2D, ...]
    count: int

    def __post_init__(self):
        if self.count < 0:
            raise InputError("repeat count must be nonnegative")
        if not self.cycle:
            raise InputError("empty repeat cycle")

    @property
    def step(self) -> PointFn2D:
        total = PointFn2D()
        for d in self.cycle:
            total = total + d
        return total

    def __len__(self):
        return len(self.cycle) * self.count


Frame = Union[Config2D, RepeatBlock]


def start_frame(pa, pb) -> PointFn2D:
    return point(1, 0, pb) + point(0, 1, pa)


@dataclass(frozen=True)
class TDPG:
    frames: Tuple[Frame, ...]
    pa: Fraction = Fraction(1, 2)
    pb: Fraction = Fraction(1, 2)

    def __post_init__(self):
        object.__setattr__(self, "pa", as_fraction(self.pa))
        object.__setattr__(self, "pb", as_fraction(self.pb))
        frames = []
        for f in self.frames:
            frames.append(f if isinstance(f, RepeatBlock) else Config2D.of(f) if not isinstance(f, Config2D) else f)
        object.__setattr__(self, "frames", tuple(frames))
        if not frames or isinstance(frames[0], RepeatBlock):
            raise InputError("a TDPG starts with an explicit frame")

    @property
    def has_blocks(self) -> bool:
        return any(isinstance(f, RepeatBlock) for f in self.frames)

    def frame_count(self) -> int:
        return sum(len(f) if isinstance(f, RepeatBlock) else 1 for f in self.frames)

    def expanded(self, limit: Optional[int] = 100_000) -> List[PointFn2D]:
        if limit is not None and self.frame_count() > limit:
            raise InputError(f"TDPG expands to {self.frame_count()} frames, above the limit {limit}")
        out: List[PointFn2D] = []
        for f in self.frames:
            if isinstance(f, RepeatBlock):
                cur = out[-1]
                for _ in range(f.count):
                    for d in f.cycle:
                        cur = cur + d
                        out.append(cur)
            else:
                out.append(f)
        return out

    def final_frame(self) -> PointFn2D:
        cur = None
        for f in self.frames:
            cur = cur + f.step.scaled(f.count) if isinstance(f, RepeatBlock) else f
        return cur

    def differences(self) -> Iterator[Tuple[str, PointFn2D, int]]:
        """(locator, difference, multiplicity) for every transition."""
        prev = None
        for idx, f in enumerate(self.frames):
            if isinstance(f, RepeatBlock):
                if f.count:
                    for t, d in enumerate(f.cycle):
                        yield f"block {idx} step {t}", d, f.count
                prev = prev + f.step.scaled(f.count)
            else:
                if prev is not None:
                    yield f"frame {idx - 1}->{idx}", f - prev, 1
                prev = f


@dataclass(frozen=True)
class TIPG:
    h: PointFn2D
    v: PointFn2D
    pa: Fraction = Fraction(1, 2)
    pb: Fraction = Fraction(1, 2)

    def __post_init__(self):
        object.__setattr__(self, "pa", as_fraction(self.pa))
        object.__setattr__(self, "pb", as_fraction(self.pb))


@dataclass
class GameReport:
    accepted: bool
    final_point: Optional[Tuple[Fraction, Fraction]] = None
    failures: List[Tuple[str, str]] = field(default_factory=list)
    kinds: List[str] = field(default_factory=list)

    @property
    def bias(self) -> Optional[Fraction]:
        if self.final_point is None:
            return None
        return max(self.final_point) - Fraction(1, 2)

    def to_json(self) -> dict:
        fp = None if self.final_point is None else [fraction_str(c) for c in self.final_point]
        return {
            "accepted": self.accepted,
            "final_point": fp,
            "bias": None if self.bias is None else fraction_str(self.bias),
            "failures": [{"where": w, "why": y} for w, y in self.failures],
        }


def _single_point(f: PointFn2D) -> Optional[Tuple[Fraction, Fraction]]:
    if len(f) == 1:
        (xy, w), = f.items()
        if w == 1:
            return xy
    return None


def _describe(lv) -> str:
    parts = []
    for c, v in lv.failures[:3]:
        wit = f", witness lambda={fraction_str(v.sign.witness)}" if v.sign is not None and v.sign.witness is not None else ""
        parts.append(f"line {fraction_str(c)}: {v.reason}{wit}")
    return "; ".join(parts)


def classify_difference(d: PointFn2D, strict: bool = False, executor=None) -> Tuple[str, str]:
    """Direction of a valid difference and a diagnostic when neither holds."""
    hv = check_valid_fn_2d(d, HORIZONTAL, 0, strict, executor)
    if hv.valid:
        vv = check_valid_fn_2d(d, VERTICAL, 0, strict, executor)
        return ("both" if vv.valid else HORIZONTAL), ""
    vv = check_valid_fn_2d(d, VERTICAL, 0, strict, executor)
    if vv.valid:
        return VERTICAL, ""
    return "neither", f"horizontal: {_describe(hv)} | vertical: {_describe(vv)}"


def verify_tdpg(g: TDPG, start: Optional[PointFn2D] = None, strict: bool = False, executor=None) -> GameReport:
    rep = GameReport(False)
    if g.pa < 0 or g.pb < 0 or g.pa + g.pb != 1:
        rep.failures.append(("header", "honest split must be nonnegative and sum to 1"))
    first = start if start is not None else start_frame(g.pa, g.pb)
    if g.frames[0] != first:
        rep.failures.append(("frame 0", f"expected {first}, got {g.frames[0]}"))
    cache = {}
    prev = None
    for idx, f in enumerate(g.frames):
        if isinstance(f, RepeatBlock):
            if f.count == 0:
                continue
            step = f.step
            for m in {0, f.count - 1}:
                cur = prev + step.scaled(m)
                for t, d in enumerate(f.cycle):
                    cur = cur + d
                    if not cur.is_nonnegative():
                        rep.failures.append((f"block {idx} repetition {m} step {t}", "negative weight"))
            for t, d in enumerate(f.cycle):
                kind, why = cache.get(d) or cache.setdefault(d, classify_difference(d, strict, executor))
                rep.kinds.append(kind)
                if kind == "neither":
                    rep.failures.append((f"block {idx} step {t}", why))
            prev = prev + step.scaled(f.count)
            continue
        if prev is not None:
            d = f - prev
            kind, why = cache.get(d) or cache.setdefault(d, classify_difference(d, strict, executor))
            rep.kinds.append(kind)
            if kind == "neither":
                rep.failures.append((f"frame {idx - 1}->{idx}", why))
        prev = f
    fp = _single_point(prev)
    if fp is None:
        rep.failures.append(("final frame", "must be a single point of weight 1"))
    rep.final_point = fp
    rep.accepted = not rep.failures and fp is not None
    return rep


def verify_tipg(t: TIPG, strict: bool = False, executor=None) -> GameReport:
    rep = GameReport(False)
    if t.pa < 0 or t.pb < 0 or t.pa + t.pb != 1:
        rep.failures.append(("header", "honest split must be nonnegative and sum to 1"))
    hv = check_valid_fn_2d(t.h, HORIZONTAL, 0, strict, executor)
    if not hv.valid:
        rep.failures.append(("h", _describe(hv)))
    vv = check_valid_fn_2d(t.v, VERTICAL, 0, strict, executor)
    if not vv.valid:
        rep.failures.append(("v", _describe(vv)))
    rest = t.h + t.v + start_frame(t.pa, t.pb)
    fp = _single_point(rest)
    if fp is None:
        shown = ", ".join(f"[{fraction_str(x)},{fraction_str(y)}]:{fraction_str(w)}" for (x, y), w in list(rest.items())[:6])
        rep.failures.append(("sum", f"h + v + start is not a single unit point: {shown}"))
    rep.final_point = fp
    rep.accepted = not rep.failures and fp is not None
    return rep


def tdpg_to_tipg(g: TDPG) -> TIPG:
    rep = verify_tdpg(g)
    if not rep.accepted:
        raise InputError(f"invalid TDPG: {rep.failures[:2]}")
    h, v = PointFn2D(), PointFn2D()
    for (_, d, mult), kind in zip(g.differences(), rep.kinds):
        part = d.scaled(mult) if mult != 1 else d
        if kind in (HORIZONTAL, "both"):
            h = h + part
        else:
            v = v + part
    return TIPG(h, v, g.pa, g.pb)


# ---------------------------------------------------------------------------
# catalyst construction


@dataclass
class CatalystPlan:
    """Bookkeeping of the TIPG to TDPG construction, kept for reports."""

    c: Fraction
    delta: Fraction
    delta_prime: Fraction
    x2: Fraction
    y2: Fraction
    repetitions: int


def _catalyst_sources(r: PointFn2D, pa: Fraction, pb: Fraction):
    """Per catalyst point: (c_i, moves) building q[x,y] plus junk from
    c_i * (pb[1,0] + pa[0,1]).  Moves are (phase, src, dst-list) in units of
    the unscaled construction."""
    plan = []
    for (x, y), q in r.items():
        if x > 0:
            if x >= 1:
                ci = q / pb
                moves = [(0, (1, 0), [((1, y), q)]), (1, (1, y), [((x, y), q)])]
            else:
                ci = 2 * q / (x * pb)
                m = ci * pb
                moves = [(0, (1, 0), [((1, y), m)]), (1, (1, y), [((x, y), m * x / 2), ((2 - x, y), m * (1 - x / 2))])]
        elif y > 0:
            if y >= 1:
                ci = q / pa
                moves = [(2, (0, 1), [((0, y), q)])]
            else:
                ci = 2 * q / (y * pa)
                m = ci * pa
                moves = [(2, (0, 1), [((0, y), m * y / 2), ((0, 2 - y), m * (1 - y / 2))])]
        else:
            raise InputError("catalyst has weight at the origin")
        plan.append((ci, moves))
    return plan


def tipg_to_tdpg(t: TIPG, eps, check: bool = True) -> TDPG:
    eps = as_fraction(eps)
    if eps <= 0:
        raise InputError("eps must be positive")
    rep = verify_tipg(t) if check else None
    if rep is not None and not rep.accepted:
        raise InputError(f"invalid TIPG: {rep.failures[:2]}")
    beta, alpha = rep.final_point if rep is not None else _single_point(t.h + t.v + start_frame(t.pa, t.pb))
    init = start_frame(t.pa, t.pb)
    final = point(beta, alpha)
    r = t.v.negative_part()
    if not r:
        mid = init + t.v
        return TDPG((init, mid, final), t.pa, t.pb)
    if t.pa <= 0 or t.pb <= 0:
        raise InputError("catalyst creation needs both honest outcomes to have positive weight")
    if t.h[0, 0] != 0 or t.v[0, 0] != 0:
        raise InputError("h and v must vanish at the origin")
    plan, frames = tipg_to_tdpg_plan(t, eps, beta, alpha, r)
    return TDPG(tuple(frames), t.pa, t.pb)


def tipg_to_tdpg_plan(t: TIPG, eps, beta, alpha, r):
    pa, pb = t.pa, t.pb
    init = start_frame(pa, pb)
    parts = _catalyst_sources(r, pa, pb)
    c = sum((ci for ci, _ in parts), Fraction(0))
    # r'' = (r + r') / c where r' is the junk left by catalyst creation
    junk = PointFn2D()
    for ci, moves in parts:
        junk = junk + start_frame(ci * pa, ci * pb)
        for _, src, dst in moves:
            junk = junk + PointFn2D(dst) - point(src[0], src[1], sum(w for _, w in dst))
    r2 = junk.scaled(1 / c)
    x2 = max(x for x, _ in r2.support)
    y2 = max(y for _, y in r2.support)
    if x2 <= beta + eps:
        x2 = beta + 2 * eps
    if y2 <= alpha + eps:
        y2 = alpha + 2 * eps
    dprime = eps / (y2 - alpha)
    delta = dprime * eps / (x2 - beta)
    scale = delta / c

    # phase 1: create the scaled catalyst in three transitions
    frames: List[PointFn2D] = [init]
    cur = init
    for phase in range(3):
        diff = PointFn2D()
        for _, moves in parts:
            for ph, src, dst in moves:
                if ph != phase:
                    continue
                mass = sum(w for _, w in dst)
                diff = diff + PointFn2D([(xy, w * scale) for xy, w in dst]) - point(src[0], src[1], mass * scale)
        if diff:
            cur = cur + diff
            frames.append(cur)
    # phase 2: the catalysed two-step transition, repeated
    a = scale
    reps = math.ceil((1 - delta) / a)
    last = (1 - delta) - (reps - 1) * a
    if reps > 1:
        frames.append(RepeatBlock((t.v.scaled(a), t.h.scaled(a)), reps - 1))
        cur = cur + (t.v + t.h).scaled(a * (reps - 1))
    cur = cur + t.v.scaled(last)
    frames.append(cur)
    cur = cur + t.h.scaled(last)
    frames.append(cur)
    # phase 3: raise the leftovers, then merge twice
    left = cur - point(beta, alpha, 1 - delta)
    v1 = point(beta, y2, dprime - delta) - point(beta, alpha, dprime - delta)
    for (x, y), w in left.items():
        v1 = v1 + point(x, y2, w) - point(x, y, w)
    cur = cur + v1
    frames.append(cur)
    line = PointFn2D([(xy, w) for xy, w in cur.items() if xy[1] == y2])
    h1 = point(beta + eps, y2, dprime) - line + point(beta + eps, alpha, 1 - dprime) - point(beta, alpha, 1 - dprime)
    cur = cur + h1
    frames.append(cur)
    cur = point(beta + eps, alpha + eps)
    frames.append(cur)
    return CatalystPlan(c, delta, dprime, x2, y2, reps), frames


# ---------------------------------------------------------------------------
# strictification


def alternate(g: TDPG, limit: Optional[int] = 100_000) -> List[PointFn2D]:
    """Expanded frames whose transitions alternate vertical, horizontal, ...,
    horizontal.  Consecutive transitions in one direction are combined and
    identity frames pad the ends."""
    frames = g.expanded(limit)
    kinds = [classify_difference(b - a)[0] for a, b in zip(frames, frames[1:])]
    if "neither" in kinds:
        raise InputError("invalid TDPG")
    out = [frames[0]]
    dirs: List[str] = []
    for f, k in zip(frames[1:], kinds):
        if f == out[-1]:
            continue
        if k == "both":
            want = VERTICAL if not dirs or dirs[-1] == HORIZONTAL else HORIZONTAL
            k = want
        if dirs and dirs[-1] == k:
            out[-1] = f
            continue
        if not dirs and k == HORIZONTAL:
            out.append(out[-1])
            dirs.append(VERTICAL)
        out.append(f)
        dirs.append(k)
    if not dirs or dirs[-1] == VERTICAL:
        out.append(out[-1])
        dirs.append(HORIZONTAL)
    return out


def strictify_tdpg(g: TDPG, eps) -> TDPG:
    eps = as_fraction(eps)
    if eps <= 0:
        raise InputError("eps must be positive")
    rep = verify_tdpg(g)
    if not rep.accepted:
        raise InputError(f"invalid TDPG: {rep.failures[:2]}")
    frames = alternate(g)
    n = len(frames) - 1
    out = []
    for i, f in enumerate(frames):
        sx = (i // 2) * eps / n
        sy = ((i + 1) // 2) * eps / n
        out.append(PointFn2D([((x + sx, y + sy), w) for (x, y), w in f.items()]))
    return TDPG(tuple(out), g.pa, g.pb)


# ---------------------------------------------------------------------------
# JSON


def _frame_json(f: Frame) -> dict:
    if isinstance(f, RepeatBlock):
        return {"repeat": {"count": f.count, "cycle": [d.to_json() for d in f.cycle]}}
    return f.to_json()


def _frame_from_json(doc: dict) -> Frame:
    if "repeat" in doc:
        rb = doc["repeat"]
        return RepeatBlock(tuple(PointFn2D.from_json(d) for d in rb["cycle"]), int(rb["count"]))
    return Config2D.from_json(doc)


def game_to_json(g: Union[TDPG, TIPG], header: Optional[dict] = None) -> dict:
    doc = {"type": "tdpg" if isinstance(g, TDPG) else "tipg", "pa": fraction_str(g.pa), "pb": fraction_str(g.pb)}
    if header:
        doc["header"] = header
    if isinstance(g, TDPG):
        doc["frames"] = [_frame_json(f) for f in g.frames]
    else:
        doc["h"] = g.h.to_json()
        doc["v"] = g.v.to_json()
    return doc


def game_from_json(doc: dict) -> Union[TDPG, TIPG]:
    kind = doc.get("type")
    if kind == "tdpg":
        return TDPG(tuple(_frame_from_json(f) for f in doc["frames"]), doc["pa"], doc["pb"])
    if kind == "tipg":
        return TIPG(PointFn2D.from_json(doc["h"]), PointFn2D.from_json(doc["v"]), doc["pa"], doc["pb"])
    raise InputError(f"unknown game type {kind!r}")


# ---------------------------------------------------------------------------
# reference games


def trivial_tdpg(pa=Fraction(1, 2), pb=Fraction(1, 2)) -> TDPG:
    """Alice announces the coin: Bob's point is raised to [1,1] and merged
    with Alice's, final point [pb, 1]."""
    pa, pb = as_fraction(pa), as_fraction(pb)
    f0 = start_frame(pa, pb)
    f1 = point(1, 1, pb) + point(0, 1, pa)
    f2 = point(pb, 1)
    return TDPG((f0, f1, f2), pa, pb)


def spekkens_rudolph_tdpg() -> TDPG:
    """Split, raise, merge, merge with final point [3/4, 2/3]."""
    half = Fraction(1, 2)
    x = Fraction(3, 4)
    f0 = start_frame(half, half)
    f1 = point(x, 0, Fraction(1, 3)) + point(3, 0, Fraction(1, 6)) + point(0, 1, half)
    f2 = point(x, 0, Fraction(1, 3)) + point(3, 1, Fraction(1, 6)) + point(0, 1, half)
    f3 = point(x, 0, Fraction(1, 3)) + point(x, 1, Fraction(2, 3))
    f4 = point(x, Fraction(2, 3))
    return TDPG((f0, f1, f2, f3, f4), half, half)
