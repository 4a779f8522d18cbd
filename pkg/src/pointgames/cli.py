"""Command-line front end.

Exit codes: 0 accepted, 1 rejected by a verifier, 2 usage or input error.
"""

from __future__ import annotations

import json
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from typing import Optional

import click

from . import __version__
from .exactmath import InputError, as_fraction, fraction_str
from .games import (
    TDPG,
    TIPG,
    game_from_json,
    game_to_json,
    spekkens_rudolph_tdpg,
    tdpg_to_tipg,
    tipg_to_tdpg,
    trivial_tdpg,
    verify_tdpg,
    verify_tipg,
)

REPORT_SCHEMA = 1
FIXTURES = {"trivial": trivial_tdpg, "spekkens-rudolph": spekkens_rudolph_tdpg}


class Rejected(Exception):
    pass


def _dump(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2)


def _emit(ctx, report: dict, lines):
    report = {"schema": REPORT_SCHEMA, **report}
    if ctx.obj["json"]:
        click.echo(_dump(report))
    else:
        for line in lines:
            click.echo(line)


def _write(path: Optional[str], doc: dict):
    text = _dump(doc) + "\n"
    if path is None or path == "-":
        click.echo(text, nl=False)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _load(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _load_game(path: str):
    if path in FIXTURES:
        return FIXTURES[path]()
    try:
        return game_from_json(_load(path))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"malformed game file {path}: {exc}") from exc


@contextmanager
def _executor(jobs: int):
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            yield ex
    else:
        yield None


def _point(fp) -> str:
    return "(" + ", ".join(fraction_str(c) for c in fp) + ")"


def _game_lines(kind: str, rep) -> list:
    if rep.accepted:
        return [f"{kind}: accepted", f"final point {_point(rep.final_point)}", f"bias {fraction_str(rep.bias)}"]
    out = [f"{kind}: rejected"]
    out += [f"  {where}: {why}" for where, why in rep.failures]
    return out


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__)
@click.option("--json", "as_json", is_flag=True, help="Machine-readable report on stdout.")
@click.option("--seed", default=0, show_default=True, help="Seed for randomized subroutines.")
@click.option("--jobs", default=1, show_default=True, help="Worker processes for line checks.")
@click.option("--tol", default=1e-8, show_default=True, help="Slack for floating-point protocol checks.")
@click.pass_context
def main(ctx, as_json, seed, jobs, tol):
    """Point-game verification, generation and compilation."""
    ctx.ensure_object(dict)
    ctx.obj.update(json=as_json, seed=seed, jobs=max(1, jobs), tol=tol)


@main.command("verify-tdpg")
@click.argument("path")
@click.option("--strict", is_flag=True, help="Require strictly valid transitions.")
@click.pass_context
def verify_tdpg_cmd(ctx, path, strict):
    """Verify a time-dependent point game file."""
    g = _load_game(path)
    if not isinstance(g, TDPG):
        raise InputError(f"{path} holds a time-independent game; use verify-tipg")
    with _executor(ctx.obj["jobs"]) as ex:
        rep = verify_tdpg(g, strict=strict, executor=ex)
    _emit(ctx, {"command": "verify-tdpg", **rep.to_json()}, _game_lines("tdpg", rep))
    if not rep.accepted:
        raise Rejected


@main.command("verify-tipg")
@click.argument("path")
@click.pass_context
def verify_tipg_cmd(ctx, path):
    """Verify a time-independent point game file."""
    g = _load_game(path)
    if not isinstance(g, TIPG):
        raise InputError(f"{path} holds a time-dependent game; use verify-tdpg")
    with _executor(ctx.obj["jobs"]) as ex:
        rep = verify_tipg(g, executor=ex)
    _emit(ctx, {"command": "verify-tipg", **rep.to_json()}, _game_lines("tipg", rep))
    if not rep.accepted:
        raise Rejected


@main.command("gen-sixth")
@click.option("--gamma", default=100, show_default=True, type=int)
@click.option("-o", "--output", default=None, help="Output path (default stdout).")
def gen_sixth(gamma, output):
    """Write the bias-1/6 ladder game."""
    from .ladders import build_bias_sixth_tipg, sixth_delta

    t = build_bias_sixth_tipg(gamma)
    header = {"generator": "sixth", "gamma": gamma, "delta": fraction_str(sixth_delta(gamma))}
    _write(output, game_to_json(t, header))


@main.command("search-family")
@click.option("--k", "k", required=True, type=int)
@click.option("--gap", required=True)
@click.option("--max-j", default=2560, show_default=True)
@click.option("--max-gamma", default=1 << 16, show_default=True)
@click.pass_context
def search_family_cmd(ctx, k, gap, max_j, max_gamma):
    """Search parameters of the k-th ladder family."""
    from .ladders import search_family

    res = search_family(k, as_fraction(gap), max_j, max_gamma)
    report = {
        "command": "search-family",
        "found": res.found,
        "params": res.params.header() if res.found else None,
        "candidates": len(res.trace),
    }
    lines = [f"candidates screened: {len(res.trace)}"]
    lines.append(f"found {res.params.header()}" if res.found else "no feasible parameters within budget")
    _emit(ctx, report, lines)
    if not res.found:
        raise Rejected


@main.command("gen-family")
@click.option("--k", "k", required=True, type=int)
@click.option("--gap", required=True)
@click.option("--max-j", default=2560, show_default=True)
@click.option("--max-gamma", default=1 << 16, show_default=True)
@click.option("-o", "--output", default=None)
def gen_family(k, gap, max_j, max_gamma, output):
    """Search parameters and write the family game."""
    from .ladders import build_family_tipg, search_family_params

    params = search_family_params(k, as_fraction(gap), max_j, max_gamma)
    fam = build_family_tipg(params)
    _write(output, game_to_json(fam.tipg(), {"generator": "family", **params.header()}))


@main.command("convert")
@click.argument("path")
@click.option("--eps", default="1/100", show_default=True, help="Final-point slack for TIPG to TDPG.")
@click.option("-o", "--output", default=None)
def convert(path, eps, output):
    """TIPG to TDPG (catalyst construction) or TDPG to TIPG."""
    g = _load_game(path)
    if isinstance(g, TIPG):
        out = tipg_to_tdpg(g, as_fraction(eps))
        header = {"converted_from": "tipg", "eps": fraction_str(as_fraction(eps))}
    else:
        out = tdpg_to_tipg(g)
        header = {"converted_from": "tdpg"}
    _write(output, game_to_json(out, header))


@main.command("compile")
@click.argument("path")
@click.option("--eps", default="1/100", show_default=True, help="Strictification slack.")
@click.option("-o", "--output", default=None)
def compile_cmd(path, eps, output):
    """Compile a TDPG into a protocol with projections plus certificate."""
    from .compiler import compile_tdpg, ubp_to_json

    g = _load_game(path)
    if not isinstance(g, TDPG):
        raise InputError("compile expects a time-dependent game")
    res = compile_tdpg(g, eps=as_fraction(eps))
    _write(output, ubp_to_json(res.ubp))


def _ubp_lines(rep) -> list:
    lines = [f"ubp: {'accepted' if rep.accepted else 'rejected'}"]
    if rep.honest is not None:
        lines.append(f"honest outcome ({rep.honest[0]:.12g}, {rep.honest[1]:.12g})")
    lines.append(f"min slack {rep.min_slack:.3e}")
    lines += [f"  {n}: {v:.3e}" for n, v, _ in rep.failures]
    return lines


@main.command("verify-ubp")
@click.argument("path")
@click.pass_context
def verify_ubp_cmd(ctx, path):
    """Verify a compiled protocol and its certificate."""
    from .compiler import ubp_from_json, verify_ubp

    try:
        u = ubp_from_json(_load(path))
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed protocol file: {exc}") from exc
    rep = verify_ubp(u, tol=ctx.obj["tol"])
    _emit(ctx, {"command": "verify-ubp", "bound": list(u.bound), **rep.to_json()}, _ubp_lines(rep) + [f"bound {tuple(u.bound)}"])
    if not rep.accepted:
        raise Rejected


@main.command("ddb")
@click.option("--p", "p", required=True, help="Comma-separated Boom probabilities, last one 1.")
@click.option("--report", is_flag=True, help="Include dual certificate and see-saw.")
@click.option("--iters", default=400, show_default=True)
@click.pass_context
def ddb_cmd(ctx, p, report, iters):
    """Dip-Dip-Boom statistics and cheating bounds."""
    from .ddb import (
        DDBGame,
        _num_json,
        ddb_dual_bound_pb,
        ddb_dual_certificate_check,
        ddb_primal_seesaw_pb,
        ddb_recursion,
        ddb_simulate_honest,
    )

    g = DDBGame.parse(p)
    rec = ddb_recursion(g)
    sim = ddb_simulate_honest(g)
    doc = {
        "command": "ddb",
        "game": g.to_json(),
        "recursion": [{"i": i, "pa": _num_json(a), "pb": _num_json(b), "pu": _num_json(u)} for i, a, b, u in rec.rows()],
        "fair": g.fair,
        "simulated_outcome": list(sim.outcome),
        "max_abort": sim.max_abort,
    }
    lines = ["i  P_A  P_B  P_U"]
    lines += [f"{i}  {_num_json(a)}  {_num_json(b)}  {_num_json(u)}" for i, a, b, u in rec.rows()]
    lines.append(f"fair: {g.fair}")
    lines.append(f"simulated outcome ({sim.outcome[0]:.12g}, {sim.outcome[1]:.12g}), max abort {sim.max_abort:.1e}")
    ok = True
    if report:
        if g.fair:
            u0 = ddb_dual_bound_pb(g)
            doc["dual_bound_pb"] = _num_json(u0)
            lines.append(f"dual bound on cheating Bob: {_num_json(u0)} ~ {float(u0):.12g}")
            if g.exact:
                cert = ddb_dual_certificate_check(g)
                doc["certificate"] = cert.to_json()
                lines.append(f"certificate: {'accepted' if cert.accepted else 'rejected'}")
                lines += [f"  {f}" for f in cert.failures]
                ok = cert.accepted
            else:
                doc["certificate"] = None
                lines.append("certificate: skipped (irrational parameters)")
        else:
            doc["dual_bound_pb"] = None
            lines.append("dual bound: not available, the game is not fair")
        if g.n <= 7:
            ss = ddb_primal_seesaw_pb(g, iters=iters, seed=ctx.obj["seed"])
            doc["seesaw_pb"] = round(ss.value, 12)
            lines.append(f"see-saw lower bound: {ss.value:.12g}")
    _emit(ctx, doc, lines)
    if not ok:
        raise Rejected


@main.command("roundtrip")
@click.argument("source", default="spekkens-rudolph")
@click.option("--eps", default="1/100", show_default=True)
@click.pass_context
def roundtrip(ctx, source, eps):
    """Fixture or file through verify, convert, compile, verify-ubp and back."""
    from .compiler import (
        compile_tdpg,
        frame_distance,
        ubp_from_json,
        ubp_to_json,
        ubp_to_tdpg,
        verify_tdpg_tolerant,
        verify_ubp,
    )

    g = _load_game(source)
    if not isinstance(g, TDPG):
        raise InputError("roundtrip starts from a time-dependent game")
    eps = as_fraction(eps)
    steps = []

    def step(name, ok, detail=""):
        steps.append({"step": name, "ok": bool(ok), "detail": detail})
        return ok

    rep = verify_tdpg(g)
    good = step("verify", rep.accepted, _point(rep.final_point) if rep.accepted else str(rep.failures[:1]))
    if good:
        t = tdpg_to_tipg(g)
        trep = verify_tipg(t)
        good = step("convert", trep.accepted, _point(trep.final_point) if trep.accepted else "")
    if good:
        res = compile_tdpg(g, eps=eps)
        # serialize and reload so the file format is part of the loop
        u = ubp_from_json(json.loads(_dump(ubp_to_json(res.ubp))))
        step("compile", True, f"dims {tuple(u.protocol.dims)}")
        urep = verify_ubp(u, tol=ctx.obj["tol"])
        good = step("verify-ubp", urep.accepted, f"min slack {urep.min_slack:.3e}")
    if good:
        back, _ = ubp_to_tdpg(u)
        dist = max(frame_distance(a, b) for a, b in zip(back.frames, res.frames))
        good = step("ubp-to-tdpg", dist <= 1e-6 and len(back.frames) == len(res.frames), f"max weight error {dist:.1e}")
    if good:
        tol_ok, why = verify_tdpg_tolerant(back)
        exact = verify_tdpg(back)
        good = step("verify-recovered", tol_ok and exact.accepted, _point(exact.final_point) if exact.accepted else "; ".join(why[:2]))
    _emit(ctx, {"command": "roundtrip", "source": source, "accepted": bool(good), "steps": steps},
          [f"{s['step']}: {'ok' if s['ok'] else 'FAILED'} {s['detail']}".rstrip() for s in steps])
    if not good:
        raise Rejected


def run(argv=None) -> int:
    try:
        main.main(args=argv, prog_name="pointgames", standalone_mode=False)
    except Rejected:
        return 1
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return 2
    except click.exceptions.Abort:
        return 2
    except (InputError, FileNotFoundError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except RuntimeError as exc:
        # search budget exhausted or a transition that cannot be realized
        click.echo(f"failed: {exc}", err=True)
        return 1
    return 0


def entry():
    sys.exit(run())
