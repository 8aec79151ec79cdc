"""Command-line entry point: ``garnier <subcommand> [--json]``.

Exit codes: 0 all requested checks pass, 1 a check failed, 2 usage error,
3 internal error.
"""
from __future__ import annotations

import argparse
import configparser
import json
import sys
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

SCHEMA = 1
EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# subcommands; each returns (ok, payload)


def _system(args):
    from .model import build_system

    return build_system()


def _relation(args) -> Optional[int]:
    return None if getattr(args, "no_relation", False) else 0


def cmd_verify_holomorphy(args) -> Tuple[bool, dict]:
    from .charts import CHART_NAMES, verify_all_charts

    names = CHART_NAMES if args.chart == "all" else (args.chart,)
    reports = verify_all_charts(_system(args), _relation(args), names)
    rows = [r.as_dict(with_text=args.show_hamiltonians) for r in reports]
    ok = all(r.h1_polynomial and r.h2_polynomial and r.symplectic for r in reports)
    return ok, {"relation_imposed": _relation(args) is not None, "charts": rows}


def cmd_verify_backlund(args) -> Tuple[bool, dict]:
    from .backlund import MAP_NAMES, backlund_map, preserves_relation, verify_backlund

    names = MAP_NAMES if args.map == "all" else (args.map,)
    sys_ = _system(args)
    rows = []
    for n in names:
        m = backlund_map(n)
        row = verify_backlund(m, sys_).as_dict()
        row["preserves_relation"] = preserves_relation(m)
        rows.append(row)
    return all(r["ok"] and r["preserves_relation"] for r in rows), {"maps": rows}


def cmd_verify_divisors(args) -> Tuple[bool, dict]:
    from .backlund import divisor_table, lifted_obstruction, verify_divisor

    sys_ = _system(args)
    rows = []
    for d in divisor_table():
        lifted = lifted_obstruction(d, sys_)
        rows.append(
            {
                "divisor": d.name,
                "polynomials": [p.to_text() for p in d.polynomials],
                "relation": f"{d.parameter} = 0",
                "invariant": verify_divisor(d, sys_),
                "lifted_nonzero": lifted["nonzero"],
                "lifted_proportional": lifted["proportional"],
            }
        )
    ok = all(r["invariant"] and r["lifted_nonzero"] and r["lifted_proportional"] for r in rows)
    return ok, {"divisors": rows}


def cmd_group_relations(args) -> Tuple[bool, dict]:
    from .backlund import group_relations

    report = group_relations(descriptive=not args.expected_only)
    ok = all(v["holds"] for v in report.values() if v["expected"])
    return ok, {"relations": report}


def cmd_frobenius(args) -> Tuple[bool, dict]:
    from .model import frobenius_report, impose_relation

    sys_ = _system(args)
    if _relation(args) is not None:
        sys_ = impose_relation(sys_, 0)
    rep = frobenius_report(sys_)
    return rep["plus_bracket_zero"] or rep["minus_bracket_zero"], {"frobenius": rep}


def cmd_singularities(args) -> Tuple[bool, dict]:
    from .model import impose_relation
    from .singular import BOUNDARY_LOCI, boundary_chart, find_accessible_singularities, to_boundary_chart

    sys_ = impose_relation(_system(args), 0)
    charts = ("X3", "X4") if args.chart == "all" else (args.chart,)
    out = {}
    ok = True
    for name in charts:
        ch = boundary_chart(name)
        loci = find_accessible_singularities(to_boundary_chart(sys_, ch), ch)
        out[name] = [loc.as_dict() for loc in loci]
        ok = ok and sorted(loc.name for loc in loci) == sorted(BOUNDARY_LOCI)
    return ok, {"loci": out}


def cmd_local_index(args) -> Tuple[bool, dict]:
    from .model import impose_relation
    from .singular import (
        BOUNDARY_LOCI,
        boundary_chart,
        find_accessible_singularities,
        local_index_at,
        step0_reference_entries,
        to_boundary_chart,
    )

    sys_ = impose_relation(_system(args), 0)
    ch = boundary_chart("X3")
    fld = to_boundary_chart(sys_, ch)
    loci = {loc.name: loc for loc in find_accessible_singularities(fld, ch)}
    names = sorted(BOUNDARY_LOCI) if args.locus == "all" else [args.locus]
    rows = []
    ok = True
    for n in names:
        if n not in loci:
            rows.append({"locus": n, "error": "not an accessible singular locus"})
            ok = False
            continue
        rep = local_index_at(fld, loci[n], ch, time=args.time)
        row = rep.as_dict()
        if n == "C0" and args.time == "t":
            row["reference_entries"] = step0_reference_entries(rep)
            ok = ok and all(row["reference_entries"].values())
        ok = ok and row["index"] == [2, 1, 1, 0]
        rows.append(row)
    if len(rows) == 1:
        return ok, rows[0]
    return ok, {"loci": rows}


def cmd_blow_up(args) -> Tuple[bool, dict]:
    from .singular import BOUNDARY_LOCI, blow_up_pipeline

    names = sorted(BOUNDARY_LOCI) if args.locus == "all" else [args.locus]
    sys_ = _system(args)
    rows = []
    for n in names:
        res = blow_up_pipeline(sys_, n, strict=False)
        rows.append(res.as_dict(emit_chart=args.emit_chart) | {"ok": res.ok})
    return all(r["ok"] for r in rows), {"blow_ups": rows}


def cmd_verify_all(args) -> Tuple[bool, dict]:
    steps: List[Tuple[str, Callable, Dict]] = [
        ("holomorphy", cmd_verify_holomorphy, {"chart": "all", "show_hamiltonians": False}),
        ("backlund", cmd_verify_backlund, {"map": "all"}),
        ("divisors", cmd_verify_divisors, {}),
        ("group_relations", cmd_group_relations, {"expected_only": True}),
        ("frobenius", cmd_frobenius, {}),
        ("singularities", cmd_singularities, {"chart": "all"}),
        ("local_index", cmd_local_index, {"locus": "all", "time": "t"}),
        ("blow_up", cmd_blow_up, {"locus": "all", "emit_chart": False}),
    ]
    verdicts = {}
    details = {}
    for name, fn, extra in steps:
        ns = argparse.Namespace(**vars(args), **extra)
        ok, payload = fn(ns)
        verdicts[name] = ok
        details[name] = payload
        _progress(args, f"{name}: {'pass' if ok else 'FAIL'}")
    return all(verdicts.values()), {"verdicts": verdicts, "details": details}


# ---------------------------------------------------------------------------
# integrate


def _number(text: str):
    text = text.strip().replace(" ", "")
    try:
        return Fraction(text)
    except ValueError:
        return complex(text)


def _legs(text: str):
    from .flows import Leg

    legs = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        time, _, delta = item.partition(":")
        if time not in ("t", "s") or not delta:
            raise UsageError(f"bad leg {item!r}; expected t:<delta> or s:<delta>")
        legs.append(Leg(time, complex(_number(delta))))
    return legs


def load_run_config(path: str) -> dict:
    """Read an INI config; numeric parameters must satisfy the relation."""
    from .flows import DEFAULT_ATOL, DEFAULT_ETA, DEFAULT_MARGIN, DEFAULT_RTOL, DEFAULT_S0, DEFAULT_T0
    from .model import ParameterRelationViolated, ParameterSet

    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise UsageError(f"cannot read config {path!r}")
    system = cp["system"] if cp.has_section("system") else {}
    if "alpha" not in system:
        raise UsageError("config needs [system] alpha = a0, a1, ..., a5")
    alpha = [Fraction(a.strip()) for a in system["alpha"].split(",")]
    eta = Fraction(system.get("eta", str(DEFAULT_ETA)))
    try:
        ParameterSet.numeric(alpha, eta)
    except (ParameterRelationViolated, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    start = cp["start"] if cp.has_section("start") else {}
    point = {k: complex(_number(start.get(k, "0"))) for k in ("q1", "p1", "q2", "p2")}
    point["t"] = complex(_number(start.get("t", str(DEFAULT_T0))))
    point["s"] = complex(_number(start.get("s", str(DEFAULT_S0))))
    path_sec = cp["path"] if cp.has_section("path") else {}
    checks = cp["checks"] if cp.has_section("checks") else {}
    return {
        "alpha": alpha,
        "eta": eta,
        "coupling": str(system.get("coupling", "true")).lower() in ("1", "true", "yes"),
        "start": point,
        "legs": _legs(path_sec.get("legs", "")),
        "rtol": float(path_sec.get("rtol", DEFAULT_RTOL)),
        "atol": float(path_sec.get("atol", DEFAULT_ATOL)),
        "margin": float(path_sec.get("margin", DEFAULT_MARGIN)),
        "divisors": [d.strip() for d in checks.get("divisors", "").split(",") if d.strip()],
        "commutativity": [complex(_number(x)) for x in checks.get("commutativity", "").split(",") if x.strip()],
        "threshold": float(checks.get("threshold", 1e-8)),
    }


def cmd_integrate(args) -> Tuple[bool, dict]:
    from .backlund import divisor
    from .flows import FlowPath, FlowSystem, PhasePoint, commutativity_check, divisor_drift, integrate_path

    cfg = load_run_config(args.config)
    fs = FlowSystem.from_params(cfg["alpha"], cfg["eta"], cfg["coupling"], cfg["margin"])
    start = PhasePoint(**cfg["start"])
    path = FlowPath(cfg["legs"], cfg["rtol"], cfg["atol"])
    end, results = integrate_path(fs, start, path)
    summary: dict = {"end": end.as_dict(), "legs": len(path.legs)}
    ok = True
    if cfg["divisors"]:
        drifts = {}
        for name in cfg["divisors"]:
            drifts[name] = divisor_drift(fs, divisor(name).polynomials, start, path)
        summary["divisor_drift"] = drifts
        ok = ok and all(d < cfg["threshold"] for d in drifts.values())
    if cfg["commutativity"]:
        if len(cfg["commutativity"]) != 2:
            raise UsageError("commutativity needs two increments: dt, ds")
        res = commutativity_check(fs, start, *cfg["commutativity"], rtol=cfg["rtol"], atol=cfg["atol"])
        summary["commutativity_residual"] = res
        ok = ok and res < cfg["threshold"]
    if args.trajectory:
        _write_trajectory(args.trajectory, path, results, start)
        summary["trajectory"] = args.trajectory
    return ok, summary


def _write_trajectory(target: str, path, results, start) -> None:
    cols = ["leg", "lambda", "t_re", "t_im", "s_re", "s_im"]
    for v in ("q1", "p1", "q2", "p2"):
        cols += [f"{v}_re", f"{v}_im"]
    lines = ["# " + " ".join(cols)]
    t, s = start.t, start.s
    for k, (leg, res) in enumerate(zip(path.legs, results)):
        for j in range(len(res.lam)):
            tj = res.times[j] if leg.time == "t" else t
            sj = res.times[j] if leg.time == "s" else s
            row = [str(k), f"{res.lam[j]:.12g}", f"{tj.real:.16g}", f"{tj.imag:.16g}", f"{sj.real:.16g}", f"{sj.imag:.16g}"]
            for y in res.states[:, j]:
                row += [f"{y.real:.16g}", f"{y.imag:.16g}"]
            lines.append(" ".join(row))
        t, s = res.end.t, res.end.s
    with open(target, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# plumbing


def _progress(args, msg: str) -> None:
    if not getattr(args, "json", False) and getattr(args, "verbose", False):
        print(msg, file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    from .backlund import MAP_NAMES
    from .charts import CHART_NAMES
    from .singular import BOUNDARY_LOCI

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="emit a JSON report")
    common.add_argument("--no-relation", action="store_true", help="do not impose the parameter relation")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="garnier", description="Verify and integrate the coupled Painleve VI system.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("verify-holomorphy", parents=[common], help="polynomiality and symplectic checks in r0..r5")
    s.add_argument("--chart", choices=list(CHART_NAMES) + ["all"], default="all")
    s.add_argument("--show-hamiltonians", action="store_true", help="include the chart Hamiltonians as text")
    s.set_defaults(func=cmd_verify_holomorphy)

    s = sub.add_parser("verify-backlund", parents=[common], help="check the seven birational symmetries")
    s.add_argument("--map", choices=list(MAP_NAMES) + ["all"], default="all")
    s.set_defaults(func=cmd_verify_backlund)

    s = sub.add_parser("verify-divisors", parents=[common], help="invariant divisor table")
    s.set_defaults(func=cmd_verify_divisors)

    s = sub.add_parser("group-relations", parents=[common], help="compositions of the symmetries")
    s.add_argument("--expected-only", action="store_true")
    s.set_defaults(func=cmd_group_relations)

    s = sub.add_parser("frobenius", parents=[common], help="compatibility of the two flows")
    s.set_defaults(func=cmd_frobenius)

    s = sub.add_parser("singularities", parents=[common], help="accessible singular loci on the boundary charts")
    s.add_argument("--chart", choices=["X3", "X4", "all"], default="all")
    s.set_defaults(func=cmd_singularities)

    s = sub.add_parser("local-index", parents=[common], help="local index at a singular locus")
    s.add_argument("--locus", choices=sorted(BOUNDARY_LOCI) + ["all"], default="C0")
    s.add_argument("--time", choices=["t", "s"], default="t")
    s.set_defaults(func=cmd_local_index)

    s = sub.add_parser("blow-up", parents=[common], help="blow-up pipeline to the canonical charts")
    s.add_argument("--locus", choices=sorted(BOUNDARY_LOCI) + ["all"], default="C0")
    s.add_argument("--emit-chart", action="store_true")
    s.set_defaults(func=cmd_blow_up)

    s = sub.add_parser("integrate", parents=[common], help="integrate along a path from an INI config")
    s.add_argument("--config", required=True)
    s.add_argument("--trajectory", help="write step samples to this file")
    s.set_defaults(func=cmd_integrate)

    s = sub.add_parser("verify-all", parents=[common], help="run the whole symbolic suite")
    s.set_defaults(func=cmd_verify_all)
    return p


def _text(ok: bool, command: str, payload: dict) -> str:
    lines = [f"{command}: {'PASS' if ok else 'FAIL'}"]
    for key, value in sorted(payload.items()):
        if isinstance(value, list):
            for item in value:
                lines.append(f"  {json.dumps(item, sort_keys=True, default=str)}")
        else:
            lines.append(f"  {key}: {json.dumps(value, sort_keys=True, default=str)}")
    return "\n".join(lines)


def run(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        ok, payload = args.func(args)
    except UsageError as exc:
        print(f"garnier: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - report, never crash with a traceback
        print(f"garnier: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    if args.json:
        doc = {"schema": SCHEMA, "command": args.command, "ok": ok}
        doc.update(payload)
        out.write(json.dumps(doc, sort_keys=True, indent=2, default=str) + "\n")
    else:
        out.write(_text(ok, args.command, payload) + "\n")
    return EXIT_OK if ok else EXIT_FAIL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
