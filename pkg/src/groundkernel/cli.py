"""Command-line front end.

One S-expression format for every artifact; subcommands load a base and
optional extensions, then check, synthesize, measure or normalize.  Exit
codes: 0 success, 1 validation failure, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .formulas import IllFormedFormula, print_g
from .kernel import CheckReport, Derivation, check
from .lang import EMPTY_BASE, Exists, Forall, LangError, parse_base, print_l
from .measures import degree, find_cut_segments, mu, tau, type_set
from .measures import k2 as k2_of
from .normalizer import NormalizeError, normalize
from .reader import Reader, print_derivation
from .sexpr import SexprError, read, write
from .terms import TermError
from .theory import (
    EMPTY_REGISTRY,
    TheoryError,
    build_ground_clause,
    build_rewritability,
    build_well_definedness,
    synthesize_typing,
)


class UsageError(Exception):
    pass


def _load_reader(args) -> Reader:
    base = EMPTY_BASE
    if args.base:
        base = parse_base(Path(args.base).read_text())
        reader = Reader.for_base(base)
    else:
        reader = Reader()
    for ext_path in args.extend or ():
        reader = Reader(reader.base, reader.parse_extension(Path(ext_path).read_text()), reader.sig)
    return reader


def _report_lines(report: CheckReport, as_json: bool) -> str:
    if as_json:
        payload = {
            "ok": report.ok,
            "conclusion": print_g(report.conclusion) if report.conclusion is not None else None,
            "open_assumptions": {print_g(f): n for f, n in report.open_assumptions.items()},
            "errors": [{"path": list(p), "error": str(e)} for p, e in report.errors],
        }
        return json.dumps(payload, indent=2, sort_keys=True)
    return report.pretty()


def _emit_dot(d: Derivation) -> str:
    lines = ["digraph derivation {", "  node [shape=box, fontname=monospace];"]
    counter = [0]

    def walk(n: Derivation) -> int:
        counter[0] += 1
        me = counter[0]
        label = n.rule
        if n.rule == "assume":
            label = f"assume {n.label}"
        extra = f"\\n{print_g(n.concl)}"
        lines.append(f'  n{me} [label="{label}{extra}"];')
        for p in n.premises:
            child = walk(p)
            lines.append(f"  n{child} -> n{me};")
        return me

    walk(d)
    lines.append("}")
    return "\n".join(lines)


def cmd_check(args, reader: Reader) -> int:
    target = Path(args.path)
    files = sorted(target.glob("*.deriv")) if target.is_dir() else [target]
    if not files:
        raise UsageError(f"no derivation files under {target}")
    worst = 0
    for f in files:
        d = reader.parse_derivation(f.read_text())
        report = check(d, reader.base, reader.registry)
        prefix = f"{f}: " if len(files) > 1 else ""
        print(prefix + _report_lines(report, args.json))
        if args.emit_dot:
            print(_emit_dot(d))
        if not report.ok:
            worst = 1
    return worst


def cmd_synth(args, reader: Reader) -> int:
    term = reader.parse_term(Path(args.path).read_text())
    d = synthesize_typing(term, reader.base)
    report = check(d, reader.base, reader.registry)
    if not report.ok:
        print(_report_lines(report, args.json), file=sys.stderr)
        return 1
    print(_emit_dot(d) if args.emit_dot else print_derivation(d))
    return 0


def cmd_measure(args, reader: Reader) -> int:
    f = reader.parse_formula(Path(args.path).read_text())
    m = mu(f)
    if args.json:
        print(json.dumps({"T_A": sorted(type_set(f)), "tau": tau(f), "k2": k2_of(f), "mu": [m.tau, m.k2]}))
    else:
        print("T_A " + write(sorted(type_set(f))))
        print(f"tau {tau(f)}")
        print(f"k2 {k2_of(f)}")
        print("mu " + write(m.as_sexp()))
    return 0


def cmd_degree(args, reader: Reader) -> int:
    d = reader.parse_derivation(Path(args.path).read_text())
    report = check(d, reader.base, reader.registry)
    if not report.ok:
        print(_report_lines(report, args.json), file=sys.stderr)
        return 1
    segs = find_cut_segments(d)
    deg = degree(d)
    if args.json:
        print(
            json.dumps(
                {
                    "segments": [
                        {"formula": print_g(s.formula), "kind": s.kind, "length": s.length, "paths": [list(p) for p in s.nodes]}
                        for s in segs
                    ],
                    "degree": [[deg.max_measure.tau, deg.max_measure.k2], deg.total_length],
                }
            )
        )
    else:
        for s in segs:
            paths = " ".join("." + ".".join(map(str, p)) if p else "root" for p in s.nodes)
            print(f"segment {s.kind} length {s.length} mu {write(mu(s.formula).as_sexp())} {print_g(s.formula)} at {paths}")
        print("degree " + write(deg.as_sexp()))
    return 0


def cmd_normalize(args, reader: Reader) -> int:
    d = reader.parse_derivation(Path(args.path).read_text())
    nd, trace = normalize(d, reader.base, reader.registry)
    if args.trace:
        for step in trace:
            print(write(step.as_sexp()), file=sys.stderr)
    print(_emit_dot(nd) if args.emit_dot else print_derivation(nd))
    return 0


def cmd_lemma(args, reader: Reader) -> int:
    conn = args.conn

    def lf(text: str):
        return reader.lformula(read(text))

    if args.kind == "star":
        if conn in ("forall", "exists"):
            phi = lf(args.formulas[0])
            if not isinstance(phi, (Forall, Exists)):
                raise UsageError("quantified ground-clause lemmas take the quantified formula")
            d = build_ground_clause(conn, phi)
        else:
            d = build_ground_clause(conn, lf(args.formulas[0]), lf(args.formulas[1]))
    elif args.kind == "well":
        match conn:
            case "and":
                d = build_well_definedness("and", lf(args.formulas[0]), lf(args.formulas[1]), args.side or 1)
            case "or":
                d = build_well_definedness("or", lf(args.formulas[0]), lf(args.formulas[1]), lf(args.formulas[2]))
            case "imp":
                d = build_well_definedness("imp", lf(args.formulas[0]), lf(args.formulas[1]))
            case "forall":
                phi = lf(args.formulas[0])
                t = reader.lterm(read(args.formulas[1]))
                d = build_well_definedness("forall", phi, t)
            case "exists":
                d = build_well_definedness("exists", lf(args.formulas[0]), lf(args.formulas[1]))
            case "bot":
                d = build_well_definedness("bot", lf(args.formulas[0]))
            case _:
                raise UsageError(f"unknown connective {conn!r}")
    elif args.kind == "rewritability":
        d = build_rewritability(reader.registry, args.conn or "F")
    else:
        raise UsageError(f"unknown lemma kind {args.kind!r}")
    report = check(d, reader.base, reader.registry)
    if not report.ok:
        print(_report_lines(report, args.json), file=sys.stderr)
        return 1
    print(_emit_dot(d) if args.emit_dot else print_derivation(d))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="groundkernel", description="proof kernel for grounding calculi")
    ap.add_argument("--base", help="atomic base file")
    ap.add_argument("--extend", action="append", help="extension file (repeatable)")
    ap.add_argument("--json", action="store_true", help="machine-readable output")
    ap.add_argument("--emit-dot", action="store_true", help="render derivations as graphviz instead of S-expressions")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="check a derivation file (or every *.deriv in a directory)")
    p.add_argument("path")
    p = sub.add_parser("synth", help="synthesize the typing derivation of a plain term")
    p.add_argument("path")
    p = sub.add_parser("measure", help="print the double measure of a formula")
    p.add_argument("path")
    p = sub.add_parser("degree", help="print the cut-segments and degree of a derivation")
    p.add_argument("path")
    p = sub.add_parser("normalize", help="normalize a derivation")
    p.add_argument("path")
    p.add_argument("--trace", action="store_true", help="emit one S-expression per step on stderr")
    p = sub.add_parser("lemma", help="build and print a library derivation")
    p.add_argument("kind", choices=["star", "well", "rewritability"])
    p.add_argument("conn", nargs="?", help="connective (and/or/imp/forall/exists/bot) or extension symbol")
    p.add_argument("formulas", nargs="*", help="formula / term arguments as S-expressions")
    p.add_argument("--side", type=int, choices=[1, 2], help="projection side for the conjunction lemma")
    return ap


def run(argv) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        reader = _load_reader(args)
        handler = {
            "check": cmd_check,
            "synth": cmd_synth,
            "measure": cmd_measure,
            "degree": cmd_degree,
            "normalize": cmd_normalize,
            "lemma": cmd_lemma,
        }[args.command]
        return handler(args, reader)
    except (SexprError, LangError, TermError, IllFormedFormula, TheoryError, UsageError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except NormalizeError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
