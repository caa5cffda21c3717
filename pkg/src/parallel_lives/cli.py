"""Command-line front end.

``pl run`` executes a scenario and prints its interaction tables in the
Proportion | Relative World | History layout, ``pl bell`` runs sampling
campaigns, ``pl list`` shows the catalog, ``pl serve`` starts the
classroom-exercise service.  Output is deterministic given flags + seed.

Exit codes: 0 success, 1 golden-table check failure, 2 load error.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import sampling, scenarios
from .engine import EngineError, NotRepresentable
from .qmath import QMathError


def format_proportion(x: float) -> str:
    dec = f"{x:.12f}"
    frac = Fraction(x).limit_denominator(10 ** 6)
    if abs(x - float(frac)) <= 1e-12:
        return f"{dec} ({frac})"
    return dec


def _history_str(records) -> str:
    parts = []
    for r in records:
        inner = ",".join(f"{sys}={lab}" for sys, lab in r.outcomes)
        parts.append(f"{r.event.tag}:({inner})")
    return " ".join(parts) if parts else "-"


def _world_str(systems, outcomes) -> str:
    return " ".join(f"|{lab}>{sys}" for sys, lab in zip(systems, outcomes))


def print_report(report: scenarios.RunReport, out=sys.stdout) -> None:
    w = out.write
    w(f"scenario: {report.scenario.name}\n")
    for e in sorted(report.scenario.events, key=lambda e: e.ordinal):
        if e.tag in report.split_tables:
            t = report.split_tables[e.tag]
            w(f"\n== {e.tag} ({e.kind} {t.systems[0]},{t.systems[1]})\n")
            w(f"{'Proportion':<28}  {'Relative World':<22}  History\n")
            for r in t.rows:
                w(f"{format_proportion(r.mass):<28}  "
                  f"{_world_str(t.systems, r.outcomes):<22}  "
                  f"{_history_str(r.prior)}\n")
        elif e.tag in report.pairing_tables:
            t = report.pairing_tables[e.tag]
            w(f"\n== {e.tag} (meet {t.systems[0]},{t.systems[1]})\n")
            w(f"{'Proportion':<28}  {'Relative World':<22}  History\n")
            for r in t.rows:
                world = _world_str(t.systems, (r.outcome_a, r.outcome_b))
                hist = _history_str(r.history_a) + " / " + _history_str(r.history_b)
                w(f"{format_proportion(r.mass):<28}  {world:<22}  {hist}\n")
    if report.reduced:
        w("\n== per-system outcome proportions (preferred basis)\n")
        for sys_lab in sorted(report.reduced):
            parts = ", ".join(f"{k}: {format_proportion(v)}"
                              for k, v in sorted(report.reduced[sys_lab].items()))
            w(f"{sys_lab}: {parts}\n")
    if report.censuses is not None:
        w("\n== finite censuses\n")
        for sys_lab in sorted(report.censuses):
            counts = report.censuses[sys_lab]
            total = sum(counts.values())
            rows = ", ".join(str(n) for _, n in sorted(counts.items()))
            w(f"{sys_lab} ({total} lives): {rows}\n")
    for note in report.notes:
        w(f"\nnote: {note}\n")
    for key in sorted(report.attachments):
        w(f"\n== {key}\n")
        _print_attachment(report.attachments[key], w)


def _print_attachment(value, w, indent="") -> None:
    from .continuum import DensityProfile

    if isinstance(value, dict):
        for k in sorted(value):
            v = value[k]
            if isinstance(v, (dict,)) and not isinstance(v, DensityProfile):
                w(f"{indent}{k}:\n")
                _print_attachment(v, w, indent + "  ")
            else:
                _print_attachment_line(k, v, w, indent)
    else:
        w(f"{indent}{value}\n")


def _print_attachment_line(k, v, w, indent) -> None:
    from .continuum import DensityProfile

    if isinstance(v, DensityProfile):
        w(f"{indent}{k}: profile on {v.grid.bins} bins "
          f"[{v.grid.x_min:g}, {v.grid.x_max:g}]\n")
    elif isinstance(v, float):
        w(f"{indent}{k}: {v:.12g}\n")
    else:
        w(f"{indent}{k}: {v}\n")


def _export_csv(report: scenarios.RunReport, prefix: str, out) -> None:
    from .continuum import DensityProfile

    def walk(value, path):
        if isinstance(value, DensityProfile):
            target = Path(f"{prefix}{'_'.join(path)}.csv")
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(value.to_csv(), encoding="utf-8")
            out.write(f"wrote {target}\n")
        elif isinstance(value, dict):
            for k in sorted(value):
                walk(value[k], path + [str(k)])

    walk(report.attachments, [])


def cmd_run(args) -> int:
    out = sys.stdout
    try:
        spec = scenarios.resolve(args.scenario)
        report = scenarios.run(spec, lives=args.lives)
    except (scenarios.ScenarioError, EngineError, QMathError, NotRepresentable,
            OSError) as err:
        sys.stderr.write(f"error: {err}\n")
        return 2
    if args.format == "json":
        doc = report.to_jsonable()
        out.write(json.dumps(doc, indent=2, sort_keys=True))
        out.write("\n")
    else:
        print_report(report, out)
    if args.export_csv:
        _export_csv(report, args.export_csv, out)
    if args.check:
        failures = scenarios.check_report(report)
        if failures:
            for f in failures:
                out.write(f"CHECK FAIL: {f}\n")
            return 1
        out.write("check: all golden tables match\n")
    return 0


def cmd_list(args) -> int:
    for name in scenarios.catalog():
        print(name)
    return 0


def cmd_bell(args) -> int:
    if args.rounds < 1:
        sys.stderr.write("error: --rounds must be at least 1\n")
        return 2
    if args.mode == "mermin":
        result = sampling.mermin_campaign(args.rounds, args.seed)
    else:
        result = sampling.chsh_campaign(args.rounds, args.seed)
    for line in result.lines():
        print(line)
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    try:
        serve(args.host, args.port)
    except OSError as err:
        sys.stderr.write(f"error: {err}\n")
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="pl",
        description="parallel-lives scenario runner and Bell-test tools")
    sub = p.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario and print its tables")
    run_p.add_argument("scenario", help="catalog name or scenario JSON file")
    run_p.add_argument("--check", action="store_true",
                       help="compare against golden tables; exit 1 on mismatch")
    run_p.add_argument("--format", choices=("text", "json"), default="text")
    run_p.add_argument("--lives", type=int, default=None,
                       help="add finite censuses at this population")
    run_p.add_argument("--export-csv", default=None, metavar="PREFIX",
                       help="write continuum profiles as CSV files")
    run_p.set_defaults(fn=cmd_run)

    list_p = sub.add_parser("list", help="list catalog scenarios")
    list_p.set_defaults(fn=cmd_list)

    bell_p = sub.add_parser("bell", help="run a sampling Bell campaign")
    bell_p.add_argument("--mode", choices=("mermin", "chsh"), required=True)
    bell_p.add_argument("--rounds", type=int, default=100_000)
    bell_p.add_argument("--seed", type=int, default=0)
    bell_p.set_defaults(fn=cmd_bell)

    serve_p = sub.add_parser("serve", help="start the exercise HTTP service")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8700)
    serve_p.set_defaults(fn=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
