"""Command line entry point: ``oscilla study`` and ``oscilla cell``."""
import argparse
import json
import logging
import sys

from .cell import solve_cell
from .study import emit_report, load_config, parse_eps, report_to_csv, run_sweep_and_fit


def _parser():
    p = argparse.ArgumentParser(prog="oscilla", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("study", help="run an eps sweep and fit convergence rates")
    s.add_argument("--config", required=True)
    s.add_argument("--eps", help="comma-separated list, e.g. 1/8,1/16,1/32")
    s.add_argument("--m", type=int)
    s.add_argument("--n", type=int)
    s.add_argument("--out-csv")
    s.add_argument("--out-json")
    s.add_argument("--jobs", type=int)
    s.add_argument("--check", action="store_true",
                   help="also run the refinement and reference checks; exit 1 on any failure")
    s.add_argument("--no-timings", action="store_true",
                   help="write runtime_ms as 0 so reports are byte-reproducible")

    c = sub.add_parser("cell", help="solve the cell problems and print r diagnostics")
    c.add_argument("--config", required=True)
    c.add_argument("--m", type=int)
    c.add_argument("--n", type=int)
    return p


def _apply_overrides(config, args):
    if getattr(args, "eps", None):
        config.eps = tuple(parse_eps(e) for e in args.eps.split(",") if e.strip())
    for key in ("m", "n", "jobs", "out_csv", "out_json"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(config, key, value)
    config.validate()
    return config


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    config = _apply_overrides(load_config(args.config), args)

    if args.command == "cell":
        cell = solve_cell(config.profile, config.m, config.n, tol=config.cell_tol)
        print(json.dumps(cell.diagnostics, indent=2, sort_keys=True))
        return 0

    if args.check:
        config.refinement_check = True
    report = run_sweep_and_fit(config, reference=args.check)
    timings = not args.no_timings
    if config.out_csv:
        emit_report(report, "csv", config.out_csv, timings)
    if config.out_json:
        emit_report(report, "json", config.out_json, timings)
    sys.stdout.write(report_to_csv(report, timings))
    for name, slope in sorted(report.slopes.items()):
        print(f"slope {name}: {slope:.4f}")
    if report.fit_error:
        print(f"fit error: {report.fit_error}")
    for name, rule in report.acceptance.items():
        print(f"{'PASS' if rule['passed'] else 'FAIL'} {name}: {rule['value']}")
    if args.check and not report.passed():
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
