"""Command-line surface tying the toolkit together.

Subcommands: levels, lines, plan, king, fit, sim.  Exit status is 0 on
success, 1 when inputs parsed but the physics or data rejected them, and 2
for usage errors and malformed input files (JSON syntax errors are reported
with line and column).

Structured artifacts are JSON and always carry the toolkit version plus the
fully resolved configuration, so any artifact can be regenerated from its own
header block.  Relative output paths land in $IONLAB_DATA_DIR when that is
set (default: the current directory); input paths are taken as given.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__, kingplot, lineshape, sidebands, spectra
from .dynamics import engine
from .dynamics import scenario as dynscenario

TERM_ORDER = ("S1/2", "P1/2", "D3/2")

# isotopes whose shifts were not available to earlier King-plot analyses;
# the slope is quoted both with and without them
NEW_MEASUREMENT_ROWS = (130, 132, 133)


def _data_dir():
    return Path(os.environ.get("IONLAB_DATA_DIR", "."))


def _out_path(raw):
    path = Path(raw)
    return path if path.is_absolute() else _data_dir() / path


def _write_artifact(raw_path, payload):
    path = _out_path(raw_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {path}")


def _load_json(path):
    """Parse a JSON input file; malformed content is a usage-class failure."""
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as err:
        sys.stderr.write(f"{path}: line {err.lineno} column {err.colno}: {err.msg}\n")
        raise SystemExit(2)
    except OSError as err:
        sys.stderr.write(f"cannot read {path}: {err.strerror or err}\n")
        raise SystemExit(2)


# -------------------------------------------------------------- commands ----


def _cmd_levels(args):
    terms = [args.term] if args.term else list(TERM_ORDER)
    rows = []
    for term in terms:
        rows.extend(spectra.hyperfine_levels(args.isotope, term))
    for lev in rows:
        print(f"{args.isotope}Ba  {lev.term:<4}  F={lev.f:<4g} {lev.energy_mhz:12.4f} MHz")
    if args.output:
        _write_artifact(args.output, {
            "version": __version__,
            "config": {"command": "levels", "isotope": args.isotope, "terms": terms},
            "levels": [{"term": lev.term, "f": lev.f, "energy_mhz": lev.energy_mhz}
                       for lev in rows],
        })
    return 0


def _cmd_lines(args):
    table = spectra.transition_table(a=args.isotope, branch=args.branch,
                                     allowed_only=not args.all_lines)
    for ln in table:
        flabel = f"F={ln.f_lower:g}->F'={ln.f_upper:g}"
        mark = "" if ln.allowed else "   forbidden"
        print(f"{ln.isotope}Ba  {ln.branch}  {flabel:<14} {ln.offset_mhz:10.4f} MHz{mark}")
    if args.output:
        _write_artifact(args.output, {
            "version": __version__,
            "config": {"command": "lines", "isotope": args.isotope,
                       "branch": args.branch, "all_lines": args.all_lines},
            "lines": [{"isotope": ln.isotope, "branch": ln.branch,
                       "f_lower": ln.f_lower, "f_upper": ln.f_upper,
                       "offset_mhz": ln.offset_mhz, "allowed": ln.allowed}
                      for ln in table],
        })
    return 0


def _cmd_plan(args):
    data = _load_json(args.plan)
    try:
        plan = sidebands.plan_from_dict(data)
    except (KeyError, TypeError, ValueError) as err:
        sys.stderr.write(f"{args.plan}: {err}\n")
        return 2
    report = sidebands.plan_report(plan, carrier_shift_mhz=args.carrier_shift_mhz)
    print(sidebands.render_report(report))
    if args.output:
        _write_artifact(args.output, {
            "version": __version__,
            "config": {"command": "plan", "plan": sidebands.plan_to_dict(plan),
                       "carrier_shift_mhz": args.carrier_shift_mhz},
            "report": sidebands.report_to_dict(report),
        })
    if args.strict:
        sidebands.ensure_valid(report)
    return 0


def _cmd_king(args):
    all_rows = [a for a in spectra.isotopes() if a != spectra.REFERENCE_ISOTOPE]
    if args.include:
        selections = {"fit": list(args.include)}
    else:
        selections = {
            "fit_all_rows": all_rows,
            "fit_prior_rows": [a for a in all_rows if a not in NEW_MEASUREMENT_ROWS],
        }
    fits = {}
    for name, rows in selections.items():
        points = kingplot.king_points(convention=args.convention, include=rows)
        fit = kingplot.fit_king_line(points, convention=args.convention)
        fits[name] = (fit, points)
        print(f"{name}: slope {fit.slope:+.5f} +- {fit.slope_err:.5f}  "
              f"intercept {fit.intercept:+.2f} +- {fit.intercept_err:.2f}  "
              f"A={rows}")

    a, a_ref = args.pair
    dnu = (spectra.isotope(a).dnu(args.branch)
           - spectra.isotope(a_ref).dnu(args.branch))
    inversion = kingplot.inversion_report(dnu, (a, a_ref))
    print(f"d<r^2>_({a},{a_ref}) = {inversion['d_r2_fm2']:+.5f} fm^2  "
          f"from dnu_{args.branch} = {dnu:+.2f} MHz")
    if args.output:
        _write_artifact(args.output, {
            "version": __version__,
            "config": {"command": "king", "convention": args.convention,
                       "rows": {name: rows for name, rows in selections.items()},
                       "pair": [a, a_ref], "branch": args.branch},
            "fits": {name: kingplot.fit_report(fit, points)
                     for name, (fit, points) in fits.items()},
            "inversion": inversion,
        })
    return 0


def _cmd_fit(args):
    try:
        scan = lineshape.read_scan_csv(args.scan, label=Path(args.scan).stem)
    except OSError as err:
        sys.stderr.write(f"cannot read {args.scan}: {err.strerror or err}\n")
        return 2
    except ValueError as err:
        sys.stderr.write(f"{args.scan}: {err}\n")
        return 2
    fit = lineshape.fit_lorentzian(scan, systematic_mhz=args.systematic_mhz)
    sys_note = ("" if fit.systematic_mhz is None
                else f"  (+- {fit.systematic_mhz:g} MHz systematic)")
    print(f"center    {fit.center_mhz:12.4f} +- {fit.center_err:.4f} MHz{sys_note}")
    print(f"fwhm      {fit.fwhm_mhz:12.4f} +- {fit.fwhm_err:.4f} MHz")
    print(f"amplitude {fit.amplitude:12.4f} +- {fit.amplitude_err:.4f}")
    print(f"offset    {fit.offset:12.4f} +- {fit.offset_err:.4f}")
    if args.output:
        _write_artifact(args.output, {
            "version": __version__,
            "config": {"command": "fit", "scan": str(args.scan),
                       "systematic_mhz": args.systematic_mhz},
            "fit": lineshape.fit_to_dict(fit),
        })
    if not fit.converged:
        sys.stderr.write(f"fit did not converge: {fit.message}\n")
        return 1
    return 0


def _apply_override(cfg, item):
    """Apply one 'key=value' (or 'trap.key=value') override to a scenario dict."""
    key, sep, raw = item.partition("=")
    if not sep or not key:
        sys.stderr.write(f"override {item!r} is not of the form key=value\n")
        raise SystemExit(2)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw  # bare strings stay strings
    node = cfg
    *parents, leaf = key.split(".")
    for part in parents:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ValueError(f"override {key!r} descends into a non-mapping")
    node[leaf] = value


def _cmd_sim(args):
    cfg = _load_json(args.scenario)
    for item in args.set or []:
        _apply_override(cfg, item)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.execution is not None:
        cfg["execution"] = args.execution
    try:
        trap, ions, beams, params, resolved = dynscenario.resolve_scenario(cfg)
    except ValueError as err:
        sys.stderr.write(f"{args.scenario}: {err}\n")
        return 2
    result = engine.run_simulation(
        trap, ions, beams, params["dt_s"], params["steps"], params["seed"],
        sample_every=params["sample_every"], execution=params["execution"],
        z_max=params["z_max_m"])

    prefix = args.prefix or resolved["label"] or Path(args.scenario).stem
    outdir = _out_path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    summary_path = outdir / f"{prefix}_summary.json"
    traj_path = outdir / f"{prefix}_trajectory.csv"
    dynscenario.write_summary_json(summary_path, result, resolved)
    dynscenario.write_trajectory_csv(traj_path, result)

    for label in result.species_order:
        loaded = sum(1 for s in result.species if s == label)
        kept = sum(1 for s, alive in zip(result.species, result.final_alive)
                   if s == label and alive)
        print(f"{label}: {kept}/{loaded} retained")
    print(f"wrote {summary_path}")
    print(f"wrote {traj_path}")
    return 0


# ---------------------------------------------------------------- parser ----


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ionlab",
        description="Ba+ spectroscopy tables, sideband plans, scan fits, and "
                    "trapped-ion dynamics runs.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("levels", help="hyperfine levels of one isotope")
    p.add_argument("--isotope", "-a", type=int, required=True, help="mass number")
    p.add_argument("--term", choices=TERM_ORDER, help="restrict to one term")
    p.add_argument("--output", "-o", help="write a JSON artifact here")
    p.set_defaults(func=_cmd_levels)

    p = sub.add_parser("lines", help="transition offset table")
    p.add_argument("--isotope", "-a", type=int, help="restrict to one isotope")
    p.add_argument("--branch", choices=spectra.BRANCHES)
    p.add_argument("--all-lines", action="store_true",
                   help="include dipole-forbidden combinations")
    p.add_argument("--output", "-o", help="write a JSON artifact here")
    p.set_defaults(func=_cmd_lines)

    p = sub.add_parser("plan", help="evaluate a sideband plan file")
    p.add_argument("plan", help="plan JSON file")
    p.add_argument("--carrier-shift-mhz", type=float, default=0.0,
                   help="perturb every carrier by this much (robustness probe)")
    p.add_argument("--strict", action="store_true",
                   help="exit 1 if the plan fails its cooling contract")
    p.add_argument("--output", "-o", help="write a JSON artifact here")
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("king", help="normalized-shift line fit and radius inversion")
    p.add_argument("--convention", choices=kingplot.CONVENTIONS,
                   default="mass-difference")
    p.add_argument("--include", type=int, nargs="+", metavar="A",
                   help="fit only these isotopes (default: report the fit over "
                        "all rows and over the previously measured rows)")
    p.add_argument("--pair", type=int, nargs=2, default=(133, 138),
                   metavar=("A", "A_REF"), help="pair for the radius inversion")
    p.add_argument("--branch", choices=spectra.BRANCHES, default="r",
                   help="branch whose shift feeds the inversion")
    p.add_argument("--output", "-o", help="write a JSON artifact here")
    p.set_defaults(func=_cmd_king)

    p = sub.add_parser("fit", help="Lorentzian fit of a scan CSV")
    p.add_argument("scan", help="two-column scan CSV (frequency_mhz, counts)")
    p.add_argument("--systematic-mhz", type=float,
                   help="attach a systematic band to the result metadata")
    p.add_argument("--output", "-o", help="write a JSON artifact here")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("sim", help="run a scenario file")
    p.add_argument("scenario", help="scenario JSON file")
    p.add_argument("--execution", choices=(engine.REFERENCE, engine.PARALLEL),
                   help="override the scenario's execution mode")
    p.add_argument("--seed", type=int, help="override the scenario's seed")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a scenario key (dots descend, e.g. trap.mode=pseudo)")
    p.add_argument("--outdir", default=".",
                   help="artifact directory (relative paths land in $IONLAB_DATA_DIR)")
    p.add_argument("--prefix", help="artifact filename prefix (default: label or stem)")
    p.set_defaults(func=_cmd_sim)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError) as err:
        sys.stderr.write(f"error: {err}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
