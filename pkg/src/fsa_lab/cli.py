"""``fsa-lab`` command line: solve, sweep, nullsteer, beamscan, converge, gradcheck.

Exit codes: 0 success, 1 usage or validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import harness
from .audit import audit_gradients
from .baselines import fda_solve, fpa_solve, fsa_solve, ma_solve
from .harness import ParseError, ValidationError
from .model import ArrayGeometry, FrequencyPlan
from .nullsteer import GeometryGap, LinkBudget, solve_null_steering
from .secrecy import mrt_beamformer

log = logging.getLogger("fsa_lab")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
VAR_ALIASES = {"power": "transmit_power_dbm", "antennas": "n_antennas", "offset": "max_offset_hz"}

SCHEMA_HELP = """\
config schema (JSON, "schema": 1):
  geometry.n_antennas (odd int), geometry.base_frequency_hz
  scenario.bob / scenario.eves[i]: {angle_deg, range_m, gain: "free-space" | x | [re, im]}
  scenario.noise_power_dbm, scenario.transmit_power_dbm
  limits.f_h_hz, limits.max_offset_hz
  optimizer.<OptimizerConfig field>   e.g. optimizer.multistart_count=8
  sweep.variable (transmit_power_dbm | n_antennas | max_offset_hz), sweep.grid [..]
  schemes [FSA, MA, FDA, FPA], seed, output, trace_output, record_timing
override with --set dotted.key=value, e.g. --set limits.f_h_hz=120e9
"""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(p, config=True):
    if config:
        p.add_argument("--config", help="JSON experiment config (default: shipped reference scenario)")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="dotted-path override, repeatable")
        p.add_argument("--seed", type=int, help="RNG seed for multistart")
    p.add_argument("--out", help="output file")
    p.add_argument("-q", "--quiet", action="store_true")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fsa-lab", description="Frequency-switching array security toolkit",
                     epilog=SCHEMA_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("solve", help="optimize one scheme at the config's base point")
    _common(p)
    p.add_argument("--scheme", choices=harness.SCHEMES, default="FSA")

    p = sub.add_parser("sweep", help="run a parameter sweep and write CSV")
    _common(p)
    p.add_argument("--var", help="power | antennas | offset (or the full config name)")
    p.add_argument("--trace-out", help="JSON dump of per-row solutions and traces")
    p.add_argument("--no-timing", action="store_true", help="leave wall_ms empty")

    p = sub.add_parser("nullsteer", help="closed-form null design for one Eve")
    _common(p)
    p.add_argument("--du", type=float, required=True, help="u_B - u_E (sine domain)")
    p.add_argument("--dr", type=float, required=True, help="r_B - r_E in meters")
    p.add_argument("--n", type=int, help="number of antennas")

    p = sub.add_parser("beamscan", help="sample the normalized array gain")
    _common(p)
    p.add_argument("--axis", choices=("angle", "range"), default="range")
    p.add_argument("--grid", required=True, metavar="START:STOP:NUM",
                   help="degrees for angle scans, meters for range scans")
    p.add_argument("--ladder-step", type=float,
                   help="use a uniform increment ladder with MRT toward Bob instead of FSA")
    p.add_argument("--carrier", type=float, help="carrier for --ladder-step (default f0)")

    p = sub.add_parser("converge", help="objective traces for several array sizes")
    _common(p)
    p.add_argument("--sizes", default="13,17,23,27")

    p = sub.add_parser("gradcheck", help="finite-difference gradient audit")
    _common(p)
    p.add_argument("--points", type=int, default=100)
    return parser


def _load(args):
    path = args.config or harness.default_config_path()
    cfg = harness.load_config(path)
    if args.overrides:
        cfg = harness.config_from_dict(harness.apply_overrides(cfg.raw, args.overrides))
    if args.seed is not None:
        if args.seed < 0:
            raise ValidationError("--seed", "must be non-negative")
        cfg = harness.with_seed(cfg, args.seed)
    return cfg


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _say(args, *lines):
    if not args.quiet:
        for line in lines:
            print(line)


def cmd_solve(args):
    cfg = _load(args)
    sc, geom, lim, opt = cfg.scenario, cfg.geometry, cfg.limits, cfg.optimizer
    if args.scheme == "FPA":
        res = fpa_solve(sc, geom)
        payload = {"plan": {"carrier_hz": res.plan.carrier_hz, "increments_hz": res.plan.increments_hz.tolist()}}
    elif args.scheme == "MA":
        res = ma_solve(sc, geom, lim, opt)
        payload = {"positions_m": res.configuration.positions_m.tolist(), "trace": res.trace.to_dict()}
    else:
        res = (fda_solve if args.scheme == "FDA" else fsa_solve)(sc, geom, lim, opt)
        payload = {"plan": {"carrier_hz": res.plan.carrier_hz, "increments_hz": res.plan.increments_hz.tolist()},
                   "trace": res.trace.to_dict()}
    rep = res.report
    payload.update(scheme=args.scheme, report=rep.__dict__,
                   weights=[[z.real, z.imag] for z in res.beamformer.weights])
    _say(args, f"scheme          {args.scheme}",
         f"secrecy_bps_hz  {rep.secrecy_rate_bps_hz:.12g}",
         f"rate_bob        {rep.rate_bob_bps_hz:.12g}",
         f"rate_eves       {rep.rate_eves_bps_hz:.12g}",
         f"unclamped       {rep.unclamped_difference:.12g}")
    if hasattr(res, "plan"):
        _say(args, f"carrier_hz      {res.plan.carrier_hz:.12g}")
    if hasattr(res, "trace"):
        _say(args, f"iterations      {res.iterations}  converged={res.converged}")
    out = args.out or cfg.trace_output
    if out:
        Path(out).write_text(json.dumps(payload, indent=1))
    return EXIT_OK


def cmd_sweep(args):
    cfg = _load(args)
    if args.var:
        var = VAR_ALIASES.get(args.var, args.var)
        if var not in harness.SWEEP_VARIABLES:
            raise ValidationError("--var", f"unknown sweep variable {args.var!r}")
        if var != cfg.sweep_variable:
            raw = harness.apply_overrides(cfg.raw, [f"sweep.variable={json.dumps(var)}"])
            default_grids = {"transmit_power_dbm": [0, 10, 20, 30], "n_antennas": [5, 9, 13, 17, 21],
                             "max_offset_hz": [0, 1e6, 2e6, 4e6]}
            if not any(o.startswith("sweep.grid=") for o in args.overrides):
                raw["sweep"]["grid"] = default_grids[var]
            cfg = harness.config_from_dict(raw)
            if args.seed is not None:
                cfg = harness.with_seed(cfg, args.seed)
    if args.no_timing:
        cfg = replace(cfg, record_timing=False)
    rows = harness.run_sweep(cfg, output="", trace_output=args.trace_out or "")
    text = harness.rows_to_csv(rows, cfg.sweep_variable, cfg.record_timing)
    _emit(text, args.out or cfg.output)
    failed = [r for r in rows if r.failed]
    for r in failed:
        log.warning("failed row %s=%g %s: %s", cfg.sweep_variable, r.sweep_value, r.scheme, r.error)
    return EXIT_OK


def cmd_nullsteer(args):
    cfg = _load(args)
    n = args.n if args.n is not None else cfg.geometry.n_antennas
    geom = ArrayGeometry(n, cfg.geometry.base_frequency_hz)
    gap = GeometryGap(args.du, args.dr)
    link = LinkBudget.from_scenario(cfg.scenario, geom) if len(cfg.scenario.eves) == 1 else None
    sol = solve_null_steering(gap, geom, cfg.limits, link)
    _say(args, f"case            {sol.case_id}",
         f"delta_f_hz      {sol.delta_f_hz:.12g}",
         f"carrier_hz      {sol.carrier_hz:.12g}",
         f"feasible        {str(sol.feasible).lower()}",
         f"k               {sol.k}")
    if sol.achieved_rate_bps_hz is not None:
        _say(args, f"rate_bps_hz     {sol.achieved_rate_bps_hz:.12g}")
    if args.out:
        Path(args.out).write_text(json.dumps({
            "case_id": sol.case_id, "delta_f_hz": sol.delta_f_hz, "carrier_hz": sol.carrier_hz,
            "feasible": sol.feasible, "k": sol.k, "achieved_rate_bps_hz": sol.achieved_rate_bps_hz},
            indent=1))
    return EXIT_OK


def _parse_grid(text):
    try:
        start, stop, num = text.split(":")
        return np.linspace(float(start), float(stop), int(num))
    except ValueError:
        raise ValidationError("--grid", f"expected START:STOP:NUM, got {text!r}") from None


def cmd_beamscan(args):
    cfg = _load(args)
    grid = _parse_grid(args.grid)
    if grid.size == 0:
        raise ValidationError("--grid", "must not be empty")
    geom, bob = cfg.geometry, cfg.scenario.bob
    if args.ladder_step is not None:
        carrier = args.carrier or geom.base_frequency_hz
        plan = FrequencyPlan.ladder(geom, carrier, args.ladder_step,
                                    max(carrier, cfg.limits.carrier_max_hz))
        w = mrt_beamformer(geom, plan, bob, cfg.scenario.power_budget_w)
    else:
        res = fsa_solve(cfg.scenario, geom, cfg.limits, cfg.optimizer)
        plan, w = res.plan, res.beamformer
    if args.axis == "angle":
        table = harness.beam_pattern_scan(geom, plan, w, "angle", np.sin(np.deg2rad(grid)),
                                          range_m=bob.range_m)
        table[:, 0] = grid
        header = "angle_deg,gain\n"
    else:
        table = harness.beam_pattern_scan(geom, plan, w, "range", grid,
                                          spatial_angle=bob.spatial_angle)
        header = "range_m,gain\n"
    body = "".join(f"{c:.12g},{g:.12g}\n" for c, g in table)
    _emit(header + body, args.out)
    return EXIT_OK


def cmd_converge(args):
    cfg = _load(args)
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError:
        raise ValidationError("--sizes", "expected comma-separated integers") from None
    for n in sizes:
        if n < 1 or n % 2 == 0:
            raise ValidationError("--sizes", f"antenna counts must be odd, got {n}")
    results = harness.convergence_study(cfg, sizes)
    _emit(harness.convergence_table(results), args.out)
    for n in sizes:
        r = results[n]
        log.info("N=%d iterations=%d converged=%s", n, r.iterations, r.converged)
    return EXIT_OK


def cmd_gradcheck(args):
    cfg = _load(args)
    worst = audit_gradients(cfg.scenario, cfg.geometry, cfg.limits, args.points, cfg.seed)
    for name, err in worst.items():
        print(f"{name:14s} max_rel_err {err:.3e}")
    if args.out:
        Path(args.out).write_text(json.dumps(worst, indent=1))
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "nullsteer": cmd_nullsteer,
            "beamscan": cmd_beamscan, "converge": cmd_converge, "gradcheck": cmd_gradcheck}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"fsa-lab: {exc}\n\n{parser.format_usage()}\n{SCHEMA_HELP}")
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    if args.command is None:
        sys.stderr.write(parser.format_usage() + "\n" + SCHEMA_HELP)
        return EXIT_USAGE
    level = logging.ERROR if args.quiet else (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ParseError, ValidationError) as exc:
        sys.stderr.write(f"fsa-lab: invalid config: {exc}\n{SCHEMA_HELP}")
        return EXIT_USAGE
    except Exception as exc:
        log.error("%s failed: %s: %s", args.command, type(exc).__name__, exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
