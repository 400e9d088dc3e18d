"""Config-driven sweeps, beam-pattern scans and convergence studies.

Config files are JSON with a top-level ``"schema"`` version.  Angles are in
degrees in files and converted to ``u = sin(theta)`` on load.  Sweeps write a
CSV with a fixed column order and 12 significant digits so that reruns with
the same seed are byte-identical.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .baselines import fda_solve, fpa_solve, fsa_solve, ma_secrecy, ma_solve
from .bcd import OptimizerConfig, bcd_solve
from .model import ArrayGeometry, FrequencyPlan, Terminal, default_path_gain, steering_vector
from .nullsteer import FrequencyLimits
from .secrecy import Scenario, secrecy_rate

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SCHEMES = ("FSA", "MA", "FDA", "FPA")
SWEEP_VARIABLES = ("transmit_power_dbm", "n_antennas", "max_offset_hz")
CSV_COLUMNS = ("sweep_var", "scheme", "secrecy_bps_hz", "rate_bob", "rate_eves",
               "converged", "iters", "wall_ms")
CONVERGENCE_SIZES = (13, 17, 23, 27)
THREADS_ENV = "FSA_LAB_THREADS"


class ParseError(ValueError):
    """Config file is not valid JSON or a value has the wrong type."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class ValidationError(ValueError):
    """Config parses but breaks an invariant."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(watt):
    return 10.0 * np.log10(np.asarray(watt, dtype=float)) + 30.0


@dataclass(frozen=True)
class ExperimentConfig:
    geometry: ArrayGeometry
    scenario: Scenario
    limits: FrequencyLimits
    optimizer: OptimizerConfig
    sweep_variable: str
    grid: tuple
    schemes: tuple
    output: str | None = None
    trace_output: str | None = None
    seed: int = 0
    record_timing: bool = True
    raw: dict = field(default_factory=dict, repr=False, compare=False)


@dataclass
class ResultRow:
    sweep_value: float
    scheme: str
    secrecy_bps_hz: float | None
    rate_bob: float | None
    rate_eves: float | None
    converged: bool
    iterations: int
    wall_ms: float
    solution: dict | None = field(default=None, repr=False)
    trace: dict | None = field(default=None, repr=False)
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def sort_key(self):
        return (self.sweep_value, self.scheme)


# ---------------------------------------------------------------- config

def default_config_path() -> Path:
    return Path(str(resources.files("fsa_lab") / "data" / "reference_scenario.json"))


def _get(d, key, path, kind=None, default=...):
    if key not in d:
        if default is ...:
            raise ValidationError(f"{path}.{key}".lstrip("."), "missing")
        return default
    value = d[key]
    wrong = kind is not None and not isinstance(value, kind)
    if wrong or (isinstance(value, bool) and kind is not bool):
        raise ParseError(f"{path}.{key}".lstrip("."), f"expected {_kind_name(kind)}, got {value!r}")
    return value


def _kind_name(kind):
    if isinstance(kind, tuple):
        return " or ".join(k.__name__ for k in kind)
    return kind.__name__


_NUM = (int, float)


def _gain(entry, path, f0, range_m):
    if entry == "free-space":
        return default_path_gain(f0, range_m)
    if isinstance(entry, _NUM) and not isinstance(entry, bool):
        return complex(entry)
    if (isinstance(entry, list) and len(entry) == 2
            and all(isinstance(v, _NUM) and not isinstance(v, bool) for v in entry)):
        return complex(entry[0], entry[1])
    raise ParseError(path, 'expected "free-space", a number or [re, im]')


def _terminal(entry, path, f0):
    if not isinstance(entry, dict):
        raise ParseError(path, "expected an object")
    angle = _get(entry, "angle_deg", path, _NUM)
    rng = _get(entry, "range_m", path, _NUM)
    if not -90 <= angle <= 90:
        raise ValidationError(f"{path}.angle_deg", "must lie in [-90, 90]")
    if not rng > 0:
        raise ValidationError(f"{path}.range_m", "must be positive")
    gain = _gain(entry.get("gain", "free-space"), f"{path}.gain", f0, rng)
    return Terminal(float(np.sin(np.deg2rad(angle))), float(rng), gain)


def _optimizer(entry, seed):
    if not isinstance(entry, dict):
        raise ParseError("optimizer", "expected an object")
    known = {f.name: f for f in fields(OptimizerConfig)}
    kwargs = {}
    for key, value in entry.items():
        if key not in known or key == "rng_seed":
            hint = "set the top-level seed instead" if key == "rng_seed" else "unknown key"
            raise ValidationError(f"optimizer.{key}", hint)
        kind = {"bool": bool, "int": int}.get(str(known[key].type), _NUM)
        if not isinstance(value, kind) or (kind is not bool and isinstance(value, bool)):
            raise ParseError(f"optimizer.{key}", f"expected {_kind_name(kind)}, got {value!r}")
        kwargs[key] = value
    kwargs["rng_seed"] = seed
    try:
        return OptimizerConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ValidationError("optimizer", str(exc)) from exc


def config_from_dict(data: dict) -> ExperimentConfig:
    """Validate a parsed config document; see :func:`load_config`."""
    if not isinstance(data, dict):
        raise ParseError("<root>", "expected a JSON object")
    schema = _get(data, "schema", "", int)
    if schema != SCHEMA_VERSION:
        raise ValidationError("schema", f"unsupported version {schema}, expected {SCHEMA_VERSION}")

    geo = _get(data, "geometry", "", dict)
    n = _get(geo, "n_antennas", "geometry", int)
    f0 = float(_get(geo, "base_frequency_hz", "geometry", _NUM))
    if n < 1 or n % 2 == 0:
        raise ValidationError("geometry.n_antennas", f"must be a positive odd integer, got {n}")
    if not f0 > 0:
        raise ValidationError("geometry.base_frequency_hz", "must be positive")
    geom = ArrayGeometry(n, f0)

    scen = _get(data, "scenario", "", dict)
    bob = _terminal(_get(scen, "bob", "scenario"), "scenario.bob", f0)
    eves_raw = _get(scen, "eves", "scenario", list)
    eves = tuple(_terminal(e, f"scenario.eves[{i}]", f0) for i, e in enumerate(eves_raw))
    noise_dbm = _get(scen, "noise_power_dbm", "scenario", _NUM)
    power_dbm = _get(scen, "transmit_power_dbm", "scenario", _NUM)
    scenario = Scenario(bob, eves, float(dbm_to_watt(noise_dbm)), float(dbm_to_watt(power_dbm)))

    lim = _get(data, "limits", "", dict)
    f_h = float(_get(lim, "f_h_hz", "limits", _NUM))
    df_max = float(_get(lim, "max_offset_hz", "limits", _NUM))
    try:
        limits = FrequencyLimits(f_h, df_max)
        limits.check(geom)
    except ValueError as exc:
        raise ValidationError("limits", str(exc)) from exc

    seed = _get(data, "seed", "", int, 0)
    optimizer = _optimizer(data.get("optimizer", {}), seed)

    sweep = _get(data, "sweep", "", dict)
    variable = _get(sweep, "variable", "sweep", str)
    if variable not in SWEEP_VARIABLES:
        raise ValidationError("sweep.variable", f"must be one of {', '.join(SWEEP_VARIABLES)}")
    grid = _get(sweep, "grid", "sweep", list)
    if not grid:
        raise ValidationError("sweep.grid", "must not be empty")
    for i, v in enumerate(grid):
        if not isinstance(v, _NUM) or isinstance(v, bool):
            raise ParseError(f"sweep.grid[{i}]", f"expected a number, got {v!r}")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValidationError("sweep.grid", "must be strictly increasing")
    if variable == "n_antennas":
        bad = [v for v in grid if int(v) != v or v < 1 or int(v) % 2 == 0]
        if bad:
            raise ValidationError("sweep.grid", f"antenna counts must be odd integers, got {bad}")
    if variable == "max_offset_hz":
        for v in grid:
            try:
                FrequencyLimits(f_h, float(v)).check(geom)
            except ValueError as exc:
                raise ValidationError("sweep.grid", str(exc)) from exc

    schemes = _get(data, "schemes", "", list, list(SCHEMES))
    unknown = [s for s in schemes if s not in SCHEMES]
    if unknown or not schemes or len(set(schemes)) != len(schemes):
        raise ValidationError("schemes", f"must be distinct names from {', '.join(SCHEMES)}")

    output = _get(data, "output", "", (str, type(None)), None)
    trace_output = _get(data, "trace_output", "", (str, type(None)), None)
    timing = _get(data, "record_timing", "", bool, True)
    return ExperimentConfig(geom, scenario, limits, optimizer, variable,
                            tuple(float(v) for v in grid), tuple(schemes), output,
                            trace_output, seed, timing, copy.deepcopy(data))


def load_config(path) -> ExperimentConfig:
    """Read and validate a JSON experiment config."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError("<file>", str(exc)) from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError("<json>", f"line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return config_from_dict(data)


def apply_overrides(data: dict, overrides) -> dict:
    """Apply ``dotted.key=value`` overrides to a raw config document.

    Values are parsed as JSON when possible (numbers, lists, booleans) and
    kept as strings otherwise.  Keys must already exist, except inside
    ``optimizer`` and for top-level optional keys.
    """
    data = copy.deepcopy(data)
    optional_top = {"seed", "output", "trace_output", "record_timing", "schemes", "optimizer"}
    for item in overrides:
        if "=" not in item:
            raise ValidationError(item, "override must look like key=value")
        key, text = item.split("=", 1)
        parts = key.strip().split(".")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = data
        for depth, part in enumerate(parts[:-1]):
            if isinstance(node, list) and part.isdigit() and int(part) < len(node):
                node = node[int(part)]
                continue
            if not isinstance(node, dict) or part not in node:
                if depth == 0 and part == "optimizer" and isinstance(node, dict):
                    node = node.setdefault("optimizer", {})
                    continue
                raise ValidationError(key, "unknown config key")
            node = node[part]
        last = parts[-1]
        if isinstance(node, list) and last.isdigit() and int(last) < len(node):
            node[int(last)] = value
            continue
        allowed = (isinstance(node, dict) and (last in node
                   or (len(parts) == 1 and last in optional_top)
                   or parts[0] == "optimizer"))
        if not allowed:
            raise ValidationError(key, "unknown config key")
        node[last] = value
    return data


# ---------------------------------------------------------------- sweeps

def point_problem(config: ExperimentConfig, value: float):
    """``(scenario, geom, limits)`` at one grid value of the sweep variable."""
    scenario, geom, limits = config.scenario, config.geometry, config.limits
    if config.sweep_variable == "transmit_power_dbm":
        scenario = scenario.with_power(float(dbm_to_watt(value)))
    elif config.sweep_variable == "n_antennas":
        geom = ArrayGeometry(int(value), geom.base_frequency_hz)
    else:
        limits = FrequencyLimits(limits.carrier_max_hz, float(value))
    return scenario, geom, limits


def _warm_started(config: ExperimentConfig, scheme: str) -> bool:
    """Whether the previous grid point's optimum stays feasible at the next one.

    Raising power or the offset cap only enlarges the feasible set, so the
    previous solution is a valid extra start and the best-of rate cannot drop.
    """
    if config.sweep_variable == "transmit_power_dbm":
        return scheme != "FPA"
    if config.sweep_variable == "max_offset_hz":
        return scheme in ("FSA", "FDA")
    return False


def _rebase(plan: FrequencyPlan, limits: FrequencyLimits) -> FrequencyPlan:
    return FrequencyPlan(plan.carrier_hz, plan.increments_hz,
                         limits.carrier_max_hz, limits.increment_max_hz)


def _weights_json(w):
    return [[float(z.real), float(z.imag)] for z in np.asarray(w)]


def _plan_solution(result):
    return {"carrier_hz": float(result.plan.carrier_hz),
            "increments_hz": result.plan.increments_hz.tolist(),
            "weights": _weights_json(result.beamformer.weights)}


def _ok_row(value, scheme, report, converged, iters, wall_ms, solution, trace):
    return ResultRow(value, scheme, report.secrecy_rate_bps_hz, report.rate_bob_bps_hz,
                     report.rate_eves_bps_hz, bool(converged), int(iters), wall_ms,
                     solution, trace)


def _run_group(config: ExperimentConfig, schemes, grid):
    """Run a chain of schemes over grid values in order; returns rows."""
    rows = []
    prev = {}
    for value in grid:
        scenario, geom, limits = point_problem(config, value)
        here = {}
        for scheme in schemes:
            warm = prev.get(scheme) if _warm_started(config, scheme) else None
            start = time.perf_counter()
            try:
                if scheme == "FPA":
                    res = fpa_solve(scenario, geom)
                    row = _ok_row(value, scheme, res.report, True, 0, 0.0,
                                  {"carrier_hz": float(res.plan.carrier_hz),
                                   "increments_hz": res.plan.increments_hz.tolist(),
                                   "weights": _weights_json(res.beamformer.weights)}, None)
                elif scheme == "MA":
                    res = ma_solve(scenario, geom, limits, config.optimizer,
                                   initial_positions=[warm] if warm is not None else None)
                    here[scheme] = np.array(res.configuration.positions_m)
                    row = _ok_row(value, scheme, res.report, res.converged, res.iterations, 0.0,
                                  {"positions_m": res.configuration.positions_m.tolist(),
                                   "weights": _weights_json(res.beamformer.weights)},
                                  res.trace.to_dict())
                else:
                    seeds = [_rebase(warm, limits)] if warm is not None else None
                    if scheme == "FDA":
                        res = fda_solve(scenario, geom, limits, config.optimizer, seeds)
                    else:
                        res = fsa_solve(scenario, geom, limits, config.optimizer, seeds,
                                        fda=here.get("FDA_result"))
                    here[scheme] = res.plan
                    if scheme == "FDA":
                        here["FDA_result"] = res
                    row = _ok_row(value, scheme, res.report, res.converged, res.iterations, 0.0,
                                  _plan_solution(res), res.trace.to_dict())
            except Exception as exc:  # one bad point must not kill the sweep
                log.warning("%s at %s=%g failed: %s", scheme, config.sweep_variable, value, exc)
                row = ResultRow(value, scheme, None, None, None, False, 0, 0.0,
                                error=f"{type(exc).__name__}: {exc}")
            row.wall_ms = (time.perf_counter() - start) * 1e3
            rows.append(row)
        prev = here
    return rows


def _tasks(config: ExperimentConfig):
    """Independent work units: FDA and FSA share a chain, others run alone."""
    groups = []
    if "FDA" in config.schemes or "FSA" in config.schemes:
        groups.append(tuple(s for s in ("FDA", "FSA") if s in config.schemes))
    groups += [(s,) for s in ("MA", "FPA") if s in config.schemes]
    tasks = []
    for group in groups:
        if any(_warm_started(config, s) for s in group):
            tasks.append((group, config.grid))
        else:
            tasks += [(group, (v,)) for v in config.grid]
    return tasks


def worker_count(n_tasks: int) -> int:
    raw = os.environ.get(THREADS_ENV, "1").strip() or "1"
    try:
        want = int(raw)
    except ValueError:
        raise ValidationError(THREADS_ENV, f"expected an integer, got {raw!r}") from None
    if want < 0:
        raise ValidationError(THREADS_ENV, "must be >= 0")
    if want == 0:
        want = os.cpu_count() or 1
    return max(1, min(want, n_tasks))


def _run_task(args):
    config, group, grid = args
    return _run_group(config, group, grid)


def run_sweep(config: ExperimentConfig, output=None, trace_output=None) -> list:
    """Solve every (grid value, scheme) pair and write the CSV if a path is set.

    Along power and offset sweeps each scheme is also started from its own
    optimum at the previous grid value.  Rows come back sorted by
    ``(sweep value, scheme)``.
    """
    tasks = _tasks(config)
    workers = worker_count(len(tasks))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_task, [(config, g, v) for g, v in tasks]))
    else:
        chunks = [_run_group(config, g, v) for g, v in tasks]
    rows = sorted((r for chunk in chunks for r in chunk), key=ResultRow.sort_key)

    output = output if output is not None else config.output
    if output:
        Path(output).write_text(rows_to_csv(rows, config.sweep_variable, config.record_timing))
    trace_output = trace_output if trace_output is not None else config.trace_output
    if trace_output:
        Path(trace_output).write_text(json.dumps(rows_to_json(rows, config), indent=1))
    return rows


def _fmt(value):
    return "" if value is None else format(float(value), ".12g")


def rows_to_csv(rows, sweep_variable: str, record_timing: bool = True) -> str:
    """CSV text; the ``sweep_var`` column holds the grid value of ``sweep_variable``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow([_fmt(r.sweep_value), r.scheme, _fmt(r.secrecy_bps_hz), _fmt(r.rate_bob),
                         _fmt(r.rate_eves), "true" if r.converged else "false", r.iterations,
                         _fmt(r.wall_ms) if record_timing else ""])
    return buf.getvalue()


def rows_to_json(rows, config: ExperimentConfig) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "sweep_variable": config.sweep_variable,
        "ma_benchmark": {"region": "(f_H/f0) * N * d0", "min_spacing": "d0",
                         "optimizer": "Rayleigh beamformer + projected ascent on positions"},
        "rows": [{"sweep_value": r.sweep_value, "scheme": r.scheme,
                  "secrecy_bps_hz": r.secrecy_bps_hz, "converged": r.converged,
                  "error": r.error, "solution": r.solution, "trace": r.trace} for r in rows],
    }


def rederive_secrecy(row: ResultRow, config: ExperimentConfig) -> float:
    """Recompute a row's secrecy rate from its stored solution."""
    scenario, geom, limits = point_problem(config, row.sweep_value)
    w = np.array([complex(re, im) for re, im in row.solution["weights"]])
    if "positions_m" in row.solution:
        return ma_secrecy(scenario, geom, row.solution["positions_m"], w).secrecy_rate_bps_hz
    plan = FrequencyPlan(row.solution["carrier_hz"], row.solution["increments_hz"],
                         limits.carrier_max_hz, max(limits.increment_max_hz, 0.0))
    return secrecy_rate(scenario, geom, plan, w).secrecy_rate_bps_hz


# ---------------------------------------------------------------- scans

def beam_pattern_scan(geom: ArrayGeometry, plan: FrequencyPlan, w, axis: str, grid, *,
                      range_m: float | None = None, spatial_angle: float | None = None,
                      t: float = 0.0) -> np.ndarray:
    """Normalized array gain ``|a(site)^H w|^2 / ||w||^2`` along one axis.

    ``axis="angle"`` scans ``u = sin(theta)`` over ``grid`` at fixed
    ``range_m``; ``axis="range"`` scans meters at fixed ``spatial_angle``.
    The gain is at most 1 and equals 1 where ``w`` is matched (MRT target).
    Returns an array of ``(coordinate, gain)`` rows.
    """
    grid = np.asarray(grid, dtype=float).ravel()
    if grid.size == 0:
        raise ValueError("grid must not be empty")
    w = np.asarray(getattr(w, "weights", w), dtype=complex)
    w = w / np.linalg.norm(w)
    if axis == "angle":
        if range_m is None:
            raise ValueError("angle scans need range_m")
        sites = [Terminal(u, range_m, 1.0) for u in grid]
    elif axis == "range":
        if spatial_angle is None:
            raise ValueError("range scans need spatial_angle")
        sites = [Terminal(spatial_angle, r, 1.0) for r in grid]
    else:
        raise ValueError(f"axis must be 'angle' or 'range', got {axis!r}")
    gains = [abs(np.vdot(steering_vector(geom, plan, s, t), w)) ** 2 for s in sites]
    return np.column_stack([grid, gains])


def convergence_study(config: ExperimentConfig, sizes=CONVERGENCE_SIZES) -> dict:
    """FSA objective traces for several array sizes at the config's base point.

    Returns ``{N: BcdResult}``.  Whether bigger arrays need more iterations
    is logged, not enforced.
    """
    out = {}
    for n in sizes:
        geom = ArrayGeometry(int(n), config.geometry.base_frequency_hz)
        out[int(n)] = bcd_solve(config.scenario, geom, config.limits, config.optimizer)
    iters = [out[n].iterations for n in sorted(out)]
    if any(b < a for a, b in zip(iters, iters[1:])):
        log.info("iteration counts not monotone in N: %s", dict(zip(sorted(out), iters)))
    return out


def convergence_table(results: dict) -> str:
    """CSV of ``(n_antennas, iteration, objective)`` rows."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("n_antennas", "iteration", "objective"))
    for n in sorted(results):
        for i, v in enumerate(results[n].trace.objective):
            writer.writerow((n, i, _fmt(v)))
    return buf.getvalue()


def with_seed(config: ExperimentConfig, seed: int) -> ExperimentConfig:
    return replace(config, seed=seed, optimizer=replace(config.optimizer, rng_seed=seed))
