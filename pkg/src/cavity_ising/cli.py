"""Command-line front end: ``cavity-ising <command> --config run.ini``.

The configuration is an INI document with a ``[model]`` section, optional
``[integrator]`` and ``[output]`` sections and at most one command section
named after the command (``[quench]``, ``[phase-diagram]`` ...). Missing
values fall back to the defaults below. Every run writes its CSV files and a
``manifest.json`` holding the fully resolved configuration.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import empirical_lambda_fit, lz_ground_probability
from .dynamics import IntegratorConfig, run_hysteresis, run_quench, run_ramp
from .errors import CavityIsingError, ConfigError
from .stationary import default_scan, find_bifurcations, make_point, phase_diagram, stationary_points
from .tfim import ModelParams, make_kgrid

log = logging.getLogger(__name__)

ENV_OUT = "CAVITY_ISING_OUT"
DEFAULT_OUT = "cavity_ising_out"

COMMANDS = ("stationary", "bifurcation", "phase-diagram", "quench", "ramp", "hysteresis",
            "lz-compare", "sweep")
SWEEPABLE = ("bifurcation", "quench", "ramp")

_MODEL_KEYS = {f.name: (int if f.name == "n" else float) for f in fields(ModelParams)}
_INTEGRATOR_KEYS = {"dt": float, "sample_stride": int}
_RAMP_KEYS = {"eps0": float, "epsf": float, "t_ramp": float, "park_fraction": float}
_RAMP_DEFAULTS = {"eps0": 2.23, "epsf": 3.6, "t_ramp": 400.0, "park_fraction": 0.2}

REQUIRED = object()

# key -> (type, default); None marks an optional key with no default
_BLOCKS = {
    "stationary": {"eps": (float, None), "scan_min": (float, None),
                   "scan_max": (float, None), "samples": (int, 4000)},
    "bifurcation": {},
    "phase-diagram": {"axis": (str, "delta_c"), "values": ("values", REQUIRED)},
    "quench": {"delta_eps": (float, 0.01), "t_total": (float, 400.0), "start": (str, "fold")},
    "ramp": {k: (_RAMP_KEYS[k], v) for k, v in _RAMP_DEFAULTS.items()},
    "hysteresis": {k: (_RAMP_KEYS[k], v) for k, v in _RAMP_DEFAULTS.items()},
    "lz-compare": {"eps0": (float, 2.23), "epsf": (float, 3.6),
                   "t_ramps": ("values", (400.0, 800.0, 1200.0, 1600.0, 2000.0)),
                   "park_fraction": (float, 0.2)},
    "sweep": {"axis": (str, "bx"), "values": ("values", REQUIRED), "command": (str, "bifurcation")},
}

TRAJECTORY_HEADER = ("t", "eps", "x_a", "p_a", "b_eff", "x_avg", "p_g", "n_ex")
STATIONARY_HEADER = ("x_a", "eps", "b_eff", "x_avg", "slope", "stable")
BIFURCATION_HEADER = ("axis_value", "eps1", "eps2", "x_a1", "x_a2", "b_eff1", "b_eff2")
LZ_HEADER = ("t_ramp", "lambda_c", "n_ex_sim", "n_ex_lz", "p_g_sim", "p_g_lz")
SWEEP_HEADER = ("axis_value", "t_c", "lambda_c", "p_g", "n_ex", "b_eff_end")


@dataclass
class RunConfig:
    command: str
    model: ModelParams = field(default_factory=ModelParams)
    block: dict = field(default_factory=dict)
    dt: float = 0.005
    sample_stride: int = 20
    output_dir: str | None = None

    @property
    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(dt=self.dt, sample_stride=self.sample_stride)


def parse_values(text: str) -> tuple[float, ...]:
    """``"start:stop:count"`` (inclusive linspace) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"range {text!r} must be start:stop:count")
        start, stop = float(parts[0]), float(parts[1])
        count = int(parts[2])
        if count < 1:
            raise ConfigError(f"range {text!r} needs a positive count")
        return tuple(float(v) for v in np.linspace(start, stop, count))
    values = tuple(float(v) for v in text.split(",") if v.strip())
    if not values:
        raise ConfigError("empty value list")
    return values


def _convert(section: str, key: str, raw: str, kind):
    try:
        if kind == "values":
            value = parse_values(raw)
            bad = [v for v in value if not math.isfinite(v)]
        elif kind is str:
            return raw.strip()
        else:
            value = kind(raw.strip())
            bad = [] if math.isfinite(value) else [value]
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} ({exc})") from None
    if bad:
        raise ConfigError(f"[{section}] {key}: values must be finite, got {raw!r}")
    return value


def _read_section(parser, section: str, spec: dict) -> dict:
    out = {}
    for key, raw in parser.items(section):
        if key not in spec:
            raise ConfigError(f"[{section}] unknown key {key!r}; allowed: {', '.join(sorted(spec)) or 'none'}")
        out[key] = _convert(section, key, raw, spec[key])
    return out


def _sweep_spec(sub: str) -> dict:
    spec = {k: kind for k, (kind, _) in _BLOCKS["sweep"].items()}
    spec.update({k: kind for k, (kind, _) in _BLOCKS[sub].items()})
    return spec


def _fill_block(command: str, given: dict) -> dict:
    block = {}
    if command == "sweep":
        sub = given.get("command", _BLOCKS["sweep"]["command"][1])
        if sub not in SWEEPABLE:
            raise ConfigError(f"[sweep] command must be one of {', '.join(SWEEPABLE)}, got {sub!r}")
        defaults = {**_BLOCKS["sweep"], **_BLOCKS[sub]}
    else:
        defaults = _BLOCKS[command]
    for key, (_, default) in defaults.items():
        if key in given:
            block[key] = given[key]
        elif default is REQUIRED:
            raise ConfigError(f"[{command}] missing required key {key!r}")
        elif default is not None:
            block[key] = default
    return block


def _section_name(name: str) -> str:
    return name.strip().lower().replace("_", "-")


def parse_config(text: str, command: str | None = None) -> RunConfig:
    """Parse an INI document into a validated :class:`RunConfig`.

    ``command`` (from the command line) selects the command; without it the
    document must contain exactly one command section. A command with no
    section of its own runs with default parameters.
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None

    sections = {}
    for name in parser.sections():
        key = _section_name(name)
        if key in sections:
            raise ConfigError(f"section [{name}] given twice")
        sections[key] = name
    unknown = set(sections) - {"model", "integrator", "output", *COMMANDS}
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    blocks = [s for s in sections if s in COMMANDS]
    if len(blocks) > 1:
        raise ConfigError(f"exactly one command section allowed, found: {', '.join(blocks)}")
    if command is None:
        if not blocks:
            raise ConfigError(f"missing command section; expected one of: {', '.join(COMMANDS)}")
        command = blocks[0]
    command = _section_name(command)
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    if blocks and blocks[0] != command:
        raise ConfigError(f"section [{sections[blocks[0]]}] does not match command {command!r}")

    model_raw = _read_section(parser, sections["model"], _MODEL_KEYS) if "model" in sections else {}
    n = model_raw.get("n", ModelParams.n)
    if n % 2:
        raise ConfigError(f"[model] n must be even, got {n}")
    try:
        model = ModelParams(**model_raw)
    except CavityIsingError as exc:
        raise ConfigError(f"[model] {exc}") from None

    integ = _read_section(parser, sections["integrator"], _INTEGRATOR_KEYS) if "integrator" in sections else {}
    output = _read_section(parser, sections["output"], {"directory": str}) if "output" in sections else {}

    given = {}
    if blocks:
        name = sections[blocks[0]]
        if command == "sweep":
            sub = parser.get(name, "command", fallback=_BLOCKS["sweep"]["command"][1]).strip()
            spec = _sweep_spec(sub) if sub in SWEEPABLE else {k: v[0] for k, v in _BLOCKS["sweep"].items()}
        else:
            spec = {k: kind for k, (kind, _) in _BLOCKS[command].items()}
        given = _read_section(parser, name, spec)
    block = _fill_block(command, given)

    cfg = RunConfig(command=command, model=model, block=block,
                    dt=integ.get("dt", 0.005), sample_stride=integ.get("sample_stride", 20),
                    output_dir=output.get("directory"))
    try:
        cfg.integrator
    except CavityIsingError as exc:
        raise ConfigError(f"[integrator] {exc}") from None
    return cfg


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(repr(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def render_config(cfg: RunConfig) -> str:
    """INI text that parses back to ``cfg``."""
    lines = ["[model]"]
    lines += [f"{f.name} = {_format_value(getattr(cfg.model, f.name))}" for f in fields(ModelParams)]
    lines += ["", "[integrator]", f"dt = {cfg.dt!r}", f"sample_stride = {cfg.sample_stride}"]
    if cfg.output_dir is not None:
        lines += ["", "[output]", f"directory = {cfg.output_dir}"]
    lines += ["", f"[{cfg.command}]"]
    lines += [f"{k} = {_format_value(v)}" for k, v in cfg.block.items() if v is not None]
    return "\n".join(lines) + "\n"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    return format(float(value), ".12g")


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _trajectory_rows(traj):
    cols = traj.columns()
    return zip(*(cols[h] for h in TRAJECTORY_HEADER))


def _bifurcation_row(value, result):
    if result is None:
        return (value, None, None, None, None, None, None)
    lo, up = result.lower, result.upper
    return (value, lo.eps, up.eps, lo.x_a, up.x_a, lo.b_eff, up.b_eff)


def _maybe(value):
    return None if value is None else float(value)


# worker functions live at module level so they can be sent to a process pool

def _quench_summary(args):
    params, block, integ = args
    rep = run_quench(params, block["delta_eps"], block["t_total"], integ, start=block["start"])
    return {"eps2": rep.bifurcation.eps2, "eps_before": rep.eps_before, "eps_after": rep.eps_after,
            "t_c": _maybe(rep.t_c), "lambda_c": _maybe(rep.lambda_c), "p_g": rep.p_g,
            "n_ex": rep.n_ex, "b_eff_end": rep.b_eff_end,
            "max_norm_drift": rep.trajectory.max_norm_drift}, rep


def _ramp_summary(args):
    params, block, integ = args
    rep = run_ramp(params, block["eps0"], block["epsf"], block["t_ramp"], integ,
                   park_fraction=block["park_fraction"])
    return {"t_ramp": rep.t_ramp, "t_c": _maybe(rep.t_c), "lambda_c": _maybe(rep.lambda_c),
            "p_g": rep.p_g, "n_ex": rep.n_ex, "b_eff_end_of_ramp": rep.b_eff_end_of_ramp,
            "b_eff_end": rep.b_eff_end, "max_norm_drift": rep.trajectory.max_norm_drift}, rep


def _sweep_row(args):
    params, sub, block, integ = args
    if sub == "bifurcation":
        return find_bifurcations(params)
    summary, _ = (_quench_summary if sub == "quench" else _ramp_summary)((params, block, integ))
    return summary


def _lz_row(args):
    params, block, integ, t_ramp = args
    summary, _ = _ramp_summary((params, {**block, "t_ramp": t_ramp}, integ))
    return summary


def _pool_map(func, tasks, jobs):
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            return list(pool.map(func, tasks))
    return [func(t) for t in tasks]


def execute(cfg: RunConfig, out_dir: Path, jobs: int = 1) -> dict:
    """Run ``cfg``, write its CSV files into ``out_dir`` and return the result summary."""
    out_dir.mkdir(parents=True, exist_ok=True)
    params, block, integ = cfg.model, cfg.block, cfg.integrator
    cmd = cfg.command
    results: dict = {}
    files: list[str] = []

    if cmd == "stationary":
        eps = block.get("eps")
        lo, hi = default_scan(params, eps)
        lo, hi = block.get("scan_min", lo), block.get("scan_max", hi)
        if eps is not None:
            points = stationary_points(eps, params, scan=(lo, hi), samples=block["samples"])
        else:
            points = [make_point(x, params) for x in np.linspace(lo, hi, block["samples"])]
        write_csv(out_dir / "stationary.csv", STATIONARY_HEADER,
                  ((p.x_a, p.eps, p.b_eff, p.x_s, p.slope, p.stable) for p in points))
        files.append("stationary.csv")
        results["points"] = len(points)

    elif cmd == "bifurcation":
        res = find_bifurcations(params)
        write_csv(out_dir / "bifurcation.csv", BIFURCATION_HEADER, [_bifurcation_row(params.bx, res)])
        files.append("bifurcation.csv")
        results.update(eps1=res.eps1, eps2=res.eps2)

    elif cmd == "phase-diagram":
        rows = phase_diagram(params, block["axis"], block["values"], jobs=jobs)
        write_csv(out_dir / "bifurcation.csv", BIFURCATION_HEADER,
                  (_bifurcation_row(r.value, r.result) for r in rows))
        files.append("bifurcation.csv")
        results["bistable_rows"] = sum(r.bistable for r in rows)
        results["rows"] = len(rows)

    elif cmd in ("quench", "ramp"):
        summary, rep = (_quench_summary if cmd == "quench" else _ramp_summary)((params, block, integ))
        write_csv(out_dir / "trajectory.csv", TRAJECTORY_HEADER, _trajectory_rows(rep.trajectory))
        files.append("trajectory.csv")
        results.update(summary)

    elif cmd == "hysteresis":
        rep = run_hysteresis(params, block["eps0"], block["epsf"], block["t_ramp"], integ,
                             park_fraction=block["park_fraction"])
        traj = rep.trajectory
        write_csv(out_dir / "trajectory.csv", TRAJECTORY_HEADER, _trajectory_rows(traj))
        files.append("trajectory.csv")
        results.update(lambda_c_up=_maybe(rep.up.lambda_c), lambda_c_down=_maybe(rep.down.lambda_c),
                       n_ex_up=rep.up.n_ex, n_ex_down=rep.down.n_ex, loop_area=rep.loop_area(),
                       max_norm_drift=traj.max_norm_drift)

    elif cmd == "lz-compare":
        ramp_block = {k: block[k] for k in ("eps0", "epsf", "park_fraction")}
        tasks = [(params, ramp_block, integ, t) for t in block["t_ramps"]]
        summaries = _pool_map(_lz_row, tasks, jobs)
        grid = make_kgrid(params.n)
        rows = []
        for s in summaries:
            lz = lz_ground_probability(s["lambda_c"], grid, params.j0) if s["lambda_c"] is not None else None
            rows.append((s["t_ramp"], s["lambda_c"], s["n_ex"], lz and lz.n_ex, s["p_g"], lz and lz.p_g))
        write_csv(out_dir / "lz.csv", LZ_HEADER, rows)
        files.append("lz.csv")
        pairs = [(s["t_ramp"], s["lambda_c"]) for s in summaries if s["lambda_c"] is not None]
        if len(pairs) >= 3:
            fit = empirical_lambda_fit(pairs)
            results.update(scaling_c=fit.c, scaling_max_deviation=fit.max_deviation)
        diffs = [abs(r[2] - r[3]) for r in rows if r[3] is not None]
        results["max_abs_nex_minus_lz"] = max(diffs) if diffs else None

    elif cmd == "sweep":
        sub, axis = block["command"], block["axis"]
        sub_block = {k: v for k, v in block.items() if k not in _BLOCKS["sweep"]}
        tasks = []
        for value in block["values"]:
            p, b = params, dict(sub_block)
            if axis in _MODEL_KEYS:
                try:
                    p = params.with_(**{axis: _MODEL_KEYS[axis](value)})
                except CavityIsingError as exc:
                    raise ConfigError(f"[sweep] {axis}={value!r}: {exc}") from None
            elif axis in b:
                b[axis] = value
            else:
                raise ConfigError(f"[sweep] axis {axis!r} is neither a model parameter nor a {sub} key")
            tasks.append((p, sub, b, integ))
        outcomes = _pool_map(_sweep_row, tasks, jobs)
        if sub == "bifurcation":
            write_csv(out_dir / "bifurcation.csv", BIFURCATION_HEADER,
                      (_bifurcation_row(v, r) for v, r in zip(block["values"], outcomes)))
            files.append("bifurcation.csv")
        else:
            write_csv(out_dir / "sweep.csv", SWEEP_HEADER,
                      ((v, s["t_c"], s["lambda_c"], s["p_g"], s["n_ex"], s["b_eff_end"])
                       for v, s in zip(block["values"], outcomes)))
            files.append("sweep.csv")
        results["rows"] = len(outcomes)

    return {"results": results, "files": files}


def _resolve_out(cli_out: str | None, cfg: RunConfig) -> Path:
    if cli_out:
        return Path(cli_out)
    if cfg.output_dir:
        return Path(cfg.output_dir)
    return Path(os.environ.get(ENV_OUT) or DEFAULT_OUT)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cavity-ising", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, help="INI run configuration (defaults if omitted)")
    parser.add_argument("--out", help=f"output directory (default: [output] directory, ${ENV_OUT}, "
                                      f"or ./{DEFAULT_OUT})")
    parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                        help="worker processes for sweeps (default: logical cores)")
    parser.add_argument("--dt", type=float, help="override the integrator step")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        text = args.config.read_text(encoding="utf-8") if args.config else ""
        cfg = parse_config(text, args.command)
        if args.dt is not None:
            if not args.dt > 0:
                raise ConfigError(f"--dt must be positive, got {args.dt}")
            cfg.dt = args.dt
        if args.jobs < 1:
            raise ConfigError(f"--jobs must be >= 1, got {args.jobs}")
        out_dir = _resolve_out(args.out, cfg)
        start = time.perf_counter()
        outcome = execute(cfg, out_dir, jobs=args.jobs)
        manifest = {
            "tool": "cavity-ising",
            "version": __version__,
            "command": cfg.command,
            "config": render_config(cfg),
            "wall_time_s": time.perf_counter() - start,
            **outcome,
        }
        with open(out_dir / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        log.error("%s", exc)
        return 2 if args.config and not args.config.exists() else 1
    except CavityIsingError as exc:
        log.error("%s", exc)
        return exc.exit_code
    log.info("wrote %s to %s", ", ".join(outcome["files"] + ["manifest.json"]), out_dir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
