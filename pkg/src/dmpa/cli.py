"""Command-line front end: ``dmpa solve|simulate|sweep|gce|compare``.

Exit codes: 0 ok, 2 config error, 3 analytic non-convergence, 4 degenerate
simulation, 5 I/O error.
"""
from __future__ import annotations

import argparse
import concurrent.futures as cf
import hashlib
import itertools
import json
import math
import os
import platform
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from ._io import atomic_write_text, fmt_num
from .analytic import DEFAULT_MAX_ITER, DEFAULT_TOL, GCEVerdict, exponents_both_groups
from .errors import (
    ClosedFormMismatch,
    ConfigError,
    DegenerateDenominator,
    DMPAError,
    GraphFormatError,
    NoConvergence,
    NotAnalytic,
    ParamValidationError,
    SimulationDegenerate,
)
from .estimation import (
    CurveTrend,
    Direction,
    compare_analytic_empirical,
    curve_trend,
    gce_curve,
    gce_curve_csv,
    pooled_estimate,
)
from .model import (
    Color,
    MODEL_KEYS,
    ModelParams,
    analysis_view,
    apply_overrides,
    load_config,
    params_from_mapping,
    replace_param,
    validate_params,
)
from .simulator import BACKEND, Simulation, SimConfig, import_graph

EXIT_OK, EXIT_CONFIG, EXIT_NOCONV, EXIT_DEGENERATE, EXIT_IO = 0, 2, 3, 4, 5
RUN_KEYS = ("steps", "seed", "seeds", "max_rejections", "initial_graph")
DEFAULT_STEPS = 100_000
DEFAULT_K_GRID = (2, 4, 8, 16, 32)
GRID_DELTA = 10.0

REPORT_COLUMNS = (
    "theta_in_star", "theta_out_star", "c_in_red", "c_out_red", "c_in_blue", "c_out_blue",
    "gamma_in_red", "gamma_out_red", "gamma_in_blue", "gamma_out_blue",
    "gce_verdict", "derivation", "contraction_norm", "iterations",
)


# -- helpers --------------------------------------------------------------------


def worker_count() -> int:
    raw = os.environ.get("DMPA_THREADS", "")
    try:
        n = int(raw) if raw else (os.cpu_count() or 1)
    except ValueError:
        raise ConfigError(f"DMPA_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def derive_seed(base: int, index: int) -> int:
    """Independent 64-bit stream seed for cell/replicate ``index``."""
    return int(np.random.SeedSequence([int(base), int(index)]).generate_state(1, np.uint64)[0])


def _json_default(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    raise TypeError(type(x))


def _safe_json(obj):
    """Replace non-finite floats by the lowercase literals used in CSVs."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return fmt_num(obj)
    if isinstance(obj, dict):
        return {k: _safe_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_safe_json(v) for v in obj]
    return obj


def dumps(obj) -> str:
    return json.dumps(_safe_json(obj), indent=2, sort_keys=True, default=_json_default,
                      allow_nan=False) + "\n"


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class RunContext:
    command: str
    mapping: dict
    params: ModelParams | None
    seed: int
    out: str
    artifacts: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def config_hash(self) -> str:
        canon = json.dumps({k: str(v) for k, v in sorted(self.mapping.items())}, sort_keys=True)
        return _sha256(canon)

    def write(self, name: str, text: str) -> str:
        os.makedirs(self.out, exist_ok=True)
        path = os.path.join(self.out, name)
        atomic_write_text(path, text)
        self.artifacts.append({"path": name, "sha256": _sha256(text)})
        return path

    def write_manifest(self) -> str:
        manifest = {
            "tool": "dmpa",
            "version": __version__,
            "command": self.command,
            "config_hash": self.config_hash(),
            "config": {k: str(v) for k, v in sorted(self.mapping.items())},
            "seed": self.seed,
            "artifacts": self.artifacts,
            "timings": self.timings,
            "backend": BACKEND,
            "python": platform.python_version(),
            "warnings": self.warnings,
        }
        os.makedirs(self.out, exist_ok=True)
        path = os.path.join(self.out, "manifest.json")
        atomic_write_text(path, dumps(manifest))
        return path


def _load(args, require_config=True) -> dict:
    if args.config:
        mapping = load_config(args.config, args.set)
    elif require_config:
        raise ConfigError("--config is required")
    else:
        mapping = apply_overrides({}, args.set)
    unknown = sorted(set(mapping) - set(MODEL_KEYS) - set(RUN_KEYS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    return mapping


def _int_key(mapping, key, default):
    if key not in mapping:
        return default
    try:
        return int(float(mapping[key]))
    except ValueError:
        raise ConfigError(f"{key}: not an integer: {mapping[key]!r}") from None


def _params(mapping) -> ModelParams:
    return validate_params(params_from_mapping({k: v for k, v in mapping.items() if k in MODEL_KEYS}))


def _seed(args, mapping) -> int:
    seed = args.seed if args.seed is not None else _int_key(mapping, "seed", 0)
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must fit in 64 unsigned bits")
    return seed


def _steps(args, mapping) -> int:
    steps = args.steps if getattr(args, "steps", None) is not None else _int_key(mapping, "steps", DEFAULT_STEPS)
    if steps < 0:
        raise ConfigError("steps must be >= 0")
    return steps


def _sim_config(params, mapping, seed, steps) -> SimConfig:
    g0 = import_graph(mapping["initial_graph"]) if "initial_graph" in mapping else None
    max_rej = _int_key(mapping, "max_rejections", 100_000)
    try:
        return SimConfig(params, seed, steps, g0, max_rej)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def report_row(report) -> dict:
    js = report.to_json()
    row = {k: js.get(k, "") for k in REPORT_COLUMNS}
    return row


# -- solve ----------------------------------------------------------------------


def cmd_solve(args) -> int:
    mapping = _load(args)
    params = _params(mapping)
    ap = analysis_view(params)
    ctx = RunContext("solve", mapping, params, _seed(args, mapping), args.out)
    t0 = time.perf_counter()
    report = exponents_both_groups(ap, args.tol, args.max_iter)
    ctx.timings["solve_s"] = time.perf_counter() - t0
    text = dumps(report.to_json())
    ctx.warnings.extend(report.warnings)
    ctx.write("report.json", text)
    ctx.write_manifest()
    sys.stdout.write(text)
    return EXIT_OK


# -- simulate -------------------------------------------------------------------


def run_simulation(config: SimConfig, snapshots: int | None = None):
    from .simulator import geometric_schedule

    sim = Simulation(config)
    schedule = geometric_schedule(config.steps, snapshots) if snapshots else None
    graph, traj = sim.run(config.steps, schedule)
    return sim, graph, traj


def cmd_simulate(args) -> int:
    from .simulator import graph_to_text

    mapping = _load(args)
    params = _params(mapping)
    seed, steps = _seed(args, mapping), _steps(args, mapping)
    ctx = RunContext("simulate", mapping, params, seed, args.out)
    t0 = time.perf_counter()
    sim, graph, traj = run_simulation(_sim_config(params, mapping, seed, steps), args.snapshots)
    ctx.timings["simulate_s"] = time.perf_counter() - t0
    ctx.write("graph.edges", graph_to_text(graph))
    ctx.write("trajectory.csv", traj.to_csv())
    summary = {
        "steps": steps, "seed": seed, "nodes": graph.n_nodes, "edges": graph.n_edges,
        "theta_in": graph.theta().theta_in, "theta_out": graph.theta().theta_out,
        "frac_red_nodes": sim.n_red / steps if steps else math.nan,
        "event_counts": list(sim.event_counts), "rejections": sim.rejections,
        "resampled_events": sim.resamples, "backend": sim.backend,
    }
    ctx.write("summary.json", dumps(summary))
    ctx.write_manifest()
    sys.stdout.write(dumps(summary))
    return EXIT_OK


# -- sweep ----------------------------------------------------------------------


@dataclass(frozen=True)
class SweepSpec:
    base: dict
    axes: tuple          # ((names tuple, values tuple-of-tuples), ...)
    base_seed: int = 0
    out: str = "."

    def __post_init__(self):
        for names, values in self.axes:
            if not values:
                raise ConfigError(f"axis {','.join(names)} has an empty grid")
            for name in names:
                if name not in MODEL_KEYS:
                    raise ConfigError(f"axis parameter {name!r} is not a model key")
            for v in values:
                if len(v) != len(names):
                    raise ConfigError(f"axis {','.join(names)}: value {v} has wrong arity")

    @property
    def columns(self) -> list:
        return [n for names, _ in self.axes for n in names]

    def cells(self):
        for idx, combo in enumerate(itertools.product(*(vals for _, vals in self.axes))):
            assign = {}
            for (names, _), value in zip(self.axes, combo):
                assign.update(zip(names, value))
            yield idx, assign

    def size(self) -> int:
        return math.prod(len(v) for _, v in self.axes)


def _frange(start: float, stop: float, step: float) -> list:
    if not step > 0:
        raise ConfigError("range step must be positive")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(max(count, 0))]


def parse_axis(spec: str):
    """``name=v1,v2`` | ``name=start:stop:step`` | ``a,b=x1:y1,x2:y2`` (zipped tuple axis)."""
    if "=" not in spec:
        raise ConfigError(f"axis {spec!r} is not of the form name=grid")
    lhs, rhs = (s.strip() for s in spec.split("=", 1))
    names = tuple(n.strip() for n in lhs.split(","))
    try:
        if len(names) == 1:
            if rhs.count(":") == 2 and "," not in rhs:
                values = [(v,) for v in _frange(*(float(x) for x in rhs.split(":")))]
            else:
                values = [(float(v),) for v in rhs.split(",") if v.strip()]
        else:
            values = [tuple(float(x) for x in item.split(":")) for item in rhs.split(",") if item.strip()]
    except (ValueError, TypeError):
        raise ConfigError(f"cannot parse axis grid {rhs!r}") from None
    return names, tuple(values)


def homophily_grid_axes():
    return (
        (("rho_blue",), ((0.1,), (0.5,), (0.9,))),
        (("p", "q"), ((0.05, 0.25), (0.05, 0.65), (0.4, 0.3))),
        (("r",), tuple((v,) for v in _frange(0.05, 0.5, 0.05))),
        (("rho_red",), tuple((v,) for v in _frange(0.0, 1.0, 0.02))),
    )


def _solve_cell(args):
    base, assign = args
    mapping = dict(base)
    params = params_from_mapping({k: v for k, v in mapping.items() if k in MODEL_KEYS})
    for name, value in assign.items():
        params = replace_param(params, name, value)
    try:
        validate_params(params)
        report = exponents_both_groups(analysis_view(params))
        return "ok", report_row(report)
    except DMPAError as exc:
        return type(exc).__name__, None


def run_sweep(spec: SweepSpec, workers: int = 1) -> str:
    """Sweep CSV text; rows follow axis order whatever the completion order."""
    cells = list(spec.cells())
    jobs = [(spec.base, assign) for _, assign in cells]
    if workers > 1 and len(jobs) > 64:
        with cf.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_solve_cell, jobs, chunksize=max(1, len(jobs) // (8 * workers))))
    else:
        results = [_solve_cell(j) for j in jobs]
    head = spec.columns + ["seed", "status"] + list(REPORT_COLUMNS)
    lines = [",".join(head)]
    for (idx, assign), (status, row) in zip(cells, results):
        vals = [fmt_num(assign[c]) for c in spec.columns]
        vals += [str(derive_seed(spec.base_seed, idx)), status]
        if row is None:
            vals += ["nan"] * len(REPORT_COLUMNS)
        else:
            vals += [fmt_num(row[c]) if not isinstance(row[c], str) else row[c] for c in REPORT_COLUMNS]
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


def cmd_sweep(args) -> int:
    mapping = _load(args, require_config=args.preset is None)
    axes = []
    if args.preset == "homophily-grid":
        axes.extend(homophily_grid_axes())
        mapping.setdefault("delta", str(GRID_DELTA))
        for k, v in (("r", "0.5"), ("p", "0.05"), ("q", "0.25"), ("rho_blue", "0.5"), ("rho_red", "0.5")):
            mapping.setdefault(k, v)
    axes.extend(parse_axis(a) for a in args.axis)
    if not axes:
        raise ConfigError("sweep needs --axis or --preset")
    _params(mapping)
    seed = _seed(args, mapping)
    spec = SweepSpec(mapping, tuple(axes), seed, args.out)
    ctx = RunContext("sweep", mapping, None, seed, args.out)
    t0 = time.perf_counter()
    text = run_sweep(spec, worker_count())
    ctx.timings["sweep_s"] = time.perf_counter() - t0
    ctx.write("sweep.csv", text)
    ctx.write_manifest()
    n_fail = sum(1 for line in text.splitlines()[1:] if ",ok," not in line)
    sys.stdout.write(f"{spec.size()} cells, {n_fail} failed -> {os.path.join(args.out, 'sweep.csv')}\n")
    return EXIT_OK


# -- multi-seed simulation helpers -----------------------------------------------


def _simulate_seeds(params, mapping, base_seed, steps, n_seeds):
    configs = [_sim_config(params, mapping, derive_seed(base_seed, i), steps) for i in range(n_seeds)]

    def one(cfg):
        sim = Simulation(cfg)
        graph, _ = sim.run(cfg.steps, schedule=[])
        return cfg.seed, graph

    workers = min(worker_count(), n_seeds)
    if workers > 1:
        with cf.ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, configs))
    return [one(c) for c in configs]


def _n_seeds(args, mapping) -> int:
    n = args.seeds if args.seeds is not None else _int_key(mapping, "seeds", 1)
    if n < 1:
        raise ConfigError("seeds must be >= 1")
    return n


# -- gce ------------------------------------------------------------------------


def _parse_k_grid(text: str) -> list:
    try:
        ks = sorted({int(k) for k in text.split(",") if k.strip()})
    except ValueError:
        raise ConfigError(f"bad k grid {text!r}") from None
    if not ks or ks[0] < 1:
        raise ConfigError("k grid must contain integers >= 1")
    return ks


def cmd_gce(args) -> int:
    mapping = _load(args)
    params = _params(mapping)
    seed = _seed(args, mapping)
    ctx = RunContext("gce", mapping, params, seed, args.out)
    out = {"mode": args.mode}
    if args.mode == "analytic":
        report = exponents_both_groups(analysis_view(params))
        v = report.verdict()
        out.update(
            verdict=v.verdict.value if v else "indeterminate",
            score_red=v.red_score if v else math.nan,
            score_blue=v.blue_score if v else math.nan,
            derivation=report.derivation,
        )
    else:
        ks = _parse_k_grid(args.k_grid)
        steps, n_seeds = _steps(args, mapping), _n_seeds(args, mapping)
        t0 = time.perf_counter()
        runs = _simulate_seeds(params, mapping, seed, steps, n_seeds)
        ctx.timings["simulate_s"] = time.perf_counter() - t0
        per_seed = []
        for i, (s, graph) in enumerate(runs):
            curve = gce_curve(graph, ks)
            ctx.write(f"gce_curve_{i:03d}.csv", gce_curve_csv(curve))
            per_seed.append({
                "seed": s,
                "trend": curve_trend(curve).value,
                "ratios": [c.ratio_literal() for c in curve],
            })
        trends = [p["trend"] for p in per_seed]
        majority = max(set(trends), key=lambda t: (trends.count(t), t))
        out.update(k_grid=ks, steps=steps, seeds=per_seed, majority_trend=majority)
        try:
            v = exponents_both_groups(analysis_view(params)).verdict()
            out["analytic_verdict"] = v.verdict.value if v else "indeterminate"
        except DMPAError as exc:
            out["analytic_verdict"] = f"n/a ({type(exc).__name__})"
    text = dumps(out)
    ctx.write("gce.json", text)
    ctx.write_manifest()
    sys.stdout.write(text)
    return EXIT_OK


VERDICT_TREND = {
    GCEVerdict.BLUE: CurveTrend.TO_INF,
    GCEVerdict.RED: CurveTrend.TO_ZERO,
    GCEVerdict.NONE: CurveTrend.FLAT,
}


# -- compare --------------------------------------------------------------------


def pooled_rows(tables) -> list:
    """Per (group, direction): inverse-variance pooled fit and mean theta-hat."""
    pooled = []
    for group in (Color.RED, Color.BLUE):
        for direction in (Direction.IN, Direction.OUT):
            cells = [t.cell(group, direction) for t in tables]
            g, se = pooled_estimate([c.gamma_fit for c in cells], [c.stderr for c in cells])
            hats = [c.theta_hat for c in cells if not math.isnan(c.theta_hat)]
            pooled.append({
                "group": group, "direction": direction, "gamma_analytic": cells[0].gamma_analytic,
                "gamma_fit": g, "stderr": se, "abs_diff": abs(g - cells[0].gamma_analytic),
                "theta_star": cells[0].theta_star,
                "theta_hat": float(np.mean(hats)) if hats else math.nan,
            })
    return pooled


def cmd_compare(args) -> int:
    from .estimation import ComparisonRow

    mapping = _load(args)
    params = _params(mapping)
    ap = analysis_view(params)
    seed, steps, n_seeds = _seed(args, mapping), _steps(args, mapping), _n_seeds(args, mapping)
    ctx = RunContext("compare", mapping, params, seed, args.out)
    report = exponents_both_groups(ap)
    t0 = time.perf_counter()
    runs = _simulate_seeds(params, mapping, seed, steps, n_seeds)
    ctx.timings["simulate_s"] = time.perf_counter() - t0
    tables = [compare_analytic_empirical(report, g) for _, g in runs]
    head = ["seed"] + list(ComparisonRow.COLUMNS)
    lines = [",".join(head)]
    for (s, _), table in zip(runs, tables):
        lines.extend(table.to_csv(extra_columns=(("seed", s),)).splitlines()[1:])
        ctx.warnings.extend(f"seed {s}: {r.group.letter}/{r.direction.value} {r.note}"
                            for r in table.rows if r.note)
    for row in pooled_rows(tables):
        note = "" if math.isfinite(row["gamma_fit"]) else "no fitted cells"
        cells = ComparisonRow(row["group"], row["direction"], row["gamma_analytic"],
                              row["gamma_fit"], row["abs_diff"], row["stderr"], None, None,
                              row["theta_star"], row["theta_hat"], note).cells()
        cells[6] = cells[7] = ""
        lines.append(",".join(["pooled"] + cells))
    text = "\n".join(lines) + "\n"
    ctx.write("comparison.csv", text)
    ctx.write_manifest()
    for w in ctx.warnings:
        sys.stderr.write(f"warning: {w}\n")
    sys.stdout.write(text)
    return EXIT_OK


# -- entry point ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dmpa", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"dmpa {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="flat key = value config file")
        p.add_argument("--set", action="append", default=[], metavar="K=V",
                       help="override a config key (repeatable)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=".", help="output directory (default: .)")

    p = sub.add_parser("solve", help="fixed point, exponents and verdict as JSON")
    common(p)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="grow one graph; write edge list and trajectory")
    common(p)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--snapshots", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="analytic grid over parameter axes")
    common(p, config_required=False)
    p.add_argument("--axis", action="append", default=[],
                   help="name=v1,v2 | name=start:stop:step | a,b=x:y,x:y (repeatable)")
    p.add_argument("--preset", choices=["homophily-grid"], default=None,
                   help="homophily x event-mix x group-size grid")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gce", help="glass-ceiling verdict (analytic) or ratio curves (empirical)")
    common(p)
    p.add_argument("--mode", choices=["analytic", "empirical"], default="analytic")
    p.add_argument("--k-grid", default=",".join(map(str, DEFAULT_K_GRID)))
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--seeds", type=int, default=None)
    p.set_defaults(func=cmd_gce)

    p = sub.add_parser("compare", help="analytic vs fitted exponents over seeds")
    common(p)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--seeds", type=int, default=None)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParamValidationError, NotAnalytic, GraphFormatError) as exc:
        sys.stderr.write(f"dmpa: config error: {exc}\n")
        return EXIT_CONFIG
    except NoConvergence as exc:
        sys.stderr.write(f"dmpa: {exc}\n")
        return EXIT_NOCONV
    except (DegenerateDenominator, ClosedFormMismatch) as exc:
        sys.stderr.write(f"dmpa: analytic failure: {exc}\n")
        return EXIT_NOCONV
    except SimulationDegenerate as exc:
        sys.stderr.write(f"dmpa: degenerate simulation: {exc}\n")
        return EXIT_DEGENERATE
    except OSError as exc:
        sys.stderr.write(f"dmpa: I/O error: {exc}\n")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
