"""Command line front end: simulations, ratio sweeps, lower bounds and bound tables.

Exit codes: 0 on success, 1 when a strategy exceeds its bound against an
exact optimum, 2 on usage or input errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .adversary import BScalingOracle, adversary_instance, det_lb_family, rand_lb_family
from .core import (BaselineUndefinedError, Instance, InstanceError, Job, spt_list_parallel_opt,
                   wspt_opt)
from .extensions import simulate_bscaling_parallel, simulate_bscaling_release
from .instances import GeneratorSpec, generate, load_instance
from .killrestart import ProbeSchedule, expected_cost_exact, simulate_bscaling, splitmix64
from .preemptive import mean_busy_times, pwspt, rr_parallel, wsetf
from .spectral import bound_curves, lambda_max_tridiagonal, rand_tk, rand_tk_limit, z_bands

SWEEP_HEADER = ["instance", "strategy", "b", "cost", "baseline_kind", "baseline", "ratio", "bound"]
STRATEGIES = ("bscale", "bscale-rand", "wsetf", "pwspt", "rr", "bscale-release", "bscale-parallel")
SWEEP_STRATEGIES = ("bscale", "bscale-rand", "bscale-release", "bscale-parallel", "wsetf")
EXACT = ("exact-wspt", "exact-spt-parallel")


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    command: str
    instance: str | None = None
    generator: GeneratorSpec | None = None
    b_grid: list[float] = field(default_factory=lambda: [2.0])
    seed: int = 0
    trials: int = 1
    output: str | None = None
    fmt: str = "csv"

    def __post_init__(self):
        if not self.b_grid:
            raise UsageError("the b grid is empty")
        if any(not (b > 1 and math.isfinite(b)) for b in self.b_grid):
            raise UsageError("every b must be a finite number greater than 1")
        if self.fmt not in ("csv", "json"):
            raise UsageError(f"unknown output format {self.fmt!r}")


@dataclass
class RatioReport:
    rows: list[dict]

    def violations(self) -> list[dict]:
        return [r for r in self.rows
                if r["baseline_kind"] in EXACT and r["ratio"] > r["bound"] * (1 + 1e-9)]


# ---- output


def _emit(rows: list[dict], header: list[str], fmt: str, output: str | None, extra=None):
    if fmt == "json":
        payload = {"rows": rows} if extra is None else {"rows": rows, **extra}
        text = json.dumps(payload, indent=1) + "\n"
    else:
        buf = io.StringIO()
        wr = csv.DictWriter(buf, fieldnames=header, lineterminator="\n", extrasaction="ignore")
        wr.writeheader()
        wr.writerows(rows)
        text = buf.getvalue()
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _dump_json(obj, output):
    text = json.dumps(obj, indent=1) + "\n"
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# ---- simulate


def _schedule_dump(sched: ProbeSchedule) -> dict:
    return {
        "prefix": [{"machine": b.machine, "start": b.start, "end": b.end,
                    "elapsed": {str(j): v for j, v in b.elapsed.items()}} for b in sched.blocks],
        "segments": [{"machine": s.machine, "start": s.start, "job": s.job, "budget": s.budget,
                      "duration": s.duration, "completed": s.completed} for s in sched.segments],
    }


def run_strategy(name: str, instance: Instance, b: float, seed: int = 0) -> dict:
    """Run one strategy and return a JSON ready dump."""
    out: dict = {"strategy": name, "n": instance.n, "machines": instance.machines}
    if name in ("bscale", "bscale-rand", "bscale-release", "bscale-parallel"):
        out["b"] = b
        if name == "bscale":
            sched, rep = simulate_bscaling(instance, b)
        elif name == "bscale-rand":
            rng = np.random.Generator(np.random.PCG64(splitmix64(seed)))
            order = (rng.permutation(instance.n) + 1).tolist()
            xi = float(rng.random())
            sched, rep = simulate_bscaling(instance, b, order, xi)
            out.update(seed=seed, order=order, xi=xi,
                       expected_objective=expected_cost_exact(instance, b))
        elif name == "bscale-release":
            sched, rep = simulate_bscaling_release(instance, b)
        else:
            sched, rep = simulate_bscaling_parallel(instance, b)
        out.update(_schedule_dump(sched))
    elif name in ("wsetf", "pwspt", "rr"):
        fn = {"wsetf": wsetf, "pwspt": pwspt, "rr": rr_parallel}[name]
        sched = fn(instance)
        rep = sched.report(instance)
        out["rates"] = [{"start": a, "end": e, "rates": {str(j): v for j, v in r.items()}}
                        for a, e, r in sched.intervals() if r]
    else:
        raise UsageError(f"unknown strategy {name!r}")
    out["completions"] = {str(j): rep.completions[j] for j in sorted(rep.completions)}
    out["objective"] = rep.objective
    return out


def cmd_simulate(args) -> int:
    instance = load_instance(args.instance)
    _dump_json(run_strategy(args.strategy, instance, args.b, args.seed), args.output)
    return 0


# ---- ratio sweep


def _bound_fns():
    curves = bound_curves()
    return {
        "bscale": curves["det"].evaluate,
        "bscale-rand": curves["rand"].evaluate,
        "bscale-release": curves["release"].evaluate,
        "bscale-parallel": curves["parallel"].evaluate,
        "wsetf": lambda b: 2.0,
    }


def _mean_busy_lb(instance: Instance) -> float:
    """Weighted PWSPT mean busy time on one machine of speed ``m``."""
    m = instance.machines
    fast = Instance(tuple(Job(j.index, j.p / m, j.w, j.r) for j in instance.jobs), 1)
    M = mean_busy_times(pwspt(fast), fast)
    return math.fsum(fast.job(j).w * v for j, v in M.items())


def baseline(instance: Instance) -> tuple[str, float]:
    try:
        if instance.machines == 1:
            return "exact-wspt", wspt_opt(instance).objective
        return "exact-spt-parallel", spt_list_parallel_opt(instance).objective
    except BaselineUndefinedError:
        return "mean-busy-lb", _mean_busy_lb(instance)


def strategy_cost(name: str, instance: Instance, b: float) -> float:
    if name == "bscale":
        return simulate_bscaling(instance, b)[1].objective
    if name == "bscale-rand":
        return expected_cost_exact(instance, b)
    if name == "bscale-release":
        return simulate_bscaling_release(instance, b)[1].objective
    if name == "bscale-parallel":
        return simulate_bscaling_parallel(instance, b)[1].objective
    if name == "wsetf":
        return wsetf(instance).report(instance).objective
    raise UsageError(f"strategy {name!r} cannot be swept")


def _sweep_one(task) -> list[dict]:
    ident, instance, strategy, grid = task
    kind, base = baseline(instance)
    bounds = _bound_fns()
    rows = []
    for b in grid:
        cost = strategy_cost(strategy, instance, b)
        rows.append({"instance": ident, "strategy": strategy, "b": b, "cost": cost,
                     "baseline_kind": kind, "baseline": base, "ratio": cost / base,
                     "bound": bounds[strategy](b)})
    return rows


def workers() -> int:
    raw = os.environ.get("KRS_THREADS")
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise UsageError("KRS_THREADS must be a positive integer") from None
        if n < 1:
            raise UsageError("KRS_THREADS must be a positive integer")
        return n
    return os.cpu_count() or 1


def ratio_sweep(instances: list[tuple[str, Instance]], strategy: str,
                grid: list[float], max_workers: int = 1) -> RatioReport:
    """Cost, baseline and bound for every instance and every ``b``.

    Rows come back sorted by (instance, b) whatever the worker count.
    """
    if strategy not in SWEEP_STRATEGIES:
        raise UsageError(f"strategy {strategy!r} cannot be swept")
    tasks = [(ident, inst, strategy, list(grid)) for ident, inst in instances]
    if max_workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(max_workers, len(tasks))) as pool:
            chunks = list(pool.map(_sweep_one, tasks, chunksize=max(1, len(tasks) // (4 * max_workers))))
    else:
        chunks = [_sweep_one(t) for t in tasks]
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=lambda r: (r["instance"], r["b"]))
    return RatioReport(rows)


def _gen_spec(args) -> GeneratorSpec:
    try:
        return GeneratorSpec(count=args.count, n_min=args.n_min, n_max=args.n_max,
                             sizes=args.sizes, decades=args.decades, weighted=args.weighted,
                             release_density=args.release_density, machines=args.machines,
                             seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_ratio_sweep(args) -> int:
    cfg = ExperimentConfig("ratio-sweep", instance=args.instances, b_grid=args.b,
                           seed=args.seed, output=args.output, fmt=args.format)
    if args.instances:
        root = Path(args.instances)
        if not root.is_dir():
            raise FileNotFoundError(f"no such directory: {root}")
        instances = [(p.stem, load_instance(p)) for p in sorted(root.glob("*.json"))]
    else:
        cfg.generator = _gen_spec(args)
        width = max(4, len(str(max(cfg.generator.count - 1, 0))))
        instances = [(f"gen-{i:0{width}d}", inst) for i, inst in enumerate(generate(cfg.generator))]
    report = ratio_sweep(instances, args.strategy, cfg.b_grid, workers())
    _emit(report.rows, SWEEP_HEADER, cfg.fmt, cfg.output)
    bad = report.violations()
    if bad:
        print(f"bound violated on {len(bad)} row(s), first: {bad[0]['instance']} at b={bad[0]['b']}",
              file=sys.stderr)
        return 1
    return 0


# ---- lower bounds

LB_HEADER = ["kind", "param", "ratio", "target", "note"]


def lowerbound_rows(kind: str, b: float, params: list[int], K: int = 20,
                    eps: float = 0.5, t: float | None = None) -> list[dict]:
    curves = bound_curves()
    rows = []
    for x in params:
        row = {"kind": kind, "param": x, "ratio": None, "target": None, "note": ""}
        try:
            if kind == "det-family":
                row["target"] = curves["det"].evaluate(b)
                row["ratio"] = det_lb_family(b, x, t).ratio
            elif kind == "rand-family":
                row["target"] = curves["rand"].evaluate(b)
                row["ratio"] = rand_lb_family(b, K, x, t).ratio
            elif kind == "adversary":
                row["target"] = 3 - eps
                out = adversary_instance(BScalingOracle(b), x, eps)
                row["ratio"] = out.ratio
                row["note"] = f"{out.branch} branch"
            else:
                raise UsageError(f"unknown lower bound kind {kind!r}")
        except (ValueError, RuntimeError) as exc:
            row["note"] = f"error: {exc}"
        rows.append(row)
    return rows


def cmd_lowerbound(args) -> int:
    ExperimentConfig("lowerbound", b_grid=[args.b], output=args.output, fmt=args.format)
    defaults = {"det-family": [20, 40, 60], "rand-family": [100, 200, 400], "adversary": [10]}
    params = args.param or defaults[args.kind]
    rows = lowerbound_rows(args.kind, args.b, params, args.K, args.eps, args.t)
    _emit(rows, LB_HEADER, args.format, args.output)
    return 0


# ---- bound tables

EIGEN_HEADER = ["section", "kind", "b", "param", "value", "limit"]


def eigen_rows(grid: list[float], Ls: list[int], Ks: list[int], zb: list[float]) -> list[dict]:
    curves = bound_curves()
    rows = []
    for kind, c in curves.items():
        for b in grid:
            rows.append({"section": "curve", "kind": kind, "b": b, "param": "",
                         "value": c.evaluate(b), "limit": ""})
    for kind, c in curves.items():
        rows.append({"section": "minimizer", "kind": kind, "b": c.minimizer, "param": "",
                     "value": c.minimum, "limit": ""})
    for b in zb:
        lim = 2 * (math.sqrt(b) - 1) / (b - 1)
        for L in Ls:
            rows.append({"section": "lambda_Z", "kind": "det", "b": b, "param": L,
                         "value": lambda_max_tridiagonal(*z_bands(L, b)), "limit": lim})
        for K in Ks:
            rows.append({"section": "S_K", "kind": "rand", "b": b, "param": K,
                         "value": rand_tk(b, K)[1], "limit": rand_tk_limit(b)})
    return rows


def cmd_eigen(args) -> int:
    grid = args.b or np.round(np.linspace(1.1, 12.0, 110), 6).tolist()
    cfg = ExperimentConfig("eigen", b_grid=grid, output=args.output, fmt=args.format)
    rows = eigen_rows(cfg.b_grid, args.L, args.K, args.zb)
    _emit(rows, EIGEN_HEADER, cfg.fmt, cfg.output)
    return 0


# ---- parser


def _positive_b(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (v > 1 and math.isfinite(v)):
        raise argparse.ArgumentTypeError("b must be a finite number greater than 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="krs", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def out_opts(p, default_fmt):
        p.add_argument("--output", "-o", help="write here instead of stdout")
        p.add_argument("--format", choices=("csv", "json"), default=default_fmt)

    p = sub.add_parser("simulate", help="run one strategy on an instance file")
    p.add_argument("--strategy", required=True, choices=STRATEGIES)
    p.add_argument("--instance", required=True)
    p.add_argument("--b", type=_positive_b, default=2.0)
    p.add_argument("--seed", type=int, default=0, help="randomness for bscale-rand")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ratio-sweep", help="cost ratios over random or stored instances")
    p.add_argument("--strategy", choices=SWEEP_STRATEGIES, default="bscale")
    p.add_argument("--b", type=_positive_b, nargs="+", default=[2.0])
    p.add_argument("--instances", help="directory of instance JSON files")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--n-min", type=int, default=1)
    p.add_argument("--n-max", type=int, default=30)
    p.add_argument("--sizes", choices=("loguniform", "uniform", "lognormal"), default="loguniform")
    p.add_argument("--decades", type=float, default=6.0)
    p.add_argument("--weighted", action="store_true")
    p.add_argument("--release-density", type=float, default=0.0)
    p.add_argument("--machines", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    out_opts(p, "csv")
    p.set_defaults(func=cmd_ratio_sweep)

    p = sub.add_parser("lowerbound", help="ratios of lower bound constructions")
    p.add_argument("--kind", required=True, choices=("adversary", "det-family", "rand-family"))
    p.add_argument("--b", type=_positive_b, default=3.0)
    p.add_argument("--param", type=int, nargs="+",
                   help="L for the families, n for the adversary")
    p.add_argument("--K", type=int, default=20)
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--t", type=float, default=None, help="class count scale")
    out_opts(p, "csv")
    p.set_defaults(func=cmd_lowerbound)

    p = sub.add_parser("eigen", help="bound curves, minimizers and eigenvalue sequences")
    p.add_argument("--b", type=_positive_b, nargs="+", help="grid for the bound curves")
    p.add_argument("--zb", type=_positive_b, nargs="+", default=[2.0, 3.0, 10.0])
    p.add_argument("--L", type=int, nargs="+", default=[10, 100, 1000, 2000])
    p.add_argument("--K", type=int, nargs="+", default=[10, 100, 1000, 10000])
    out_opts(p, "csv")
    p.set_defaults(func=cmd_eigen)
    return ap


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (OSError, UsageError, InstanceError, BaselineUndefinedError) as exc:
        print(f"krs {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
