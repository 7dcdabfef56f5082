"""Command-line interface.

Subcommands::

    run                one configured run -> JSON run record
    sweep              (M, K, R) x stepsize grid -> CSV
    rates              evaluate closed-form rate expressions
    figure1            tuned-stepsize comparison on the logistic task -> CSV
    verify-quadratic   enumeration check of round-structure invariance
    verify-lowerbound  stepsize-grid check of the hard-instance lower bound
    gen-data           generate and save the logistic dataset

Exit codes: 0 success, 1 usage/config error, 2 a verification suite ran but
its property failed.  Config files are JSON or TOML; command-line overrides
win over file values, and every artifact embeds the fully resolved config.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import harness, noise, problems, rates
from .algorithms import ConstantSchedule, RunConfig, WeightedStaged, StagedSchedule, TunedConstantSchedule
from .kernels import BACKEND

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VERIFY = 2


class _Parser(argparse.ArgumentParser):
    """argparse with exit code 1 on usage errors (2 is reserved)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _format_json(obj, indent=0) -> str:
    """JSON with all floats at 17 significant digits (exact round trip)."""
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ",\n".join(
            f'{pad}  {json.dumps(str(k))}: {_format_json(v, indent + 1)}' for k, v in obj.items()
        )
        return "{\n" + items + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        items = ",\n".join(f"{pad}  {_format_json(v, indent + 1)}" for v in seq)
        return "[\n" + items + "\n" + pad + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return '"nan"'
        if math.isinf(x):
            return '"inf"' if x > 0 else '"-inf"'
        return format(x, ".17g")
    if obj is None:
        return "null"
    return json.dumps(obj)


def _load_config(path):
    if path is None:
        return {}
    text = Path(path).read_bytes()
    if str(path).endswith(".toml"):
        try:
            import tomllib
        except ImportError:
            import tomli as tomllib
        return tomllib.loads(text.decode())
    return json.loads(text.decode())


def _parse_eta_grid(spec: str):
    """Parse 'lo:hi:per_octave' into a log-spaced grid."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError("eta grid must be lo:hi:per_octave")
    lo, hi, per = float(parts[0]), float(parts[1]), int(parts[2])
    return harness.stepsize_grid(lo, hi, per)


def resolve_problem(spec: dict, K: int | None = None, R: int | None = None):
    """Build a problem from its config-file description."""
    kind = spec.get("kind")
    if kind == "quadratic":
        return problems.make_quadratic(
            H=spec.get("H", 1.0), lambda_=spec.get("lambda", 0.0),
            B=spec.get("B", 1.0), sigma=spec.get("sigma", 1.0),
            d=spec.get("d", 1), noise_kind=spec.get("noise", "rademacher"))
    if kind == "hard":
        if K is None or R is None:
            raise ValueError("hard instance needs K and R to select mu")
        return problems.make_hard_instance(
            H=spec.get("H", 1.0), lambda_=spec.get("lambda", 0.0),
            B=spec.get("B", 1.0), sigma=spec.get("sigma", 1.0), K=K, R=R)
    if kind == "logistic":
        if "path" in spec:
            ds = problems.load_dataset(spec["path"])
        elif "generate" in spec:
            g = spec["generate"]
            ds = problems.generate_figure1_dataset(g.get("n", 50000), g.get("d", 25),
                                                   g.get("seed", 0))
        else:
            raise ValueError("logistic spec needs 'path' or 'generate'")
        return problems.logistic_objective(ds)
    raise ValueError(f"unknown problem kind {kind!r}")


def _make_schedule(spec: dict, M: int, K: int, R: int):
    variant = spec.get("variant", "constant")
    if variant == "constant":
        return ConstantSchedule(spec["eta"])
    if variant == "convex_tuned":
        return TunedConstantSchedule(H=spec["H"], B=spec["B"], sigma=spec["sigma"],
                                     M=M, K=K, R=R)
    if variant == "strongly_convex_staged":
        return StagedSchedule(H=spec["H"], lambda_=spec["lambda"], K=K, R=R,
                              flavor=spec.get("flavor", "tuned"))
    raise ValueError(f"unknown schedule variant {variant!r}")


def _make_averaging(spec, M, K, R):
    if spec is None:
        return "final_iterate"
    if isinstance(spec, str):
        return spec
    variant = spec.get("variant")
    if variant in ("weighted_staged", "weighted_staged_sq"):
        return WeightedStaged(H=spec["H"], lambda_=spec["lambda"], K=K, R=R,
                              squared=variant.endswith("_sq"))
    return variant


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_run(args) -> int:
    cfg = _load_config(args.config)
    M = args.M or cfg.get("M", 1)
    K = args.K or cfg.get("K", 1)
    R = args.R or cfg.get("R", 1)
    algorithm = args.algorithm or cfg.get("algorithm", "local")
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    prob_spec = cfg.get("problem", {"kind": "quadratic", "H": args.H or 1.0,
                                    "lambda": args.lambda_ or 0.0, "B": args.B or 1.0,
                                    "sigma": args.sigma if args.sigma is not None else 1.0,
                                    "d": 1})
    problem = resolve_problem(prob_spec, K=K, R=R)
    schedule = _make_schedule(cfg.get("schedule", {"variant": "constant", "eta": args.eta or 0.1}),
                              M, K, R)
    averaging = _make_averaging(cfg.get("averaging"), M, K, R)
    run_config = RunConfig(algorithm=algorithm, M=M, K=K, R=R, schedule=schedule,
                           averaging=averaging, seed=seed,
                           method=cfg.get("method", "sgd"), gamma0=cfg.get("gamma0"))
    t0 = time.perf_counter()
    from .algorithms import run as run_one

    traj = run_one(problem, run_config)
    wall = time.perf_counter() - t0
    record = {
        "config": {**run_config.describe(), "problem": prob_spec},
        "round_suboptimality": list(traj.round_suboptimality),
        "output_suboptimality": traj.suboptimality,
        "diverged": traj.diverged,
        "wall_time_s": wall if args.timing else None,
        "kernel_backend": BACKEND,
    }
    text = _format_json(record) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    grid_spec = args.eta_grid or cfg.get("eta_grid")
    spec = harness.SweepSpec(
        problem=cfg.get("problem", {"kind": "quadratic"}),
        algorithms=[args.algorithm] if args.algorithm else cfg.get(
            "algorithms", ["local", "minibatch"]),
        M_grid=[args.M] if args.M else cfg.get("M_grid", [1]),
        K_grid=[args.K] if args.K else cfg.get("K_grid", [1]),
        R_grid=[args.R] if args.R else cfg.get("R_grid", [8]),
        reps=args.reps or cfg.get("reps", 32),
        master_seed=args.seed if args.seed is not None else cfg.get("seed", 0),
    )
    if grid_spec:
        grid = _parse_eta_grid(grid_spec) if isinstance(grid_spec, str) else np.asarray(grid_spec)
    else:
        grid = spec.grid()
    rows = []
    for K in spec.K_grid:
        for R in spec.R_grid:
            problem = resolve_problem(spec.problem, K=K, R=R)
            sub = harness.SweepSpec(problem=spec.problem, algorithms=spec.algorithms,
                                    M_grid=spec.M_grid, K_grid=[K], R_grid=[R],
                                    reps=spec.reps, master_seed=spec.master_seed)
            for algorithm in sub.algorithms:
                for M in sub.M_grid:
                    curve = harness.grid_search_curve(problem, algorithm, M, K, R, grid,
                                                      sub.reps, sub.master_seed,
                                                      workers=args.workers)
                    for gi, eta in enumerate(curve.etas):
                        for r in range(R):
                            rows.append({
                                "algorithm": algorithm, "M": M, "K": K, "R": R,
                                "eta": float(eta), "round": r + 1,
                                "mean_subopt": float(curve.round_means[gi, r]),
                                "stderr": float(curve.round_stderrs[gi, r]),
                                "reps": sub.reps,
                                "argmin_flag": int(curve.argmin_index[r] == gi),
                                "seed": sub.master_seed,
                            })
    echo = {"problem": spec.problem, "algorithms": spec.algorithms, "M_grid": spec.M_grid,
            "K_grid": spec.K_grid, "R_grid": spec.R_grid, "reps": spec.reps,
            "seed": spec.master_seed, "eta_grid": [float(e) for e in grid],
            "noise_schema_version": noise.NOISE_SCHEMA_VERSION}
    _write_csv_with_echo(rows, echo, args.out)
    return EXIT_OK


def _write_csv_with_echo(rows, echo, out):
    lines = ["# config: " + json.dumps(echo, sort_keys=True)]
    lines.append(",".join(harness.CSV_COLUMNS))
    for row in rows:
        cells = []
        for col in harness.CSV_COLUMNS:
            v = row[col]
            cells.append(harness.format_float(v) if isinstance(v, float) else str(v))
        lines.append(",".join(cells))
    text = "\n".join(lines) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_rates(args) -> int:
    names = [args.name] if args.name else list(rates.RATE_NAMES)
    convexity = args.convexity
    rows = []
    for name in names:
        try:
            value = rates.rate(name, convexity, args.H, args.lambda_, args.B,
                               args.sigma, args.M, args.K, args.R)
            dom = rates.dominant_term(name, convexity, args.H, args.lambda_, args.B,
                                      args.sigma, args.M, args.K, args.R)
        except ValueError as exc:
            if args.name:
                raise
            continue
        rows.append((name, value, dom))
    if args.out:
        lines = ["name,convexity,H,lambda,B,sigma,M,K,R,value,dominant_term"]
        for name, value, dom in rows:
            lines.append(",".join([
                name, convexity,
                *(harness.format_float(v) for v in
                  (args.H, args.lambda_, args.B, args.sigma)),
                str(args.M), str(args.K), str(args.R),
                harness.format_float(value), dom,
            ]))
        Path(args.out).write_text("\n".join(lines) + "\n")
    else:
        for name, value, dom in rows:
            if args.name:
                print(repr(value))  # shortest exact round trip, e.g. 2.0
            else:
                print(f"{name}: {format(value, '.17g')} (dominant: {dom})")
    return EXIT_OK


def _cmd_figure1(args) -> int:
    cfg = _load_config(args.config)
    n = cfg.get("n", 5000)
    d = cfg.get("d", 25)
    data_seed = cfg.get("data_seed", 0)
    if args.dataset:
        ds = problems.load_dataset(args.dataset)
    else:
        ds = problems.generate_figure1_dataset(n, d, data_seed)
    problem = problems.logistic_objective(ds)
    K_list = cfg.get("K_grid", [5, 40, 200]) if args.K is None else [args.K]
    M_list = cfg.get("M_grid", [1, 10, 100]) if args.M is None else [args.M]
    R = args.R or cfg.get("R", 32)
    reps = args.reps or cfg.get("reps", 32)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    algorithms = cfg.get("algorithms", ["local", "minibatch", "thumb_twiddling"])
    grid = (_parse_eta_grid(args.eta_grid) if args.eta_grid
            else harness.stepsize_grid(cfg.get("eta_lo", 2.0**-14),
                                       cfg.get("eta_hi", 2.0**2),
                                       cfg.get("eta_per_octave", 2)))
    rows = []
    for algorithm in algorithms:
        for M in M_list:
            for K in K_list:
                curve = harness.grid_search_curve(problem, algorithm, M, K, R, grid,
                                                  reps, seed, workers=args.workers)
                for gi, eta in enumerate(curve.etas):
                    for r in range(R):
                        rows.append({
                            "algorithm": algorithm, "M": M, "K": K, "R": R,
                            "eta": float(eta), "round": r + 1,
                            "mean_subopt": float(curve.round_means[gi, r]),
                            "stderr": float(curve.round_stderrs[gi, r]),
                            "reps": reps,
                            "argmin_flag": int(curve.argmin_index[r] == gi),
                            "seed": seed,
                        })
    echo = {"experiment": "figure1", "n": ds.n, "d": ds.d, "data_seed": ds.seed,
            "fstar": ds.fstar, "K_grid": K_list, "M_grid": M_list, "R": R,
            "reps": reps, "seed": seed, "algorithms": algorithms,
            "eta_grid": [float(e) for e in grid],
            "noise_schema_version": noise.NOISE_SCHEMA_VERSION}
    _write_csv_with_echo(rows, echo, args.out)
    return EXIT_OK


def _cmd_verify_quadratic(args) -> int:
    rep = harness.verify_quadratic_invariance(T=args.T, M=args.M, sigma=args.sigma,
                                              eta=args.eta)
    record = {
        "T": args.T, "M": args.M, "sigma": args.sigma, "eta": args.eta,
        "factorizations": [list(f) for f in rep.factorizations],
        "max_discrepancy": rep.max_discrepancy,
        "variance": rep.variance,
        "variance_ratio_vs_serial": rep.variance_ratio_vs_serial,
        "ok": rep.ok,
    }
    text = _format_json(record) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if rep.ok else EXIT_VERIFY


def _cmd_verify_lowerbound(args) -> int:
    grid = (_parse_eta_grid(args.eta_grid) if args.eta_grid
            else harness.stepsize_grid(2.0**-10, 2.0**1, 1))
    rep = harness.verify_lower_bound(H=args.H, lambda_=args.lambda_, B=args.B,
                                     sigma=args.sigma, M=args.M, K=args.K, R=args.R,
                                     grid=grid, reps=args.reps or 1024,
                                     master_seed=args.seed or 0)
    record = {
        "H": args.H, "lambda": args.lambda_, "B": args.B, "sigma": args.sigma,
        "M": args.M, "K": args.K, "R": args.R, "mu": rep.mu,
        "etas": list(rep.etas),
        "local_measured": list(rep.local_measured),
        "bound_value": rep.bound_value,
        "c_fit": rep.c_fit,
        "local_tuned": rep.local_tuned,
        "minibatch_tuned": rep.minibatch_tuned,
        "coord2_blowup_checked": rep.coord2_blowup_checked,
        "ok": rep.ok,
    }
    text = _format_json(record) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if rep.ok else EXIT_VERIFY


def _cmd_gen_data(args) -> int:
    ds = problems.generate_figure1_dataset(args.n, args.d, args.seed or 0)
    fstar = problems.reference_optimal_value(ds)
    out = args.out or f"figure1_n{args.n}_d{args.d}_seed{args.seed or 0}.npz"
    problems.save_dataset(ds, out)
    print(format(fstar, ".17g"))
    return EXIT_OK


def _add_common(p):
    p.add_argument("--config", help="JSON or TOML config file")
    p.add_argument("--out", help="output path")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--K", type=int, default=None)
    p.add_argument("--R", type=int, default=None)
    p.add_argument("--H", type=float, default=1.0)
    p.add_argument("--lambda", dest="lambda_", type=float, default=0.0)
    p.add_argument("--B", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--eta-grid", dest="eta_grid", help="lo:hi:per_octave")
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--algorithm", default=None)


def main(argv=None) -> int:
    parser = _Parser(prog="localsgd",
                     description="intermittent-communication SGD simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single run -> JSON record")
    _add_common(p_run)
    p_run.add_argument("--timing", action="store_true",
                       help="include wall time in the record (breaks byte determinism)")

    p_sweep = sub.add_parser("sweep", help="grid sweep -> CSV")
    _add_common(p_sweep)

    p_rates = sub.add_parser("rates", help="closed-form rate expressions")
    _add_common(p_rates)
    p_rates.add_argument("--name", default=None, choices=rates.RATE_NAMES)
    p_rates.add_argument("--convexity", default=rates.GENERAL,
                         choices=[rates.GENERAL, rates.STRONGLY_CONVEX])

    p_fig = sub.add_parser("figure1", help="tuned-curve logistic experiment -> CSV")
    _add_common(p_fig)
    p_fig.add_argument("--dataset", help="dataset .npz (default: generate)")

    p_vq = sub.add_parser("verify-quadratic", help="round-structure invariance check")
    _add_common(p_vq)
    p_vq.add_argument("--T", type=int, default=4)
    p_vq.set_defaults(eta=0.3)

    p_vl = sub.add_parser("verify-lowerbound", help="hard-instance lower-bound check")
    _add_common(p_vl)

    p_gen = sub.add_parser("gen-data", help="generate the logistic dataset")
    _add_common(p_gen)
    p_gen.add_argument("--n", type=int, default=50000)
    p_gen.add_argument("--d", type=int, default=25)

    args = parser.parse_args(argv)
    # defaults that differ per subcommand
    if args.command == "verify-quadratic":
        args.M = args.M or 2
        args.eta = args.eta or 0.3
    if args.command == "verify-lowerbound":
        args.M = args.M or 4
        args.K = args.K or 2
        args.R = args.R or 4
    handlers = {
        "run": _cmd_run,
        "sweep": _cmd_sweep,
        "rates": _cmd_rates,
        "figure1": _cmd_figure1,
        "verify-quadratic": _cmd_verify_quadratic,
        "verify-lowerbound": _cmd_verify_lowerbound,
        "gen-data": _cmd_gen_data,
    }
    try:
        return handlers[args.command](args)
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
