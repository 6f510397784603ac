"""Command-line entry point.

Subcommands: simulate (one trajectory), theory (trajectory functions and
envelopes), experiment (persisted Monte Carlo batch), analyze (batch
report), oracle (exact tiny-instance tables).

Exit codes: 0 success, 2 parameter error, 3 I/O error, 4 guard/domain error.
Every subcommand is deterministic given its flags; all randomness is seeded.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from .errors import (
    ConfigMismatchError,
    DegenerateSampleError,
    DomainError,
    GuardError,
    ParameterError,
    TailWindowError,
)
from .experiments import (
    ExperimentConfig,
    analyze,
    export_ecdf_csv,
    export_v_csv,
    load_results,
    run_experiment,
)
from .oracle import exact_enumeration
from .process import ProcessParams, run
from .theory import eval_theory, eval_theory_at_step, phase_bounds

OUTPUT_DIR_ENV = "DPROC_OUTPUT_DIR"

EXIT_OK = 0
EXIT_PARAMETER = 2
EXIT_IO = 3
EXIT_GUARD = 4


def _parse_checkpoints(text: str | None, n: int, d: int):
    if text is None or text == "none":
        return None
    if text.startswith("log:"):
        from .experiments import default_checkpoints

        return default_checkpoints(n, d, int(text[4:]))
    try:
        return tuple(int(x) for x in text.split(",") if x != "")
    except ValueError as exc:
        raise ParameterError(f"bad checkpoint list {text!r}") from exc


def _emit(text: str, out_path: str | None) -> None:
    if out_path is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")


def cmd_simulate(args) -> int:
    params = ProcessParams(args.n, args.d, args.seed)
    schedule = _parse_checkpoints(args.checkpoints, args.n, args.d) or ()
    record = run(params, schedule, backend=args.backend)
    if args.format == "json":
        _emit(record.to_json(), args.out)
    else:
        lines = [
            f"n={params.n} d={params.d} seed={params.seed}",
            f"final_edges={record.final_edges} stuck={record.stuck}",
            "T=" + " ".join(
                f"T{ell}={'never' if t is None else t}" for ell, t in enumerate(record.T)
            ),
        ]
        for i, S in record.checkpoints:
            lines.append(f"checkpoint i={i} S={list(S)}")
        _emit("\n".join(lines), args.out)
    return EXIT_OK


def cmd_theory(args) -> int:
    if args.grid is None and args.t is None and (args.n is None or args.i is None):
        raise ParameterError("need --t, both --n and --i, or --grid")
    if args.grid is not None:
        lo, hi, count = args.grid.split(":")
        lo, hi, count = float(lo), float(hi), int(count)
        if count < 2:
            raise ParameterError("grid needs at least 2 points")
        lines = ["t," + ",".join(f"s{j}" for j in range(args.d))]
        for idx in range(count):
            t = lo + (hi - lo) * idx / (count - 1)
            ev = eval_theory(args.d, t)
            lines.append(",".join([repr(t)] + [repr(x) for x in ev.s]))
        _emit("\n".join(lines), args.out)
        return EXIT_OK

    if args.t is not None:
        ev = eval_theory(args.d, args.t)
    else:
        ev = eval_theory_at_step(args.n, args.d, args.i)
    if args.tol is not None and max(ev.residual_root, ev.residual_sum) > args.tol:
        raise DomainError(
            f"residuals {ev.residual_root:.3e}/{ev.residual_sum:.3e} exceed --tol"
        )
    payload = {
        "d": ev.d,
        "t": ev.t,
        "u": ev.u,
        "y": list(ev.y),
        "s": list(ev.s),
        "residual_root": ev.residual_root,
        "residual_sum": ev.residual_sum,
    }
    if args.n is not None:
        bounds = phase_bounds(args.n, args.d)
        payload["phase_bounds"] = {
            "i_trans": bounds.i_trans,
            "i_after": list(bounds.i_after),
            "i_before": list(bounds.i_before),
        }
        payload["ns"] = [args.n * x for x in ev.s]
    if args.format == "json":
        _emit(json.dumps(payload, sort_keys=True), args.out)
    else:
        lines = [f"d={ev.d} t={ev.t!r} u={ev.u!r}"]
        for j in range(args.d):
            lines.append(f"j={j}  y={ev.y[j]!r}  s={ev.s[j]!r}")
        lines.append(
            f"residual_root={ev.residual_root:.3e} residual_sum={ev.residual_sum:.3e}"
        )
        if "phase_bounds" in payload:
            pb = payload["phase_bounds"]
            lines.append(
                f"i_trans={pb['i_trans']} i_after={pb['i_after']} i_before={pb['i_before']}"
            )
        _emit("\n".join(lines), args.out)
    return EXIT_OK


def _default_out_path(config: ExperimentConfig) -> str:
    base = os.environ.get(OUTPUT_DIR_ENV, ".")
    name = f"exp_n{config.n}_d{config.d}_s{config.master_seed}.jsonl"
    return os.path.join(base, name)


def _config_from_file(path: str) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    known = {"n", "d", "trials", "master_seed", "checkpoints", "n_checkpoints",
             "exclude_stuck", "r_grid"}
    unknown = set(raw) - known - {"out"}
    if unknown:
        raise ParameterError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {k: raw[k] for k in known if k in raw}
    if "checkpoints" in kwargs and kwargs["checkpoints"] is not None:
        kwargs["checkpoints"] = tuple(kwargs["checkpoints"])
    if "r_grid" in kwargs:
        kwargs["r_grid"] = tuple(kwargs["r_grid"])
    return ExperimentConfig(**kwargs)


def cmd_experiment(args) -> int:
    if args.config is not None:
        if args.n is not None or args.d is not None or args.trials is not None:
            raise ParameterError("--config and explicit instance flags are exclusive")
        config = _config_from_file(args.config)
    else:
        if args.n is None or args.d is None or args.trials is None or args.seed is None:
            raise ParameterError("need --n, --d, --trials and --seed (or --config)")
        config = ExperimentConfig(
            n=args.n,
            d=args.d,
            trials=args.trials,
            master_seed=args.seed,
            checkpoints=_parse_checkpoints(args.checkpoints, args.n, args.d),
            exclude_stuck=not args.include_stuck,
            r_grid=tuple(float(x) for x in args.r_grid.split(",")) if args.r_grid else
            ExperimentConfig.__dataclass_fields__["r_grid"].default,
        )
    out = args.out or _default_out_path(config)
    batch = run_experiment(config, out, workers=args.workers)
    stuck = sum(1 for r in batch.rows if r.stuck)
    print(f"wrote {len(batch.rows)} rows to {out} ({stuck} stuck)")
    return EXIT_OK


def cmd_analyze(args) -> int:
    batch = load_results(args.input)
    if not batch.rows:
        raise ParameterError(f"no result rows in {args.input}")
    report = analyze(
        batch,
        level=args.level,
        seed=args.perm_seed,
        n_permutations=args.permutations,
        test_independence=not args.no_independence,
    )
    if args.csv_out:
        export_v_csv(batch, args.csv_out)
    if args.ecdf_out:
        ell_text, path = args.ecdf_out.split(":", 1)
        export_ecdf_csv(batch, int(ell_text), path)
    if args.format == "json":
        _emit(json.dumps(report, sort_keys=True), args.out)
        return EXIT_OK
    lines = [
        f"n={report['n']} d={report['d']} rows={report['trials_total']} "
        f"used={report['trials_used']} stuck={report['stuck_count']}",
    ]
    for entry in report["per_ell"]:
        ell = entry["ell"]
        lines.append(
            f"ell={ell}: count={entry['count']} mean_V={entry.get('mean_V', float('nan')):.4f} "
            f"ks_exp1={entry.get('ks_exp1', float('nan')):.4f}"
        )
        for key, probe in sorted(entry["zero_probe"].items(), key=lambda kv: float(kv[0])):
            lines.append(
                f"  zero-probe r={key}: freq={probe['freq']:.4f} "
                f"ref=e^-r={probe['reference']:.4f} "
                f"gap={abs(probe['freq'] - probe['reference']):.4f}"
            )
    for phase, stats in report["envelope"].items():
        lines.append(
            f"envelope {phase}: violation rate {stats['rate']:.4f} "
            f"({stats['runs_with_violation']} runs)"
        )
    for key, probe in sorted(report["joint_zero_probe"].items(), key=lambda kv: float(kv[0])):
        lines.append(
            f"joint zero-probe r={key}: freq={probe['freq']:.4f} ref={probe['reference']:.4f}"
        )
    for rep in report["independence"]:
        lines.append(
            f"independence V{rep['pair'][0]}-V{rep['pair'][1]}: "
            f"passed={rep['passed']} min_p={rep['p_value']:.4f}"
        )
    _emit("\n".join(lines), args.out)
    return EXIT_OK


def cmd_oracle(args) -> int:
    table = exact_enumeration(args.n, args.d)
    if args.format == "json":
        _emit(json.dumps(table.to_json_dict(), sort_keys=True), args.out)
        return EXIT_OK
    lines = [f"n={table.n} d={table.d} max_edges={table.max_edges}"]
    for ell, dist in enumerate(table.t_dist):
        parts = [
            f"{k}: {v} (~{float(v):.6f})"
            for k, v in sorted(dist.items(), key=lambda kv: str(kv[0]))
        ]
        lines.append(f"T{ell}: " + "; ".join(parts))
    fe = "; ".join(
        f"{k}: {v} (~{float(v):.6f})" for k, v in sorted(table.final_edges_dist.items())
    )
    lines.append(f"final_edges: {fe}")
    lines.append(f"p_stuck: {table.p_stuck} (~{float(table.p_stuck):.6f})")
    _emit("\n".join(lines), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dproc",
        description="Degree-constrained random graph process: simulation, "
        "trajectory functions, and statistical verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one trajectory")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--checkpoints", help="comma list of steps, or log:K, or none")
    p.add_argument("--backend", choices=("auto", "python", "compiled"), default="auto")
    p.add_argument("--format", choices=("json", "text"), default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("theory", help="evaluate trajectory functions")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--t", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--i", type=int)
    p.add_argument("--grid", help="CSV over t0:t1:count")
    p.add_argument("--tol", type=float, help="fail (exit 4) if residuals exceed this")
    p.add_argument("--format", choices=("json", "text"), default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("experiment", help="run a persisted Monte Carlo batch")
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="JSON config file instead of instance flags")
    p.add_argument("--out", help=f"JSONL path (default under ${OUTPUT_DIR_ENV} or cwd)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--checkpoints", help="comma list, log:K, or none (default log:64)")
    p.add_argument("--r-grid", help="comma list of probe r values")
    p.add_argument("--include-stuck", action="store_true",
                   help="keep stuck runs in downstream statistics")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("analyze", help="summarize a results file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--level", type=float, default=0.01)
    p.add_argument("--perm-seed", type=int, default=0)
    p.add_argument("--permutations", type=int, default=500)
    p.add_argument("--no-independence", action="store_true")
    p.add_argument("--csv-out", help="write scaled-variable columns as CSV")
    p.add_argument("--ecdf-out", help="ELL:PATH - write an empirical CDF table")
    p.add_argument("--format", choices=("json", "text"), default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("oracle", help="exact tables for tiny instances")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--format", choices=("json", "text"), default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"parameter error: {exc}", file=sys.stderr)
        return EXIT_PARAMETER
    except (DomainError, GuardError, ConfigMismatchError, DegenerateSampleError,
            TailWindowError) as exc:
        print(f"domain/guard error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
