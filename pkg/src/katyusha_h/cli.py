"""Command-line harness.

Subcommands: run, sweep, verify, select-alpha, solve-ref, parse-data.
Exit codes: 0 success / all claims pass, 1 verification failure, 2 config or
usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import verification
from .analysis import (
    InadmissibleConstantError,
    InfeasibleAccuracyError,
    feasible_alpha_interval,
    predict_ifo,
    select_alpha,
)
from .experiment import (
    ConfigError,
    build_problem,
    load_config,
    run_command,
    sweep_command,
)
from .problems import DataFormatError, parse_libsvm, serialize_libsvm


def _parse_floats(raw: str) -> tuple[float, ...]:
    return tuple(float(p) for p in raw.replace(",", " ").split())


def _parse_ints(raw: str) -> tuple[int, ...]:
    return tuple(int(p) for p in raw.replace(",", " ").split())


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seeds:
        cfg.run.seeds = _parse_ints(args.seeds)
    paths = run_command(cfg, out_dir=args.out, jobs=args.jobs)
    for path in paths:
        print(path)
    return 0


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if args.seeds:
        cfg.run.seeds = _parse_ints(args.seeds)
    alphas = _parse_floats(args.alphas) if args.alphas else None
    bs = _parse_ints(args.bs) if args.bs else None
    rows, path = sweep_command(cfg, alphas=alphas, bs=bs, out_dir=args.out, jobs=args.jobs)
    print("alpha      b     reached   mean_ifo        mean_final_gap")
    for r in rows:
        print(
            f"{r.alpha:<10.4g} {r.b:<5d} {r.reached_target}/{r.seeds:<7d} "
            f"{r.mean_ifo:<15.6g} {r.mean_final_gap:.6g}"
        )
    print(f"summary written to {path}")
    return 0


def _parse_fault(raw: str | None) -> float | None:
    if raw is None:
        return None
    key, _, value = raw.partition("=")
    if key.strip() != "xi" or not value:
        raise ConfigError(f"--inject-fault expects xi=<value>, got {raw!r}")
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"--inject-fault expects a number, got {value!r}") from None


def _cmd_verify(args) -> int:
    grid = None
    if args.alpha_step is not None:
        grid = verification.default_alpha_grid(step=args.alpha_step)
    report = verification.scan_schedule(
        alpha_grid=grid,
        t_max=args.t_max,
        batch_sizes=_parse_ints(args.batch_sizes),
        xi_override=_parse_fault(args.inject_fault),
    )
    claims = list(report.claims)
    if args.growth_alphas:
        for alpha in _parse_floats(args.growth_alphas):
            claims.extend(
                verification.scan_denominator_growth(alpha, t_max=args.t_max).claims
            )
    report = verification.CertificateReport(claims=claims)
    text = report.to_text()
    print(text, end="")
    if args.report:
        Path(args.report).write_text(text)
    return 0 if report.passed else 1


def _cmd_select_alpha(args) -> int:
    try:
        interval = feasible_alpha_interval(args.n, args.epsilon, args.c1, args.c2)
        alpha = select_alpha(args.n, args.epsilon, args.c1, args.c2)
    except (InfeasibleAccuracyError, InadmissibleConstantError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"alpha = {alpha:.6g}")
    print(f"interval = [{interval.delta1:.6g}, {interval.delta2:.6g}]")
    print(
        f"feasible = [{interval.feasible_lo:.6g}, {interval.feasible_hi:.6g}]"
        f" (alpha_hat = {interval.alpha_hat:.6g})"
    )
    cost = predict_ifo(alpha, 1, args.n, args.epsilon)
    print(f"predicted cost (order estimate, b=1): total ~ {cost.total:.4g}")
    for name, value in cost.terms.items():
        print(f"  {name:<18} ~ {value:.4g}")
    return 0


def _cmd_solve_ref(args) -> int:
    cfg = load_config(args.config)
    if cfg.reference is None:
        raise ConfigError("config has no [reference] section")
    if args.tol is not None:
        cfg.reference.tol = args.tol
    problem = build_problem(cfg)
    ref = problem.reference
    assert ref is not None
    print(f"f_star = {ref.f_star!r}")
    print(f"gap_tolerance = {ref.gap_tolerance!r}")
    if args.out:
        lines = [
            f"f_star = {ref.f_star!r}",
            f"gap_tolerance = {ref.gap_tolerance!r}",
            "x_star = " + " ".join(repr(float(v)) for v in ref.x_star),
        ]
        Path(args.out).write_text("\n".join(lines) + "\n")
        print(f"reference written to {args.out}")
    return 0


def _cmd_parse_data(args) -> int:
    path = Path(args.path)
    if not path.exists():
        raise ConfigError(f"dataset file not found: {path}")
    try:
        dataset = parse_libsvm(path.read_text())
    except DataFormatError as exc:
        print(f"error: {path}: {exc}", file=sys.stderr)
        return 2
    labels = np.asarray(dataset.labels)
    print(f"rows = {dataset.n}")
    print(f"dimension = {dataset.d}")
    print(f"nonzeros = {sum(len(r) for r in dataset.rows)}")
    print(f"label range = [{labels.min():g}, {labels.max():g}]")
    if args.out:
        Path(args.out).write_text(serialize_libsvm(dataset))
        print(f"canonical form written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="katyusha-h",
        description="Single-loop accelerated variance reduction harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the configured solver, one trace per seed")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="override the output directory")
    p.add_argument("--seeds", default=None, help="override config seeds, e.g. 0,1,2")
    p.add_argument("--jobs", type=int, default=1, help="run seeds concurrently")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="run an (alpha, b) grid and summarize costs")
    p.add_argument("--config", required=True)
    p.add_argument("--alphas", default=None, help="e.g. 0,0.5,1")
    p.add_argument("--bs", default=None, help="e.g. 1,10")
    p.add_argument("--out", default=None)
    p.add_argument("--seeds", default=None, help="override config seeds, e.g. 0,1,2")
    p.add_argument("--jobs", type=int, default=1, help="run grid cells concurrently")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("verify", help="certify the schedule inequalities by scan")
    p.add_argument("--t-max", type=int, default=100_000)
    p.add_argument("--alpha-step", type=float, default=None)
    p.add_argument("--batch-sizes", default="1,2,10")
    p.add_argument(
        "--growth-alphas",
        default="0.5,1",
        help="exponents for the denominator growth scan ('' to skip)",
    )
    p.add_argument(
        "--inject-fault",
        default=None,
        metavar="xi=VALUE",
        help="override xi to prove the scanner can fail",
    )
    p.add_argument("--report", default=None, help="also write the report to a file")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("select-alpha", help="accuracy-driven growth exponent")
    p.add_argument("n", type=int)
    p.add_argument("epsilon", type=float)
    p.add_argument("--c1", type=float, default=2.0)
    p.add_argument("--c2", type=float, default=2.0)
    p.set_defaults(func=_cmd_select_alpha)

    p = sub.add_parser("solve-ref", help="solve the configured problem to high accuracy")
    p.add_argument("--config", required=True)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_solve_ref)

    p = sub.add_parser("parse-data", help="validate a dataset file, optionally canonicalize")
    p.add_argument("path")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_parse_data)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        # bad configs, malformed data, and domain errors all exit 2
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
