"""Experiment configs, trace files, and run orchestration for the CLI.

Config files are flat ``key = value`` sections (no includes) so experiment
definitions stay diffable.  Trace files are comma-separated with a ``#``
header block carrying the problem, solver, and reference provenance; gap
columns store F - F* so downstream checks are scale-free.  Writing is fully
deterministic: rerunning the same config reproduces files byte for byte.
"""

from __future__ import annotations

import configparser
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import optimizers
from .optimizers import RunConfig, TraceRecord
from .problems import (
    FiniteSumProblem,
    make_least_squares,
    make_logistic,
    parse_libsvm,
    solve_reference,
    synthesize,
)
from .proximal import Regularizer

TRACE_COLUMNS = ("t", "F_y_gap", "F_w_gap", "p_t", "ckpt_updated", "ifo_total", "lyapunov")


class ConfigError(ValueError):
    """Bad experiment configuration; maps to CLI exit code 2."""


@dataclass
class ProblemSpec:
    family: str = "least_squares"
    n: int = 100
    d: int = 20
    seed: int = 0
    condition: float = 1.0
    noise: float = 0.1
    density: float = 1.0
    consistent: bool = False
    data: str | None = None  # libsvm-format file; overrides synthesis
    reg: str = "zero"
    lam1: float = 0.0
    lam2: float = 0.0
    L: float | None = None  # override the analytic smoothness bound


@dataclass
class SolverSpec:
    method: str = "katyusha_h"  # katyusha_h | fista | pgd | psgd
    alpha: float = 1.0
    b: int = 1
    eta: float | None = None  # None = largest allowable
    cache_checkpoint_grads: bool = False


@dataclass
class RunSpec:
    iterations: int | None = None
    epsilon: float | None = None
    seeds: tuple[int, ...] = (0,)
    eval_every: int | None = None
    max_iterations: int = 10_000_000


@dataclass
class OutputSpec:
    directory: str = "traces"
    trace_stride: int = 1
    lyapunov: bool = False


@dataclass
class ReferenceSpec:
    tol: float = 1e-12
    max_iterations: int = 200_000


@dataclass
class ExperimentConfig:
    problem: ProblemSpec = field(default_factory=ProblemSpec)
    solver: SolverSpec = field(default_factory=SolverSpec)
    run: RunSpec = field(default_factory=RunSpec)
    output: OutputSpec = field(default_factory=OutputSpec)
    reference: ReferenceSpec | None = None
    sweep_alphas: tuple[float, ...] | None = None
    sweep_bs: tuple[int, ...] | None = None


def _coerce(section: str, key: str, raw: str, kind):
    try:
        if kind is bool:
            lowered = raw.strip().lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return kind(raw)
    except (TypeError, ValueError):
        raise ConfigError(
            f"[{section}] {key} = {raw!r}: expected {kind.__name__}"
        ) from None


def _apply(spec, section: str, items: dict[str, str], types: dict[str, type]):
    for key, raw in items.items():
        if key not in types:
            raise ConfigError(f"[{section}] unknown key {key!r}")
        setattr(spec, key, _coerce(section, key, raw, types[key]))


def _parse_seq(section: str, key: str, raw: str, kind):
    parts = raw.replace(",", " ").split()
    if not parts:
        raise ConfigError(f"[{section}] {key} must not be empty")
    return tuple(_coerce(section, key, p, kind) for p in parts)


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and validate a flat key = value experiment config."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string(path.read_text(), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    cfg = ExperimentConfig()
    for section in parser.sections():
        items = dict(parser.items(section))
        if section == "problem":
            _apply(cfg.problem, section, items, {
                "family": str, "n": int, "d": int, "seed": int,
                "condition": float, "noise": float, "density": float,
                "consistent": bool, "data": str, "reg": str,
                "lam1": float, "lam2": float, "L": float,
            })
        elif section == "solver":
            if items.get("eta", "").strip().lower() == "auto":
                del items["eta"]  # auto = largest allowable (the default)
            _apply(cfg.solver, section, items, {
                "method": str, "alpha": float, "b": int, "eta": float,
                "cache_checkpoint_grads": bool,
            })
        elif section == "run":
            if "seeds" in items:
                cfg.run.seeds = _parse_seq(section, "seeds", items.pop("seeds"), int)
            _apply(cfg.run, section, items, {
                "iterations": int, "epsilon": float, "eval_every": int,
                "max_iterations": int,
            })
        elif section == "output":
            _apply(cfg.output, section, items, {
                "directory": str, "trace_stride": int, "lyapunov": bool,
            })
        elif section == "reference":
            cfg.reference = ReferenceSpec()
            _apply(cfg.reference, section, items, {
                "tol": float, "max_iterations": int,
            })
        elif section == "sweep":
            if "alphas" in items:
                cfg.sweep_alphas = _parse_seq(section, "alphas", items.pop("alphas"), float)
            if "bs" in items:
                cfg.sweep_bs = _parse_seq(section, "bs", items.pop("bs"), int)
            if items:
                raise ConfigError(f"[sweep] unknown key {next(iter(items))!r}")
        else:
            raise ConfigError(f"unknown section [{section}]")
    validate_config(cfg)
    return cfg


def validate_config(cfg: ExperimentConfig) -> None:
    if cfg.problem.family not in ("least_squares", "logistic"):
        raise ConfigError(f"unknown problem family {cfg.problem.family!r}")
    if cfg.problem.reg not in ("zero", "l1", "squared_l2", "elastic_net"):
        raise ConfigError(f"unknown regularizer {cfg.problem.reg!r}")
    if cfg.solver.method not in ("katyusha_h", "fista", "pgd", "psgd"):
        raise ConfigError(f"unknown solver method {cfg.solver.method!r}")
    if (cfg.run.iterations is None) == (cfg.run.epsilon is None):
        raise ConfigError("[run] needs exactly one of iterations / epsilon")
    if cfg.run.epsilon is not None and cfg.reference is None:
        raise ConfigError("[run] epsilon target requires a [reference] section")
    if cfg.output.lyapunov and cfg.reference is None:
        raise ConfigError("[output] lyapunov requires a [reference] section")
    if cfg.problem.data is not None and not Path(cfg.problem.data).exists():
        raise ConfigError(f"dataset file not found: {cfg.problem.data}")


def _build_regularizer(spec: ProblemSpec) -> Regularizer:
    if spec.reg == "zero":
        return Regularizer.zero()
    if spec.reg == "l1":
        return Regularizer.l1(spec.lam1)
    if spec.reg == "squared_l2":
        return Regularizer.squared_l2(spec.lam2)
    return Regularizer.elastic_net(spec.lam1, spec.lam2)


def build_problem(cfg: ExperimentConfig) -> FiniteSumProblem:
    """Materialize the problem (file or synthetic) and attach any reference."""
    reg = _build_regularizer(cfg.problem)
    if cfg.problem.data is not None:
        text = Path(cfg.problem.data).read_text()
        dataset = parse_libsvm(text)
        maker = make_least_squares if cfg.problem.family == "least_squares" else make_logistic
        problem = maker(dataset, reg=reg)
    else:
        _, problem = synthesize(
            cfg.problem.n,
            cfg.problem.d,
            family=cfg.problem.family,
            seed=cfg.problem.seed,
            reg=reg,
            condition=cfg.problem.condition,
            noise=cfg.problem.noise,
            density=cfg.problem.density,
            consistent=cfg.problem.consistent,
        )
    if cfg.problem.L is not None:
        if cfg.problem.L <= 0.0:
            raise ConfigError("[problem] L must be positive")
        problem.L = cfg.problem.L
    if cfg.reference is not None:
        problem.reference = solve_reference(
            problem, tol=cfg.reference.tol, max_iterations=cfg.reference.max_iterations
        )
    return problem


def run_single(
    problem: FiniteSumProblem,
    cfg: ExperimentConfig,
    seed: int,
    alpha: float | None = None,
    b: int | None = None,
) -> list[TraceRecord]:
    """One solver run for one seed (alpha/b overrides serve sweep cells)."""
    solver = cfg.solver
    method = solver.method
    if method == "katyusha_h":
        run_cfg = RunConfig(
            alpha=solver.alpha if alpha is None else alpha,
            batch_size=solver.b if b is None else b,
            eta=solver.eta,
            iterations=cfg.run.iterations,
            epsilon=cfg.run.epsilon,
            seed=seed,
            record_every=cfg.output.trace_stride,
            eval_every=cfg.run.eval_every,
            lyapunov=cfg.output.lyapunov,
            cache_checkpoint_grads=solver.cache_checkpoint_grads,
            max_iterations=cfg.run.max_iterations,
        )
        return optimizers.run(problem, run_cfg)
    common = dict(
        iterations=cfg.run.iterations,
        epsilon=cfg.run.epsilon,
        record_every=cfg.output.trace_stride,
        max_iterations=cfg.run.max_iterations,
    )
    if method == "fista":
        return optimizers.fista_run(problem, **common)
    if method == "pgd":
        return optimizers.pgd_run(problem, **common)
    if method == "psgd":
        if cfg.run.eval_every is not None:
            common["eval_every"] = cfg.run.eval_every
        return optimizers.psgd_run(problem, seed=seed, **common)
    raise ConfigError(f"unknown solver method {method!r}")


def _fmt(x: float) -> str:
    if math.isnan(x):
        return ""
    return repr(float(x))


def write_trace(
    path: str | Path,
    records: list[TraceRecord],
    header: dict[str, str],
    f_star: float,
) -> None:
    """Write one trace file: '# key = value' header block, then CSV rows."""
    lines = [f"# {key} = {value}" for key, value in header.items()]
    lines.append(",".join(TRACE_COLUMNS))
    for rec in records:
        lines.append(
            ",".join(
                (
                    str(rec.t),
                    _fmt(rec.f_y - f_star),
                    _fmt(rec.f_w - f_star),
                    _fmt(rec.p),
                    str(int(rec.checkpoint_updated)),
                    str(rec.ifo_total),
                    _fmt(rec.lyapunov),
                )
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_trace(path: str | Path) -> tuple[dict[str, str], list[dict[str, float]]]:
    """Parse a trace file back into its header and rows (round-trip safe)."""
    header: dict[str, str] = {}
    rows: list[dict[str, float]] = []
    columns: list[str] | None = None
    for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            header[key.strip()] = value.strip()
            continue
        if columns is None:
            columns = line.split(",")
            if columns != list(TRACE_COLUMNS):
                raise ValueError(f"{path}: unexpected trace columns {columns}")
            continue
        parts = line.split(",")
        if len(parts) != len(columns):
            raise ValueError(f"{path}:{line_no}: malformed row")
        row: dict[str, float] = {}
        for col, part in zip(columns, parts):
            if part == "":
                row[col] = math.nan
            elif col in ("t", "ckpt_updated", "ifo_total"):
                row[col] = int(part)
            else:
                row[col] = float(part)
        rows.append(row)
    if columns is None:
        raise ValueError(f"{path}: empty trace file")
    return header, rows


def _trace_header(cfg: ExperimentConfig, problem: FiniteSumProblem, seed: int,
                  alpha: float | None = None, b: int | None = None) -> dict[str, str]:
    solver = cfg.solver
    head = {
        "trace_format": "1",
        "problem": (
            f"family={cfg.problem.family} reg={cfg.problem.reg} "
            f"n={problem.n} d={problem.d}"
        ),
        "source": cfg.problem.data or f"synthetic seed={cfg.problem.seed}",
        "method": solver.method,
    }
    if solver.method == "katyusha_h":
        head["alpha"] = repr(solver.alpha if alpha is None else alpha)
        head["b"] = str(solver.b if b is None else b)
        head["eta"] = "auto" if solver.eta is None else repr(solver.eta)
    head["seed"] = str(seed)
    if problem.reference is not None:
        head["f_star"] = repr(float(problem.reference.f_star))
        head["f_star_tolerance"] = repr(float(problem.reference.gap_tolerance))
        head["reference"] = "fista-restart"
    else:
        head["f_star"] = repr(0.0)
        head["reference"] = "none (gaps are raw objective values)"
    return head


def _run_map(worker, items, jobs: int):
    """Map with optional thread fan-out; runs share nothing mutable."""
    if jobs <= 1 or len(items) <= 1:
        return [worker(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, items))


def run_command(
    cfg: ExperimentConfig, out_dir: str | Path | None = None, jobs: int = 1
) -> list[Path]:
    """Execute the configured runs, one trace file per seed.

    Seeds execute independently (optionally in parallel); each writes its own
    file, so outputs are byte-identical regardless of ``jobs``.
    """
    problem = build_problem(cfg)
    out = Path(out_dir if out_dir is not None else cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    f_star = problem.reference.f_star if problem.reference is not None else 0.0

    def one_seed(seed: int) -> Path:
        records = run_single(problem, cfg, seed)
        path = out / f"trace_{cfg.solver.method}_seed{seed}.csv"
        write_trace(path, records, _trace_header(cfg, problem, seed), f_star)
        return path

    return _run_map(one_seed, list(cfg.run.seeds), jobs)


@dataclass(frozen=True)
class SweepRow:
    """One sweep cell: seed-aggregated cost and final-gap statistics."""

    alpha: float
    b: int
    seeds: int
    reached_target: int
    mean_ifo: float
    sd_ifo: float
    mean_iterations: float
    mean_final_gap: float


def sweep_command(
    cfg: ExperimentConfig,
    alphas: tuple[float, ...] | None = None,
    bs: tuple[int, ...] | None = None,
    out_dir: str | Path | None = None,
    jobs: int = 1,
) -> tuple[list[SweepRow], Path]:
    """Run the (alpha, b) grid and aggregate per-cell cost over seeds.

    With an epsilon target the aggregate is IFO-to-target; with a fixed
    iteration budget it is total IFO spent.  Cells where some seed misses the
    target report how many seeds reached it.  Cells execute independently
    (optionally in parallel) and the summary order is fixed by the grid.
    """
    if cfg.solver.method != "katyusha_h":
        raise ConfigError("sweep supports only the katyusha_h solver")
    alphas = alphas if alphas is not None else cfg.sweep_alphas
    bs = bs if bs is not None else cfg.sweep_bs
    if not alphas or not bs:
        raise ConfigError("sweep needs alpha and b grids (flags or [sweep] section)")
    problem = build_problem(cfg)
    f_star = problem.reference.f_star if problem.reference is not None else 0.0
    out = Path(out_dir if out_dir is not None else cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)

    def one_cell(cell: tuple[float, int]) -> SweepRow:
        alpha, b = cell
        ifos, iters, gaps, reached = [], [], [], 0
        for seed in cfg.run.seeds:
            final = run_single(problem, cfg, seed, alpha=alpha, b=b)[-1]
            gap = final.f_w - f_star
            gaps.append(gap)
            iters.append(final.t)
            ifos.append(final.ifo_total)
            if cfg.run.epsilon is None or gap <= cfg.run.epsilon:
                reached += 1
        return SweepRow(
            alpha=alpha,
            b=b,
            seeds=len(cfg.run.seeds),
            reached_target=reached,
            mean_ifo=float(np.mean(ifos)),
            sd_ifo=float(np.std(ifos, ddof=1)) if len(ifos) > 1 else 0.0,
            mean_iterations=float(np.mean(iters)),
            mean_final_gap=float(np.mean(gaps)),
        )

    cells = [(alpha, b) for alpha in alphas for b in bs]
    rows = _run_map(one_cell, cells, jobs)
    path = out / "sweep_summary.csv"
    lines = ["alpha,b,seeds,reached_target,mean_ifo,sd_ifo,mean_iterations,mean_final_gap"]
    for r in rows:
        lines.append(
            f"{repr(r.alpha)},{r.b},{r.seeds},{r.reached_target},"
            f"{repr(r.mean_ifo)},{repr(r.sd_ifo)},{repr(r.mean_iterations)},"
            f"{repr(r.mean_final_gap)}"
        )
    path.write_text("\n".join(lines) + "\n")
    return rows, path
