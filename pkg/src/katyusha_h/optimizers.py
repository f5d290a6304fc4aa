"""The Katyusha-H iteration and deterministic/stochastic baselines.

One iteration of the main method:

  1. couple   x <- tau*z + xi*w + (1 - xi - tau)*y
  2. sample   a uniform size-b subset
  3. estimate the variance-reduced gradient at the new x
  4. prox     z-step with step length alpha_t * eta
  5. momentum y <- x + tau*(z_new - z)
  6. maybe replace the checkpoint by the PRE-update y with probability p_t

The checkpoint candidate is the pre-update y: the per-step Lyapunov
coefficients telescope only when a checkpoint hit lands on y_t, so replacing
with the post-update y would break the descent guarantee.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import numpy as np

from . import analysis
from .estimator import (
    Checkpoint,
    IfoLedger,
    make_checkpoint,
    maybe_update_checkpoint,
    sample_subset,
    svrg_estimate,
)
from .proximal import prox
from .schedule import (
    ScheduleConfig,
    ScheduleCursor,
    ScheduleParams,
    advance,
    compute_constants,
    initial_cursor,
    max_step_size,
    p_at,
    tau_at,
)


@dataclass
class TraceRecord:
    """Per-iteration observables; objective fields are NaN when not evaluated."""

    t: int
    f_y: float
    f_w: float
    p: float
    checkpoint_updated: bool
    ifo_minibatch: int
    ifo_checkpoint: int
    lyapunov: float = math.nan

    @property
    def ifo_total(self) -> int:
        return self.ifo_minibatch + self.ifo_checkpoint


@dataclass
class RunConfig:
    """Solver run configuration: schedule knobs, stopping rule, seeding.

    Exactly one of ``iterations`` / ``epsilon`` drives the stopping rule; an
    epsilon target needs a reference solution on the problem.  ``eta=None``
    takes the largest allowable step size.  Objective evaluations for
    stopping and traces are instrumentation and never charged as IFO.
    """

    alpha: float = 1.0
    batch_size: int = 1
    eta: float | None = None
    iterations: int | None = None
    epsilon: float | None = None
    seed: int = 0
    record_every: int = 1
    eval_every: int | None = None  # None: every iteration if n*d small, else 10
    lyapunov: bool = False
    cache_checkpoint_grads: bool = False
    max_iterations: int = 10_000_000
    x0: np.ndarray | None = None

    def resolved_eval_every(self, problem) -> int:
        if self.eval_every is not None:
            return self.eval_every
        return 1 if problem.n * problem.d <= 50_000 else 10


@dataclass
class KatyushaHState:
    """All mutable state of one run; never shared across runs."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    ckpt: Checkpoint
    cursor: ScheduleCursor
    params: ScheduleParams
    batch_size: int
    eta: float
    rng: np.random.Generator
    ledger: IfoLedger
    y_version: int | None  # checkpoint version y coincides with, else None

    @property
    def t(self) -> int:
        return self.cursor.t

    def copy(self) -> "KatyushaHState":
        """Independent deep copy (own RNG stream state) for oracle lookahead."""
        return KatyushaHState(
            x=self.x.copy(),
            y=self.y.copy(),
            z=self.z.copy(),
            ckpt=Checkpoint(
                w=self.ckpt.w.copy(),
                full_grad=self.ckpt.full_grad.copy(),
                version=self.ckpt.version,
                component_grads=None
                if self.ckpt.component_grads is None
                else self.ckpt.component_grads.copy(),
            ),
            cursor=self.cursor,
            params=self.params,
            batch_size=self.batch_size,
            eta=self.eta,
            rng=copy.deepcopy(self.rng),
            ledger=IfoLedger(self.ledger.minibatch_calls, self.ledger.checkpoint_calls),
            y_version=self.y_version,
        )


def init_state(problem, config: RunConfig) -> KatyushaHState:
    """Initial state with w = x = y = z; charges the initial full gradient (n)."""
    params = compute_constants(
        ScheduleConfig(alpha=config.alpha, batch_size=config.batch_size, n=problem.n)
    )
    eta_max = max_step_size(problem.L, params)
    eta = eta_max if config.eta is None else config.eta
    if eta <= 0.0 or eta > eta_max * (1.0 + 1e-12):
        raise ValueError(
            f"eta must be in (0, {eta_max:.6g}] for L={problem.L:.6g}, got {eta}"
        )
    x0 = np.zeros(problem.d) if config.x0 is None else np.asarray(config.x0, float)
    ledger = IfoLedger()
    rng = np.random.Generator(np.random.Philox(key=config.seed))
    ckpt = make_checkpoint(
        x0.copy(), problem, ledger, cache=config.cache_checkpoint_grads, version=0
    )
    return KatyushaHState(
        x=x0.copy(),
        y=x0.copy(),
        z=x0.copy(),
        ckpt=ckpt,
        cursor=advance(initial_cursor(params), params),
        params=params,
        batch_size=config.batch_size,
        eta=eta,
        rng=rng,
        ledger=ledger,
        y_version=0,
    )


def katyusha_h_step(state: KatyushaHState, problem) -> TraceRecord:
    """Execute one iteration in place; returns a record without objective values."""
    cur = state.cursor
    params = state.params
    tau = tau_at(cur)
    xi = params.xi
    p = p_at(cur, params)

    x_next = tau * state.z + xi * state.ckpt.w + (1.0 - xi - tau) * state.y
    idx = sample_subset(problem.n, state.batch_size, state.rng)
    g = svrg_estimate(x_next, state.ckpt, idx, problem, state.ledger)
    step_len = cur.alpha_t * state.eta
    z_next = prox(problem.reg, state.z - step_len * g, step_len)
    y_next = x_next + tau * (z_next - state.z)

    # Checkpoint candidate is the pre-update y; at t=1 that is w itself and
    # the provenance flag lets the update skip a redundant full gradient.
    state.ckpt, updated = maybe_update_checkpoint(
        state.ckpt,
        state.y,
        p,
        state.rng,
        problem,
        state.ledger,
        candidate_version=state.y_version,
    )
    state.x, state.y, state.z = x_next, y_next, z_next
    state.y_version = None
    state.cursor = advance(cur, params)
    return TraceRecord(
        t=cur.t,
        f_y=math.nan,
        f_w=math.nan,
        p=p,
        checkpoint_updated=updated,
        ifo_minibatch=state.ledger.minibatch_calls,
        ifo_checkpoint=state.ledger.checkpoint_calls,
    )


def state_lyapunov(state: KatyushaHState, problem) -> float:
    """Lyapunov value of the current state (instrumentation only)."""
    return analysis.lyapunov(
        state.y, state.z, state.ckpt.w, state.cursor, state.params, state.eta, problem
    )


def _fill_objectives(record: TraceRecord, state: KatyushaHState, problem, want_lyapunov: bool) -> None:
    record.f_y = problem.value(state.y)
    record.f_w = problem.value(state.ckpt.w)
    if want_lyapunov:
        record.lyapunov = state_lyapunov(state, problem)


def run(problem, config: RunConfig) -> list[TraceRecord]:
    """Run until the iteration budget or the target gap is reached.

    Deterministic given the seed.  Returns the initial record plus one record
    per ``record_every`` iterations (the final iteration is always recorded).
    """
    if (config.iterations is None) == (config.epsilon is None):
        raise ValueError("exactly one of iterations/epsilon must be set")
    if config.epsilon is not None and problem.reference is None:
        raise ValueError("an epsilon target requires a reference solution")
    if config.lyapunov and problem.reference is None:
        raise ValueError("Lyapunov instrumentation requires a reference solution")
    state = init_state(problem, config)
    first = TraceRecord(
        t=0,
        f_y=math.nan,
        f_w=math.nan,
        p=math.nan,
        checkpoint_updated=False,
        ifo_minibatch=state.ledger.minibatch_calls,
        ifo_checkpoint=state.ledger.checkpoint_calls,
    )
    _fill_objectives(first, state, problem, config.lyapunov)
    records = [first]
    eval_every = config.resolved_eval_every(problem)
    budget = config.iterations if config.iterations is not None else config.max_iterations
    f_star = problem.reference.f_star if problem.reference is not None else 0.0

    t = 0
    while t < budget:
        t += 1
        rec = katyusha_h_step(state, problem)
        done = t == budget
        if config.epsilon is not None and (done or t % eval_every == 0):
            gap = problem.value(state.ckpt.w) - f_star
            if gap <= config.epsilon:
                done = True
        if done or t % config.record_every == 0:
            _fill_objectives(rec, state, problem, config.lyapunov)
            records.append(rec)
        if done:
            break
    return records


# -- deterministic and stochastic baselines ------------------------------


def _baseline_record(t, f_val, calls) -> TraceRecord:
    return TraceRecord(
        t=t,
        f_y=f_val,
        f_w=f_val,
        p=math.nan,
        checkpoint_updated=False,
        ifo_minibatch=calls,
        ifo_checkpoint=0,
    )


def _resolve_budget(iterations, epsilon, problem, max_iterations):
    if (iterations is None) == (epsilon is None):
        raise ValueError("exactly one of iterations/epsilon must be set")
    if epsilon is not None and problem.reference is None:
        raise ValueError("an epsilon target requires a reference solution")
    f_star = problem.reference.f_star if problem.reference is not None else 0.0
    budget = iterations if iterations is not None else max_iterations
    return budget, f_star


def fista_run(
    problem,
    iterations: int | None = None,
    epsilon: float | None = None,
    record_every: int = 1,
    x0: np.ndarray | None = None,
    max_iterations: int = 10_000_000,
) -> list[TraceRecord]:
    """Accelerated proximal gradient with step 1/L; costs n IFO per iteration."""
    budget, f_star = _resolve_budget(iterations, epsilon, problem, max_iterations)
    L = problem.L
    x = np.zeros(problem.d) if x0 is None else np.asarray(x0, float).copy()
    y = x.copy()
    theta = 1.0
    calls = 0
    records = [_baseline_record(0, problem.value(x), calls)]
    for t in range(1, budget + 1):
        x_next = prox(problem.reg, y - problem.full_grad(y) / L, 1.0 / L)
        calls += problem.n
        theta_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta * theta))
        y = x_next + (theta - 1.0) / theta_next * (x_next - x)
        x, theta = x_next, theta_next
        f_val = problem.value(x)
        done = t == budget or (epsilon is not None and f_val - f_star <= epsilon)
        if done or t % record_every == 0:
            records.append(_baseline_record(t, f_val, calls))
        if done:
            break
    return records


def fista_solve(
    problem,
    tol: float,
    max_iterations: int,
    restart: bool = True,
    x0: np.ndarray | None = None,
) -> tuple[np.ndarray, float, float, int]:
    """Over-solve with (optionally restarted) FISTA for reference solutions.

    Stops when the composite gradient-mapping certificate pushes the gap
    estimate ||G|| * radius below tol, where the radius proxy is
    max(1, 2*||x_best||).  Returns (x_best, f_best, gap_estimate, iterations).
    """
    L = problem.L
    x = np.zeros(problem.d) if x0 is None else np.asarray(x0, float).copy()
    y = x.copy()
    theta = 1.0
    f_best = problem.value(x)
    x_best = x.copy()
    gap_est = math.inf
    t = 0
    f_prev = f_best
    for t in range(1, max_iterations + 1):
        x_next = prox(problem.reg, y - problem.full_grad(y) / L, 1.0 / L)
        mapping_norm = L * float(np.linalg.norm(y - x_next))
        f_val = problem.value(x_next)
        if f_val < f_best:
            f_best = f_val
            x_best = x_next.copy()
        radius = max(1.0, 2.0 * float(np.linalg.norm(x_best)))
        gap_est = mapping_norm * radius
        if gap_est <= tol:
            x = x_next
            break
        if restart and f_val > f_prev:
            theta = 1.0  # function restart: drop momentum on objective increase
            y = x_next.copy()
        else:
            theta_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta * theta))
            y = x_next + (theta - 1.0) / theta_next * (x_next - x)
            theta = theta_next
        x = x_next
        f_prev = f_val
    return x_best, f_best, gap_est, t


def pgd_run(
    problem,
    iterations: int | None = None,
    epsilon: float | None = None,
    record_every: int = 1,
    x0: np.ndarray | None = None,
    max_iterations: int = 10_000_000,
) -> list[TraceRecord]:
    """Proximal gradient descent with step 1/L; costs n IFO per iteration."""
    budget, f_star = _resolve_budget(iterations, epsilon, problem, max_iterations)
    L = problem.L
    x = np.zeros(problem.d) if x0 is None else np.asarray(x0, float).copy()
    calls = 0
    records = [_baseline_record(0, problem.value(x), calls)]
    for t in range(1, budget + 1):
        x = prox(problem.reg, x - problem.full_grad(x) / L, 1.0 / L)
        calls += problem.n
        f_val = problem.value(x)
        done = t == budget or (epsilon is not None and f_val - f_star <= epsilon)
        if done or t % record_every == 0:
            records.append(_baseline_record(t, f_val, calls))
        if done:
            break
    return records


def psgd_run(
    problem,
    iterations: int | None = None,
    epsilon: float | None = None,
    seed: int = 0,
    eta0: float | None = None,
    record_every: int = 1,
    eval_every: int = 10,
    x0: np.ndarray | None = None,
    max_iterations: int = 10_000_000,
) -> list[TraceRecord]:
    """Single-sample stochastic proximal gradient, step eta0/sqrt(t); 1 IFO/iter."""
    budget, f_star = _resolve_budget(iterations, epsilon, problem, max_iterations)
    if eta0 is None:
        eta0 = 1.0 / problem.L
    rng = np.random.Generator(np.random.Philox(key=seed))
    x = np.zeros(problem.d) if x0 is None else np.asarray(x0, float).copy()
    calls = 0
    records = [_baseline_record(0, problem.value(x), calls)]
    for t in range(1, budget + 1):
        i = int(rng.integers(0, problem.n))
        step = eta0 / math.sqrt(t)
        x = prox(problem.reg, x - step * problem.component_grad(i, x), step)
        calls += 1
        done = t == budget
        if epsilon is not None and (done or t % eval_every == 0):
            if problem.value(x) - f_star <= epsilon:
                done = True
        if done or t % record_every == 0:
            records.append(_baseline_record(t, problem.value(x), calls))
        if done:
            break
    return records
