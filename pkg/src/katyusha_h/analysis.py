"""Lyapunov tracking, convergence-bound checking, cost prediction, and the
accuracy-driven growth-exponent selector.

Predicted IFO costs are order estimates: each addend carries an implicit
constant of exactly 1 because the underlying complexity statement fixes none.
Ratio and order checks are meaningful; absolute counts are not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .schedule import ScheduleCursor, ScheduleParams, denominator_at, prev_denominator_at

ALPHA_BRANCH_CAP = 0.1  # the small-alpha branch applies below min(alpha_hat, this)


class InfeasibleAccuracyError(ValueError):
    """The selector needs n < 1/epsilon."""


class InadmissibleConstantError(ValueError):
    """The chosen C2 does not make the upper interval endpoint positive."""


def alpha_hat(epsilon: float) -> float:
    """Threshold exponent log(2)/log(ceil(1/epsilon))."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    return math.log(2.0) / math.log(math.ceil(1.0 / epsilon))


def lyapunov(
    y: np.ndarray,
    z: np.ndarray,
    w: np.ndarray,
    cursor: ScheduleCursor,
    params: ScheduleParams,
    eta: float,
    problem,
) -> float:
    """Lyapunov value for a state at the start of iteration t = cursor.t.

    L_t = alpha_{t-1}^2 (F(y_t) - F*) + D_{t-1} (F(w_t) - F*)
          + ||z_t - x*||^2 / (2 eta).

    Costs two full objective evaluations plus a norm; instrumentation only,
    never charged to the IFO ledger.
    """
    ref = problem.reference
    if ref is None:
        raise ValueError("Lyapunov evaluation requires a reference solution")
    if cursor.t >= 1:
        alpha_sq = cursor.alpha_prev ** 2
        weight_w = prev_denominator_at(cursor, params)
    else:
        # t = 0 start-of-run form: alpha_0^2 and alpha_tilde0.
        alpha_sq = params.alpha0 ** 2
        weight_w = params.alpha_tilde0
    gap_y = problem.value(y) - ref.f_star
    gap_w = problem.value(w) - ref.f_star
    dz = np.asarray(z) - ref.x_star
    return alpha_sq * gap_y + weight_w * gap_w + float(dz @ dz) / (2.0 * eta)


def final_bound_lhs(
    y: np.ndarray,
    z: np.ndarray,
    w: np.ndarray,
    cursor: ScheduleCursor,
    params: ScheduleParams,
    eta: float,
    problem,
) -> float:
    """Anytime-bound left side after T = cursor.t iterations.

    alpha_T^2 (F(y_{T+1}) - F*) + D_T (F(w_{T+1}) - F*)
    + ||z_{T+1} - x*||^2 / (2 eta); equals the Lyapunov value of the next
    state, so descent checks and this bound share one code path.
    """
    ref = problem.reference
    if ref is None:
        raise ValueError("bound evaluation requires a reference solution")
    gap_y = problem.value(y) - ref.f_star
    gap_w = problem.value(w) - ref.f_star
    dz = np.asarray(z) - ref.x_star
    return (
        cursor.alpha_t ** 2 * gap_y
        + denominator_at(cursor, params) * gap_w
        + float(dz @ dz) / (2.0 * eta)
    )


@dataclass(frozen=True)
class BoundReport:
    """Seed-averaged anytime-bound check: mean final LHS vs initial value."""

    initial: float
    mean_final: float
    std_error: float
    slack_sigmas: float
    n_seeds: int
    margin: float
    passed: bool

    def __str__(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (
            f"lyapunov-bound | seeds={self.n_seeds} | initial={self.initial:.6g} | "
            f"mean_final={self.mean_final:.6g} +- {self.std_error:.2g} | "
            f"margin={self.margin:.6g} | {verdict}"
        )


def check_lyapunov_bound(
    traces: list[list],
    slack_sigmas: float = 2.0,
    min_seeds: int = 30,
) -> BoundReport:
    """Verify mean-over-seeds of the final bound LHS <= initial Lyapunov value.

    ``traces`` holds one record list per independent seed; records must carry
    Lyapunov values at t=0 and at the final step.  The statistical slack is
    ``slack_sigmas`` standard errors of the seed mean.
    """
    if len(traces) < min_seeds:
        raise ValueError(f"need at least {min_seeds} seeds, got {len(traces)}")
    initials = np.array([tr[0].lyapunov for tr in traces], dtype=np.float64)
    finals = np.array([tr[-1].lyapunov for tr in traces], dtype=np.float64)
    if np.any(np.isnan(initials)) or np.any(np.isnan(finals)):
        raise ValueError("traces lack Lyapunov instrumentation")
    if not np.allclose(initials, initials[0], rtol=1e-9, atol=0.0):
        raise ValueError("seeds disagree on the initial state")
    initial = float(initials[0])
    mean_final = float(np.mean(finals))
    if len(finals) > 1:
        std_error = float(np.std(finals, ddof=1) / math.sqrt(len(finals)))
    else:
        std_error = 0.0
    allowance = initial + slack_sigmas * std_error
    margin = allowance - mean_final
    return BoundReport(
        initial=initial,
        mean_final=mean_final,
        std_error=std_error,
        slack_sigmas=slack_sigmas,
        n_seeds=len(traces),
        margin=margin,
        passed=mean_final <= allowance * (1.0 + 1e-12),
    )


@dataclass(frozen=True)
class PredictedCost:
    """Order-level IFO cost with one entry per addend (unit constants)."""

    alpha: float
    b: int
    n: int
    epsilon: float
    branch: str  # "small-alpha" or "general"
    terms: dict[str, float]

    @property
    def total(self) -> float:
        return sum(self.terms.values())


def predict_ifo(
    alpha: float, b: int, n: int, epsilon: float, _force_branch: str | None = None
) -> PredictedCost:
    """Expected IFO cost to reach accuracy epsilon, split into addends.

    The small-alpha branch (alpha <= min(alpha_hat, 0.1)) drops the
    checkpoint power term: its harmonic-style sum collapses into the log
    term there.  ``_force_branch`` exists for branch-boundary audits only.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    if not 1 <= b <= n:
        raise ValueError(f"need 1 <= b <= n, got b={b}, n={n}")
    threshold = min(alpha_hat(epsilon), ALPHA_BRANCH_CAP)
    branch = _force_branch or (
        "small-alpha" if alpha <= threshold else "general"
    )
    log_term = n * math.log(1.0 / epsilon)
    iter_term = b * epsilon ** (-1.0 / (alpha + 1.0))
    terms = {"minibatch": iter_term, "checkpoint_log": log_term}
    if branch == "general":
        if alpha == 0.0:
            raise ValueError("the general branch needs alpha > 0")
        terms["checkpoint_power"] = (
            (n / b) * (1.0 / alpha) * epsilon ** (-alpha / (alpha + 1.0))
        )
    elif branch != "small-alpha":
        raise ValueError(f"unknown branch {branch!r}")
    return PredictedCost(
        alpha=alpha, b=b, n=n, epsilon=epsilon, branch=branch, terms=terms
    )


def threshold_branches(b: int, n: int, epsilon: float) -> tuple[PredictedCost, PredictedCost]:
    """Both branch evaluations at the branch boundary alpha = min(alpha_hat, 0.1).

    The branches are never silently mixed; at the boundary both are reported
    so callers can see that they differ only in the checkpoint power term.
    """
    boundary = min(alpha_hat(epsilon), ALPHA_BRANCH_CAP)
    small = predict_ifo(boundary, b, n, epsilon, _force_branch="small-alpha")
    general = predict_ifo(boundary, b, n, epsilon, _force_branch="general")
    return small, general


@dataclass(frozen=True)
class AlphaInterval:
    """Feasible growth-exponent interval for near-optimal total cost."""

    delta1: float
    delta2: float
    alpha_hat: float
    feasible_lo: float
    feasible_hi: float


def feasible_alpha_interval(
    n: int, epsilon: float, c1: float = 2.0, c2: float = 2.0
) -> AlphaInterval:
    """Exponent interval [delta1, delta2] and its clip to the branch structure.

    Requires n < 1/epsilon and constants c1, c2 >= 1 with c2 small enough to
    keep delta2 positive.  All logarithms are natural; the ratios are
    base-invariant.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    if n < 1:
        raise ValueError("n must be positive")
    if c1 < 1.0 or c2 < 1.0:
        raise ValueError("c1 and c2 must be >= 1")
    if n * epsilon >= 1.0:
        raise InfeasibleAccuracyError(
            f"need n < 1/epsilon, got n={n}, 1/epsilon={1.0 / epsilon:.6g}"
        )
    log_acc = math.log(1.0 / epsilon)
    r = math.log(n) / log_acc
    s1 = 2.0 * math.log(c1) / log_acc
    s2 = 2.0 * math.log(c2) / log_acc
    delta1 = (1.0 - r - s1) / (1.0 + r + s1)
    den2 = 1.0 + r - s2
    if den2 <= 0.0:
        raise InadmissibleConstantError(
            f"c2={c2} too large: upper endpoint denominator {den2:.6g} <= 0"
        )
    delta2 = (1.0 - r + s2) / den2
    if delta2 <= 0.0:
        raise InadmissibleConstantError(
            f"c2={c2} does not make the upper endpoint positive (delta2={delta2:.6g})"
        )
    a_hat = alpha_hat(epsilon)
    threshold = min(a_hat, ALPHA_BRANCH_CAP)
    if delta2 <= threshold:
        lo, hi = max(0.0, delta1), delta2
    else:
        lo, hi = max(threshold, delta1), min(1.0, delta2)
    return AlphaInterval(
        delta1=delta1, delta2=delta2, alpha_hat=a_hat, feasible_lo=lo, feasible_hi=hi
    )


def selector_inequalities(
    alpha: float, n: int, epsilon: float, c1: float, c2: float
) -> tuple[float, float]:
    """Slacks of the two target inequalities at alpha (nonnegative = satisfied).

    1/eps^(1/(alpha+1)) <= c1 sqrt(n)/sqrt(eps)  and
    n/eps^(alpha/(alpha+1)) <= c2 sqrt(n)/sqrt(eps).
    """
    budget = math.sqrt(n) / math.sqrt(epsilon)
    first = c1 * budget - epsilon ** (-1.0 / (alpha + 1.0))
    second = c2 * budget - n * epsilon ** (-alpha / (alpha + 1.0))
    return first, second


def select_alpha(n: int, epsilon: float, c1: float = 2.0, c2: float = 2.0) -> float:
    """Midpoint of the feasible exponent interval, re-verified before return.

    The midpoint maximizes margin against both constraints; any feasible
    point would satisfy them.
    """
    interval = feasible_alpha_interval(n, epsilon, c1, c2)
    alpha = 0.5 * (interval.feasible_lo + interval.feasible_hi)
    first, second = selector_inequalities(alpha, n, epsilon, c1, c2)
    if first < 0.0 or second < 0.0:
        raise RuntimeError(
            f"selected alpha={alpha} violates a target inequality "
            f"(slacks {first:.3g}, {second:.3g})"
        )
    return alpha


def accuracy_free_config(n: int) -> tuple[float, int]:
    """(alpha, b) pair that is near-optimal without knowing epsilon:
    full acceleration with batch size ceil(sqrt(n))."""
    if n < 1:
        raise ValueError("n must be positive")
    root = math.isqrt(n)
    b = root if root * root == n else root + 1
    return 1.0, b


def partial_sum_power(lo: int, hi: int, exponent: float) -> float:
    """sum_{t=lo}^{hi} t**exponent by direct summation (validates integral bounds)."""
    if lo < 1 or hi < lo:
        raise ValueError("need 1 <= lo <= hi")
    t = np.arange(lo, hi + 1, dtype=np.float64)
    return float(np.sum(t ** exponent))
