"""Brute-force certification of the schedule inequalities and descent laws.

Every claim is checked exhaustively over a grid (no sampling): schedule
inequalities over a dense exponent grid and a full index range, estimator
laws by enumerating every subset, and the Lyapunov descent by enumerating
subsets crossed with both checkpoint outcomes.  Scans are falsifiable by
construction: injecting a broken parameter must produce a failing claim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import combinations

import numpy as np

from . import analysis
from .estimator import (
    Checkpoint,
    EnumerationCapError,
    exact_variance,
    variance_bound_rhs,
)
from .optimizers import KatyushaHState
from .proximal import prox
from .schedule import (
    GROWTH_START,
    C_MAX,
    ScheduleConfig,
    alpha_sequence,
    compute_constants,
    denominator_at,
    denominator_sequence,
    p_at,
    tau_at,
)

INEQ_TOL = 1e-9  # normalized slack floor for inequality claims
EQ_TOL = 1e-12  # absolute tolerance for reformulation identities


@dataclass(frozen=True)
class ClaimResult:
    """Outcome of one scanned claim: worst slack and where it occurred."""

    claim: str
    domain: str
    min_slack: float
    worst_at: str
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.min_slack >= -self.tolerance


@dataclass
class CertificateReport:
    claims: list[ClaimResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.claims)

    def to_text(self) -> str:
        lines = []
        for c in self.claims:
            verdict = "PASS" if c.passed else "FAIL"
            lines.append(
                f"{c.claim} | {c.domain} | min_slack={c.min_slack:.6e} "
                f"at {c.worst_at} | {verdict}"
            )
        lines.append(
            f"overall: {'PASS' if self.passed else 'FAIL'} ({len(self.claims)} claims)"
        )
        return "\n".join(lines) + "\n"


class _ClaimTracker:
    """Running minimum slack per claim across grid cells."""

    def __init__(self, tolerance: float):
        self.tolerance = tolerance
        self.min_slack = math.inf
        self.worst_at = "n/a"

    def update(self, slack: np.ndarray | float, where) -> None:
        arr = np.atleast_1d(np.asarray(slack, dtype=np.float64))
        i = int(np.argmin(arr))
        if arr[i] < self.min_slack:
            self.min_slack = float(arr[i])
            self.worst_at = where(i)

    def result(self, claim: str, domain: str) -> ClaimResult:
        return ClaimResult(
            claim=claim,
            domain=domain,
            min_slack=self.min_slack,
            worst_at=self.worst_at,
            tolerance=self.tolerance,
        )


def default_alpha_grid(step: float = 0.01, probe: float = 1e-6) -> np.ndarray:
    """Dense grid over [0, 1] plus bucket boundaries and near-boundary probes.

    The growth-coefficient buckets are closed on the right, so probes at
    +-probe around each boundary catch off-by-bucket mistakes.
    """
    count = round(1.0 / step)
    pts = [i * step for i in range(count + 1)]
    boundaries = (0.0, 0.5, 0.75, 1.0)
    pts.extend(boundaries)
    for b in boundaries:
        for delta in (-probe, probe):
            v = b + delta
            if 0.0 <= v <= 1.0:
                pts.append(v)
    return np.unique(np.asarray(pts, dtype=np.float64))


def _normalized_gap(lhs: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Slack of 'lhs <= rhs' scaled by max(1, |lhs|, |rhs|)."""
    scale = np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))
    return (rhs - lhs) / scale


def scan_schedule(
    alpha_grid: np.ndarray | None = None,
    t_max: int = 100_000,
    batch_sizes: tuple[int, ...] = (1, 2, 10),
    xi_override: float | None = None,
    tol: float = INEQ_TOL,
) -> CertificateReport:
    """Certify every schedule inequality over the (alpha, b, t) grid.

    Claims: the key growth inequality xi*(a_{t+1}^2 - a_t^2) <= a_{t-1}^2 -
    a_t^2 + a_t; nonnegativity of that right side (the p_t numerator without
    the xi term); the denominator lower bound D_{t-1} >= xi*a_t^2 >= 0;
    p_t in [0, 1]; tau_t, xi, 1 - xi - tau_t in (0, 1); c <= 5; and equality
    of the shifted p_t reformulation with the direct formula.

    ``xi_override`` replaces xi (and alpha_tilde0 = 36*xi) with a raw value,
    bypassing the constructor guards; it exists for fault injection.
    """
    if t_max < 18:
        raise ValueError("t_max must be at least 18")
    if t_max > 10_000_000:
        # running-sum rounding stays below 1e-10 relative up to here
        raise ValueError("t_max above 1e7 risks accumulation error in the scan")
    if alpha_grid is None:
        alpha_grid = default_alpha_grid()
    domain = (
        f"alpha grid ({len(alpha_grid)} pts), t in [1, {t_max}], "
        f"b in {{{', '.join(str(b) for b in batch_sizes)}}}"
    )
    names = [
        "key-growth-inequality",
        "p-numerator-nonneg",
        "denominator-lower-bound",
        "p-range",
        "coupling-range",
        "c-bound",
    ]
    trackers = {name: _ClaimTracker(tol) for name in names}
    trackers["p-reformulation"] = _ClaimTracker(0.0)

    max_b = max(batch_sizes)
    for alpha in alpha_grid:
        for b in batch_sizes:
            params = compute_constants(
                ScheduleConfig(alpha=float(alpha), batch_size=b, n=max_b)
            )
            if xi_override is not None:
                params = replace(
                    params, xi=xi_override, alpha_tilde0=36.0 * xi_override
                )
            seq = alpha_sequence(t_max + 1, params)  # alpha_0 .. alpha_{t_max+1}
            a_prev = seq[:-2]
            a_t = seq[1:-1]
            a_next = seq[2:]
            den = denominator_sequence(seq[:-1], params)  # D_0 .. D_{t_max}

            def here(i, alpha=alpha, b=b):
                return f"(alpha={alpha:.6g}, b={b}, t={i + 1})"

            numer_core = a_prev ** 2 - a_t ** 2 + a_t
            lhs_key = params.xi * (a_next ** 2 - a_t ** 2)
            trackers["key-growth-inequality"].update(
                _normalized_gap(lhs_key, numer_core), here
            )
            trackers["p-numerator-nonneg"].update(
                _normalized_gap(np.zeros_like(numer_core), numer_core), here
            )
            xi_at2 = params.xi * a_t ** 2
            trackers["denominator-lower-bound"].update(
                np.minimum(
                    _normalized_gap(xi_at2, den[:-1]),
                    _normalized_gap(np.zeros_like(xi_at2), xi_at2),
                ),
                here,
            )
            p = (numer_core + xi_at2) / den[1:]
            trackers["p-range"].update(np.minimum(p, 1.0 - p), here)
            tau = 1.0 / a_t
            coupling = np.minimum.reduce(
                [tau, 1.0 - tau, 1.0 - params.xi - tau]
            )
            coupling = np.minimum(
                coupling, min(params.xi, 1.0 - params.xi)
            )
            trackers["coupling-range"].update(coupling, here)
            trackers["c-bound"].update(
                (C_MAX - params.c) / C_MAX,
                lambda i, alpha=alpha, b=b: f"(alpha={alpha:.6g}, b={b})",
            )
            # Shifted reformulation: same numerator over numer_core + D_{t-1}.
            p_alt = (numer_core + xi_at2) / (numer_core + den[:-1])
            trackers["p-reformulation"].update(
                EQ_TOL - np.abs(p - p_alt), here
            )

    return CertificateReport(
        claims=[t.result(name, domain) for name, t in trackers.items()]
    )


def scan_denominator_growth(
    alpha: float,
    t_max: int = 100_000,
    batch_size: int = 1,
    tol: float = INEQ_TOL,
) -> CertificateReport:
    """Certify D_t >= a_tilde * t^(alpha+1) for t >= 17.

    a_tilde is a_alpha/(2*alpha+2) for alpha < 1 and 1/16 at alpha = 1 (the
    two expressions coincide there).  The alpha = 0 branch is excluded: its
    denominator is affine in t and handled directly.  For t < 17 the minimum
    positive ratio D_t / t^(alpha+1) is reported as its own claim.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("growth scan needs alpha in (0, 1]; alpha = 0 is affine")
    if t_max < GROWTH_START:
        raise ValueError(f"t_max must be >= {GROWTH_START}")
    params = compute_constants(ScheduleConfig(alpha=alpha, batch_size=batch_size, n=batch_size))
    a_tilde = 1.0 / 16.0 if alpha == 1.0 else params.a_alpha / (2.0 * alpha + 2.0)
    seq = alpha_sequence(t_max, params)
    den = denominator_sequence(seq, params)
    t = np.arange(t_max + 1, dtype=np.float64)
    growth = a_tilde * t ** (alpha + 1.0)

    tail = _ClaimTracker(tol)
    tail.update(
        _normalized_gap(growth[GROWTH_START:], den[GROWTH_START:]),
        lambda i: f"(alpha={alpha:.6g}, t={i + GROWTH_START})",
    )
    head = _ClaimTracker(0.0)
    ratios = den[1:GROWTH_START] / t[1:GROWTH_START] ** (alpha + 1.0)
    head.update(ratios, lambda i: f"(alpha={alpha:.6g}, t={i + 1})")

    domain = f"alpha={alpha:.6g}, b={batch_size}, t in [17, {t_max}]"
    return CertificateReport(
        claims=[
            tail.result("denominator-growth", domain),
            head.result(
                "denominator-early-ratio", f"alpha={alpha:.6g}, t in [1, 16]"
            ),
        ]
    )


def exact_conditional_lyapunov_descent(
    state: KatyushaHState, problem, cap: int = 100_000
) -> tuple[float, float]:
    """Exact E[L_{t+1} | state] next to the current L_t.

    The expectation enumerates every size-b subset (each yields deterministic
    z and y updates) crossed with both checkpoint outcomes weighted by
    (p_t, 1 - p_t).  Descent means expected <= current.
    """
    ref = problem.reference
    if ref is None:
        raise ValueError("descent oracle requires a reference solution")
    n, b = problem.n, state.batch_size
    total = math.comb(n, b)
    if total > cap:
        raise EnumerationCapError(f"C({n},{b}) = {total} exceeds cap {cap}")

    cur = state.cursor
    params = state.params
    tau = tau_at(cur)
    xi = params.xi
    p = p_at(cur, params)
    eta = state.eta

    current = analysis.lyapunov(
        state.y, state.z, state.ckpt.w, cur, params, eta, problem
    )

    x_next = tau * state.z + xi * state.ckpt.w + (1.0 - xi - tau) * state.y
    diffs = problem.component_grad_matrix(x_next) - problem.component_grad_matrix(
        state.ckpt.w
    )
    step_len = cur.alpha_t * eta
    alpha_sq = cur.alpha_t ** 2
    d_t = denominator_at(cur, params)

    acc = 0.0
    for subset in combinations(range(n), b):
        g = diffs[list(subset)].mean(axis=0) + state.ckpt.full_grad
        z_next = prox(problem.reg, state.z - step_len * g, step_len)
        y_next = x_next + tau * (z_next - state.z)
        dz = z_next - ref.x_star
        acc += alpha_sq * (problem.value(y_next) - ref.f_star) + float(dz @ dz) / (
            2.0 * eta
        )
    gap_w = problem.value(state.ckpt.w) - ref.f_star
    gap_y = problem.value(state.y) - ref.f_star
    expected = acc / total + d_t * ((1.0 - p) * gap_w + p * gap_y)
    return expected, current


def verify_variance_bound(
    problem,
    points: list[tuple[np.ndarray, np.ndarray]],
    b_values: tuple[int, ...],
    cap: int = 100_000,
    tol: float = INEQ_TOL,
) -> CertificateReport:
    """Exact variance against its smoothness bound, plus the subset-sum law.

    For each (x, w, b): the enumerated estimator variance must not exceed
    (2L/b) times the Bregman divergence, and the enumeration mean of the
    subset gradient-difference sums must equal (b/n) times the full sum.
    """
    bound = _ClaimTracker(tol)
    identity = _ClaimTracker(0.0)
    n = problem.n
    for k, (x, w) in enumerate(points):
        ckpt = Checkpoint(
            w=np.asarray(w, float),
            full_grad=problem.full_grad(w),
            version=0,
        )
        diffs = problem.component_grad_matrix(x) - problem.component_grad_matrix(w)
        full_sum = diffs.sum(axis=0)
        for b in b_values:
            total = math.comb(n, b)
            if total > cap:
                raise EnumerationCapError(f"C({n},{b}) = {total} exceeds cap {cap}")
            var = exact_variance(x, ckpt, b, problem, cap=cap)
            rhs = variance_bound_rhs(x, w, problem, b)
            bound.update(
                _normalized_gap(np.array([var]), np.array([rhs])),
                lambda i, k=k, b=b: f"(point {k}, b={b})",
            )
            mean_sum = np.zeros(problem.d)
            for subset in combinations(range(n), b):
                mean_sum += diffs[list(subset)].sum(axis=0)
            mean_sum /= total
            target = (b / n) * full_sum
            scale = max(1.0, float(np.linalg.norm(target)))
            err = float(np.linalg.norm(mean_sum - target)) / scale
            identity.update(
                EQ_TOL - err, lambda i, k=k, b=b: f"(point {k}, b={b})"
            )
    domain = f"{len(points)} points, b in {{{', '.join(str(b) for b in b_values)}}}"
    return CertificateReport(
        claims=[
            bound.result("variance-bound", domain),
            identity.result("subset-sum-identity", domain),
        ]
    )
