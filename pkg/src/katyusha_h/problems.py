"""Finite-sum problem construction: oracles, datasets, generators, references.

A problem is an average of n smooth convex components plus a regularizer.
Components are stored row-wise (one feature row per component), which keeps
single-component, mini-batch, and full-gradient oracles as plain slices of
the same arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .proximal import Regularizer, reg_value

LOSSES = ("least_squares", "logistic")


class DataFormatError(ValueError):
    """Malformed dataset text; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass
class SparseDataset:
    """Sparse rows of (1-based index, value) pairs with one label per row.

    Indices are strictly increasing within a row; ``d`` is the feature
    dimension (at least the largest index that appears).
    """

    rows: list[list[tuple[int, float]]]
    labels: np.ndarray
    d: int

    def __post_init__(self) -> None:
        self.labels = np.asarray(self.labels, dtype=np.float64)
        if len(self.rows) != self.labels.shape[0]:
            raise ValueError("row/label count mismatch")
        for row in self.rows:
            prev = 0
            for idx, _ in row:
                if idx <= prev:
                    raise ValueError("feature indices must be strictly increasing")
                prev = idx
            if prev > self.d:
                raise ValueError(f"feature index {prev} exceeds dimension {self.d}")

    @property
    def n(self) -> int:
        return len(self.rows)

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.n, self.d))
        for i, row in enumerate(self.rows):
            for idx, val in row:
                dense[i, idx - 1] = val
        return dense


def parse_libsvm(text: str) -> SparseDataset:
    """Parse 'label idx:val idx:val ...' lines (1-based, increasing indices).

    Blank lines are skipped.  Malformed tokens and non-increasing indices
    raise DataFormatError with the offending line number.
    """
    rows: list[list[tuple[int, float]]] = []
    labels: list[float] = []
    d = 0
    for line_no, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        try:
            label = float(tokens[0])
        except ValueError:
            raise DataFormatError(line_no, f"bad label {tokens[0]!r}") from None
        row: list[tuple[int, float]] = []
        prev = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise DataFormatError(line_no, f"missing ':' in token {tok!r}")
            try:
                idx = int(idx_s)
            except ValueError:
                raise DataFormatError(line_no, f"bad feature index {idx_s!r}") from None
            if idx < 1:
                raise DataFormatError(line_no, f"feature index {idx} must be >= 1")
            if idx <= prev:
                raise DataFormatError(
                    line_no, f"feature index {idx} not increasing (previous {prev})"
                )
            try:
                val = float(val_s)
            except ValueError:
                raise DataFormatError(line_no, f"bad feature value {val_s!r}") from None
            row.append((idx, val))
            prev = idx
        rows.append(row)
        labels.append(label)
        d = max(d, prev)
    return SparseDataset(rows=rows, labels=np.asarray(labels), d=d)


def serialize_libsvm(dataset: SparseDataset) -> str:
    """Canonical text form; floats use the shortest round-trip representation."""
    lines = []
    for row, label in zip(dataset.rows, dataset.labels):
        parts = [repr(float(label))]
        parts.extend(f"{idx}:{repr(float(val))}" for idx, val in row)
        lines.append(" ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")


@dataclass(frozen=True)
class ReferenceSolution:
    """Stored optimum: point, objective value, and the accuracy of that value."""

    x_star: np.ndarray
    f_star: float
    gap_tolerance: float


@dataclass
class FiniteSumProblem:
    """Average of n smooth convex components plus a regularizer.

    ``loss`` selects the component family:
      least_squares: f_i(x) = (a_i'x - y_i)^2 / 2
      logistic:      f_i(x) = log(1 + exp(-y_i a_i'x)),  y_i in {-1, +1}
    ``L`` is the analytic worst-case row smoothness bound (users may override
    with any valid upper bound).
    """

    A: np.ndarray
    targets: np.ndarray
    loss: str
    L: float
    reg: Regularizer = field(default_factory=Regularizer.zero)
    reference: ReferenceSolution | None = None

    def __post_init__(self) -> None:
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}")
        self.A = np.asarray(self.A, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.A.ndim != 2 or self.A.shape[0] != self.targets.shape[0]:
            raise ValueError("feature/target shape mismatch")
        if self.A.shape[0] < 1:
            raise ValueError("empty dataset")
        if self.L <= 0.0:
            raise ValueError("smoothness bound must be positive")
        if self.loss == "logistic" and not np.all(np.abs(self.targets) == 1.0):
            raise ValueError("logistic loss requires labels in {-1, +1}")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.A.shape[1]

    # -- component oracles -----------------------------------------------

    def _residual(self, idx, x: np.ndarray) -> np.ndarray:
        """Loss-specific scalar residual per selected component."""
        margins = self.A[idx] @ x
        if self.loss == "least_squares":
            return margins - self.targets[idx]
        # d/dm log(1+exp(-y m)) = -y * sigmoid(-y m)
        y = self.targets[idx]
        return -y * expit(-y * margins)

    def component_value(self, i: int, x: np.ndarray) -> float:
        m = float(self.A[i] @ x)
        if self.loss == "least_squares":
            return 0.5 * (m - self.targets[i]) ** 2
        return float(np.logaddexp(0.0, -self.targets[i] * m))

    def component_grad(self, i: int, x: np.ndarray) -> np.ndarray:
        return self.A[i] * self._residual(i, x)

    def component_grad_matrix(self, x: np.ndarray, idx=None) -> np.ndarray:
        """Per-component gradients as rows; all components when idx is None."""
        if idx is None:
            idx = slice(None)
        return self.A[idx] * self._residual(idx, x)[:, None]

    def grad_sum(self, idx: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Sum (not mean) of component gradients over idx."""
        return self.A[idx].T @ self._residual(idx, x)

    # -- full oracles ------------------------------------------------------

    def smooth_value(self, x: np.ndarray) -> float:
        """f(x), the average of the component values."""
        margins = self.A @ x
        if self.loss == "least_squares":
            r = margins - self.targets
            return 0.5 * float(r @ r) / self.n
        return float(np.sum(np.logaddexp(0.0, -self.targets * margins))) / self.n

    def full_grad(self, x: np.ndarray) -> np.ndarray:
        return self.grad_sum(slice(None), x) / self.n

    def value(self, x: np.ndarray) -> float:
        """Composite objective F(x) = f(x) + reg(x)."""
        return self.smooth_value(x) + reg_value(self.reg, x)

    def gap(self, x: np.ndarray) -> float:
        if self.reference is None:
            raise ValueError("problem has no reference solution")
        return self.value(x) - self.reference.f_star


def _row_norms_sq(A: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", A, A)


def make_least_squares(
    dataset: SparseDataset, reg: Regularizer | None = None
) -> FiniteSumProblem:
    """Least-squares components; L = max_i ||a_i||^2."""
    if dataset.n < 1:
        raise ValueError("empty dataset")
    A = dataset.to_dense()
    L = float(np.max(_row_norms_sq(A)))
    if L <= 0.0:
        raise ValueError("dataset has no nonzero feature row")
    return FiniteSumProblem(
        A=A, targets=dataset.labels, loss="least_squares", L=L,
        reg=reg if reg is not None else Regularizer.zero(),
    )


def make_logistic(
    dataset: SparseDataset, reg: Regularizer | None = None
) -> FiniteSumProblem:
    """Logistic components with +-1 labels; L = max_i ||a_i||^2 / 4."""
    if dataset.n < 1:
        raise ValueError("empty dataset")
    A = dataset.to_dense()
    L = float(np.max(_row_norms_sq(A))) / 4.0
    if L <= 0.0:
        raise ValueError("dataset has no nonzero feature row")
    return FiniteSumProblem(
        A=A, targets=dataset.labels, loss="logistic", L=L,
        reg=reg if reg is not None else Regularizer.zero(),
    )


def dataset_from_dense(A: np.ndarray, labels: np.ndarray) -> SparseDataset:
    """Sparse dataset from a dense matrix; exact zeros are dropped."""
    A = np.asarray(A, dtype=np.float64)
    rows = [
        [(j + 1, float(v)) for j, v in enumerate(row) if v != 0.0] for row in A
    ]
    return SparseDataset(rows=rows, labels=np.asarray(labels), d=A.shape[1])


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based 64-bit generator (Philox) so streams are reproducible
    across platforms given the same seed."""
    return np.random.Generator(np.random.Philox(key=seed))


def synthesize(
    n: int,
    d: int,
    family: str = "least_squares",
    seed: int = 0,
    *,
    reg: Regularizer | None = None,
    condition: float = 1.0,
    noise: float = 0.1,
    density: float = 1.0,
    consistent: bool = False,
) -> tuple[SparseDataset, FiniteSumProblem]:
    """Deterministic synthetic instance.

    ``condition`` scales feature columns geometrically from 1 down to
    1/sqrt(condition), spreading the component-Hessian spectrum by roughly
    that factor.  ``consistent=True`` sets targets to exact component fits
    (zero noise), which pins the least-squares optimum value at 0 under the
    zero regularizer.
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    if family not in LOSSES:
        raise ValueError(f"unknown family {family!r}")
    if not 0.0 < density <= 1.0:
        raise ValueError("density must be in (0, 1]")
    if condition < 1.0:
        raise ValueError("condition must be >= 1")
    rng = make_rng(seed)
    A = rng.standard_normal((n, d))
    if condition > 1.0:
        scales = np.geomspace(1.0, 1.0 / np.sqrt(condition), d)
        A *= scales
    if density < 1.0:
        keep = rng.random((n, d)) < density
        A *= keep
    x_true = rng.standard_normal(d) / np.sqrt(d)
    clean = A @ x_true
    if family == "least_squares":
        targets = clean if consistent else clean + noise * rng.standard_normal(n)
    else:
        scores = clean if consistent else clean + noise * rng.standard_normal(n)
        targets = np.where(scores >= 0.0, 1.0, -1.0)
    dataset = dataset_from_dense(A, targets)
    maker = make_least_squares if family == "least_squares" else make_logistic
    return dataset, maker(dataset, reg=reg)


def solve_reference(
    problem: FiniteSumProblem,
    tol: float = 1e-12,
    max_iterations: int = 200_000,
) -> ReferenceSolution:
    """High-precision optimum via the deterministic accelerated baseline.

    Runs restarted full-gradient FISTA until the composite gradient-mapping
    certificate drives the gap estimate below ``tol``; keeps the best
    objective seen.  If the iteration cap is hit first, the achieved
    estimate is reported in ``gap_tolerance`` rather than raising.
    """
    from .optimizers import fista_solve

    if tol <= 0.0:
        raise ValueError("tol must be positive")
    x_best, f_best, gap_est, _ = fista_solve(
        problem, tol=tol, max_iterations=max_iterations, restart=True
    )
    return ReferenceSolution(
        x_star=x_best, f_star=f_best, gap_tolerance=max(gap_est, tol)
    )


def with_reference(
    problem: FiniteSumProblem, tol: float = 1e-12, max_iterations: int = 200_000
) -> FiniteSumProblem:
    """Attach a freshly solved reference to the problem (in place) and return it."""
    problem.reference = solve_reference(problem, tol=tol, max_iterations=max_iterations)
    return problem
