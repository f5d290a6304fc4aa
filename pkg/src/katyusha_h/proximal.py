"""Regularizers and their proximal operators.

The regularizer set is deliberately closed (zero, l1, squared-l2, elastic
net) so that the verification oracles can check exact closed-form prox
solutions instead of trusting an inner solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_KINDS = ("zero", "l1", "squared_l2", "elastic_net")


@dataclass(frozen=True)
class Regularizer:
    """Nonsmooth part of the objective: lam1*||x||_1 + (lam2/2)*||x||^2."""

    kind: str
    lam1: float = 0.0  # l1 weight
    lam2: float = 0.0  # squared-l2 weight

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown regularizer kind {self.kind!r}")
        if self.lam1 < 0.0 or self.lam2 < 0.0:
            raise ValueError("regularizer weights must be nonnegative")
        if self.kind == "zero" and (self.lam1 != 0.0 or self.lam2 != 0.0):
            raise ValueError("zero regularizer takes no weights")
        if self.kind == "l1" and self.lam2 != 0.0:
            raise ValueError("l1 regularizer has no squared-l2 weight")
        if self.kind == "squared_l2" and self.lam1 != 0.0:
            raise ValueError("squared-l2 regularizer has no l1 weight")

    @classmethod
    def zero(cls) -> "Regularizer":
        return cls("zero")

    @classmethod
    def l1(cls, lam: float) -> "Regularizer":
        return cls("l1", lam1=lam)

    @classmethod
    def squared_l2(cls, lam: float) -> "Regularizer":
        return cls("squared_l2", lam2=lam)

    @classmethod
    def elastic_net(cls, lam1: float, lam2: float) -> "Regularizer":
        return cls("elastic_net", lam1=lam1, lam2=lam2)


def reg_value(reg: Regularizer, x: np.ndarray) -> float:
    """Value of the regularizer at x."""
    if reg.kind == "zero":
        return 0.0
    x = np.asarray(x, dtype=np.float64)
    val = 0.0
    if reg.lam1 != 0.0:
        val += reg.lam1 * float(np.sum(np.abs(x)))
    if reg.lam2 != 0.0:
        val += 0.5 * reg.lam2 * float(np.dot(x, x))
    return val


def soft_threshold(v: np.ndarray, threshold: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - threshold, 0.0)


def prox(reg: Regularizer, v: np.ndarray, step: float) -> np.ndarray:
    """Unique minimizer of (1/(2*step))*||z - v||^2 + reg(z).

    Elastic net composes exactly: soft-threshold at step*lam1, then scale by
    1/(1 + step*lam2).
    """
    if step <= 0.0:
        raise ValueError(f"prox step must be positive, got {step}")
    v = np.asarray(v, dtype=np.float64)
    if reg.kind == "zero":
        return v.copy()
    out = v
    if reg.lam1 != 0.0:
        out = soft_threshold(out, step * reg.lam1)
    if reg.lam2 != 0.0:
        out = out / (1.0 + step * reg.lam2)
    if out is v:
        out = v.copy()
    return out
