"""Loss functionals on residual vectors, and the mu-complexity certificate.

The estimators in this package target four losses of the residual
``r = Ax - b``: the ell_p norm, the median quasi-norm used to decode stable
sketches, the one-sided ReLU sum, and general hinge-like losses ``sum f(r_i)``
for an L-Lipschitz f that stays within a1 of ReLU and at least a2 above zero
on the right half-line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .numerics import RngStream


def lp_norm(y, p: float) -> float:
    """(sum |y_i|^p)^(1/p) for p >= 1."""
    if not p >= 1.0:
        raise ValueError(f"p must be >= 1, got {p}")
    y = np.asarray(y, dtype=np.float64)
    a = np.abs(y)
    if p == 1.0:
        return float(a.sum())
    if p == 2.0:
        return float(np.linalg.norm(a))
    return float((a**p).sum() ** (1.0 / p))


def median_norm(y) -> float:
    """Lower median of |y_i| (exact middle element for odd length)."""
    a = np.abs(np.asarray(y, dtype=np.float64)).ravel()
    if a.size == 0:
        raise ValueError("median_norm of an empty vector")
    j = (a.size - 1) // 2
    return float(np.partition(a, j)[j])


def relu_norm(y) -> float:
    """Sum of positive parts; equals (||y||_1 + sum y_i) / 2."""
    y = np.asarray(y, dtype=np.float64)
    return float(np.maximum(y, 0.0).sum())


@dataclass(frozen=True)
class HingeLikeLoss:
    """A scalar loss f applied coordinate-wise: f is L-Lipschitz,
    |f(x) - relu(x)| <= a1 everywhere, and f(x) >= a2 for x >= 0.

    Built-ins: ``logistic`` f(r) = log(1 + e^r) with (L, a1, a2) =
    (1, ln 2, ln 2); ``hinge`` f(r) = max(0, 1 + r) with (1, 1, 1);
    ``relu_reference`` is ReLU itself with the degenerate constants
    (1, 0, 0) and is only valid where an exact ReLU is wanted.
    """

    family: str
    L: float
    a1: float
    a2: float
    fn: Callable = None

    def __call__(self, r):
        return self.fn(np.asarray(r, dtype=np.float64))

    @property
    def hinge_constant(self) -> float:
        """C(f) = 16 * max(1, L, a1, 1/a2)^4, the constant in the lower
        bound sum f(r_i) >= (n + ||r||_1) / (C(f) * mu)."""
        if self.a2 <= 0:
            raise ValueError(f"{self.family} has a2 = {self.a2}; not hinge-like")
        return 16.0 * max(1.0, self.L, self.a1, 1.0 / self.a2) ** 4

    def validate(self, lo: float = -50.0, hi: float = 50.0, step: float = 1e-3) -> None:
        """Check the three defining inequalities on a grid; raises ValueError."""
        x = np.arange(lo, hi + step / 2, step)
        fx = self(x)
        relu = np.maximum(x, 0.0)
        slack = 1e-9
        gap = np.abs(fx - relu)
        if gap.max() > self.a1 + slack:
            i = int(np.argmax(gap))
            raise ValueError(
                f"|f - relu| = {gap[i]:.6g} > a1 = {self.a1} at x = {x[i]:.4f}"
            )
        right = fx[x >= 0.0]
        if right.size and right.min() < self.a2 - slack:
            raise ValueError(f"f(x) = {right.min():.6g} < a2 = {self.a2} for some x >= 0")
        dif = np.abs(np.diff(fx))
        lim = self.L * step * (1 + 1e-6) + slack
        if dif.max() > lim:
            raise ValueError(f"adjacent increment {dif.max():.6g} exceeds Lipschitz bound")

    @staticmethod
    def logistic() -> "HingeLikeLoss":
        ln2 = math.log(2.0)
        return HingeLikeLoss(
            family="logistic", L=1.0, a1=ln2, a2=ln2, fn=lambda r: np.logaddexp(0.0, r)
        )

    @staticmethod
    def hinge() -> "HingeLikeLoss":
        return HingeLikeLoss(
            family="hinge", L=1.0, a1=1.0, a2=1.0, fn=lambda r: np.maximum(0.0, 1.0 + r)
        )

    @staticmethod
    def relu_reference() -> "HingeLikeLoss":
        return HingeLikeLoss(
            family="relu_reference", L=1.0, a1=0.0, a2=0.0, fn=lambda r: np.maximum(0.0, r)
        )

    @staticmethod
    def tabulated(fn: Callable, L: float, a1: float, a2: float) -> "HingeLikeLoss":
        """Wrap a user-supplied vectorized f; the defining inequalities are
        verified on the standard grid at construction."""
        loss = HingeLikeLoss(family="tabulated", L=L, a1=a1, a2=a2, fn=fn)
        loss.validate()
        return loss


def f_norm(y, f: HingeLikeLoss) -> float:
    """sum_i f(y_i)."""
    return float(np.sum(f(y)))


@dataclass
class MuCertificate:
    """Two-sided evidence about mu(A) = sup_x ||(Ax)+||_1 / ||(Ax)-||_1.

    ``upper_bound`` is copied from the instance generator's construction
    certificate when one exists (None otherwise); ``empirical_lower`` is the
    best ratio found by randomized search, math.inf if a direction with a
    nonzero positive part and vanishing negative part was found.
    """

    empirical_lower: float
    upper_bound: Optional[float]
    witness: Optional[np.ndarray]
    search_trials: int


def _mu_ratio(A, x):
    y = A @ x
    pos = float(y[y > 0].sum())
    neg = float(-y[y < 0].sum())
    if pos == 0.0 and neg == 0.0:
        return 0.0
    if neg == 0.0:
        return math.inf
    return pos / neg


def certify_mu(inst, search_trials: int, rng: RngStream) -> MuCertificate:
    """Search for high-ratio directions of an instance's design matrix.

    Evaluates ``search_trials`` random unit directions (both signs), the
    column-sum direction, then refines the best by coordinate ascent.
    """
    if search_trials < 1:
        raise ValueError("search_trials must be >= 1")
    A = np.asarray(inst.A, dtype=np.float64)
    d = A.shape[1]
    g = rng.generator()

    best_x, best = None, -1.0
    cands = [A.sum(axis=0)]
    if not np.any(cands[0]):
        cands = []
    for _ in range(search_trials):
        cands.append(g.standard_normal(d))
    for x in cands:
        for s in (1.0, -1.0):
            r = _mu_ratio(A, s * x)
            if r > best:
                best, best_x = r, s * x
    if best_x is not None and math.isfinite(best):
        x = best_x / np.linalg.norm(best_x)
        for step in (0.5, 0.1, 0.02):
            for _sweep in range(2):
                for j in range(d):
                    for delta in (step, -step):
                        cand = x.copy()
                        cand[j] += delta
                        r = _mu_ratio(A, cand)
                        if r > best:
                            best, x = r, cand
                            if not math.isfinite(best):
                                break
        best_x = x
    upper = None
    if getattr(inst, "meta", None):
        upper = inst.meta.get("mu_upper")
    return MuCertificate(
        empirical_lower=best, upper_bound=upper, witness=best_x, search_trials=search_trials
    )
