"""Sparse regression solvers: exact brute force, sketched, and LASSO.

The brute-force solvers enumerate all supports of size k (lexicographic
order, guarded by a combination-count limit) and solve each restricted
problem exactly; they are the ground truth the sketched paths are judged
against.  ``sketched_sparse_min`` runs the same enumeration against a
sketched instance, scoring supports with one of the sketch estimators.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lstsq as _scipy_lstsq

from .losses import lp_norm

SUPPORT_GUARD = 1_000_000


class ProblemTooLarge(ValueError):
    """Raised when a support enumeration would exceed the guard."""


@dataclass(frozen=True)
class SparseVector:
    """A k-sparse vector: strictly increasing support, no explicit zeros."""

    dim: int
    support: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.support, dtype=np.int64)
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "values", v)
        if s.shape != v.shape or s.ndim != 1:
            raise ValueError("support and values must be 1-d arrays of equal length")
        if s.size:
            if s[0] < 0 or s[-1] >= self.dim:
                raise ValueError("support indices out of range")
            if np.any(np.diff(s) <= 0):
                raise ValueError("support must be strictly increasing")
        if np.any(v == 0.0):
            raise ValueError("explicit zeros are not stored")

    @staticmethod
    def make(dim, support, values) -> "SparseVector":
        """Sort by index and drop zero values."""
        s = np.asarray(support, dtype=np.int64)
        v = np.asarray(values, dtype=np.float64)
        order = np.argsort(s, kind="stable")
        s, v = s[order], v[order]
        keep = v != 0.0
        return SparseVector(dim=int(dim), support=s[keep], values=v[keep])

    @staticmethod
    def from_dense(vec) -> "SparseVector":
        vec = np.asarray(vec, dtype=np.float64)
        (nz,) = np.nonzero(vec)
        return SparseVector(dim=vec.size, support=nz, values=vec[nz])

    @property
    def nnz(self) -> int:
        return int(self.support.size)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.support] = self.values
        return out


@dataclass
class SolveResult:
    x: SparseVector
    cost: float
    supports_explored: int = 0
    iterations: int = 0
    converged: bool = True


class _SupportVec:
    """Internal duck-type of SparseVector allowing explicit zeros (used
    while searching within a fixed support)."""

    __slots__ = ("dim", "support", "values")

    def __init__(self, dim, support, values):
        self.dim = dim
        self.support = support
        self.values = values

    @property
    def nnz(self):
        return self.support.size


def _check_k(d: int, k: int):
    if not 1 <= k <= d:
        raise ValueError(f"k must satisfy 1 <= k <= d, got k={k}, d={d}")
    if math.comb(d, k) > SUPPORT_GUARD:
        raise ProblemTooLarge(
            f"C({d},{k}) = {math.comb(d, k)} supports exceeds the guard {SUPPORT_GUARD}"
        )


def _ls(M, v):
    """Least squares by column-pivoted QR (rank-deficiency safe)."""
    x, _, _, _ = _scipy_lstsq(M, v, lapack_driver="gelsy", check_finite=False)
    return x


def brute_force_sparse_l2(A, b, k: int) -> SolveResult:
    """argmin over ||x||_0 <= k of ||Ax - b||_2 by support enumeration.

    Ties in cost go to the lexicographically smallest support.
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    d = A.shape[1]
    _check_k(d, k)
    best_cost = math.inf
    best = (None, None)
    count = 0
    for supp in itertools.combinations(range(d), k):
        count += 1
        cols = A[:, supp]
        x = _ls(cols, b)
        cost = float(np.linalg.norm(cols @ x - b))
        if cost < best_cost:
            best_cost = cost
            best = (np.array(supp, dtype=np.int64), x)
    xv = SparseVector.make(d, best[0], best[1])
    return SolveResult(x=xv, cost=best_cost, supports_explored=count)


def _irls_lp(cols, b, p, floor=1e-8, tol=1e-9, max_iter=500):
    x = _ls(cols, b)
    obj = lp_norm(cols @ x - b, p)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        r = cols @ x - b
        w = np.maximum(np.abs(r), floor) ** ((p - 2.0) / 2.0)
        x_new = _ls(w[:, None] * cols, w * b)
        obj_new = lp_norm(cols @ x_new - b, p)
        if obj_new <= obj:
            x = x_new
        rel = abs(obj - obj_new) / max(obj, 1e-300)
        obj = min(obj, obj_new)
        if rel < tol:
            converged = True
            break
    return x, obj, it, converged


def brute_force_sparse_lp(A, b, k: int, p: float) -> SolveResult:
    """argmin over ||x||_0 <= k of ||Ax - b||_p (p in [1, 2]) by support
    enumeration with IRLS on each support (smoothing floor 1e-8, relative
    objective change below 1e-9 or 500 iterations)."""
    if not (1.0 <= p <= 2.0):
        raise ValueError(f"p must lie in [1, 2], got {p}")
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    d = A.shape[1]
    _check_k(d, k)
    best_cost = math.inf
    best = (None, None, 0, True)
    count = 0
    for supp in itertools.combinations(range(d), k):
        count += 1
        cols = A[:, supp]
        x, obj, it, conv = _irls_lp(cols, b, p)
        if obj < best_cost:
            best_cost = obj
            best = (np.array(supp, dtype=np.int64), x, it, conv)
    xv = SparseVector.make(d, best[0], best[1])
    return SolveResult(
        x=xv, cost=best_cost, supports_explored=count, iterations=best[2], converged=best[3]
    )


def _pattern_search(fun, x0, iters=200, shrink=0.5):
    x = np.asarray(x0, dtype=np.float64).copy()
    f = fun(x)
    step = 1.0 + (np.max(np.abs(x)) if x.size else 0.0)
    for _ in range(iters):
        improved = False
        for j in range(x.size):
            for s in (step, -step):
                cand = x.copy()
                cand[j] += s
                fc = fun(cand)
                if fc < f:
                    x, f = cand, fc
                    improved = True
        if not improved:
            step *= shrink
    return x, f


def sketched_sparse_min(si, estimator: str, k: int, f=None) -> SolveResult:
    """Minimize a sketch estimator over all supports of size k.

    ``estimator`` selects the objective: "l2" (closed form per support),
    or "med" / "relu" / "hinge" (pattern search started from the
    sketched-l2 solution on that support; 200 iterations, step shrink 0.5).
    ``f`` is the HingeLikeLoss required when estimator="hinge".
    Returns the argmin with ``cost`` equal to the estimator value.
    """
    from . import estimators as est_mod

    funcs = {
        "l2": est_mod.estimate_l2,
        "med": est_mod.estimate_med,
        "relu": est_mod.estimate_relu,
        "hinge": est_mod.estimate_hinge,
    }
    if estimator not in funcs:
        raise ValueError(f"unknown estimator {estimator!r}")
    if estimator == "hinge" and f is None:
        raise ValueError("estimator='hinge' requires a HingeLikeLoss f")
    d = si.SA.shape[1]
    _check_k(d, k)

    def score(xvec):
        if estimator == "hinge":
            return est_mod.estimate_hinge(si, xvec, f)
        return funcs[estimator](si, xvec)

    best_cost = math.inf
    best = (None, None)
    count = 0
    for supp in itertools.combinations(range(d), k):
        count += 1
        sa = np.asarray(supp, dtype=np.int64)
        cols = si.SA[:, sa]
        x0 = _ls(cols, si.Sb)
        if estimator == "l2":
            x, cost = x0, float(np.linalg.norm(cols @ x0 - si.Sb))
        else:
            x, cost = _pattern_search(lambda v: score(_SupportVec(d, sa, v)), x0)
        if cost < best_cost:
            best_cost = cost
            best = (sa, x)
    xv = SparseVector.make(d, best[0], best[1])
    return SolveResult(x=xv, cost=best_cost, supports_explored=count)


def _soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _spectral_norm_sq(A, iters=20):
    d = A.shape[1]
    v = np.ones(d) / math.sqrt(d)
    if not np.any(A @ v):
        v = np.random.default_rng(12345).standard_normal(d)
        v /= np.linalg.norm(v)
    for _ in range(iters):
        w = A.T @ (A @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
    return float(np.linalg.norm(A @ v) ** 2)


def _lasso_objective(A, b, lam, x):
    r = A @ x - b
    return float(r @ r + lam * np.abs(x).sum())


def _lasso_core(A, b, lam, tol, max_iter):
    # Monotone accelerated proximal gradient with a fixed step of
    # 1/(2 * sigma^2) halved for safety, sigma^2 from 20 power iterations.
    sigma2 = max(_spectral_norm_sq(A), 1e-30)
    step = 1.0 / (4.0 * sigma2)
    d = A.shape[1]
    x = np.zeros(d)
    y = x.copy()
    x_prev = x.copy()
    fx = _lasso_objective(A, b, lam, x)
    t_mom = 1.0
    streak = 0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        grad = 2.0 * (A.T @ (A @ y - b))
        z = _soft_threshold(y - step * grad, step * lam)
        fz = _lasso_objective(A, b, lam, z)
        if fz <= fx:
            x_new, f_new = z, fz
        else:
            x_new, f_new = x, fx  # monotone safeguard
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_mom * t_mom))
        y = x_new + (t_mom / t_new) * (z - x_new) + ((t_mom - 1.0) / t_new) * (x_new - x_prev)
        rel = (fx - f_new) / max(fx, 1e-300)
        streak = streak + 1 if rel < tol else 0
        x_prev, x, fx, t_mom = x, x_new, f_new, t_new
        if streak >= 10:
            converged = True
            break
    return x, it, converged


def _warn_norms(A, b):
    sig = math.sqrt(_spectral_norm_sq(A))
    if sig > 1.0 + 1e-6:
        warnings.warn(f"||A||_2 ~ {sig:.4f} exceeds 1; guarantee assumes ||A||_2 <= 1")
    nb = float(np.linalg.norm(b))
    if nb > 1.0 + 1e-6:
        warnings.warn(f"||b||_2 = {nb:.4f} exceeds 1; guarantee assumes ||b||_2 <= 1")


def lasso_solve(A, b, lam: float, tol: float = 1e-10, max_iter: int = 20000) -> SolveResult:
    """Minimize ||Ax - b||_2^2 + lam * ||x||_1.

    ``lam`` must lie in (0, 1); the guarantee regime ||A||_2 <= 1,
    ||b||_2 <= 1 is the caller's job (a warning is issued otherwise).
    Entries with |x_i| <= 1e-12 are pruned from the solution.
    """
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lam must lie in (0, 1), got {lam}")
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _warn_norms(A, b)
    x, it, converged = _lasso_core(A, b, lam, tol, max_iter)
    x[np.abs(x) <= 1e-12] = 0.0
    xv = SparseVector.from_dense(x)
    return SolveResult(
        x=xv,
        cost=_lasso_objective(A, b, lam, xv.to_dense()),
        iterations=it,
        converged=converged,
    )


def lasso_sketched_solve(S, A, b, lam: float, tol: float = 1e-10, max_iter: int = 20000) -> SolveResult:
    """LASSO on the sketched instance (SA, Sb).

    ``S`` must be a Gaussian sketch with variance 1/m (or the identity test
    sketch).  The reported cost is re-evaluated on the original (A, b).
    """
    if S.kind not in ("gaussian", "identity"):
        raise ValueError(f"sketched LASSO requires a gaussian sketch, got {S.kind!r}")
    if S.kind == "gaussian" and abs(S.variance * S.m - 1.0) > 1e-9:
        raise ValueError("sketched LASSO requires variance 1/m")
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lam must lie in (0, 1), got {lam}")
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _warn_norms(A, b)
    SA = S.apply_matrix(A)
    Sb = S.apply(b)
    x, it, converged = _lasso_core(SA, Sb, lam, tol, max_iter)
    x[np.abs(x) <= 1e-12] = 0.0
    xv = SparseVector.from_dense(x)
    return SolveResult(
        x=xv,
        cost=_lasso_objective(A, b, lam, xv.to_dense()),
        iterations=it,
        converged=converged,
    )
