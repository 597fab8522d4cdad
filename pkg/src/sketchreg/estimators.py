"""Estimators that read sketched instances.

A :class:`SketchedInstance` bundles a sketch with the images ``SA`` and
``Sb``.  Every ``estimate_*`` function touches exactly the ``k`` support
columns of ``SA`` (one fancy-index per call), which is what makes the
sketched evaluations cheap for k-sparse arguments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .losses import HingeLikeLoss, median_norm
from .sketches import CountSketchState


@dataclass(eq=False)
class SketchedInstance:
    """A sketch together with SA (m x d) and Sb (length m)."""

    sketch: object
    SA: np.ndarray
    Sb: np.ndarray

    def segment(self, name):
        return self.sketch.segments[name]


def make_sketched_instance(sketch, A, b) -> SketchedInstance:
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return SketchedInstance(sketch=sketch, SA=sketch.apply_matrix(A), Sb=sketch.apply(b))


def _sketched_residual(si, x):
    # One column gather: the k-sparse access contract.
    if x.support.size:
        return si.SA[:, x.support] @ x.values - si.Sb
    return -si.Sb


def estimate_l2(si: SketchedInstance, x) -> float:
    """||S(Ax - b)||_2 for a Gaussian (or identity test) sketch."""
    if si.sketch.kind not in ("gaussian", "identity"):
        raise ValueError(f"estimate_l2 needs a gaussian sketch, got {si.sketch.kind!r}")
    return float(np.linalg.norm(_sketched_residual(si, x)))


def estimate_med(si: SketchedInstance, x) -> float:
    """Median decode of a stable sketch: median |S(Ax - b)| estimates
    ||Ax - b||_p at the calibrated scale."""
    if si.sketch.kind != "stable":
        raise ValueError(f"estimate_med needs a stable sketch, got {si.sketch.kind!r}")
    return median_norm(_sketched_residual(si, x))


def _l1_segment(si, r):
    """l1-norm estimate from the med segment of a composite residual."""
    lo, hi = si.segment("med")
    seg = r[lo:hi]
    child = si.sketch.child("med")
    if child.kind == "stable":
        return median_norm(seg)
    if child.kind == "identity":
        return float(np.abs(seg).sum())
    raise ValueError(f"unsupported med segment kind {child.kind!r}")


def estimate_relu(si: SketchedInstance, x) -> float:
    """Estimate sum of positive residual parts via the identity
    relu(r) = (||r||_1 + sum r) / 2, with ||r||_1 read off the med segment
    and sum r read off the ones row."""
    if si.sketch.kind != "composite" or "ones" not in si.sketch.segments:
        raise ValueError("estimate_relu needs a composite sketch with med and ones segments")
    r = _sketched_residual(si, x)
    lo, _ = si.segment("ones")
    return 0.5 * (_l1_segment(si, r) + r[lo])


def estimate_hinge(si: SketchedInstance, x, f: HingeLikeLoss) -> float:
    """ReLU estimate plus the sampled correction (n/m2) * sum (f - relu)
    over the sampled residual coordinates.

    With ``f = relu_reference`` the correction is identically zero and the
    value equals ``estimate_relu`` on the shared segments.
    """
    if si.sketch.kind != "composite" or "rows" not in si.sketch.segments:
        raise ValueError("estimate_hinge needs a composite sketch with a rows segment")
    r = _sketched_residual(si, x)
    lo_o, _ = si.segment("ones")
    relu_est = 0.5 * (_l1_segment(si, r) + r[lo_o])
    lo, hi = si.segment("rows")
    samples = r[lo:hi]
    m2 = hi - lo
    n = si.sketch.n
    correction = (n / m2) * float(np.sum(f(samples) - np.maximum(samples, 0.0)))
    return correction + relu_est


def _top_by_magnitude(est, count):
    # Descending |est|, ties to the lower index (stable sort).
    order = np.argsort(-np.abs(est), kind="stable")
    return order[:count]


def sparse_recover(out1, cs1: CountSketchState, out2, cs2: CountSketchState, k: int, eps: float):
    """Two-stage k-sparse recovery from a pair of CountSketch outputs.

    Stage 1 point-queries every index of ``cs1`` and keeps the ``cs1.n_buckets``
    largest estimates (ties to the lower index) as the candidate set; stage 2
    re-queries the candidates against the finer ``cs2`` and returns the top k
    by magnitude with their stage-2 values.
    """
    from .solvers import SparseVector

    if cs1.n != cs2.n:
        raise ValueError(f"stage dimensions disagree: {cs1.n} vs {cs2.n}")
    d = cs1.n
    if not 1 <= k <= d:
        raise ValueError(f"k must satisfy 1 <= k <= d, got k={k}, d={d}")
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    est1 = cs1.decode_all(out1)
    candidates = np.sort(_top_by_magnitude(est1, cs1.n_buckets))

    tables2 = np.asarray(out2, dtype=np.float64).reshape(cs2.n_tables, cs2.n_buckets)
    vals = cs2.signs[:, candidates] * np.take_along_axis(
        tables2, cs2.buckets[:, candidates], axis=1
    )
    vals = np.sort(vals, axis=0)
    est2 = vals[(cs2.n_tables - 1) // 2]

    top = _top_by_magnitude(est2, k)
    support = candidates[top]
    values = est2[top]
    return SparseVector.make(d, support, values)
