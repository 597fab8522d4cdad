"""Oblivious linear sketching transforms.

Every sketch here is a linear map ``R^n -> R^m`` drawn independently of the
data it will be applied to.  Dense kinds (Gaussian, p-stable) carry their
matrix; CountSketch carries hash coefficients; the composite kinds used by
the ReLU and hinge estimators concatenate named segments.  All kinds share
``apply`` (vector in, vector out), ``apply_matrix`` (column-wise), and a
versioned JSON form in which dense payloads are *regenerated from the seed*
rather than stored.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .numerics import RngStream, StableParams, calibrate_stable_scale

SKETCH_FORMAT = "sketchreg.sketch"
SKETCH_VERSION = 1


def _is_prime(q: int) -> bool:
    if q < 2:
        return False
    if q < 4:
        return True
    if q % 2 == 0 or q % 3 == 0:
        return False
    f = 5
    while f * f <= q:
        if q % f == 0 or q % (f + 2) == 0:
            return False
        f += 6
    return True


def next_prime(n: int) -> int:
    """Smallest prime >= n."""
    q = max(n, 2)
    while not _is_prime(q):
        q += 1
    return q


def _check_input(y, n):
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (n,):
        raise ValueError(f"expected input of shape ({n},), got {y.shape}")
    return y


@dataclass(eq=False)
class GaussianSketch:
    """Dense i.i.d. N(0, variance) sketch; variance defaults to 1/m."""

    m: int
    n: int
    variance: float
    rng: RngStream
    matrix: np.ndarray

    kind = "gaussian"

    def apply(self, y):
        return self.matrix @ _check_input(y, self.n)

    def apply_matrix(self, A):
        return self.matrix @ np.asarray(A, dtype=np.float64)


@dataclass(eq=False)
class StableSketch:
    """Dense sketch of i.i.d. symmetric p-stable entries at calibrated scale."""

    m: int
    n: int
    params: StableParams
    rng: RngStream
    matrix: np.ndarray

    kind = "stable"

    def apply(self, y):
        return self.matrix @ _check_input(y, self.n)

    def apply_matrix(self, A):
        return self.matrix @ np.asarray(A, dtype=np.float64)


@dataclass(eq=False)
class IdentitySketch:
    """Test-mode sketch: the identity map on R^n."""

    n: int

    kind = "identity"

    @property
    def m(self):
        return self.n

    def apply(self, y):
        return _check_input(y, self.n).copy()

    def apply_matrix(self, A):
        return np.array(A, dtype=np.float64)


@dataclass(eq=False)
class OnesRowSketch:
    """The single row of all ones: apply(y) = [sum(y)]."""

    n: int

    kind = "ones_row"
    m = 1

    def apply(self, y):
        return np.array([_check_input(y, self.n).sum()])

    def apply_matrix(self, A):
        return np.asarray(A, dtype=np.float64).sum(axis=0, keepdims=True)


@dataclass(eq=False)
class RowSampler:
    """Unscaled uniform row sample (with replacement): apply(y) = y[indices].

    Any estimator built on top supplies its own n/m scaling.
    """

    m: int
    n: int
    indices: np.ndarray
    rng: RngStream | None = None
    identity: bool = False

    kind = "row_sampler"

    def apply(self, y):
        return _check_input(y, self.n)[self.indices]

    def apply_matrix(self, A):
        return np.asarray(A, dtype=np.float64)[self.indices]


@dataclass(eq=False)
class CountSketchState:
    """CountSketch with t independent tables of b buckets each.

    Bucket and sign hashes are degree-1 polynomials over the field of size
    ``prime`` (smallest prime >= n): bucket ``((a*x + c) mod prime) mod b``
    with ``a != 0``, sign ``+1`` iff ``(a*x + c) mod prime`` is even.  The
    flat sketch output has length ``b * t`` (tables concatenated).
    """

    n: int
    n_buckets: int
    n_tables: int
    prime: int
    bucket_coeffs: np.ndarray  # (t, 2), rows (a, c) with a != 0
    sign_coeffs: np.ndarray  # (t, 2)
    buckets: np.ndarray = field(repr=False, default=None)  # (t, n) derived
    signs: np.ndarray = field(repr=False, default=None)  # (t, n) derived

    kind = "countsketch"

    def __post_init__(self):
        if self.buckets is None:
            idx = np.arange(self.n, dtype=np.int64)
            a = self.bucket_coeffs[:, :1]
            c = self.bucket_coeffs[:, 1:]
            self.buckets = ((a * idx[None, :] + c) % self.prime) % self.n_buckets
            sa = self.sign_coeffs[:, :1]
            sc = self.sign_coeffs[:, 1:]
            parity = ((sa * idx[None, :] + sc) % self.prime) % 2
            self.signs = np.where(parity == 0, 1.0, -1.0)

    @property
    def m(self):
        return self.n_buckets * self.n_tables

    def apply(self, y):
        y = _check_input(y, self.n)
        out = _kernels.countsketch_apply(y, self.buckets, self.signs, self.n_buckets)
        return out.ravel()

    def apply_matrix(self, A):
        A = np.asarray(A, dtype=np.float64)
        return np.stack([self.apply(A[:, j]) for j in range(A.shape[1])], axis=1)

    def decode_all(self, output):
        """Point-query every index at once; same decoding as point_query."""
        tables = np.asarray(output, dtype=np.float64).reshape(self.n_tables, self.n_buckets)
        return _kernels.countsketch_decode(tables, self.buckets, self.signs)


def point_query(cs: CountSketchState, output, i: int) -> float:
    """Estimate coordinate ``i`` of the sketched vector.

    Returns the lower median over tables of ``sign_tau(i) * out[tau, h_tau(i)]``.
    """
    if not 0 <= i < cs.n:
        raise ValueError(f"index {i} out of range for dimension {cs.n}")
    tables = np.asarray(output, dtype=np.float64).reshape(cs.n_tables, cs.n_buckets)
    vals = cs.signs[:, i] * tables[np.arange(cs.n_tables), cs.buckets[:, i]]
    vals.sort()
    return float(vals[(cs.n_tables - 1) // 2])


@dataclass(eq=False)
class CompositeSketch:
    """Stacked named segments, applied as one linear map.

    ``segments`` maps a segment name to its (start, stop) slice of the
    output.  The ReLU sketch is [med | ones]; the hinge sketch is
    [med | ones | rows].
    """

    n: int
    children: list  # list of (name, sketch)
    flavor: str  # "relu" | "hinge"

    kind = "composite"

    @property
    def m(self):
        return sum(child.m for _, child in self.children)

    @property
    def segments(self):
        out = {}
        start = 0
        for name, child in self.children:
            out[name] = (start, start + child.m)
            start += child.m
        return out

    def child(self, name):
        for cname, c in self.children:
            if cname == name:
                return c
        raise KeyError(name)

    def apply(self, y):
        y = _check_input(y, self.n)
        return np.concatenate([child.apply(y) for _, child in self.children])

    def apply_matrix(self, A):
        A = np.asarray(A, dtype=np.float64)
        return np.vstack([child.apply_matrix(A) for _, child in self.children])


def apply(sketch, y):
    """Apply a sketch to a length-n vector, returning the length-m image."""
    return sketch.apply(y)


def build_gaussian_sketch(m: int, n: int, rng: RngStream, variance: float | None = None):
    """Dense Gaussian sketch; ``variance=None`` selects the 1/m normalization
    under which ``E||Sy||^2 = ||y||^2``."""
    if m < 1 or n < 1:
        raise ValueError(f"sketch dims must be >= 1, got {m} x {n}")
    if variance is None:
        variance = 1.0 / m
    if not variance > 0:
        raise ValueError(f"variance must be > 0, got {variance}")
    g = rng.generator()
    matrix = g.normal(0.0, np.sqrt(variance), size=(m, n))
    return GaussianSketch(m=m, n=n, variance=variance, rng=rng, matrix=matrix)


def _stable_matrix(params: StableParams, g: np.random.Generator, shape):
    theta = g.uniform(-np.pi / 2.0, np.pi / 2.0, size=shape)
    w = g.standard_exponential(size=shape)
    p = params.p
    if p == 1.0:
        x = np.tan(theta)
    else:
        x = (np.sin(p * theta) / np.cos(theta) ** (1.0 / p)) * (
            np.cos((1.0 - p) * theta) / w
        ) ** ((1.0 - p) / p)
    return params.char_scale * x


def build_stable_sketch(m: int, n: int, p: float, rng: RngStream):
    """Dense p-stable sketch at the calibrated characteristic scale gamma_p,
    so that the median of |(Sy)_i| concentrates around ||y||_p."""
    if m < 1 or n < 1:
        raise ValueError(f"sketch dims must be >= 1, got {m} x {n}")
    if not 1.0 <= p < 2.0:
        # p = 2 is served by the Gaussian sketch; the median estimator
        # backing this sketch covers p in [1, 2) only
        raise ValueError(f"stable sketch requires p in [1, 2), got {p}")
    params = StableParams(p=p, char_scale=calibrate_stable_scale(p))
    matrix = _stable_matrix(params, rng.generator(), (m, n))
    return StableSketch(m=m, n=n, params=params, rng=rng, matrix=matrix)


def build_countsketch(n_buckets: int, n_tables: int, n: int, rng: RngStream):
    """CountSketch with fresh degree-1 hash coefficients per table."""
    if n_buckets < 1 or n_tables < 1 or n < 1:
        raise ValueError("n_buckets, n_tables and n must all be >= 1")
    prime = next_prime(n)
    g = rng.generator()
    bucket_coeffs = np.stack(
        [g.integers(1, prime, size=n_tables), g.integers(0, prime, size=n_tables)], axis=1
    ).astype(np.int64)
    sign_coeffs = np.stack(
        [g.integers(1, prime, size=n_tables), g.integers(0, prime, size=n_tables)], axis=1
    ).astype(np.int64)
    return CountSketchState(
        n=n,
        n_buckets=n_buckets,
        n_tables=n_tables,
        prime=prime,
        bucket_coeffs=bucket_coeffs,
        sign_coeffs=sign_coeffs,
    )


def build_row_sampler(m: int, n: int, rng: RngStream, identity: bool = False):
    """Uniform-with-replacement row sampler (unscaled); ``identity=True`` is
    the deterministic test mode requiring m == n."""
    if m < 1 or n < 1:
        raise ValueError(f"sampler dims must be >= 1, got {m} of {n}")
    if identity:
        if m != n:
            raise ValueError("identity sampler requires m == n")
        indices = np.arange(n, dtype=np.int64)
    else:
        indices = rng.generator().integers(0, n, size=m, dtype=np.int64)
    return RowSampler(m=m, n=n, indices=indices, rng=rng, identity=identity)


def build_relu_sketch(m1: int, n: int, rng: RngStream, testing_identity: bool = False):
    """Sketch for the ReLU estimator: a Cauchy (p=1) segment named "med"
    stacked on the all-ones row named "ones".

    ``testing_identity=True`` replaces the med segment by the identity map
    (requires m1 == n), making the estimate exact.
    """
    if testing_identity:
        if m1 != n:
            raise ValueError("identity med segment requires m1 == n")
        med = IdentitySketch(n=n)
    else:
        med = build_stable_sketch(m1, n, 1.0, rng)
    return CompositeSketch(n=n, children=[("med", med), ("ones", OnesRowSketch(n=n))], flavor="relu")


def build_hinge_sketch(
    m1: int,
    m2: int,
    n: int,
    rng: RngStream,
    testing_identity: bool = False,
):
    """Sketch for hinge-like estimators: [med | ones | rows].

    The med/ones pair feeds the ReLU part; the "rows" segment is an
    unscaled uniform row sample of size m2 feeding the correction term.
    With ``testing_identity=True`` the sampler becomes the identity
    permutation (requires m2 == n); if additionally m1 == n the med
    segment is the identity too and the whole estimate is exact.
    """
    if testing_identity and m2 != n:
        raise ValueError("identity test mode requires m2 == n")
    # hinge serialization regenerates the stable matrix from the recorded
    # rng, so the matrix must be the first draw from the shared generator
    g = rng.generator()
    if testing_identity and m1 == n:
        med = IdentitySketch(n=n)
    else:
        params = StableParams(p=1.0, char_scale=calibrate_stable_scale(1.0))
        med = StableSketch(
            m=m1, n=n, params=params, rng=rng, matrix=_stable_matrix(params, g, (m1, n))
        )
    if testing_identity:
        rows = RowSampler(
            m=n, n=n, indices=np.arange(n, dtype=np.int64), rng=rng, identity=True
        )
    else:
        indices = g.integers(0, n, size=m2, dtype=np.int64)
        rows = RowSampler(m=m2, n=n, indices=indices, rng=rng, identity=False)
    return CompositeSketch(
        n=n,
        children=[("med", med), ("ones", OnesRowSketch(n=n)), ("rows", rows)],
        flavor="hinge",
    )


def densify(sketch) -> np.ndarray:
    """Materialize the m x n matrix of any sketch (small-dimension oracle)."""
    eye = np.eye(sketch.n)
    return sketch.apply_matrix(eye)


# ---------------------------------------------------------------------------
# Serialization.  Dense payloads (Gaussian/stable matrices, sampler draws)
# are regenerated from the recorded (seed, stream_index); hash coefficients
# and sampled indices are stored explicitly.


def _rng_doc(rng: RngStream):
    return {"seed": int(rng.seed), "stream_index": int(rng.stream_index)}


def sketch_to_json(sketch) -> dict:
    doc = {"format": SKETCH_FORMAT, "version": SKETCH_VERSION, "kind": sketch.kind}
    if sketch.kind == "gaussian":
        doc.update(
            m=sketch.m, n=sketch.n, variance=sketch.variance, rng=_rng_doc(sketch.rng)
        )
    elif sketch.kind == "stable":
        doc.update(m=sketch.m, n=sketch.n, p=sketch.params.p, rng=_rng_doc(sketch.rng))
    elif sketch.kind == "countsketch":
        doc.update(
            n=sketch.n,
            n_buckets=sketch.n_buckets,
            n_tables=sketch.n_tables,
            prime=sketch.prime,
            bucket_coeffs=sketch.bucket_coeffs.tolist(),
            sign_coeffs=sketch.sign_coeffs.tolist(),
        )
    elif sketch.kind == "ones_row":
        doc.update(n=sketch.n)
    elif sketch.kind == "identity":
        doc.update(n=sketch.n)
    elif sketch.kind == "row_sampler":
        doc.update(
            m=sketch.m,
            n=sketch.n,
            indices=sketch.indices.tolist(),
            identity=bool(sketch.identity),
        )
    elif sketch.kind == "composite":
        doc.update(
            n=sketch.n,
            flavor=sketch.flavor,
            children=[[name, sketch_to_json(child)] for name, child in sketch.children],
        )
    else:
        raise ValueError(f"cannot serialize sketch kind {sketch.kind!r}")
    return doc


def sketch_from_json(doc: dict):
    if doc.get("format") != SKETCH_FORMAT:
        raise ValueError(f"not a sketch document: format={doc.get('format')!r}")
    if doc.get("version") != SKETCH_VERSION:
        raise ValueError(f"unsupported sketch document version {doc.get('version')!r}")
    kind = doc["kind"]
    if kind == "gaussian":
        rng = RngStream(**doc["rng"])
        return build_gaussian_sketch(doc["m"], doc["n"], rng, variance=doc["variance"])
    if kind == "stable":
        rng = RngStream(**doc["rng"])
        return build_stable_sketch(doc["m"], doc["n"], doc["p"], rng)
    if kind == "countsketch":
        return CountSketchState(
            n=doc["n"],
            n_buckets=doc["n_buckets"],
            n_tables=doc["n_tables"],
            prime=doc["prime"],
            bucket_coeffs=np.asarray(doc["bucket_coeffs"], dtype=np.int64),
            sign_coeffs=np.asarray(doc["sign_coeffs"], dtype=np.int64),
        )
    if kind == "ones_row":
        return OnesRowSketch(n=doc["n"])
    if kind == "identity":
        return IdentitySketch(n=doc["n"])
    if kind == "row_sampler":
        return RowSampler(
            m=doc["m"],
            n=doc["n"],
            indices=np.asarray(doc["indices"], dtype=np.int64),
            rng=None,
            identity=doc["identity"],
        )
    if kind == "composite":
        children = [(name, sketch_from_json(child)) for name, child in doc["children"]]
        return CompositeSketch(n=doc["n"], children=children, flavor=doc["flavor"])
    raise ValueError(f"unknown sketch kind {kind!r}")
