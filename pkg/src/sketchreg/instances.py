"""Instance generators: structured support families, spiked designs with a
planted sparse direction, and the small hard instances used by the
negative-result experiments.

Support-family members use 1-based labels with label 1 reserved (it is the
column that becomes the regression target); labels 2..d map to design-matrix
columns 0..d-2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .numerics import RngStream
from .sketches import next_prime

INSTANCE_FORMAT = "sketchreg.instance"
INSTANCE_VERSION = 1

FAMILY_REDRAW_LIMIT = 1000


class ConstructionFailed(RuntimeError):
    """Raised when the support-family rejection loop exhausts its redraws."""


@dataclass(eq=False)
class SupportFamily:
    """A family of (k+1)-subsets of {1..d}, each containing label 1.

    Members are built from ``t`` base k-subsets of the prime field of size
    ``d - 1`` pushed through the full affine family h(x) = a*x + b (a != 0),
    then augmented with label 1.  The full affine family makes the counts
    c_i (memberships per label) and c_ij (joint memberships per label pair,
    over labels >= 2) exactly equal; a rejection loop on the base sets keeps
    every pairwise overlap of the non-augmented parts below
    ``c_overlap * k``.
    """

    d: int
    k: int
    t: int
    members: np.ndarray  # (N, k+1) sorted rows, label 1 first
    c_overlap: float
    base_sets: np.ndarray | None = None  # (t, k) field elements, provenance
    redraws: int = 0
    rng: RngStream | None = None

    @property
    def size(self):
        return self.members.shape[0]

    @staticmethod
    def from_members(d, k, members, c_overlap=0.9) -> "SupportFamily":
        """Wrap an explicit member list (each a set of labels including 1)."""
        rows = np.sort(np.asarray(members, dtype=np.int64), axis=1)
        if rows.ndim != 2 or rows.shape[1] != k + 1:
            raise ValueError(f"members must be (k+1)-sets, got shape {rows.shape}")
        if np.any(rows[:, 0] != 1):
            raise ValueError("every member must contain label 1")
        if rows.min() < 1 or rows.max() > d:
            raise ValueError("member labels out of range 1..d")
        return SupportFamily(d=d, k=k, t=0, members=rows, c_overlap=c_overlap)


@dataclass
class FamilyReport:
    balanced: bool
    correctable: bool
    c_index: int | None
    c_pair: int | None
    max_overlap: int
    balance_witness: str | None
    overlap_witness: tuple | None

    @property
    def ok(self):
        return self.balanced and self.correctable


def _affine_images(base_sets, p):
    """All images h(S) = {a*s + b mod p} over a in [1,p), b in [0,p).

    Returns an (t * (p-1) * p, k) array of sorted field-element rows.
    """
    a = np.arange(1, p, dtype=np.int64)
    b = np.arange(p, dtype=np.int64)
    # shape (t, p-1, p, k)
    imgs = (
        a[None, :, None, None] * base_sets[:, None, None, :] + b[None, None, :, None]
    ) % p
    imgs = imgs.reshape(-1, base_sets.shape[1])
    imgs.sort(axis=1)
    return imgs


def build_support_family(
    d: int, k: int, t: int, rng: RngStream, c_overlap: float = 0.9
) -> SupportFamily:
    """Build a balanced family over ambient dimension ``next_prime(d-1) + 1``.

    Members are the *distinct* images (a base set with a nontrivial affine
    symmetry produces each image of its orbit with uniform multiplicity, so
    deduplication preserves exact balance).  Base sets are redrawn (up to
    1000 rounds) until all pairwise overlaps of distinct member cores are
    strictly below ``c_overlap * k``.
    """
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    if not 0.0 < c_overlap <= 1.0:
        raise ValueError(f"c_overlap must lie in (0, 1], got {c_overlap}")
    p = next_prime(d - 1)
    ambient = p + 1
    if not 1 <= k <= p - 1:
        raise ValueError(f"k must satisfy 1 <= k <= {p - 1}, got {k}")
    g = rng.generator()
    for round_no in range(FAMILY_REDRAW_LIMIT):
        base = np.stack([np.sort(g.choice(p, size=k, replace=False)) for _ in range(t)])
        # Distinct images only: orbit multiplicities are uniform per base
        # set, so collapsing repeats keeps the membership counts balanced.
        cores = np.unique(_affine_images(base, p), axis=0)
        incidence = np.zeros((cores.shape[0], p), dtype=np.uint8)
        incidence[np.arange(cores.shape[0])[:, None], cores] = 1
        max_ov, _, _ = _kernels.max_pairwise_overlap(incidence)
        if max_ov < c_overlap * k:
            members = np.hstack(
                [np.ones((cores.shape[0], 1), dtype=np.int64), cores + 2]
            )
            return SupportFamily(
                d=ambient,
                k=k,
                t=t,
                members=members,
                c_overlap=c_overlap,
                base_sets=base,
                redraws=round_no,
                rng=rng,
            )
    raise ConstructionFailed(
        f"no admissible base sets in {FAMILY_REDRAW_LIMIT} redraws "
        f"(d={d}, k={k}, t={t}, c_overlap={c_overlap})"
    )


def verify_family(fam: SupportFamily) -> FamilyReport:
    """Exhaustively check balance and correctability.

    Balance: every label in 2..d appears in the same number of members, and
    every unordered pair of such labels appears together in the same number
    of members.  Correctability: the maximum pairwise overlap of the
    non-augmented parts is at most ``c_overlap * k``.
    """
    cores = fam.members[:, 1:] - 2  # back to 0-based universe of size d-1
    universe = fam.d - 1
    counts = np.bincount(cores.ravel(), minlength=universe)
    c_index = None
    balance_witness = None
    balanced = True
    if counts.min() != counts.max():
        balanced = False
        lo, hi = int(np.argmin(counts)), int(np.argmax(counts))
        balance_witness = (
            f"c_{hi + 2} = {counts[hi]} vs c_{lo + 2} = {counts[lo]}"
        )
    else:
        c_index = int(counts[0])

    k = fam.k
    pair_counts = np.zeros((universe, universe), dtype=np.int64)
    iu, ju = np.triu_indices(k, 1)
    rows_i = cores[:, iu].ravel()
    rows_j = cores[:, ju].ravel()
    lo_ = np.minimum(rows_i, rows_j)
    hi_ = np.maximum(rows_i, rows_j)
    np.add.at(pair_counts, (lo_, hi_), 1)
    upper = pair_counts[np.triu_indices(universe, 1)]
    c_pair = None
    if upper.size and upper.min() != upper.max():
        balanced = False
        if balance_witness is None:
            balance_witness = f"pair counts range {upper.min()}..{upper.max()}"
    elif upper.size:
        c_pair = int(upper[0])

    incidence = np.zeros((cores.shape[0], universe), dtype=np.uint8)
    incidence[np.arange(cores.shape[0])[:, None], cores] = 1
    max_ov, wi, wj = _kernels.max_pairwise_overlap(incidence)
    correctable = max_ov <= fam.c_overlap * k + 1e-9
    return FamilyReport(
        balanced=balanced,
        correctable=correctable,
        c_index=c_index,
        c_pair=c_pair,
        max_overlap=int(max_ov),
        balance_witness=balance_witness,
        overlap_witness=(wi, wj) if wi >= 0 else None,
    )


@dataclass(eq=False)
class RegressionInstance:
    A: np.ndarray
    b: np.ndarray
    meta: dict


def _family_params_doc(fam: SupportFamily):
    if fam.rng is None:
        raise ValueError("family was not built by build_support_family; cannot serialize")
    return {
        "d": int(fam.d),
        "k": int(fam.k),
        "t": int(fam.t),
        "c_overlap": float(fam.c_overlap),
        "seed": int(fam.rng.seed),
        "stream_index": int(fam.rng.stream_index),
    }


def gen_spiked_instance(
    n: int, d: int, k: int, eps: float, family: SupportFamily, rng: RngStream
) -> RegressionInstance:
    """Gaussian design with covariance I + z z^T for a spike z carried by a
    random family member: z = e_1 + (eps/sqrt(k)) * 1_{U \\ {1}}.

    Column 1 (the z(1) = 1 coordinate) becomes the target b; the remaining
    d-1 columns form A.  The planted support in A-column coordinates is
    recorded in ``meta["planted_cols"]``.
    """
    if d != family.d:
        raise ValueError(f"d = {d} must equal the family ambient dimension {family.d}")
    if k != family.k:
        raise ValueError(f"k = {k} must equal the family sparsity {family.k}")
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    g = rng.generator()
    member = family.members[g.integers(family.size)]
    z = np.zeros(d)
    z[0] = 1.0
    core = member[member != 1]
    z[core - 1] = eps / np.sqrt(k)
    G = g.standard_normal((n, d))
    nz2 = float(z @ z)
    alpha = (np.sqrt(1.0 + nz2) - 1.0) / nz2
    Z = G + alpha * np.outer(G @ z, z)
    b = Z[:, 0].copy()
    A = Z[:, 1:].copy()
    meta = {
        "generator": "spiked",
        "n": n,
        "d": d,
        "k": k,
        "eps": eps,
        "member": member.tolist(),
        "planted_cols": (core - 2).tolist(),
        "z": z.tolist(),
        "family_params": _family_params_doc(family) if family.rng is not None else None,
        "seed": int(rng.seed),
        "stream_index": int(rng.stream_index),
    }
    return RegressionInstance(A=A, b=b, meta=meta)


def gen_planted_regression(inst: RegressionInstance) -> RegressionInstance:
    """Append the sum-forcing gadget to a spiked instance: one all-M row on
    A with target sqrt(k) * M, where M = 2 * sqrt(n / (eps * k)) is twice
    the threshold scale."""
    if inst.meta.get("generator") != "spiked":
        raise ValueError("gen_planted_regression expects a spiked instance")
    n = inst.meta["n"]
    k = inst.meta["k"]
    eps = inst.meta["eps"]
    M = 2.0 * np.sqrt(n / (eps * k))
    A = np.vstack([inst.A, np.full((1, inst.A.shape[1]), M)])
    b = np.append(inst.b, np.sqrt(k) * M)
    meta = dict(inst.meta)
    meta.update(generator="planted", M=M, n_rows=A.shape[0])
    return RegressionInstance(A=A, b=b, meta=meta)


def eval_planted_loss(x, v, eps: float, M: float, n: int) -> float:
    """Population loss of the planted model at a sparse x:

    1 + ||x||^2 + (1 - eps * x.v)^2 + (M^2/n) * (sum x - sqrt(k))^2,

    with k the support size of the planted unit direction v.
    """
    v = np.asarray(v, dtype=np.float64)
    k = int(np.count_nonzero(v))
    xv = float(x.values @ v[x.support]) if x.support.size else 0.0
    sx = float(x.values.sum())
    nx2 = float(x.values @ x.values)
    return (
        1.0
        + nx2
        + (1.0 - eps * xv) ** 2
        + (M * M / n) * (sx - np.sqrt(k)) ** 2
    )


def gen_sampling_failure_instance(n: int, rng: RngStream) -> RegressionInstance:
    """Identity design with a uniformly random standard basis vector as the
    target; any solver reading a fixed subset of rows misses the planted
    coordinate with probability 1 - m/n."""
    if n <= 9:
        raise ValueError(f"n must exceed 9, got {n}")
    g = rng.generator()
    i = int(g.integers(n))
    A = np.eye(n)
    b = np.zeros(n)
    b[i] = 1.0
    return RegressionInstance(
        A=A,
        b=b,
        meta={
            "generator": "sampling_failure",
            "n": n,
            "planted_row": i,
            "seed": int(rng.seed),
            "stream_index": int(rng.stream_index),
        },
    )


def gen_mu_instance(n_half: int, d: int, c_mu: float, rng: RngStream) -> RegressionInstance:
    """Stacked [G; -G/c_mu] design with b = 0 and certified mu <= c_mu."""
    if c_mu < 1.0:
        raise ValueError(f"c_mu must be >= 1, got {c_mu}")
    if n_half < 1 or d < 1:
        raise ValueError("n_half and d must be >= 1")
    g = rng.generator()
    G = g.standard_normal((n_half, d))
    A = np.vstack([G, -G / c_mu])
    return RegressionInstance(
        A=A,
        b=np.zeros(2 * n_half),
        meta={
            "generator": "mu",
            "n_half": n_half,
            "d": d,
            "mu_upper": float(c_mu),
            "seed": int(rng.seed),
            "stream_index": int(rng.stream_index),
        },
    )


def gen_powerlaw_signal(d: int, k: int, decay: float, rng: RngStream) -> np.ndarray:
    """Randomly permuted power-law vector x with magnitudes i^(-decay)
    (i = 1..d) and the top k magnitudes boosted by a factor of 3."""
    if not decay > 0.5:
        raise ValueError(f"decay must exceed 0.5, got {decay}")
    if not 1 <= k <= d:
        raise ValueError(f"k must satisfy 1 <= k <= d, got k={k}, d={d}")
    g = rng.generator()
    mags = np.arange(1, d + 1, dtype=np.float64) ** (-decay)
    mags[:k] *= 3.0
    x = np.empty(d)
    x[g.permutation(d)] = mags
    return x


# ---------------------------------------------------------------------------
# Serialization: regenerable instances store generator id + parameters +
# stream; small ad-hoc instances can be stored with explicit entries.


def instance_to_json(inst: RegressionInstance) -> dict:
    doc = {"format": INSTANCE_FORMAT, "version": INSTANCE_VERSION}
    gen = inst.meta.get("generator")
    if gen == "spiked" or gen == "planted":
        fp = inst.meta.get("family_params")
        if fp is None:
            raise ValueError("spiked instance lacks regenerable family parameters")
        doc.update(
            generator=gen,
            n=inst.meta["n"],
            d=inst.meta["d"],
            k=inst.meta["k"],
            eps=inst.meta["eps"],
            family_params=fp,
            seed=inst.meta["seed"],
            stream_index=inst.meta["stream_index"],
        )
    elif gen == "sampling_failure":
        doc.update(
            generator=gen,
            n=inst.meta["n"],
            seed=inst.meta["seed"],
            stream_index=inst.meta["stream_index"],
        )
    elif gen == "mu":
        doc.update(
            generator=gen,
            n_half=inst.meta["n_half"],
            d=inst.meta["d"],
            c_mu=inst.meta["mu_upper"],
            seed=inst.meta["seed"],
            stream_index=inst.meta["stream_index"],
        )
    else:
        doc.update(
            generator="explicit",
            A=np.asarray(inst.A).tolist(),
            b=np.asarray(inst.b).tolist(),
            meta={k: v for k, v in inst.meta.items() if _json_scalarish(v)},
        )
    return doc


def _json_scalarish(v):
    return isinstance(v, (int, float, str, bool, type(None), list))


def instance_from_json(doc: dict) -> RegressionInstance:
    if doc.get("format") != INSTANCE_FORMAT:
        raise ValueError(f"not an instance document: format={doc.get('format')!r}")
    if doc.get("version") != INSTANCE_VERSION:
        raise ValueError(f"unsupported instance document version {doc.get('version')!r}")
    gen = doc["generator"]
    if gen in ("spiked", "planted"):
        fp = doc["family_params"]
        # fp["d"] is the ambient dimension p + 1, and next_prime(p) = p, so
        # rebuilding with the recorded d reproduces the same family.
        fam = build_support_family(
            fp["d"],
            fp["k"],
            fp["t"],
            RngStream(fp["seed"], fp["stream_index"]),
            c_overlap=fp["c_overlap"],
        )
        inst = gen_spiked_instance(
            doc["n"],
            doc["d"],
            doc["k"],
            doc["eps"],
            fam,
            RngStream(doc["seed"], doc["stream_index"]),
        )
        if gen == "planted":
            inst = gen_planted_regression(inst)
        return inst
    if gen == "sampling_failure":
        return gen_sampling_failure_instance(doc["n"], RngStream(doc["seed"], doc["stream_index"]))
    if gen == "mu":
        return gen_mu_instance(
            doc["n_half"], doc["d"], doc["c_mu"], RngStream(doc["seed"], doc["stream_index"])
        )
    if gen == "explicit":
        return RegressionInstance(
            A=np.asarray(doc["A"], dtype=np.float64),
            b=np.asarray(doc["b"], dtype=np.float64),
            meta=dict(doc.get("meta", {}), generator="explicit"),
        )
    raise ValueError(f"unknown instance generator {gen!r}")
