"""Synthetic multi-domain data model.

n binary attributes index 2^n domains; domain a is an isotropic Gaussian
cloud centered at mu(a) = mu0 + sum_i a_i * v_i with orthonormal directions
v_i.  Because the construction is known exactly, translation between domains
and Bayes-optimal attribute classification are available in closed form and
serve as evaluation oracles (the trained generator never sees them).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DomainSpec:
    """Ground-truth data model: directions are rows of an (n, d) matrix."""

    n: int
    d: int
    base_mean: np.ndarray
    directions: np.ndarray
    noise_scale: float
    seed: int | None = None

    def domain_mean(self, attrs):
        """mu(a) for one attribute vector (n,) or a batch (k, n)."""
        attrs = np.asarray(attrs, dtype=np.float64)
        return self.base_mean + attrs @ self.directions


@dataclass
class Batch:
    """Features x (k, d) with their source attributes (k, n)."""

    x: np.ndarray
    attrs: np.ndarray

    def __post_init__(self):
        if self.x.shape[0] != self.attrs.shape[0]:
            raise ValueError(
                f"batch rows mismatch: {self.x.shape[0]} features vs {self.attrs.shape[0]} attributes"
            )


def _gram_schmidt(rows):
    """Orthonormalize the rows of a matrix (modified Gram-Schmidt)."""
    basis = rows.astype(np.float64).copy()
    for i in range(basis.shape[0]):
        for j in range(i):
            basis[i] -= (basis[i] @ basis[j]) * basis[j]
        norm = np.linalg.norm(basis[i])
        if norm < 1e-9:
            raise ValueError("degenerate random directions; retry with another seed")
        basis[i] /= norm
    return basis


def make_domain_spec(n, d, noise_scale=0.1, seed=0, base_mean=None):
    """Seeded spec with orthonormal per-attribute directions (requires d >= n)."""
    if n < 1:
        raise ValueError(f"need at least one attribute, got n={n}")
    if d < n:
        raise ValueError(f"feature dimension d={d} must be >= attribute count n={n}")
    if noise_scale <= 0:
        raise ValueError(f"noise scale must be positive, got {noise_scale}")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5EED]))
    directions = _gram_schmidt(rng.standard_normal((n, d)))
    if base_mean is None:
        base_mean = np.zeros(d)
    base_mean = np.asarray(base_mean, dtype=np.float64)
    if base_mean.shape != (d,):
        raise ValueError(f"base mean shape {base_mean.shape} vs d={d}")
    return DomainSpec(n=n, d=d, base_mean=base_mean, directions=directions,
                      noise_scale=float(noise_scale), seed=int(seed))


def sample_batch(spec, batch_size, rng):
    """Draw uniform attribute bits, then x = mu(a) + noise_scale * standard normal."""
    if batch_size < 2:
        raise ValueError(f"batch size must be >= 2, got {batch_size}")
    attrs = rng.integers(0, 2, size=(batch_size, spec.n))
    noise = rng.standard_normal((batch_size, spec.d))
    x = spec.domain_mean(attrs) + spec.noise_scale * noise
    return Batch(x=x, attrs=attrs)


def oracle_translate(spec, x, a_src, a_tgt):
    """Exact translation x + mu(a_tgt) - mu(a_src); preserves the residual."""
    x = np.asarray(x, dtype=np.float64)
    a_src = np.asarray(a_src)
    a_tgt = np.asarray(a_tgt)
    if a_src.shape[-1] != spec.n or a_tgt.shape[-1] != spec.n:
        raise ValueError(
            f"attribute length mismatch: {a_src.shape[-1]} and {a_tgt.shape[-1]} vs n={spec.n}"
        )
    return x + spec.domain_mean(a_tgt) - spec.domain_mean(a_src)


def bayes_classify(spec, x):
    """Exact Bayes decision per bit: 1 iff v_i . (x - mu0) > 0.5.

    Optimal for isotropic noise with independent uniform bits; ties resolve
    to 0.  Accepts one point (d,) or a batch (k, d).
    """
    x = np.asarray(x, dtype=np.float64)
    projections = (x - spec.base_mean) @ spec.directions.T
    return (projections > 0.5).astype(np.int64)


def draw_target_attributes(rng, n, count=None):
    """Uniform attribute vectors: shape (n,) or (count, n)."""
    shape = (n,) if count is None else (count, n)
    return rng.integers(0, 2, size=shape)


def draw_intermediate_attributes(rng, hops, target):
    """Attribute sequence for a multi-hop rollout ending at `target`.

    Returns a list of `hops` arrays shaped like `target`; all but the last
    are independent uniform draws, the last slot is the supplied target.
    """
    if hops < 1:
        raise ValueError(f"hop count must be >= 1, got {hops}")
    target = np.asarray(target)
    seq = [rng.integers(0, 2, size=target.shape) for _ in range(hops - 1)]
    seq.append(target.copy())
    return seq


def save_dataset_csv(path, batch):
    """One row per sample: d feature columns, then n attribute columns."""
    d = batch.x.shape[1]
    n = batch.attrs.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i}" for i in range(d)] + [f"a{i}" for i in range(n)])
        for row_x, row_a in zip(batch.x, batch.attrs):
            writer.writerow([repr(float(v)) for v in row_x] + [int(v) for v in row_a])


def load_dataset_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        d = sum(1 for name in header if name.startswith("x"))
        n = len(header) - d
        xs, attrs = [], []
        for row in reader:
            xs.append([float(v) for v in row[:d]])
            attrs.append([int(v) for v in row[d:]])
    return Batch(x=np.asarray(xs, dtype=np.float64), attrs=np.asarray(attrs, dtype=np.int64))
