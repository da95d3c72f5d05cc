"""Adversarial importance weighting.

The raw per-sample weight is exp(clip(logit, -L, L)): for an optimal
discriminator the logit equals log(p_data/p_g), so e^logit recovers the
density ratio used in importance sampling.  A batch-wide scale factor
s = (1 + (2r - dl))^2 derived from embedding distance statistics rescales the
raw weights; dl = dl_neg - dl_pos, where dl_pos is the mean distance between
matched source/generated pairs and dl_neg the mean over mismatched pairs.  On
a radius-r sphere dl is bounded by 2r, attained when matched pairs coincide
and mismatched ones are antipodal, so 2r is the optimum reference.

All weight factors are computed from detached values; no gradient flows
through them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_LOGIT_CLAMP = 4.0


@dataclass
class DistanceStats:
    """Pairwise embedding distances and their matched/mismatched means."""

    matrix: np.ndarray
    dl_pos: float
    dl_neg: float
    dl: float
    dl_star: float


@dataclass
class WeightReport:
    """Per-batch weighting intermediates, one per training step."""

    logits: np.ndarray
    raw_weights: np.ndarray
    stats: DistanceStats
    scale: float
    weights: np.ndarray
    norm_factor: float | None


def raw_weight(logits, clamp=DEFAULT_LOGIT_CLAMP):
    """exp(clip(logit, -clamp, clamp)); scalar in, scalar out."""
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise ValueError("raw_weight: non-finite logit")
    weights = np.exp(np.clip(logits, -clamp, clamp))
    return float(weights) if weights.ndim == 0 else weights


def distance_stats(src_embeddings, gen_embeddings, radius=1.0):
    """Distance matrix e_ij = ||src_i - gen_j|| and the dl statistics.

    Needs k >= 2 rows (the mismatched mean has no entries otherwise).
    """
    src = np.asarray(src_embeddings, dtype=np.float64)
    gen = np.asarray(gen_embeddings, dtype=np.float64)
    if src.ndim != 2 or src.shape != gen.shape:
        raise ValueError(f"distance_stats: shape mismatch {src.shape} vs {gen.shape}")
    k = src.shape[0]
    if k < 2:
        raise ValueError(f"distance_stats: need k >= 2 rows, got {k}")
    diff = src[:, None, :] - gen[None, :, :]
    matrix = np.sqrt(np.sum(diff * diff, axis=2))
    diag = np.einsum("ii->i", matrix)
    dl_pos = float(diag.mean())
    dl_neg = float((matrix.sum() - diag.sum()) / (k * (k - 1)))
    return DistanceStats(matrix=matrix, dl_pos=dl_pos, dl_neg=dl_neg,
                         dl=dl_neg - dl_pos, dl_star=2.0 * float(radius))


def scale_factor(stats):
    """Batch scale s = (1 + (dl_star - dl))^2; equals 1 at the optimum."""
    return float((1.0 + (stats.dl_star - stats.dl)) ** 2)


def aiw_weights(logits, stats, clamp=DEFAULT_LOGIT_CLAMP, self_normalize=True):
    """Final per-sample weights s * exp(clip(logit)) with optional mean-1 rescale.

    Returns a WeightReport; the `weights` field is what multiplies the loss.
    """
    logits = np.asarray(logits, dtype=np.float64).reshape(-1)
    raw = raw_weight(logits, clamp=clamp)
    s = scale_factor(stats)
    weights = s * raw
    norm_factor = None
    if self_normalize:
        norm_factor = float(weights.mean())
        weights = weights / norm_factor
    return WeightReport(logits=logits, raw_weights=raw, stats=stats, scale=s,
                        weights=weights, norm_factor=norm_factor)


def weight_report_row(step, report):
    """JSON-lines diagnostics row for one training step."""
    return {
        "step": int(step),
        "dl_p": report.stats.dl_pos,
        "dl_n": report.stats.dl_neg,
        "dl": report.stats.dl,
        "scale": report.scale,
        "w_min": float(report.weights.min()),
        "w_mean": float(report.weights.mean()),
        "w_max": float(report.weights.max()),
    }


@dataclass
class ISEstimate:
    """Importance-sampling estimate of E_p[f] from proposal samples."""

    value: float
    effective_sample_size: float
    sample_count: int


def is_estimate(target_density, proposal_density, integrand, sample_count, rng,
                proposal_sampler):
    """Estimate E_p[f] as the mean of (p/q) * f over draws from q.

    `proposal_sampler(rng, size)` draws the x_i.  Requires q(x) > 0 wherever
    p(x) * f(x) != 0; a drawn point violating that aborts the estimate.
    """
    if sample_count < 1:
        raise ValueError(f"sample count must be >= 1, got {sample_count}")
    x = proposal_sampler(rng, sample_count)
    p = np.asarray(target_density(x), dtype=np.float64)
    q = np.asarray(proposal_density(x), dtype=np.float64)
    f = np.asarray(integrand(x), dtype=np.float64)
    bad = q == 0.0
    if np.any(bad & (p * f != 0.0)):
        raise RuntimeError("importance sampling support violation: q(x)=0 with p(x)*f(x)!=0")
    weights = np.zeros_like(p)
    np.divide(p, q, out=weights, where=~bad)
    value = float(np.mean(weights * f))
    wsum = weights.sum()
    wsq = float(weights @ weights)
    ess = float(wsum * wsum / wsq) if wsq > 0 else 0.0
    return ISEstimate(value=value, effective_sample_size=ess, sample_count=sample_count)
