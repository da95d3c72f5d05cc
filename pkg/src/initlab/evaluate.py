"""Quantitative evaluation: closed-form Frechet distance between fitted
Gaussians (computed in raw feature space, independent of the training
embedding), Bayes-oracle attribute transfer accuracy, content-preservation
error, and the five-variant ablation harness.

Evaluation always uses 1-hop generator outputs.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from itertools import product
from pathlib import Path

import numpy as np

from .models import generator_forward
from .synthdata import bayes_classify, draw_target_attributes, make_domain_spec, sample_batch
from .training import PHASE_EVAL, TrainingDiverged, _step_rng, init_train_state, train

log = logging.getLogger(__name__)

COV_EPSILON = 1e-6

# ablation variants: label -> (aiw, mst, hops)
VARIANTS = {
    "a": (False, True, 2),
    "b": (True, True, 3),
    "c": (True, True, 2),
    "d": (True, False, 1),
    "e": (False, False, 1),
}


@dataclass
class MetricsReport:
    fid: float
    per_domain_fid: dict
    per_bit_accuracy: list
    mean_accuracy: float
    content_error: float
    sample_count: int
    seed: int
    variant: str | None = None

    def to_dict(self):
        return {
            "variant": self.variant,
            "seed": self.seed,
            "sample_count": self.sample_count,
            "fid": self.fid,
            "per_domain_fid": self.per_domain_fid,
            "per_bit_accuracy": self.per_bit_accuracy,
            "mean_accuracy": self.mean_accuracy,
            "content_error": self.content_error,
        }


def _sqrtm_psd(matrix):
    """Symmetric PSD square root by eigendecomposition (tiny negatives clipped)."""
    eigvals, eigvecs = np.linalg.eigh(matrix)
    eigvals = np.clip(eigvals, 0.0, None)
    return (eigvecs * np.sqrt(eigvals)) @ eigvecs.T


def frechet_from_moments(mu_a, cov_a, mu_b, cov_b):
    """||mu_a-mu_b||^2 + Tr(C_a + C_b - 2 (C_a C_b)^{1/2}).

    The cross term uses the symmetrized product C_a^{1/2} C_b C_a^{1/2},
    whose trace of the square root equals Tr((C_a C_b)^{1/2}).
    """
    delta = np.asarray(mu_a) - np.asarray(mu_b)
    root_a = _sqrtm_psd(cov_a)
    inner = root_a @ cov_b @ root_a
    eigvals = np.clip(np.linalg.eigvalsh((inner + inner.T) / 2.0), 0.0, None)
    tr_sqrt = float(np.sum(np.sqrt(eigvals)))
    return float(delta @ delta + np.trace(cov_a) + np.trace(cov_b) - 2.0 * tr_sqrt)


def fit_gaussian(points, eps=COV_EPSILON):
    points = np.asarray(points, dtype=np.float64)
    mu = points.mean(axis=0)
    cov = np.cov(points, rowvar=False) + eps * np.eye(points.shape[1])
    return mu, cov


def frechet_gaussian(set_a, set_b, eps=COV_EPSILON):
    """Frechet distance between Gaussians fitted to two point sets."""
    set_a = np.asarray(set_a, dtype=np.float64)
    set_b = np.asarray(set_b, dtype=np.float64)
    for name, pts in (("first", set_a), ("second", set_b)):
        if pts.ndim != 2 or pts.shape[0] < pts.shape[1] + 1:
            raise ValueError(
                f"frechet_gaussian: {name} set needs >= d+1 points, got shape {pts.shape}"
            )
    mu_a, cov_a = fit_gaussian(set_a, eps)
    mu_b, cov_b = fit_gaussian(set_b, eps)
    return frechet_from_moments(mu_a, cov_a, mu_b, cov_b)


def transfer_accuracy(spec, generated, targets):
    """Per-attribute fraction of generated samples classified as their target."""
    predicted = bayes_classify(spec, generated)
    targets = np.asarray(targets)
    if predicted.shape != targets.shape:
        raise ValueError(f"transfer_accuracy: shapes {predicted.shape} vs {targets.shape}")
    return np.mean(predicted == targets, axis=0)


def content_error(spec, sources, src_attrs, generated, targets):
    """Mean ||(x_t - mu(a_t)) - (x_s - mu(a_s))||: residual drift of the map."""
    gen_residual = np.asarray(generated, dtype=np.float64) - spec.domain_mean(targets)
    src_residual = np.asarray(sources, dtype=np.float64) - spec.domain_mean(src_attrs)
    return float(np.mean(np.linalg.norm(gen_residual - src_residual, axis=1)))


def evaluate_generator(gen, spec, *, n_samples=5000, seed=0, variant=None):
    """Score 1-hop translations on fresh streams of real and source samples."""
    if n_samples < spec.d + 1:
        raise ValueError(f"need at least d+1 samples, got {n_samples}")
    rng = _step_rng(seed, PHASE_EVAL, 0)
    real = sample_batch(spec, n_samples, rng)
    sources = sample_batch(spec, n_samples, rng)
    targets = draw_target_attributes(rng, spec.n, n_samples)
    generated = generator_forward(
        gen, sources.x.astype(np.float32), targets.astype(np.float32)
    ).data.astype(np.float64)

    fid = frechet_gaussian(real.x, generated)
    per_domain = {}
    min_count = spec.d + 1
    for combo in product((0, 1), repeat=spec.n):
        attr = np.asarray(combo)
        key = "".join(str(b) for b in combo)
        real_rows = real.x[np.all(real.attrs == attr, axis=1)]
        gen_rows = generated[np.all(targets == attr, axis=1)]
        if len(real_rows) >= min_count and len(gen_rows) >= min_count:
            per_domain[key] = frechet_gaussian(real_rows, gen_rows)
    accuracy = transfer_accuracy(spec, generated, targets)
    return MetricsReport(
        fid=fid,
        per_domain_fid=per_domain,
        per_bit_accuracy=[float(a) for a in accuracy],
        mean_accuracy=float(accuracy.mean()),
        content_error=content_error(spec, sources.x, sources.attrs, generated, targets),
        sample_count=n_samples,
        seed=seed,
        variant=variant,
    )


def variant_config(base_config, label):
    """Flag settings for ablation variant (a)..(e)."""
    try:
        aiw, mst, hops = VARIANTS[label]
    except KeyError:
        raise ValueError(f"unknown ablation variant {label!r}") from None
    return replace(base_config, aiw=aiw, mst=mst, hops=hops)


def _run_arm(args):
    """Train one (variant, seed) arm and evaluate it; returns a result row."""
    base_config, label, seed, n_eval = args
    config = replace(variant_config(base_config, label), seed=seed, out_dir=None)
    aiw, mst, hops = VARIANTS[label]
    row = {
        "variant": label, "seed": seed, "aiw": aiw, "mst": mst, "hops": hops,
        "fid": float("nan"), "mean_acc": float("nan"),
        "acc_bits": [float("nan")] * config.n, "content_err": float("nan"),
        "failed": True,
    }
    try:
        state, _ = train(config)
        report = evaluate_generator(state.gen, state.spec, n_samples=n_eval,
                                    seed=seed, variant=label)
    except (TrainingDiverged, RuntimeError, ValueError) as exc:
        log.error("ablation arm (%s, seed=%d) failed: %s", label, seed, exc)
        return row
    row.update(fid=report.fid, mean_acc=report.mean_accuracy,
               acc_bits=report.per_bit_accuracy,
               content_err=report.content_error, failed=False)
    return row


def _max_workers(n_arms):
    workers = min(n_arms, os.cpu_count() or 1)
    cap = os.environ.get("INIT_THREADS")
    if cap:
        workers = max(1, min(workers, int(cap)))
    return workers


def run_ablation(base_config, seeds, *, n_eval=5000, out_dir=None):
    """Train variants (a)..(e) for every seed and tabulate the metrics.

    All variants of one seed share the data stream (same seed, counter-based
    draws).  Failed arms are reported as NaN rows, never dropped.  Returns the
    row dicts; with out_dir set, also writes ablation.csv and summary.json.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError("run_ablation: need at least one seed")
    arms = [(base_config, label, seed, n_eval)
            for seed in seeds for label in VARIANTS]
    workers = _max_workers(len(arms))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_arm, arms))
    else:
        rows = [_run_arm(arm) for arm in arms]

    summary = {}
    for label in VARIANTS:
        picked = [r for r in rows if r["variant"] == label]
        fids = [r["fid"] for r in picked if not r["failed"]]
        accs = [r["mean_acc"] for r in picked if not r["failed"]]
        errs = [r["content_err"] for r in picked if not r["failed"]]
        summary[label] = {
            "fid_median": float(np.median(fids)) if fids else float("nan"),
            "mean_acc_median": float(np.median(accs)) if accs else float("nan"),
            "content_err_median": float(np.median(errs)) if errs else float("nan"),
            "failed": sum(1 for r in picked if r["failed"]),
        }

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_ablation_csv(out_dir / "ablation.csv", rows, base_config.n)
        with open(out_dir / "summary.json", "w") as fh:
            json.dump(summary, fh, indent=2)
            fh.write("\n")
    return rows, summary


def write_ablation_csv(path, rows, n_bits):
    header = (["variant", "seed", "aiw", "mst", "hops", "fid", "mean_acc"]
              + [f"acc_bit_{i + 1}" for i in range(n_bits)] + ["content_err"])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [row["variant"], row["seed"], row["aiw"], row["mst"], row["hops"],
                 repr(row["fid"]), repr(row["mean_acc"])]
                + [repr(a) for a in row["acc_bits"]]
                + [repr(row["content_err"])]
            )
