"""Multi-hop sample training: chained generator rollouts and the weighted
adversarial losses built on them.

An N-hop trace applies the generator N times through randomly drawn
intermediate attributes, ending at the drawn target.  The generator loss sums,
over hop counts n = 1..N, the batch mean of

    weight_b * sum_{i<=n} log(1 - D(x_i, a_i))

with log(1 - D) evaluated stably as -softplus(logit).  Weights come from the
1-hop outputs and are plain arrays, so no gradient reaches them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .models import discriminator_forward, generator_forward


@dataclass
class HopTrace:
    """Source, the attribute sequence, and every generated hop (graph intact)."""

    source: "ad.Tensor"
    attrs: list
    images: list

    @property
    def hops(self):
        return len(self.images)


def rollout(gen, x_src, attr_seq):
    """Iterate the generator through `attr_seq`, keeping the full graph."""
    attr_seq = list(attr_seq)
    if not attr_seq:
        raise ValueError("rollout: empty attribute sequence")
    if not isinstance(x_src, ad.Tensor):
        arr = np.asarray(x_src)
        x_src = ad.constant(arr if arr.dtype == np.float64 else arr.astype(np.float32))
    images = []
    current = x_src
    for attrs in attr_seq:
        current = generator_forward(gen, current, attrs)
        images.append(current)
    return HopTrace(source=x_src, attrs=attr_seq, images=images)


def _hop_logit_sum(disc, trace, upto):
    """Sum over hops i = 1..upto of -softplus(logit_i), shape (batch, 1)."""
    total = None
    for image, attrs in zip(trace.images[:upto], trace.attrs[:upto]):
        term = ad.mul(ad.softplus(discriminator_forward(disc, image, attrs)), -1.0)
        total = term if total is None else ad.add(total, term)
    return total


def mst_generator_loss(disc, traces, weights):
    """Weighted multi-hop generator term of the adversarial loss.

    `traces` holds one HopTrace per hop count 1..N (in order); `weights` is a
    detached (batch,) array computed from the 1-hop outputs.  Hop counts enter
    with equal coefficients.
    """
    traces = list(traces)
    if not traces:
        raise ValueError("mst_generator_loss: no traces")
    for n, trace in enumerate(traces, start=1):
        if trace.hops != n:
            raise ValueError(
                f"mst_generator_loss: expected hop counts 1..{len(traces)}, "
                f"got {[t.hops for t in traces]}"
            )
    weights = np.asarray(weights, dtype=np.float64).reshape(-1)
    batch = traces[0].images[0].data.shape[0]
    if weights.shape[0] != batch:
        raise ValueError(f"mst_generator_loss: {weights.shape[0]} weights for batch {batch}")
    w_col = ad.constant(weights.astype(traces[0].images[0].data.dtype).reshape(-1, 1))
    loss = None
    for n, trace in enumerate(traces, start=1):
        term = ad.tmean(ad.mul(w_col, _hop_logit_sum(disc, trace, n)))
        loss = term if loss is None else ad.add(loss, term)
    return loss


def mst_nonsaturating_loss(disc, traces, weights):
    """Non-saturating generator objective: -log D instead of log(1 - D).

    Same weighting and hop structure; the generator minimizes this value
    directly (it is a positive quantity, softplus(-logit))."""
    traces = list(traces)
    weights = np.asarray(weights, dtype=np.float64).reshape(-1)
    dtype = traces[0].images[0].data.dtype
    w_col = ad.constant(weights.astype(dtype).reshape(-1, 1))
    loss = None
    for n, trace in enumerate(traces, start=1):
        total = None
        for image, attrs in zip(trace.images[:n], trace.attrs[:n]):
            logit = discriminator_forward(disc, image, attrs)
            term = ad.softplus(ad.mul(logit, -1.0))
            total = term if total is None else ad.add(total, term)
        term = ad.tmean(ad.mul(w_col, total))
        loss = term if loss is None else ad.add(loss, term)
    return loss


def data_loss(disc, x, attrs):
    """Mean log D(x, a) over the real batch, as -softplus(-logit)."""
    logits = discriminator_forward(disc, x, attrs)
    return ad.tmean(ad.mul(ad.softplus(ad.mul(logits, -1.0)), -1.0))
