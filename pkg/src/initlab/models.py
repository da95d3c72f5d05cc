"""The three networks: conditional generator, conditional discriminator
emitting raw logits, and a pretrained embedding model projecting onto a
radius-r hypersphere.

All are small MLPs over vector-valued data; attribute conditioning is plain
per-sample concatenation.  The discriminator exposes logits only -- the
probability is never materialized, losses use softplus forms instead.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .optim import AdamState, adam_step
from .synthdata import sample_batch

log = logging.getLogger(__name__)


@dataclass
class Mlp:
    """Alternating linear layers with relu between them; last layer is linear.

    weights[i] has shape (fan_in, fan_out); biases[i] has shape (fan_out,).
    """

    weights: list = field(default_factory=list)
    biases: list = field(default_factory=list)

    @property
    def widths(self):
        return [w.data.shape[0] for w in self.weights] + [self.weights[-1].data.shape[1]]

    def forward(self, x):
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = ad.linear(h, w, b)
            if i != last:
                h = ad.relu(h)
        return h

    def forward_np(self, x):
        """Graph-free forward for frozen networks; float32 like training."""
        h = np.asarray(x, dtype=np.float32)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.data + b.data
            if i != last:
                h = np.maximum(h, 0.0)
        return h

    def parameters(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out


def init_mlp(widths, rng, dtype=np.float32):
    """He-normal hidden layers, 1/sqrt(fan_in) output layer, zero biases."""
    mlp = Mlp()
    last = len(widths) - 2
    for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
        scale = np.sqrt(1.0 / fan_in) if i == last else np.sqrt(2.0 / fan_in)
        w = (rng.standard_normal((fan_in, fan_out)) * scale).astype(dtype)
        mlp.weights.append(ad.parameter(w))
        mlp.biases.append(ad.parameter(np.zeros(fan_out, dtype=dtype)))
    return mlp


@dataclass
class GeneratorParams:
    net: Mlp
    d: int
    n: int
    residual: bool = True

    def parameters(self):
        return self.net.parameters()


@dataclass
class DiscriminatorParams:
    net: Mlp
    d: int
    n: int

    def parameters(self):
        return self.net.parameters()


@dataclass
class EmbeddingParams:
    """Trunk d -> ... -> m (the embedding), plus an m -> n classifier head."""

    trunk: Mlp
    head_w: "ad.Tensor"
    head_b: "ad.Tensor"
    radius: float
    d: int
    width: int

    def parameters(self):
        return self.trunk.parameters() + [self.head_w, self.head_b]

    def freeze(self):
        for p in self.parameters():
            p.requires_grad = False


def init_generator(d, n, rng, hidden=64, depth=3):
    widths = [d + n] + [hidden] * depth + [d]
    return GeneratorParams(net=init_mlp(widths, rng), d=d, n=n)


def init_discriminator(d, n, rng, hidden=64, depth=3):
    widths = [d + n] + [hidden] * depth + [1]
    return DiscriminatorParams(net=init_mlp(widths, rng), d=d, n=n)


def init_embedding(d, n, rng, hidden=32, depth=2, width=8, radius=1.0):
    trunk = init_mlp([d] + [hidden] * depth + [width], rng)
    scale = np.sqrt(1.0 / width)
    head_w = ad.parameter((rng.standard_normal((width, n)) * scale).astype(np.float32))
    head_b = ad.parameter(np.zeros(n, dtype=np.float32))
    return EmbeddingParams(trunk=trunk, head_w=head_w, head_b=head_b,
                           radius=float(radius), d=d, width=width)


def _as_tensor(x, width, what):
    if not isinstance(x, ad.Tensor):
        arr = np.asarray(x)
        if arr.dtype != np.float64:
            arr = arr.astype(np.float32)
        x = ad.constant(arr)
    if x.data.ndim != 2 or x.data.shape[1] != width:
        raise ValueError(f"{what}: expected (batch, {width}) input, got {x.data.shape}")
    return x


def generator_forward(gen, x, attrs):
    """x_fake = x + head(concat(x, a)) for the residual generator."""
    x = _as_tensor(x, gen.d, "generator features")
    attrs = _as_tensor(attrs, gen.n, "generator attributes")
    if x.data.shape[0] != attrs.data.shape[0]:
        raise ValueError(
            f"generator: batch mismatch {x.data.shape[0]} vs {attrs.data.shape[0]}"
        )
    head = gen.net.forward(ad.concatenate([x, attrs], axis=1))
    return ad.add(x, head) if gen.residual else head


def discriminator_forward(disc, x, attrs):
    """Raw per-sample logit, shape (batch, 1)."""
    x = _as_tensor(x, disc.d, "discriminator features")
    attrs = _as_tensor(attrs, disc.n, "discriminator attributes")
    if x.data.shape[0] != attrs.data.shape[0]:
        raise ValueError(
            f"discriminator: batch mismatch {x.data.shape[0]} vs {attrs.data.shape[0]}"
        )
    return disc.net.forward(ad.concatenate([x, attrs], axis=1))


def embedding_forward(phi, x):
    """Project inputs onto the radius-r sphere: r * z / ||z||.

    Returns a plain (batch, m) float32 array -- embeddings feed the
    gradient-detached weight statistics, never a loss.  Rows whose trunk
    output has near-zero norm are replaced by a fixed unit direction.
    """
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[1] != phi.d:
        raise ValueError(f"embedding: expected (batch, {phi.d}) input, got {x.shape}")
    z = phi.trunk.forward_np(x)
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    tiny = norms[:, 0] < 1e-12
    if np.any(tiny):
        log.warning("embedding_forward: %d zero-norm rows replaced by fixed direction", int(tiny.sum()))
        z = z.copy()
        z[tiny, :] = 0.0
        z[tiny, 0] = 1.0
        norms = np.linalg.norm(z, axis=1, keepdims=True)
    return (phi.radius * z / norms).astype(np.float32)


def classifier_logits(phi, x):
    """Per-bit attribute logits from the embedding trunk plus head."""
    x = _as_tensor(x, phi.d, "classifier features")
    z = phi.trunk.forward(x)
    return ad.linear(z, phi.head_w, phi.head_b)


def pretrain_embedding(spec, *, steps=2000, lr=1e-3, batch_size=64, hidden=32,
                       depth=2, width=8, radius=1.0, seed=0, holdout=2048):
    """Train the embedding trunk as a per-bit attribute classifier, then freeze.

    Per-bit binary cross-entropy on logits (softplus(z) - y*z form).  Returns
    the frozen EmbeddingParams and held-out per-bit accuracy.
    """
    rng_init = np.random.default_rng(np.random.SeedSequence([seed, 30, 0]))
    phi = init_embedding(spec.d, spec.n, rng_init, hidden=hidden, depth=depth,
                         width=width, radius=radius)
    params = phi.parameters()
    state = AdamState.for_params(params, lr=lr, beta1=0.9, beta2=0.999)
    for step in range(steps):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 31, step]))
        batch = sample_batch(spec, batch_size, rng)
        logits = classifier_logits(phi, batch.x)
        targets = ad.constant(batch.attrs.astype(np.float32))
        # BCE with logits: mean(softplus(z) - y * z)
        loss = ad.tmean(ad.sub(ad.softplus(logits), ad.mul(targets, logits)))
        if not np.isfinite(loss.item()):
            raise RuntimeError(f"embedding pretraining diverged at step {step}")
        adam_step(state, params, ad.gradients(loss, params))
    phi.freeze()

    rng_eval = np.random.default_rng(np.random.SeedSequence([seed, 32, 0]))
    held = sample_batch(spec, holdout, rng_eval)
    logits = classifier_logits(phi, held.x).data
    accuracy = float(np.mean((logits > 0) == (held.attrs > 0)))
    log.info("embedding pretraining done: held-out per-bit accuracy %.4f", accuracy)
    return phi, accuracy


def model_tensors(prefix, params):
    """Named parameter arrays for checkpointing, in a stable order."""
    out = {}
    for i, p in enumerate(params):
        out[f"{prefix}.{i}"] = p.data
    return out


def load_model_tensors(prefix, params, tensors):
    """Restore parameters in-place from a checkpoint mapping."""
    for i, p in enumerate(params):
        key = f"{prefix}.{i}"
        if key not in tensors:
            raise ValueError(f"checkpoint missing tensor {key}")
        arr = tensors[key]
        if arr.shape != p.data.shape:
            raise ValueError(f"checkpoint tensor {key} shape {arr.shape} vs {p.data.shape}")
        p.data = arr.astype(p.data.dtype)
