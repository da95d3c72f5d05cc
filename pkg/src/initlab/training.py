"""End-to-end training: pretrain the embedding, then alternate generator and
discriminator Adam updates on the weighted multi-hop adversarial loss.

Per step, in order: sample a batch, draw targets, 1-hop rollout, compute the
detached importance weights, draw intermediates, multi-hop rollouts, assemble
L = L_data + L_g, one Adam step on G minimizing L, recompute the losses on a
fresh forward with the updated G (same draws, same weights), then one Adam
ascent step on D.

Randomness is counter-based: every consumer derives its generator from
(seed, phase, step), so runs are bit-reproducible and a checkpoint restart
continues the exact trajectory.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .aiw import DEFAULT_LOGIT_CLAMP, WeightReport, aiw_weights, distance_stats, weight_report_row
from .checkpoint import load_tensors, save_tensors
from .models import (
    discriminator_forward,
    embedding_forward,
    init_discriminator,
    init_generator,
    load_model_tensors,
    model_tensors,
    pretrain_embedding,
)
from .mst import data_loss, mst_generator_loss, mst_nonsaturating_loss, rollout
from .optim import AdamState, adam_step
from .synthdata import (
    draw_intermediate_attributes,
    draw_target_attributes,
    make_domain_spec,
    oracle_translate,
    sample_batch,
)

log = logging.getLogger(__name__)

# phase tags for counter-based seeding: rng = default_rng([seed, PHASE, step])
PHASE_INIT_G = 10
PHASE_INIT_D = 11
PHASE_EMBED_INIT = 30   # used inside pretrain_embedding
PHASE_BATCH = 40
PHASE_DRAWS = 41
PHASE_EVAL = 50


class ConfigError(ValueError):
    """Invalid configuration: bad value, unknown key, unreadable file."""


class TrainingDiverged(RuntimeError):
    """Non-finite loss; the last good checkpoint is retained."""


@dataclass
class TrainConfig:
    n: int = 3
    d: int = 8
    sigma: float = 0.1
    batch_size: int = 16
    hops: int = 2
    steps: int = 20000
    lr_g: float = 1e-4
    lr_d: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    aiw: bool = True
    mst: bool = True
    logit_clamp: float = DEFAULT_LOGIT_CLAMP
    self_normalize: bool = True
    non_saturating: bool = False
    paired_l1: bool = False
    l1_weight: float = 10.0
    seed: int = 0
    out_dir: str | None = None
    checkpoint_every: int = 5000
    g_hidden: int = 64
    g_depth: int = 3
    d_hidden: int = 64
    d_depth: int = 3
    embed_steps: int = 2000
    embed_lr: float = 1e-3
    embed_batch: int = 64
    embed_hidden: int = 32
    embed_depth: int = 2
    embed_width: int = 8
    embed_radius: float = 1.0
    eval_samples: int = 5000

    def validate(self):
        if self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}")
        if self.d < self.n:
            raise ConfigError(f"d must be >= n, got d={self.d} n={self.n}")
        if self.sigma <= 0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")
        if self.batch_size < 2:
            raise ConfigError(f"batch_size must be >= 2, got {self.batch_size}")
        if not 1 <= self.hops <= 4:
            raise ConfigError(f"hops must be in 1..4, got {self.hops}")
        if not self.mst and self.hops != 1:
            raise ConfigError(f"hops must be 1 when mst is off, got {self.hops}")
        if self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")
        for name in ("lr_g", "lr_d", "embed_lr"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("l1_weight", "logit_clamp"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.checkpoint_every < 1:
            raise ConfigError(f"checkpoint_every must be >= 1, got {self.checkpoint_every}")
        if self.eval_samples < self.d + 1:
            raise ConfigError(f"eval_samples must be >= d+1, got {self.eval_samples}")
        return self


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(TrainConfig)}


def _coerce(key, raw):
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        return raw or None  # str | None
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def parse_config_text(text, base=None):
    """Flat `key = value` lines; # starts a comment; unknown keys rejected."""
    config = base if base is not None else TrainConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, raw = line.split("=", 1)
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        config = replace(config, **{key: _coerce(key, raw)})
    return config


def load_config(path, base=None):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    return parse_config_text(text, base=base)


def apply_overrides(config, pairs):
    """Apply `key=value` strings (CLI --set) on top of a config."""
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override must be key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        config = replace(config, **{key: _coerce(key, raw)})
    return config


def config_text(config):
    """Serialize back to the flat key = value format (round-trips)."""
    lines = []
    for f in dataclasses.fields(TrainConfig):
        value = getattr(config, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif value is None:
            value = ""
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


@dataclass
class TrainState:
    spec: object
    gen: object
    disc: object
    phi: object
    adam_g: AdamState
    adam_d: AdamState
    step: int = 0


def _step_rng(seed, phase, step):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(phase), int(step)]))


def init_train_state(config):
    """Build spec, pretrain the embedding, and initialize fresh G/D."""
    spec = make_domain_spec(config.n, config.d, config.sigma, seed=config.seed)
    phi, _ = pretrain_embedding(
        spec, steps=config.embed_steps, lr=config.embed_lr,
        batch_size=config.embed_batch, hidden=config.embed_hidden,
        depth=config.embed_depth, width=config.embed_width,
        radius=config.embed_radius, seed=config.seed,
    )
    gen = init_generator(config.d, config.n, _step_rng(config.seed, PHASE_INIT_G, 0),
                         hidden=config.g_hidden, depth=config.g_depth)
    disc = init_discriminator(config.d, config.n, _step_rng(config.seed, PHASE_INIT_D, 0),
                              hidden=config.d_hidden, depth=config.d_depth)
    adam_g = AdamState.for_params(gen.parameters(), lr=config.lr_g,
                                  beta1=config.beta1, beta2=config.beta2)
    adam_d = AdamState.for_params(disc.parameters(), lr=config.lr_d,
                                  beta1=config.beta1, beta2=config.beta2)
    return TrainState(spec=spec, gen=gen, disc=disc, phi=phi,
                      adam_g=adam_g, adam_d=adam_d, step=0)


def _set_requires_grad(params, flag):
    for p in params:
        p.requires_grad = flag


def _check_finite(value, what, step):
    if not np.isfinite(value):
        raise TrainingDiverged(f"non-finite {what} at step {step}")


def train_step(state, batch, config):
    """One G update followed by one D update on the given batch."""
    step = state.step + 1
    rng = _step_rng(config.seed, PHASE_DRAWS, step)
    targets = draw_target_attributes(rng, config.n, batch.x.shape[0])
    xs = ad.constant(batch.x.astype(np.float32))
    src_attrs = batch.attrs.astype(np.float32)
    tgt_attrs = targets.astype(np.float32)

    g_params = state.gen.parameters()
    d_params = state.disc.parameters()

    # --- generator phase (D frozen) -------------------------------------
    _set_requires_grad(d_params, False)
    trace1 = rollout(state.gen, xs, [tgt_attrs])
    x1 = trace1.images[0]
    logits1 = discriminator_forward(state.disc, x1, tgt_attrs)

    emb_src = embedding_forward(state.phi, batch.x.astype(np.float32))
    emb_gen = embedding_forward(state.phi, x1.data)
    stats = distance_stats(emb_src, emb_gen, radius=config.embed_radius)
    if config.aiw:
        report = aiw_weights(logits1.data.ravel(), stats,
                             clamp=config.logit_clamp,
                             self_normalize=config.self_normalize)
    else:
        ones = np.ones(batch.x.shape[0])
        report = WeightReport(logits=logits1.data.ravel().astype(np.float64),
                              raw_weights=ones, stats=stats, scale=1.0,
                              weights=ones, norm_factor=None)

    traces = [trace1]
    for nhop in range(2, config.hops + 1):
        seq = draw_intermediate_attributes(rng, nhop, targets)
        traces.append(rollout(state.gen, xs, [a.astype(np.float32) for a in seq]))

    l_data = data_loss(state.disc, xs, src_attrs)
    l_g = mst_generator_loss(state.disc, traces, report.weights)
    if config.non_saturating:
        g_obj = mst_nonsaturating_loss(state.disc, traces, report.weights)
    else:
        g_obj = ad.add(l_data, l_g)
    if config.paired_l1:
        paired = oracle_translate(state.spec, batch.x, batch.attrs, targets)
        l1 = ad.tmean(ad.absolute(ad.sub(x1, ad.constant(paired.astype(np.float32)))))
        g_obj = ad.add(g_obj, ad.mul(l1, config.l1_weight))
    _check_finite(g_obj.item(), "generator loss", step)
    adam_step(state.adam_g, g_params, ad.gradients(g_obj, g_params))
    _set_requires_grad(d_params, True)

    # --- discriminator phase: fresh forward with updated G, same draws ---
    _set_requires_grad(g_params, False)
    traces_d = [rollout(state.gen, xs, t.attrs) for t in traces]
    l_data_d = data_loss(state.disc, xs, src_attrs)
    l_g_d = mst_generator_loss(state.disc, traces_d, report.weights)
    d_obj = ad.mul(ad.add(l_data_d, l_g_d), -1.0)  # ascent on L
    _check_finite(d_obj.item(), "discriminator loss", step)
    adam_step(state.adam_d, d_params, ad.gradients(d_obj, d_params))
    _set_requires_grad(g_params, True)

    state.step = step
    diag = {"step": step, "L_data": float(l_data.item()), "L_g": float(l_g.item())}
    row = weight_report_row(step, report)
    row.pop("step")
    diag.update(row)
    return diag


def save_state(state, path):
    tensors = {}
    tensors.update(model_tensors("G", state.gen.parameters()))
    tensors.update(model_tensors("D", state.disc.parameters()))
    tensors.update(model_tensors("PHI", state.phi.parameters()))
    tensors.update(model_tensors("ADAM_G.m", state.adam_g.m))
    tensors.update(model_tensors("ADAM_G.v", state.adam_g.v))
    tensors.update(model_tensors("ADAM_D.m", state.adam_d.m))
    tensors.update(model_tensors("ADAM_D.v", state.adam_d.v))
    tensors["meta"] = np.asarray([state.step, state.adam_g.t, state.adam_d.t],
                                 dtype=np.float32)
    save_tensors(path, tensors)


def load_generator(path, config):
    """Load only the generator from a checkpoint (enough for evaluation)."""
    tensors = load_tensors(path)
    spec = make_domain_spec(config.n, config.d, config.sigma, seed=config.seed)
    gen = init_generator(config.d, config.n, _step_rng(config.seed, PHASE_INIT_G, 0),
                         hidden=config.g_hidden, depth=config.g_depth)
    load_model_tensors("G", gen.parameters(), tensors)
    return spec, gen


def load_state(path, config):
    """Rebuild a TrainState from a checkpoint plus its config."""
    tensors = load_tensors(path)
    state = init_train_state(config)
    load_model_tensors("G", state.gen.parameters(), tensors)
    load_model_tensors("D", state.disc.parameters(), tensors)
    load_model_tensors("PHI", state.phi.parameters(), tensors)
    meta = tensors.get("meta")
    if meta is None or meta.shape != (3,):
        raise ValueError(f"checkpoint {path} missing meta tensor")
    state.step = int(meta[0])
    state.adam_g.t = int(meta[1])
    state.adam_d.t = int(meta[2])
    for holder, prefix in ((state.adam_g, "ADAM_G"), (state.adam_d, "ADAM_D")):
        for i in range(len(holder.m)):
            holder.m[i] = tensors[f"{prefix}.m.{i}"].reshape(holder.m[i].shape).copy()
            holder.v[i] = tensors[f"{prefix}.v.{i}"].reshape(holder.v[i].shape).copy()
    return state


def train(config, resume_from=None, log_every=2000):
    """Run the loop for config.steps steps; returns (state, history).

    With an output directory set, writes metrics.jsonl (one JSON object per
    step) and step_<k>.ckpt checkpoints every checkpoint_every steps plus at
    the final step.  A non-finite loss aborts with TrainingDiverged; already
    written checkpoints are kept.
    """
    config.validate()
    if resume_from is not None:
        state = load_state(resume_from, config)
    else:
        state = init_train_state(config)

    out_dir = Path(config.out_dir) if config.out_dir else None
    metrics_fh = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        mode = "a" if resume_from is not None else "w"
        metrics_fh = open(out_dir / "metrics.jsonl", mode)

    history = []
    try:
        while state.step < config.steps:
            batch = sample_batch(state.spec, config.batch_size,
                                 _step_rng(config.seed, PHASE_BATCH, state.step + 1))
            diag = train_step(state, batch, config)
            history.append(diag)
            if metrics_fh is not None:
                metrics_fh.write(json.dumps(diag) + "\n")
            if state.step % log_every == 0 or state.step == config.steps:
                log.info("step %d: L_data=%.4f L_g=%.4f dl=%.4f",
                         state.step, diag["L_data"], diag["L_g"], diag["dl"])
            if out_dir is not None and (
                state.step % config.checkpoint_every == 0 or state.step == config.steps
            ):
                save_state(state, out_dir / f"step_{state.step}.ckpt")
    finally:
        if metrics_fh is not None:
            metrics_fh.close()
    return state, history
