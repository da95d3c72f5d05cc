"""Verification suite: every check pairs an implementation path with an
independent oracle (central finite differences, closed-form moments,
high-precision iterative matrix square roots, hand-evaluated recurrences).

`run_all_checks` backs the `check` CLI command; individual checks are reused
by the test suite at the same thresholds.
"""

from __future__ import annotations

import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import evaluate
from .aiw import DistanceStats, aiw_weights, distance_stats, is_estimate, raw_weight
from .models import Mlp, discriminator_forward, generator_forward, init_discriminator, init_embedding, init_generator, embedding_forward
from .mst import HopTrace, data_loss, mst_generator_loss, rollout
from .optim import AdamState, adam_step
from .synthdata import make_domain_spec, oracle_translate, sample_batch
from .training import TrainConfig, init_train_state, save_state, train


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    direction: str = "<="
    detail: str = ""

    def to_dict(self):
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "value": float(self.value),
            "threshold": float(self.threshold),
            "direction": self.direction,
            "detail": self.detail,
        }


def _result(name, value, threshold, direction="<=", detail=""):
    if direction == "<=":
        passed = value <= threshold
    else:
        passed = value >= threshold
    return CheckResult(name=name, passed=passed, value=float(value),
                       threshold=float(threshold), direction=direction, detail=detail)


# ---------------------------------------------------------------------------
# finite-difference oracle

def finite_difference_gradient(fn, array, step=1e-5):
    """Central finite differences of a scalar function w.r.t. `array` (in place)."""
    grad = np.zeros_like(array)
    flat = array.reshape(-1)
    flat_grad = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = fn()
        flat[i] = orig - step
        down = fn()
        flat[i] = orig
        flat_grad[i] = (up - down) / (2.0 * step)
    return grad


def max_rel_err(a, b, floor=1e-6):
    """max_i |a_i - b_i| / max(floor, |a_i|, |b_i|)."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    denom = np.maximum(floor, np.maximum(np.abs(a), np.abs(b)))
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


def _gradcheck(build, rng, step=1e-5):
    """Compare autodiff and finite-difference gradients for one case.

    `build(rng)` returns (params, forward) with float64 parameter tensors and
    a closure rebuilding the scalar loss from current parameter values.
    """
    params, forward = build(rng)
    auto = ad.gradients(forward(), params)
    worst = 0.0
    for p, g in zip(params, auto):
        fd = finite_difference_gradient(lambda: forward().item(), p.data, step=step)
        worst = max(worst, max_rel_err(g, fd))
    return worst


def _p64(rng, shape, kind="normal"):
    if kind == "normal":
        data = rng.standard_normal(shape)
    elif kind == "positive":
        data = rng.uniform(0.1, 2.5, size=shape)
    elif kind == "kink_free":
        data = rng.uniform(0.2, 1.5, size=shape) * rng.choice([-1.0, 1.0], size=shape)
    else:
        raise ValueError(kind)
    return ad.parameter(np.asarray(data, dtype=np.float64))


def _op_cases():
    """One gradcheck builder per differentiable op (resolved via the module
    namespace, so a broken backward rule injected there is caught)."""

    def unary(op_name, kind="normal"):
        def build(rng):
            x = _p64(rng, (3, 4), kind)
            return [x], lambda: ad.tsum(getattr(ad, op_name)(x))
        return build

    def case_matmul(rng):
        a = _p64(rng, (3, 4))
        b = _p64(rng, (4, 2))
        return [a, b], lambda: ad.tsum(ad.tanh(ad.matmul(a, b)))

    def case_linear(rng):
        x = _p64(rng, (3, 4))
        w = _p64(rng, (4, 2))
        b = _p64(rng, (2,))
        return [x, w, b], lambda: ad.tsum(ad.tanh(ad.linear(x, w, b)))

    def case_add(rng):
        a = _p64(rng, (3, 4))
        b = _p64(rng, (1, 4))  # broadcast
        return [a, b], lambda: ad.tsum(ad.tanh(ad.add(a, b)))

    def case_sub(rng):
        a = _p64(rng, (3, 4))
        b = _p64(rng, (3, 4))
        return [a, b], lambda: ad.tsum(ad.sigmoid(ad.sub(a, b)))

    def case_mul(rng):
        a = _p64(rng, (3, 4))
        b = _p64(rng, (3, 4))
        return [a, b], lambda: ad.tsum(ad.mul(ad.mul(a, b), 0.7))

    def case_mean(rng):
        x = _p64(rng, (4, 3))
        return [x], lambda: ad.tmean(ad.mul(x, x))

    def case_sum_axis(rng):
        x = _p64(rng, (4, 3))
        return [x], lambda: ad.tsum(ad.tanh(ad.tsum(x, axis=0)))

    def case_mean_axis(rng):
        x = _p64(rng, (4, 3))
        return [x], lambda: ad.tsum(ad.tanh(ad.tmean(x, axis=1)))

    def case_l2_norm(rng):
        x = _p64(rng, (3, 4))
        return [x], lambda: ad.tsum(ad.l2_norm(x, axis=1))

    def case_l2_norm_full(rng):
        x = _p64(rng, (5,))
        return [x], lambda: ad.l2_norm(x)

    def case_concat(rng):
        a = _p64(rng, (3, 2))
        b = _p64(rng, (3, 3))
        return [a, b], lambda: ad.tsum(ad.tanh(ad.concatenate([a, b], axis=1)))

    def case_row_slice(rng):
        x = _p64(rng, (5, 3))
        return [x], lambda: ad.tsum(ad.tanh(ad.row_slice(x, 1, 4)))

    def case_reshape(rng):
        x = _p64(rng, (4, 3))
        return [x], lambda: ad.tsum(ad.tanh(ad.reshape(x, (2, 6))))

    return {
        "matmul": case_matmul,
        "linear": case_linear,
        "add": case_add,
        "sub": case_sub,
        "mul": case_mul,
        "exp": unary("exp"),
        "log": unary("log", kind="positive"),
        "tanh": unary("tanh"),
        "sigmoid": unary("sigmoid"),
        "relu": unary("relu", kind="kink_free"),
        "softplus": unary("softplus"),
        "abs": unary("absolute", kind="kink_free"),
        "sum": unary("tsum"),
        "sum_axis": case_sum_axis,
        "mean": case_mean,
        "mean_axis": case_mean_axis,
        "l2_norm": case_l2_norm,
        "l2_norm_full": case_l2_norm_full,
        "concatenate": case_concat,
        "row_slice": case_row_slice,
        "reshape": case_reshape,
    }


def check_op_gradients(draws=20, seed=0, tol=1e-4):
    """Every op's backward vs central finite differences, float64."""
    worst = 0.0
    worst_name = ""
    for name, build in _op_cases().items():
        for k in range(draws):
            rng = np.random.default_rng(np.random.SeedSequence([seed, 70, k]))
            err = _gradcheck(build, rng)
            if err > worst:
                worst, worst_name = err, name
    return _result("gradcheck_ops", worst, tol, detail=f"worst op: {worst_name}")


def _tiny_models64(rng, d=4, n=2, hidden=5, depth=2):
    gen = init_generator(d, n, rng, hidden=hidden, depth=depth)
    disc = init_discriminator(d, n, rng, hidden=hidden, depth=depth)
    for p in gen.parameters() + disc.parameters():
        p.data = p.data.astype(np.float64)
    return gen, disc


def check_loss_gradients(seed=0, tol=1e-4, batch=3, hops=2):
    """Full L_data and multi-hop L_g gradients vs finite differences."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 71, 0]))
    d, n = 4, 2
    gen, disc = _tiny_models64(rng, d=d, n=n)
    x = ad.constant(rng.standard_normal((batch, d)))
    src_attrs = ad.constant(rng.integers(0, 2, size=(batch, n)).astype(np.float64))
    attr_seqs = [
        [rng.integers(0, 2, size=(batch, n)).astype(np.float64) for _ in range(k + 1)]
        for k in range(hops)
    ]
    weights = rng.uniform(0.5, 2.0, size=batch)

    def loss_data():
        return data_loss(disc, x, src_attrs)

    def loss_gen():
        traces = [rollout(gen, x, seq) for seq in attr_seqs]
        return mst_generator_loss(disc, traces, weights)

    worst = 0.0
    for fn, params in ((loss_data, disc.parameters()),
                       (loss_gen, gen.parameters() + disc.parameters())):
        auto = ad.gradients(fn(), params)
        for p, g in zip(params, auto):
            fd = finite_difference_gradient(lambda: fn().item(), p.data)
            worst = max(worst, max_rel_err(g, fd))
    return _result("gradcheck_losses", worst, tol)


def check_adam_recurrence(tol=1e-9):
    """First Adam step against the hand-evaluated update for grad=4, lr=1e-4."""
    p = ad.parameter(np.asarray([1.0], dtype=np.float64))
    state = AdamState.for_params([p], lr=1e-4, beta1=0.5, beta2=0.999, eps=1e-8)
    adam_step(state, [p], [np.asarray([4.0])])
    # m_hat = 4, sqrt(v_hat) = 4 -> delta = -lr * 4 / (4 + eps)
    expected = 1.0 - 1e-4 * 4.0 / (4.0 + 1e-8)
    return _result("adam_recurrence", abs(float(p.data[0]) - expected), tol)


# ---------------------------------------------------------------------------
# importance sampling (normal target/proposal pair)

def _normal_pdf(mean, std):
    norm = 1.0 / (std * np.sqrt(2.0 * np.pi))
    return lambda x: norm * np.exp(-0.5 * ((x - mean) / std) ** 2)


def _normal_sampler(mean, std):
    return lambda rng, size: mean + std * rng.standard_normal(size)


# high-precision references for the standard normal: E[x^2] and P(x > 1)
NORMAL_SECOND_MOMENT = 1.0
NORMAL_TAIL_ABOVE_1 = 0.15865525393145707


def check_is_moment(n=10**6, seed=0, tol=0.02):
    """E_p[x^2] for p=N(0,1) estimated through q=N(0,4); oracle is exact."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 72, 0]))
    est = is_estimate(_normal_pdf(0.0, 1.0), _normal_pdf(0.0, 2.0),
                      lambda x: x * x, n, rng, _normal_sampler(0.0, 2.0))
    err = abs(est.value - NORMAL_SECOND_MOMENT) / NORMAL_SECOND_MOMENT
    return _result("is_moment", err, tol,
                   detail=f"estimate {est.value:.6f}, ess {est.effective_sample_size:.0f}")


def check_is_tail(n=10**6, seed=0, tol=0.03):
    """P_p(x > 1) through the same proposal; oracle from the normal tail."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 72, 1]))
    est = is_estimate(_normal_pdf(0.0, 1.0), _normal_pdf(0.0, 2.0),
                      lambda x: (x > 1.0).astype(np.float64), n, rng,
                      _normal_sampler(0.0, 2.0))
    err = abs(est.value - NORMAL_TAIL_ABOVE_1) / NORMAL_TAIL_ABOVE_1
    return _result("is_tail", err, tol, detail=f"estimate {est.value:.6f}")


def check_is_unbiased(reps=200, n=10**4, seed=0, tol=3.0):
    """Repeated-run bias of the moment estimate within `tol` standard errors."""
    values = []
    for k in range(reps):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 73, k]))
        est = is_estimate(_normal_pdf(0.0, 1.0), _normal_pdf(0.0, 2.0),
                          lambda x: x * x, n, rng, _normal_sampler(0.0, 2.0))
        values.append(est.value)
    values = np.asarray(values)
    stderr = values.std(ddof=1) / np.sqrt(reps)
    z = abs(values.mean() - 1.0) / stderr
    return _result("is_unbiased", z, tol, detail=f"mean {values.mean():.5f}, se {stderr:.5f}")


# ---------------------------------------------------------------------------
# optimal-discriminator oracle

def train_two_gaussian_discriminator(seed=0, steps=4000, batch=512, lr=1e-3, hidden=32):
    """Train a logit-output MLP to separate N(0,1) (real) from N(1,1) (fake)."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 74, 0]))
    net = Mlp()
    widths = [1, hidden, hidden, 1]
    last = len(widths) - 2
    for i, (fi, fo) in enumerate(zip(widths[:-1], widths[1:])):
        scale = np.sqrt(1.0 / fi) if i == last else np.sqrt(2.0 / fi)
        net.weights.append(ad.parameter((rng.standard_normal((fi, fo)) * scale).astype(np.float32)))
        net.biases.append(ad.parameter(np.zeros(fo, dtype=np.float32)))
    params = net.parameters()
    state = AdamState.for_params(params, lr=lr, beta1=0.9, beta2=0.999)
    for step in range(steps):
        step_rng = np.random.default_rng(np.random.SeedSequence([seed, 75, step]))
        real = ad.constant(step_rng.standard_normal((batch, 1)).astype(np.float32))
        fake = ad.constant((1.0 + step_rng.standard_normal((batch, 1))).astype(np.float32))
        z_real = net.forward(real)
        z_fake = net.forward(fake)
        loss = ad.add(ad.tmean(ad.softplus(ad.mul(z_real, -1.0))),
                      ad.tmean(ad.softplus(z_fake)))
        adam_step(state, params, ad.gradients(loss, params))
    return net


def check_optimal_discriminator(seed=0, steps=4000, tol=0.15):
    """Median |e^logit / (p_data/p_g) - 1| on a grid after training to
    convergence; for these Gaussians the exact log-ratio is 0.5 - x."""
    net = train_two_gaussian_discriminator(seed=seed, steps=steps)
    grid = np.linspace(-2.0, 3.0, 101)
    logits = net.forward_np(grid.reshape(-1, 1)).ravel().astype(np.float64)
    true_log_ratio = 0.5 - grid
    err = np.abs(np.exp(logits - true_log_ratio) - 1.0)
    return _result("optimal_discriminator", float(np.median(err)), tol,
                   detail=f"max {err.max():.3f}")


# ---------------------------------------------------------------------------
# distance statistics and AIW

def check_distance_bounds(batches=10**4, seed=0, k=6, m=5, radius=1.3):
    """dl_p, dl_n in [0, 2r] and dl in [-2r, 2r] over random sphere batches."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 76, 0]))
    violations = 0
    lim = 2.0 * radius
    slack = 1e-9
    for _ in range(batches):
        src = rng.standard_normal((k, m))
        gen = rng.standard_normal((k, m))
        src *= radius / np.linalg.norm(src, axis=1, keepdims=True)
        gen *= radius / np.linalg.norm(gen, axis=1, keepdims=True)
        stats = distance_stats(src, gen, radius=radius)
        ok = (-slack <= stats.dl_pos <= lim + slack
              and -slack <= stats.dl_neg <= lim + slack
              and -lim - slack <= stats.dl <= lim + slack
              and np.all(stats.matrix >= -slack) and np.all(stats.matrix <= lim + slack))
        violations += 0 if ok else 1
    return _result("distance_bounds", violations, 0, detail=f"{batches} batches")


def check_distance_examples(tol=1e-12):
    """Three analytic cases: orthogonal pair, all-identical, antipodal."""
    e1 = distance_stats([[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]])
    e2 = distance_stats([[1.0, 0.0], [1.0, 0.0]], [[1.0, 0.0], [1.0, 0.0]])
    e3 = distance_stats([[1.0, 0.0], [-1.0, 0.0]], [[-1.0, 0.0], [1.0, 0.0]])
    errs = [
        abs(e1.dl_pos - 0.0), abs(e1.dl_neg - np.sqrt(2.0)), abs(e1.dl - np.sqrt(2.0)),
        abs(e2.dl_pos), abs(e2.dl_neg), abs(e2.dl),
        abs(e3.dl_pos - 2.0), abs(e3.dl_neg - 0.0), abs(e3.dl + 2.0),
    ]
    return _result("distance_examples", max(errs), tol)


def check_aiw_examples(tol=1e-6):
    """Direct substitutions into the weighting formula."""
    errs = []
    # logit 0 -> weight 1; logit ln 3 -> weight 3; density ratio 2 -> weight 2
    errs.append(abs(raw_weight(0.0) - 1.0))
    errs.append(abs(raw_weight(np.log(3.0)) - 3.0))
    errs.append(abs(raw_weight(np.log(2.0)) - 2.0))

    def stats_with(dl, radius=1.0):
        return DistanceStats(matrix=np.zeros((2, 2)), dl_pos=0.0, dl_neg=dl,
                             dl=dl, dl_star=2.0 * radius)

    # dl at its optimum 2r collapses the scale factor
    report = aiw_weights(np.array([0.3, -0.7]), stats_with(2.0), self_normalize=False)
    errs.append(abs(report.scale - 1.0))
    errs.append(float(np.max(np.abs(report.weights - np.exp(np.array([0.3, -0.7]))))))
    # r=1, dl=1, logit 0 -> s = 4, weight 4
    report = aiw_weights(np.array([0.0, 0.0]), stats_with(1.0), self_normalize=False)
    errs.append(abs(report.scale - 4.0))
    errs.append(float(np.max(np.abs(report.weights - 4.0))))
    # self-normalization: logits {0, ln 3} with s=1 -> weights {0.5, 1.5}
    report = aiw_weights(np.array([0.0, np.log(3.0)]), stats_with(2.0), self_normalize=True)
    errs.append(float(np.max(np.abs(report.weights - np.array([0.5, 1.5])))))
    return _result("aiw_examples", max(errs), tol)


def check_aiw_detached(seed=0, tol=1e-12):
    """Weighted-loss parameter gradients equal those with weights frozen to
    constants: no gradient may flow through the weight factors."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 77, 0]))
    d, n, batch = 4, 2, 5
    gen, disc = _tiny_models64(rng, d=d, n=n)
    phi = init_embedding(d, n, rng, hidden=6, depth=1, width=4)
    x = ad.constant(rng.standard_normal((batch, d)))
    targets = rng.integers(0, 2, size=(batch, n)).astype(np.float64)

    def build_loss(weights_override=None):
        trace = rollout(gen, x, [targets])
        logits = discriminator_forward(disc, trace.images[0], ad.constant(targets))
        if weights_override is None:
            stats = distance_stats(
                embedding_forward(phi, x.data.astype(np.float32)),
                embedding_forward(phi, trace.images[0].data.astype(np.float32)),
            )
            weights = aiw_weights(logits.data.ravel(), stats).weights
        else:
            weights = weights_override
        return mst_generator_loss(disc, [trace], weights), weights

    loss_live, weights = build_loss()
    params = gen.parameters() + disc.parameters()
    grads_live = ad.gradients(loss_live, params)
    loss_frozen, _ = build_loss(weights_override=weights.copy())
    grads_frozen = ad.gradients(loss_frozen, params)
    worst = max(float(np.max(np.abs(a - b))) for a, b in zip(grads_live, grads_frozen))
    return _result("aiw_detached", worst, tol)


# ---------------------------------------------------------------------------
# multi-hop losses

def check_mst_reduction(draws=100, seed=0, tol=1e-6):
    """N=1 multi-hop loss equals the plain single-hop weighted loss."""
    worst = 0.0
    for k in range(draws):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 78, k]))
        d, n, batch = 4, 2, 4
        gen, disc = _tiny_models64(rng, d=d, n=n)
        x = ad.constant(rng.standard_normal((batch, d)))
        targets = rng.integers(0, 2, size=(batch, n)).astype(np.float64)
        weights = rng.uniform(0.2, 3.0, size=batch)
        trace = rollout(gen, x, [targets])
        loss = mst_generator_loss(disc, [trace], weights)
        # independent single-hop evaluation: mean(w * log(1 - sigmoid(logit)))
        logits = discriminator_forward(disc, trace.images[0], ad.constant(targets))
        log_one_minus = np.log1p(-1.0 / (1.0 + np.exp(-logits.data.ravel())))
        direct = float(np.mean(weights * log_one_minus))
        worst = max(worst, abs(loss.item() - direct))
    return _result("mst_reduction", worst, tol)


def check_mst_hop_gradients(seed=0, threshold=1e-6):
    """2-hop gradients must include the path through the intermediate image:
    detaching it changes the generator gradient."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 79, 0]))
    d, n, batch = 4, 2, 4
    gen, disc = _tiny_models64(rng, d=d, n=n)
    x = ad.constant(rng.standard_normal((batch, d)))
    seq = [rng.integers(0, 2, size=(batch, n)).astype(np.float64) for _ in range(2)]
    weights = np.ones(batch)

    trace = rollout(gen, x, seq)
    full = ad.gradients(mst_generator_loss(disc, [rollout(gen, x, seq[:1]), trace], weights),
                        gen.parameters())

    hop1 = generator_forward(gen, x, seq[0])
    hop2 = generator_forward(gen, hop1.detach(), seq[1])
    detached_trace = HopTrace(source=x, attrs=seq, images=[hop1.detach(), hop2])
    partial = ad.gradients(
        mst_generator_loss(disc, [rollout(gen, x, seq[:1]), detached_trace], weights),
        gen.parameters())
    diff = max(float(np.max(np.abs(a - b))) for a, b in zip(full, partial))
    return _result("mst_hop_gradients", diff, threshold, direction=">=")


# ---------------------------------------------------------------------------
# evaluation metrics

def sqrtm_denman_beavers(matrix, iters=100, tol=1e-14):
    """Iterative principal square root (oracle for the Frechet metric)."""
    y = np.asarray(matrix, dtype=np.float64).copy()
    z = np.eye(y.shape[0])
    for _ in range(iters):
        y_next = 0.5 * (y + np.linalg.inv(z))
        z_next = 0.5 * (z + np.linalg.inv(y))
        delta = np.max(np.abs(y_next - y))
        y, z = y_next, z_next
        if delta < tol:
            break
    return y


def frechet_oracle(mu_a, cov_a, mu_b, cov_b):
    delta = np.asarray(mu_a) - np.asarray(mu_b)
    root = sqrtm_denman_beavers(np.asarray(cov_a) @ np.asarray(cov_b))
    return float(delta @ delta + np.trace(cov_a) + np.trace(cov_b) - 2.0 * np.trace(root))


def check_frechet_oracle(pairs=100, seed=0, tol=1e-6):
    """Eigendecomposition Frechet distance vs the iterative-root oracle."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 80, 0]))
    worst = 0.0
    for _ in range(pairs):
        dim = int(rng.integers(2, 9))
        mu_a = rng.standard_normal(dim)
        mu_b = rng.standard_normal(dim)
        ra = rng.standard_normal((dim, dim))
        rb = rng.standard_normal((dim, dim))
        cov_a = ra @ ra.T / dim + 0.1 * np.eye(dim)
        cov_b = rb @ rb.T / dim + 0.1 * np.eye(dim)
        mine = evaluate.frechet_from_moments(mu_a, cov_a, mu_b, cov_b)
        ref = frechet_oracle(mu_a, cov_a, mu_b, cov_b)
        worst = max(worst, abs(mine - ref) / max(1e-12, abs(ref)))
    return _result("frechet_oracle", worst, tol)


def check_frechet_examples(seed=0, tol=1e-8):
    """Identical sets -> 0; pure mean shift -> ||shift||^2; commuting diagonal case."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 81, 0]))
    pts = rng.standard_normal((64, 2))
    errs = [abs(evaluate.frechet_gaussian(pts, pts.copy()))]
    shifted = pts + np.array([3.0, 4.0])
    errs.append(abs(evaluate.frechet_gaussian(pts, shifted) - 25.0))
    # exact sample covariance I vs 4I, equal means -> Tr(I + 4I - 2*2I) = 2
    base = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]) * np.sqrt(1.5)
    errs.append(abs(evaluate.frechet_gaussian(base, 2.0 * base, eps=0.0) - 2.0))
    return _result("frechet_examples", max(errs), tol)


def check_transfer_oracle(seed=0, samples=512):
    """Noiseless oracle translations must classify to their target exactly."""
    spec = make_domain_spec(3, 8, 0.1, seed=seed)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 82, 0]))
    attrs = rng.integers(0, 2, size=(samples, spec.n))
    targets = rng.integers(0, 2, size=(samples, spec.n))
    x = spec.domain_mean(attrs)  # sigma = 0: points exactly at the domain means
    moved = oracle_translate(spec, x, attrs, targets)
    acc = evaluate.transfer_accuracy(spec, moved, targets)
    return _result("transfer_oracle", float(1.0 - acc.min()), 0.0)


def check_sphere_norm(seed=0, samples=10**4, tol=1e-5):
    """||phi(x)|| = r within relative tolerance for random inputs."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 83, 0]))
    phi = init_embedding(8, 3, rng, radius=1.7)
    x = rng.standard_normal((samples, 8)).astype(np.float32)
    norms = np.linalg.norm(embedding_forward(phi, x).astype(np.float64), axis=1)
    dev = float(np.max(np.abs(norms - phi.radius)) / phi.radius)
    return _result("sphere_norm", dev, tol)


def check_determinism(seed=0, steps=30):
    """Two identical tiny runs produce byte-identical checkpoints."""
    config = TrainConfig(n=2, d=4, batch_size=4, hops=2, steps=steps,
                         embed_steps=50, seed=seed, checkpoint_every=steps)
    blobs = []
    for _ in range(2):
        state, _ = train(config)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "state.ckpt"
            save_state(state, path)
            blobs.append(path.read_bytes())
    return _result("determinism", 0.0 if blobs[0] == blobs[1] else 1.0, 0.0)


def run_all_checks(seed=0):
    """Full verification battery; returns the list of CheckResults."""
    return [
        check_is_moment(seed=seed),
        check_is_tail(seed=seed),
        check_is_unbiased(seed=seed),
        check_optimal_discriminator(seed=seed),
        check_op_gradients(seed=seed),
        check_loss_gradients(seed=seed),
        check_adam_recurrence(),
        check_distance_bounds(seed=seed),
        check_distance_examples(),
        check_aiw_examples(),
        check_aiw_detached(seed=seed),
        check_mst_reduction(seed=seed),
        check_mst_hop_gradients(seed=seed),
        check_frechet_oracle(seed=seed),
        check_frechet_examples(seed=seed),
        check_transfer_oracle(seed=seed),
        check_sphere_norm(seed=seed),
        check_determinism(seed=seed),
    ]
