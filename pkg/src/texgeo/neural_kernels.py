"""Small closed-form numeric kernels: positional encoding, attention, VAE
loss terms, the straight-line flow-matching path, an Euler sampler, and a
tanh MLP with hand-written backprop for a 2D flow-matching demo."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonPositiveVariance, ShapeMismatch, TOutOfRange

KL_WEIGHT = 1e-3


def fourier_encode(points, n_frequencies: int) -> np.ndarray:
    """(K, 3) -> (K, 3 + 6n): [p, sin(2^0 pi p), cos(2^0 pi p), ..., sin(2^(n-1) pi p), cos(2^(n-1) pi p)]."""
    if n_frequencies < 0:
        raise ValueError("n_frequencies must be >= 0")
    p = np.asarray(points, dtype=np.float64)
    if p.ndim != 2 or p.shape[1] != 3:
        raise ShapeMismatch("points must be (K, 3)")
    parts = [p]
    for i in range(n_frequencies):
        a = (2.0 ** i) * math.pi * p
        parts += [np.sin(a), np.cos(a)]
    return np.concatenate(parts, axis=1)


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def sdpa(q, k, v, return_weights: bool = False):
    """softmax(Q K^T / sqrt(d)) V with row-max stabilization."""
    q, k, v = (np.asarray(a, dtype=np.float64) for a in (q, k, v))
    if q.ndim != 2 or k.ndim != 2 or v.ndim != 2:
        raise ShapeMismatch("Q, K, V must be 2-D")
    if q.shape[1] != k.shape[1]:
        raise ShapeMismatch(f"Q width {q.shape[1]} != K width {k.shape[1]}")
    if k.shape[0] != v.shape[0]:
        raise ShapeMismatch(f"K has {k.shape[0]} rows, V has {v.shape[0]}")
    if k.shape[0] == 0:
        raise ShapeMismatch("attention needs at least one key")
    w = softmax_rows(q @ k.T / math.sqrt(q.shape[1]))
    out = w @ v
    return (out, w) if return_weights else out


def multi_task_attention(z_sa, ref_qkv, mv_qkv, lam_ref: float, lam_mv: float) -> np.ndarray:
    """z_sa + lam_ref * sdpa(*ref_qkv) + lam_mv * sdpa(*mv_qkv)."""
    z = np.asarray(z_sa, dtype=np.float64)
    a_ref = sdpa(*ref_qkv)
    a_mv = sdpa(*mv_qkv)
    if a_ref.shape != z.shape or a_mv.shape != z.shape:
        raise ShapeMismatch(f"branch outputs {a_ref.shape}, {a_mv.shape} vs Z {z.shape}")
    return z + lam_ref * a_ref + lam_mv * a_mv


@dataclass(frozen=True, eq=False)
class LatentSequence:
    tokens: np.ndarray
    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        shapes = {np.shape(self.tokens), np.shape(self.mean), np.shape(self.variance)}
        if len(shapes) != 1:
            raise ShapeMismatch("tokens, mean and variance must share a shape")
        if np.any(np.asarray(self.variance) <= 0):
            raise NonPositiveVariance("variance must be strictly positive")


def kl_loss(mean, variance=None) -> float:
    """Mean over elements of KL(N(mu, s2) || N(0, 1)) = 0.5 (mu^2 + s2 - log s2 - 1).

    Accepts a LatentSequence or separate mean/variance arrays.
    """
    if isinstance(mean, LatentSequence):
        mean, variance = mean.mean, mean.variance
    mu = np.asarray(mean, dtype=np.float64)
    s2 = np.asarray(variance, dtype=np.float64)
    if mu.shape != s2.shape:
        raise ShapeMismatch("mean and variance shapes differ")
    if np.any(s2 <= 0):
        raise NonPositiveVariance("variance must be strictly positive")
    return float(0.5 * np.mean(mu * mu + s2 - np.log(s2) - 1.0))


def recon_loss(pred, true) -> float:
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(true, dtype=np.float64)
    if p.shape != t.shape:
        raise ShapeMismatch(f"pred {p.shape} vs true {t.shape}")
    return float(np.mean((p - t) ** 2))


def vae_loss(pred, true, seq, gamma: float = KL_WEIGHT) -> float:
    return recon_loss(pred, true) + gamma * kl_loss(seq)


@dataclass(frozen=True, eq=False)
class FlowBatch:
    x0: np.ndarray
    x1: np.ndarray
    t: np.ndarray
    x_t: np.ndarray
    u_t: np.ndarray
    c: np.ndarray


def flow_path(x0, x1, t, c=None) -> FlowBatch:
    """Straight-line path x_t = (1 - t) x0 + t x1 with velocity x1 - x0."""
    x0 = np.atleast_2d(np.asarray(x0, dtype=np.float64))
    x1 = np.atleast_2d(np.asarray(x1, dtype=np.float64))
    if x0.shape != x1.shape:
        raise ShapeMismatch(f"x0 {x0.shape} vs x1 {x1.shape}")
    b = x0.shape[0]
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), (b,)).copy() if np.ndim(t) == 0 \
        else np.asarray(t, dtype=np.float64).reshape(-1)
    if t.shape != (b,):
        raise ShapeMismatch(f"need one t per row, got {t.shape[0]} for {b}")
    if np.any(t < 0) or np.any(t > 1):
        raise TOutOfRange("t must lie in [0, 1]")
    c = np.zeros((b, 0)) if c is None else np.atleast_2d(np.asarray(c, dtype=np.float64))
    if c.shape[0] != b:
        raise ShapeMismatch("condition needs one row per sample")
    x_t = (1.0 - t)[:, None] * x0 + t[:, None] * x1
    return FlowBatch(x0, x1, t, x_t, x1 - x0, c)


@dataclass
class TinyMlp:
    """tanh hidden layers, linear output. ``weights[i]`` is (in, out)."""

    weights: list
    biases: list = field(default_factory=list)

    @classmethod
    def init(cls, sizes, seed=0) -> "TinyMlp":
        rng = np.random.default_rng(seed)
        ws, bs = [], []
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            ws.append(rng.normal(0.0, 1.0 / math.sqrt(n_in), size=(n_in, n_out)))
            bs.append(np.zeros(n_out))
        return cls(ws, bs)

    @property
    def n_in(self) -> int:
        return self.weights[0].shape[0]

    @property
    def n_out(self) -> int:
        return self.weights[-1].shape[1]

    def params(self) -> list:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "TinyMlp":
        return TinyMlp([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def forward(self, inp: np.ndarray):
        acts = [inp]
        h = inp
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.tanh(h)
            acts.append(h)
        return h, acts

    def __call__(self, x, c, t):
        return self.forward(model_input(x, c, t))[0]


def model_input(x, c, t) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    b = x.shape[0]
    c = np.zeros((b, 0)) if c is None else np.atleast_2d(np.asarray(c, dtype=np.float64))
    if c.shape[0] != b:
        c = np.broadcast_to(c, (b, c.shape[1]))
    t = np.broadcast_to(np.asarray(t, dtype=np.float64).reshape(-1, 1), (b, 1))
    return np.concatenate([x, c, t], axis=1)


def _check_model(model: TinyMlp, batch: FlowBatch):
    need = batch.x_t.shape[1] + batch.c.shape[1] + 1
    if model.n_in != need:
        raise ShapeMismatch(f"model takes {model.n_in} inputs, batch needs {need}")
    if model.n_out != batch.x_t.shape[1]:
        raise ShapeMismatch(f"model emits {model.n_out} values, batch has {batch.x_t.shape[1]}")


def flow_loss(model, batch: FlowBatch) -> float:
    """mean over rows of ||model(x_t, c, t) - u_t||^2. ``model`` may be any
    callable ``(x, c, t) -> (B, D)``."""
    if isinstance(model, TinyMlp):
        _check_model(model, batch)
    pred = np.asarray(model(batch.x_t, batch.c, batch.t), dtype=np.float64)
    if pred.shape != batch.u_t.shape:
        raise ShapeMismatch(f"model output {pred.shape} vs target {batch.u_t.shape}")
    return float(np.mean(np.sum((pred - batch.u_t) ** 2, axis=1)))


def flow_loss_grad(model: TinyMlp, batch: FlowBatch):
    """(loss, grads) with grads aligned to ``model.params()``."""
    _check_model(model, batch)
    out, acts = model.forward(model_input(batch.x_t, batch.c, batch.t))
    r = out - batch.u_t
    b = r.shape[0]
    loss = float(np.mean(np.sum(r * r, axis=1)))
    delta = 2.0 * r / b
    grads_w, grads_b = [], []
    for i in range(len(model.weights) - 1, -1, -1):
        grads_w.append(acts[i].T @ delta)
        grads_b.append(delta.sum(axis=0))
        if i > 0:
            delta = (delta @ model.weights[i].T) * (1.0 - acts[i] ** 2)
    grads = []
    for gw, gb in zip(reversed(grads_w), reversed(grads_b)):
        grads += [gw, gb]
    return loss, grads


def mlp_train_step(model: TinyMlp, batch: FlowBatch, lr: float):
    """One full-batch gradient step; returns (new model, loss before the step)."""
    loss, grads = flow_loss_grad(model, batch)
    new = model.copy()
    for p, g in zip(new.params(), grads):
        p -= lr * g
    return new, loss


def gradient_check(model: TinyMlp, batch: FlowBatch, eps: float = 1e-5, floor: float = 1e-8) -> float:
    """Largest |analytic - central difference| / max(|analytic| + |numeric|, floor) over all parameters."""
    _, grads = flow_loss_grad(model, batch)
    probe = model.copy()
    worst = 0.0
    for p, g in zip(probe.params(), grads):
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for j in range(flat.size):
            keep = flat[j]
            flat[j] = keep + eps
            up = flow_loss(probe, batch)
            flat[j] = keep - eps
            dn = flow_loss(probe, batch)
            flat[j] = keep
            num = (up - dn) / (2 * eps)
            err = abs(gflat[j] - num) / max(abs(gflat[j]) + abs(num), floor)
            worst = max(worst, err)
    return worst


def euler_sample(model, x0, c=None, steps: int = 8) -> np.ndarray:
    """x <- x + (1/S) model(x, c, i/S) for i = 0..S-1."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x = np.array(x0, dtype=np.float64)
    h = 1.0 / steps
    for i in range(steps):
        x = x + h * np.asarray(model(x, c, i / steps))
    return x


@dataclass
class FlowDemoResult:
    losses: list
    initial_loss: float
    final_loss: float
    endpoint_mean: list
    endpoint_std: list
    grad_check: float
    model: TinyMlp


def flow_demo(steps: int = 500, lr: float = 0.05, seed=1, batch_size: int = 256,
              hidden: int = 32, shift=(3.0, 0.0), n_eval: int = 10_000,
              euler_steps: int = 8) -> FlowDemoResult:
    """Learn the constant field carrying N(0, I) onto N(shift, I) when each
    x1 is paired with its own x0, then push fresh noise through Euler."""
    ss = np.random.SeedSequence(seed)
    s_init, s_data, s_eval = ss.spawn(3)
    rng = np.random.default_rng(s_data)
    shift = np.asarray(shift, dtype=np.float64)
    d = shift.size
    x0 = rng.standard_normal((batch_size, d))
    batch = flow_path(x0, x0 + shift, rng.random(batch_size))
    model = TinyMlp.init([d + 1, hidden, hidden, d], np.random.default_rng(s_init))
    gcheck = gradient_check(TinyMlp.init([d + 1, 8, d], np.random.default_rng(s_init)),
                            flow_path(x0[:16], x0[:16] + shift, batch.t[:16]))
    losses = []
    for _ in range(steps):
        model, loss = mlp_train_step(model, batch, lr)
        losses.append(loss)
    final = flow_loss(model, batch)
    z = np.random.default_rng(s_eval).standard_normal((n_eval, d))
    x1_hat = euler_sample(model, z, None, euler_steps)
    return FlowDemoResult(losses, losses[0] if losses else final, final,
                          x1_hat.mean(axis=0).tolist(), x1_hat.std(axis=0).tolist(),
                          gcheck, model)
