"""Small WGAN-GP over expectation vectors, in plain numpy.

Both networks are input -> 64 -> 128 -> output with leaky-rectifier hidden
units (slope 0.2). The generator ends in tanh so samples stay inside (-1, 1);
the critic output is linear. Because the hidden activation is piecewise
linear, the input-gradient of the critic is linear in each weight matrix given
the activation masks, which makes the gradient-penalty backward pass exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .observables import ExpectationVector, ObservableSet
from .optim import AdamHyper, AdamState, adam_step

LEAK = 0.2


@dataclass
class MLP:
    weights: list  # W_l with shape (out, in)
    biases: list
    output: str = "identity"  # or "tanh"

    def __post_init__(self):
        if self.output not in ("identity", "tanh"):
            raise ValueError(f"unknown output activation {self.output!r}")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need matching, non-empty weight and bias lists")
        for w, b in zip(self.weights, self.biases):
            if w.shape[0] != b.shape[0]:
                raise ValueError("bias size does not match weight rows")
        for w_prev, w in zip(self.weights, self.weights[1:]):
            if w.shape[1] != w_prev.shape[0]:
                raise ValueError("layer shapes do not chain")

    @classmethod
    def init(cls, sizes: Sequence[int], rng: np.random.Generator, output: str = "identity") -> "MLP":
        """Glorot-uniform weights, zero biases."""
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases, output)

    @property
    def sizes(self) -> list:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    def params(self) -> list:
        return list(self.weights) + list(self.biases)

    def set_params(self, params: list) -> None:
        n = len(self.weights)
        self.weights = list(params[:n])
        self.biases = list(params[n:])

    def copy(self) -> "MLP":
        return MLP([w.copy() for w in self.weights], [b.copy() for b in self.biases], self.output)

    def to_json(self) -> str:
        return json.dumps({
            "sizes": self.sizes,
            "output": self.output,
            "weights": [w.reshape(-1).tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "MLP":
        data = json.loads(text)
        sizes = data["sizes"]
        weights = [
            np.array(w, dtype=float).reshape(fan_out, fan_in)
            for w, fan_in, fan_out in zip(data["weights"], sizes[:-1], sizes[1:])
        ]
        return cls(weights, [np.array(b, dtype=float) for b in data["biases"]], data["output"])


def _leaky(z):
    return np.where(z > 0, z, LEAK * z)


def _leaky_slope(z):
    return np.where(z > 0, 1.0, LEAK)


def _forward(net: MLP, x: np.ndarray):
    """Batch forward; returns (output, activations, hidden slopes)."""
    acts = [x]
    slopes = []
    a = x
    last = len(net.weights) - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T + b
        if l < last:
            slopes.append(_leaky_slope(z))
            a = _leaky(z)
        else:
            a = np.tanh(z) if net.output == "tanh" else z
        acts.append(a)
    return a, acts, slopes


def mlp_forward(net: MLP, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out, _, _ = _forward(net, np.atleast_2d(x))
    return out[0] if x.ndim == 1 else out


def _backward(net: MLP, acts, slopes, d_out):
    """Gradients of sum(d_out * output) w.r.t. weights, biases and input."""
    delta = d_out
    if net.output == "tanh":
        delta = delta * (1.0 - acts[-1] ** 2)
    d_w = [None] * len(net.weights)
    d_b = [None] * len(net.weights)
    for l in range(len(net.weights) - 1, -1, -1):
        d_w[l] = delta.T @ acts[l]
        d_b[l] = delta.sum(axis=0)
        delta = delta @ net.weights[l]
        if l > 0:
            delta = delta * slopes[l - 1]
    return d_w, d_b, delta


def critic_input_gradient(critic: MLP, x) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out, acts, slopes = _forward(critic, x)
    return _backward(critic, acts, slopes, np.ones_like(out))[2]


def gradient_penalty(critic: MLP, real_batch, fake_batch, rng: np.random.Generator, gp_lambda: float = 10.0, eps=None):
    """lambda * mean_b (||grad_x D(x_hat_b)|| - 1)^2 on x_hat = e*real + (1-e)*fake.

    Returns (penalty, (dW list, db list)). ``eps`` overrides the per-sample
    mixing weights, otherwise they are drawn uniformly from ``rng``.
    """
    real = np.atleast_2d(np.asarray(real_batch, dtype=float))
    fake = np.atleast_2d(np.asarray(fake_batch, dtype=float))
    if real.shape != fake.shape or real.shape[1] != critic.sizes[0]:
        raise ValueError("batch shapes must match each other and the critic input")
    if critic.sizes[-1] != 1:
        raise ValueError("critic must have a scalar output")
    batch = real.shape[0]
    if eps is None:
        eps = rng.uniform(size=(batch, 1))
    eps = np.asarray(eps, dtype=float).reshape(batch, 1)
    x_hat = eps * real + (1.0 - eps) * fake

    _, _, slopes = _forward(critic, x_hat)
    ws = critic.weights
    n_layers = len(ws)
    if n_layers == 1:
        v = np.repeat(ws[0], batch, axis=0)
        norm = np.linalg.norm(v, axis=1)
        penalty = float(gp_lambda * np.mean((norm - 1.0) ** 2))
        safe = np.where(norm > 0, norm, 1.0)
        u = (2.0 * gp_lambda / batch) * ((norm - 1.0) / safe)[:, None] * v
        return penalty, ([u.sum(axis=0, keepdims=True)], [np.zeros_like(critic.biases[0])])
    # h[l] = d grad / d (pre-activation of hidden layer l), built top-down
    h = [None] * (n_layers - 1)
    h[-1] = slopes[-1] * ws[-1][0]
    for l in range(n_layers - 3, -1, -1):
        h[l] = slopes[l] * (h[l + 1] @ ws[l + 1])
    v = h[0] @ ws[0]
    norm = np.linalg.norm(v, axis=1)
    penalty = float(gp_lambda * np.mean((norm - 1.0) ** 2))

    safe = np.where(norm > 0, norm, 1.0)
    u = (2.0 * gp_lambda / batch) * ((norm - 1.0) / safe)[:, None] * v
    d_w = [None] * n_layers
    d_w[0] = h[0].T @ u
    g = u @ ws[0].T
    for l in range(n_layers - 2):
        t = slopes[l] * g
        d_w[l + 1] = h[l + 1].T @ t
        g = t @ ws[l + 1].T
    t = slopes[-1] * g
    d_w[-1] = t.sum(axis=0, keepdims=True)
    d_b = [np.zeros_like(b) for b in critic.biases]
    return penalty, (d_w, d_b)


def critic_loss_and_grads(critic: MLP, real, fake, rng, gp_lambda: float, eps=None):
    """mean D(fake) - mean D(real) + penalty, with gradients w.r.t. critic params."""
    real = np.atleast_2d(real)
    fake = np.atleast_2d(fake)
    batch = real.shape[0]
    both = np.vstack([real, fake])
    out, acts, slopes = _forward(critic, both)
    d_out = np.concatenate([np.full(batch, -1.0 / batch), np.full(fake.shape[0], 1.0 / fake.shape[0])])[:, None]
    d_w, d_b, _ = _backward(critic, acts, slopes, d_out)
    wdist = float(out[:batch].mean() - out[batch:].mean())
    penalty, (gw, gb) = gradient_penalty(critic, real, fake, rng, gp_lambda, eps)
    grads = [a + b for a, b in zip(d_w + d_b, gw + gb)]
    return -wdist + penalty, grads, penalty


def generator_loss_and_grads(generator: MLP, critic: MLP, z):
    """-mean D(G(z)) and its gradients w.r.t. generator params."""
    fake, g_acts, g_slopes = _forward(generator, z)
    out, c_acts, c_slopes = _forward(critic, fake)
    batch = z.shape[0]
    _, _, d_fake = _backward(critic, c_acts, c_slopes, np.full_like(out, -1.0 / batch))
    d_w, d_b, _ = _backward(generator, g_acts, g_slopes, d_fake)
    return float(-out.mean()), d_w + d_b


@dataclass(frozen=True)
class WGANConfig:
    latent_dim: int = 16
    hidden: tuple = (64, 128)
    gp_lambda: float = 10.0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7
    batch_size: int = 64
    critic_steps: int = 5
    generator_steps: int = 3000
    seed: int = 0

    def __post_init__(self):
        if self.gp_lambda < 0:
            raise ValueError("gp_lambda must be >= 0")
        if min(self.latent_dim, self.batch_size, self.critic_steps, self.generator_steps) < 1:
            raise ValueError("latent_dim, batch_size, critic_steps and generator_steps must be >= 1")

    @property
    def hyper(self) -> AdamHyper:
        return AdamHyper(self.learning_rate, self.beta1, self.beta2, self.eps)


@dataclass
class WGANHistory:
    critic_loss: list = field(default_factory=list)
    generator_loss: list = field(default_factory=list)
    penalty: list = field(default_factory=list)


def _as_matrix(samples) -> np.ndarray:
    rows = [s.values if isinstance(s, ExpectationVector) else np.asarray(s, dtype=float) for s in samples]
    if not rows:
        raise ValueError("no training samples")
    if len({r.shape for r in rows}) != 1:
        raise ValueError("training vectors differ in width")
    return np.stack(rows)


def train_wgan(samples, cfg: WGANConfig, callback=None):
    """Alternate ``critic_steps`` critic updates with one generator update.

    Returns (generator, critic, history); deterministic for a given ``cfg.seed``.
    ``callback(step, generator, critic)`` runs after every generator update.
    """
    data = _as_matrix(samples)
    if data.shape[0] < cfg.batch_size:
        raise ValueError(f"need at least batch_size={cfg.batch_size} samples, got {data.shape[0]}")
    width = data.shape[1]
    rng = np.random.default_rng(cfg.seed)
    generator = MLP.init([cfg.latent_dim, *cfg.hidden, width], rng, output="tanh")
    critic = MLP.init([width, *cfg.hidden, 1], rng)
    g_state = [AdamState.zeros_like(p) for p in generator.params()]
    c_state = [AdamState.zeros_like(p) for p in critic.params()]
    hyper = cfg.hyper
    history = WGANHistory()

    for step in range(cfg.generator_steps):
        for _ in range(cfg.critic_steps):
            real = data[rng.choice(data.shape[0], cfg.batch_size, replace=False)]
            z = rng.standard_normal((cfg.batch_size, cfg.latent_dim))
            fake = mlp_forward(generator, z)
            loss, grads, penalty = critic_loss_and_grads(critic, real, fake, rng, cfg.gp_lambda)
            new = []
            for i, (p, g) in enumerate(zip(critic.params(), grads)):
                p, c_state[i] = adam_step(p, g, c_state[i], hyper)
                new.append(p)
            critic.set_params(new)
        z = rng.standard_normal((cfg.batch_size, cfg.latent_dim))
        g_loss, grads = generator_loss_and_grads(generator, critic, z)
        new = []
        for i, (p, g) in enumerate(zip(generator.params(), grads)):
            p, g_state[i] = adam_step(p, g, g_state[i], hyper)
            new.append(p)
        generator.set_params(new)
        history.critic_loss.append(loss)
        history.generator_loss.append(g_loss)
        history.penalty.append(penalty)
        if callback is not None:
            callback(step + 1, generator, critic)
    return generator, critic, history


def sample_targets(generator: MLP, count: int, rng: np.random.Generator, observables: Optional[ObservableSet] = None) -> list:
    """Draw ``count`` vectors s' = G(z), z ~ N(0, I). Returned as ExpectationVectors
    when ``observables`` is given, raw arrays otherwise."""
    if count < 0:
        raise ValueError("count must be >= 0")
    if count == 0:
        return []
    z = rng.standard_normal((count, generator.sizes[0]))
    out = np.clip(mlp_forward(generator, z), -1.0, 1.0)
    if observables is None:
        return list(out)
    return [ExpectationVector(observables, row) for row in out]
