"""Minimal numeric kernel: linear maps, the discriminator MLP, loss
primitives, their analytic gradients, and plain SGD with decay.

Everything is float64 and batch-major: a batch is a b x in matrix and a
LinearMap with weight (out, in) maps it to b x out via ``batch @ W.T``.
Gradients are computed by hand per loss graph; there is no autodiff tape.
The five loss graphs used by training are small fixed compositions of
linear maps, leaky-ReLU, dropout, sigmoid, BCE, and L2 terms, so each one
carries its own backward pass (checked against central finite differences
in the test suite).
"""

from __future__ import annotations

import hashlib

import numpy as np

from ._kernels import leaky_relu, leaky_relu_grad

PROB_CLAMP = 1e-7  # keeps log() finite in float64 without distorting grads


class LinearMap:
    """A dense weight matrix of shape (out, in), optionally with a bias."""

    def __init__(self, weight: np.ndarray, bias: np.ndarray | None = None):
        weight = np.asarray(weight, dtype=np.float64)
        if weight.ndim != 2:
            raise ValueError("weight must be 2-d")
        if not np.isfinite(weight).all():
            raise ValueError("non-finite weight entries")
        self.weight = weight
        self.bias = None if bias is None else np.asarray(bias, dtype=np.float64)
        if self.bias is not None and self.bias.shape != (weight.shape[0],):
            raise ValueError("bias shape must be (out,)")

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @classmethod
    def uniform_init(cls, out_dim: int, in_dim: int, rng: np.random.Generator,
                     scale: float | None = None, bias: bool = False):
        """Weights uniform in [-1/sqrt(in), 1/sqrt(in)]; zero bias if any."""
        if scale is None:
            scale = 1.0 / np.sqrt(in_dim)
        w = rng.uniform(-scale, scale, size=(out_dim, in_dim))
        b = np.zeros(out_dim) if bias else None
        return cls(w, b)

    def copy(self) -> "LinearMap":
        return LinearMap(self.weight.copy(),
                         None if self.bias is None else self.bias.copy())

    def __call__(self, batch: np.ndarray) -> np.ndarray:
        return linear_forward(self, batch)


def linear_forward(lin: LinearMap, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != lin.in_dim:
        raise ValueError(
            f"batch shape {batch.shape} incompatible with map "
            f"({lin.out_dim}, {lin.in_dim})")
    out = batch @ lin.weight.T
    if lin.bias is not None:
        out = out + lin.bias
    return out


def linear_backward(lin: LinearMap, batch: np.ndarray, grad_out: np.ndarray):
    """Given dL/d(output), return (dL/d(batch), dL/dW, dL/db)."""
    grad_w = grad_out.T @ batch
    grad_b = grad_out.sum(axis=0) if lin.bias is not None else None
    grad_in = grad_out @ lin.weight
    return grad_in, grad_w, grad_b


def _row_mask_seed(row: np.ndarray, nonce: int) -> int:
    h = hashlib.blake2b(row.tobytes(), digest_size=8,
                        salt=nonce.to_bytes(8, "little"))
    return int.from_bytes(h.digest(), "little")


_MIX_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX_A = np.uint64(0xBF58476D1CE4E5B9)
_MIX_B = np.uint64(0x94D049BB133111EB)


def _mix_uniform(seeds: np.ndarray, width: int) -> np.ndarray:
    """Uniform [0,1) matrix from per-row 64-bit seeds (splitmix64 mixer)."""
    steps = (np.arange(1, width + 1, dtype=np.uint64) * _MIX_GAMMA)
    x = seeds[:, None] + steps[None, :]
    x ^= x >> np.uint64(30)
    x *= _MIX_A
    x ^= x >> np.uint64(27)
    x *= _MIX_B
    x ^= x >> np.uint64(31)
    return (x >> np.uint64(11)) * 2.0 ** -53


def dropout_mask(batch: np.ndarray, p: float, nonce: int) -> np.ndarray:
    """Inverted-dropout scale mask, seeded per row from the row's content.

    Each row's mask depends only on (row bytes, nonce), so permuting the
    rows of a batch permutes the masks identically: forward passes are
    invariant to batch order.  Kept entries are scaled by 1/(1-p).
    """
    batch = np.ascontiguousarray(batch, dtype=np.float64)
    seeds = np.fromiter((_row_mask_seed(row, nonce) for row in batch),
                        dtype=np.uint64, count=batch.shape[0])
    uniform = _mix_uniform(seeds, batch.shape[1])
    return np.where(uniform < p, 0.0, 1.0 / (1.0 - p))


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def bce_smoothed(pred: np.ndarray, real_label: bool, s: float = 0.0) -> float:
    """Mean binary cross-entropy against a smoothed constant target.

    The target is 1-s for real batches and s for fake ones; predictions are
    clamped into [PROB_CLAMP, 1-PROB_CLAMP] before the logs.
    """
    if not 0.0 <= s < 0.5:
        raise ValueError("smoothing must lie in [0, 0.5)")
    p = np.clip(np.asarray(pred, dtype=np.float64), PROB_CLAMP, 1.0 - PROB_CLAMP)
    t = 1.0 - s if real_label else s
    return float(-np.mean(t * np.log(p) + (1.0 - t) * np.log1p(-p)))


def bce_smoothed_grad(pred: np.ndarray, real_label: bool,
                      s: float = 0.0) -> np.ndarray:
    """dL/d(pred) for bce_smoothed, elementwise over the batch."""
    p = np.clip(np.asarray(pred, dtype=np.float64), PROB_CLAMP, 1.0 - PROB_CLAMP)
    t = 1.0 - s if real_label else s
    return (-(t / p) + (1.0 - t) / (1.0 - p)) / p.size


class DiscriminatorNet:
    """Feed-forward language discriminator.

    Two leaky-ReLU hidden layers (default width 2048) over code vectors,
    dropout on the input, sigmoid output giving P(code came from the
    encoder rather than the mapper).
    """

    def __init__(self, code_dim: int, hidden: int = 2048,
                 leaky_slope: float = 0.2, input_dropout: float = 0.1,
                 rng: np.random.Generator | None = None):
        if rng is None:
            rng = np.random.default_rng(0)
        if not 0.0 <= input_dropout < 1.0:
            raise ValueError("input_dropout must lie in [0, 1)")
        self.layer1 = LinearMap.uniform_init(hidden, code_dim, rng, bias=True)
        self.layer2 = LinearMap.uniform_init(hidden, hidden, rng, bias=True)
        self.layer3 = LinearMap.uniform_init(1, hidden, rng, bias=True)
        self.leaky_slope = float(leaky_slope)
        self.input_dropout = float(input_dropout)

    @property
    def code_dim(self) -> int:
        return self.layer1.in_dim

    def params(self) -> list[np.ndarray]:
        return [self.layer1.weight, self.layer1.bias,
                self.layer2.weight, self.layer2.bias,
                self.layer3.weight, self.layer3.bias]

    @classmethod
    def from_layers(cls, layer1: LinearMap, layer2: LinearMap, layer3: LinearMap,
                    leaky_slope: float, input_dropout: float) -> "DiscriminatorNet":
        net = object.__new__(cls)
        net.layer1 = layer1
        net.layer2 = layer2
        net.layer3 = layer3
        net.leaky_slope = float(leaky_slope)
        net.input_dropout = float(input_dropout)
        return net

    def copy(self) -> "DiscriminatorNet":
        return DiscriminatorNet.from_layers(
            self.layer1.copy(), self.layer2.copy(), self.layer3.copy(),
            self.leaky_slope, self.input_dropout)

    def forward(self, batch: np.ndarray, training: bool = False,
                rng: np.random.Generator | None = None,
                mask: np.ndarray | None = None):
        """Probabilities for a batch; returns (probs, cache) for backward.

        Dropout is applied only when training=True; the mask nonce is drawn
        from rng so repeated calls see fresh masks while identical rng
        states reproduce them exactly.  An explicit mask pins the dropout
        pattern (used by finite-difference gradient checks, where the mask
        must not move with the perturbed input).
        """
        batch = np.asarray(batch, dtype=np.float64)
        if training and self.input_dropout > 0.0:
            if mask is None:
                if rng is None:
                    raise ValueError("training-mode forward needs an rng")
                nonce = int(rng.integers(0, np.iinfo(np.int64).max))
                mask = dropout_mask(batch, self.input_dropout, nonce)
            x0 = batch * mask
        else:
            mask = None
            x0 = batch
        a1 = linear_forward(self.layer1, x0)
        h1 = leaky_relu(a1, self.leaky_slope)
        a2 = linear_forward(self.layer2, h1)
        h2 = leaky_relu(a2, self.leaky_slope)
        logits = linear_forward(self.layer3, h2)[:, 0]
        probs = sigmoid(logits)
        cache = (batch, mask, x0, a1, h1, a2, h2, probs)
        return probs, cache

    def backward(self, cache, grad_probs: np.ndarray):
        """Backprop dL/d(probs) through the net.

        Returns (grad_input, grads) with grads ordered like params().
        Probabilities are treated as the (clamped) sigmoid output, so
        d(prob)/d(logit) = p(1-p).
        """
        batch, mask, x0, a1, h1, a2, h2, probs = cache
        dlogits = (grad_probs * probs * (1.0 - probs))[:, None]
        dh2, gw3, gb3 = linear_backward(self.layer3, h2, dlogits)
        da2 = dh2 * leaky_relu_grad(a2, self.leaky_slope)
        dh1, gw2, gb2 = linear_backward(self.layer2, h1, da2)
        da1 = dh1 * leaky_relu_grad(a1, self.leaky_slope)
        dx0, gw1, gb1 = linear_backward(self.layer1, x0, da1)
        dinput = dx0 if mask is None else dx0 * mask
        return dinput, [gw1, gb1, gw2, gb2, gw3, gb3]


def discriminator_forward(net: DiscriminatorNet, batch: np.ndarray,
                          training: bool = False,
                          rng: np.random.Generator | None = None) -> np.ndarray:
    """Plain forward pass returning probabilities only."""
    probs, _ = net.forward(batch, training=training, rng=rng)
    return probs


class SgdOptimizer:
    """Plain SGD: p <- p - lr * g, with a multiplicative lr decay.

    After k decay events the effective rate is lr0 * decay**k.
    """

    def __init__(self, learning_rate: float, decay: float = 1.0):
        if learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not 0.0 < decay <= 1.0:
            raise ValueError("decay must lie in (0, 1]")
        self.lr0 = float(learning_rate)
        self.decay = float(decay)
        self.n_decays = 0

    @property
    def lr(self) -> float:
        return self.lr0 * self.decay ** self.n_decays

    def step(self, params, grads, scale: float = 1.0) -> None:
        """Apply one update to each (param, grad) pair, in place."""
        rate = self.lr * scale
        for p, g in zip(params, grads, strict=True):
            if p is None:
                continue
            if p.shape != g.shape:
                raise ValueError(f"param {p.shape} vs grad {g.shape}")
            p -= rate * g

    def decay_lr(self) -> None:
        self.n_decays += 1
