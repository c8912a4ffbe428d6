"""Dense-network machinery for the learner, written directly on numpy.

Multilayer perceptrons with hand-coded reverse-mode gradients, a
bias-corrected adaptive-moment optimizer, and the tanh-squashed Gaussian
head with its exact log-density. Everything runs in float64 so analytic
gradients can be checked against central finite differences, and the
checkpoint layout is a fixed little-endian binary that round-trips
bit-exactly.
"""

from __future__ import annotations

import struct
from typing import BinaryIO

import numpy as np

MLP_MAGIC = b"UMECNET1"
OPT_MAGIC = b"UMECOPT1"

LOG_2PI = float(np.log(2.0 * np.pi))
LOG_2 = float(np.log(2.0))


class Mlp:
    """Fully connected network: rectified-linear hidden layers, linear output.

    Weights have shape (n_in, n_out) so a batch flows as ``x @ W + b``.
    """

    def __init__(self, sizes, weights, biases):
        self.sizes = list(sizes)
        self.weights = weights
        self.biases = biases

    @classmethod
    def create(cls, sizes, rng: np.random.Generator) -> "Mlp":
        """Fresh net with uniform fan-in scaled initialization."""
        weights, biases = [], []
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(n_in)
            weights.append(rng.uniform(-bound, bound, size=(n_in, n_out)))
            biases.append(rng.uniform(-bound, bound, size=n_out))
        return cls(sizes, weights, biases)

    def clone(self) -> "Mlp":
        return Mlp(self.sizes, [w.copy() for w in self.weights],
                   [b.copy() for b in self.biases])

    def params(self) -> list[np.ndarray]:
        """Flat parameter list, interleaved [W0, b0, W1, b1, ...]."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def forward(self, x: np.ndarray):
        """Evaluate a (batch, n_in) input; returns output and a backward cache."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.sizes[0]:
            raise ValueError(f"input must have shape (batch, {self.sizes[0]})")
        acts = [x]
        a = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            a = z if i == last else np.maximum(z, 0.0)
            acts.append(a)
        return a, acts

    def backward(self, cache, grad_out: np.ndarray):
        """Exact gradients of the forward map.

        ``cache`` is the activation list from a matching forward call.
        Returns ([(dW, db), ...] per layer, gradient w.r.t. the input).
        """
        if len(cache) != len(self.weights) + 1 or cache[-1].shape != grad_out.shape:
            raise ValueError("backward cache does not match this net/output gradient")
        grads = [None] * len(self.weights)
        g = np.asarray(grad_out, dtype=float)
        for i in range(len(self.weights) - 1, -1, -1):
            if i < len(self.weights) - 1:
                g = g * (cache[i + 1] > 0.0)  # rectifier mask; dead units pass nothing
            a_in = cache[i]
            grads[i] = (a_in.T @ g, g.sum(axis=0))
            g = g @ self.weights[i].T
        return grads, g


def flatten_grads(layer_grads) -> list[np.ndarray]:
    """Interleave per-layer (dW, db) pairs to match ``Mlp.params`` order."""
    out = []
    for dw, db in layer_grads:
        out.append(dw)
        out.append(db)
    return out


class AdamState:
    """Bias-corrected adaptive-moment optimizer state for one network."""

    def __init__(self, net: Mlp, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step = 0
        self.m = [np.zeros_like(p) for p in net.params()]
        self.v = [np.zeros_like(p) for p in net.params()]


def adam_step(net: Mlp, layer_grads, opt: AdamState) -> None:
    """One optimizer step, updating the net parameters in place."""
    grads = flatten_grads(layer_grads)
    params = net.params()
    if len(grads) != len(params):
        raise ValueError("gradient list does not match parameter list")
    opt.step += 1
    c1 = 1.0 - opt.beta1 ** opt.step
    c2 = 1.0 - opt.beta2 ** opt.step
    for i, (p, g) in enumerate(zip(params, grads)):
        opt.m[i] = opt.beta1 * opt.m[i] + (1.0 - opt.beta1) * g
        opt.v[i] = opt.beta2 * opt.v[i] + (1.0 - opt.beta2) * g * g
        m_hat = opt.m[i] / c1
        v_hat = opt.v[i] / c2
        p -= opt.lr * m_hat / (np.sqrt(v_hat) + opt.eps)


# ---------------------------------------------------------------------------
# tanh-squashed Gaussian head

def _softplus(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def log1m_tanh_sq(u: np.ndarray) -> np.ndarray:
    """Numerically stable log(1 - tanh(u)^2)."""
    return 2.0 * (LOG_2 - u - _softplus(-2.0 * u))


# tanh saturates to exactly +-1.0 in float64 once |u| exceeds ~19; back off
# by one tiny margin so emitted actions stay strictly inside their bounds
_SQUASH_CLIP = 1.0 - 1e-12


def squash_to_bounds(y: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Affine map of tanh output in [-1, 1] onto (lo, hi) per dimension."""
    y = np.clip(y, -_SQUASH_CLIP, _SQUASH_CLIP)
    return lo + 0.5 * (y + 1.0) * (hi - lo)


def squashed_mean_action(mean: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Deterministic action: squashed distribution mean (used for evaluation)."""
    return squash_to_bounds(np.tanh(mean), lo, hi)


def squashed_log_prob_from_noise(eps, mean, log_std, lo, hi) -> np.ndarray:
    """Exact log-density of the squashed sample built from noise ``eps``.

    Includes the Gaussian term, the tanh change of variables, and the
    affine rescale onto [lo, hi]. Summed over the last axis.
    """
    u = mean + np.exp(log_std) * eps
    gauss = -0.5 * eps ** 2 - log_std - 0.5 * LOG_2PI
    return np.sum(gauss - log1m_tanh_sq(u) - np.log(0.5 * (hi - lo)), axis=-1)


def squashed_gaussian_sample(mean, log_std, lo, hi, rng: np.random.Generator):
    """Draw a bounded action by the reparameterization trick.

    Returns ``(action, log_prob)`` where the log-density is exact,
    including the tanh and affine change-of-variable corrections. Shapes
    broadcast over a leading batch axis.
    """
    mean = np.asarray(mean, dtype=float)
    eps = rng.standard_normal(mean.shape)
    u = mean + np.exp(log_std) * eps
    action = squash_to_bounds(np.tanh(u), lo, hi)
    return action, squashed_log_prob_from_noise(eps, mean, log_std, lo, hi)


def squashed_log_prob(action, mean, log_std, lo, hi) -> np.ndarray:
    """Exact log-density at an arbitrary in-bounds action."""
    y = 2.0 * (np.asarray(action, dtype=float) - lo) / (hi - lo) - 1.0
    u = np.arctanh(y)
    eps = (u - mean) / np.exp(log_std)
    return squashed_log_prob_from_noise(eps, mean, log_std, lo, hi)


# ---------------------------------------------------------------------------
# checkpoint layout (all integers little-endian):
#   network block:   magic "UMECNET1", u32 layer count, u32 sizes,
#                    then per layer the weight matrix and bias vector as
#                    array records (u32 ndim, u32 dims, row-major <f8 data)
#   optimizer block: magic "UMECOPT1", u64 step, f64 lr/beta1/beta2/eps,
#                    u32 array count, then per parameter its first- and
#                    second-moment array records, appended after the nets
# round-trips are bit-exact: float64 payloads go through tobytes/frombuffer

def write_array(fh: BinaryIO, arr: np.ndarray) -> None:
    a = np.ascontiguousarray(arr, dtype="<f8")
    fh.write(struct.pack("<I", a.ndim))
    fh.write(struct.pack(f"<{a.ndim}I", *a.shape))
    fh.write(a.tobytes())


def read_array(fh: BinaryIO) -> np.ndarray:
    ndim = struct.unpack("<I", fh.read(4))[0]
    shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
    n = int(np.prod(shape)) if shape else 1
    data = fh.read(8 * n)
    return np.frombuffer(data, dtype="<f8").reshape(shape).astype(float)


def save_mlp(fh: BinaryIO, net: Mlp) -> None:
    fh.write(MLP_MAGIC)
    fh.write(struct.pack("<I", len(net.sizes)))
    fh.write(struct.pack(f"<{len(net.sizes)}I", *net.sizes))
    for p in net.params():
        write_array(fh, p)


def load_mlp(fh: BinaryIO) -> Mlp:
    if fh.read(len(MLP_MAGIC)) != MLP_MAGIC:
        raise ValueError("not a network checkpoint block")
    n = struct.unpack("<I", fh.read(4))[0]
    sizes = list(struct.unpack(f"<{n}I", fh.read(4 * n)))
    weights, biases = [], []
    for _ in range(len(sizes) - 1):
        weights.append(read_array(fh))
        biases.append(read_array(fh))
    return Mlp(sizes, weights, biases)


def save_adam(fh: BinaryIO, opt: AdamState) -> None:
    fh.write(OPT_MAGIC)
    fh.write(struct.pack("<Q", opt.step))
    fh.write(struct.pack("<4d", opt.lr, opt.beta1, opt.beta2, opt.eps))
    fh.write(struct.pack("<I", len(opt.m)))
    for m, v in zip(opt.m, opt.v):
        write_array(fh, m)
        write_array(fh, v)


def load_adam(fh: BinaryIO, net: Mlp) -> AdamState:
    if fh.read(len(OPT_MAGIC)) != OPT_MAGIC:
        raise ValueError("not an optimizer checkpoint block")
    step = struct.unpack("<Q", fh.read(8))[0]
    lr, beta1, beta2, eps = struct.unpack("<4d", fh.read(32))
    n = struct.unpack("<I", fh.read(4))[0]
    opt = AdamState(net, lr, beta1, beta2, eps)
    if n != len(opt.m):
        raise ValueError("optimizer block does not match the network shape")
    opt.step = step
    for i in range(n):
        opt.m[i] = read_array(fh)
        opt.v[i] = read_array(fh)
    return opt
