"""Minimal dense-network kernel: forward, reverse-mode backward, Adam.

Just enough for 2x64 Tanh actor/critic networks, in double precision, with
no ML framework. Actors use a multi-head softmax output (one categorical per
channel); critics use a scalar linear output. An optional boolean mask pins
selected head entries to probability zero (their logits never influence the
output, so their gradients vanish identically).
"""

import json
import struct
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

CHECKPOINT_MAGIC = b"SAGMLP01"

OUTPUT_LINEAR = "linear"
OUTPUT_SOFTMAX_HEADS = "softmax_heads"


@dataclass
class Mlp:
    weights: List[np.ndarray]  # [in, out] orientation
    biases: List[np.ndarray]
    output: str = OUTPUT_LINEAR
    n_heads: int = 0
    head_size: int = 0

    @property
    def sizes(self) -> List[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def parameters(self) -> List[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def copy(self) -> "Mlp":
        return Mlp([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                   self.output, self.n_heads, self.head_size)


def orthogonal(rng: np.random.Generator, n_in: int, n_out: int, gain: float) -> np.ndarray:
    a = rng.standard_normal((max(n_in, n_out), min(n_in, n_out)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if n_in < n_out:
        q = q.T
    return gain * q[:n_in, :n_out]


def mlp_init(sizes: Sequence[int], rng: np.random.Generator,
             output: str = OUTPUT_LINEAR, n_heads: int = 0, head_size: int = 0,
             out_gain: float = 1.0) -> Mlp:
    """Orthogonal weights (gain 1 hidden, ``out_gain`` final), zero biases."""
    if output == OUTPUT_SOFTMAX_HEADS and sizes[-1] != n_heads * head_size:
        raise ValueError("output width must equal n_heads * head_size")
    weights, biases = [], []
    last = len(sizes) - 2
    for i in range(len(sizes) - 1):
        gain = out_gain if i == last else 1.0
        weights.append(orthogonal(rng, sizes[i], sizes[i + 1], gain))
        biases.append(np.zeros(sizes[i + 1]))
    return Mlp(weights, biases, output, n_heads, head_size)


@dataclass
class ForwardCache:
    activations: List[np.ndarray]  # a0=input, a1..a_{L-1} hidden tanh outputs
    probs: Optional[np.ndarray] = None  # (B, H, S) for softmax heads
    mask: Optional[np.ndarray] = None


def masked_head_softmax(logits: np.ndarray, n_heads: int, head_size: int,
                        mask: Optional[np.ndarray] = None) -> np.ndarray:
    """Per-head softmax over (B, H*S) logits; masked entries get probability 0.

    mask: bool array of shape (S,) or (H, S); True = allowed.
    """
    z = logits.reshape(logits.shape[0], n_heads, head_size)
    if mask is not None:
        allowed = np.broadcast_to(mask, (n_heads, head_size))
        z = np.where(allowed[None, :, :], z, -np.inf)
    z = z - z.max(axis=2, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=2, keepdims=True)


def forward(mlp: Mlp, x: np.ndarray,
            mask: Optional[np.ndarray] = None) -> Tuple[np.ndarray, ForwardCache]:
    """Batched forward pass; x is (B, n_in) or (n_in,).

    Returns (B, n_out) for linear output or (B, H, S) head probabilities.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != mlp.weights[0].shape[0]:
        raise ValueError(f"input width {x.shape[1]} != {mlp.weights[0].shape[0]}")
    activations = [x]
    a = x
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        z = a @ w + b
        if i < len(mlp.weights) - 1:
            a = np.tanh(z)
            activations.append(a)
        else:
            a = z
    cache = ForwardCache(activations=activations)
    if mlp.output == OUTPUT_SOFTMAX_HEADS:
        probs = masked_head_softmax(a, mlp.n_heads, mlp.head_size, mask)
        cache.probs = probs
        cache.mask = mask
        return probs, cache
    return a, cache


def backward(mlp: Mlp, cache: ForwardCache,
             grad_out: np.ndarray) -> List[np.ndarray]:
    """Exact reverse-mode gradients of sum(loss) wrt every parameter.

    grad_out is dL/d(output): (B, n_out) for linear nets, (B, H, S) wrt the
    head probabilities for softmax nets. Returns [dW0, db0, dW1, db1, ...].
    """
    if mlp.output == OUTPUT_SOFTMAX_HEADS:
        p = cache.probs
        if p is None:
            raise ValueError("forward cache missing softmax probabilities")
        g = np.asarray(grad_out, dtype=np.float64)
        inner = (g * p).sum(axis=2, keepdims=True)
        dz = (p * (g - inner)).reshape(p.shape[0], -1)
    else:
        dz = np.atleast_2d(np.asarray(grad_out, dtype=np.float64))

    grads: List[np.ndarray] = [None] * (2 * len(mlp.weights))
    for i in range(len(mlp.weights) - 1, -1, -1):
        a_prev = cache.activations[i]
        grads[2 * i] = a_prev.T @ dz
        grads[2 * i + 1] = dz.sum(axis=0)
        if i > 0:
            da = dz @ mlp.weights[i].T
            dz = da * (1.0 - cache.activations[i] ** 2)
    return grads


@dataclass
class AdamState:
    """First/second-moment accumulators with bias correction."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)
    rejected: int = 0

    def step(self, mlp: Mlp, grads: List[np.ndarray]) -> bool:
        """Apply one update in place; a non-finite gradient rejects the whole
        step and bumps the diagnostic counter."""
        params = mlp.parameters()
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        if any(not np.isfinite(g).all() for g in grads):
            self.rejected += 1
            return False
        self.step_count += 1
        b1t = 1.0 - self.beta1 ** self.step_count
        b2t = 1.0 - self.beta2 ** self.step_count
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)
        return True


def save_mlp(path, mlp: Mlp) -> None:
    """Versioned binary: magic, output kind, head dims, sizes, row-major doubles."""
    sizes = mlp.sizes
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        kind = 1 if mlp.output == OUTPUT_SOFTMAX_HEADS else 0
        fh.write(struct.pack("<III", kind, mlp.n_heads, mlp.head_size))
        fh.write(struct.pack("<I", len(sizes)))
        fh.write(struct.pack(f"<{len(sizes)}I", *sizes))
        for w, b in zip(mlp.weights, mlp.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_mlp(path) -> Mlp:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"not a checkpoint file: bad magic {magic!r}")
        kind, n_heads, head_size = struct.unpack("<III", fh.read(12))
        (n_sizes,) = struct.unpack("<I", fh.read(4))
        sizes = struct.unpack(f"<{n_sizes}I", fh.read(4 * n_sizes))
        weights, biases = [], []
        for i in range(n_sizes - 1):
            n_in, n_out = sizes[i], sizes[i + 1]
            w = np.frombuffer(fh.read(8 * n_in * n_out), dtype="<f8").reshape(n_in, n_out)
            b = np.frombuffer(fh.read(8 * n_out), dtype="<f8")
            weights.append(w.astype(np.float64))
            biases.append(b.astype(np.float64))
    output = OUTPUT_SOFTMAX_HEADS if kind == 1 else OUTPUT_LINEAR
    return Mlp(weights, biases, output, n_heads, head_size)


def save_metadata(path, meta: dict) -> None:
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_metadata(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
