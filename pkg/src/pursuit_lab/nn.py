"""Minimal neural-network core: tanh MLP, diagonal-Gaussian head, Adam.

Fixed feed-forward topology only (tanh hidden layers, linear output) with
hand-written reverse-mode gradients, which keeps training fully deterministic
and lets the test suite check every gradient against central finite
differences. Parameters default to float32; pass dtype=np.float64 for
gradient-check precision.
"""

from __future__ import annotations

import io
import json
import math
import zipfile
from dataclasses import dataclass, field

import numpy as np

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0

CHECKPOINT_FORMAT_VERSION = 1

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class Mlp:
    """Plain MLP parameters: weights[i] is (fan_in, fan_out)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def dims(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def copy(self) -> "Mlp":
        return Mlp([w.copy() for w in self.weights], [b.copy() for b in self.biases])


def mlp_init(dims, rng: np.random.Generator, dtype=np.float32, final_scale: float = 1.0) -> Mlp:
    """Hidden weights scaled by 1/sqrt(fan_in); the output layer additionally
    by `final_scale` (policy heads use 0.01 to start near zero steer)."""
    weights, biases = [], []
    for i in range(len(dims) - 1):
        scale = 1.0 / math.sqrt(dims[i])
        if i == len(dims) - 2:
            scale *= final_scale
        weights.append((rng.standard_normal((dims[i], dims[i + 1])) * scale).astype(dtype))
        biases.append(np.zeros(dims[i + 1], dtype=dtype))
    return Mlp(weights, biases)


def mlp_forward(mlp: Mlp, x: np.ndarray):
    """Batched forward pass. Returns (output, cache-for-backward).

    x is (batch, d_in); hidden activations are tanh, output is linear.
    """
    dtype = mlp.weights[0].dtype
    h = np.asarray(x, dtype=dtype)
    if h.ndim == 1:
        h = h[None, :]
    if h.shape[1] != mlp.weights[0].shape[0]:
        raise ValueError(f"input dim {h.shape[1]} != first layer fan-in {mlp.weights[0].shape[0]}")
    activations = [h]
    n_layers = len(mlp.weights)
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        h = h @ w + b
        if i < n_layers - 1:
            h = np.tanh(h)
        activations.append(h)
    return h, activations


def mlp_backward(mlp: Mlp, cache: list[np.ndarray], dout: np.ndarray):
    """Exact reverse-mode gradients. Returns (grads aligned with arrays(), dx)."""
    dout = np.asarray(dout, dtype=mlp.weights[0].dtype)
    if dout.ndim == 1:
        dout = dout[None, :]
    if dout.shape != cache[-1].shape:
        raise ValueError(f"output-gradient shape {dout.shape} != output shape {cache[-1].shape}")
    n_layers = len(mlp.weights)
    grads_w = [None] * n_layers
    grads_b = [None] * n_layers
    delta = dout
    for i in range(n_layers - 1, -1, -1):
        if i < n_layers - 1:
            delta = delta * (1.0 - cache[i + 1] ** 2)  # tanh'
        grads_w[i] = cache[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        delta = delta @ mlp.weights[i].T
    grads = []
    for gw, gb in zip(grads_w, grads_b):
        grads.append(gw)
        grads.append(gb)
    return grads, delta


# ---------------------------------------------------------------------------
# Diagonal Gaussian head
# ---------------------------------------------------------------------------

def clamp_log_std(log_std: np.ndarray) -> np.ndarray:
    return np.clip(log_std, LOG_STD_MIN, LOG_STD_MAX)


def log_std_grad_mask(log_std: np.ndarray) -> np.ndarray:
    """1 where the clamp is inactive (gradient flows), else 0."""
    return ((log_std > LOG_STD_MIN) & (log_std < LOG_STD_MAX)).astype(log_std.dtype)


def gaussian_log_prob(mean: np.ndarray, log_std: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """Per-sample log density of `actions` under N(mean, diag(exp(log_std))^2)."""
    ls = clamp_log_std(np.asarray(log_std))
    z = (np.asarray(actions) - mean) / np.exp(ls)
    return -0.5 * np.sum(z * z, axis=-1) - np.sum(ls) - 0.5 * _LOG_2PI * mean.shape[-1]


def gaussian_entropy(log_std: np.ndarray) -> float:
    ls = clamp_log_std(np.asarray(log_std))
    return float(np.sum(ls) + 0.5 * ls.shape[-1] * (1.0 + _LOG_2PI))


def gaussian_sample(mean: np.ndarray, log_std: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    ls = clamp_log_std(np.asarray(log_std))
    return mean + np.exp(ls) * rng.standard_normal(mean.shape)


def gaussian_kl(mean_p, log_std_p, mean_q, log_std_q):
    """Closed-form KL(p || q) for diagonal Gaussians; >= 0, 0 iff p == q."""
    lp = clamp_log_std(np.asarray(log_std_p, dtype=np.float64))
    lq = clamp_log_std(np.asarray(log_std_q, dtype=np.float64))
    mp = np.asarray(mean_p, dtype=np.float64)
    mq = np.asarray(mean_q, dtype=np.float64)
    var_p = np.exp(2.0 * lp)
    var_q = np.exp(2.0 * lq)
    per_dim = lq - lp + (var_p + (mp - mq) ** 2) / (2.0 * var_q) - 0.5
    return float(np.sum(per_dim))


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_init(params: list[np.ndarray], lr: float = 3e-4) -> AdamState:
    return AdamState(
        lr=lr,
        m=[np.zeros_like(p) for p in params],
        v=[np.zeros_like(p) for p in params],
    )


def adam_step(opt: AdamState, params: list[np.ndarray], grads: list[np.ndarray]) -> list[np.ndarray]:
    """Bias-corrected adaptive-moment update, in place. Fails fast on non-finite grads."""
    if len(params) != len(grads):
        raise ValueError("params/grads length mismatch")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient")
    opt.t += 1
    bc1 = 1.0 - opt.beta1**opt.t
    bc2 = 1.0 - opt.beta2**opt.t
    for p, g, m, v in zip(params, grads, opt.m, opt.v):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        m *= opt.beta1
        m += (1.0 - opt.beta1) * g
        v *= opt.beta2
        v += (1.0 - opt.beta2) * g * g
        p -= opt.lr * (m / bc1) / (np.sqrt(v / bc2) + opt.eps)
    return params


# ---------------------------------------------------------------------------
# Checkpoint archive: manifest.json + params.bin (little-endian float32)
# ---------------------------------------------------------------------------

def save_arrays(path, kind: str, named_arrays: list[tuple[str, np.ndarray]], extra: dict | None = None) -> None:
    """Write one checkpoint archive: a JSON manifest plus the flat float32 blob."""
    manifest = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "kind": kind,
        "dtype": "float32",
        "arrays": [{"name": name, "shape": list(arr.shape)} for name, arr in named_arrays],
        "extra": extra or {},
    }
    blob = io.BytesIO()
    for _, arr in named_arrays:
        blob.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("manifest.json", json.dumps(manifest, indent=2))
        zf.writestr("params.bin", blob.getvalue())


def load_arrays(path) -> tuple[dict, dict[str, np.ndarray]]:
    """Read a checkpoint archive back into (manifest, name -> float32 array)."""
    with zipfile.ZipFile(path, "r") as zf:
        manifest = json.loads(zf.read("manifest.json").decode("utf-8"))
        raw = zf.read("params.bin")
    arrays: dict[str, np.ndarray] = {}
    offset = 0
    for spec in manifest["arrays"]:
        n = int(np.prod(spec["shape"])) if spec["shape"] else 1
        arr = np.frombuffer(raw, dtype="<f4", count=n, offset=offset).reshape(spec["shape"])
        arrays[spec["name"]] = arr.astype(np.float32)
        offset += 4 * n
    return manifest, arrays


def checkpoint_kind(path) -> str:
    with zipfile.ZipFile(path, "r") as zf:
        manifest = json.loads(zf.read("manifest.json").decode("utf-8"))
    return manifest["kind"]
