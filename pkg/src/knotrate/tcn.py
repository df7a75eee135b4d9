"""Dilated temporal convolutional classifier for the middle position of a
feature-vector window, with from-scratch backprop, Adam training, and a
finite-difference gradient checker.

Parameters are stored in float32; forward/backward/grad-check arithmetic runs
in float64 through the kernels in :mod:`knotrate._kernels`.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels, domain
from .featstore import FeatureSequence


class NumericError(RuntimeError):
    """Non-finite loss during training."""


@dataclass(frozen=True)
class ArchConfig:
    input_dim: int = 32
    hidden_width: int = 64
    kernel_size: int = 3
    dilations: tuple[int, ...] = (1, 2, 4, 8)
    n_classes: int = domain.N_CLASSES

    def __post_init__(self):
        if self.kernel_size % 2 != 1 or self.kernel_size < 1:
            raise ValueError("kernel_size must be odd and positive")
        if not self.dilations or any(d < 1 for d in self.dilations):
            raise ValueError("dilations must be positive")
        if self.input_dim < 1 or self.hidden_width < 1:
            raise ValueError("input_dim and hidden_width must be >= 1")
        object.__setattr__(self, "dilations", tuple(int(d) for d in self.dilations))

    @property
    def n_layers(self) -> int:
        return len(self.dilations)

    @property
    def receptive_field(self) -> int:
        return 1 + (self.kernel_size - 1) * sum(self.dilations)

    @property
    def context_len(self) -> int:
        return self.receptive_field

    @classmethod
    def from_dict(cls, d: dict) -> "ArchConfig":
        d = dict(d)
        if "dilations" in d:
            d["dilations"] = tuple(d["dilations"])
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden_width": self.hidden_width,
            "kernel_size": self.kernel_size,
            "dilations": list(self.dilations),
            "n_classes": self.n_classes,
        }


@dataclass
class TemporalModel:
    arch: ArchConfig
    conv_weights: list[np.ndarray]  # layer j: (H, Cin_j, k) float32
    conv_biases: list[np.ndarray]  # (H,) float32
    out_weight: np.ndarray  # (n_classes, H) float32
    out_bias: np.ndarray  # (n_classes,) float32
    init_seed: int

    def parameters(self) -> list[np.ndarray]:
        params = []
        for w, b in zip(self.conv_weights, self.conv_biases):
            params.extend([w, b])
        params.extend([self.out_weight, self.out_bias])
        return params

    def set_parameters(self, params: list[np.ndarray]) -> None:
        k = self.arch.n_layers
        for j in range(k):
            self.conv_weights[j] = params[2 * j].astype(np.float32)
            self.conv_biases[j] = params[2 * j + 1].astype(np.float32)
        self.out_weight = params[2 * k].astype(np.float32)
        self.out_bias = params[2 * k + 1].astype(np.float32)


def init_model(arch: ArchConfig, seed: int) -> TemporalModel:
    """Fan-in-scaled uniform init, deterministic per seed."""
    rng = np.random.default_rng(seed)
    conv_w, conv_b = [], []
    c_in = arch.input_dim
    for _ in arch.dilations:
        bound = 1.0 / np.sqrt(c_in * arch.kernel_size)
        conv_w.append(
            rng.uniform(-bound, bound, (arch.hidden_width, c_in, arch.kernel_size)).astype(np.float32)
        )
        conv_b.append(rng.uniform(-bound, bound, arch.hidden_width).astype(np.float32))
        c_in = arch.hidden_width
    bound = 1.0 / np.sqrt(arch.hidden_width)
    out_w = rng.uniform(-bound, bound, (arch.n_classes, arch.hidden_width)).astype(np.float32)
    out_b = rng.uniform(-bound, bound, arch.n_classes).astype(np.float32)
    return TemporalModel(arch, conv_w, conv_b, out_w, out_b, init_seed=seed)


def _forward_batch(model: TemporalModel, windows: np.ndarray, keep_acts: bool = False):
    """windows: (B, L, D) -> logits (B, n_classes); optionally intermediate
    activations for backprop.  All arithmetic in float64."""
    arch = model.arch
    if windows.ndim != 3 or windows.shape[1] != arch.context_len or windows.shape[2] != arch.input_dim:
        raise ValueError(
            f"window batch shape {windows.shape} does not match "
            f"(B, {arch.context_len}, {arch.input_dim})"
        )
    h = np.ascontiguousarray(windows, dtype=np.float64)
    acts = [h]
    pre_acts = []
    for j, d in enumerate(arch.dilations):
        w = model.conv_weights[j].astype(np.float64)
        b = model.conv_biases[j].astype(np.float64)
        z = _kernels.conv1d_forward(h, w, b, d)
        h = np.maximum(z, 0.0)
        if keep_acts:
            pre_acts.append(z)
            acts.append(h)
    # receptive field == window length, so exactly one position remains
    assert h.shape[1] == 1
    feat = h[:, 0, :]
    logits = feat @ model.out_weight.astype(np.float64).T + model.out_bias.astype(np.float64)
    if keep_acts:
        return logits, acts, pre_acts, feat
    return logits


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def forward(model: TemporalModel, window: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Single window (L, D) -> (logits, softmax probabilities), each length
    n_classes."""
    logits = _forward_batch(model, np.asarray(window)[None, :, :])[0]
    return logits, softmax(logits)


@dataclass(frozen=True)
class WindowSample:
    window: np.ndarray  # (L, D)
    target: int  # class index

    def __post_init__(self):
        if not 0 <= self.target < domain.N_CLASSES:
            raise ValueError(f"target {self.target} outside [0, {domain.N_CLASSES - 1}]")


def loss_and_grads(model: TemporalModel, batch: list[WindowSample]):
    """Mean cross-entropy over the batch and gradients in parameter order
    (conv w/b per layer, then output w/b), all float64."""
    if not batch:
        raise ValueError("empty batch")
    windows = np.stack([np.asarray(s.window, dtype=np.float64) for s in batch])
    targets = np.array([s.target for s in batch], dtype=np.int64)
    logits, acts, pre_acts, feat = _forward_batch(model, windows, keep_acts=True)
    probs = softmax(logits)
    n = len(batch)
    eps = np.finfo(np.float64).tiny
    loss = -np.mean(np.log(probs[np.arange(n), targets] + eps))

    dlogits = probs.copy()
    dlogits[np.arange(n), targets] -= 1.0
    dlogits /= n
    d_out_w = dlogits.T @ feat
    d_out_b = dlogits.sum(axis=0)
    dh = (dlogits @ model.out_weight.astype(np.float64))[:, None, :]

    grads_rev = []
    for j in range(model.arch.n_layers - 1, -1, -1):
        dz = dh * (pre_acts[j] > 0.0)
        w = model.conv_weights[j].astype(np.float64)
        dh, dw, db = _kernels.conv1d_backward(acts[j], w, dz, model.arch.dilations[j])
        grads_rev.append((dw, db))
    grads: list[np.ndarray] = []
    for dw, db in reversed(grads_rev):
        grads.extend([dw, db])
    grads.extend([d_out_w, d_out_b])
    return float(loss), grads


def grad_check(
    model: TemporalModel,
    sample: WindowSample,
    epsilon: float = 1e-4,
    n_coords: int = 200,
    seed: int = 0,
) -> float:
    """Max relative discrepancy between analytic and central-difference
    gradients over a random subset of parameter coordinates."""
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    batch = [sample]
    _, grads = loss_and_grads(model, batch)
    params = model.parameters()
    # f64 working copies so the +/- epsilon perturbation is not quantized away
    params64 = [p.astype(np.float64) for p in params]
    sizes = np.array([p.size for p in params64])
    total = int(sizes.sum())
    rng = np.random.default_rng(seed)
    coords = rng.choice(total, size=min(n_coords, total), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    # evaluate loss with float64 parameters directly; storing probes through
    # the float32 model would quantize the +/- epsilon perturbation
    clone = TemporalModel(
        model.arch,
        [params64[2 * j] for j in range(model.arch.n_layers)],
        [params64[2 * j + 1] for j in range(model.arch.n_layers)],
        params64[2 * model.arch.n_layers],
        params64[2 * model.arch.n_layers + 1],
        model.init_seed,
    )

    def eval_loss():
        windows = np.asarray(sample.window, dtype=np.float64)[None, :, :]
        arch = clone.arch
        h = windows
        for j, d in enumerate(arch.dilations):
            z = _kernels.conv1d_forward(h, clone.conv_weights[j], clone.conv_biases[j], d)
            h = np.maximum(z, 0.0)
        logits = h[:, 0, :] @ clone.out_weight.T + clone.out_bias
        p = softmax(logits)
        return -float(np.log(p[0, sample.target] + np.finfo(np.float64).tiny))

    worst = 0.0
    for flat in coords:
        pi = int(np.searchsorted(offsets, flat, side="right") - 1)
        local = int(flat - offsets[pi])
        arr = params64[pi]
        orig = arr.flat[local]
        arr.flat[local] = orig + epsilon
        lp = eval_loss()
        arr.flat[local] = orig - epsilon
        lm = eval_loss()
        arr.flat[local] = orig
        g_num = (lp - lm) / (2 * epsilon)
        g_ana = grads[pi].flat[local]
        rel = abs(g_ana - g_num) / max(1e-12, abs(g_ana) + abs(g_num))
        worst = max(worst, rel)
    return worst


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 3e-3
    batch_size: int = 32
    epochs: int = 40
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 3e-3
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "adam_eps": self.adam_eps,
            "weight_decay": self.weight_decay,
            "seed": self.seed,
        }


def train(
    model: TemporalModel, dataset: list[WindowSample], cfg: TrainConfig
) -> tuple[TemporalModel, list[float]]:
    """Adam with L2 weight decay; deterministic for fixed (model, data order,
    cfg).  Returns the trained model (mutated in place) and per-epoch mean
    loss."""
    if not dataset:
        raise ValueError("empty dataset")
    rng = np.random.default_rng(cfg.seed)
    params = [p.astype(np.float64) for p in model.parameters()]
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    step = 0
    history: list[float] = []
    n = len(dataset)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for lo in range(0, n, cfg.batch_size):
            batch = [dataset[i] for i in order[lo : lo + cfg.batch_size]]
            model.set_parameters(params)
            loss, grads = loss_and_grads(model, batch)
            if not np.isfinite(loss):
                raise NumericError(f"training diverged at epoch {epoch}")
            epoch_loss += loss
            n_batches += 1
            step += 1
            bc1 = 1.0 - cfg.beta1**step
            bc2 = 1.0 - cfg.beta2**step
            for i, g in enumerate(grads):
                if cfg.weight_decay:
                    g = g + cfg.weight_decay * params[i]
                m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * g
                v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * g * g
                params[i] = params[i] - cfg.learning_rate * (m[i] / bc1) / (
                    np.sqrt(v[i] / bc2) + cfg.adam_eps
                )
        history.append(epoch_loss / n_batches)
    model.set_parameters(params)
    return model, history


@dataclass(frozen=True)
class Normalizer:
    """Per-dimension z-score statistics, fitted on training data only."""

    mean: np.ndarray  # (D,) float64
    std: np.ndarray  # (D,) float64

    @classmethod
    def fit(cls, vectors: np.ndarray) -> "Normalizer":
        mean = vectors.astype(np.float64).mean(axis=0)
        std = vectors.astype(np.float64).std(axis=0)
        std = np.where(std < 1e-12, 1.0, std)
        return cls(mean, std)

    @classmethod
    def identity(cls, dim: int) -> "Normalizer":
        return cls(np.zeros(dim), np.ones(dim))

    def apply(self, vectors: np.ndarray) -> np.ndarray:
        return (vectors.astype(np.float64) - self.mean) / self.std


def padded_windows(vectors: np.ndarray, context_len: int) -> np.ndarray:
    """All length-L windows over the sequence with replicate padding at the
    edges; output shape (T, L, D)."""
    half = context_len // 2
    padded = np.concatenate(
        [
            np.repeat(vectors[:1], half, axis=0),
            vectors,
            np.repeat(vectors[-1:], half, axis=0),
        ]
    )
    t = vectors.shape[0]
    return np.stack([padded[i : i + context_len] for i in range(t)])


def predict_sequence(
    model: TemporalModel,
    seq: FeatureSequence,
    normalizer: Normalizer,
    batch_size: int = 256,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-position class probabilities (T, n_classes) and argmax labels (T),
    every position classified on its replicate-padded context window."""
    if seq.dim != model.arch.input_dim:
        raise ValueError(
            f"feature dim {seq.dim} does not match model input dim "
            f"{model.arch.input_dim}"
        )
    windows = padded_windows(normalizer.apply(seq.vectors), model.arch.context_len)
    probs = np.empty((seq.T, model.arch.n_classes))
    for lo in range(0, seq.T, batch_size):
        logits = _forward_batch(model, windows[lo : lo + batch_size])
        probs[lo : lo + len(logits)] = softmax(logits)
    return probs, probs.argmax(axis=1)


# ---------------------------------------------------------------------------
# checkpoint format: magic KTMC, u16 version, u32 JSON header length, JSON
# header (arch, init_seed, normalizer as float64 lists), then all parameters
# as little-endian float32 in parameter order.

CKPT_MAGIC = b"KTMC"
CKPT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_model(model: TemporalModel, normalizer: Normalizer, path: str | Path) -> None:
    header = json.dumps(
        {
            "arch": model.arch.to_dict(),
            "init_seed": model.init_seed,
            "normalizer_mean": normalizer.mean.tolist(),
            "normalizer_std": normalizer.std.tolist(),
        },
        sort_keys=True,
    ).encode()
    with open(path, "wb") as f:
        f.write(CKPT_MAGIC)
        f.write(struct.pack("<HI", CKPT_VERSION, len(header)))
        f.write(header)
        for p in model.parameters():
            f.write(p.astype("<f4").tobytes())


def load_model(path: str | Path) -> tuple[TemporalModel, Normalizer]:
    with open(path, "rb") as f:
        if f.read(4) != CKPT_MAGIC:
            raise CheckpointError(f"{path}: bad checkpoint magic")
        version, hlen = struct.unpack("<HI", f.read(6))
        if version != CKPT_VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
        header = json.loads(f.read(hlen))
        arch = ArchConfig.from_dict(header["arch"])
        model = init_model(arch, header["init_seed"])
        params = []
        for p in model.parameters():
            raw = f.read(4 * p.size)
            if len(raw) < 4 * p.size:
                raise CheckpointError(f"{path}: truncated parameter block")
            params.append(np.frombuffer(raw, dtype="<f4").reshape(p.shape).copy())
        model.set_parameters(params)
        norm = Normalizer(
            np.array(header["normalizer_mean"]), np.array(header["normalizer_std"])
        )
    return model, norm
