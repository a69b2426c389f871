"""Hybrid dense + 1-D convolutional classifier with from-scratch training.

A dense branch reads the 10-element feature vector (widths 30/20/10)
while a convolutional branch reads the standardized raw signal through
two blocks of conv -> batch norm -> dropout -> max pool (128 then 32
kernels of size five). The flattened conv output is concatenated with
the dense output and passed through a 10-unit dense layer into a
two-way softmax. Training is plain Adam on cross-entropy with shuffled
mini-batches; everything is float64 and exactly reproducible under a
seed, and the backward pass is verified against central finite
differences by grad_check.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._binio import Reader, Writer, write_atomic
from .core import (
    DegenerateTrainingError,
    DivergenceError,
    ParameterError,
    ShapeError,
)

BN_EPS = 1e-8


@dataclass(frozen=True)
class NetSpec:
    feature_dim: int = 10
    signal_len: int = 3584
    dense_widths: tuple[int, ...] = (30, 20, 10)
    conv_channels: tuple[int, int] = (128, 32)
    kernel_size: int = 5
    pool_width: int = 4
    head_width: int = 10
    n_classes: int = 2
    dropout_rate: float = 0.3
    learning_rate: float = 1e-3
    batch_size: int = 16
    epochs: int = 30
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    bn_momentum: float = 0.1

    def __post_init__(self):
        if self.kernel_size % 2 == 0:
            raise ParameterError("kernel_size must be odd for same-padding")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ParameterError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if self.pool_width < 1 or self.batch_size < 2 or self.epochs < 1:
            raise ParameterError("pool_width >= 1, batch_size >= 2, epochs >= 1 required")

    @property
    def conv_out_len(self) -> int:
        n = self.signal_len
        for _ in self.conv_channels:
            n = n // self.pool_width
        return n

    @property
    def concat_dim(self) -> int:
        return self.dense_widths[-1] + self.conv_out_len * self.conv_channels[-1]


def micro_spec(seed: int = 0) -> NetSpec:
    """Tiny topology used for finite-difference gradient verification."""
    return NetSpec(feature_dim=3, signal_len=16, dense_widths=(4, 3),
                   conv_channels=(8, 4), kernel_size=5, pool_width=2,
                   head_width=5, dropout_rate=0.0, batch_size=4, epochs=1,
                   seed=seed)


@dataclass(frozen=True, eq=False)
class NetParams:
    """All weight/bias/batch-norm tensors plus the BN running statistics."""

    tensors: dict[str, np.ndarray]
    running: dict[str, np.ndarray]


def init_params(spec: NetSpec, rng: np.random.Generator) -> NetParams:
    tensors: dict[str, np.ndarray] = {}

    def he(shape, fan_in):
        return rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)

    width_in = spec.feature_dim
    for i, width in enumerate(spec.dense_widths):
        tensors[f"dense{i}_W"] = he((width_in, width), width_in)
        tensors[f"dense{i}_b"] = np.zeros(width)
        width_in = width
    ch_in = 1
    for i, ch_out in enumerate(spec.conv_channels, start=1):
        fan_in = spec.kernel_size * ch_in
        tensors[f"conv{i}_W"] = he((spec.kernel_size, ch_in, ch_out), fan_in)
        tensors[f"bn{i}_gamma"] = np.ones(ch_out)
        tensors[f"bn{i}_beta"] = np.zeros(ch_out)
        ch_in = ch_out
    tensors["head_W"] = he((spec.concat_dim, spec.head_width), spec.concat_dim)
    tensors["head_b"] = np.zeros(spec.head_width)
    tensors["out_W"] = rng.standard_normal((spec.head_width, spec.n_classes)) \
        * np.sqrt(1.0 / spec.head_width)
    tensors["out_b"] = np.zeros(spec.n_classes)
    running = {}
    for i in range(1, len(spec.conv_channels) + 1):
        ch = spec.conv_channels[i - 1]
        running[f"bn{i}_mean"] = np.zeros(ch)
        running[f"bn{i}_var"] = np.ones(ch)
    return NetParams(tensors=tensors, running=running)


def standardize_signals(signals) -> np.ndarray:
    """Per-row zero mean, unit variance; flat rows map to zeros."""
    S = np.asarray(signals, dtype=np.float64)
    if S.ndim != 2:
        raise ShapeError(f"signals must be 2-d (batch, length), got shape {S.shape}")
    mean = S.mean(axis=1, keepdims=True)
    std = S.std(axis=1, keepdims=True)
    return np.where(std > 1e-12, (S - mean) / np.where(std > 1e-12, std, 1.0), 0.0)


# --- primitive layers ------------------------------------------------------

def _conv1d_forward(x, W):
    # no bias: the batch norm that follows each conv absorbs any constant.
    # computed as a sum of K shifted matmuls, which avoids materializing
    # the (B, L, K*Cin) im2col buffer
    batch, length, _ = x.shape
    k, _, ch_out = W.shape
    pad = k // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (0, 0)))
    out = np.zeros((batch, length, ch_out))
    for kk in range(k):
        out += xp[:, kk : kk + length, :] @ W[kk]
    return out, (xp, x.shape, W)


def _conv1d_backward(dout, cache):
    xp, x_shape, W = cache
    batch, length, ch_in = x_shape
    k, _, ch_out = W.shape
    pad = k // 2
    dW = np.empty_like(W)
    dxp = np.zeros_like(xp)
    flat_dout = dout.reshape(-1, ch_out)
    for kk in range(k):
        window = xp[:, kk : kk + length, :]
        dW[kk] = window.reshape(-1, ch_in).T @ flat_dout
        dxp[:, kk : kk + length, :] += dout @ W[kk].T
    return dxp[:, pad : pad + length, :], dW


def _bn_forward(x, gamma, beta, running_mean, running_var, train: bool,
                momentum: float):
    if train:
        mu = x.mean(axis=(0, 1))
        var = x.var(axis=(0, 1))
        new_mean = (1.0 - momentum) * running_mean + momentum * mu
        new_var = (1.0 - momentum) * running_var + momentum * var
    else:
        mu, var = running_mean, running_var
        new_mean, new_var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (x - mu) * inv_std
    out = gamma * xhat + beta
    return out, (xhat, inv_std, gamma, x.shape[0] * x.shape[1]), (new_mean, new_var)


def _bn_backward(dout, cache):
    xhat, inv_std, gamma, m = cache
    dgamma = (dout * xhat).sum(axis=(0, 1))
    dbeta = dout.sum(axis=(0, 1))
    dxhat = dout * gamma
    sum_dxhat = dxhat.sum(axis=(0, 1))
    sum_dxhat_xhat = (dxhat * xhat).sum(axis=(0, 1))
    dx = (inv_std / m) * (m * dxhat - sum_dxhat - xhat * sum_dxhat_xhat)
    return dx, dgamma, dbeta


def _dropout_forward(x, rate: float, train: bool, rng):
    if not train or rate == 0.0:
        return x, None
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * mask, mask


def _dropout_backward(dout, mask):
    return dout if mask is None else dout * mask


def _maxpool_forward(x, width: int):
    batch, length, ch = x.shape
    out_len = length // width
    trimmed = x[:, : out_len * width, :].reshape(batch, out_len, width, ch)
    arg = trimmed.argmax(axis=2)
    out = np.take_along_axis(trimmed, arg[:, :, None, :], axis=2)[:, :, 0, :]
    return out, (arg, x.shape, width)


def _maxpool_backward(dout, cache):
    arg, x_shape, width = cache
    batch, length, ch = x_shape
    out_len = length // width
    dtrim = np.zeros((batch, out_len, width, ch))
    np.put_along_axis(dtrim, arg[:, :, None, :], dout[:, :, None, :], axis=2)
    dx = np.zeros(x_shape)
    dx[:, : out_len * width, :] = dtrim.reshape(batch, out_len * width, ch)
    return dx


def _softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


# --- full network -----------------------------------------------------------

def _forward_full(spec: NetSpec, params: NetParams, feats, signals, train: bool,
                  rng, update_running: bool):
    t = params.tensors
    cache: dict = {}

    h = feats
    dense_caches = []
    for i in range(len(spec.dense_widths)):
        z = h @ t[f"dense{i}_W"] + t[f"dense{i}_b"]
        relu_mask = z > 0.0
        dense_caches.append((h, relu_mask))
        h = z * relu_mask
    dense_out = h

    x = signals[:, :, None]
    conv_caches = []
    for i in (1, 2):
        z, conv_cache = _conv1d_forward(x, t[f"conv{i}_W"])
        bn_out, bn_cache, (new_mean, new_var) = _bn_forward(
            z, t[f"bn{i}_gamma"], t[f"bn{i}_beta"],
            params.running[f"bn{i}_mean"], params.running[f"bn{i}_var"],
            train, spec.bn_momentum)
        if train and update_running:
            params.running[f"bn{i}_mean"] = new_mean
            params.running[f"bn{i}_var"] = new_var
        drop_out, drop_mask = _dropout_forward(bn_out, spec.dropout_rate, train, rng)
        pooled, pool_cache = _maxpool_forward(drop_out, spec.pool_width)
        conv_caches.append((conv_cache, bn_cache, drop_mask, pool_cache))
        x = pooled
    flat_shape = x.shape
    conv_flat = x.reshape(len(x), -1)

    concat = np.concatenate([dense_out, conv_flat], axis=1)
    head_z = concat @ t["head_W"] + t["head_b"]
    head_mask = head_z > 0.0
    head_out = head_z * head_mask
    logits = head_out @ t["out_W"] + t["out_b"]
    probs = _softmax(logits)

    cache.update(dense_caches=dense_caches, conv_caches=conv_caches,
                 flat_shape=flat_shape, concat=concat, head_mask=head_mask,
                 head_out=head_out, dense_out_width=dense_out.shape[1])
    return probs, cache


def forward(spec: NetSpec, params: NetParams, feats, signals, mode: str = "infer",
            rng: np.random.Generator | None = None) -> np.ndarray:
    """Class probabilities for a batch; rows sum to one.

    ``train`` mode uses batch statistics and active dropout (an rng is
    required when the dropout rate is nonzero); ``infer`` mode is
    deterministic, using the stored running statistics.
    """
    if mode not in ("train", "infer"):
        raise ParameterError(f"mode must be train or infer, got {mode!r}")
    feats, signals = _check_inputs(spec, feats, signals)
    train = mode == "train"
    if train and spec.dropout_rate > 0.0 and rng is None:
        raise ParameterError("train-mode forward with dropout needs an rng")
    probs, _ = _forward_full(spec, params, feats, signals, train, rng,
                             update_running=False)
    return probs


def _check_inputs(spec: NetSpec, feats, signals):
    feats = np.asarray(feats, dtype=np.float64)
    signals = np.asarray(signals, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[1] != spec.feature_dim:
        raise ShapeError(
            f"features must be (batch, {spec.feature_dim}), got {feats.shape}")
    if signals.ndim != 2 or signals.shape[1] != spec.signal_len:
        raise ShapeError(
            f"signals must be (batch, {spec.signal_len}), got {signals.shape}")
    if len(feats) != len(signals):
        raise ShapeError(f"{len(feats)} feature rows but {len(signals)} signals")
    return feats, signals


def loss_and_grads(spec: NetSpec, params: NetParams, feats, signals, labels,
                   rng: np.random.Generator | None = None, loss_scale: float = 1.0,
                   update_running: bool = False):
    """Mean cross-entropy over the batch and gradients for every tensor."""
    feats, signals = _check_inputs(spec, feats, signals)
    y = np.asarray(labels, dtype=np.int64)
    t = params.tensors
    probs, cache = _forward_full(spec, params, feats, signals, train=True, rng=rng,
                                 update_running=update_running)
    batch = len(y)
    loss = -float(np.mean(np.log(probs[np.arange(batch), y] + 1e-300))) * loss_scale

    grads: dict[str, np.ndarray] = {}
    dlogits = probs.copy()
    dlogits[np.arange(batch), y] -= 1.0
    dlogits *= loss_scale / batch

    grads["out_W"] = cache["head_out"].T @ dlogits
    grads["out_b"] = dlogits.sum(axis=0)
    dhead_out = dlogits @ t["out_W"].T
    dhead_z = dhead_out * cache["head_mask"]
    grads["head_W"] = cache["concat"].T @ dhead_z
    grads["head_b"] = dhead_z.sum(axis=0)
    dconcat = dhead_z @ t["head_W"].T

    split = cache["dense_out_width"]
    ddense = dconcat[:, :split]
    dconv_flat = dconcat[:, split:]

    for i in reversed(range(len(spec.dense_widths))):
        h_in, relu_mask = cache["dense_caches"][i]
        dz = ddense * relu_mask
        grads[f"dense{i}_W"] = h_in.T @ dz
        grads[f"dense{i}_b"] = dz.sum(axis=0)
        ddense = dz @ t[f"dense{i}_W"].T

    dx = dconv_flat.reshape(cache["flat_shape"])
    for i in (2, 1):
        conv_cache, bn_cache, drop_mask, pool_cache = cache["conv_caches"][i - 1]
        dx = _maxpool_backward(dx, pool_cache)
        dx = _dropout_backward(dx, drop_mask)
        dx, dgamma, dbeta = _bn_backward(dx, bn_cache)
        grads[f"bn{i}_gamma"] = dgamma
        grads[f"bn{i}_beta"] = dbeta
        dx, dW = _conv1d_backward(dx, conv_cache)
        grads[f"conv{i}_W"] = dW
    return loss, grads


def train(spec: NetSpec, feats, signals, labels):
    """Fit the network; returns (params, per-epoch mean loss trace)."""
    feats, signals = _check_inputs(spec, feats, signals)
    y = np.asarray(labels, dtype=np.int64)
    if len(y) != len(feats):
        raise ShapeError(f"{len(feats)} rows but {len(y)} labels")
    if len(np.unique(y)) < 2:
        raise DegenerateTrainingError("training needs both classes present")
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0xD1]))
    params = init_params(spec, rng)
    m_state = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    v_state = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    step = 0
    losses = []
    for epoch in range(spec.epochs):
        order = rng.permutation(len(y))
        epoch_losses = []
        for start in range(0, len(y), spec.batch_size):
            batch_idx = order[start : start + spec.batch_size]
            if len(batch_idx) < 2:
                continue  # batch statistics need at least two rows
            loss, grads = loss_and_grads(
                spec, params, feats[batch_idx], signals[batch_idx], y[batch_idx],
                rng=rng, update_running=True)
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch + 1}, batch {start // spec.batch_size + 1}")
            step += 1
            for key, grad in grads.items():
                m_state[key] = spec.adam_beta1 * m_state[key] + (1 - spec.adam_beta1) * grad
                v_state[key] = spec.adam_beta2 * v_state[key] + (1 - spec.adam_beta2) * grad ** 2
                m_hat = m_state[key] / (1 - spec.adam_beta1 ** step)
                v_hat = v_state[key] / (1 - spec.adam_beta2 ** step)
                params.tensors[key] = params.tensors[key] - spec.learning_rate * m_hat / (
                    np.sqrt(v_hat) + spec.adam_eps)
            epoch_losses.append(loss)
        losses.append(float(np.mean(epoch_losses)))
    return params, losses


def predict(spec: NetSpec, params: NetParams, feats, signals):
    """Deterministic inference; returns (labels, positive-class probabilities)."""
    probs = forward(spec, params, feats, signals, mode="infer")
    return probs.argmax(axis=1).astype(np.int64), probs[:, 1]


def grad_check(spec: NetSpec | None = None, batch: int = 4, step: float = 1e-5,
               seed: int = 0) -> float:
    """Max relative error between backprop and central finite differences.

    Runs on the micro topology by default, in train mode with dropout
    disabled so the loss is a deterministic function of the parameters.
    """
    spec = spec or micro_spec(seed)
    if spec.dropout_rate != 0.0:
        raise ParameterError("grad_check requires dropout_rate == 0")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x6C]))
    params = init_params(spec, rng)
    for key in params.tensors:
        # jitter every tensor so no pre-activation sits exactly on a ReLU kink
        params.tensors[key] = params.tensors[key] + rng.normal(0.0, 0.05,
                                                               params.tensors[key].shape)
    feats = rng.standard_normal((batch, spec.feature_dim))
    signals = rng.standard_normal((batch, spec.signal_len))
    y = np.arange(batch) % spec.n_classes

    _, grads = loss_and_grads(spec, params, feats, signals, y)

    def loss_at() -> float:
        loss, _ = loss_and_grads(spec, params, feats, signals, y)
        return loss

    worst = 0.0
    for key, tensor in params.tensors.items():
        flat = tensor.reshape(-1)
        gflat = grads[key].reshape(-1)
        for idx in range(flat.size):
            original = flat[idx]
            flat[idx] = original + step
            plus = loss_at()
            flat[idx] = original - step
            minus = loss_at()
            flat[idx] = original
            numeric = (plus - minus) / (2.0 * step)
            denom = max(abs(numeric) + abs(gflat[idx]), 1e-8)
            worst = max(worst, abs(numeric - gflat[idx]) / denom)
    return worst


# --- persistence -------------------------------------------------------------

NET_MAGIC = b"NMKN"


def params_bytes(params: NetParams) -> bytes:
    w = Writer()
    w.magic(NET_MAGIC)
    w.u32(len(params.tensors))
    for key in sorted(params.tensors):
        w.text(key)
        w.f64_tensor(params.tensors[key])
    w.u32(len(params.running))
    for key in sorted(params.running):
        w.text(key)
        w.f64_tensor(params.running[key])
    return w.getvalue()


def params_from_bytes(data: bytes) -> NetParams:
    r = Reader(data, label="network parameter file")
    r.magic(NET_MAGIC)
    tensors = {r.text(): r.f64_tensor() for _ in range(r.u32())}
    running = {r.text(): r.f64_tensor() for _ in range(r.u32())}
    r.expect_end()
    return NetParams(tensors=tensors, running=running)


def save_params(params: NetParams, path) -> None:
    write_atomic(path, params_bytes(params))


def load_params(path) -> NetParams:
    with open(path, "rb") as handle:
        return params_from_bytes(handle.read())


def loss_trace_csv(losses) -> str:
    lines = ["epoch,loss"]
    for i, loss in enumerate(losses, start=1):
        lines.append(f"{i},{loss!r}")
    return "\n".join(lines) + "\n"
