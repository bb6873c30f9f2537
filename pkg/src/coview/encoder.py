"""Convolutional pyramid encoder with a manual backward pass.

Each level applies a stride-1 "same"-padded 1-D convolution, ReLU, width-2
max pooling, and (during augmented passes) inverted dropout. A global max
over the remaining time axis feeds a linear projection to the embedding.
The backward pass returns exact gradients of this map; max pooling routes
gradient to the first maximal index.

In channel-shared mode the same kernels process every input channel as a
separate univariate series and the per-channel readouts are max-pooled
across channels before projection, which makes the embedding invariant to
channel order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class EncoderConfig:
    input_channels: int
    levels: int = 3
    channels_per_level: tuple = (32, 64, 128)
    kernel_size: int = 5
    dropout_rate: float = 0.1
    embedding_dim: int = 64
    channel_shared: bool = False

    def __post_init__(self):
        self.channels_per_level = tuple(int(c) for c in self.channels_per_level)
        if self.levels < 1:
            raise ValueError(f"levels must be >= 1, got {self.levels}")
        if self.embedding_dim < 2:
            raise ValueError(f"embedding_dim must be >= 2, got {self.embedding_dim}")
        if len(self.channels_per_level) != self.levels:
            raise ValueError(
                f"channels_per_level has {len(self.channels_per_level)} entries "
                f"for {self.levels} levels"
            )
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.kernel_size < 1:
            raise ValueError(f"kernel_size must be >= 1, got {self.kernel_size}")
        if self.input_channels < 1:
            raise ValueError(f"input_channels must be >= 1, got {self.input_channels}")

    @property
    def conv_input_channels(self) -> int:
        return 1 if self.channel_shared else self.input_channels


@dataclass
class EncoderParams:
    """Convolution kernels/biases per level plus the final projection."""

    config: EncoderConfig
    conv_w: list  # per level [kernel, c_in, c_out]
    conv_b: list  # per level [c_out]
    proj_w: np.ndarray  # [c_last, embedding_dim]
    proj_b: np.ndarray  # [embedding_dim]

    def named_arrays(self):
        for i, (w, b) in enumerate(zip(self.conv_w, self.conv_b)):
            yield f"conv{i}_w", w
            yield f"conv{i}_b", b
        yield "proj_w", self.proj_w
        yield "proj_b", self.proj_b

    def zeros_like(self) -> "EncoderParams":
        return EncoderParams(
            config=self.config,
            conv_w=[np.zeros_like(w) for w in self.conv_w],
            conv_b=[np.zeros_like(b) for b in self.conv_b],
            proj_w=np.zeros_like(self.proj_w),
            proj_b=np.zeros_like(self.proj_b),
        )

    def copy(self) -> "EncoderParams":
        return EncoderParams(
            config=self.config,
            conv_w=[w.copy() for w in self.conv_w],
            conv_b=[b.copy() for b in self.conv_b],
            proj_w=self.proj_w.copy(),
            proj_b=self.proj_b.copy(),
        )


@dataclass
class AugmentedPair:
    clean: np.ndarray
    augmented: np.ndarray
    cache: dict | None = None


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def init_encoder(config: EncoderConfig, seed, dtype=np.float32) -> EncoderParams:
    """He-uniform kernels and projection, zero biases, deterministic in seed."""
    rng = _as_rng(seed)
    conv_w, conv_b = [], []
    c_in = config.conv_input_channels
    for c_out in config.channels_per_level:
        fan_in = config.kernel_size * c_in
        bound = np.sqrt(6.0 / fan_in)
        conv_w.append(
            rng.uniform(-bound, bound, size=(config.kernel_size, c_in, c_out)).astype(dtype)
        )
        conv_b.append(np.zeros(c_out, dtype=dtype))
        c_in = c_out
    bound = np.sqrt(6.0 / c_in)
    proj_w = rng.uniform(-bound, bound, size=(c_in, config.embedding_dim)).astype(dtype)
    proj_b = np.zeros(config.embedding_dim, dtype=dtype)
    return EncoderParams(config=config, conv_w=conv_w, conv_b=conv_b, proj_w=proj_w, proj_b=proj_b)


def _conv_same(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stride-1 convolution with zero 'same' padding. Returns (output, padded input)."""
    kernel = w.shape[0]
    pad_left = (kernel - 1) // 2
    pad_right = kernel - 1 - pad_left
    x_pad = np.pad(x, ((0, 0), (pad_left, pad_right), (0, 0)))
    length = x.shape[1]
    out = np.zeros((x.shape[0], length, w.shape[2]), dtype=x.dtype)
    for k in range(kernel):
        out += x_pad[:, k : k + length, :] @ w[k]
    out += b
    return out, x_pad


def _conv_backward(
    x_pad: np.ndarray, w: np.ndarray, d_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    kernel = w.shape[0]
    length = d_out.shape[1]
    pad_left = (kernel - 1) // 2
    d_w = np.zeros_like(w)
    d_xpad = np.zeros_like(x_pad)
    for k in range(kernel):
        window = x_pad[:, k : k + length, :]
        d_w[k] = np.einsum("bli,blo->io", window, d_out)
        d_xpad[:, k : k + length, :] += d_out @ w[k].T
    d_b = d_out.sum(axis=(0, 1))
    d_x = d_xpad[:, pad_left : pad_left + x_pad.shape[1] - kernel + 1, :]
    return d_x, d_w, d_b


def forward(
    params: EncoderParams,
    batch: np.ndarray,
    dropout_seed=None,
    return_cache: bool = False,
):
    """Map [B, L, c] to embeddings [B, D]; dropout off when seed is None."""
    config = params.config
    batch = np.asarray(batch)
    if batch.ndim != 3:
        raise ValueError(f"batch must be [B][L][c], got shape {batch.shape}")
    b, length, chans = batch.shape
    if not config.channel_shared and chans != config.input_channels:
        raise ValueError(
            f"batch has {chans} channels, encoder expects {config.input_channels}"
        )
    if length < config.kernel_size:
        raise ValueError(
            f"input length {length} shorter than kernel size {config.kernel_size}"
        )

    x = batch
    if config.channel_shared:
        # fold channels into the batch as univariate series
        x = np.moveaxis(batch, 2, 1).reshape(b * chans, length, 1)

    rng = _as_rng(dropout_seed) if dropout_seed is not None else None
    rate = config.dropout_rate
    levels = []
    for i in range(config.levels):
        if x.shape[1] < 2:
            raise ValueError(
                f"time axis exhausted before readout at level {i}: "
                f"length {x.shape[1]} cannot be pooled"
            )
        z, x_pad = _conv_same(x, params.conv_w[i], params.conv_b[i])
        a = np.maximum(z, 0.0)
        pooled_len = a.shape[1] // 2
        windows = a[:, : pooled_len * 2, :].reshape(a.shape[0], pooled_len, 2, a.shape[2])
        pool_idx = np.argmax(windows, axis=2)
        pooled = np.take_along_axis(windows, pool_idx[:, :, None, :], axis=2)[:, :, 0, :]
        mask = None
        if rng is not None and rate > 0.0:
            keep = (rng.random(pooled.shape) >= rate).astype(pooled.dtype)
            mask = keep / (1.0 - rate)
            pooled = pooled * mask
        levels.append({"x_pad": x_pad, "z": z, "pool_idx": pool_idx, "mask": mask,
                       "in_len": x.shape[1]})
        x = pooled

    readout_idx = np.argmax(x, axis=1)
    feat = np.take_along_axis(x, readout_idx[:, None, :], axis=1)[:, 0, :]

    chan_idx = None
    if config.channel_shared:
        per_chan = feat.reshape(b, chans, feat.shape[1])
        chan_idx = np.argmax(per_chan, axis=1)
        feat = np.take_along_axis(per_chan, chan_idx[:, None, :], axis=1)[:, 0, :]

    emb = feat @ params.proj_w + params.proj_b
    if not return_cache:
        return emb
    cache = {
        "levels": levels,
        "readout_idx": readout_idx,
        "readout_len": x.shape[1],
        "chan_idx": chan_idx,
        "feat": feat,
        "batch_shape": (b, length, chans),
    }
    return emb, cache


def forward_augmented(params: EncoderParams, batch: np.ndarray, seed) -> AugmentedPair:
    """Clean pass (dropout off) plus one stochastic dropout pass."""
    clean = forward(params, batch, dropout_seed=None)
    augmented, cache = forward(params, batch, dropout_seed=seed, return_cache=True)
    return AugmentedPair(clean=clean, augmented=augmented, cache=cache)


def backward(params: EncoderParams, cache: dict, upstream: np.ndarray) -> EncoderParams:
    """Exact gradients of forward() for the cached activations/masks."""
    config = params.config
    b, length, chans = cache["batch_shape"]
    if upstream.shape != (b, config.embedding_dim):
        raise ValueError(
            f"upstream gradient shape {upstream.shape} does not match "
            f"[{b}][{config.embedding_dim}]"
        )
    grads = params.zeros_like()
    feat = cache["feat"]
    grads.proj_w[...] = feat.T @ upstream
    grads.proj_b[...] = upstream.sum(axis=0)
    d_feat = upstream @ params.proj_w.T

    if config.channel_shared:
        d_per_chan = np.zeros((b, chans, feat.shape[1]), dtype=d_feat.dtype)
        np.put_along_axis(d_per_chan, cache["chan_idx"][:, None, :], d_feat[:, None, :], axis=1)
        d_feat = d_per_chan.reshape(b * chans, feat.shape[1])

    d_x = np.zeros((d_feat.shape[0], cache["readout_len"], d_feat.shape[1]), dtype=d_feat.dtype)
    np.put_along_axis(d_x, cache["readout_idx"][:, None, :], d_feat[:, None, :], axis=1)

    for i in reversed(range(config.levels)):
        level = cache["levels"][i]
        if level["mask"] is not None:
            d_x = d_x * level["mask"]
        pooled_len, c_out = d_x.shape[1], d_x.shape[2]
        d_windows = np.zeros((d_x.shape[0], pooled_len, 2, c_out), dtype=d_x.dtype)
        np.put_along_axis(d_windows, level["pool_idx"][:, :, None, :], d_x[:, :, None, :], axis=2)
        d_a = np.zeros((d_x.shape[0], level["in_len"], c_out), dtype=d_x.dtype)
        d_a[:, : pooled_len * 2, :] = d_windows.reshape(d_x.shape[0], pooled_len * 2, c_out)
        d_z = d_a * (level["z"] > 0.0)
        d_x, d_w, d_b = _conv_backward(level["x_pad"], params.conv_w[i], d_z)
        grads.conv_w[i][...] = d_w
        grads.conv_b[i][...] = d_b
    return grads


def concat_views(h: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Row-wise concatenation, time view first."""
    h = np.asarray(h)
    g = np.asarray(g)
    if h.shape[0] != g.shape[0]:
        raise ValueError(f"row mismatch: {h.shape[0]} vs {g.shape[0]}")
    return np.concatenate([h, g], axis=1)


# ---------------------------------------------------------------------------
# Optimizer


@dataclass
class OptimizerState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def init_optimizer(params: EncoderParams, lr: float = 0.001) -> OptimizerState:
    state = OptimizerState(lr=lr)
    for name, arr in params.named_arrays():
        state.m[name] = np.zeros_like(arr)
        state.v[name] = np.zeros_like(arr)
    return state


def optimizer_step(
    state: OptimizerState, params: EncoderParams, grads: EncoderParams
) -> tuple[EncoderParams, OptimizerState]:
    """Bias-corrected adaptive-moment update, in place."""
    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step
    grad_map = dict(grads.named_arrays())
    for name, arr in params.named_arrays():
        g = grad_map[name]
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient in {name}")
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * np.square(g)
        arr -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state
