"""Training orchestration for the dual-view co-training objective.

Phase 1 (warm-up) trains each active view with its instance loss only. In
phase 2, every epoch starts with a full-dataset clean-embedding pass and a
prototype-bank refresh (k-means at the first co-training epoch, carried
moving-average prototypes afterwards, labeled class means for the K way in
semi-supervised mode); each mini-batch then backprops the combined loss,
takes an optimizer step, and applies moving-average prototype updates.

All persistent training state is float32 and every random draw comes from a
named, independently seeded stream, so checkpoints round-trip bit-exactly
and a restored run reproduces an uninterrupted one.
"""

from __future__ import annotations

import dataclasses
import json
import struct
import time
from dataclasses import dataclass, field

import numpy as np

from .data import TimeSeriesDataset, LabeledSubset, batch_indices, compute_frequency_view
from .encoder import (
    EncoderConfig,
    EncoderParams,
    OptimizerState,
    backward,
    forward,
    init_encoder,
    init_optimizer,
    optimizer_step,
)
from .losses import cot_loss, instance_loss, l2_normalize, total_loss
from .prototypes import (
    PrototypeBank,
    PrototypeWay,
    moving_average_update,
    refresh_epoch,
    select_cross_prototype,
)

CHECKPOINT_MAGIC = b"TSCKPT1"
SCHEMA_VERSION = 1
STREAM_NAMES = ("init_h", "init_g", "aug_h", "aug_g", "shuffle", "cluster", "metrics", "labels")


class TrainingFailure(RuntimeError):
    """Numeric failure during training, with epoch/batch context."""


@dataclass
class TrainConfig:
    epochs: int = 12
    warmup_epochs: int = 5
    batch_size: int = 64
    lr: float = 0.001
    tau: float = 0.1
    lam: float = 1.0
    tau_proto: float = 1.0
    gamma: float = 0.01
    prototype_ways: tuple | None = None  # defaults to (K, 2K)
    k: int | None = None  # prototype base count; defaults to the label count
    seed: int = 0
    mode: str = "unsupervised"
    labeled_fraction: float = 0.1
    eq11_grouping: str = "cross_view"
    views: str = "both"  # both | time | freq
    # encoder
    levels: int = 3
    channels_per_level: tuple = (32, 64, 128)
    kernel_size: int = 5
    dropout_rate: float = 0.1
    embedding_dim: int = 64
    channel_shared: bool = False
    # plumbing
    log_magnitude: bool = False
    include_positive: bool = False
    inference_batch: int = 512
    track_nmi: bool = True

    def __post_init__(self):
        self.channels_per_level = tuple(int(c) for c in self.channels_per_level)
        if self.prototype_ways is not None:
            self.prototype_ways = tuple(int(c) for c in self.prototype_ways)
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if not 0 <= self.warmup_epochs <= self.epochs:
            raise ValueError(
                f"warmup_epochs must lie in [0, epochs], got {self.warmup_epochs} "
                f"with epochs={self.epochs}"
            )
        if self.batch_size < 2:
            raise ValueError("instance loss requires at least 2 samples per batch")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.eq11_grouping not in ("cross_view", "intra_view"):
            raise ValueError(f"unknown eq11_grouping {self.eq11_grouping!r}")
        if self.views not in ("both", "time", "freq"):
            raise ValueError(f"unknown views {self.views!r}")
        if self.mode not in ("unsupervised", "semi_supervised"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 0.0 < self.labeled_fraction <= 1.0:
            raise ValueError(f"labeled_fraction must be in (0, 1], got {self.labeled_fraction}")

    @property
    def time_active(self) -> bool:
        return self.views in ("both", "time")

    @property
    def freq_active(self) -> bool:
        return self.views in ("both", "freq")


@dataclass
class TrainState:
    config: TrainConfig
    params_h: EncoderParams | None
    params_g: EncoderParams | None
    opt_h: OptimizerState | None
    opt_g: OptimizerState | None
    bank: PrototypeBank | None
    epoch: int
    k: int | None
    rngs: dict
    freq_mean: np.ndarray | None
    freq_std: np.ndarray | None
    # per-channel statistics of the raw training series; train() never sets
    # or applies these, they ride along so checkpoints are self-contained
    time_mean: np.ndarray | None = None
    time_std: np.ndarray | None = None


def named_streams(seed: int) -> dict:
    """Independent generator per training concern, all derived from one seed."""
    children = np.random.SeedSequence(seed).spawn(len(STREAM_NAMES))
    return {
        name: np.random.Generator(np.random.PCG64(child))
        for name, child in zip(STREAM_NAMES, children)
    }


def _frequency_input(
    ds: TimeSeriesDataset, config: TrainConfig, mean=None, std=None
):
    """Standardized magnitude spectra plus the statistics used."""
    spectra = compute_frequency_view(ds, log_magnitude=config.log_magnitude).spectra
    flat = spectra.reshape(-1, ds.d).astype(np.float64)
    if mean is None:
        mean = flat.mean(axis=0)
        std = flat.std(axis=0)
        std = np.where(std < 1e-8, 1.0, std)
    out = ((spectra.astype(np.float64) - mean) / std).astype(np.float32)
    return out, mean, std


def _encoder_config(config: TrainConfig, input_channels: int) -> EncoderConfig:
    return EncoderConfig(
        input_channels=input_channels,
        levels=config.levels,
        channels_per_level=config.channels_per_level,
        kernel_size=config.kernel_size,
        dropout_rate=config.dropout_rate,
        embedding_dim=config.embedding_dim,
        channel_shared=config.channel_shared,
    )


def _inference_pass(params: EncoderParams, x: np.ndarray, batch: int) -> np.ndarray:
    chunks = [forward(params, x[i : i + batch]) for i in range(0, x.shape[0], batch)]
    return np.concatenate(chunks, axis=0)


def encode_dataset(state: TrainState, ds: TimeSeriesDataset):
    """Clean per-view embeddings of a dataset, in dataset index order."""
    config = state.config
    emb_h = emb_g = None
    if config.time_active:
        emb_h = _inference_pass(state.params_h, ds.samples, config.inference_batch)
    if config.freq_active:
        x_g, _, _ = _frequency_input(ds, config, state.freq_mean, state.freq_std)
        emb_g = _inference_pass(state.params_g, x_g, config.inference_batch)
    return emb_h, emb_g


def _epoch_nmi(state: TrainState, ds: TimeSeriesDataset) -> float:
    """NMI of a k-means clustering of the concatenated embeddings vs labels."""
    from .evaluation import cluster_nmi

    emb_h, emb_g = encode_dataset(state, ds)
    parts = [e for e in (emb_h, emb_g) if e is not None]
    return cluster_nmi(parts, ds.labels, int(ds.class_count), state.rngs["metrics"])


def _resolve_ways(config: TrainConfig, ds: TimeSeriesDataset) -> tuple[int, tuple]:
    k = config.k if config.k is not None else ds.class_count
    if k is None:
        raise ValueError(
            "prototype count unknown: dataset has no labels and config.k is unset"
        )
    ways = config.prototype_ways if config.prototype_ways is not None else (k, 2 * k)
    if ds.n < max(ways):
        raise ValueError(
            f"dataset too small for {max(ways)} prototypes: N={ds.n}"
        )
    return int(k), tuple(int(c) for c in ways)


def _bank_float32(bank: PrototypeBank) -> PrototypeBank:
    for way in bank.ways:
        way.intra_h = np.asarray(way.intra_h, dtype=np.float32)
        way.intra_g = np.asarray(way.intra_g, dtype=np.float32)
        way.cross_h = np.asarray(way.cross_h, dtype=np.float32)
        way.cross_g = np.asarray(way.cross_g, dtype=np.float32)
    return bank


def _add_grads(total: EncoderParams | None, extra: EncoderParams) -> EncoderParams:
    if total is None:
        return extra
    for i in range(len(total.conv_w)):
        total.conv_w[i] += extra.conv_w[i]
        total.conv_b[i] += extra.conv_b[i]
    total.proj_w += extra.proj_w
    total.proj_b += extra.proj_b
    return total


def _view_batch_step(
    params, x_batch, aug_rng, tau, include_positive
):
    """Forward both passes of one view and the instance loss pieces."""
    clean, cache_clean = forward(params, x_batch, return_cache=True)
    augmented, cache_aug = forward(params, x_batch, dropout_seed=aug_rng, return_cache=True)
    value, d_clean, d_aug = instance_loss(clean, augmented, tau, include_positive)
    return clean, cache_clean, cache_aug, value, d_clean, d_aug


def train(
    ds: TimeSeriesDataset,
    config: TrainConfig,
    subset: LabeledSubset | None = None,
    initial_state: TrainState | None = None,
    warm_start: tuple | None = None,
) -> tuple[TrainState, dict]:
    """Run the co-training loop; returns the final state and metric logs.

    `initial_state` resumes a checkpointed run (same config apart from the
    target epoch count). `warm_start` = (params_h, params_g) seeds encoder
    weights, for transfer from a previously trained state.
    """
    if ds.n < 2:
        raise ValueError(f"need at least 2 samples to train, got {ds.n}")

    labeled = None
    if subset is not None:
        if ds.labels is None:
            raise ValueError("semi-supervised training requires a labeled dataset")
        if subset.size and int(subset.indices.max()) >= ds.n:
            raise ValueError(
                f"labeled subset index {int(subset.indices.max())} outside dataset of {ds.n}"
            )
        sub_labels = ds.labels[subset.indices]
        for c in range(int(ds.class_count)):
            if not np.any(sub_labels == c):
                raise ValueError(f"class {c} missing from labeled subset")
        labeled = (sub_labels, subset.indices, int(ds.class_count))

    cotraining = config.views == "both" and config.epochs > config.warmup_epochs
    k = ways = None
    if cotraining:
        k, ways = _resolve_ways(config, ds)

    if initial_state is not None:
        state = initial_state
        state.config = config
        x_g = None
        if config.freq_active:
            x_g, _, _ = _frequency_input(ds, config, state.freq_mean, state.freq_std)
    else:
        rngs = named_streams(config.seed)
        params_h = params_g = opt_h = opt_g = None
        freq_mean = freq_std = None
        x_g = None
        if config.time_active:
            cfg_h = _encoder_config(config, ds.d)
            params_h = init_encoder(cfg_h, rngs["init_h"])
            opt_h = init_optimizer(params_h, lr=config.lr)
        if config.freq_active:
            x_g, freq_mean, freq_std = _frequency_input(ds, config)
            cfg_g = _encoder_config(config, ds.d)
            params_g = init_encoder(cfg_g, rngs["init_g"])
            opt_g = init_optimizer(params_g, lr=config.lr)
        if warm_start is not None:
            donor_h, donor_g = warm_start
            if donor_h is not None and params_h is not None:
                params_h = EncoderParams(
                    config=params_h.config,
                    conv_w=[w.copy() for w in donor_h.conv_w],
                    conv_b=[b.copy() for b in donor_h.conv_b],
                    proj_w=donor_h.proj_w.copy(),
                    proj_b=donor_h.proj_b.copy(),
                )
                opt_h = init_optimizer(params_h, lr=config.lr)
            if donor_g is not None and params_g is not None:
                params_g = EncoderParams(
                    config=params_g.config,
                    conv_w=[w.copy() for w in donor_g.conv_w],
                    conv_b=[b.copy() for b in donor_g.conv_b],
                    proj_w=donor_g.proj_w.copy(),
                    proj_b=donor_g.proj_b.copy(),
                )
                opt_g = init_optimizer(params_g, lr=config.lr)
        state = TrainState(
            config=config, params_h=params_h, params_g=params_g,
            opt_h=opt_h, opt_g=opt_g, bank=None, epoch=0, k=k,
            rngs=rngs, freq_mean=freq_mean, freq_std=freq_std,
        )

    x_h = ds.samples if config.time_active else None
    track = config.track_nmi and ds.labels is not None
    metrics = {"batches": [], "epochs": []}
    if track and initial_state is None:
        metrics["epochs"].append(
            {"epoch": -1, "phase": "init", "nmi": _epoch_nmi(state, ds)}
        )

    for epoch in range(state.epoch, config.epochs):
        started = time.perf_counter()
        phase = "warmup" if epoch < config.warmup_epochs else "cotrain"
        cot_active = phase == "cotrain" and cotraining
        if cot_active:
            emb_h_all, emb_g_all = encode_dataset(state, ds)
            mode = "kmeans_init" if state.bank is None else "moving_avg"
            try:
                state.bank = _bank_float32(
                    refresh_epoch(
                        state.bank, emb_h_all, emb_g_all, mode,
                        way_sizes=ways, seed=state.rngs["cluster"], labeled=labeled,
                    )
                )
            except ValueError as exc:
                raise TrainingFailure(f"prototype refresh failed at epoch {epoch}: {exc}") from exc

        sums = np.zeros(5)
        batches = batch_indices(ds.n, config.batch_size, state.rngs["shuffle"])
        for bi, idx in enumerate(batches):
            try:
                inst_h = inst_g = cot_h = cot_g = 0.0
                clean_h = clean_g = None
                d_clean_h = d_aug_h = d_clean_g = d_aug_g = None
                cache_ch = cache_ah = cache_cg = cache_ag = None
                if config.time_active:
                    clean_h, cache_ch, cache_ah, inst_h, d_clean_h, d_aug_h = _view_batch_step(
                        state.params_h, x_h[idx], state.rngs["aug_h"],
                        config.tau, config.include_positive,
                    )
                if config.freq_active:
                    clean_g, cache_cg, cache_ag, inst_g, d_clean_g, d_aug_g = _view_batch_step(
                        state.params_g, x_g[idx], state.rngs["aug_g"],
                        config.tau, config.include_positive,
                    )

                if cot_active:
                    for way in state.bank.ways:
                        q_h, q_g = select_cross_prototype(idx, way)
                        way_h, grad_h = cot_loss(
                            clean_h, q_h, way.cross_h, way.valid_mask_h, config.tau_proto
                        )
                        way_g, grad_g = cot_loss(
                            clean_g, q_g, way.cross_g, way.valid_mask_g, config.tau_proto
                        )
                        cot_h += way_h
                        cot_g += way_g
                        if config.lam != 0.0:
                            d_clean_h = d_clean_h + config.lam * grad_h
                            d_clean_g = d_clean_g + config.lam * grad_g

                breakdown = total_loss(inst_h, inst_g, cot_h, cot_g, config.lam)

                if config.time_active:
                    grads_h = _add_grads(
                        backward(state.params_h, cache_ch, d_clean_h),
                        backward(state.params_h, cache_ah, d_aug_h),
                    )
                    optimizer_step(state.opt_h, state.params_h, grads_h)
                if config.freq_active:
                    grads_g = _add_grads(
                        backward(state.params_g, cache_cg, d_clean_g),
                        backward(state.params_g, cache_ag, d_aug_g),
                    )
                    optimizer_step(state.opt_g, state.params_g, grads_g)
            except (ValueError, FloatingPointError) as exc:
                raise TrainingFailure(
                    f"training aborted at epoch {epoch} batch {bi}: {exc}"
                ) from exc

            if cot_active and config.gamma > 0.0:
                ch_n = l2_normalize(clean_h.astype(np.float64))
                cg_n = l2_normalize(clean_g.astype(np.float64))
                for way in state.bank.ways:
                    if config.eq11_grouping == "cross_view":
                        group_h, group_g = way.assign_g[idx], way.assign_h[idx]
                    else:
                        group_h, group_g = way.assign_h[idx], way.assign_g[idx]
                    way.intra_h = moving_average_update(
                        way.intra_h, ch_n, group_h, config.gamma
                    )
                    way.intra_g = moving_average_update(
                        way.intra_g, cg_n, group_g, config.gamma
                    )

            row = {
                "epoch": epoch, "batch": bi,
                "inst_h": breakdown.inst_h, "inst_g": breakdown.inst_g,
                "cot_h": breakdown.cot_h, "cot_g": breakdown.cot_g,
                "total": breakdown.total,
            }
            metrics["batches"].append(row)
            sums += [breakdown.inst_h, breakdown.inst_g, breakdown.cot_h,
                     breakdown.cot_g, breakdown.total]

        state.epoch = epoch + 1
        means = sums / len(batches)
        record = {
            "epoch": epoch,
            "phase": phase,
            "inst_h": float(means[0]),
            "inst_g": float(means[1]),
            "cot_h": float(means[2]),
            "cot_g": float(means[3]),
            "total": float(means[4]),
            "wall_time": time.perf_counter() - started,
        }
        if track:
            record["nmi"] = _epoch_nmi(state, ds)
        metrics["epochs"].append(record)

    return state, metrics


def train_semi_supervised(
    ds: TimeSeriesDataset, subset: LabeledSubset, config: TrainConfig
) -> tuple[TrainState, dict]:
    """train() with labeled class means as the K-way intra prototypes."""
    return train(ds, config, subset=subset)


def finetune_transfer(
    pretrained: TrainState, target_ds: TimeSeriesDataset, config: TrainConfig
) -> tuple[TrainState, dict]:
    """Continue unsupervised training of a channel-shared encoder on a new dataset."""
    if not pretrained.config.channel_shared:
        raise ValueError("transfer requires a channel_shared pretrained encoder")
    cfg = dataclasses.replace(
        config,
        channel_shared=True,
        levels=pretrained.config.levels,
        channels_per_level=pretrained.config.channels_per_level,
        kernel_size=pretrained.config.kernel_size,
        embedding_dim=pretrained.config.embedding_dim,
        views=pretrained.config.views,
    )
    return train(target_ds, cfg, warm_start=(pretrained.params_h, pretrained.params_g))


# ---------------------------------------------------------------------------
# Checkpointing


def _config_to_json(config: TrainConfig) -> dict:
    blob = dataclasses.asdict(config)
    for key, value in blob.items():
        if isinstance(value, tuple):
            blob[key] = list(value)
    return blob


def _collect_arrays(state: TrainState) -> list:
    arrays = []
    for tag, params in (("enc_h", state.params_h), ("enc_g", state.params_g)):
        if params is None:
            continue
        for name, arr in params.named_arrays():
            arrays.append((f"{tag}/{name}", arr))
    for tag, opt in (("opt_h", state.opt_h), ("opt_g", state.opt_g)):
        if opt is None:
            continue
        for name, arr in opt.m.items():
            arrays.append((f"{tag}/m/{name}", arr))
        for name, arr in opt.v.items():
            arrays.append((f"{tag}/v/{name}", arr))
    if state.freq_mean is not None:
        arrays.append(("freq_mean", state.freq_mean))
        arrays.append(("freq_std", state.freq_std))
    if state.time_mean is not None:
        arrays.append(("time_mean", state.time_mean))
        arrays.append(("time_std", state.time_std))
    if state.bank is not None:
        for w, way in enumerate(state.bank.ways):
            for name in ("intra_h", "intra_g", "cross_h", "cross_g",
                         "assign_h", "assign_g", "valid_mask_h", "valid_mask_g"):
                arrays.append((f"bank/way{w}/{name}", getattr(way, name)))
    return arrays


def checkpoint(state: TrainState, path) -> None:
    """Serialize a TrainState; restore() reproduces it bit-exactly."""
    arrays = _collect_arrays(state)
    table = []
    offset = 0
    blobs = []
    for name, arr in arrays:
        arr = np.ascontiguousarray(arr)
        raw = arr.tobytes()
        table.append({
            "name": name,
            "dtype": arr.dtype.str,
            "shape": list(arr.shape),
            "offset": offset,
        })
        blobs.append(raw)
        offset += len(raw)
    manifest = {
        "format": CHECKPOINT_MAGIC.decode(),
        "schema_version": SCHEMA_VERSION,
        "config": _config_to_json(state.config),
        "epoch": state.epoch,
        "k": state.k,
        "opt": {
            tag: None if opt is None else {"step": opt.step, "lr": opt.lr}
            for tag, opt in (("h", state.opt_h), ("g", state.opt_g))
        },
        "bank_ways": None if state.bank is None else [way.c for way in state.bank.ways],
        "rng_states": {name: gen.bit_generator.state for name, gen in state.rngs.items()},
        "arrays": table,
    }
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for raw in blobs:
            fh.write(raw)


def _params_from_arrays(config: EncoderConfig, table: dict, prefix: str) -> EncoderParams:
    conv_w = [table[f"{prefix}/conv{i}_w"] for i in range(config.levels)]
    conv_b = [table[f"{prefix}/conv{i}_b"] for i in range(config.levels)]
    return EncoderParams(
        config=config, conv_w=conv_w, conv_b=conv_b,
        proj_w=table[f"{prefix}/proj_w"], proj_b=table[f"{prefix}/proj_b"],
    )


def restore(path, input_channels: int | None = None) -> TrainState:
    """Rebuild a TrainState from a checkpoint file.

    input_channels defaults to the value implied by the stored kernels; pass
    it only when restoring a channel-shared encoder for a differently
    shaped dataset.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise ValueError(f"not a checkpoint: bad magic in {path}")
    at = len(CHECKPOINT_MAGIC)
    (blob_len,) = struct.unpack("<I", raw[at : at + 4])
    at += 4
    try:
        manifest = json.loads(raw[at : at + blob_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"corrupt checkpoint manifest: {exc}") from exc
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(
            f"checkpoint schema version {manifest.get('schema_version')} "
            f"not supported (expected {SCHEMA_VERSION})"
        )
    payload = raw[at + blob_len :]

    table = {}
    for entry in manifest["arrays"]:
        dtype = np.dtype(entry["dtype"])
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        arr = np.frombuffer(payload, dtype=dtype, count=count, offset=start).reshape(shape)
        table[entry["name"]] = arr.copy()

    blob = dict(manifest["config"])
    blob["channels_per_level"] = tuple(blob["channels_per_level"])
    if blob.get("prototype_ways") is not None:
        blob["prototype_ways"] = tuple(blob["prototype_ways"])
    config = TrainConfig(**blob)

    params_h = params_g = opt_h = opt_g = None
    if any(name.startswith("enc_h/") for name in table):
        chans = input_channels or table["enc_h/conv0_w"].shape[1]
        params_h = _params_from_arrays(_encoder_config(config, chans), table, "enc_h")
    if any(name.startswith("enc_g/") for name in table):
        chans = input_channels or table["enc_g/conv0_w"].shape[1]
        params_g = _params_from_arrays(_encoder_config(config, chans), table, "enc_g")

    for tag, params in (("h", params_h), ("g", params_g)):
        if params is None:
            continue
        meta = manifest["opt"][tag]
        opt = OptimizerState(lr=meta["lr"], step=meta["step"])
        for name, _ in params.named_arrays():
            opt.m[name] = table[f"opt_{tag}/m/{name}"]
            opt.v[name] = table[f"opt_{tag}/v/{name}"]
        if tag == "h":
            opt_h = opt
        else:
            opt_g = opt

    bank = None
    if manifest["bank_ways"] is not None:
        ways = []
        for w, c in enumerate(manifest["bank_ways"]):
            prefix = f"bank/way{w}"
            ways.append(PrototypeWay(
                c=c,
                intra_h=table[f"{prefix}/intra_h"],
                intra_g=table[f"{prefix}/intra_g"],
                cross_h=table[f"{prefix}/cross_h"],
                cross_g=table[f"{prefix}/cross_g"],
                assign_h=table[f"{prefix}/assign_h"],
                assign_g=table[f"{prefix}/assign_g"],
                valid_mask_h=table[f"{prefix}/valid_mask_h"],
                valid_mask_g=table[f"{prefix}/valid_mask_g"],
            ))
        bank = PrototypeBank(ways=ways)

    rngs = {}
    for name in STREAM_NAMES:
        gen = np.random.Generator(np.random.PCG64())
        gen.bit_generator.state = manifest["rng_states"][name]
        rngs[name] = gen

    return TrainState(
        config=config, params_h=params_h, params_g=params_g,
        opt_h=opt_h, opt_g=opt_g, bank=bank,
        epoch=manifest["epoch"], k=manifest["k"], rngs=rngs,
        freq_mean=table.get("freq_mean"), freq_std=table.get("freq_std"),
        time_mean=table.get("time_mean"), time_std=table.get("time_std"),
    )
