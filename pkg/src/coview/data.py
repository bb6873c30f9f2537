"""Dataset handling for fixed-length multichannel time series.

Covers the binary TSD container (with a CSV fallback for univariate labeled
data), synthetic data generation, per-channel standardization, the magnitude
spectrum view, noise injection, stratified splitting, and mini-batch index
generation.

TSD container layout (little-endian):
    magic "TSD1" | u32 header length | UTF-8 JSON header | payload
    header keys: n, t, d, has_labels, class_count, name
    payload: float32 samples [n][t][d] row-major, then int32 labels [n]
    when has_labels is true.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

TSD_MAGIC = b"TSD1"

_HEADER_KEYS = ("n", "t", "d", "has_labels", "class_count", "name")


class DataError(ValueError):
    """A dataset file or field violates the data contract."""


@dataclass
class TimeSeriesDataset:
    """N fixed-length series of shape [N, T, d] with optional class labels."""

    samples: np.ndarray
    labels: np.ndarray | None = None
    class_count: int | None = None
    name: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        if self.samples.ndim == 2:
            self.samples = self.samples[:, :, None]
        if self.samples.ndim != 3:
            raise DataError(f"samples must be [N][T][d], got shape {self.samples.shape}")
        n, t, d = self.samples.shape
        if n < 1 or t < 2 or d < 1:
            raise DataError(f"need N >= 1, T >= 2, d >= 1, got N={n}, T={t}, d={d}")
        if not np.all(np.isfinite(self.samples)):
            raise DataError("samples contain non-finite values")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int32)
            if self.labels.shape != (n,):
                raise DataError(f"labels must have shape [{n}], got {self.labels.shape}")
            if self.class_count is None:
                self.class_count = int(self.labels.max()) + 1
            if self.labels.min() < 0 or self.labels.max() >= self.class_count:
                raise DataError(
                    f"label out of range: values must lie in [0, {self.class_count})"
                )

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def t(self) -> int:
        return self.samples.shape[1]

    @property
    def d(self) -> int:
        return self.samples.shape[2]

    def take(self, indices: np.ndarray, name: str | None = None) -> "TimeSeriesDataset":
        """Row subset preserving labels and metadata."""
        indices = np.asarray(indices)
        return TimeSeriesDataset(
            samples=self.samples[indices],
            labels=None if self.labels is None else self.labels[indices],
            class_count=self.class_count,
            name=self.name if name is None else name,
        )


@dataclass
class FrequencyView:
    """Magnitude spectra [N, F, d] with F = T//2 + 1 bins per channel."""

    spectra: np.ndarray


@dataclass
class NoiseSpec:
    """Corruption description: kind 'missing' (ratio p) or 'gaussian' (scale sigma)."""

    kind: str
    level: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("missing", "gaussian"):
            raise DataError(f"unknown noise kind {self.kind!r}")
        if self.kind == "missing" and not 0.0 <= self.level <= 1.0:
            raise DataError(f"missing ratio must be in [0, 1], got {self.level}")
        if self.kind == "gaussian" and self.level < 0.0:
            raise DataError(f"gaussian scale must be >= 0, got {self.level}")


@dataclass
class LabeledSubset:
    """Indices into a training set whose labels may be used during training."""

    indices: np.ndarray

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        if len(np.unique(self.indices)) != len(self.indices):
            raise DataError("labeled subset indices must be distinct")

    @property
    def size(self) -> int:
        return len(self.indices)


# ---------------------------------------------------------------------------
# Container io


def write_dataset(ds: TimeSeriesDataset, path) -> None:
    """Write a dataset in the TSD container format."""
    header = {
        "n": ds.n,
        "t": ds.t,
        "d": ds.d,
        "has_labels": ds.labels is not None,
        "class_count": ds.class_count,
        "name": ds.name,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(TSD_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(ds.samples, dtype="<f4").tobytes())
        if ds.labels is not None:
            fh.write(np.ascontiguousarray(ds.labels, dtype="<i4").tobytes())


def load_dataset(path) -> TimeSeriesDataset:
    """Load a TSD container, falling back to CSV when the magic is absent."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != TSD_MAGIC:
        return _load_csv(path)

    if len(raw) < 8:
        raise DataError("malformed header: file truncated before header length")
    (header_len,) = struct.unpack("<I", raw[4:8])
    if len(raw) < 8 + header_len:
        raise DataError("malformed header: declared header length overruns the file")
    try:
        header = json.loads(raw[8 : 8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"malformed header: not valid JSON ({exc})") from exc
    for key in _HEADER_KEYS:
        if key not in header:
            raise DataError(f"malformed header: missing field {key!r}")
    n, t, d = header["n"], header["t"], header["d"]
    for key, value in (("n", n), ("t", t), ("d", d)):
        if not isinstance(value, int) or value < 1:
            raise DataError(f"malformed header: field {key!r} must be a positive integer")

    payload = raw[8 + header_len :]
    want = n * t * d * 4
    if header["has_labels"]:
        want += n * 4
    if len(payload) != want:
        raise DataError(
            f"payload size mismatch: header declares {want} bytes, found {len(payload)}"
        )
    samples = np.frombuffer(payload[: n * t * d * 4], dtype="<f4").reshape(n, t, d)
    labels = None
    if header["has_labels"]:
        labels = np.frombuffer(payload[n * t * d * 4 :], dtype="<i4").copy()
        k = header["class_count"]
        if not isinstance(k, int) or k < 1:
            raise DataError("malformed header: field 'class_count' must be a positive integer")
        if labels.min() < 0 or labels.max() >= k:
            raise DataError(f"label out of range: values must lie in [0, {k})")
    return TimeSeriesDataset(
        samples=samples.copy(),
        labels=labels,
        class_count=header["class_count"],
        name=header["name"] or "",
    )


def _load_csv(path) -> TimeSeriesDataset:
    """CSV fallback: one univariate sample per row, 'label,v1,...,vT'."""
    try:
        table = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise DataError(f"malformed header: not a TSD container and not parseable CSV ({exc})") from exc
    if table.shape[1] < 3:
        raise DataError("malformed header: CSV rows need a label plus at least two values")
    labels = table[:, 0]
    if not np.allclose(labels, np.round(labels)):
        raise DataError("label out of range: CSV label column must hold integers")
    labels = labels.astype(np.int32)
    if labels.min() < 0:
        raise DataError("label out of range: CSV labels must be >= 0")
    samples = table[:, 1:].astype(np.float32)[:, :, None]
    return TimeSeriesDataset(samples=samples, labels=labels, name="")


# ---------------------------------------------------------------------------
# Synthesis and preprocessing


TONE_AMPLITUDE = 0.35
SLOPE_CYCLE = (-0.15, 0.6, -0.6, 0.15)


def generate_synthetic(
    n_per_class: int, t: int, d: int, k: int, seed: int
) -> TimeSeriesDataset:
    """Sinusoid-plus-trend class mixture with Gaussian observation noise.

    Class c carries a sinusoid of amplitude 0.35 at frequency bin c + 2 with
    a random phase per sample and channel, a class-specific linear trend, and
    i.i.d. N(0, 0.3^2) noise. Trend slopes cycle through SLOPE_CYCLE (scaled
    1.5x per full cycle so every class stays distinct); the cycle is chosen so
    slope magnitude is not monotone in the tone frequency, which makes the
    two views' confusions complementary rather than redundant.
    """
    if k < 2:
        raise ValueError(f"need at least 2 classes, got {k}")
    if t < 32:
        raise ValueError(f"need t >= 32, got {t}")
    rng = np.random.default_rng(seed)
    n = n_per_class * k
    ts = np.arange(t, dtype=np.float64)
    ramp = np.linspace(-0.5, 0.5, t)
    samples = np.empty((n, t, d), dtype=np.float32)
    labels = np.empty(n, dtype=np.int32)
    for c in range(k):
        rows = slice(c * n_per_class, (c + 1) * n_per_class)
        phase = rng.uniform(0.0, 2.0 * np.pi, size=(n_per_class, 1, d))
        tone = TONE_AMPLITUDE * np.sin(2.0 * np.pi * (c + 2) * ts[None, :, None] / t + phase)
        slope = SLOPE_CYCLE[c % 4] * (1.0 + 0.5 * (c // 4))
        noise = 0.3 * rng.standard_normal((n_per_class, t, d))
        samples[rows] = (tone + slope * ramp[None, :, None] + noise).astype(np.float32)
        labels[rows] = c
    return TimeSeriesDataset(samples=samples, labels=labels, class_count=k, name="synthetic")


def standardize(
    train: TimeSeriesDataset, others: list[TimeSeriesDataset] = ()
) -> tuple[TimeSeriesDataset, list[TimeSeriesDataset], tuple[np.ndarray, np.ndarray]]:
    """Z-score every dataset per channel using statistics of the train set.

    Channels with a near-zero standard deviation (< 1e-8) keep std 1 so a
    constant channel maps to all zeros instead of blowing up.
    """
    flat = train.samples.reshape(-1, train.d).astype(np.float64)
    mean = flat.mean(axis=0)
    std = flat.std(axis=0)
    std = np.where(std < 1e-8, 1.0, std)

    def apply(ds: TimeSeriesDataset) -> TimeSeriesDataset:
        z = (ds.samples.astype(np.float64) - mean) / std
        return TimeSeriesDataset(
            samples=z.astype(np.float32),
            labels=ds.labels,
            class_count=ds.class_count,
            name=ds.name,
        )

    return apply(train), [apply(ds) for ds in others], (mean, std)


def apply_standardization(
    ds: TimeSeriesDataset, mean: np.ndarray, std: np.ndarray
) -> TimeSeriesDataset:
    """Apply previously computed per-channel statistics to a dataset."""
    z = (ds.samples.astype(np.float64) - np.asarray(mean)) / np.asarray(std)
    return TimeSeriesDataset(
        samples=z.astype(np.float32),
        labels=ds.labels,
        class_count=ds.class_count,
        name=ds.name,
    )


def compute_frequency_view(ds: TimeSeriesDataset, log_magnitude: bool = False) -> FrequencyView:
    """Per-channel magnitude of the unnormalized real-input DFT of each series.

    Output has T//2 + 1 bins. With log_magnitude, log1p of the magnitudes is
    returned instead.
    """
    spectra = np.abs(np.fft.rfft(ds.samples.astype(np.float64), axis=1))
    if log_magnitude:
        spectra = np.log1p(spectra)
    return FrequencyView(spectra=spectra.astype(ds.samples.dtype))


def inject_noise(ds: TimeSeriesDataset, spec: NoiseSpec) -> TimeSeriesDataset:
    """Corrupt a dataset: zero whole time steps ('missing') or add Gaussian noise.

    Missingness zeroes each (sample, time step) position across all channels
    independently with probability ``level``; Gaussian noise adds
    N(0, level^2) to every scalar (level in units of per-channel std, so the
    input should be standardized). Deterministic given ``spec.seed``.
    """
    if spec.level == 0.0:
        return TimeSeriesDataset(
            samples=ds.samples.copy(), labels=ds.labels, class_count=ds.class_count, name=ds.name
        )
    rng = np.random.default_rng(spec.seed)
    samples = ds.samples.copy()
    if spec.kind == "missing":
        mask = rng.random((ds.n, ds.t)) < spec.level
        samples[mask] = 0.0
    else:
        noise = spec.level * rng.standard_normal(samples.shape)
        samples = samples + noise.astype(samples.dtype)
    return TimeSeriesDataset(
        samples=samples, labels=ds.labels, class_count=ds.class_count, name=ds.name
    )


# ---------------------------------------------------------------------------
# Splitting and batching


def _allocate(count: int, fractions: list[float]) -> list[int]:
    """Largest-remainder apportionment of `count` items over fractions."""
    raw = [count * f for f in fractions]
    base = [math.floor(r) for r in raw]
    short = count - sum(base)
    order = sorted(range(len(fractions)), key=lambda j: raw[j] - base[j], reverse=True)
    for j in order[:short]:
        base[j] += 1
    return base


def split(ds: TimeSeriesDataset, fractions: list[float], seed: int) -> list[TimeSeriesDataset]:
    """Disjoint, exhaustive split, stratified by label when labels exist.

    Deterministic given the seed. Raises when any split comes out empty.
    """
    fractions = list(fractions)
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise DataError(f"fractions must sum to 1, got {sum(fractions)}")
    rng = np.random.default_rng(seed)
    parts: list[list[np.ndarray]] = [[] for _ in fractions]
    if ds.labels is not None:
        groups = [np.flatnonzero(ds.labels == c) for c in range(ds.class_count)]
    else:
        groups = [np.arange(ds.n)]
    for members in groups:
        perm = rng.permutation(members)
        counts = _allocate(len(members), fractions)
        at = 0
        for j, cnt in enumerate(counts):
            parts[j].append(perm[at : at + cnt])
            at += cnt
    out = []
    for j, chunks in enumerate(parts):
        idx = np.sort(np.concatenate(chunks))
        if len(idx) == 0:
            raise DataError(f"fraction {fractions[j]} yields an empty split (position {j})")
        out.append(ds.take(idx))
    return out


def label_subset(ds: TimeSeriesDataset, fraction: float, seed: int) -> LabeledSubset:
    """Stratified index sample of roughly `fraction` of the training set.

    Per-class counts round up, so every class contributes at least one index.
    """
    if ds.labels is None:
        raise DataError("label_subset requires a labeled dataset")
    if not 0.0 < fraction <= 1.0:
        raise DataError(f"fraction must be in (0, 1], got {fraction}")
    rng = np.random.default_rng(seed)
    picks = []
    for c in range(ds.class_count):
        members = np.flatnonzero(ds.labels == c)
        want = math.ceil(fraction * len(members))
        picks.append(rng.permutation(members)[:want])
    return LabeledSubset(indices=np.sort(np.concatenate(picks)))


def batches(ds, batch_size: int, shuffle_seed: int) -> list[np.ndarray]:
    """Shuffled index batches over a dataset (or an explicit sample count).

    A trailing batch of fewer than 2 samples is merged into the previous one
    so every batch can supply at least one in-batch negative.
    """
    rng = np.random.default_rng(shuffle_seed)
    n = ds if isinstance(ds, int) else ds.n
    return batch_indices(n, batch_size, rng)


def batch_indices(n: int, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Batch partition of a fresh permutation drawn from `rng`."""
    if batch_size < 2:
        raise ValueError("instance loss requires at least 2 samples per batch")
    if n < 2:
        raise ValueError(f"need at least 2 samples to form a batch, got {n}")
    perm = rng.permutation(n)
    out = [perm[i : i + batch_size] for i in range(0, n, batch_size)]
    if len(out) > 1 and len(out[-1]) < 2:
        tail = out.pop()
        out[-1] = np.concatenate([out[-1], tail])
    return out
