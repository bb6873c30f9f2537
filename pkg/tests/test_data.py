import json
import struct

import numpy as np
import pytest

from coview.data import (
    DataError,
    NoiseSpec,
    TimeSeriesDataset,
    batches,
    compute_frequency_view,
    generate_synthetic,
    inject_noise,
    label_subset,
    load_dataset,
    split,
    standardize,
    write_dataset,
)


def make_ds(n=6, t=16, d=2, seed=0, labeled=True, k=3):
    rng = np.random.default_rng(seed)
    samples = rng.standard_normal((n, t, d)).astype(np.float32)
    labels = np.arange(n, dtype=np.int32) % k if labeled else None
    return TimeSeriesDataset(samples=samples, labels=labels, class_count=k if labeled else None)


# ---------------------------------------------------------------------------
# Container


def test_container_round_trip_labeled(tmp_path):
    ds = make_ds()
    path = tmp_path / "a.tsd"
    write_dataset(ds, path)
    back = load_dataset(path)
    assert back.samples.dtype == np.float32
    np.testing.assert_array_equal(back.samples, ds.samples)
    np.testing.assert_array_equal(back.labels, ds.labels)
    assert back.class_count == ds.class_count


def test_container_round_trip_unlabeled(tmp_path):
    ds = make_ds(labeled=False)
    path = tmp_path / "a.tsd"
    write_dataset(ds, path)
    back = load_dataset(path)
    assert back.labels is None
    np.testing.assert_array_equal(back.samples, ds.samples)


def test_container_payload_size_mismatch(tmp_path):
    ds = make_ds()
    path = tmp_path / "a.tsd"
    write_dataset(ds, path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-4])
    with pytest.raises(DataError, match="payload size mismatch"):
        load_dataset(path)


def test_container_missing_header_field(tmp_path):
    header = {"n": 2, "t": 4, "d": 1, "has_labels": False, "name": "x"}  # class_count absent
    blob = json.dumps(header).encode()
    payload = np.zeros((2, 4, 1), dtype="<f4").tobytes()
    path = tmp_path / "bad.tsd"
    path.write_bytes(b"TSD1" + struct.pack("<I", len(blob)) + blob + payload)
    with pytest.raises(DataError, match="class_count"):
        load_dataset(path)


def test_container_label_out_of_range(tmp_path):
    header = {"n": 2, "t": 4, "d": 1, "has_labels": True, "class_count": 2, "name": ""}
    blob = json.dumps(header).encode()
    payload = np.zeros((2, 4, 1), dtype="<f4").tobytes()
    labels = np.array([0, 5], dtype="<i4").tobytes()
    path = tmp_path / "bad.tsd"
    path.write_bytes(b"TSD1" + struct.pack("<I", len(blob)) + blob + payload + labels)
    with pytest.raises(DataError, match="label out of range"):
        load_dataset(path)


def test_container_truncated_header(tmp_path):
    path = tmp_path / "bad.tsd"
    path.write_bytes(b"TSD1" + struct.pack("<I", 999) + b"{}")
    with pytest.raises(DataError, match="malformed header"):
        load_dataset(path)


def test_csv_fallback(tmp_path):
    path = tmp_path / "a.csv"
    path.write_text("0,1.5,2.5,3.5\n1,-1.0,0.0,1.0\n")
    ds = load_dataset(path)
    assert ds.samples.shape == (2, 3, 1)
    assert ds.samples.dtype == np.float32
    np.testing.assert_array_equal(ds.labels, [0, 1])
    np.testing.assert_allclose(ds.samples[0, :, 0], [1.5, 2.5, 3.5])


def test_csv_fractional_label_rejected(tmp_path):
    path = tmp_path / "a.csv"
    path.write_text("0.5,1.0,2.0,3.0\n")
    with pytest.raises(DataError, match="label out of range"):
        load_dataset(path)


# ---------------------------------------------------------------------------
# Synthetic generator


def test_synthetic_shapes_and_labels():
    ds = generate_synthetic(n_per_class=5, t=64, d=2, k=3, seed=0)
    assert ds.samples.shape == (15, 64, 2)
    assert ds.samples.dtype == np.float32
    assert ds.class_count == 3
    np.testing.assert_array_equal(ds.labels, np.repeat([0, 1, 2], 5))


def test_synthetic_deterministic():
    a = generate_synthetic(4, 64, 1, 2, seed=7)
    b = generate_synthetic(4, 64, 1, 2, seed=7)
    np.testing.assert_array_equal(a.samples, b.samples)
    c = generate_synthetic(4, 64, 1, 2, seed=8)
    assert not np.array_equal(a.samples, c.samples)


def test_synthetic_spectral_peak_matches_class():
    # Class c's tone sits at bin c + 2 with magnitude 0.35 * T / 2, above
    # both the per-bin noise floor and the trend leakage at low bins, so the
    # argmax over non-DC bins recovers it reliably.
    ds = generate_synthetic(n_per_class=20, t=64, d=1, k=4, seed=3)
    spectra = np.abs(np.fft.rfft(ds.samples[:, :, 0].astype(np.float64), axis=1))
    peak = np.argmax(spectra[:, 1:], axis=1) + 1
    assert np.mean(peak == ds.labels + 2) > 0.95


def test_synthetic_preconditions():
    with pytest.raises(ValueError, match="classes"):
        generate_synthetic(4, 64, 1, 1, seed=0)
    with pytest.raises(ValueError, match="t >= 32"):
        generate_synthetic(4, 16, 1, 2, seed=0)


# ---------------------------------------------------------------------------
# Standardization


def test_standardize_train_stats():
    ds = make_ds(n=40, t=32, d=3, seed=1)
    train, others, (mean, std) = standardize(ds, [])
    flat = train.samples.reshape(-1, 3)
    np.testing.assert_allclose(flat.mean(axis=0), 0.0, atol=1e-6)
    np.testing.assert_allclose(flat.std(axis=0), 1.0, atol=1e-5)
    assert others == []


def test_standardize_applies_train_stats_to_others():
    tr = make_ds(n=20, t=16, d=1, seed=2)
    te = make_ds(n=8, t=16, d=1, seed=3)
    tr2, [te2], (mean, std) = standardize(tr, [te])
    expect = (te.samples.astype(np.float64) - mean) / std
    np.testing.assert_allclose(te2.samples, expect.astype(np.float32))


def test_standardize_constant_channel():
    samples = np.full((5, 16, 1), 3.25, dtype=np.float32)
    ds = TimeSeriesDataset(samples=samples)
    out, _, (mean, std) = standardize(ds, [])
    assert std[0] == 1.0
    np.testing.assert_array_equal(out.samples, 0.0)


# ---------------------------------------------------------------------------
# Frequency view


def test_frequency_view_bin_count():
    for t in (16, 17, 32):
        ds = make_ds(n=3, t=t, d=2, labeled=False)
        fv = compute_frequency_view(ds)
        assert fv.spectra.shape == (3, t // 2 + 1, 2)
        assert fv.spectra.dtype == ds.samples.dtype


def test_frequency_view_constant_series():
    # A constant series c maps to magnitude c * T at DC and zero elsewhere.
    t = 32
    ds = TimeSeriesDataset(samples=np.full((1, t, 1), 1.5, dtype=np.float64))
    fv = compute_frequency_view(ds)
    assert fv.spectra[0, 0, 0] == pytest.approx(1.5 * t, rel=1e-12)
    np.testing.assert_allclose(fv.spectra[0, 1:, 0], 0.0, atol=1e-9)


def test_frequency_view_single_tone():
    # sin with amplitude A at integer bin m has magnitude A * T / 2 at m only.
    t, m, amp = 32, 5, 2.0
    x = amp * np.sin(2 * np.pi * m * np.arange(t) / t)
    ds = TimeSeriesDataset(samples=x[None, :, None])
    fv = compute_frequency_view(ds)
    assert fv.spectra[0, m, 0] == pytest.approx(amp * t / 2, rel=1e-9)
    others = np.delete(fv.spectra[0, :, 0], m)
    assert np.max(others) < 1e-9 * amp * t


def test_frequency_view_parseval():
    # Unnormalized DFT: sum x^2 = (1/T) * sum over full spectrum of |X|^2,
    # reconstructed from the half spectrum by doubling interior bins.
    for seed in range(5):
        for t in (32, 33):
            rng = np.random.default_rng(seed)
            x = rng.standard_normal((4, t, 2))
            ds = TimeSeriesDataset(samples=x)
            sp = compute_frequency_view(ds).spectra.astype(np.float64)
            weights = np.full(t // 2 + 1, 2.0)
            weights[0] = 1.0
            if t % 2 == 0:
                weights[-1] = 1.0
            lhs = np.sum(x**2, axis=1)
            rhs = np.einsum("nfd,f->nd", sp**2, weights) / t
            np.testing.assert_allclose(rhs, lhs, rtol=1e-9)


def test_frequency_view_parseval_float32():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((8, 64, 1)).astype(np.float32)
    ds = TimeSeriesDataset(samples=x)
    sp = compute_frequency_view(ds).spectra.astype(np.float64)
    weights = np.full(33, 2.0)
    weights[0] = 1.0
    weights[-1] = 1.0
    lhs = np.sum(x.astype(np.float64) ** 2, axis=1)
    rhs = np.einsum("nfd,f->nd", sp**2, weights) / 64
    np.testing.assert_allclose(rhs, lhs, rtol=1e-6)


def test_frequency_view_log_magnitude():
    ds = make_ds(n=2, t=16, d=1, labeled=False)
    lin = compute_frequency_view(ds, log_magnitude=False).spectra
    log = compute_frequency_view(ds, log_magnitude=True).spectra
    np.testing.assert_allclose(log, np.log1p(lin.astype(np.float64)), rtol=1e-6)


# ---------------------------------------------------------------------------
# Noise injection


def test_inject_noise_zero_level_identity():
    ds = make_ds()
    for kind in ("missing", "gaussian"):
        out = inject_noise(ds, NoiseSpec(kind=kind, level=0.0, seed=5))
        np.testing.assert_array_equal(out.samples, ds.samples)
        assert out.samples is not ds.samples


def test_inject_noise_missing_zeroes_whole_timesteps():
    ds = make_ds(n=30, t=50, d=3, seed=4)
    assert not np.any(np.all(ds.samples == 0.0, axis=2))
    out = inject_noise(ds, NoiseSpec(kind="missing", level=0.4, seed=1))
    step_zeroed = np.all(out.samples == 0.0, axis=2)
    chan_zeroed = out.samples == 0.0
    # every zeroed scalar belongs to a fully zeroed time step
    assert np.array_equal(chan_zeroed, np.repeat(step_zeroed[:, :, None], 3, axis=2))
    frac = step_zeroed.mean()
    assert 0.3 < frac < 0.5


def test_inject_noise_gaussian_scale():
    ds = TimeSeriesDataset(samples=np.zeros((200, 64, 1), dtype=np.float32))
    out = inject_noise(ds, NoiseSpec(kind="gaussian", level=0.5, seed=2))
    assert out.samples.std() == pytest.approx(0.5, rel=0.05)
    assert out.samples.dtype == np.float32


def test_inject_noise_deterministic():
    ds = make_ds(n=10, t=20, d=1)
    a = inject_noise(ds, NoiseSpec(kind="gaussian", level=0.3, seed=9))
    b = inject_noise(ds, NoiseSpec(kind="gaussian", level=0.3, seed=9))
    np.testing.assert_array_equal(a.samples, b.samples)


def test_noise_spec_validation():
    with pytest.raises(DataError, match="kind"):
        NoiseSpec(kind="salt", level=0.1)
    with pytest.raises(DataError, match="missing ratio"):
        NoiseSpec(kind="missing", level=1.5)
    with pytest.raises(DataError, match="gaussian scale"):
        NoiseSpec(kind="gaussian", level=-0.1)


# ---------------------------------------------------------------------------
# Splitting, label subsets, batching


def test_split_disjoint_exhaustive_stratified():
    ds = generate_synthetic(10, 32, 1, 3, seed=0)
    parts = split(ds, [0.8, 0.2], seed=1)
    assert parts[0].n == 24 and parts[1].n == 6
    for part in parts:
        counts = np.bincount(part.labels, minlength=3)
        assert np.all(counts == counts[0])  # 8/8/8 then 2/2/2
    # disjoint and exhaustive over the original rows
    seen = np.concatenate([p.samples.reshape(p.n, -1) for p in parts])
    orig = ds.samples.reshape(ds.n, -1)
    assert seen.shape == orig.shape
    order = np.lexsort(seen.T)
    order0 = np.lexsort(orig.T)
    np.testing.assert_array_equal(seen[order], orig[order0])


def test_split_largest_remainder_oracle():
    # 7 items at [0.5, 0.3, 0.2]: floors 3/2/1 leave one item, largest
    # remainder 0.5 sits at position 0, so counts come out [4, 2, 1].
    samples = np.random.default_rng(0).standard_normal((7, 8, 1))
    ds = TimeSeriesDataset(samples=samples)
    parts = split(ds, [0.5, 0.3, 0.2], seed=0)
    assert [p.n for p in parts] == [4, 2, 1]


def test_split_deterministic():
    ds = generate_synthetic(8, 32, 1, 2, seed=0)
    a = split(ds, [0.75, 0.25], seed=3)
    b = split(ds, [0.75, 0.25], seed=3)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.samples, y.samples)


def test_split_errors():
    ds = make_ds(n=6)
    with pytest.raises(DataError, match="sum to 1"):
        split(ds, [0.5, 0.4], seed=0)
    with pytest.raises(DataError, match="empty split"):
        split(ds, [0.999999999, 1e-9], seed=0)


def test_label_subset_per_class_ceil():
    ds = generate_synthetic(10, 32, 1, 4, seed=0)
    sub = label_subset(ds, 0.25, seed=0)
    counts = np.bincount(ds.labels[sub.indices], minlength=4)
    np.testing.assert_array_equal(counts, [3, 3, 3, 3])  # ceil(0.25 * 10)
    assert np.all(np.diff(sub.indices) > 0)


def test_label_subset_tiny_fraction_keeps_every_class():
    ds = generate_synthetic(5, 32, 1, 3, seed=0)
    sub = label_subset(ds, 0.01, seed=0)
    assert len(np.unique(ds.labels[sub.indices])) == 3
    assert sub.size == 3


def test_label_subset_errors():
    ds = make_ds(labeled=False)
    with pytest.raises(DataError, match="labeled"):
        label_subset(ds, 0.5, seed=0)
    ds2 = generate_synthetic(4, 32, 1, 2, seed=0)
    with pytest.raises(DataError, match="fraction"):
        label_subset(ds2, 0.0, seed=0)


def test_batches_partition_property():
    for seed in range(10):
        n = int(np.random.default_rng(seed).integers(2, 40))
        got = batches(n, 4, shuffle_seed=seed)
        flat = np.sort(np.concatenate(got))
        np.testing.assert_array_equal(flat, np.arange(n))
        for b in got:
            assert len(b) >= 2


def test_batches_merges_short_tail():
    got = batches(9, 4, shuffle_seed=0)
    assert [len(b) for b in got] == [4, 5]


def test_batches_exact_division():
    got = batches(8, 4, shuffle_seed=0)
    assert [len(b) for b in got] == [4, 4]


def test_batches_single_short_batch_kept():
    # n below batch size still yields one batch when it has 2+ samples
    got = batches(3, 8, shuffle_seed=0)
    assert [len(b) for b in got] == [3]


def test_batches_batch_size_error():
    with pytest.raises(ValueError, match="instance loss requires at least 2 samples per batch"):
        batches(10, 1, shuffle_seed=0)


def test_dataset_validation():
    with pytest.raises(DataError, match="non-finite"):
        TimeSeriesDataset(samples=np.array([[[np.nan], [1.0]]]))
    with pytest.raises(DataError, match="label out of range"):
        TimeSeriesDataset(
            samples=np.zeros((2, 4, 1)), labels=np.array([0, 3]), class_count=2
        )
    with pytest.raises(DataError, match="labels must have shape"):
        TimeSeriesDataset(samples=np.zeros((2, 4, 1)), labels=np.array([0, 1, 0]))


def test_dataset_2d_promotes_to_univariate():
    ds = TimeSeriesDataset(samples=np.zeros((3, 8)))
    assert ds.samples.shape == (3, 8, 1)
