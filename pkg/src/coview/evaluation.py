"""Frozen-encoder evaluation: probe, metrics, ablations, robustness sweeps.

The linear probe is a multinomial logistic regression trained full batch by
gradient descent with Armijo backtracking, its L2 strength chosen on a
stratified 20% validation split and refit on the full probe-train set.
AUROC is macro one-vs-rest from midranks; NMI is normalized by the
arithmetic mean of the partition entropies (natural log).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .data import NoiseSpec, TimeSeriesDataset, apply_standardization, inject_noise, split, standardize
from .encoder import concat_views
from .losses import l2_normalize
from .prototypes import kmeans

L2_GRID = (1e-4, 1e-3, 1e-2, 1e-1)
ABLATION_VARIANTS = ("T", "F", "T+F", "full")


@dataclass
class EvalReport:
    accuracy: float
    auroc: float
    nmi: float
    chosen_l2: float
    per_class: list

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def extract_embeddings(state, ds: TimeSeriesDataset) -> np.ndarray:
    """Concatenated clean-view embeddings, row i for dataset index i."""
    from .training import encode_dataset

    emb_h, emb_g = encode_dataset(state, ds)
    if emb_h is not None and emb_g is not None:
        return concat_views(emb_h, emb_g)
    return emb_h if emb_h is not None else emb_g


# ---------------------------------------------------------------------------
# Metrics


def nmi(pred: np.ndarray, truth: np.ndarray) -> float:
    """Mutual information over the mean of the partition entropies, in [0, 1]."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.size == 0 or pred.shape != truth.shape:
        raise ValueError("nonempty partitions of equal length required")
    _, pi = np.unique(pred, return_inverse=True)
    _, ti = np.unique(truth, return_inverse=True)
    n = pred.size
    joint = np.zeros((pi.max() + 1, ti.max() + 1))
    np.add.at(joint, (pi, ti), 1.0)
    joint /= n
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    nz = joint > 0
    outer = np.outer(px, py)
    mi = float(np.sum(joint[nz] * (np.log(joint[nz]) - np.log(outer[nz]))))
    hx = float(-np.sum(px[px > 0] * np.log(px[px > 0])))
    hy = float(-np.sum(py[py > 0] * np.log(py[py > 0])))
    denom = 0.5 * (hx + hy)
    if denom == 0.0:
        # both partitions are single clusters: identical structure
        return 1.0
    return float(np.clip(mi / denom, 0.0, 1.0))


def _best_kmeans(emb: np.ndarray, k: int, rng, restarts: int = 8):
    """Best-of-restarts k-means by final inertia. Returns (centroids, assignments)."""
    best = None
    for _ in range(restarts):
        centroids, assigned, history = kmeans(emb, k, rng, return_inertia=True)
        if best is None or history[-1] < best[2]:
            best = (centroids, assigned, history[-1])
    return best[0], best[1]


def cluster_nmi(parts: list, labels: np.ndarray, k: int, rng, restarts: int = 8) -> float:
    """NMI of a k-means clustering of concatenated view embeddings vs labels.

    Each view is l2-normalized before concatenation so neither view dominates
    by scale, matching the cosine geometry the losses train in.
    """
    arrs = [l2_normalize(np.asarray(p, dtype=np.float64)) for p in parts]
    emb = arrs[0] if len(arrs) == 1 else np.concatenate(arrs, axis=1)
    _, assigned = _best_kmeans(emb, k, rng, restarts)
    return nmi(assigned, labels)


def auroc_macro(scores: np.ndarray, labels: np.ndarray) -> float:
    """Macro one-vs-rest AUROC from midranks.

    Classes without both a positive and a negative are skipped; all skipped
    is an error.
    """
    scores = np.asarray(scores)
    labels = np.asarray(labels)
    if scores.ndim != 2 or scores.shape[1] < 2:
        raise ValueError(f"scores must be [N][K] with K >= 2, got {scores.shape}")
    n, k = scores.shape
    aucs = []
    for c in range(k):
        pos = labels == c
        n_pos = int(pos.sum())
        n_neg = n - n_pos
        if n_pos == 0 or n_neg == 0:
            continue
        ranks = rankdata(scores[:, c])
        auc = (ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
        aucs.append(auc)
    if not aucs:
        raise ValueError("no class has both positives and negatives")
    return float(np.mean(aucs))


# ---------------------------------------------------------------------------
# Linear probe


def _softmax_fit(x, y, k, l2, max_iter=2000, tol=1e-5):
    """Full-batch GD with Armijo backtracking on CE + l2 * ||W||^2."""
    n, d = x.shape
    w = np.zeros((d, k))
    b = np.zeros(k)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), y] = 1.0

    def objective(w, b):
        logits = x @ w + b
        shift = logits - logits.max(axis=1, keepdims=True)
        lse = np.log(np.sum(np.exp(shift), axis=1))
        ce = float(np.mean(lse - shift[np.arange(n), y]))
        return ce + l2 * float(np.sum(w * w))

    value = objective(w, b)
    eta = 1.0
    for _ in range(max_iter):
        logits = x @ w + b
        shift = logits - logits.max(axis=1, keepdims=True)
        expl = np.exp(shift)
        probs = expl / expl.sum(axis=1, keepdims=True)
        d_logits = (probs - onehot) / n
        g_w = x.T @ d_logits + 2.0 * l2 * w
        g_b = d_logits.sum(axis=0)
        g_norm2 = float(np.sum(g_w * g_w) + np.sum(g_b * g_b))
        if np.sqrt(g_norm2) < tol:
            break
        eta = min(eta * 2.0, 1e4)
        for _ in range(60):
            new_w = w - eta * g_w
            new_b = b - eta * g_b
            new_value = objective(new_w, new_b)
            if new_value <= value - 1e-4 * eta * g_norm2:
                break
            eta *= 0.5
        w, b, value = new_w, new_b, new_value
    return w, b


def _predict_proba(w, b, x):
    logits = x @ w + b
    shift = logits - logits.max(axis=1, keepdims=True)
    expl = np.exp(shift)
    return expl / expl.sum(axis=1, keepdims=True)


def _stratified_holdout(labels, fraction, rng):
    """Per-class index split into (fit, held-out) with at least one fit row."""
    fit, held = [], []
    for c in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == c))
        n_held = int(round(fraction * len(members)))
        n_held = min(n_held, len(members) - 1)
        held.append(members[:n_held])
        fit.append(members[n_held:])
    return np.sort(np.concatenate(fit)), np.sort(np.concatenate(held))


def linear_probe(
    train_emb: np.ndarray,
    train_labels: np.ndarray,
    test_emb: np.ndarray,
    test_labels: np.ndarray,
    seed: int,
) -> EvalReport:
    """Train the probe, pick L2 on a 20% validation split, report on test."""
    train_emb = np.asarray(train_emb, dtype=np.float64)
    test_emb = np.asarray(test_emb, dtype=np.float64)
    train_labels = np.asarray(train_labels)
    test_labels = np.asarray(test_labels)

    classes = np.unique(train_labels)
    if len(classes) < 2:
        raise ValueError(
            f"degenerate class distribution: probe needs >= 2 classes, got {len(classes)}"
        )
    if not np.all(np.isin(test_labels, classes)):
        raise ValueError("degenerate class distribution: test labels missing from train")
    remap = {c: i for i, c in enumerate(classes)}
    y_train = np.array([remap[c] for c in train_labels])
    y_test = np.array([remap[c] for c in test_labels])
    k = len(classes)

    rng = np.random.default_rng(seed)
    fit_idx, val_idx = _stratified_holdout(y_train, 0.2, rng)
    best_l2, best_acc = None, -1.0
    for l2 in L2_GRID:
        w, b = _softmax_fit(train_emb[fit_idx], y_train[fit_idx], k, l2)
        if len(val_idx):
            pred = np.argmax(_predict_proba(w, b, train_emb[val_idx]), axis=1)
            acc = float(np.mean(pred == y_train[val_idx]))
        else:
            acc = 0.0
        if acc > best_acc:
            best_l2, best_acc = l2, acc

    w, b = _softmax_fit(train_emb, y_train, k, best_l2)
    probs = _predict_proba(w, b, test_emb)
    pred = np.argmax(probs, axis=1)
    accuracy = float(np.mean(pred == y_test))
    auroc = auroc_macro(probs, y_test)
    _, cluster = _best_kmeans(test_emb, k, np.random.default_rng(seed + 1))
    report_nmi = nmi(cluster, y_test)

    per_class = []
    for i, c in enumerate(classes):
        members = y_test == i
        support = int(members.sum())
        row = {"label": int(c), "support": support}
        row["recall"] = float(np.mean(pred[members] == i)) if support else None
        if support and support < len(y_test):
            ranks = rankdata(probs[:, i])
            row["auroc"] = float(
                (ranks[members].sum() - support * (support + 1) / 2.0)
                / (support * (len(y_test) - support))
            )
        else:
            row["auroc"] = None
        per_class.append(row)

    return EvalReport(
        accuracy=accuracy, auroc=auroc, nmi=report_nmi,
        chosen_l2=float(best_l2), per_class=per_class,
    )


# ---------------------------------------------------------------------------
# Experiment drivers


def _split_train_test(ds: TimeSeriesDataset, test_fraction: float, seed: int):
    return split(ds, [1.0 - test_fraction, test_fraction], seed=seed)


def evaluate_state(state, train_ds, test_ds, seed: int) -> EvalReport:
    """Probe a trained state: embeddings from both splits, report on test."""
    if train_ds.labels is None or test_ds.labels is None:
        raise ValueError("evaluation requires labeled datasets")
    return linear_probe(
        extract_embeddings(state, train_ds), train_ds.labels,
        extract_embeddings(state, test_ds), test_ds.labels, seed,
    )


def _train_and_probe(train_ds, test_ds, config, seed: int) -> EvalReport:
    from .training import train

    cfg = dataclasses.replace(config, seed=seed)
    state, _ = train(train_ds, cfg)
    return evaluate_state(state, train_ds, test_ds, seed)


def robustness_sweep(
    base_ds: TimeSeriesDataset,
    levels: list,
    config,
    seeds: list,
    test_fraction: float = 0.25,
    corrupt: str = "both",
    on_row=None,
) -> list:
    """Train/evaluate at each noise level and seed; corrupted splits by default.

    Returns rows of {kind, level, seed, accuracy, auroc}; on_row sees each
    row as soon as its cell finishes.
    """
    if corrupt not in ("both", "train", "test"):
        raise ValueError(f"unknown corruption target {corrupt!r}")
    train_raw, test_raw = _split_train_test(base_ds, test_fraction, config.seed)
    rows = []
    for spec in levels:
        for seed in seeds:
            cell = NoiseSpec(kind=spec.kind, level=spec.level, seed=seed)
            tr = inject_noise(train_raw, cell) if corrupt in ("both", "train") else train_raw
            te = inject_noise(test_raw, cell) if corrupt in ("both", "test") else test_raw
            tr, _, stats = standardize(tr, [])
            te = apply_standardization(te, *stats)
            report = _train_and_probe(tr, te, config, seed)
            row = {
                "kind": spec.kind, "level": float(spec.level), "seed": int(seed),
                "accuracy": report.accuracy, "auroc": report.auroc,
            }
            rows.append(row)
            if on_row is not None:
                on_row(row)
    return rows


def _variant_config(config, variant: str):
    if variant == "T":
        return dataclasses.replace(config, views="time")
    if variant == "F":
        return dataclasses.replace(config, views="freq")
    if variant == "T+F":
        return dataclasses.replace(config, views="both", warmup_epochs=config.epochs, lam=0.0)
    if variant == "full":
        return dataclasses.replace(config, views="both")
    raise ValueError(f"unknown ablation variant {variant!r}")


def run_ablation(
    ds: TimeSeriesDataset,
    variants: list,
    config,
    seeds: list,
    test_fraction: float = 0.25,
    on_row=None,
) -> list:
    """Train/evaluate each variant and seed on a common split.

    Returns rows of {variant, seed, accuracy, auroc}; on_row sees each row
    as soon as its cell finishes.
    """
    train_raw, test_raw = _split_train_test(ds, test_fraction, config.seed)
    tr, [te], _ = standardize(train_raw, [test_raw])
    rows = []
    for variant in variants:
        for seed in seeds:
            report = _train_and_probe(tr, te, _variant_config(config, variant), seed)
            row = {
                "variant": variant, "seed": int(seed),
                "accuracy": report.accuracy, "auroc": report.auroc,
            }
            rows.append(row)
            if on_row is not None:
                on_row(row)
    return rows
