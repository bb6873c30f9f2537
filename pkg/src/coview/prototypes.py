"""Prototype banks: clustering, cross-view means, and moving-average updates.

A bank holds one PrototypeWay per prototype count. Intra-view prototypes
come from k-means over l2-normalized embeddings (first refresh), from
moving-average carries (later refreshes), or from labeled class means
(semi-supervised K-way). Cross-view prototypes are plain group means of one
view's embeddings under the other view's assignments. Stored prototypes are
raw means/blends in normalized-embedding space; l2 normalization for
similarity happens inside the loss module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .losses import l2_normalize


@dataclass
class PrototypeWay:
    """Prototypes, assignments, and validity masks for one prototype count."""

    c: int
    intra_h: np.ndarray
    intra_g: np.ndarray
    cross_h: np.ndarray
    cross_g: np.ndarray
    assign_h: np.ndarray
    assign_g: np.ndarray
    valid_mask_h: np.ndarray
    valid_mask_g: np.ndarray

    def __post_init__(self):
        for name in ("assign_h", "assign_g"):
            a = getattr(self, name)
            if len(a) and (a.min() < 0 or a.max() >= self.c):
                raise ValueError(f"{name} out of range for {self.c} prototypes")


@dataclass
class PrototypeBank:
    ways: list

    def __post_init__(self):
        sizes = [way.c for way in self.ways]
        if sorted(set(sizes)) != sizes:
            raise ValueError(f"way sizes must be strictly increasing, got {sizes}")


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _plus_plus_seed(emb: np.ndarray, c: int, rng: np.random.Generator) -> np.ndarray:
    n = emb.shape[0]
    centroids = np.empty((c, emb.shape[1]), dtype=emb.dtype)
    centroids[0] = emb[rng.integers(n)]
    dist2 = np.sum((emb - centroids[0]) ** 2, axis=1)
    for j in range(1, c):
        total = dist2.sum()
        if total > 0:
            pick = rng.choice(n, p=dist2 / total)
        else:
            pick = rng.integers(n)
        centroids[j] = emb[pick]
        dist2 = np.minimum(dist2, np.sum((emb - centroids[j]) ** 2, axis=1))
    return centroids


def assign(emb: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Nearest centroid per row by Euclidean distance, lowest index on ties."""
    emb = np.asarray(emb)
    centroids = np.asarray(centroids)
    d2 = (
        np.sum(emb**2, axis=1, keepdims=True)
        - 2.0 * emb @ centroids.T
        + np.sum(centroids**2, axis=1)
    )
    return np.argmin(d2, axis=1)


def kmeans(
    emb: np.ndarray,
    c: int,
    seed,
    max_iter: int = 100,
    tol: float = 1e-6,
    return_inertia: bool = False,
):
    """Lloyd iterations with k-means++ seeding on l2-normalized embeddings.

    Empty clusters are reseeded to the point currently farthest from its
    assigned centroid. Stops when the largest centroid shift drops below
    tol. Returns (centroids, assignments) and optionally the per-iteration
    inertia history.
    """
    emb = np.asarray(emb)
    n = emb.shape[0]
    if c < 1:
        raise ValueError(f"prototype count must be >= 1, got {c}")
    if n < c:
        raise ValueError(f"need at least as many samples as prototypes: N={n} < C={c}")
    rng = _as_rng(seed)
    embn = l2_normalize(emb.astype(np.float64))
    centroids = _plus_plus_seed(embn, c, rng)
    inertia_history = []
    assignments = assign(embn, centroids)
    for _ in range(max_iter):
        d2 = np.sum((embn - centroids[assignments]) ** 2, axis=1)
        inertia_history.append(float(d2.sum()))
        new_centroids = centroids.copy()
        counts = np.bincount(assignments, minlength=c)
        for j in range(c):
            if counts[j] > 0:
                new_centroids[j] = embn[assignments == j].mean(axis=0)
        worst = d2.copy()
        for j in np.flatnonzero(counts == 0):
            pick = int(np.argmax(worst))
            new_centroids[j] = embn[pick]
            worst[pick] = -np.inf
        shift = float(np.max(np.linalg.norm(new_centroids - centroids, axis=1)))
        centroids = new_centroids
        assignments = assign(embn, centroids)
        if shift < tol:
            break
    if return_inertia:
        d2 = np.sum((embn - centroids[assignments]) ** 2, axis=1)
        inertia_history.append(float(d2.sum()))
        return centroids, assignments, inertia_history
    return centroids, assignments


def cross_view_prototypes(
    emb: np.ndarray, cross_assign: np.ndarray, c: int, fallback: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Group means of one view's embeddings under the other view's assignments.

    Empty groups get valid_mask False and copy the fallback row (the
    intra-view prototype) when one is provided, else zeros.
    """
    emb = np.asarray(emb)
    cross_assign = np.asarray(cross_assign)
    if len(cross_assign) != emb.shape[0]:
        raise ValueError(
            f"assignment length {len(cross_assign)} does not match {emb.shape[0]} embeddings"
        )
    if len(cross_assign) and (cross_assign.min() < 0 or cross_assign.max() >= c):
        raise ValueError(f"assignments out of range for {c} prototypes")
    out = np.zeros((c, emb.shape[1]), dtype=np.float64)
    counts = np.bincount(cross_assign, minlength=c).astype(np.float64)
    np.add.at(out, cross_assign, emb.astype(np.float64))
    valid = counts > 0
    out[valid] /= counts[valid, None]
    if fallback is not None:
        out[~valid] = np.asarray(fallback, dtype=np.float64)[~valid]
    return out.astype(emb.dtype), valid


def select_cross_prototype(i, way: PrototypeWay) -> tuple[np.ndarray, np.ndarray]:
    """Cross-view prototype rows for instance(s) i: (q for view h, q for view g)."""
    idx = np.asarray(i)
    if idx.size and int(idx.max()) >= len(way.assign_g):
        raise ValueError(
            f"stale prototype bank: index {int(idx.max())} outside "
            f"{len(way.assign_g)} stored assignments"
        )
    return way.cross_h[way.assign_g[idx]], way.cross_g[way.assign_h[idx]]


def moving_average_update(
    prototypes: np.ndarray,
    batch_emb: np.ndarray,
    batch_assign: np.ndarray,
    gamma: float,
) -> np.ndarray:
    """Blend each prototype with the batch mean of its members.

    Prototypes with no batch members are returned unchanged.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must be in [0, 1], got {gamma}")
    prototypes = np.asarray(prototypes)
    batch_assign = np.asarray(batch_assign)
    out = prototypes.astype(np.float64).copy()
    c = prototypes.shape[0]
    counts = np.bincount(batch_assign, minlength=c).astype(np.float64)
    sums = np.zeros_like(out)
    np.add.at(sums, batch_assign, np.asarray(batch_emb, dtype=np.float64))
    present = counts > 0
    means = sums[present] / counts[present, None]
    out[present] = (1.0 - gamma) * out[present] + gamma * means
    return out.astype(prototypes.dtype)


def semi_supervised_prototypes(emb: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    """Per-class arithmetic means of labeled embeddings."""
    emb = np.asarray(emb)
    labels = np.asarray(labels)
    out = np.zeros((k, emb.shape[1]), dtype=np.float64)
    for c in range(k):
        members = labels == c
        if not np.any(members):
            raise ValueError(f"class {c} missing from labeled subset")
        out[c] = emb[members].astype(np.float64).mean(axis=0)
    return out.astype(emb.dtype)


def refresh_epoch(
    bank: PrototypeBank | None,
    emb_h: np.ndarray,
    emb_g: np.ndarray,
    mode: str,
    way_sizes=None,
    seed=None,
    labeled: tuple | None = None,
) -> PrototypeBank:
    """Rebuild intra prototypes, assignments, and cross prototypes per way.

    mode "kmeans_init" clusters each view from scratch; "moving_avg" keeps
    the carried intra prototypes and only recomputes assignments and cross
    prototypes. When `labeled` = (labels, indices, k) is given, ways with
    C == k use labeled class means instead, every refresh.
    """
    if mode not in ("kmeans_init", "moving_avg"):
        raise ValueError(f"unknown refresh mode {mode!r}")
    if mode == "moving_avg" and bank is None:
        raise ValueError("moving_avg refresh requires an existing bank")
    rng = _as_rng(seed)
    emb_h_n = l2_normalize(np.asarray(emb_h).astype(np.float64))
    emb_g_n = l2_normalize(np.asarray(emb_g).astype(np.float64))
    sizes = way_sizes if bank is None else [way.c for way in bank.ways]
    if sizes is None:
        raise ValueError("way_sizes required when building a bank from scratch")

    ways = []
    for w, c in enumerate(sizes):
        labeled_way = labeled is not None and c == labeled[2]
        if labeled_way:
            labels, indices, k = labeled
            intra_h = semi_supervised_prototypes(emb_h_n[indices], labels, k)
            intra_g = semi_supervised_prototypes(emb_g_n[indices], labels, k)
            assign_h = assign(emb_h_n, intra_h)
            assign_g = assign(emb_g_n, intra_g)
        elif mode == "kmeans_init":
            intra_h, assign_h = kmeans(emb_h_n, c, rng)
            intra_g, assign_g = kmeans(emb_g_n, c, rng)
        else:
            intra_h = bank.ways[w].intra_h
            intra_g = bank.ways[w].intra_g
            assign_h = assign(emb_h_n, intra_h)
            assign_g = assign(emb_g_n, intra_g)
        cross_h, valid_h = cross_view_prototypes(emb_h_n, assign_g, c, fallback=intra_h)
        cross_g, valid_g = cross_view_prototypes(emb_g_n, assign_h, c, fallback=intra_g)
        ways.append(
            PrototypeWay(
                c=c,
                intra_h=np.asarray(intra_h, dtype=np.float64),
                intra_g=np.asarray(intra_g, dtype=np.float64),
                cross_h=cross_h,
                cross_g=cross_g,
                assign_h=assign_h,
                assign_g=assign_g,
                valid_mask_h=valid_h,
                valid_mask_g=valid_g,
            )
        )
    return PrototypeBank(ways=ways)
