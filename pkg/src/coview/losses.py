"""Contrastive objectives with exact gradients.

Similarity is the dot product of l2-normalized vectors. The instance loss
aligns each embedding with its dropout-augmented twin against the clean
embeddings of the other batch members; by default the positive pair is NOT
part of the denominator. The co-training loss pulls each embedding toward
its selected cross-view prototype against all valid cross-view prototypes,
treating prototypes as constants.

All gradients are returned alongside values. Internals run in float64 and
gradients are cast back to the dtype of the embedding inputs, so float32
training stays float32 while float64 test fixtures keep full precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

NORM_EPS = 1e-12


@dataclass
class LossConfig:
    """Temperatures and the balance weight of the combined objective."""

    tau: float = 0.1
    lam: float = 1.0
    tau_proto: float = 1.0

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if not self.lam >= 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if not self.tau_proto > 0:
            raise ValueError(f"tau_proto must be > 0, got {self.tau_proto}")


@dataclass
class LossBreakdown:
    inst_h: float
    inst_g: float
    cot_h: float
    cot_g: float
    total: float


def l2_normalize(x: np.ndarray, eps: float = NORM_EPS) -> np.ndarray:
    """Row-wise l2 normalization; rejects rows with vanishing norm."""
    x = np.asarray(x)
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(norms <= eps):
        raise ValueError(f"degenerate embedding: row norm at or below {eps}")
    return x / norms


def sim(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity of two vectors, in [-1, 1]."""
    u = l2_normalize(np.asarray(u, dtype=np.float64)[None, :])[0]
    v = l2_normalize(np.asarray(v, dtype=np.float64)[None, :])[0]
    return float(np.clip(u @ v, -1.0, 1.0))


def _normalize_with_norms(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    if np.any(norms <= NORM_EPS):
        raise ValueError(f"degenerate embedding: row norm at or below {NORM_EPS}")
    return x / norms, norms


def _grad_through_normalization(
    grad_hat: np.ndarray, x_hat: np.ndarray, norms: np.ndarray
) -> np.ndarray:
    # d/dx of x/|x| applied to an upstream gradient: project out the radial
    # component, then divide by the norm.
    radial = np.sum(grad_hat * x_hat, axis=1, keepdims=True)
    return (grad_hat - radial * x_hat) / norms


def instance_loss(
    clean: np.ndarray,
    augmented: np.ndarray,
    tau: float,
    include_positive: bool = False,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Instance-wise contrastive loss and its gradients.

    Per instance i the positive logit is sim(clean_i, augmented_i)/tau and
    the denominator sums exp(sim(clean_i, clean_k)/tau) over k != i. With
    include_positive the positive term joins the denominator as well, which
    recovers the common NT-Xent form; it defaults off.

    Returns (value, grad wrt clean, grad wrt augmented).
    """
    clean = np.asarray(clean)
    augmented = np.asarray(augmented)
    if clean.shape != augmented.shape:
        raise ValueError(f"shape mismatch: clean {clean.shape} vs augmented {augmented.shape}")
    b = clean.shape[0]
    if b < 2:
        raise ValueError("instance loss requires at least 2 samples per batch")

    c64 = clean.astype(np.float64)
    a64 = augmented.astype(np.float64)
    c_hat, c_norms = _normalize_with_norms(c64)
    a_hat, a_norms = _normalize_with_norms(a64)

    pos = np.sum(c_hat * a_hat, axis=1) / tau
    logits = (c_hat @ c_hat.T) / tau
    np.fill_diagonal(logits, -np.inf)

    if include_positive:
        stacked = np.concatenate([logits, pos[:, None]], axis=1)
    else:
        stacked = logits
    peak = np.max(stacked, axis=1, keepdims=True)
    expo = np.exp(stacked - peak)
    denom = np.sum(expo, axis=1, keepdims=True)
    lse = (peak + np.log(denom))[:, 0]
    value = float(np.sum(lse - pos))

    probs = expo / denom
    if include_positive:
        neg_probs = probs[:, :b]
        dpos = probs[:, b] - 1.0
    else:
        neg_probs = probs
        dpos = np.full(b, -1.0)
    np.fill_diagonal(neg_probs, 0.0)

    grad_c_hat = ((neg_probs + neg_probs.T) @ c_hat + dpos[:, None] * a_hat) / tau
    grad_a_hat = (dpos[:, None] * c_hat) / tau

    grad_clean = _grad_through_normalization(grad_c_hat, c_hat, c_norms)
    grad_augmented = _grad_through_normalization(grad_a_hat, a_hat, a_norms)
    return value, grad_clean.astype(clean.dtype), grad_augmented.astype(augmented.dtype)


def cot_loss(
    emb: np.ndarray,
    selected: np.ndarray,
    cross_prototypes: np.ndarray,
    valid_mask: np.ndarray | None,
    tau_proto: float,
) -> tuple[float, np.ndarray]:
    """Prototype contrast: each embedding against its selected cross prototype.

    Per instance i: -log softmax over valid prototypes of
    sim(emb_i, prototype_j)/tau_proto, evaluated at the selected row.
    Prototypes are constants: no gradient is returned for them.

    Returns (value, grad wrt emb).
    """
    emb = np.asarray(emb)
    selected64 = np.asarray(selected, dtype=np.float64)
    protos64 = np.asarray(cross_prototypes, dtype=np.float64)
    if valid_mask is None:
        valid_mask = np.ones(protos64.shape[0], dtype=bool)
    valid_mask = np.asarray(valid_mask, dtype=bool)
    if not np.any(valid_mask):
        raise ValueError("empty valid set: no valid cross-view prototypes")

    e_hat, e_norms = _normalize_with_norms(emb.astype(np.float64))
    m_hat = l2_normalize(protos64[valid_mask])
    q_hat = l2_normalize(selected64)

    pos = np.sum(e_hat * q_hat, axis=1) / tau_proto
    logits = (e_hat @ m_hat.T) / tau_proto
    peak = np.max(logits, axis=1, keepdims=True)
    expo = np.exp(logits - peak)
    denom = np.sum(expo, axis=1, keepdims=True)
    lse = (peak + np.log(denom))[:, 0]
    value = float(np.sum(lse - pos))

    probs = expo / denom
    grad_e_hat = (probs @ m_hat - q_hat) / tau_proto
    grad_emb = _grad_through_normalization(grad_e_hat, e_hat, e_norms)
    return value, grad_emb.astype(emb.dtype)


def total_loss(
    inst_h: float, inst_g: float, cot_h: float, cot_g: float, lam: float
) -> LossBreakdown:
    """Combine per-view losses into the training objective."""
    parts = {"inst_h": inst_h, "inst_g": inst_g, "cot_h": cot_h, "cot_g": cot_g}
    for name, part in parts.items():
        if not math.isfinite(part):
            raise ValueError(f"non-finite loss term {name}: {part}")
    total = inst_h + inst_g + lam * (cot_h + cot_g)
    return LossBreakdown(
        inst_h=float(inst_h),
        inst_g=float(inst_g),
        cot_h=float(cot_h),
        cot_g=float(cot_g),
        total=float(total),
    )
