"""Scikit-learn style front end for the co-training pipeline.

CoTrainingEncoder is a transformer: fit() trains the dual-view encoders on
raw series, transform() returns the concatenated frozen embeddings, ready
for any downstream sklearn classifier or pipeline step.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .data import LabeledSubset, TimeSeriesDataset, apply_standardization, standardize
from .evaluation import extract_embeddings
from .training import TrainConfig, train


class CoTrainingEncoder(BaseEstimator, TransformerMixin):
    """Dual-view (time / frequency) co-trained representation encoder.

    X is [N, T] for univariate series or [N, T, d]; transform returns
    [N, 2 * embedding_dim] when both views are active, [N, embedding_dim]
    otherwise. Pass y to use labels: entries >= 0 supervise the matching
    prototype way, entries of -1 mark unlabeled rows (semi-supervised).
    Without y, n_prototypes must be given whenever co-training is active.
    """

    def __init__(
        self,
        epochs: int = 12,
        warmup_epochs: int = 5,
        batch_size: int = 64,
        lr: float = 0.001,
        tau: float = 0.1,
        lam: float = 1.0,
        tau_proto: float = 1.0,
        gamma: float = 0.01,
        prototype_ways=None,
        n_prototypes=None,
        seed: int = 0,
        views: str = "both",
        levels: int = 3,
        channels_per_level=(32, 64, 128),
        kernel_size: int = 5,
        dropout_rate: float = 0.1,
        embedding_dim: int = 64,
        channel_shared: bool = False,
        log_magnitude: bool = False,
        include_positive: bool = False,
        standardize: bool = True,
    ):
        self.epochs = epochs
        self.warmup_epochs = warmup_epochs
        self.batch_size = batch_size
        self.lr = lr
        self.tau = tau
        self.lam = lam
        self.tau_proto = tau_proto
        self.gamma = gamma
        self.prototype_ways = prototype_ways
        self.n_prototypes = n_prototypes
        self.seed = seed
        self.views = views
        self.levels = levels
        self.channels_per_level = channels_per_level
        self.kernel_size = kernel_size
        self.dropout_rate = dropout_rate
        self.embedding_dim = embedding_dim
        self.channel_shared = channel_shared
        self.log_magnitude = log_magnitude
        self.include_positive = include_positive
        self.standardize = standardize

    def _as_samples(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float32)
        if X.ndim == 2:
            X = X[:, :, None]
        if X.ndim != 3:
            raise ValueError(f"X must be [N, T] or [N, T, d], got shape {X.shape}")
        return X

    def _config(self, mode: str, k) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            warmup_epochs=self.warmup_epochs,
            batch_size=self.batch_size,
            lr=self.lr,
            tau=self.tau,
            lam=self.lam,
            tau_proto=self.tau_proto,
            gamma=self.gamma,
            prototype_ways=self.prototype_ways,
            k=k,
            seed=self.seed,
            mode=mode,
            views=self.views,
            levels=self.levels,
            channels_per_level=tuple(self.channels_per_level),
            kernel_size=self.kernel_size,
            dropout_rate=self.dropout_rate,
            embedding_dim=self.embedding_dim,
            channel_shared=self.channel_shared,
            log_magnitude=self.log_magnitude,
            include_positive=self.include_positive,
            track_nmi=False,
        )

    def fit(self, X, y=None):
        samples = self._as_samples(X)
        labels = None
        subset = None
        mode = "unsupervised"
        k = self.n_prototypes
        if y is not None:
            y = np.asarray(y)
            if y.shape != (samples.shape[0],):
                raise ValueError(
                    f"y must be one integer per series, got shape {y.shape}"
                )
            if not np.issubdtype(y.dtype, np.integer):
                raise ValueError("y must be integer class labels (-1 = unlabeled)")
            labeled_idx = np.flatnonzero(y >= 0)
            if len(labeled_idx) == 0:
                raise ValueError("y has no labeled rows; pass y=None instead")
            mode = "semi_supervised"
            # placeholder 0 for unlabeled rows: only subset rows are ever read
            labels = np.where(y >= 0, y, 0).astype(np.int64)
            subset = LabeledSubset(indices=labeled_idx)
            if k is None:
                k = int(y[labeled_idx].max()) + 1

        ds = TimeSeriesDataset(
            samples=samples, labels=labels,
            class_count=None if labels is None else int(labels.max()) + 1,
        )
        self.mean_ = self.std_ = None
        if self.standardize:
            ds, _, (self.mean_, self.std_) = standardize(ds, [])
        config = self._config(mode, k)
        self.state_, self.loss_history_ = train(ds, config, subset=subset)
        self.input_shape_ = samples.shape[1:]
        self.embedding_width_ = self.embedding_dim * (2 if self.views == "both" else 1)
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "state_")
        samples = self._as_samples(X)
        if samples.shape[2] != self.input_shape_[1]:
            raise ValueError(
                f"X has {samples.shape[2]} channels, fitted on {self.input_shape_[1]}"
            )
        ds = TimeSeriesDataset(samples=samples)
        if self.mean_ is not None:
            ds = apply_standardization(ds, self.mean_, self.std_)
        return extract_embeddings(self.state_, ds)
