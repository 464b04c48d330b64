"""Bias-free N-output linear classifier with label-smoothed cross-entropy.

The head maps K-dimensional features to one logit per training sample.  The
smoothed target for hot index n is q_c = (1-alpha) * [c == n] + alpha / N,
i.e. the smoothing mass is spread over all N classes including the target.
Because the head has no bias and the loss is shift-invariant in the logits,
adding a constant to a logit row changes neither loss nor gradient.

``sampled_xent`` restricts the softmax to a candidate subset of classes so
that no N-wide logit row is ever materialized; with the full class range as
candidates it reproduces ``xent_smoothed`` bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NonFiniteError, SpecError, TargetError
from .numeric import Matrix, as_matrix, matmul
from .rng import RngState


@dataclass
class DietHead:
    """Classifier weight stored class-major (N, K) so candidate rows gather contiguously."""

    weight: np.ndarray

    @property
    def n_classes(self) -> int:
        return self.weight.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.weight.shape[1]


def init_head(n_classes: int, feature_dim: int, seed: int) -> DietHead:
    """Uniform(-1/sqrt(K), 1/sqrt(K)) entries, the fan-in rule of a standard linear layer."""
    if n_classes < 1 or feature_dim < 1:
        raise SpecError(f"head dims must be >= 1, got N={n_classes}, K={feature_dim}")
    bound = 1.0 / np.sqrt(feature_dim)
    gen = RngState(seed).child("head_init").generator()
    w = gen.uniform(-bound, bound, size=(n_classes, feature_dim))
    return DietHead(w)


def logits(head: DietHead, features: Matrix) -> Matrix:
    """(B, K) features -> (B, N) logits; no bias anywhere."""
    features = as_matrix(features, "features")
    if features.shape[1] != head.feature_dim:
        raise DimensionError(
            f"feature dim {features.shape[1]} != head K {head.feature_dim}"
        )
    return matmul(features, head.weight.T)


def _check_targets(targets: np.ndarray, n_classes: int, batch: int) -> np.ndarray:
    targets = np.asarray(targets, dtype=np.int64)
    if targets.ndim != 1 or targets.shape[0] != batch:
        raise DimensionError(f"targets shape {targets.shape} != ({batch},)")
    if targets.size and (targets.min() < 0 or targets.max() >= n_classes):
        raise TargetError(f"targets must lie in [0, {n_classes})")
    return targets


def xent_smoothed(z: Matrix, targets, alpha: float) -> tuple[float, Matrix]:
    """Label-smoothed cross-entropy, mean over the batch.

    Returns (loss, grad wrt logits).  The loss is computed in log-sum-exp form;
    the gradient is (softmax(z) - q) / B, whose rows sum to zero.
    """
    if not 0.0 <= alpha < 1.0:
        raise SpecError(f"alpha must be in [0, 1), got {alpha}")
    if z.ndim != 2:
        raise DimensionError(f"logits must be 2-D, got shape {z.shape}")
    b, n = z.shape
    targets = _check_targets(targets, n, b)
    rows = np.arange(b)
    m = z.max(axis=1, keepdims=True)
    work = z - m
    np.exp(work, out=work)
    sums = work.sum(axis=1, keepdims=True)
    lse = (m + np.log(sums)).ravel()
    per_row = lse - (1.0 - alpha) * z[rows, targets] - (alpha / n) * z.sum(axis=1)
    loss = float(per_row.mean())
    if not np.isfinite(loss):
        raise NonFiniteError("cross-entropy loss is not finite")
    work /= sums  # softmax, reusing the exp buffer
    work -= alpha / n
    work[rows, targets] -= 1.0 - alpha
    work /= b
    return loss, work


def head_backward(head: DietHead, features: Matrix, grad_logits: Matrix) -> tuple[Matrix, Matrix]:
    """Chain rule through the linear head: (grad_W, grad_features)."""
    if grad_logits.shape != (features.shape[0], head.n_classes):
        raise DimensionError(
            f"grad_logits shape {grad_logits.shape} != "
            f"({features.shape[0]}, {head.n_classes})"
        )
    grad_w = matmul(grad_logits.T, features)
    grad_features = matmul(grad_logits, head.weight)
    return grad_w, grad_features


@dataclass
class SampledXent:
    """Loss restricted to a candidate class subset.

    ``grad_logits`` has one column per candidate; classes outside
    ``candidates`` receive exactly zero gradient.
    """

    loss: float
    grad_logits: Matrix
    candidates: np.ndarray

    def grad_weight_rows(self, features: Matrix) -> Matrix:
        """Gradient of the candidate rows of W, shape (|candidates|, K)."""
        return matmul(self.grad_logits.T, features)

    def grad_features(self, head: DietHead) -> Matrix:
        return matmul(self.grad_logits, head.weight[self.candidates])

    def dense_grad_weight(self, head: DietHead, features: Matrix) -> Matrix:
        """Scatter candidate-row gradients into a full (N, K) matrix (zeros elsewhere)."""
        grad_w = np.zeros_like(head.weight)
        grad_w[self.candidates] = self.grad_weight_rows(features)
        return grad_w


def sampled_xent(
    head: DietHead,
    features: Matrix,
    targets,
    alpha: float,
    candidates,
) -> SampledXent:
    """Smoothed cross-entropy over a candidate class subset.

    ``candidates`` must be sorted, unique, contain every batch target, and lie
    in [0, N).  Smoothing mass alpha is spread over the candidates.  The peak
    working set is O(B * |candidates| + |candidates| * K): the full (B, N)
    logit matrix is never formed.
    """
    features = as_matrix(features, "features")
    cand = np.asarray(candidates, dtype=np.int64)
    if cand.ndim != 1 or cand.size == 0:
        raise SpecError("candidate set must be a non-empty 1-D index array")
    if np.any(np.diff(cand) <= 0):
        raise SpecError("candidate set must be sorted and unique")
    if cand[0] < 0 or cand[-1] >= head.n_classes:
        raise TargetError(f"candidates must lie in [0, {head.n_classes})")
    targets = _check_targets(targets, head.n_classes, features.shape[0])
    pos = np.searchsorted(cand, targets)
    if np.any(pos >= cand.size) or np.any(cand[np.minimum(pos, cand.size - 1)] != targets):
        raise TargetError("every batch target must be in the candidate set")
    z = matmul(features, head.weight[cand].T)
    loss, grad = xent_smoothed(z, pos, alpha)
    return SampledXent(loss, grad, cand)


def sample_candidates(
    targets,
    n_classes: int,
    n_candidates: int,
    rng: RngState,
) -> np.ndarray:
    """Batch targets plus uniform negatives drawn without replacement.

    This is the default candidate strategy; any callable with this signature
    can stand in for it.  Memory stays O(n_candidates) regardless of N.
    """
    targets = np.unique(np.asarray(targets, dtype=np.int64))
    if targets.size and (targets[0] < 0 or targets[-1] >= n_classes):
        raise TargetError(f"targets must lie in [0, {n_classes})")
    if n_candidates < targets.size:
        raise SpecError(
            f"n_candidates ({n_candidates}) smaller than unique targets ({targets.size})"
        )
    n_candidates = min(n_candidates, n_classes)
    chosen = set(int(t) for t in targets)
    gen = rng.generator()
    while len(chosen) < n_candidates:
        need = n_candidates - len(chosen)
        for value in gen.integers(0, n_classes, size=2 * need + 8):
            if len(chosen) == n_candidates:
                break
            chosen.add(int(value))
    return np.array(sorted(chosen), dtype=np.int64)
