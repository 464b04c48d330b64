"""Linear evaluation of frozen features against the hidden true labels.

The probe is a multinomial logistic regression fit by full-batch gradient
descent with an L2 penalty, zero initialization, and a fixed iteration budget;
it never mutates the encoder.  Features are standardized internally for
conditioning and the standardization is folded back into the returned weights,
so the model is a plain affine map of the raw features.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import IndexedDataset
from .encoder import MlpEncoder, forward
from .errors import DimensionError, SpecError
from .numeric import Matrix, as_matrix


@dataclass(frozen=True)
class ProbeConfig:
    l2_penalty: float = 1e-4
    epochs: int = 300
    lr: float = 0.5
    # reserved for chunked feature extraction; the fit itself is full-batch
    # and desk-scale splits are forwarded in one call
    batch_size: int = 1024

    def __post_init__(self):
        if self.l2_penalty < 0:
            raise SpecError(f"l2_penalty must be >= 0, got {self.l2_penalty}")
        if self.epochs < 0 or self.lr <= 0 or self.batch_size < 1:
            raise SpecError("probe epochs must be >= 0, lr > 0, batch_size >= 1")


@dataclass
class ProbeModel:
    weights: np.ndarray  # (C, K)
    bias: np.ndarray  # (C,)


def extract_features(enc: MlpEncoder, ds: IndexedDataset) -> Matrix:
    """Clean (non-augmented) features for every sample; encoder untouched."""
    if ds.dim != enc.input_dim:
        raise DimensionError(f"dataset dim {ds.dim} != encoder input {enc.input_dim}")
    features, _ = forward(enc, ds.features)
    return features


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def probe_loss(model: ProbeModel, features: Matrix, labels, l2_penalty: float) -> float:
    """Mean cross-entropy plus 0.5 * l2 * ||W||^2, for convergence checks."""
    labels = np.asarray(labels, dtype=np.int64)
    z = features @ model.weights.T + model.bias
    lse = np.log(np.exp(z - z.max(axis=1, keepdims=True)).sum(axis=1)) + z.max(axis=1)
    nll = float((lse - z[np.arange(len(labels)), labels]).mean())
    return nll + 0.5 * l2_penalty * float(np.sum(model.weights**2))


def fit_probe(
    features: Matrix,
    labels,
    cfg: ProbeConfig,
    n_classes: int | None = None,
) -> ProbeModel:
    """Deterministic full-batch GD from zero weights for ``cfg.epochs`` iterations."""
    x = as_matrix(features, "features")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1 or labels.shape[0] != x.shape[0]:
        raise DimensionError(f"labels shape {labels.shape} != ({x.shape[0]},)")
    c = int(n_classes if n_classes is not None else labels.max() + 1)
    if labels.min() < 0 or labels.max() >= c:
        raise SpecError(f"labels must lie in [0, {c})")
    n, k = x.shape

    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    sd = np.where(sd < 1e-12, 1.0, sd)
    xs = (x - mu) / sd

    onehot = np.zeros((n, c))
    onehot[np.arange(n), labels] = 1.0
    w = np.zeros((c, k))
    b = np.zeros(c)
    for _ in range(cfg.epochs):
        p = _softmax(xs @ w.T + b)
        resid = (p - onehot) / n
        w -= cfg.lr * (resid.T @ xs + cfg.l2_penalty * w)
        b -= cfg.lr * resid.sum(axis=0)

    # fold the standardization into the affine map over raw features
    w_raw = w / sd
    b_raw = b - w_raw @ mu
    return ProbeModel(w_raw, b_raw)


def top1_accuracy(model: ProbeModel, features: Matrix, labels) -> float:
    """Fraction of argmax predictions equal to labels; ties go to the lowest class."""
    labels = np.asarray(labels, dtype=np.int64)
    if features.shape[1] != model.weights.shape[1]:
        raise DimensionError(
            f"feature dim {features.shape[1]} != probe K {model.weights.shape[1]}"
        )
    if labels.shape[0] != features.shape[0]:
        raise DimensionError("labels and features disagree on the sample count")
    preds = np.argmax(features @ model.weights.T + model.bias, axis=1)
    return float(np.mean(preds == labels))


def evaluate_probe(
    enc: MlpEncoder,
    train_ds: IndexedDataset,
    eval_ds: IndexedDataset,
    cfg: ProbeConfig,
) -> float:
    """Fit on clean training features, report top-1 on the held-out split."""
    train_feats = extract_features(enc, train_ds)
    eval_feats = extract_features(enc, eval_ds)
    n_classes = max(train_ds.n_classes, eval_ds.n_classes)
    model = fit_probe(train_feats, train_ds.true_labels, cfg, n_classes=n_classes)
    return top1_accuracy(model, eval_feats, eval_ds.true_labels)
