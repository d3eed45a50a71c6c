"""Fisher linear discriminant with shrinkage-regularized within-class scatter.

With 845-dimensional features and under a thousand training epochs the pooled
scatter matrix is near-singular, so it is blended toward a scaled identity:
S_lambda = (1 - lambda) S_w + lambda (trace(S_w)/d) I.  The weight vector is the
solve S_lambda w = m1 - m2 (class 1 = target), normalized to unit length, with
the bias placing the decision boundary at the midpoint of the class means.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

DEFAULT_SHRINKAGE = 1e-3


@dataclass(frozen=True)
class LdaModel:
    """Trained discriminant: weights, bias, and projected-mean diagnostics."""

    w: np.ndarray
    b: float
    mu1: float | None = None  # projected target-class mean
    mu2: float | None = None  # projected non-target-class mean
    shrinkage: float | None = None

    def __post_init__(self) -> None:
        w = np.array(self.w, dtype=np.float64, copy=True)
        if w.ndim != 1:
            raise ValueError("w must be a vector")
        norm = np.linalg.norm(w)
        if not np.isfinite(norm) or norm == 0:
            raise ValueError("w must be finite with positive norm")
        w.flags.writeable = False
        object.__setattr__(self, "w", w)


def _as_arrays(data, labels):
    """Accept (LabeledDataset) or (vectors, labels)."""
    if labels is None:
        vectors = data.vectors
        labels = data.labels
    else:
        vectors = data
    vectors = np.asarray(vectors, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    if vectors.ndim != 2 or labels.shape != (vectors.shape[0],):
        raise ValueError("need [n x d] vectors with one boolean label each")
    return vectors, labels


def train(data, labels=None, shrinkage: float = DEFAULT_SHRINKAGE) -> LdaModel:
    """Fit the discriminant; class 1 (True labels) is the target class."""
    vectors, labels_ = _as_arrays(data, labels)
    if not np.isfinite(vectors).all():
        raise ValueError("training features must be finite")
    if not 0 <= shrinkage <= 1:
        raise ValueError("shrinkage must lie in [0, 1]")
    pos = vectors[labels_]
    neg = vectors[~labels_]
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("both classes must be present")
    n, d = vectors.shape
    m1 = pos.mean(axis=0)
    m2 = neg.mean(axis=0)
    pos_c = pos - m1
    neg_c = neg - m2
    denom = max(n - 2, 1)
    scatter = (pos_c.T @ pos_c + neg_c.T @ neg_c) / denom
    target = np.trace(scatter) / d
    regularized = (1.0 - shrinkage) * scatter
    regularized[np.diag_indices(d)] += shrinkage * target
    w = cho_solve(cho_factor(regularized), m1 - m2)
    norm = np.linalg.norm(w)
    if norm == 0:
        raise ValueError("degenerate training set: identical class means")
    w = w / norm
    b = -float(w @ (m1 + m2)) / 2.0
    return LdaModel(w=w, b=b, mu1=float(w @ m1), mu2=float(w @ m2),
                    shrinkage=shrinkage)


def score(model: LdaModel, v) -> float | np.ndarray:
    """Discriminant value w.v + b; larger means more target-like."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != model.w.shape[0]:
        raise ValueError(
            f"vector length {v.shape[-1]} != model dimension {model.w.shape[0]}")
    out = v @ model.w + model.b
    return float(out) if out.ndim == 0 else out


def fisher_criterion(model: LdaModel, data, labels=None) -> float:
    """J = (mu1 - mu2)^2 / (s1^2 + s2^2) on the projected samples.

    Per-class spread is the population variance of the projections; two
    zero-variance point classes at distinct means give +inf.
    """
    vectors, labels_ = _as_arrays(data, labels)
    proj = vectors @ model.w
    pos = proj[labels_]
    neg = proj[~labels_]
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("both classes must be present")
    gap = (pos.mean() - neg.mean()) ** 2
    spread = pos.var() + neg.var()
    if spread == 0:
        return math.inf if gap > 0 else 0.0
    return float(gap / spread)
