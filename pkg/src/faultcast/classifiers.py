"""Turning embeddings and stepwise scores into binary label decisions.

Classification is per label and independent: label l is decided from the
scalar in dimension l alone. Three rules are provided:

  threshold_zero  decide 1 where the score is > 0 (the embedding is trained
                  so zero separates presence from absence)
  svm             per-label 1-D soft-margin SVM fit by seeded stochastic
                  subgradient descent on the hinge loss
  nearest_mean    per-label nearest of the two class means

Ties and exact boundary hits decide negative, the conservative choice for
alarm-style labels. Labels whose training data has only one class fall back
to the threshold rule and are flagged in the classifier.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .num import make_rng

KINDS = ("svm", "threshold_zero", "nearest_mean")

SVM_ITERATIONS = 10_000
SVM_REG = 1e-2


@dataclass
class LabelClassifier:
    kind: str
    weight: np.ndarray | None = None     # (n_labels,) svm slope
    bias: np.ndarray | None = None       # (n_labels,) svm intercept
    pos_mean: np.ndarray | None = None   # (n_labels,) nearest_mean
    neg_mean: np.ndarray | None = None
    fallback: np.ndarray = field(default=None)  # bool (n_labels,)


def fit_classifier(
    kind: str,
    scores: np.ndarray,
    labels: np.ndarray,
    seed: int = 0,
    iterations: int = SVM_ITERATIONS,
    reg: float = SVM_REG,
) -> LabelClassifier:
    """Fit per-label decision rules on (samples, labels) score/target matrices.

    For svm and nearest_mean, a label needs at least one positive and one
    negative training example; otherwise that label falls back to
    threshold_zero and is recorded in `fallback`.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown classifier kind {kind!r}")
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[0] == 0:
        raise ValueError(f"need a non-empty (samples, labels) matrix, got {scores.shape}")
    if scores.shape != labels.shape:
        raise ValueError(f"shape mismatch: scores {scores.shape} vs labels {labels.shape}")
    n, n_labels = scores.shape

    pos_count = (labels > 0).sum(axis=0)
    fallback = (pos_count == 0) | (pos_count == n)
    if kind == "threshold_zero":
        return LabelClassifier("threshold_zero", fallback=np.zeros(n_labels, dtype=bool))

    if kind == "nearest_mean":
        pos_mean = np.zeros(n_labels)
        neg_mean = np.zeros(n_labels)
        for l in range(n_labels):
            if fallback[l]:
                continue
            mask = labels[:, l] > 0
            pos_mean[l] = scores[mask, l].mean()
            neg_mean[l] = scores[~mask, l].mean()
        return LabelClassifier(
            "nearest_mean", pos_mean=pos_mean, neg_mean=neg_mean, fallback=fallback
        )

    # svm: pegasos-style updates, one seeded sample index per iteration,
    # shared across labels so the whole fit vectorizes. Positive hinge terms
    # carry weight sqrt(n_neg / n_pos): enough lift that a rare label's
    # boundary is not dragged toward all-negative, without the precision
    # collapse a fully balanced weighting causes at strong imbalance.
    targets = np.where(labels > 0, 1.0, -1.0)
    balance = np.ones_like(labels)
    for l in range(n_labels):
        if fallback[l]:
            continue
        n_pos = pos_count[l]
        lift = np.sqrt((n - n_pos) / n_pos)
        balance[:, l] = np.where(labels[:, l] > 0, lift, 1.0)
    w = np.zeros(n_labels)
    b = np.zeros(n_labels)
    rng = make_rng(seed)
    idx = rng.integers(0, n, size=iterations)
    for t, i in enumerate(idx, start=1):
        eta = 1.0 / (reg * t)
        margin = targets[i] * (w * scores[i] + b)
        push = np.where(margin < 1.0, eta * balance[i] * targets[i], 0.0)
        w *= 1.0 - eta * reg
        w += push * scores[i]
        b += push
    return LabelClassifier("svm", weight=w, bias=b, fallback=fallback)


def classify(clf: LabelClassifier, scores: np.ndarray) -> np.ndarray:
    """Binary decisions for (n_labels,) or (..., n_labels) score arrays."""
    scores = np.asarray(scores, dtype=np.float64)
    threshold = scores > 0.0
    if clf.kind == "threshold_zero":
        decided = threshold
    elif clf.kind == "svm":
        decided = clf.weight * scores + clf.bias > 0.0
    elif clf.kind == "nearest_mean":
        decided = np.abs(scores - clf.pos_mean) < np.abs(scores - clf.neg_mean)
    else:
        raise ValueError(f"unknown classifier kind {clf.kind!r}")
    if clf.fallback is not None and clf.fallback.any():
        decided = np.where(clf.fallback, threshold, decided)
    return decided.astype(np.int8)


def localize(clf: LabelClassifier, step_scores: np.ndarray) -> np.ndarray:
    """Per-step decisions from (..., horizon, n_labels) stepwise scores.

    The classifier is expected to have been fit on training stepwise scores
    pooled over steps, one scalar feature per label.
    """
    return classify(clf, step_scores)


def broadcast_baseline(segment_decision: np.ndarray, horizon: int) -> np.ndarray:
    """Replicate a segment decision across every forecast step."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    segment_decision = np.asarray(segment_decision)
    return np.repeat(segment_decision[..., None, :], horizon, axis=-2)


def classifier_to_dict(clf: LabelClassifier) -> dict:
    out = {"kind": clf.kind}
    for name in ("weight", "bias", "pos_mean", "neg_mean"):
        arr = getattr(clf, name)
        out[name] = None if arr is None else np.asarray(arr).tolist()
    out["fallback"] = None if clf.fallback is None else clf.fallback.astype(int).tolist()
    return out


def classifier_from_dict(doc: dict) -> LabelClassifier:
    def arr(x):
        return None if x is None else np.asarray(x, dtype=np.float64)

    fallback = doc.get("fallback")
    return LabelClassifier(
        kind=doc["kind"],
        weight=arr(doc.get("weight")),
        bias=arr(doc.get("bias")),
        pos_mean=arr(doc.get("pos_mean")),
        neg_mean=arr(doc.get("neg_mean")),
        fallback=None if fallback is None else np.asarray(fallback, dtype=bool),
    )
