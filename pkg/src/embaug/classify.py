"""One-vs-rest L2-regularized logistic regression, full-batch gradient descent."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_expit

# bias given to labels without a single positive training row
NEVER_BIAS = -700.0


@dataclass(frozen=True)
class ClassifyConfig:
    l2_lambda: float = 1e-4
    epochs: int = 100
    lr: float = 0.1
    tol: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.lr > 0:
            raise ValueError("lr must be > 0")


@dataclass(eq=False)
class OvrModel:
    weights: np.ndarray        # (label_count, dim)
    bias: np.ndarray           # (label_count,)
    l2_lambda: float = 0.0
    never_positive: tuple[int, ...] = ()
    loss_history: list = field(default_factory=list)

    @property
    def label_count(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


def logistic_loss_and_grad(w: np.ndarray, b, x: np.ndarray, y: np.ndarray,
                           l2_lambda: float):
    """Mean log loss plus ``l2/2 * |w|^2`` for one or many labels.

    ``w`` is (dim,) with scalar ``b`` and (n,) ``y``, or (dim, L) with (L,)
    ``b`` and (n, L) ``y``. Returns (loss, grad_w, grad_b); loss is per label
    in the batched form.
    """
    n = len(x)
    z = x @ w + b
    y = np.asarray(y, dtype=float)
    loss = -(y * log_expit(z) + (1 - y) * log_expit(-z)).sum(axis=0) / n
    loss = loss + 0.5 * l2_lambda * (w * w).sum(axis=0)
    r = (expit(z) - y) / n
    return loss, x.T @ r + l2_lambda * w, r.sum(axis=0)


def step_size(x: np.ndarray, cfg: ClassifyConfig) -> float:
    """``min(lr, 1/L)`` with L the smoothness constant of the loss, which
    keeps every full-batch step a descent step."""
    xb = np.hstack([x, np.ones((len(x), 1))])
    smooth = np.linalg.norm(xb, 2) ** 2 / (4 * len(x)) + cfg.l2_lambda
    return min(cfg.lr, 1.0 / smooth)


def train_ovr(dataset, label_count: int, cfg: ClassifyConfig = ClassifyConfig()) -> OvrModel:
    """Fit one binary logistic regression per label (positive = row has it)."""
    x = np.asarray(dataset.vectors, dtype=float)
    if len(x) == 0:
        raise ValueError("empty dataset")
    if dataset.label_count() > label_count:
        raise ValueError(f"dataset has labels >= label_count {label_count}")
    y = dataset.label_matrix(label_count)
    return fit_ovr(x, y, cfg)


def fit_ovr(x: np.ndarray, y: np.ndarray, cfg: ClassifyConfig = ClassifyConfig()) -> OvrModel:
    n, d = x.shape
    label_count = y.shape[1]
    eta = step_size(x, cfg)
    w = np.zeros((d, label_count))
    b = np.zeros(label_count)
    history = []
    prev = None
    for _ in range(cfg.epochs):
        loss, gw, gb = logistic_loss_and_grad(w, b, x, y, cfg.l2_lambda)
        total = float(loss.sum())
        history.append(total)
        if prev is not None and cfg.tol > 0 and prev - total <= cfg.tol * max(abs(prev), 1.0):
            break
        prev = total
        w -= eta * gw
        b -= eta * gb
    never = tuple(int(l) for l in np.flatnonzero(~y.any(axis=0)))
    if never:
        w[:, list(never)] = 0.0
        b[list(never)] = NEVER_BIAS
    if not (np.isfinite(w).all() and np.isfinite(b).all()):
        raise FloatingPointError("non-finite classifier weights")
    return OvrModel(np.ascontiguousarray(w.T), b, cfg.l2_lambda, never, history)


def predict_scores(model: OvrModel, x) -> np.ndarray:
    """``sigma(w_l . x + b_l)`` for every label; accepts one row or a matrix."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.dim:
        raise ValueError(f"expected dimension {model.dim}, got {x.shape[-1]}")
    return expit(x @ model.weights.T + model.bias)


def predict_topk(scores, k: int) -> set[int]:
    """The ``k`` highest-scoring labels, ties to the lower label id."""
    scores = np.asarray(scores)
    if not 1 <= k <= len(scores):
        raise ValueError(f"k must be in [1, {len(scores)}], got {k}")
    return set(np.argsort(-scores, kind="stable")[:k].tolist())


def predict_topk_batch(scores: np.ndarray, ks) -> list[set[int]]:
    order = np.argsort(-scores, axis=1, kind="stable")
    return [set(order[i, :k].tolist()) for i, k in enumerate(ks)]


def predict_threshold(scores: np.ndarray, threshold: float = 0.5) -> list[set[int]]:
    return [set(np.flatnonzero(row >= threshold).tolist()) for row in np.atleast_2d(scores)]


def save_model(model: OvrModel, path) -> None:
    """Header "label_count dim", then one "w_1 ... w_d bias" row per label."""
    with open(path, "w") as fh:
        fh.write(f"{model.label_count} {model.dim}\n")
        for w, b in zip(model.weights, model.bias):
            fh.write(" ".join(repr(float(v)) for v in (*w, b)) + "\n")


def load_model(path) -> OvrModel:
    with open(path) as fh:
        k, d = map(int, fh.readline().split())
        rows = np.loadtxt(fh, ndmin=2)
    if rows.shape != (k, d + 1):
        raise ValueError(f"{path}: expected {k} rows of {d + 1} values, got {rows.shape}")
    never = tuple(int(l) for l in np.flatnonzero(rows[:, -1] == NEVER_BIAS))
    return OvrModel(rows[:, :-1].copy(), rows[:, -1].copy(), never_positive=never)
