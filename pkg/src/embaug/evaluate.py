"""Split protocol, Macro/Micro F1 and the train-size / addcoeff sweeps."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .augmentation import AugmentConfig, LabeledDataset, augment
from .classify import ClassifyConfig, predict_scores, predict_threshold, predict_topk_batch, train_ovr
from .graph_corpus import LabelTable
from .seeding import derive_seed

logger = logging.getLogger(__name__)

CONDITIONS = ("baseline", "interpolate", "duplicate")
CSV_HEADER = ["train_size", "condition", "addcoeff", "macro_f1", "micro_f1", "avg_f1", "seed"]


def _confusion(true, pred, label_count: int):
    if len(true) != len(pred):
        raise ValueError(f"length mismatch: {len(true)} true vs {len(pred)} predicted")
    if len(true) == 0:
        raise ValueError("no samples")
    t = np.zeros((len(true), label_count), dtype=bool)
    p = np.zeros_like(t)
    for i, (ts, ps) in enumerate(zip(true, pred)):
        t[i, list(ts)] = True
        p[i, list(ps)] = True
    tp = (t & p).sum(axis=0)
    fp = (~t & p).sum(axis=0)
    fn = (t & ~p).sum(axis=0)
    return tp, fp, fn


def macro_f1(true: Sequence[Iterable[int]], pred: Sequence[Iterable[int]], label_count: int,
             zero_division: str = "zero") -> float:
    """Unweighted mean of per-label F1.

    A label with no true positives, false positives or false negatives
    scores 0 under ``zero_division="zero"`` and is left out of the mean under
    ``"skip"``.
    """
    tp, fp, fn = _confusion(true, pred, label_count)
    denom = 2 * tp + fp + fn
    f1 = np.divide(2 * tp, denom, out=np.zeros(label_count), where=denom > 0)
    if zero_division == "skip":
        return float(f1[denom > 0].mean()) if (denom > 0).any() else 0.0
    if zero_division != "zero":
        raise ValueError("zero_division must be 'zero' or 'skip'")
    return float(f1.mean())


def micro_f1(true, pred, label_count: int) -> float:
    """F1 of the confusion counts pooled over all labels."""
    tp, fp, fn = _confusion(true, pred, label_count)
    denom = 2 * tp.sum() + fp.sum() + fn.sum()
    return float(2 * tp.sum() / denom) if denom > 0 else 0.0


@dataclass(frozen=True)
class SplitSpec:
    start_train: int = 400
    step: int = 200
    max_train: int | None = None
    seed: int = 0
    repeats: int = 10

    def __post_init__(self):
        if self.start_train <= 0 or self.step < 1 or self.repeats < 1:
            raise ValueError("start_train, step and repeats must be positive")
        if self.max_train is not None and self.max_train < self.start_train:
            raise ValueError("max_train must be >= start_train")

    def sizes(self, labeled: int) -> list[int]:
        top = labeled - 1 if self.max_train is None else self.max_train
        if self.start_train > top or top > labeled - 1:
            raise ValueError(
                f"need more than {max(self.start_train, top)} labeled nodes, have {labeled}")
        return list(range(self.start_train, top + 1, self.step))

    def repeat_seeds(self) -> list[int]:
        return [derive_seed(self.seed, "repeat", r) for r in range(self.repeats)]


@dataclass(frozen=True)
class EvalRow:
    train_size: int
    condition: str
    addcoeff: float | None
    macro_f1: float
    micro_f1: float
    avg_f1: float
    seed: int

    @classmethod
    def make(cls, train_size, condition, addcoeff, macro, micro, seed) -> "EvalRow":
        return cls(train_size, condition, addcoeff, macro, micro, (macro + micro) / 2, seed)


@dataclass
class EvalReport:
    rows: list[EvalRow] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def sorted(self) -> "EvalReport":
        key = lambda r: (r.train_size, r.condition, -1.0 if r.addcoeff is None else r.addcoeff,
                         r.seed)
        return EvalReport(sorted(self.rows, key=key))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for r in self.rows:
                w.writerow([r.train_size, r.condition, "" if r.addcoeff is None else repr(r.addcoeff),
                            repr(r.macro_f1), repr(r.micro_f1), repr(r.avg_f1), r.seed])

    @classmethod
    def from_csv(cls, path) -> "EvalReport":
        rows = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != CSV_HEADER:
                raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
            for rec in reader:
                rows.append(EvalRow(int(rec["train_size"]), rec["condition"],
                                    float(rec["addcoeff"]) if rec["addcoeff"] else None,
                                    float(rec["macro_f1"]), float(rec["micro_f1"]),
                                    float(rec["avg_f1"]), int(rec["seed"])))
        return cls(rows)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.__dict__ for r in self.rows], columns=CSV_HEADER)

    def summary(self, by: str = "train_size") -> pd.DataFrame:
        """Mean and sd per (``by``, condition)."""
        df = self.frame()
        g = df.groupby([by, "condition"])[["macro_f1", "micro_f1", "avg_f1"]]
        out = g.agg(["mean", "std"])
        out.columns = [f"{m}_{s}" for m, s in out.columns]
        return out.reset_index()

    def gains(self) -> pd.DataFrame:
        """Relative change of each augmented condition's mean F1 over baseline,
        per train size."""
        s = self.summary()
        base = s[s.condition == "baseline"].set_index("train_size")
        out = []
        for cond in sorted(set(s.condition) - {"baseline"}):
            cur = s[s.condition == cond].set_index("train_size")
            for size in cur.index.intersection(base.index):
                row = {"train_size": size, "condition": cond}
                for m in ("macro_f1", "micro_f1", "avg_f1"):
                    b = base.at[size, f"{m}_mean"]
                    row[f"{m}_gain"] = cur.at[size, f"{m}_mean"] / b - 1 if b > 0 else math.nan
                out.append(row)
        return pd.DataFrame(out)


def as_matrix(embeddings) -> np.ndarray:
    return getattr(embeddings, "input_vectors", embeddings)


def score_split(train: LabeledDataset, test_x: np.ndarray, test_labels: Sequence[frozenset],
                label_count: int, cls_cfg: ClassifyConfig = ClassifyConfig(),
                rule: str = "topk", zero_division: str = "zero") -> tuple[float, float]:
    """Train on ``train`` and return (macro F1, micro F1) on the test rows.

    ``rule="topk"`` predicts each test row's true label count; ``"threshold"``
    keeps every label scoring >= 0.5.
    """
    model = train_ovr(train, label_count, cls_cfg)
    scores = predict_scores(model, test_x)
    if rule == "topk":
        pred = predict_topk_batch(scores, [len(ls) for ls in test_labels])
    elif rule == "threshold":
        pred = predict_threshold(scores)
    else:
        raise ValueError(f"unknown prediction rule {rule!r}")
    return (macro_f1(test_labels, pred, label_count, zero_division),
            micro_f1(test_labels, pred, label_count))


def _augment_train(train, condition, aug: AugmentConfig, seed: int):
    return augment(train, condition, replace(aug, seed=seed))


def run_sweep(embeddings, labels: LabelTable, split: SplitSpec,
              aug: AugmentConfig = AugmentConfig(),
              conditions: Sequence[str] = ("baseline", "interpolate"),
              cls_cfg: ClassifyConfig = ClassifyConfig(), rule: str = "topk",
              zero_division: str = "zero") -> EvalReport:
    """Train-size sweep over shuffled labeled nodes.

    For every repeat the labeled nodes are shuffled once; each train size
    takes a prefix as training rows and the rest as test rows. Only the
    training rows are augmented.
    """
    for c in conditions:
        if c not in CONDITIONS:
            raise ValueError(f"unknown condition {c!r}")
    x = as_matrix(embeddings)
    nodes = labels.labeled_nodes()
    sizes = split.sizes(len(nodes))
    report = EvalReport()
    for seed in split.repeat_seeds():
        perm = np.random.default_rng(seed).permutation(nodes)
        for size in sizes:
            train = LabeledDataset.from_nodes(x, labels, perm[:size])
            test_nodes = perm[size:]
            test_x = x[test_nodes]
            test_labels = [labels.labels_of(int(v)) for v in test_nodes]
            for cond in conditions:
                ds = _augment_train(train, cond, aug, derive_seed(aug.seed, seed, size))
                macro, micro = score_split(ds, test_x, test_labels, labels.label_count,
                                           cls_cfg, rule, zero_division)
                report.rows.append(EvalRow.make(size, cond, None if cond == "baseline"
                                                else aug.addcoeff, macro, micro, seed))
            logger.info("seed %d size %d done", seed, size)
    return report.sorted()


def addcoeff_sweep(embeddings, labels: LabelTable, train_num: int = 1200,
                   grid: Sequence[float] = tuple(np.round(np.arange(1, 11) / 10, 2)),
                   seed: int = 0, repeats: int = 1, theta: float = 0.5,
                   cls_cfg: ClassifyConfig = ClassifyConfig(), rule: str = "topk",
                   zero_division: str = "zero") -> EvalReport:
    """Interpolation at a fixed train size, one row per grid value and repeat."""
    if len(grid) == 0:
        raise ValueError("empty addcoeff grid")
    for a in grid:
        if not 0 < a <= 1:
            raise ValueError(f"addcoeff {a} outside (0, 1]")
    x = as_matrix(embeddings)
    nodes = labels.labeled_nodes()
    if train_num >= len(nodes):
        raise ValueError(f"train_num {train_num} leaves no test nodes ({len(nodes)} labeled)")
    report = EvalReport()
    for s in SplitSpec(train_num, 1, train_num, seed, repeats).repeat_seeds():
        perm = np.random.default_rng(s).permutation(nodes)
        train = LabeledDataset.from_nodes(x, labels, perm[:train_num])
        test_nodes = perm[train_num:]
        test_labels = [labels.labels_of(int(v)) for v in test_nodes]
        for a in grid:
            aug = AugmentConfig(float(a), theta, derive_seed(seed, s, train_num))
            ds = augment(train, "interpolate", aug)
            macro, micro = score_split(ds, x[test_nodes], test_labels, labels.label_count,
                                       cls_cfg, rule, zero_division)
            report.rows.append(EvalRow.make(train_num, "interpolate", float(a), macro, micro, s))
    return EvalReport(sorted(report.rows, key=lambda r: (r.addcoeff, r.seed)))


def blob_means(n_labels: int, dim: int, separation: float, seed: int) -> np.ndarray:
    """Cluster centres on orthonormal directions, pairwise ``separation`` apart."""
    q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((dim, n_labels)))
    return q.T * separation / math.sqrt(2)


def sample_blobs(means: np.ndarray, counts: Sequence[int], spread: float,
                 rng: np.random.Generator) -> tuple[np.ndarray, list[frozenset[int]]]:
    x = np.concatenate([rng.normal(means[k], spread, size=(c, means.shape[1]))
                        for k, c in enumerate(counts)])
    y = [frozenset({k}) for k, c in enumerate(counts) for _ in range(c)]
    return x, y


def make_blobs(counts: Sequence[int] = (200, 10), dim: int = 16, separation: float = 6.0,
               spread: float = 1.0, seed: int = 0) -> tuple[np.ndarray, list[frozenset[int]]]:
    """Isotropic Gaussian clusters, one single-label cluster per entry of ``counts``."""
    means = blob_means(len(counts), dim, separation, derive_seed(seed, "means"))
    return sample_blobs(means, counts, spread, np.random.default_rng(derive_seed(seed, "draw")))


def blob_trial(seed: int, counts: Sequence[int] = (200, 10), dim: int = 16,
               separation: float = 6.0, spread: float = 1.0, addcoeff: float = 1.0,
               test_counts: Sequence[int] | None = None,
               cls_cfg: ClassifyConfig = ClassifyConfig(),
               conditions: Sequence[str] = CONDITIONS) -> dict[str, float]:
    """Macro F1 per condition on an imbalanced Gaussian fixture, scored on a
    fresh draw from the same clusters."""
    means = blob_means(len(counts), dim, separation, derive_seed(seed, "means"))
    x, y = sample_blobs(means, counts, spread, np.random.default_rng(derive_seed(seed, "train")))
    xt, yt = sample_blobs(means, test_counts or counts, spread,
                          np.random.default_rng(derive_seed(seed, "test")))
    train = LabeledDataset.from_real(x, y)
    out = {}
    for cond in conditions:
        ds = augment(train, cond, AugmentConfig(addcoeff, seed=derive_seed(seed, "aug")))
        out[cond] = score_split(ds, xt, yt, len(counts), cls_cfg)[0]
    return out
