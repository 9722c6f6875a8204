"""Virtual-sample synthesis and label balancing in the embedded space.

Every label's *tag set* (the real samples carrying it plus the samples
synthesized on its behalf) is raised to ``ceil(addcoeff * num_max)``, where
``num_max`` is the largest real tag-set size. New samples are convex
combinations of two distinct real samples of the label (``interpolate``) or
verbatim copies of one (``duplicate``).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist, pdist

REAL, VIRTUAL, DUPLICATE = "real", "virtual", "duplicate"
MODES = ("interpolate", "duplicate")


@dataclass(frozen=True)
class AugmentConfig:
    addcoeff: float = 1.0
    theta: float = 0.5
    seed: int = 0
    mode: str = "interpolate"

    def __post_init__(self):
        if not 0 < self.addcoeff <= 1:
            raise ValueError(f"addcoeff must be in (0, 1], got {self.addcoeff}")
        if not 0 <= self.theta <= 1:
            raise ValueError(f"theta must be in [0, 1], got {self.theta}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


@dataclass(eq=False)
class LabeledDataset:
    """Feature rows with label sets and provenance.

    ``tags[i]`` is the label a synthesized sample was made for (-1 on real
    rows) and ``parents[i]`` the real rows it came from (-1 on real rows).
    """

    vectors: np.ndarray
    labels: list[frozenset[int]]
    provenance: np.ndarray
    tags: np.ndarray = None
    parents: np.ndarray = None

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=float)
        if self.vectors.ndim != 2:
            raise ValueError("vectors must be a 2-d array")
        n = len(self.vectors)
        self.labels = [frozenset(ls) for ls in self.labels]
        self.provenance = np.asarray(self.provenance, dtype=object)
        if self.tags is None:
            self.tags = np.full(n, -1, dtype=np.int64)
        if self.parents is None:
            self.parents = np.full((n, 2), -1, dtype=np.int64)
        if not len(self.labels) == len(self.provenance) == len(self.tags) == n:
            raise ValueError("field lengths differ")
        if any(not ls for ls in self.labels):
            raise ValueError("every sample needs at least one label")
        if not np.isfinite(self.vectors).all():
            raise ValueError("non-finite feature vector")

    @classmethod
    def from_real(cls, vectors, labels: Sequence) -> "LabeledDataset":
        return cls(vectors, list(labels), np.full(len(labels), REAL, dtype=object))

    @classmethod
    def from_nodes(cls, embeddings: np.ndarray, label_table, nodes) -> "LabeledDataset":
        nodes = np.asarray(nodes, dtype=np.int64)
        return cls.from_real(embeddings[nodes], [label_table.labels_of(int(v)) for v in nodes])

    def __len__(self) -> int:
        return len(self.vectors)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def is_real(self) -> np.ndarray:
        return self.provenance == REAL

    def real(self) -> "LabeledDataset":
        idx = np.flatnonzero(self.is_real)
        return LabeledDataset(self.vectors[idx], [self.labels[i] for i in idx],
                              self.provenance[idx])

    def present_labels(self) -> list[int]:
        return sorted(set().union(*self.labels)) if self.labels else []

    def label_count(self) -> int:
        return max(self.present_labels(), default=-1) + 1

    def members(self, label: int, real_only: bool = True) -> np.ndarray:
        mask = self.is_real if real_only else np.ones(len(self), dtype=bool)
        return np.array([i for i, ls in enumerate(self.labels) if label in ls and mask[i]],
                        dtype=np.int64)

    def tag_counts(self, label_count: int | None = None) -> np.ndarray:
        """Per-label tag-set size: real members plus rows synthesized for it."""
        k = self.label_count() if label_count is None else label_count
        counts = np.zeros(k, dtype=np.int64)
        for i in np.flatnonzero(self.is_real):
            for l in self.labels[i]:
                counts[l] += 1
        synth = self.tags[~self.is_real]
        counts += np.bincount(synth[synth >= 0], minlength=k)[:k]
        return counts

    def membership_counts(self, label_count: int | None = None) -> np.ndarray:
        """Per-label count of rows whose label set contains it."""
        k = self.label_count() if label_count is None else label_count
        counts = np.zeros(k, dtype=np.int64)
        for ls in self.labels:
            for l in ls:
                counts[l] += 1
        return counts

    def label_matrix(self, label_count: int) -> np.ndarray:
        y = np.zeros((len(self), label_count), dtype=bool)
        for i, ls in enumerate(self.labels):
            y[i, list(ls)] = True
        return y

    def concat(self, other: "LabeledDataset") -> "LabeledDataset":
        if len(other) and other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return LabeledDataset(
            np.concatenate([self.vectors, other.vectors]),
            self.labels + other.labels,
            np.concatenate([self.provenance, other.provenance]),
            np.concatenate([self.tags, other.tags]),
            np.concatenate([self.parents, other.parents]),
        )


def midpoint(v1, v2, theta: float = 0.5) -> np.ndarray:
    """Convex combination ``theta * v1 + (1 - theta) * v2``."""
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    if v1.shape != v2.shape:
        raise ValueError(f"dimension mismatch: {v1.shape} vs {v2.shape}")
    if not 0 <= theta <= 1:
        raise ValueError("theta must be in [0, 1]")
    return theta * v1 + (1 - theta) * v2


def balance_target(addcoeff: float, num_max: int) -> int:
    # guard against products like 0.35 * 200 landing a hair above an integer
    return max(1, math.ceil(addcoeff * num_max - 1e-9))


def balance(dataset: LabeledDataset, cfg: AugmentConfig,
            labels: Sequence[int] | None = None) -> LabeledDataset:
    """Append synthesized rows until every label's tag set reaches the target.

    ``labels`` defaults to every label present among the real rows; naming a
    label with no real rows is an error. Each label draws from its own
    generator seeded by ``(cfg.seed, label)``, and labels are processed in
    ascending order, so the output does not depend on which labels are
    requested alongside.
    """
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    real_idx = np.flatnonzero(dataset.is_real)
    if labels is None:
        labels = sorted(set().union(*(dataset.labels[i] for i in real_idx)))
    members = {l: dataset.members(l) for l in labels}
    empty = [l for l, m in members.items() if len(m) == 0]
    if empty:
        raise ValueError(f"labels with zero real samples: {empty}")
    num_max = max(len(m) for m in members.values())
    target = balance_target(cfg.addcoeff, num_max)

    vecs, labs, prov, tags, parents = [], [], [], [], []
    for l in sorted(labels):
        pool = members[l]
        need = target - len(pool)
        if need <= 0:
            continue
        rng = np.random.default_rng([cfg.seed, l])
        if cfg.mode == "duplicate" or len(pool) == 1:
            pick = pool[rng.integers(len(pool), size=need)]
            vecs.append(dataset.vectors[pick])
            labs.extend(dataset.labels[i] for i in pick)
            prov.extend([DUPLICATE] * need)
            parents.append(np.stack([pick, pick], axis=1))
        else:
            a = rng.integers(len(pool), size=need)
            b = rng.integers(len(pool) - 1, size=need)
            b = b + (b >= a)
            i, j = pool[a], pool[b]
            vecs.append(cfg.theta * dataset.vectors[i] + (1 - cfg.theta) * dataset.vectors[j])
            labs.extend(dataset.labels[p] & dataset.labels[q] for p, q in zip(i, j))
            prov.extend([VIRTUAL] * need)
            parents.append(np.stack([i, j], axis=1))
        tags.append(np.full(need, l, dtype=np.int64))

    if not vecs:
        return dataset.concat(LabeledDataset(np.zeros((0, dataset.dim)), [], []))
    extra = LabeledDataset(np.concatenate(vecs), labs, np.array(prov, dtype=object),
                           np.concatenate(tags), np.concatenate(parents))
    return dataset.concat(extra)


def duplicate_baseline(dataset: LabeledDataset, cfg: AugmentConfig,
                       labels: Sequence[int] | None = None) -> LabeledDataset:
    """Same targets as :func:`balance`, filled with verbatim copies."""
    return balance(dataset, AugmentConfig(cfg.addcoeff, cfg.theta, cfg.seed, "duplicate"),
                   labels)


def augment(dataset: LabeledDataset, condition: str, cfg: AugmentConfig,
            labels=None) -> LabeledDataset:
    if condition == "baseline":
        return dataset
    if condition == "interpolate":
        return balance(dataset, AugmentConfig(cfg.addcoeff, cfg.theta, cfg.seed), labels)
    if condition == "duplicate":
        return duplicate_baseline(dataset, cfg, labels)
    raise ValueError(f"unknown condition {condition!r}")


def save_dataset_csv(dataset: LabeledDataset, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["provenance", "labels", "tag"] + [f"x{k}" for k in range(dataset.dim)])
        for i in range(len(dataset)):
            w.writerow([dataset.provenance[i], ";".join(map(str, sorted(dataset.labels[i]))),
                        int(dataset.tags[i])] + [repr(float(x)) for x in dataset.vectors[i]])


@dataclass
class GeometryReport:
    intra: dict[int, float]
    inter: dict[tuple[int, int], float]
    norm_mean: dict[int, float]
    norm_std: dict[int, float]
    skipped: list[int] = field(default_factory=list)

    @property
    def mean_intra(self) -> float:
        return float(np.mean(list(self.intra.values())))

    @property
    def mean_inter(self) -> float:
        return float(np.mean(list(self.inter.values())))

    @property
    def intra_inter_ratio(self) -> float:
        return self.mean_intra / self.mean_inter if self.mean_inter > 0 else math.inf

    def norm_cv(self, label: int) -> float:
        m = self.norm_mean[label]
        return self.norm_std[label] / m if m > 0 else math.inf

    def compact(self, a: int, b: int) -> bool:
        """Both labels sit tighter internally than against each other."""
        d = self.inter[(a, b)]
        return self.intra[a] < d and self.intra[b] < d

    def norm_gap(self, a: int, b: int) -> float:
        """|mean norm a - mean norm b| over the pooled norm std."""
        pooled = math.sqrt((self.norm_std[a] ** 2 + self.norm_std[b] ** 2) / 2)
        gap = abs(self.norm_mean[a] - self.norm_mean[b])
        return gap / pooled if pooled > 0 else (math.inf if gap > 0 else 0.0)

    def rows(self) -> list[tuple[str, str, float]]:
        out = []
        for l in sorted(self.intra):
            out.append(("intra_mean_distance", str(l), self.intra[l]))
            out.append(("norm_mean", str(l), self.norm_mean[l]))
            out.append(("norm_std", str(l), self.norm_std[l]))
            out.append(("norm_cv", str(l), self.norm_cv(l)))
        for (a, b), d in sorted(self.inter.items()):
            key = f"{a};{b}"
            out.append(("inter_mean_distance", key, d))
            out.append(("intra_inter_ratio", key, (self.intra[a] + self.intra[b]) / 2 / d
                        if d > 0 else math.inf))
            out.append(("intra_below_inter", key, float(self.compact(a, b))))
            out.append(("norm_gap", key, self.norm_gap(a, b)))
        out.append(("mean_intra_distance", "all", self.mean_intra))
        out.append(("mean_inter_distance", "all", self.mean_inter))
        out.append(("intra_inter_ratio", "all", self.intra_inter_ratio))
        for l in self.skipped:
            out.append(("skipped", str(l), float("nan")))
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["statistic", "labels", "value"])
            for name, key, val in self.rows():
                w.writerow([name, key, repr(float(val))])


def geometry_diagnostics(dataset: LabeledDataset, max_per_label: int | None = None,
                         seed: int = 0) -> GeometryReport:
    """Euclidean distance and norm statistics over the real rows.

    Labels with fewer than two real samples are skipped and listed. With
    ``max_per_label`` each label is subsampled (seeded) before computing
    pairwise distances.
    """
    real = dataset.real()
    rng = np.random.default_rng(seed)
    groups, skipped = {}, []
    for l in real.present_labels():
        idx = real.members(l)
        if len(idx) < 2:
            skipped.append(l)
            continue
        if max_per_label is not None and len(idx) > max_per_label:
            idx = np.sort(rng.choice(idx, max_per_label, replace=False))
        groups[l] = idx
    if len(groups) < 2:
        raise ValueError("need at least two labels with two or more samples")

    x = real.vectors
    norms = np.linalg.norm(x, axis=1)
    intra = {l: float(pdist(x[idx]).mean()) for l, idx in groups.items()}
    inter = {}
    for a, b in combinations(sorted(groups), 2):
        ia, ib = groups[a], groups[b]
        d = cdist(x[ia], x[ib])
        distinct = ia[:, None] != ib[None, :]
        inter[(a, b)] = float(d[distinct].mean()) if distinct.any() else 0.0
    return GeometryReport(
        intra=intra,
        inter=inter,
        norm_mean={l: float(norms[idx].mean()) for l, idx in groups.items()},
        norm_std={l: float(norms[idx].std()) for l, idx in groups.items()},
        skipped=skipped,
    )
