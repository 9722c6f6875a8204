"""Flat key/value pipeline configuration (YAML on disk)."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field, fields

import yaml

from .augmentation import AugmentConfig
from .classify import ClassifyConfig
from .embedding import TrainConfig
from .evaluate import CONDITIONS, SplitSpec
from .graph_corpus import SamplingConfig
from .seeding import derive_seed


@dataclass
class PipelineConfig:
    # inputs / outputs
    edges: str | None = None
    labels: str | None = None
    mat: str | None = None
    corpus: str = "corpus.txt"
    embeddings: str = "embeddings.txt"
    report_dir: str = "report"
    directed: bool = False
    relabel: bool = False
    # walks
    walk_length: int = 40
    walks_per_node: int = 10
    # skipgram
    dim: int = 120
    window: int = 5
    negatives: int = 5
    initial_lr: float = 0.025
    epochs: int = 1
    # augmentation
    addcoeff: float = 1.0
    theta: float = 0.5
    # evaluation
    train_start: int = 400
    train_step: int = 200
    train_max: int | None = None
    repeats: int = 10
    conditions: list[str] = field(default_factory=lambda: ["baseline", "interpolate"])
    train_num: int = 1200
    grid: list[float] = field(default_factory=lambda: [round(0.1 * k, 1) for k in range(1, 11)])
    rule: str = "topk"
    zero_division: str = "zero"
    # classifier
    l2_lambda: float = 1e-4
    cls_epochs: int = 100
    cls_lr: float = 0.1
    # execution
    workers: int = 1
    seed: int = 0
    plot: bool = False

    def validate(self) -> None:
        bad = [c for c in self.conditions if c not in CONDITIONS]
        if bad:
            raise ValueError(f"unknown conditions {bad}; choose from {list(CONDITIONS)}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        # constructing the stage configs runs their own checks
        self.sampling(), self.training(), self.augment(), self.split(), self.classifier()

    def sampling(self) -> SamplingConfig:
        return SamplingConfig(self.walk_length, self.walks_per_node, derive_seed(self.seed, "walk"))

    def training(self) -> TrainConfig:
        return TrainConfig(self.dim, self.window, self.negatives, self.initial_lr, self.epochs,
                           derive_seed(self.seed, "embed"))

    def augment(self) -> AugmentConfig:
        return AugmentConfig(self.addcoeff, self.theta, derive_seed(self.seed, "augment"))

    def split(self) -> SplitSpec:
        return SplitSpec(self.train_start, self.train_step, self.train_max,
                         derive_seed(self.seed, "split"), self.repeats)

    def classifier(self) -> ClassifyConfig:
        return ClassifyConfig(self.l2_lambda, self.cls_epochs, self.cls_lr)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def updated(self, **overrides) -> "PipelineConfig":
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return dataclasses.replace(self, **{k: v for k, v in overrides.items() if v is not None})


def load_config(path) -> PipelineConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a key/value mapping")
    return PipelineConfig().updated(**data)


def dump_config(cfg: PipelineConfig, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=False, default_flow_style=None)


def require_file(path, what: str) -> str:
    if not path:
        raise ValueError(f"no {what} path configured")
    if not os.path.exists(path):
        raise FileNotFoundError(f"{what} not found: {path}")
    return path
