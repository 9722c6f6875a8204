"""Skipgram with negative sampling over random-walk corpora.

The training kernel is compiled with numba. Each positive pair takes one
exact gradient step on

    -log sigma(u . w_ctx) - sum_k log sigma(-u . w_neg_k)

where ``u`` is the center's input row and ``w`` are output rows; all dot
products use the pre-step parameters, so repeated targets accumulate.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numba
import numpy as np
from scipy.special import expit, log_expit

from .graph_corpus import WalkCorpus

logger = logging.getLogger(__name__)

LR_FLOOR = 1e-4


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 120
    window: int = 5
    negatives: int = 5
    initial_lr: float = 0.025
    epochs: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1 or self.window < 1 or self.negatives < 1:
            raise ValueError("dim, window and negatives must be >= 1")
        if not self.initial_lr > 0:
            raise ValueError("initial_lr must be > 0")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass(eq=False)
class EmbeddingModel:
    """Input ("encoder") and output ("decoder") vectors, one row per node.

    ``input_vectors`` is the published embedding used downstream.
    """

    input_vectors: np.ndarray
    output_vectors: np.ndarray
    loss_history: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.input_vectors.shape != self.output_vectors.shape:
            raise ValueError("input and output matrices differ in shape")

    @property
    def dim(self) -> int:
        return self.input_vectors.shape[1]

    @property
    def node_count(self) -> int:
        return self.input_vectors.shape[0]

    def copy(self) -> "EmbeddingModel":
        return EmbeddingModel(self.input_vectors.copy(), self.output_vectors.copy(),
                              list(self.loss_history))


class SparseGradient(NamedTuple):
    input_rows: dict[int, np.ndarray]
    output_rows: dict[int, np.ndarray]


sigmoid = expit
log_sigmoid = log_expit


def init_model(node_count: int, dim: int, seed: int) -> EmbeddingModel:
    rng = np.random.default_rng(seed)
    syn0 = rng.uniform(-0.5 / dim, 0.5 / dim, size=(node_count, dim))
    return EmbeddingModel(syn0, np.zeros((node_count, dim)))


def context_pairs(corpus: WalkCorpus, window: int) -> Iterator[tuple[int, int]]:
    """Yield (center, context) for every offset ``0 < |j| <= window`` that
    stays inside the walk, in walk/position/offset order."""
    if window < 1:
        raise ValueError("window must be >= 1")
    for walk in corpus:
        w = walk.tolist()
        n = len(w)
        for t in range(n):
            for j in range(-window, window + 1):
                if j != 0 and 0 <= t + j < n:
                    yield w[t], w[t + j]


def count_pairs(lengths, window: int) -> int:
    """Number of pairs ``context_pairs`` yields for walks of these lengths."""
    total = 0
    for n in np.asarray(lengths).tolist():
        for t in range(n):
            total += min(window, t) + min(window, n - 1 - t)
    return total


def similarity(model: EmbeddingModel, v: int, n: int) -> float:
    """sigma(f(v) . f'(n)): input row of ``v`` against output row of ``n``."""
    return float(sigmoid(model.input_vectors[v] @ model.output_vectors[n]))


def loss_and_gradient(model: EmbeddingModel, pair: tuple[int, int],
                      negatives) -> tuple[float, SparseGradient]:
    """Negative-sampling loss for one (center, context) pair and its
    gradient, which is nonzero only on the center's input row and on the
    context/negative output rows."""
    center, ctx = pair
    u = model.input_vectors[center]
    targets = [ctx, *negatives]
    signs = np.array([1.0] + [-1.0] * len(negatives))
    w = model.output_vectors[targets]
    scores = w @ u
    loss = float(-log_sigmoid(signs * scores).sum())
    # d/ds of -log sigma(sign * s) = -sign * sigma(-sign * s)
    coef = -signs * sigmoid(-signs * scores)
    grad_in = {center: coef @ w}
    grad_out: dict[int, np.ndarray] = {}
    for t, c in zip(targets, coef):
        grad_out[t] = grad_out.get(t, 0.0) + c * u
    return loss, SparseGradient(grad_in, grad_out)


def unigram_cdf(corpus: WalkCorpus, node_count: int, power: float = 0.75) -> np.ndarray:
    freq = np.bincount(corpus.nodes, minlength=node_count).astype(float) ** power
    cdf = np.cumsum(freq)
    return cdf / cdf[-1]


@numba.njit(cache=True, inline="always")
def _splitmix(state):
    state = state + np.uint64(0x9E3779B97F4A7C15)
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return state, z ^ (z >> np.uint64(31))


@numba.njit(cache=True, inline="always")
def _log_sigmoid(x):
    if x >= 0:
        return -math.log1p(math.exp(-x))
    return x - math.log1p(math.exp(x))


@numba.njit(cache=True, nogil=True)
def _sgns_kernel(nodes, offsets, walk_lo, walk_hi, syn0, syn1, cdf, window,
                 negatives, lr0, total_pairs, done, stride, state):
    """Train on walks [walk_lo, walk_hi). ``done`` is the global pair count
    before this call; each local pair advances the schedule by ``stride``.
    Returns (loss sum, pairs seen, rng state)."""
    dim = syn0.shape[1]
    n_nodes = cdf.shape[0]
    targets = np.empty(negatives + 1, dtype=np.int64)
    coefs = np.empty(negatives + 1)
    neu1e = np.empty(dim)
    loss = 0.0
    seen = 0
    for wi in range(walk_lo, walk_hi):
        a = offsets[wi]
        n = offsets[wi + 1] - a
        for t in range(n):
            center = nodes[a + t]
            lo = max(0, t - window)
            hi = min(n - 1, t + window)
            for pos in range(lo, hi + 1):
                if pos == t:
                    continue
                frac = 1.0 - (done + seen * stride) / total_pairs
                lr = lr0 * max(frac, LR_FLOOR)
                targets[0] = nodes[a + pos]
                for k in range(1, negatives + 1):
                    state, z = _splitmix(state)
                    r = (z >> np.uint64(11)) * (1.0 / 9007199254740992.0)
                    idx = np.searchsorted(cdf, r, side="right")
                    targets[k] = min(idx, n_nodes - 1)
                neu1e[:] = 0.0
                for k in range(negatives + 1):
                    tgt = targets[k]
                    s = 0.0
                    for d in range(dim):
                        s += syn0[center, d] * syn1[tgt, d]
                    if k == 0:
                        loss -= _log_sigmoid(s)
                        g = 1.0 - 1.0 / (1.0 + math.exp(-s))
                    else:
                        loss -= _log_sigmoid(-s)
                        g = -1.0 / (1.0 + math.exp(-s))
                    coefs[k] = g
                    for d in range(dim):
                        neu1e[d] += g * syn1[tgt, d]
                for k in range(negatives + 1):
                    tgt = targets[k]
                    step = lr * coefs[k]
                    for d in range(dim):
                        syn1[tgt, d] += step * syn0[center, d]
                for d in range(dim):
                    syn0[center, d] += lr * neu1e[d]
                seen += 1
    return loss, seen, state


def _shard_bounds(offsets: np.ndarray, workers: int) -> list[tuple[int, int]]:
    n = len(offsets) - 1
    edges = np.linspace(0, n, workers + 1).astype(int)
    return [(int(edges[i]), int(edges[i + 1])) for i in range(workers)]


def train_skipgram(corpus: WalkCorpus, cfg: TrainConfig, node_count: int | None = None,
                   workers: int = 1) -> EmbeddingModel:
    """Fit input/output vectors to the corpus windows.

    Learning rate decays linearly from ``initial_lr`` to
    ``initial_lr * 1e-4`` over all pairs and epochs. With ``workers > 1``
    walk shards are trained concurrently against the shared matrices without
    locks, so only ``workers=1`` is bit-reproducible.
    """
    if len(corpus) == 0 or len(corpus.nodes) == 0:
        raise ValueError("empty corpus")
    top = corpus.max_node()
    if node_count is None:
        node_count = top + 1
    elif top >= node_count:
        raise ValueError(f"corpus references node {top} but node_count is {node_count}")
    if corpus.nodes.min() < 0:
        raise ValueError(f"corpus references negative node {int(corpus.nodes.min())}")

    model = init_model(node_count, cfg.dim, cfg.seed)
    if cfg.epochs == 0:
        return model
    nodes = np.ascontiguousarray(corpus.nodes, dtype=np.int64)
    offsets = np.ascontiguousarray(corpus.offsets, dtype=np.int64)
    cdf = unigram_cdf(corpus, node_count)
    per_epoch = count_pairs(corpus.lengths, cfg.window)
    if per_epoch == 0:
        return model
    total = float(per_epoch * cfg.epochs)
    workers = max(1, min(workers, len(corpus)))
    shards = _shard_bounds(offsets, workers)
    states = [np.uint64(s.generate_state(1, np.uint64)[0])
              for s in np.random.SeedSequence(cfg.seed).spawn(workers)]
    syn0, syn1 = model.input_vectors, model.output_vectors

    for epoch in range(cfg.epochs):
        done = float(epoch * per_epoch)
        if workers == 1:
            loss, seen, states[0] = _sgns_kernel(
                nodes, offsets, 0, len(corpus), syn0, syn1, cdf, cfg.window,
                cfg.negatives, cfg.initial_lr, total, done, 1.0, np.uint64(states[0]))
        else:
            def run(i):
                lo, hi = shards[i]
                return _sgns_kernel(nodes, offsets, lo, hi, syn0, syn1, cdf, cfg.window,
                                    cfg.negatives, cfg.initial_lr, total, done,
                                    float(workers), np.uint64(states[i]))
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(run, range(workers)))
            loss = sum(r[0] for r in results)
            seen = sum(r[1] for r in results)
            states = [r[2] for r in results]
        model.loss_history.append(loss / max(seen, 1))
        logger.info("epoch %d: mean pair loss %.4f", epoch + 1, model.loss_history[-1])

    if not np.isfinite(syn0).all() or not np.isfinite(syn1).all():
        raise FloatingPointError("non-finite embedding entries after training")
    return model


def save_embeddings(model: EmbeddingModel, path) -> None:
    """Header "node_count dim", then "id v1 ... vd" per node, round-trippable."""
    with open(path, "w") as fh:
        fh.write(f"{model.node_count} {model.dim}\n")
        for i, row in enumerate(model.input_vectors):
            fh.write(f"{i} " + " ".join(repr(float(x)) for x in row) + "\n")


def load_embeddings(path) -> EmbeddingModel:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}:1: expected header 'node_count dim'")
        try:
            n, d = int(header[0]), int(header[1])
        except ValueError:
            raise ValueError(f"{path}:1: non-numeric header") from None
        vecs = np.zeros((n, d))
        seen = np.zeros(n, dtype=bool)
        for lineno, line in enumerate(fh, 2):
            toks = line.split()
            if not toks:
                continue
            if len(toks) != d + 1:
                raise ValueError(f"{path}:{lineno}: expected {d} values, got {len(toks) - 1}")
            try:
                i = int(toks[0])
                vecs[i] = [float(t) for t in toks[1:]]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric token") from None
            except IndexError:
                raise ValueError(f"{path}:{lineno}: node id {toks[0]} outside header range") from None
            seen[i] = True
    if not seen.all():
        raise ValueError(f"{path}: header declares {n} rows, found {int(seen.sum())}")
    return EmbeddingModel(vecs, np.zeros_like(vecs))
