"""Graphs, label tables and random-walk corpora.

Graphs are stored as CSR arrays over dense integer node ids. Walk corpora
are stored flat (one node array plus offsets) so the skipgram kernel can
consume them without copying.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

logger = logging.getLogger(__name__)


class GraphFormatError(ValueError):
    """Malformed edge-list, label or corpus file."""

    def __init__(self, path, lineno, message):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable adjacency structure in CSR form.

    ``indices[indptr[v]:indptr[v + 1]]`` is the sorted neighbor list of ``v``.
    ``node_ids`` holds the original file ids when the loader relabeled them.
    """

    indptr: np.ndarray
    indices: np.ndarray
    directed: bool = False
    node_ids: np.ndarray | None = None

    @property
    def node_count(self) -> int:
        return len(self.indptr) - 1

    @property
    def edge_count(self) -> int:
        nnz = len(self.indices)
        if self.directed:
            return nnz
        src = np.repeat(np.arange(self.node_count), np.diff(self.indptr))
        loops = int(np.count_nonzero(src == self.indices))
        return (nnz - loops) // 2 + loops

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    @property
    def adjacency(self) -> dict[int, list[int]]:
        return {v: self.neighbors(v).tolist() for v in range(self.node_count)}

    def has_edge(self, u: int, v: int) -> bool:
        nbrs = self.neighbors(u)
        i = np.searchsorted(nbrs, v)
        return bool(i < len(nbrs) and nbrs[i] == v)

    def edge_set(self) -> set[tuple[int, int]]:
        src = np.repeat(np.arange(self.node_count), np.diff(self.indptr))
        return set(zip(src.tolist(), self.indices.tolist()))

    @classmethod
    def from_edges(cls, edges, node_count: int | None = None,
                   directed: bool = False, node_ids=None) -> "Graph":
        """Build a graph from an iterable or (m, 2) array of id pairs.

        Duplicate pairs collapse; for undirected graphs every pair is
        mirrored, and a self-loop is stored once.
        """
        arr = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if arr.size and arr.min() < 0:
            raise ValueError("negative node id")
        if node_count is None:
            node_count = int(arr.max()) + 1 if arr.size else 0
        elif arr.size and arr.max() >= node_count:
            raise ValueError(f"node id {int(arr.max())} >= node_count {node_count}")
        if not directed:
            arr = np.concatenate([arr, arr[:, ::-1]])
        if arr.size:
            arr = np.unique(arr, axis=0)
        counts = np.bincount(arr[:, 0], minlength=node_count)
        indptr = np.zeros(node_count + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        indices = np.ascontiguousarray(arr[:, 1])
        return cls(indptr, indices, directed,
                   None if node_ids is None else np.asarray(node_ids, dtype=np.int64))

    @classmethod
    def from_adjacency(cls, adjacency: dict[int, Sequence[int]] | Sequence[Sequence[int]],
                       directed: bool = False) -> "Graph":
        items = adjacency.items() if isinstance(adjacency, dict) else enumerate(adjacency)
        edges = [(u, v) for u, nbrs in items for v in nbrs]
        n = len(adjacency) if not isinstance(adjacency, dict) else max(adjacency) + 1
        return cls.from_edges(edges, node_count=n, directed=directed)


@dataclass(frozen=True)
class LabelTable:
    """Per-node label sets. Nodes absent from ``node_labels`` are unlabeled."""

    node_labels: dict[int, frozenset[int]]
    label_count: int

    def labels_of(self, v: int) -> frozenset[int]:
        return self.node_labels.get(v, frozenset())

    def labeled_nodes(self) -> np.ndarray:
        return np.array(sorted(v for v, ls in self.node_labels.items() if ls),
                        dtype=np.int64)

    def label_sizes(self) -> np.ndarray:
        sizes = np.zeros(self.label_count, dtype=np.int64)
        for ls in self.node_labels.values():
            for l in ls:
                sizes[l] += 1
        return sizes

    def validate(self, graph: Graph) -> None:
        for v in self.node_labels:
            if not 0 <= v < graph.node_count:
                raise ValueError(f"labeled node {v} outside graph range [0, {graph.node_count})")


@dataclass(frozen=True)
class SamplingConfig:
    walk_length: int = 40
    walks_per_node: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.walk_length < 1:
            raise ValueError("walk_length must be >= 1")
        if self.walks_per_node < 1:
            raise ValueError("walks_per_node must be >= 1")


@dataclass(eq=False)
class WalkCorpus:
    """Walks stored flat: walk ``i`` is ``nodes[offsets[i]:offsets[i + 1]]``.

    Equality compares walks only, not the sampling metadata.
    """

    nodes: np.ndarray
    offsets: np.ndarray
    walk_length: int | None = None
    walks_per_node: int | None = None

    @classmethod
    def from_walks(cls, walks: Sequence[Sequence[int]], walk_length=None,
                   walks_per_node=None) -> "WalkCorpus":
        lengths = np.fromiter((len(w) for w in walks), dtype=np.int64, count=len(walks))
        offsets = np.zeros(len(walks) + 1, dtype=np.int64)
        np.cumsum(lengths, out=offsets[1:])
        nodes = np.empty(offsets[-1], dtype=np.int64)
        for i, w in enumerate(walks):
            nodes[offsets[i]:offsets[i + 1]] = w
        return cls(nodes, offsets, walk_length, walks_per_node)

    def __len__(self) -> int:
        return len(self.offsets) - 1

    def __getitem__(self, i: int) -> np.ndarray:
        return self.nodes[self.offsets[i]:self.offsets[i + 1]]

    def __iter__(self) -> Iterator[np.ndarray]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, WalkCorpus):
            return NotImplemented
        return (np.array_equal(self.offsets, other.offsets)
                and np.array_equal(self.nodes, other.nodes))

    @property
    def walks(self) -> list[list[int]]:
        return [w.tolist() for w in self]

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.offsets)

    def max_node(self) -> int:
        return int(self.nodes.max()) if len(self.nodes) else -1


def _tokens(path) -> Iterator[tuple[int, list[str]]]:
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if line:
                yield lineno, line.split()


def _parse_int(path, lineno, tok) -> int:
    try:
        val = int(tok)
    except ValueError:
        raise GraphFormatError(path, lineno, f"non-integer token {tok!r}") from None
    if val < 0:
        raise GraphFormatError(path, lineno, f"negative node id {val}")
    return val


def load_edge_list(path, directed: bool = False, relabel: bool = False) -> Graph:
    """Read a whitespace-separated "u v" edge list.

    Extra columns (e.g. weights) are ignored. Without ``relabel`` ids are
    used as-is and ``node_count = max id + 1``; with it, the distinct ids
    are mapped in sorted order onto ``0..n-1`` and kept in ``node_ids``.
    """
    pairs = []
    for lineno, toks in _tokens(path):
        if len(toks) < 2:
            raise GraphFormatError(path, lineno, "expected two node ids")
        pairs.append((_parse_int(path, lineno, toks[0]), _parse_int(path, lineno, toks[1])))
    edges = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    if relabel:
        node_ids, dense = np.unique(edges, return_inverse=True)
        return Graph.from_edges(dense.reshape(-1, 2), node_count=len(node_ids),
                                directed=directed, node_ids=node_ids)
    return Graph.from_edges(edges, directed=directed)


def save_node_map(graph: Graph, path) -> None:
    """Write "dense_id original_id" lines for a relabeled graph."""
    ids = graph.node_ids if graph.node_ids is not None else np.arange(graph.node_count)
    with open(path, "w") as fh:
        for dense, orig in enumerate(ids.tolist()):
            fh.write(f"{dense} {orig}\n")


def load_labels(path, graph: Graph | None = None) -> LabelTable:
    """Read "node label [label ...]" lines; repeated nodes take the union.

    When ``graph`` is given, node ids are translated through its relabel
    map (if any) and checked against its range.
    """
    lookup = None
    if graph is not None and graph.node_ids is not None:
        lookup = {int(o): d for d, o in enumerate(graph.node_ids.tolist())}
    table: dict[int, set[int]] = {}
    max_label = -1
    for lineno, toks in _tokens(path):
        if len(toks) < 2:
            raise GraphFormatError(path, lineno, "expected a node id and at least one label")
        node = _parse_int(path, lineno, toks[0])
        labels = [_parse_int(path, lineno, t) for t in toks[1:]]
        if lookup is not None:
            if node not in lookup:
                raise GraphFormatError(path, lineno, f"node {node} not in graph")
            node = lookup[node]
        elif graph is not None and node >= graph.node_count:
            raise GraphFormatError(
                path, lineno, f"node {node} outside graph range [0, {graph.node_count})")
        table.setdefault(node, set()).update(labels)
        max_label = max(max_label, *labels)
    return LabelTable({v: frozenset(ls) for v, ls in table.items()}, max_label + 1)


def load_mat(path, directed: bool = False) -> tuple[Graph, LabelTable]:
    """Load a MATLAB graph file with ``network`` (adjacency) and ``group``
    (node x label indicator) sparse matrices, the layout used by the public
    PPI, POS/Wikipedia and BlogCatalog distributions. Edge weights are dropped.
    """
    import scipy.io
    import scipy.sparse as sp

    mat = scipy.io.loadmat(path)
    adj = sp.coo_matrix(mat["network"])
    n = adj.shape[0]
    edges = np.stack([adj.row, adj.col], axis=1)[adj.data != 0]
    graph = Graph.from_edges(edges, node_count=n, directed=directed)
    grp = sp.coo_matrix(mat["group"])
    table: dict[int, set[int]] = {}
    for v, l in zip(grp.row[grp.data != 0].tolist(), grp.col[grp.data != 0].tolist()):
        table.setdefault(v, set()).add(l)
    labels = LabelTable({v: frozenset(ls) for v, ls in table.items()}, grp.shape[1])
    return graph, labels


def random_walk(graph: Graph, start: int, length: int, rng: np.random.Generator) -> list[int]:
    """Uniform random walk of at most ``length`` nodes, stopping early at a
    node with no neighbors."""
    if not 0 <= start < graph.node_count:
        raise ValueError(f"start node {start} outside graph")
    walk = [int(start)]
    cur = start
    while len(walk) < length:
        nbrs = graph.neighbors(cur)
        if len(nbrs) == 0:
            break
        cur = int(nbrs[rng.integers(len(nbrs))])
        walk.append(cur)
    return walk


def _walk_batch(graph: Graph, starts: np.ndarray, length: int,
                rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Advance one walk per start node in lockstep; returns (walks, lengths)."""
    indptr, indices = graph.indptr, graph.indices
    walks = np.zeros((len(starts), length), dtype=np.int64)
    walks[:, 0] = starts
    lengths = np.full(len(starts), length, dtype=np.int64)
    cur = starts.astype(np.int64).copy()
    alive = np.arange(len(starts))
    for step in range(1, length):
        deg = indptr[cur[alive] + 1] - indptr[cur[alive]]
        stuck = deg == 0
        if stuck.any():
            lengths[alive[stuck]] = step
            alive = alive[~stuck]
            deg = deg[~stuck]
        if len(alive) == 0:
            break
        nxt = indices[indptr[cur[alive]] + rng.integers(0, deg)]
        walks[alive, step] = nxt
        cur[alive] = nxt
    return walks, lengths


def generate_corpus(graph: Graph, cfg: SamplingConfig, workers: int = 1) -> WalkCorpus:
    """Sample ``walks_per_node`` passes over a shuffled node order.

    With ``workers > 1`` each pass's start nodes are split into contiguous
    chunks walked in threads, each chunk drawing from its own generator
    spawned from the config seed. Output is deterministic for a fixed
    ``(seed, workers)``; ``workers=1`` is the reference ordering.
    """
    n = graph.node_count
    root = np.random.SeedSequence(cfg.seed)
    order_rng = np.random.default_rng(root.spawn(1)[0])
    walk_rngs = [np.random.default_rng(s) for s in root.spawn(max(workers, 1))]

    chunks_w, chunks_l = [], []
    with ThreadPoolExecutor(max_workers=max(workers, 1)) as pool:
        for _ in range(cfg.walks_per_node):
            order = order_rng.permutation(n)
            parts = np.array_split(order, len(walk_rngs))
            for walks, lengths in pool.map(
                    lambda a: _walk_batch(graph, a[0], cfg.walk_length, a[1]),
                    zip(parts, walk_rngs)):
                chunks_w.append(walks)
                chunks_l.append(lengths)

    walks = np.concatenate(chunks_w) if chunks_w else np.zeros((0, cfg.walk_length), np.int64)
    lengths = np.concatenate(chunks_l) if chunks_l else np.zeros(0, np.int64)
    mask = np.arange(cfg.walk_length)[None, :] < lengths[:, None]
    offsets = np.zeros(len(lengths) + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    logger.info("sampled %d walks (mean length %.1f)", len(lengths),
                lengths.mean() if len(lengths) else 0.0)
    return WalkCorpus(walks[mask], offsets, cfg.walk_length, cfg.walks_per_node)


def save_corpus(corpus: WalkCorpus, path) -> None:
    with open(path, "w") as fh:
        for w in corpus:
            fh.write(" ".join(map(str, w.tolist())))
            fh.write("\n")


def load_corpus(path) -> WalkCorpus:
    walks = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            toks = line.split()
            if not toks:
                continue
            walks.append([_parse_int(path, lineno, t) for t in toks])
    corpus = WalkCorpus.from_walks(walks)
    if len(corpus):
        corpus.walk_length = int(corpus.lengths.max())
    return corpus


def check_corpus(graph: Graph, corpus: WalkCorpus) -> list[tuple[int, int, int]]:
    """Brute-force scan: return (walk index, u, v) for every step that is not
    an edge of ``graph``."""
    bad = []
    edges = graph.edge_set()
    for i, w in enumerate(corpus):
        for u, v in zip(w[:-1].tolist(), w[1:].tolist()):
            if (u, v) not in edges:
                bad.append((i, u, v))
    return bad


def find_dataset(name: str, data_dir=None) -> str | None:
    """Locate a canonical ``.mat`` file for PPI, Wiki/POS or BlogCatalog."""
    names = {
        "ppi": ["Homo_sapiens.mat", "ppi.mat"],
        "wiki": ["POS.mat", "wiki.mat", "Wikipedia.mat"],
        "blog": ["blogcatalog.mat", "BlogCatalog.mat"],
    }[name]
    roots = [data_dir or os.environ.get("EMBAUG_DATA", "data")]
    for root in roots:
        for fn in names:
            p = os.path.join(root, fn)
            if os.path.exists(p):
                return p
    return None
