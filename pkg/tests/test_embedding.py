import math

import numpy as np
import pytest

from embaug.embedding import (EmbeddingModel, TrainConfig, context_pairs, count_pairs,
                              init_model, load_embeddings, loss_and_gradient, save_embeddings,
                              similarity, train_skipgram, unigram_cdf)
from embaug.graph_corpus import SamplingConfig, WalkCorpus, generate_corpus

MASK = (1 << 64) - 1


def splitmix_draws(state, count):
    """Pure-python splitmix64 uniforms, independent of the compiled kernel."""
    out = []
    for _ in range(count):
        state = (state + 0x9E3779B97F4A7C15) & MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        z ^= z >> 31
        out.append((z >> 11) * 2.0**-53)
    return state, out


def random_model(rng, n, d, scale=0.5):
    return EmbeddingModel(rng.normal(0, scale, (n, d)), rng.normal(0, scale, (n, d)))


def dense_grad(model, grad):
    gi = np.zeros_like(model.input_vectors)
    go = np.zeros_like(model.output_vectors)
    for r, g in grad.input_rows.items():
        gi[r] += g
    for r, g in grad.output_rows.items():
        go[r] += g
    return gi, go


def fd_grad(model, pair, negs, h=1e-5):
    gi = np.zeros_like(model.input_vectors)
    go = np.zeros_like(model.output_vectors)
    for mat, out in ((model.input_vectors, gi), (model.output_vectors, go)):
        for idx in np.ndindex(mat.shape):
            old = mat[idx]
            mat[idx] = old + h
            up = loss_and_gradient(model, pair, negs)[0]
            mat[idx] = old - h
            down = loss_and_gradient(model, pair, negs)[0]
            mat[idx] = old
            out[idx] = (up - down) / (2 * h)
    return gi, go


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-300)


class TestContextPairs:
    def test_boundary_clipping(self):
        c = WalkCorpus.from_walks([[0, 1, 2]])
        assert list(context_pairs(c, 1)) == [(0, 1), (1, 0), (1, 2), (2, 1)]

    def test_single_node_walk(self):
        assert list(context_pairs(WalkCorpus.from_walks([[4]]), 3)) == []

    def test_length_five_window_two(self):
        walk = [10, 11, 12, 13, 14]
        brute = [(walk[t], walk[t + j]) for t in range(5) for j in range(-2, 3)
                 if j != 0 and 0 <= t + j < 5]
        pairs = list(context_pairs(WalkCorpus.from_walks([walk]), 2))
        assert len(brute) == 14
        assert pairs == brute
        assert count_pairs([5], 2) == 14

    @pytest.mark.parametrize("lengths,window", [([1, 2, 3, 7], 1), ([40] * 3, 5), ([3, 9], 10)])
    def test_count_matches_enumeration(self, lengths, window):
        c = WalkCorpus.from_walks([list(range(n)) for n in lengths])
        assert count_pairs(c.lengths, window) == sum(1 for _ in context_pairs(c, window))


class TestSimilarity:
    def test_orthogonal(self):
        m = EmbeddingModel(np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]))
        assert similarity(m, 0, 0) == 0.5

    def test_sigma_one(self):
        m = EmbeddingModel(np.array([[1.0, 0.0]]), np.array([[1.0, 5.0]]))
        assert similarity(m, 0, 0) == pytest.approx(0.7310585786, abs=1e-10)

    def test_large_dot_approaches_one_and_stays_open(self):
        vals = [similarity(EmbeddingModel(np.array([[s]]), np.array([[s]])), 0, 0)
                for s in (1, 3, 6, 12)]
        assert all(0 < v <= 1 for v in vals)
        assert vals == sorted(vals)
        assert vals[-1] > 1 - 1e-6
        # stays strictly positive while sigma(x) is representable (x > -745)
        neg = similarity(EmbeddingModel(np.array([[-26.0]]), np.array([[26.0]])), 0, 0)
        assert 0 < neg < 1e-290

    def test_permutation_invariance(self):
        rng = np.random.default_rng(0)
        m = random_model(rng, 6, 4)
        perm = rng.permutation(6)
        pm = EmbeddingModel(np.empty_like(m.input_vectors), np.empty_like(m.output_vectors))
        pm.input_vectors[perm] = m.input_vectors
        pm.output_vectors[perm] = m.output_vectors
        for v in range(6):
            for n in range(6):
                assert similarity(pm, perm[v], perm[n]) == similarity(m, v, n)


class TestLossAndGradient:
    def test_zero_vectors(self):
        m = EmbeddingModel(np.zeros((3, 4)), np.zeros((3, 4)))
        loss, _ = loss_and_gradient(m, (0, 1), [2])
        assert loss == pytest.approx(2 * math.log(2), abs=1e-12)

    def test_sparse_support(self):
        m = random_model(np.random.default_rng(1), 8, 3)
        _, g = loss_and_gradient(m, (2, 5), [1, 6, 1])
        assert set(g.input_rows) == {2}
        assert set(g.output_rows) == {5, 6, 1}

    def test_sign_flip_symmetry(self):
        m = random_model(np.random.default_rng(2), 4, 5)
        u, w = m.input_vectors[0].copy(), m.output_vectors[1].copy()
        base, _ = loss_and_gradient(m, (0, 1), [])
        m.output_vectors[1] *= -1
        flipped, _ = loss_and_gradient(m, (0, 1), [])
        # -log sigma(-x) - (-log sigma(x)) = x
        assert flipped - base == pytest.approx(u @ w, rel=1e-12, abs=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        m = random_model(rng, 5, 4)
        pair = tuple(rng.integers(0, 5, 2))
        negs = rng.integers(0, 5, 3).tolist()
        gi, go = dense_grad(m, loss_and_gradient(m, pair, negs)[1])
        fi, fo = fd_grad(m, pair, negs)
        assert rel_err(np.concatenate([gi, go]), np.concatenate([fi, fo])) <= 1e-4


class TestTrainSkipgram:
    def test_epochs_zero_is_initialization(self):
        c = WalkCorpus.from_walks([[0, 1, 2]])
        m = train_skipgram(c, TrainConfig(dim=8, epochs=0, seed=5))
        init = init_model(3, 8, 5)
        assert np.array_equal(m.input_vectors, init.input_vectors)
        assert np.array_equal(m.output_vectors, init.output_vectors)

    def test_initialization_ranges(self):
        m = init_model(50, 10, 1)
        assert np.all(np.abs(m.input_vectors) <= 0.05)
        assert not m.output_vectors.any()

    def test_errors(self):
        with pytest.raises(ValueError, match="empty"):
            train_skipgram(WalkCorpus.from_walks([]), TrainConfig(dim=4))
        with pytest.raises(ValueError, match="node 7"):
            train_skipgram(WalkCorpus.from_walks([[0, 7]]), TrainConfig(dim=4), node_count=5)

    def test_steps_equal_analytic_gradient(self):
        """Replay training on walk [0, 1] with an independent RNG and
        loss_and_gradient; every pair must be one exact gradient step."""
        cfg = TrainConfig(dim=3, window=1, negatives=1, initial_lr=0.025, epochs=1, seed=11)
        corpus = WalkCorpus.from_walks([[0, 1]])
        trained = train_skipgram(corpus, cfg, node_count=3)

        ref = init_model(3, 3, cfg.seed)
        state = int(np.random.SeedSequence(cfg.seed).spawn(1)[0].generate_state(1, np.uint64)[0])
        cdf = unigram_cdf(corpus, 3)
        total = count_pairs(corpus.lengths, cfg.window)
        for p, pair in enumerate(context_pairs(corpus, cfg.window)):
            state, (r,) = splitmix_draws(state, 1)
            neg = min(int(np.searchsorted(cdf, r, side="right")), 2)
            lr = cfg.initial_lr * max(1 - p / total, 1e-4)
            _, g = loss_and_gradient(ref, pair, [neg])
            gi, go = dense_grad(ref, g)
            ref.input_vectors -= lr * gi
            ref.output_vectors -= lr * go
        np.testing.assert_allclose(trained.input_vectors, ref.input_vectors, rtol=0, atol=1e-15)
        np.testing.assert_allclose(trained.output_vectors, ref.output_vectors, rtol=0, atol=1e-15)
        assert trained.output_vectors.any()

    def test_single_worker_bit_deterministic(self, two_cliques):
        c = generate_corpus(two_cliques, SamplingConfig(10, 5, 0))
        cfg = TrainConfig(dim=8, window=2, epochs=2, seed=3)
        a, b = train_skipgram(c, cfg), train_skipgram(c, cfg)
        assert np.array_equal(a.input_vectors, b.input_vectors)
        assert np.array_equal(a.output_vectors, b.output_vectors)

    def test_hogwild_workers_finite(self, two_cliques):
        c = generate_corpus(two_cliques, SamplingConfig(20, 30, 0))
        m = train_skipgram(c, TrainConfig(dim=8, window=2, epochs=2, seed=3), workers=4)
        assert np.isfinite(m.input_vectors).all() and np.isfinite(m.output_vectors).all()
        assert len(m.loss_history) == 2

    def test_clique_separation(self, two_cliques):
        wins = 0
        for seed in range(10):
            c = generate_corpus(two_cliques, SamplingConfig(20, 20, seed))
            m = train_skipgram(c, TrainConfig(dim=16, window=3, epochs=3, seed=seed))
            x = m.input_vectors / np.linalg.norm(m.input_vectors, axis=1, keepdims=True)
            cos = x @ x.T
            same = [cos[i, j] for i in range(6) for j in range(i + 1, 6) if (i < 3) == (j < 3)]
            diff = [cos[i, j] for i in range(3) for j in range(3, 6)]
            wins += np.mean(same) - np.mean(diff) > 0
        assert wins >= 9

    def test_epoch_loss_mostly_decreasing(self, two_cliques):
        c = generate_corpus(two_cliques, SamplingConfig(8, 3, 1))
        m = train_skipgram(c, TrainConfig(dim=8, window=2, initial_lr=0.01, epochs=10, seed=0))
        h = m.loss_history
        violations = sum(b > a for a, b in zip(h, h[1:]))
        assert violations <= 1

    def test_full_batch_fixed_negatives_strictly_decreasing(self):
        rng = np.random.default_rng(4)
        m = random_model(rng, 6, 4, scale=0.1)
        pairs = [(0, 1), (1, 2), (3, 4), (4, 5), (2, 0)]
        negs = [rng.integers(0, 6, 2).tolist() for _ in pairs]
        losses = []
        for _ in range(10):
            gi = np.zeros_like(m.input_vectors)
            go = np.zeros_like(m.output_vectors)
            total = 0.0
            for p, ns in zip(pairs, negs):
                loss, g = loss_and_gradient(m, p, ns)
                a, b = dense_grad(m, g)
                gi += a
                go += b
                total += loss
            losses.append(total / len(pairs))
            m.input_vectors -= 0.05 * gi
            m.output_vectors -= 0.05 * go
        assert all(b < a for a, b in zip(losses, losses[1:]))


class TestEmbeddingIO:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        m = EmbeddingModel(rng.normal(size=(7, 5)) * 10.0 ** rng.integers(-8, 8, (7, 5)),
                           np.zeros((7, 5)))
        save_embeddings(m, tmp_path / "e")
        back = load_embeddings(tmp_path / "e")
        assert np.array_equal(back.input_vectors, m.input_vectors)
        assert (tmp_path / "e").read_text().splitlines()[0] == "7 5"

    def test_parse_header(self, tmp_path):
        p = tmp_path / "e"
        p.write_text("3 2\n0 1 2\n2 5 6\n1 3 4\n")
        m = load_embeddings(p)
        assert m.input_vectors.tolist() == [[1, 2], [3, 4], [5, 6]]

    @pytest.mark.parametrize("text,match", [
        ("3 2\n0 1 2\n1 3 4\n", "found 2"),
        ("2 2\n0 1 2\n1 3\n", "expected 2 values"),
        ("2 2\n0 1 2\n1 3 x\n", "non-numeric"),
        ("2 2\n0 1 2\n5 3 4\n", "outside header"),
        ("2\n", "header"),
    ])
    def test_shape_and_token_errors(self, tmp_path, text, match):
        p = tmp_path / "e"
        p.write_text(text)
        with pytest.raises(ValueError, match=match):
            load_embeddings(p)
