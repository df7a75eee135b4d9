import numpy as np
import pytest

from knotrate import tcn
from knotrate.ensemble import (
    DEFAULT_SEEDS,
    Ensemble,
    load_ensemble,
    predict_timeline,
    save_ensemble,
    train_ensemble,
    vote,
)
from knotrate.featstore import FeatureSequence
from knotrate.tcn import ArchConfig, Normalizer, TrainConfig, WindowSample

SMALL = ArchConfig(input_dim=4, hidden_width=4, dilations=(1, 2))


def tiny_dataset(n=12, seed=0):
    rng = np.random.default_rng(seed)
    return [
        WindowSample(rng.standard_normal((SMALL.context_len, 4)), int(rng.integers(12)))
        for _ in range(n)
    ]


def tiny_seq(t=5, seed=1):
    rng = np.random.default_rng(seed)
    return FeatureSequence(
        rng.standard_normal((t, 4)).astype(np.float32), np.arange(t, dtype=np.int64) + 1
    )


def uniformish(idx, weight=0.5):
    p = np.full(12, (1 - weight) / 11)
    p[idx] = weight
    return p


class TestVote:
    def test_unanimous(self):
        probs = [uniformish(5) for _ in range(10)]
        assert vote([5] * 10, probs) == 5

    def test_tie_broken_by_mean_probability(self):
        # 5 votes each for classes 2 and 7; class 2 has the higher mean prob
        labels = [2] * 5 + [7] * 5
        probs = []
        for _ in range(10):
            p = np.full(12, 0.025)
            p[2], p[7] = 0.40, 0.35
            probs.append(p)
        assert vote(labels, probs) == 2

    def test_exact_tie_lowest_index(self):
        p = np.full(12, 1 / 12)
        assert vote([3, 9], [p, p]) == 3

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            vote([], [])

    def test_permutation_invariance(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(1, 11))
            labels = rng.integers(0, 12, n).tolist()
            probs = [rng.dirichlet(np.ones(12)) for _ in range(n)]
            base = vote(labels, probs)
            perm = rng.permutation(n)
            assert vote([labels[i] for i in perm], [probs[i] for i in perm]) == base


class TestTrainEnsemble:
    def test_table_seed_list_builds_ten_members(self):
        assert len(DEFAULT_SEEDS) == 10
        assert set(DEFAULT_SEEDS) == {2022, 30548, 85844, 20, 180, 357, 485621, 102314, 305945, 0}
        ens = train_ensemble(
            tiny_dataset(), SMALL, TrainConfig(epochs=1), list(DEFAULT_SEEDS), Normalizer.identity(4)
        )
        assert len(ens.members) == 10

    def test_duplicate_seeds_rejected(self):
        with pytest.raises(ValueError):
            train_ensemble(tiny_dataset(), SMALL, TrainConfig(epochs=1), [1, 1], Normalizer.identity(4))

    def test_deterministic(self):
        ens1 = train_ensemble(tiny_dataset(), SMALL, TrainConfig(epochs=2), [0, 5], Normalizer.identity(4))
        ens2 = train_ensemble(tiny_dataset(), SMALL, TrainConfig(epochs=2), [0, 5], Normalizer.identity(4))
        for m1, m2 in zip(ens1.members, ens2.members):
            for p1, p2 in zip(m1.parameters(), m2.parameters()):
                assert p1.tobytes() == p2.tobytes()


class TestPredictTimeline:
    def test_single_member_equals_member(self):
        ens = train_ensemble(tiny_dataset(), SMALL, TrainConfig(epochs=1), [0], Normalizer.identity(4))
        seq = tiny_seq()
        voted, mean_probs = predict_timeline(ens, seq)
        probs, labels = tcn.predict_sequence(ens.members[0], seq, ens.normalizer)
        assert np.array_equal(voted, labels)
        assert np.abs(mean_probs - probs).max() < 1e-12

    def test_identical_members_mean_is_member(self):
        model = tcn.init_model(SMALL, 4)
        ens = Ensemble([model, model, model], [0, 1, 2], Normalizer.identity(4))
        seq = tiny_seq()
        voted, mean_probs = predict_timeline(ens, seq)
        probs, labels = tcn.predict_sequence(model, seq, ens.normalizer)
        assert np.abs(mean_probs - probs).max() < 1e-12
        assert np.array_equal(voted, labels)

    def test_matches_bruteforce_recomputation(self):
        ens = train_ensemble(
            tiny_dataset(), SMALL, TrainConfig(epochs=1), [0, 1, 2], Normalizer.identity(4)
        )
        seq = tiny_seq(t=5)
        voted, mean_probs = predict_timeline(ens, seq)
        member_out = [tcn.predict_sequence(m, seq, ens.normalizer) for m in ens.members]
        for t in range(seq.T):
            rows = [probs[t] for probs, _ in member_out]
            expect_mean = np.mean(rows, axis=0)
            assert np.abs(mean_probs[t] - expect_mean).max() < 1e-12
            labels = [int(labels[t]) for _, labels in member_out]
            assert voted[t] == vote(labels, rows)
        assert np.abs(mean_probs.sum(axis=1) - 1).max() < 1e-6


class TestCheckpointDir:
    def test_roundtrip(self, tmp_path):
        ens = train_ensemble(tiny_dataset(), SMALL, TrainConfig(epochs=1), [0, 9], Normalizer.identity(4))
        save_ensemble(ens, tmp_path / "ckpt")
        loaded = load_ensemble(tmp_path / "ckpt")
        assert loaded.seeds == [0, 9]
        seq = tiny_seq()
        v1, p1 = predict_timeline(ens, seq)
        v2, p2 = predict_timeline(loaded, seq)
        assert np.array_equal(v1, v2)
        assert np.abs(p1 - p2).max() < 1e-12
