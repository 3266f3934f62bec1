import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covar import config, evaluate, mlp, pipeline
from covar.mlp import LayerParams, SubNetwork
from covar.numeric import RngStream
from covar.pairing import PairedDataset
from covar.siamese import JointNetwork
from covar.synthdata import blob_corpus


def test_accuracy_all_correct():
    rep = evaluate.accuracy_from_scores(np.full(5, 0.5), np.full(7, 0.99))
    assert rep.accuracy == 1.0 and (rep.n_test_pos, rep.n_test_neg) == (5, 7)


def test_accuracy_ties_count_as_negative():
    rep = evaluate.accuracy_from_scores(np.full(4, 0.75), np.full(6, 0.75))
    assert rep.accuracy == 6 / 10


def test_accuracy_rejects_empty():
    with pytest.raises(ValueError):
        evaluate.accuracy_from_scores([], [0.9])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_accuracy_invariant_to_row_permutation(seed):
    s = RngStream(seed)
    net1 = mlp.init_weights([3, 4, 2], s.split(1))
    net2 = mlp.init_weights([2, 4, 2], s.split(2))
    jn = JointNetwork(net1, net2)
    pos = PairedDataset(s.gaussian((20, 3)), s.gaussian((20, 2)))
    neg = PairedDataset(s.gaussian((15, 3)), s.gaussian((15, 2)), label="negative")
    rep = evaluate.pair_accuracy(jn, pos, neg)
    p, q = s.permutation(20), s.permutation(15)
    rep2 = evaluate.pair_accuracy(jn, pos.subset(p), neg.subset(q))
    assert rep.accuracy == rep2.accuracy
    correct = round(rep.accuracy * 35)
    assert abs(rep.accuracy - correct / 35) < 1e-12


def test_untrained_network_is_near_chance():
    for seed in range(5):
        cfg = config.resolve({"experiment": "two_modalities", "n_pairs": 300, "seed": seed})
        splits = pipeline.generate(cfg)
        jn = pipeline.init_network(cfg, splits.train_pos)
        acc = evaluate.pair_accuracy(jn, splits.test_pos, splits.test_neg).accuracy
        assert 0.35 <= acc <= 0.65


def test_separation_auc_bounds_and_extremes():
    assert evaluate.separation_auc([0, 0, 0], [0, 0]) == 0.5
    assert evaluate.separation_auc([0.1, 0.2], [0.3, 0.5]) == 1.0
    assert evaluate.separation_auc([0.4, 0.6], [0.1, 0.2]) == 0.0
    assert evaluate.separation_auc([0.3], [0.3, 0.5]) == 0.75


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=1, max_size=30),
       st.lists(st.floats(0, 10), min_size=1, max_size=30))
def test_separation_auc_matches_brute_force(same, diff):
    brute = np.mean([1.0 if a < b else 0.5 if a == b else 0.0 for a in same for b in diff])
    auc = evaluate.separation_auc(same, diff)
    assert abs(auc - brute) < 1e-12
    assert 0.0 <= auc <= 1.0
    assert (auc == 1.0) == (max(same) < min(diff))


def test_invariance_constant_encoder_gives_half():
    corpus = blob_corpus(5, seed=2)
    zero = SubNetwork([LayerParams(np.zeros((3, 2500)), np.ones(3), "linear")])
    d_same, d_diff, summ = evaluate.invariance_histograms(zero, corpus, 50, RngStream(0))
    assert not d_same.any() and not d_diff.any()
    assert summ.separation_auc == 0.5 and summ.trials == 50


def test_invariance_perfect_encoder_gives_one():
    corpus = blob_corpus(6, seed=3)
    # rotation-invariant and injective across this corpus: radial intensity profile
    rows, cols = np.mgrid[0:50, 0:50]
    ring = np.minimum((np.hypot(rows - 24.5, cols - 24.5) / 4).astype(int), 5).ravel()

    def radial(x):
        return np.stack([np.bincount(ring, weights=row, minlength=6) for row in x])

    d_same, d_diff, summ = evaluate.invariance_histograms(radial, corpus, 200, RngStream(1))
    assert summ.median_same < summ.median_diff
    assert d_same.max() < d_diff.min()
    assert summ.separation_auc == 1.0


def test_invariance_requires_two_images():
    with pytest.raises(ValueError):
        evaluate.invariance_histograms(lambda x: x, blob_corpus(1), 5, RngStream(0))


def test_invariance_deterministic_and_chunk_independent():
    corpus = blob_corpus(8, seed=1)
    net = mlp.init_weights([2500, 5], RngStream(2))
    a = evaluate.invariance_histograms(net, corpus, 30, RngStream(3), chunk=7)
    b = evaluate.invariance_histograms(net, corpus, 30, RngStream(3), chunk=30)
    np.testing.assert_allclose(a[0], b[0], rtol=1e-12)
    np.testing.assert_allclose(a[1], b[1], rtol=1e-12)


def test_circular_correlation_identity_and_reflection():
    true = 2 * np.pi * RngStream(0).uniform(200)
    assert abs(evaluate.circular_correlation(true, true) - 1.0) < 1e-12
    assert abs(evaluate.circular_correlation(-true + 1.3, true) - 1.0) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(-10, 10), st.floats(-10, 10), st.booleans(), st.booleans())
def test_circular_correlation_invariances(seed, off1, off2, flip1, flip2):
    s = RngStream(seed)
    true = 2 * np.pi * s.uniform(50)
    rec = true + 0.5 * s.gaussian(50)
    base = evaluate.circular_correlation(rec, true)
    a = (-rec if flip1 else rec) + off1
    b = (-true if flip2 else true) + off2
    assert abs(evaluate.circular_correlation(a, b) - base) < 1e-9
    assert 0.0 <= base <= 1.0


def test_circular_correlation_null():
    s = RngStream(5)
    assert evaluate.circular_correlation(2 * np.pi * s.uniform(1000), 2 * np.pi * s.uniform(1000)) <= 0.15


def test_circular_correlation_errors():
    with pytest.raises(ValueError):
        evaluate.circular_correlation(np.zeros(10), np.linspace(0, 6, 10))
    with pytest.raises(ValueError):
        evaluate.circular_correlation([0.1, 0.2], [0.3, 0.4])
    with pytest.raises(ValueError):
        evaluate.circular_correlation([0.1, 0.2, 0.3], [0.3, 0.4])


def test_recovered_angle_is_atan2():
    c = np.array([[1.0, 0.0], [0.0, 2.0], [-1.0, -1.0]])
    np.testing.assert_allclose(evaluate.recovered_angle(c), [0.0, math.pi / 2, -3 * math.pi / 4])


def test_report_dict_fields():
    rep = evaluate.accuracy_from_scores([0.5], [0.9])
    d = rep.to_dict()
    assert set(d) == {"accuracy", "n_test_pos", "n_test_neg", "mean_pos_score",
                      "mean_neg_score", "invariance_summary", "recovery"}
