"""Shrinkage discriminant: closed-form directions, scores, Fisher criterion."""
import math

import numpy as np
import pytest

from p300loop import lda


def _paired_cloud(mean, deltas):
    """Points mean +/- each delta: class scatter is sum of 2 d d^T terms."""
    mean = np.asarray(mean, dtype=float)
    out = []
    for d in deltas:
        d = np.asarray(d, dtype=float)
        out.append(mean + d)
        out.append(mean - d)
    return np.array(out)


def _identity_scatter_data():
    """Pooled within-class scatter exactly the 2x2 identity.

    Four points per class at mean +/- (sqrt(1.5), 0) and +/- (0, sqrt(1.5)):
    each class contributes diag(3, 3), and the pooled divisor is n - 2 = 6.
    """
    a = math.sqrt(1.5)
    pos = _paired_cloud([1.0, 0.0], [(a, 0.0), (0.0, a)])
    neg = _paired_cloud([-1.0, 0.0], [(a, 0.0), (0.0, a)])
    vectors = np.vstack([pos, neg])
    labels = np.array([True] * 4 + [False] * 4)
    return vectors, labels


class TestLdaModel:
    def test_weight_vector_validated(self):
        with pytest.raises(ValueError):
            lda.LdaModel(w=np.zeros(3), b=0.0)
        with pytest.raises(ValueError):
            lda.LdaModel(w=np.zeros((2, 2)), b=0.0)
        with pytest.raises(ValueError):
            lda.LdaModel(w=np.array([np.inf, 1.0]), b=0.0)

    def test_weights_read_only(self):
        model = lda.LdaModel(w=np.array([1.0, 0.0]), b=0.0)
        with pytest.raises(ValueError):
            model.w[0] = 2.0


class TestTrain:
    def test_identity_scatter_direction_is_exact(self):
        vectors, labels = _identity_scatter_data()
        model = lda.train(vectors, labels)
        # separation along the first axis only; no float residue on the second
        assert model.w[0] == 1.0
        assert model.w[1] == 0.0
        assert model.b == 0.0

    def test_identity_case_insensitive_to_shrinkage(self):
        # scatter proportional to I is a fixed point of the shrinkage blend
        vectors, labels = _identity_scatter_data()
        for lam in (0.0, 0.3, 1.0):
            model = lda.train(vectors, labels, shrinkage=lam)
            assert abs(model.w[0] - 1.0) < 1e-15
            assert abs(model.w[1]) < 1e-15

    def test_anisotropic_direction_vs_hand_solution(self):
        # within-class scatter diag(1, 4) and mean gap (2, 2): the
        # discriminant trades off to direction (1, 0.25)
        a = math.sqrt(1.5)
        pos = _paired_cloud([1.0, 1.0], [(a, 0.0), (0.0, 2 * a)])
        neg = _paired_cloud([-1.0, -1.0], [(a, 0.0), (0.0, 2 * a)])
        vectors = np.vstack([pos, neg])
        labels = np.array([True] * 4 + [False] * 4)
        model = lda.train(vectors, labels, shrinkage=0.0)
        want = np.array([1.0, 0.25]) / np.linalg.norm([1.0, 0.25])
        angle = math.acos(min(1.0, abs(float(model.w @ want))))
        assert angle <= 1e-9

    def test_direction_matches_direct_solve_on_random_data(self):
        rng = np.random.default_rng(12)
        d = 6
        pos = rng.normal(size=(40, d)) @ rng.normal(size=(d, d)) + 1.0
        neg = rng.normal(size=(40, d)) @ rng.normal(size=(d, d))
        vectors = np.vstack([pos, neg])
        labels = np.array([True] * 40 + [False] * 40)
        model = lda.train(vectors, labels, shrinkage=0.0)

        m1, m2 = pos.mean(axis=0), neg.mean(axis=0)
        scatter = ((pos - m1).T @ (pos - m1) + (neg - m2).T @ (neg - m2)) / 78
        direct = np.linalg.solve(scatter, m1 - m2)
        direct = direct / np.linalg.norm(direct)
        angle = math.acos(min(1.0, abs(float(model.w @ direct))))
        assert angle <= 1e-9

    def test_full_shrinkage_reduces_to_mean_difference(self):
        rng = np.random.default_rng(13)
        pos = rng.normal(size=(30, 4)) + np.array([2.0, 0.0, 0.0, 0.0])
        neg = rng.normal(size=(30, 4))
        vectors = np.vstack([pos, neg])
        labels = np.array([True] * 30 + [False] * 30)
        model = lda.train(vectors, labels, shrinkage=1.0)
        gap = pos.mean(axis=0) - neg.mean(axis=0)
        gap = gap / np.linalg.norm(gap)
        assert abs(float(model.w @ gap)) > 1.0 - 1e-12

    def test_target_class_projects_higher(self):
        vectors, labels = _identity_scatter_data()
        model = lda.train(vectors, labels)
        assert model.mu1 > model.mu2
        assert lda.score(model, np.array([1.0, 0.0])) > 0
        assert lda.score(model, np.array([-1.0, 0.0])) < 0

    def test_unit_norm_weights(self):
        rng = np.random.default_rng(14)
        vectors = rng.normal(size=(50, 8))
        labels = rng.random(50) > 0.5
        vectors[labels] += 0.5
        model = lda.train(vectors, labels)
        assert np.linalg.norm(model.w) == pytest.approx(1.0, abs=1e-12)

    def test_accepts_dataset_objects(self, training_dataset):
        from p300loop import dsp
        scaling = dsp.minmax_fit(training_dataset.vectors)
        scaled = dsp.minmax_apply(scaling, training_dataset.vectors)
        model = lda.train(scaled, training_dataset.labels)
        assert model.w.shape == (845,)

    def test_validation(self):
        with pytest.raises(ValueError):
            lda.train(np.zeros((4, 2)), np.array([True] * 4))
        with pytest.raises(ValueError):
            lda.train(np.array([[np.nan, 0.0], [0.0, 1.0]]),
                      np.array([True, False]))
        with pytest.raises(ValueError):
            lda.train(np.zeros((4, 2)), np.array([True, True, False, False]),
                      shrinkage=1.5)
        # identical class means cannot define a direction
        with pytest.raises(ValueError):
            lda.train(np.array([[1.0, 0.0], [-1.0, 0.0],
                                [1.0, 0.0], [-1.0, 0.0]]),
                      np.array([True, True, False, False]))


class TestScore:
    def test_midpoint_scores_zero(self):
        rng = np.random.default_rng(15)
        pos = rng.normal(size=(20, 3)) + 1.0
        neg = rng.normal(size=(20, 3)) - 1.0
        model = lda.train(np.vstack([pos, neg]),
                          np.array([True] * 20 + [False] * 20))
        midpoint = (pos.mean(axis=0) + neg.mean(axis=0)) / 2.0
        assert lda.score(model, midpoint) == pytest.approx(0.0, abs=1e-12)

    def test_matrix_scoring_matches_rowwise(self):
        model = lda.LdaModel(w=np.array([0.6, 0.8]), b=-0.5)
        batch = np.array([[1.0, 1.0], [0.0, 0.0], [-2.0, 0.5]])
        scores = lda.score(model, batch)
        assert scores.shape == (3,)
        for row, s in zip(batch, scores):
            assert lda.score(model, row) == pytest.approx(s, abs=1e-15)

    def test_scalar_return_for_single_vector(self):
        model = lda.LdaModel(w=np.array([1.0]), b=2.0)
        out = lda.score(model, np.array([3.0]))
        assert isinstance(out, float)
        assert out == 5.0

    def test_dimension_checked(self):
        model = lda.LdaModel(w=np.array([1.0, 2.0]), b=0.0)
        with pytest.raises(ValueError):
            lda.score(model, np.zeros(3))

    def test_decisions_invariant_under_positive_rescaling(self):
        rng = np.random.default_rng(16)
        pos = rng.normal(size=(30, 5)) + 0.8
        neg = rng.normal(size=(30, 5))
        model = lda.train(np.vstack([pos, neg]),
                          np.array([True] * 30 + [False] * 30))
        probes = rng.normal(size=(50, 12, 5))
        for c in (1e-6, 0.5, 3.0, 1e6):
            scaled = lda.LdaModel(w=c * model.w, b=c * model.b)
            for group in probes:
                base = lda.score(model, group)
                alt = lda.score(scaled, group)
                assert int(np.argmax(alt)) == int(np.argmax(base))
                np.testing.assert_array_equal(np.sign(alt), np.sign(base))


class TestFisherCriterion:
    def test_monte_carlo_gaussian_value(self):
        # classes at -1/+1 with unit variance project to J = 4 / (1 + 1) = 2
        rng = np.random.default_rng(3)
        n = 100_000
        pos = rng.normal(loc=1.0, size=(n, 1))
        neg = rng.normal(loc=-1.0, size=(n, 1))
        model = lda.LdaModel(w=np.array([1.0]), b=0.0)
        j = lda.fisher_criterion(model, np.vstack([pos, neg]),
                                 np.array([True] * n + [False] * n))
        assert abs(j - 2.0) <= 0.2

    def test_point_classes_give_infinity(self):
        model = lda.LdaModel(w=np.array([1.0]), b=0.0)
        vectors = np.array([[0.0], [0.0], [1.0], [1.0]])
        labels = np.array([False, False, True, True])
        assert lda.fisher_criterion(model, vectors, labels) == math.inf

    def test_coincident_point_classes_give_zero(self):
        model = lda.LdaModel(w=np.array([1.0]), b=0.0)
        vectors = np.zeros((4, 1))
        labels = np.array([False, False, True, True])
        assert lda.fisher_criterion(model, vectors, labels) == 0.0

    def test_trained_direction_scores_high(self):
        rng = np.random.default_rng(11)
        pos = rng.normal(size=(300, 10))
        neg = rng.normal(size=(300, 10))
        pos[:, 0] += 1.5
        pos[:, 3] -= 0.7
        vectors = np.vstack([pos, neg])
        labels = np.array([True] * 300 + [False] * 300)
        model = lda.train(vectors, labels)
        j_trained = lda.fisher_criterion(model, vectors, labels)
        j_axis = lda.fisher_criterion(lda.LdaModel(w=np.eye(10)[1], b=0.0),
                                      vectors, labels)
        assert j_trained > 1.0
        assert j_trained > 10 * j_axis

    def test_both_classes_required(self):
        model = lda.LdaModel(w=np.array([1.0]), b=0.0)
        with pytest.raises(ValueError):
            lda.fisher_criterion(model, np.zeros((3, 1)),
                                 np.array([True, True, True]))
