import json
import math

import numpy as np
import pytest

from armload.dataset import LabeledDataset
from armload.errors import InvalidInputError, ParseError
from armload.svm import (SvmModel, apply_scaling, dual_objective, fit_scaling, predict,
                         predict_many, rbf_kernel, rbf_matrix, smo, train_binary, train_multiclass)

from oracles import exhaustive_dual


def blobs(rng, centers, n=20, spread=0.4):
    X = np.vstack([rng.normal(c, spread, size=(n, len(c))) for c in centers])
    labels = tuple(str(i) for i in range(len(centers)) for _ in range(n))
    return LabeledDataset(X, labels)


class TestKernel:
    def test_identity(self):
        assert rbf_kernel([1.0, 2.0], [1.0, 2.0], 0.5) == 1.0

    def test_default_gamma_value(self):
        a = np.zeros(1000)
        b = np.ones(1000)
        assert rbf_kernel(a, b, 0.0018) == pytest.approx(math.exp(-1.8))
        assert rbf_kernel(a, b, 0.0018) == pytest.approx(0.16530, abs=1e-5)

    def test_monotone_in_distance(self):
        vals = [rbf_kernel([0.0], [d], 0.3) for d in (0.0, 0.5, 1.0, 3.0, 30.0)]
        assert vals == sorted(vals, reverse=True) and vals[-1] < 1e-100

    def test_matrix_matches_scalar(self, rng):
        A, B = rng.normal(size=(4, 3)), rng.normal(size=(5, 3))
        K = rbf_matrix(A, B, 0.7)
        assert K[2, 3] == pytest.approx(rbf_kernel(A[2], B[3], 0.7), rel=1e-12)


class TestScaling:
    def test_constant_dimension(self):
        ds = LabeledDataset(np.array([[1.0, 0.0], [1.0, 2.0], [1.0, 4.0]]), ("a", "b", "a"))
        out = apply_scaling(fit_scaling(ds), ds.features)
        assert (out[:, 0] == 0).all()

    def test_sample_std(self):
        ds = LabeledDataset(np.array([[0.0], [2.0]]), ("a", "b"))
        p = fit_scaling(ds)
        assert p.mean[0] == 1.0 and p.std[0] == pytest.approx(math.sqrt(2))
        out = apply_scaling(p, ds.features)[:, 0]
        assert out == pytest.approx([-1 / math.sqrt(2), 1 / math.sqrt(2)])

    def test_training_mean_zero(self, rng):
        ds = LabeledDataset(rng.normal(5, 3, size=(40, 6)), ("a",) * 40)
        out = apply_scaling(fit_scaling(ds), ds.features)
        assert np.abs(out.mean(axis=0)).max() <= 1e-12


class TestSmo:
    def test_mirror_pair(self):
        x = np.array([[0.8, -0.3]])
        alphas, b = train_binary(x, -x, gamma=0.5, C=1.0)
        assert alphas[0] == pytest.approx(alphas[1], abs=1e-12)
        assert abs(b) <= 1e-9

    @pytest.mark.parametrize("seed", range(10))
    def test_four_points_match_exhaustive_dual(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(4, 2))
        y = np.array([1.0, 1.0, -1.0, -1.0])
        K = rbf_matrix(X, X, 0.8)
        res = smo(K, y, C=1.0)
        assert dual_objective(res.alphas, y, K) == pytest.approx(exhaustive_dual(K, y, 1.0), abs=1e-4)
        assert res.converged

    def test_constraints_hold(self, rng):
        X = rng.normal(size=(30, 3))
        y = np.where(rng.random(30) > 0.5, 1.0, -1.0)
        res = smo(rbf_matrix(X, X, 1.0), y, C=0.5)
        assert (res.alphas >= 0).all() and (res.alphas <= 0.5).all()
        assert abs(res.alphas @ y) <= 1e-6

    def test_kernel_row_callback_agrees(self, rng):
        X = rng.normal(size=(12, 2))
        y = np.where(np.arange(12) < 6, 1.0, -1.0)
        K = rbf_matrix(X, X, 0.5)
        a = smo(K, y, 1.0)
        b = smo(None, y, 1.0, kernel_row=lambda i: K[i])
        assert np.allclose(a.alphas, b.alphas) and a.bias == pytest.approx(b.bias)

    def test_separable_blobs(self, rng):
        ds = blobs(rng, [(-3.0, -3.0), (3.0, 3.0)])
        model = train_multiclass(ds, gamma=0.5, C=10.0)
        assert predict_many(model, ds.features) == list(ds.labels)

    def test_rejects_bad_params(self, rng):
        with pytest.raises(InvalidInputError):
            train_binary(np.ones((1, 2)), np.zeros((1, 2)), gamma=0.0)
        with pytest.raises(InvalidInputError):
            train_binary(np.ones((1, 2)), np.empty((0, 2)))


class TestMulticlass:
    @pytest.mark.parametrize("k", [2, 3, 5])
    def test_machine_count(self, rng, k):
        centers = [(4.0 * math.cos(2 * math.pi * i / k), 4.0 * math.sin(2 * math.pi * i / k))
                   for i in range(k)]
        model = train_multiclass(blobs(rng, centers, n=8), gamma=0.5)
        assert len(model.machines) == k * (k - 1) // 2

    def test_two_class_is_sign_of_decision(self, rng):
        ds = blobs(rng, [(-1.0, 0.0), (1.0, 0.0)], spread=1.0)
        model = train_multiclass(ds, gamma=0.5)
        d = model.decision_values(ds.features)[:, 0]
        pred = predict_many(model, ds.features)
        assert pred == [model.machines[0].positive if v > 0 else model.machines[0].negative for v in d]

    def test_training_point_recovers_label(self, rng):
        ds = blobs(rng, [(-4.0, 0.0), (4.0, 0.0), (0.0, 5.0)])
        model = train_multiclass(ds, gamma=0.5, C=10.0)
        for i in (0, 25, 47):
            assert predict(model, ds.features[i]) == ds.labels[i]

    def test_row_order_does_not_matter(self, rng):
        ds = blobs(rng, [(-2.0, 0.0), (2.0, 0.0), (0.0, 2.5)], spread=1.0)
        perm = rng.permutation(len(ds))
        test = rng.normal(0, 2, size=(30, 2))
        a = train_multiclass(ds, gamma=0.5, seed=3)
        b = train_multiclass(ds.subset(perm), gamma=0.5, seed=3)
        assert predict_many(a, test) == predict_many(b, test)

    def test_needs_two_classes(self):
        with pytest.raises(InvalidInputError):
            train_multiclass(LabeledDataset(np.zeros((3, 2)), ("a",) * 3))

    def test_dimension_checked(self, rng):
        model = train_multiclass(blobs(rng, [(0.0, 0.0), (3.0, 3.0)], n=5), gamma=0.5)
        with pytest.raises(InvalidInputError):
            model.decision_values(np.zeros((1, 3)))


class TestPersistence:
    def test_reload_predicts_identically(self, rng, tmp_path):
        ds = blobs(rng, [(-2.0, 0.0), (2.0, 0.0), (0.0, 2.5)], spread=1.0)
        model = train_multiclass(ds, gamma=0.5)
        model.save(tmp_path / "m.json")
        again = SvmModel.load(tmp_path / "m.json")
        test = rng.normal(0, 2, size=(50, 2))
        assert np.array_equal(model.decision_values(test), again.decision_values(test))
        assert predict_many(model, test) == predict_many(again, test)

    def test_unscaled_model(self, rng, tmp_path):
        ds = blobs(rng, [(-2.0, 0.0), (2.0, 0.0)])
        model = train_multiclass(ds, gamma=0.5, scale=False)
        model.save(tmp_path / "m.json")
        assert SvmModel.load(tmp_path / "m.json").scaling is None

    def test_wrong_format(self, tmp_path):
        (tmp_path / "m.json").write_text(json.dumps({"format": "other"}))
        with pytest.raises(ParseError):
            SvmModel.load(tmp_path / "m.json")

    def test_broken_json_names_line(self, tmp_path):
        (tmp_path / "m.json").write_text('{\n"format": \n')
        with pytest.raises(ParseError, match="line"):
            SvmModel.load(tmp_path / "m.json")
