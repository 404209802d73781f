import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from armload.dataset import (LabeledDataset, ingest, load_csv, save_csv, sort_labels, split,
                             split_indices, stripe_period, synth_fixture, train_count)
from armload.errors import InvalidInputError, ParseError
from armload.imaging import ImageBuffer, write_image


def tiny_png(path, value=0):
    path.parent.mkdir(parents=True, exist_ok=True)
    write_image(path, ImageBuffer(np.full((4, 4, 3), value, dtype=np.uint8)))


class TestIngest:
    def test_counts_and_alphabet(self, tmp_path):
        for label, n in (("0", 30), ("5", 33), ("6", 29)):
            for i in range(n):
                tiny_png(tmp_path / label / f"{i:02d}.png")
        items = ingest(tmp_path)
        assert len(items) == 92
        assert sort_labels(lab for _, lab in items) == ("0", "5", "6")
        assert items == sorted(items, key=lambda t: (t[1], t[0].name))

    def test_skips_unreadable(self, tmp_path, caplog):
        tiny_png(tmp_path / "a" / "ok.png")
        (tmp_path / "a" / "bad.png").write_bytes(b"\x89PNG\r\n\x1a\ngarbage")
        with caplog.at_level(logging.WARNING):
            items = ingest(tmp_path)
        assert [p.name for p, _ in items] == ["ok.png"]
        assert "bad.png" in caplog.text

    def test_ignores_other_files(self, tmp_path):
        tiny_png(tmp_path / "a" / "x.png")
        tiny_png(tmp_path / "a" / "x.mask.png")
        (tmp_path / "a" / "notes.txt").write_text("hi")
        tiny_png(tmp_path / "a" / "nested" / "deep.png")
        assert [p.name for p, _ in ingest(tmp_path)] == ["x.png"]

    def test_empty_class_warns(self, tmp_path, caplog):
        tiny_png(tmp_path / "a" / "x.png")
        (tmp_path / "b").mkdir()
        with caplog.at_level(logging.WARNING):
            assert len(ingest(tmp_path)) == 1
        assert "no images" in caplog.text

    def test_nothing_usable(self, tmp_path):
        (tmp_path / "a").mkdir()
        with pytest.raises(InvalidInputError):
            ingest(tmp_path)


class TestLabels:
    def test_numeric_labels_sort_by_value(self):
        assert sort_labels(["10", "2", "b", "0", "a", "2.25"]) == ("0", "2", "2.25", "10", "a", "b")


class TestSplit:
    @pytest.mark.parametrize("n, frac, train", [(92, 0.7, 64), (2, 0.5, 1), (10, 0.7, 7), (30, 0.3, 9)])
    def test_sizes(self, n, frac, train):
        tr, te = split_indices(n, frac, seed=0)
        assert (len(tr), len(te)) == (train, n - train) and train_count(n, frac) == train

    @settings(max_examples=50, deadline=None)
    @given(st.integers(2, 300), st.floats(0.05, 0.95), st.integers(0, 2 ** 31))
    def test_disjoint_and_exhaustive(self, n, frac, seed):
        if train_count(n, frac) in (0, n):
            with pytest.raises(InvalidInputError):
                split_indices(n, frac, seed)
            return
        tr, te = split_indices(n, frac, seed)
        assert np.array_equal(np.sort(np.concatenate([tr, te])), np.arange(n))

    def test_same_seed_same_partition(self):
        a = split_indices(92, 0.7, seed=5)
        b = split_indices(92, 0.7, seed=5)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))
        assert not np.array_equal(a[0], split_indices(92, 0.7, seed=6)[0])

    @pytest.mark.parametrize("frac", [0.0, 1.0, -0.1])
    def test_bad_fraction(self, frac):
        with pytest.raises(InvalidInputError):
            split_indices(10, frac)

    def test_class_counts_preserved(self, rng):
        labels = tuple(rng.choice(["0", "5", "6"], 92))
        ds = LabeledDataset(rng.normal(size=(92, 3)), labels)
        tr, te = split(ds, 0.7, seed=1)
        both = {k: tr.class_counts()[k] + te.class_counts()[k] for k in ds.alphabet}
        assert both == ds.class_counts()

    def test_stratified(self, rng):
        labels = ("a",) * 30 + ("b",) * 60
        ds = LabeledDataset(np.zeros((90, 1)), labels)
        tr, _ = split(ds, 0.7, seed=2, stratified=True)
        assert tr.class_counts() == {"a": 21, "b": 42}


class TestCsv:
    @settings(max_examples=30, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 5)),
                  elements=st.floats(allow_nan=False, allow_infinity=False)))
    def test_round_trip_bit_exact(self, tmp_path_factory, X):
        path = tmp_path_factory.mktemp("csv") / "d.csv"
        ds = LabeledDataset(X, tuple(str(i % 3) for i in range(X.shape[0])))
        save_csv(ds, path)
        back = load_csv(path)
        assert back.labels == ds.labels
        assert np.array_equal(back.features.view(np.int64), X.view(np.int64))

    def test_header(self, tmp_path):
        save_csv(LabeledDataset(np.zeros((1, 3)), ("x",)), tmp_path / "d.csv")
        assert (tmp_path / "d.csv").read_text().splitlines()[0] == "label,f0,f1,f2"

    def test_wrong_arity_names_line(self, tmp_path):
        (tmp_path / "d.csv").write_text("label,f0,f1\na,1,2\nb,3\n")
        with pytest.raises(ParseError, match="line 3"):
            load_csv(tmp_path / "d.csv")

    def test_bad_number(self, tmp_path):
        (tmp_path / "d.csv").write_text("label,f0\na,abc\n")
        with pytest.raises(ParseError, match="line 2"):
            load_csv(tmp_path / "d.csv")

    def test_empty_file(self, tmp_path):
        (tmp_path / "d.csv").write_text("")
        with pytest.raises(ParseError):
            load_csv(tmp_path / "d.csv")


class TestFixtures:
    def test_stripe_periods(self):
        assert [stripe_period(k) for k in range(3)] == [2, 5, 9]

    @pytest.mark.parametrize("kind", ["texture", "color", "shape", "blob"])
    def test_deterministic(self, kind):
        a, la = synth_fixture(2, 2, kind, seed=3, size=64)
        b, lb = synth_fixture(2, 2, kind, seed=3, size=64)
        assert la == lb == ["0", "0", "1", "1"]
        assert all(np.array_equal(x.pixels, y.pixels) for x, y in zip(a, b))
        assert a[0].channels == 3 and a[0].width == 64

    def test_seed_changes_images(self):
        a, _ = synth_fixture(2, 1, "texture", seed=1, size=64)
        b, _ = synth_fixture(2, 1, "texture", seed=2, size=64)
        assert not np.array_equal(a[0].pixels, b[0].pixels)

    def test_one_class_rejected(self):
        with pytest.raises(InvalidInputError):
            synth_fixture(1, 5, "texture")

    def test_unknown_kind(self):
        with pytest.raises(InvalidInputError):
            synth_fixture(2, 1, "plaid")
