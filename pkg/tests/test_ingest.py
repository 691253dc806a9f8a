import numpy as np
import pytest

from cimon import ingest
from cimon.errors import (
    DegenerateAugmentation,
    MalformedHeader,
    NonFiniteValue,
    ShapeMismatch,
    ZeroRow,
)


def _pair(n=4, d=3, seed=0):
    rng = np.random.default_rng(seed)
    v1 = rng.normal(size=(n, d)).astype(np.float32)
    v2 = rng.normal(size=(n, d)).astype(np.float32)
    return ingest.FeatureViewPair(v1, v2, np.arange(n, dtype=np.uint64))


class TestFeatureFile:
    def test_round_trip_two_views_bitwise(self, tmp_path):
        pair = _pair(7, 5)
        path = tmp_path / "f.cimf"
        ingest.write_feature_views(path, pair.view1, pair.view2, pair.ids)
        back = ingest.load_feature_views(path)
        assert back.view1.tobytes() == pair.view1.tobytes()
        assert back.view2.tobytes() == pair.view2.tobytes()
        assert back.ids.tobytes() == pair.ids.tobytes()

    def test_small_valid_file(self, tmp_path):
        v = np.array([[1, 2, 3], [4, 5, 6]], dtype=np.float32)
        path = tmp_path / "f.cimf"
        ingest.write_feature_views(path, v, v + 1)
        back = ingest.load_feature_views(path)
        assert back.n == 2 and back.d == 3

    def test_single_view_file_duplicates(self, tmp_path):
        v = np.array([[1.0, 0.0], [0.0, 2.0], [3.0, 3.0]], dtype=np.float32)
        path = tmp_path / "base.cimf"
        ingest.write_feature_views(path, v)
        back = ingest.load_feature_views(path)
        assert np.array_equal(back.view1, back.view2)
        assert back.view1.tobytes() == v.tobytes()

    def test_truncated_second_view(self, tmp_path):
        pair = _pair(4, 3)
        path = tmp_path / "f.cimf"
        ingest.write_feature_views(path, pair.view1, pair.view2, pair.ids)
        data = path.read_bytes()
        # drop one row's worth of view2 floats
        path.write_bytes(data[: len(data) - 3 * 4])
        with pytest.raises(ShapeMismatch):
            ingest.load_feature_views(path)

    def test_nan_row_names_index(self, tmp_path):
        pair = _pair(8, 3)
        pair.view1[5, 1] = np.nan
        path = tmp_path / "f.cimf"
        with pytest.raises(NonFiniteValue) as exc:
            ingest.write_feature_views(path, pair.view1, pair.view2, pair.ids)
        assert exc.value.row == 5
        # and through the loader, bypassing the writer's validation
        pair2 = _pair(8, 3)
        ingest.write_feature_views(path, pair2.view1, pair2.view2, pair2.ids)
        raw = bytearray(path.read_bytes())
        header = 4 + 4 + 8 + 8 + 4
        nan = np.array([np.nan], dtype="<f4").tobytes()
        off = header + (5 * 3 + 1) * 4
        raw[off : off + 4] = nan
        path.write_bytes(bytes(raw))
        with pytest.raises(NonFiniteValue) as exc:
            ingest.load_feature_views(path)
        assert exc.value.row == 5 and exc.value.view == 1

    def test_zero_row_rejected(self, tmp_path):
        pair = _pair(4, 3)
        pair.view2[2, :] = 0
        with pytest.raises(ZeroRow) as exc:
            ingest.write_feature_views(tmp_path / "f.cimf", pair.view1,
                                       pair.view2, pair.ids)
        assert exc.value.row == 2

    def test_bad_magic_version_viewcount(self, tmp_path):
        pair = _pair()
        path = tmp_path / "f.cimf"
        ingest.write_feature_views(path, pair.view1, pair.view2, pair.ids)
        good = path.read_bytes()
        path.write_bytes(b"XIMF" + good[4:])
        with pytest.raises(MalformedHeader):
            ingest.load_feature_views(path)
        path.write_bytes(good[:4] + b"\x09\x00\x00\x00" + good[8:])
        with pytest.raises(MalformedHeader):
            ingest.load_feature_views(path)
        path.write_bytes(good[:24] + b"\x05\x00\x00\x00" + good[28:])
        with pytest.raises(MalformedHeader):
            ingest.load_feature_views(path)

    def test_duplicate_ids_rejected(self, tmp_path):
        pair = _pair(4, 3)
        ids = np.array([0, 1, 1, 3], dtype=np.uint64)
        with pytest.raises(MalformedHeader):
            ingest.write_feature_views(tmp_path / "f.cimf", pair.view1,
                                       pair.view2, ids)


class TestLabelFile:
    def test_round_trip(self, tmp_path):
        labels = ingest.LabelVector(
            (frozenset({0}), frozenset({1, 3}), frozenset({2, 0, 7}))
        )
        path = tmp_path / "l.ciml"
        ingest.write_labels(path, labels)
        back = ingest.load_labels(path)
        assert back.labels == labels.labels
        # writer-reader-writer is bitwise stable
        ingest.write_labels(tmp_path / "l2.ciml", back)
        assert path.read_bytes() == (tmp_path / "l2.ciml").read_bytes()

    def test_empty_set_rejected(self, tmp_path):
        with pytest.raises(MalformedHeader):
            ingest.write_labels(tmp_path / "l.ciml",
                                ingest.LabelVector((frozenset({1}), frozenset())))

    def test_truncated(self, tmp_path):
        labels = ingest.LabelVector((frozenset({0}), frozenset({1})))
        path = tmp_path / "l.ciml"
        ingest.write_labels(path, labels)
        path.write_bytes(path.read_bytes()[:-2])
        with pytest.raises(ShapeMismatch):
            ingest.load_labels(path)

    def test_indicator(self):
        labels = ingest.LabelVector((frozenset({0, 2}), frozenset({1})))
        mat = labels.indicator()
        assert mat.tolist() == [[1, 0, 1], [0, 1, 0]]


class TestAugment:
    def test_identity_augmentation(self):
        base = np.random.default_rng(1).normal(size=(5, 4)).astype(np.float32)
        pair = ingest.augment_features(base, ingest.AugmentConfig(0.0, 0.0, 9))
        assert pair.view1.tobytes() == base.tobytes()
        assert pair.view2.tobytes() == base.tobytes()

    def test_deterministic(self):
        base = np.random.default_rng(2).normal(size=(6, 5)).astype(np.float32)
        cfg = ingest.AugmentConfig(0.3, 0.2, 42)
        a = ingest.augment_features(base, cfg)
        b = ingest.augment_features(base, cfg)
        assert a.view1.tobytes() == b.view1.tobytes()
        assert a.view2.tobytes() == b.view2.tobytes()
        assert not np.array_equal(a.view1, a.view2)

    def test_mean_absolute_perturbation(self):
        # E|N(0, 0.1)| = 0.1 * sqrt(2/pi) ~= 0.0798 over the 32 entries
        base = np.ones((4, 8), dtype=np.float32)
        pair = ingest.augment_features(base, ingest.AugmentConfig(0.1, 0.0, 7))
        for view in (pair.view1, pair.view2):
            mean_abs = np.abs(view.astype(np.float64) - base).mean()
            assert 0.05 <= mean_abs <= 0.11

    def test_dropout_fraction(self):
        base = np.ones((50, 40), dtype=np.float32)
        pair = ingest.augment_features(base, ingest.AugmentConfig(0.0, 0.25, 3))
        frac = (pair.view1 == 0).mean()
        assert 0.2 <= frac <= 0.3

    def test_degenerate_augmentation_raises(self):
        # d=1 with heavy dropout: some seed in range must exhaust the retries
        base = np.ones((3, 1), dtype=np.float32)
        hit = False
        for seed in range(200):
            try:
                ingest.augment_features(base, ingest.AugmentConfig(0.0, 0.99, seed))
            except DegenerateAugmentation as exc:
                assert 0 <= exc.row < 3
                hit = True
                break
        assert hit

    def test_bad_config(self):
        base = np.ones((3, 2), dtype=np.float32)
        with pytest.raises(ValueError):
            ingest.augment_features(base, ingest.AugmentConfig(-0.1, 0.0, 0))
        with pytest.raises(ValueError):
            ingest.augment_features(base, ingest.AugmentConfig(0.0, 1.0, 0))

    def test_perturb_identity(self):
        base = np.random.default_rng(5).normal(size=(4, 3)).astype(np.float32)
        out = ingest.perturb_features(base, ingest.AugmentConfig(0.0, 0.0, 1))
        assert out.tobytes() == base.tobytes()


class TestSynthetic:
    def test_counts_and_balance(self):
        pair, labels = ingest.make_synthetic(4, 100, 32, 10.0, seed=5)
        assert pair.n == 400 and pair.d == 32
        counts = {}
        for s in labels.labels:
            (lab,) = s
            counts[lab] = counts.get(lab, 0) + 1
        assert counts == {0: 100, 1: 100, 2: 100, 3: 100}
        ingest.validate_pair(pair)

    def test_deterministic(self):
        a, _ = ingest.make_synthetic(3, 10, 8, 4.0, seed=11)
        b, _ = ingest.make_synthetic(3, 10, 8, 4.0, seed=11)
        assert a.view1.tobytes() == b.view1.tobytes()

    def test_separation_scales_centers(self):
        pair, labels = ingest.make_synthetic(2, 50, 16, 20.0, seed=3)
        arr = pair.view1.astype(np.float64)
        lab = np.array([next(iter(s)) for s in labels.labels])
        c0 = arr[lab == 0].mean(axis=0)
        c1 = arr[lab == 1].mean(axis=0)
        assert abs(np.linalg.norm(c0) - 20.0) < 1.0
        assert abs(np.linalg.norm(c1) - 20.0) < 1.0

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            ingest.make_synthetic(1, 10, 4, 1.0)
        with pytest.raises(ValueError):
            ingest.make_synthetic(2, 1, 4, 1.0)
