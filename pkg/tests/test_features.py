import math

import numpy as np
import pytest

from fallsift.core import Label
from fallsift.errors import ConfigurationError, StateError
from fallsift.features import (
    FeaturePipeline,
    FeatureScaler,
    FeatureVariant,
    basic_stats_features,
    cosine,
    dtw,
    dtw_normalized,
    extract_features,
    feature_names,
    load_scaler,
    plcc,
    save_scaler,
    similarity_features,
)

from conftest import make_window


def dtw_by_enumeration(a, b):
    """Exhaustive minimum over all monotone warping paths (oracle)."""
    a = [float(v) for v in a]
    b = [float(v) for v in b]
    n, m = len(a), len(b)
    best = [math.inf]

    def walk(i, j, acc):
        acc = acc + abs(a[i] - b[j])
        if i == n - 1 and j == m - 1:
            best[0] = min(best[0], acc)
            return
        if i + 1 < n:
            walk(i + 1, j, acc)
        if j + 1 < m:
            walk(i, j + 1, acc)
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, acc)

    walk(0, 0, 0.0)
    return best[0]


class TestCosine:
    def test_identical_vectors(self):
        assert cosine([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine([1, 0, 0], [0, 1, 0]) == 0.0

    def test_derived_example(self):
        assert cosine([1, 2], [2, 1]) == pytest.approx(0.8)

    def test_zero_norm_is_degenerate_zero(self):
        value, degenerate = cosine([0, 0, 0], [1, 2, 3], return_degenerate=True)
        assert value == 0.0 and degenerate

    def test_scale_invariance(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            a = rng.normal(size=6)
            b = rng.normal(size=6)
            k = rng.uniform(0.01, 100.0)
            assert abs(cosine(k * a, b) - cosine(a, b)) < 1e-9

    def test_length_mismatch_rejected(self):
        with pytest.raises(ConfigurationError):
            cosine([1, 2], [1, 2, 3])


class TestPlcc:
    def test_exact_positive_linearity(self):
        assert plcc([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)

    def test_exact_negative_linearity(self):
        assert plcc([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)

    def test_derived_example(self):
        assert plcc([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)

    def test_constant_sequence_is_degenerate_zero(self):
        value, degenerate = plcc([5, 5, 5], [1, 2, 3], return_degenerate=True)
        assert value == 0.0 and degenerate

    def test_affine_invariance_with_sign(self):
        rng = np.random.default_rng(12)
        for _ in range(200):
            a = rng.normal(size=8)
            b = rng.normal(size=8)
            alpha = rng.uniform(-5, 5)
            if abs(alpha) < 1e-3:
                continue
            beta = rng.uniform(-10, 10)
            assert abs(plcc(a, alpha * b + beta) - math.copysign(1, alpha) * plcc(a, b)) < 1e-9


class TestDtw:
    def test_self_distance_zero(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            s = rng.normal(size=rng.integers(1, 12))
            assert dtw(s, s) == 0.0

    def test_derived_example(self):
        assert dtw([0, 1, 2], [0, 2]) == pytest.approx(1.0)

    def test_empty_input_rejected(self):
        with pytest.raises(ConfigurationError):
            dtw([], [1, 2])

    def test_symmetry(self):
        rng = np.random.default_rng(14)
        for _ in range(100):
            a = rng.normal(size=rng.integers(1, 10))
            b = rng.normal(size=rng.integers(1, 10))
            assert dtw(a, b) == pytest.approx(dtw(b, a), abs=1e-12)

    def test_matches_enumeration_oracle(self):
        rng = np.random.default_rng(15)
        for _ in range(200):
            a = rng.normal(size=int(rng.integers(1, 7)))
            b = rng.normal(size=int(rng.integers(1, 7)))
            assert dtw(a, b) == dtw_by_enumeration(a, b)

    def test_normalized_scaling(self):
        a = np.array([0.0, 1.0, 2.0])
        b = np.array([0.0, 2.0])
        assert dtw_normalized(a, b) == pytest.approx(dtw(a, b) / 5.0)


class TestExtractFeatures:
    def test_identical_axes_similarity_vector(self, window_factory):
        base = np.random.default_rng(5).normal(size=16)
        w = window_factory(xyz=np.column_stack([base, base, base]))
        vec = similarity_features(w)
        assert np.allclose(vec[:6], 1.0)
        assert np.allclose(vec[6:], 0.0)

    def test_basic_stats_constant_window(self, window_factory):
        w = window_factory(xyz=np.full((10, 3), 2.5))
        assert np.allclose(basic_stats_features(w), [2.5, 2.5, 2.5, 0.0] * 3)

    def test_metric_composition_matches_per_metric_oracles(self, window_factory):
        w = window_factory(seed=17, n=12)
        x, y, z = (w.axis(i) for i in range(3))
        vec = extract_features(w, FeatureVariant.SIMILARITY)
        expected = [
            cosine(x, y), cosine(x, z), cosine(y, z),
            plcc(x, y), plcc(x, z), plcc(y, z),
            dtw(x, y) / 24, dtw(x, z) / 24, dtw(y, z) / 24,
        ]
        assert np.allclose(vec, expected, rtol=0, atol=0)

    def test_raw_variant_shape_and_order(self, window_factory):
        w = window_factory(seed=8, n=6)
        vec = extract_features(w, FeatureVariant.RAW)
        assert vec.shape == (18,)
        assert np.array_equal(vec[:6], w.axis(0))
        assert np.array_equal(vec[12:], w.axis(2))

    def test_feature_names_match_dims(self):
        assert len(feature_names(FeatureVariant.SIMILARITY, 128)) == 9
        assert len(feature_names(FeatureVariant.BASIC_STATS, 128)) == 12
        assert len(feature_names(FeatureVariant.RAW, 128)) == 384

    def test_extraction_is_deterministic(self, window_factory):
        w = window_factory(seed=9, n=20)
        assert np.array_equal(
            extract_features(w, FeatureVariant.SIMILARITY),
            extract_features(w, FeatureVariant.SIMILARITY),
        )


class TestPipeline:
    def _windows(self, k=12):
        return [make_window(seed=i, n=16, t0_ms=i, label=Label.ADL) for i in range(k)]

    def test_transform_before_fit_is_state_error(self):
        pipe = FeaturePipeline([FeatureVariant.SIMILARITY])
        with pytest.raises(StateError):
            pipe.transform(self._windows(2))

    def test_zscore_statistics(self):
        windows = self._windows()
        pipe = FeaturePipeline([FeatureVariant.BASIC_STATS]).fit(windows)
        out = pipe.transform(windows)
        assert np.allclose(out.mean(axis=0), 0.0, atol=1e-12)
        live = pipe.scaler.std > 1e-12
        assert np.allclose(out.std(axis=0)[live], 1.0, atol=1e-9)

    def test_combined_variants_concatenate(self):
        windows = self._windows()
        pipe = FeaturePipeline([FeatureVariant.SIMILARITY, FeatureVariant.BASIC_STATS]).fit(windows)
        assert pipe.transform(windows).shape == (len(windows), 21)
        assert pipe.dim(16) == 21

    def test_cache_shared_across_pipelines(self):
        windows = self._windows()
        cache = {}
        FeaturePipeline([FeatureVariant.SIMILARITY], cache=cache).fit(windows)
        before = len(cache)
        FeaturePipeline([FeatureVariant.SIMILARITY], cache=cache).fit(windows)
        assert len(cache) == before == len(windows)

    def test_scaler_round_trip(self, tmp_path):
        windows = self._windows()
        pipe = FeaturePipeline([FeatureVariant.SIMILARITY]).fit(windows)
        path = tmp_path / "scaler.json"
        save_scaler(pipe.scaler, path)
        loaded = load_scaler(path)
        assert np.array_equal(loaded.mean, pipe.scaler.mean)
        assert np.array_equal(loaded.std, pipe.scaler.std)

    def test_constant_feature_passes_through(self):
        windows = [make_window(xyz=np.full((8, 3), 1.0), t0_ms=i) for i in range(4)]
        pipe = FeaturePipeline([FeatureVariant.BASIC_STATS]).fit(windows)
        out = pipe.transform(windows)
        assert np.all(np.isfinite(out))
