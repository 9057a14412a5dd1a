import numpy as np
import pytest

from frameseek import (BinaryCenters, GMMModel, binarize, build_global_index,
                       fisher_vector, gmm_train, make_signature)
from frameseek.bits import hamming_to_many, pack_bits, unpack_bits


def naive_fisher(features, gmm):
    """Two-loop reference: per-sample responsibilities from raw densities."""
    n, d = features.shape
    k = gmm.n_components
    out = np.zeros(k * d)
    for i in range(n):
        probs = np.empty(k)
        for j in range(k):
            var = gmm.variances[j]
            norm = np.prod(1.0 / np.sqrt(2 * np.pi * var))
            probs[j] = gmm.weights[j] * norm * np.exp(
                -0.5 * np.sum((features[i] - gmm.means[j]) ** 2 / var))
        gamma = probs / probs.sum()
        for j in range(k):
            out[j * d:(j + 1) * d] += gamma[j] * (features[i] - gmm.means[j]) / np.sqrt(gmm.variances[j])
    for j in range(k):
        out[j * d:(j + 1) * d] /= n * np.sqrt(gmm.weights[j])
    return out


@pytest.fixture(scope="module")
def toy_gmm():
    gen = np.random.default_rng(90)
    samples = np.vstack([gen.normal(-2, 1, size=(150, 6)),
                         gen.normal(2, 1, size=(150, 6)),
                         gen.normal((4, -4, 0, 1, -1, 2), 0.8, size=(150, 6))])
    return gmm_train(samples, 3, iters=25, seed=90)


# --- fisher vector ----------------------------------------------------------

def test_fisher_centered_data_gives_zero():
    model = GMMModel(weights=[1.0], means=[[1.0, -2.0, 0.5]],
                     variances=[[0.5, 1.0, 2.0]])
    features = np.tile([1.0, -2.0, 0.5], (7, 1))
    np.testing.assert_allclose(fisher_vector(features, model), np.zeros(3), atol=1e-12)


def test_fisher_single_feature_closed_form():
    model = GMMModel(weights=[1.0], means=[[0.5, 1.5]], variances=[[4.0, 0.25]])
    x = np.array([2.5, 1.0])
    expected = (x - [0.5, 1.5]) / np.sqrt([4.0, 0.25])  # gamma=1, n=1, w=1
    np.testing.assert_allclose(fisher_vector(x[None, :], model), expected, atol=1e-12)


def test_fisher_matches_naive_loop(toy_gmm):
    gen = np.random.default_rng(91)
    for _ in range(10):
        features = gen.normal(0, 2, size=(int(gen.integers(1, 30)), 6))
        fast = fisher_vector(features, toy_gmm)
        slow = naive_fisher(features, toy_gmm)
        np.testing.assert_allclose(fast, slow, atol=1e-6, rtol=1e-6)


def test_fisher_permutation_invariant(toy_gmm):
    gen = np.random.default_rng(92)
    features = gen.normal(size=(25, 6))
    base = fisher_vector(features, toy_gmm)
    for _ in range(5):
        perm = gen.permutation(25)
        np.testing.assert_allclose(fisher_vector(features[perm], toy_gmm), base, atol=1e-9)


def test_fisher_empty_frame_errors(toy_gmm):
    with pytest.raises(ValueError, match="empty frame"):
        fisher_vector(np.empty((0, 6)), toy_gmm)


def test_fisher_dimension_mismatch(toy_gmm):
    with pytest.raises(ValueError, match="dimension"):
        fisher_vector(np.zeros((3, 4)), toy_gmm)


# --- binarization ------------------------------------------------------------

def test_binarize_zero_vector_all_zero_bits():
    np.testing.assert_array_equal(binarize(np.zeros(8)), np.zeros(8, dtype=np.uint8))


def test_binarize_sign_pattern():
    np.testing.assert_array_equal(binarize(np.array([-1.0, 2.0, 0.0, 3.0])),
                                  [0, 1, 0, 1])


def test_binarize_matches_elementwise_oracle():
    gen = np.random.default_rng(93)
    for _ in range(20):
        v = gen.normal(size=50)
        v[gen.integers(0, 50, size=5)] = 0.0
        expected = np.array([1 if x > 0 else 0 for x in v], dtype=np.uint8)
        np.testing.assert_array_equal(binarize(v), expected)


def test_binarize_invariant_under_positive_scaling():
    gen = np.random.default_rng(94)
    v = gen.normal(size=100)
    base = binarize(v)
    for alpha in (0.1, 0.5, 2.0, 10.0):
        np.testing.assert_array_equal(binarize(alpha * v), base)


# --- index construction ----------------------------------------------------------

def make_centers(gen, k=16, n_bits=64):
    bits = gen.integers(0, 2, size=(k, n_bits)).astype(np.uint8)
    return BinaryCenters(centers=pack_bits(bits), n_bits=n_bits)


def sig(frame, video, bits):
    from frameseek.global_index import GlobalSignature
    return GlobalSignature(frame_id=frame, video_id=video,
                           bits=pack_bits(np.asarray(bits, dtype=np.uint8)),
                           n_bits=len(bits))


def test_signature_equal_to_center_lands_there():
    gen = np.random.default_rng(95)
    centers = make_centers(gen)
    bits = unpack_bits(centers.centers[12], 64)
    index = build_global_index([sig(0, 0, bits)], centers)
    assert index.clusters[12]["frame"].tolist() == [0]


def test_single_signature_single_center():
    gen = np.random.default_rng(96)
    bits = gen.integers(0, 2, size=32).astype(np.uint8)
    centers = BinaryCenters(centers=pack_bits(bits[None, :]), n_bits=32)
    index = build_global_index([sig(5, 2, bits ^ 1)], centers)
    assert index.clusters[0]["frame"].tolist() == [5]


def test_assignments_match_exhaustive_argmin():
    gen = np.random.default_rng(97)
    centers = make_centers(gen)
    sigs = [sig(i, i % 4, gen.integers(0, 2, size=64)) for i in range(80)]
    index = build_global_index(sigs, centers)
    for s in sigs:
        dists = hamming_to_many(s.bits, centers.centers)
        assert s.cluster == int(np.argmin(dists))
        assert s.frame_id in index.clusters[s.cluster]["frame"]


def test_bit_length_mismatch_rejected():
    gen = np.random.default_rng(98)
    centers = make_centers(gen, n_bits=64)
    bad = [sig(0, 0, gen.integers(0, 2, size=64)), sig(1, 0, gen.integers(0, 2, size=32))]
    with pytest.raises(ValueError, match="bit-length mismatch"):
        build_global_index(bad, centers)


def test_cluster_lists_sorted_by_frame():
    gen = np.random.default_rng(99)
    centers = make_centers(gen, k=2, n_bits=32)
    sigs = [sig(f, 0, gen.integers(0, 2, size=32)) for f in (9, 3, 7, 1, 5)]
    index = build_global_index(sigs, centers)
    for cluster in index.clusters:
        assert np.all(np.diff(cluster["frame"].astype(np.int64)) >= 0)


def test_make_signature_bit_width(toy_gmm):
    gen = np.random.default_rng(100)
    s = make_signature(1, 2, fisher_vector(gen.normal(size=(10, 6)), toy_gmm))
    assert s.n_bits == 3 * 6  # components x dims
    assert s.bits.shape[0] == (s.n_bits + 7) // 8
