"""Global descriptor channel: Fisher pooling, binarization, Hamming clusters.

A frame's PCA-reduced dense features pool into a first-order Fisher vector
(mean gradients of the GMM log-likelihood), which binarizes with a zero-bias
threshold into a B = d * D_fk bit signature. Signatures group under their
Hamming-nearest binary cluster center so queries can probe a few clusters
instead of the whole corpus.
"""

from dataclasses import dataclass, field

import numpy as np

from .bits import pack_bits, packed_length
from .codebooks import BinaryCenters, GMMModel, binary_assign_batch, gmm_posteriors


def fisher_vector(features: np.ndarray, gmm: GMMModel) -> np.ndarray:
    """First-order (mean-gradient) Fisher vector of a feature set.

    For component k: g_k = (1 / (n sqrt(w_k))) * sum_i gamma_i(k) (x_i - mu_k) / sigma_k,
    concatenated over components. No power or l2 normalization is applied;
    the sign pattern is what binarization consumes, and it is invariant under
    any positive rescaling.

    Raises:
        ValueError: empty feature set.
    """
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    n = features.shape[0]
    if n == 0:
        raise ValueError("empty frame: no features to pool")
    if features.shape[1] != gmm.d:
        raise ValueError(f"feature dimension {features.shape[1]} does not match mixture ({gmm.d})")
    gamma = gmm_posteriors(gmm, features)  # (n, k)
    sigma = np.sqrt(gmm.variances)  # (k, d)
    # sum_i gamma_i(k) x_i and sum_i gamma_i(k), vectorized over components
    weighted_sum = gamma.T @ features  # (k, d)
    totals = gamma.sum(axis=0)  # (k,)
    grads = (weighted_sum - totals[:, None] * gmm.means) / sigma
    grads /= (n * np.sqrt(gmm.weights))[:, None]
    return grads.reshape(-1)


def binarize(v: np.ndarray) -> np.ndarray:
    """Zero-bias threshold: bit i is 1 iff v[i] > 0 (exact zero gives 0)."""
    return (np.asarray(v) > 0).astype(np.uint8)


@dataclass
class GlobalSignature:
    """One frame's binary Fisher code and its Hamming cluster."""

    frame_id: int
    video_id: int
    bits: np.ndarray  # packed uint8, ceil(n_bits / 8) bytes
    n_bits: int
    cluster: int = -1

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)


@dataclass
class GlobalIndex:
    """Frozen cluster-partitioned signature store.

    Each cluster holds struct-of-arrays (frame ids, video ids, packed codes)
    sorted by frame id.
    """

    n_bits: int
    n_gmm_components: int
    centers: BinaryCenters
    clusters: list[dict[str, np.ndarray]] = field(repr=False)

    @property
    def n_signatures(self) -> int:
        return sum(c["frame"].shape[0] for c in self.clusters)

    def cluster_sizes(self) -> np.ndarray:
        return np.array([c["frame"].shape[0] for c in self.clusters], dtype=np.int64)


def make_signature(frame_id: int, video_id: int, fisher: np.ndarray) -> GlobalSignature:
    """Binarize a Fisher vector into a packed signature (cluster unassigned)."""
    bits = binarize(fisher)
    return GlobalSignature(frame_id=frame_id, video_id=video_id,
                           bits=pack_bits(bits), n_bits=bits.shape[0])


def build_global_index(signatures: list[GlobalSignature], centers: BinaryCenters,
                       n_gmm_components: int = 0) -> GlobalIndex:
    """Assign each signature to its Hamming-nearest center (ties to the
    lowest index) and freeze per-cluster lists sorted by frame id.

    Raises:
        ValueError: signatures disagree on bit length, or do not match the
            cluster centers' bit length.
    """
    if not signatures:
        raise ValueError("no signatures to index")
    n_bits = signatures[0].n_bits
    for sig in signatures:
        if sig.n_bits != n_bits:
            raise ValueError(f"bit-length mismatch: {sig.n_bits} vs {n_bits}")
    if n_bits != centers.n_bits:
        raise ValueError(f"bit-length mismatch: signatures have {n_bits}, centers have {centers.n_bits}")

    codes = np.stack([sig.bits for sig in signatures])
    assign = binary_assign_batch(centers, codes)
    for sig, cluster in zip(signatures, assign):
        sig.cluster = int(cluster)

    clusters = []
    width = packed_length(n_bits)
    for j in range(centers.k):
        members = np.flatnonzero(assign == j)
        members = members[np.argsort([signatures[i].frame_id for i in members], kind="stable")]
        clusters.append({
            "frame": np.array([signatures[i].frame_id for i in members], dtype=np.uint32),
            "video": np.array([signatures[i].video_id for i in members], dtype=np.uint32),
            "codes": (np.stack([signatures[i].bits for i in members])
                      if members.size else np.empty((0, width), dtype=np.uint8)),
        })
    return GlobalIndex(n_bits=n_bits, n_gmm_components=n_gmm_components,
                       centers=centers, clusters=clusters)
