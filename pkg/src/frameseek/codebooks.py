"""Statistical models behind both retrieval channels.

Trains and applies the coarse k-means vocabulary, the product subquantizers
over coarse residuals, the PCA reduction for dense deep features, the
diagonal-covariance GMM behind Fisher pooling, and the binary cluster
centers that partition Hamming space. All training is deterministic given an
integer seed; ties everywhere break toward the lowest index.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .bits import hamming_cross, hamming_to_many, pack_bits, unpack_bits

VARIANCE_FLOOR = 1e-6


@dataclass
class KMeansModel:
    """k centers over d dimensions; `objective_trace` records training only.

    Centers are held in float32, matching the on-disk codebook precision, so
    a freshly trained model and a reloaded one behave identically.
    """

    centers: np.ndarray  # (k, d) float32
    objective_trace: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.centers = np.ascontiguousarray(self.centers, dtype=np.float32)
        if self.centers.ndim != 2 or self.centers.shape[0] < 1:
            raise ValueError("centers must be a non-empty 2-d matrix")
        if not np.all(np.isfinite(self.centers)):
            raise ValueError("centers must be finite")
        if np.unique(self.centers, axis=0).shape[0] != self.centers.shape[0]:
            raise ValueError("duplicate centers")

    @property
    def k(self) -> int:
        return self.centers.shape[0]

    @property
    def d(self) -> int:
        return self.centers.shape[1]


@dataclass
class PQModel:
    """m independent subquantizers over equal slices of the input vector.

    max_dist[k] is the exact maximum pairwise distance between centers of
    subquantizer k, used to normalize code-to-code similarity into [0, 1].
    """

    sub_models: list[KMeansModel]
    max_dist: np.ndarray  # (m,) float64, strictly positive

    def __post_init__(self):
        self.max_dist = np.asarray(self.max_dist, dtype=np.float64)
        if len(self.sub_models) != self.max_dist.shape[0]:
            raise ValueError("max_dist length must match number of subquantizers")
        if not np.all(self.max_dist > 0):
            raise ValueError("max_dist entries must be strictly positive")

    @property
    def m(self) -> int:
        return len(self.sub_models)

    @property
    def sub_dim(self) -> int:
        return self.sub_models[0].d

    @property
    def d(self) -> int:
        return self.m * self.sub_dim

    @property
    def n_centers(self) -> int:
        return self.sub_models[0].k


@dataclass
class PCAModel:
    """Affine projection onto the top principal directions (no whitening)."""

    mean: np.ndarray  # (d_in,) float32
    basis: np.ndarray  # (d_out, d_in) float32, orthonormal rows

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float32)
        self.basis = np.ascontiguousarray(self.basis, dtype=np.float32)
        if self.basis.shape[0] > self.basis.shape[1]:
            raise ValueError("d_out must not exceed d_in")
        gram = self.basis.astype(np.float64) @ self.basis.astype(np.float64).T
        if not np.allclose(gram, np.eye(self.basis.shape[0]), atol=1e-6):
            raise ValueError("basis rows must be orthonormal")

    @property
    def d_in(self) -> int:
        return self.basis.shape[1]

    @property
    def d_out(self) -> int:
        return self.basis.shape[0]


@dataclass
class GMMModel:
    """Diagonal-covariance Gaussian mixture (float64 parameters)."""

    weights: np.ndarray  # (k,)
    means: np.ndarray  # (k, d)
    variances: np.ndarray  # (k, d), >= VARIANCE_FLOOR
    log_likelihood_trace: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.means = np.ascontiguousarray(self.means, dtype=np.float64)
        self.variances = np.ascontiguousarray(self.variances, dtype=np.float64)
        if abs(float(self.weights.sum()) - 1.0) > 1e-6:
            raise ValueError("mixture weights must sum to 1")
        if np.any(self.variances < VARIANCE_FLOOR * (1.0 - 1e-9)):
            raise ValueError("variances below floor")

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    @property
    def d(self) -> int:
        return self.means.shape[1]


@dataclass
class BinaryCenters:
    """Distinct cluster centers partitioning Hamming space, packed LSB-first."""

    centers: np.ndarray  # (k, ceil(n_bits / 8)) uint8
    n_bits: int
    objective_trace: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.centers = np.ascontiguousarray(np.atleast_2d(self.centers), dtype=np.uint8)
        if np.unique(self.centers, axis=0).shape[0] != self.centers.shape[0]:
            raise ValueError("duplicate binary centers")

    @property
    def k(self) -> int:
        return self.centers.shape[0]


def _squared_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """(n, k) squared Euclidean distances via the expansion identity."""
    p_norm = np.einsum("ij,ij->i", points, points)
    c_norm = np.einsum("ij,ij->i", centers, centers)
    d2 = p_norm[:, None] + c_norm[None, :] - 2.0 * (points @ centers.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def _plusplus_seeds(samples: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Distance-weighted random seeding: probability proportional to squared
    distance to the nearest already-chosen seed."""
    n = samples.shape[0]
    seeds = np.empty((k, samples.shape[1]), dtype=np.float64)
    seeds[0] = samples[int(rng.integers(n))]
    diff = samples - seeds[0]
    closest = np.einsum("ij,ij->i", diff, diff)
    for j in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:  # unreachable when the caller guarantees k distinct rows
            idx = int(rng.integers(n))
        seeds[j] = samples[idx]
        diff = samples - seeds[j]
        np.minimum(closest, np.einsum("ij,ij->i", diff, diff), out=closest)
    return seeds


def kmeans_train(samples: np.ndarray, k: int, iters: int = 25, seed: int = 0) -> KMeansModel:
    """Lloyd's k-means with distance-weighted seeding.

    Empty clusters are re-seeded from the points farthest from their nearest
    center. The recorded objective (sum of squared distances to the nearest
    center) is non-increasing across iterations.

    Raises:
        ValueError: fewer than k distinct sample rows.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[0] == 0:
        raise ValueError("samples must be a non-empty 2-d matrix")
    if k < 1:
        raise ValueError("k must be >= 1")
    if np.unique(samples, axis=0).shape[0] < k:
        raise ValueError("insufficient samples: need at least k distinct rows")

    rng = np.random.default_rng(seed)
    centers = _plusplus_seeds(samples, k, rng)
    trace = []
    for _ in range(max(1, iters)):
        d2 = _squared_distances(samples, centers)
        assign = np.argmin(d2, axis=1)
        trace.append(float(d2[np.arange(samples.shape[0]), assign].sum()))
        counts = np.bincount(assign, minlength=k)
        sums = np.zeros_like(centers)
        np.add.at(sums, assign, samples)
        nonempty = counts > 0
        centers[nonempty] = sums[nonempty] / counts[nonempty, None]
        empties = np.flatnonzero(~nonempty)
        if empties.size:
            # re-seed from the farthest points, skipping duplicate rows so two
            # empty slots never land on the same coordinates
            farthest = iter(np.argsort(-d2[np.arange(samples.shape[0]), assign],
                                       kind="stable"))
            taken: set[bytes] = set()
            for slot in empties:
                for point_idx in farthest:
                    row = samples[point_idx].tobytes()
                    if row not in taken:
                        taken.add(row)
                        centers[slot] = samples[point_idx]
                        break
    model = KMeansModel(centers=centers.astype(np.float32))
    model.objective_trace = np.asarray(trace)
    return model


def kmeans_assign(model: KMeansModel, v: np.ndarray) -> tuple[int, np.ndarray]:
    """Nearest-center index (lowest index on ties) and residual v - c_i."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (model.d,):
        raise ValueError(f"dimension mismatch: vector has shape {v.shape}, model expects ({model.d},)")
    centers = model.centers.astype(np.float64)
    diff = v[None, :] - centers
    word = int(np.argmin(np.einsum("ij,ij->i", diff, diff)))
    return word, v - centers[word]


def kmeans_assign_batch(model: KMeansModel, vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized assignment: word ids and residuals for each row."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    if vectors.shape[1] != model.d:
        raise ValueError(f"dimension mismatch: vectors have {vectors.shape[1]} dims, model expects {model.d}")
    centers = model.centers.astype(np.float64)
    words = np.argmin(_squared_distances(vectors, centers), axis=1).astype(np.int64)
    return words, vectors - centers[words]


def pq_train(residuals: np.ndarray, m: int = 8, n_centers: int = 256,
             iters: int = 25, seed: int = 0) -> PQModel:
    """Train m independent subquantizers over non-overlapping residual slices.

    max_dist[k] is computed exactly over all center pairs of subquantizer k
    and verified to bound every pair.
    """
    residuals = np.asarray(residuals, dtype=np.float64)
    d = residuals.shape[1]
    if d % m != 0:
        raise ValueError(f"m={m} does not divide dimension {d}")
    if not 2 <= n_centers <= 256:
        raise ValueError("n_centers must be in [2, 256] so codes fit one byte")
    sub_dim = d // m
    sub_models = []
    max_dist = np.empty(m, dtype=np.float64)
    for j in range(m):
        sub = kmeans_train(residuals[:, j * sub_dim:(j + 1) * sub_dim],
                           n_centers, iters=iters, seed=seed + j)
        centers = sub.centers.astype(np.float64)
        pair = np.sqrt(_squared_distances(centers, centers))
        max_dist[j] = float(pair.max())
        assert np.all(pair <= max_dist[j]), "max_dist must bound every center pair"
        sub_models.append(sub)
    return PQModel(sub_models=sub_models, max_dist=max_dist)


def pq_encode(model: PQModel, r: np.ndarray) -> np.ndarray:
    """Encode one residual as m one-byte sub-codes (argmin per subspace)."""
    return pq_encode_batch(model, np.asarray(r)[None, :])[0]


def pq_encode_batch(model: PQModel, residuals: np.ndarray) -> np.ndarray:
    residuals = np.atleast_2d(np.asarray(residuals, dtype=np.float64))
    if residuals.shape[1] != model.d:
        raise ValueError(f"dimension mismatch: residuals have {residuals.shape[1]} dims, model expects {model.d}")
    codes = np.empty((residuals.shape[0], model.m), dtype=np.uint8)
    sub_dim = model.sub_dim
    for j, sub in enumerate(model.sub_models):
        d2 = _squared_distances(residuals[:, j * sub_dim:(j + 1) * sub_dim],
                                sub.centers.astype(np.float64))
        codes[:, j] = np.argmin(d2, axis=1).astype(np.uint8)
    return codes


def pca_fit(samples: np.ndarray, d_out: int) -> PCAModel:
    """Top-d_out principal directions of mean-centered samples.

    Basis rows are ordered by descending eigenvalue; each row's sign is fixed
    so its largest-magnitude entry is positive.

    Raises:
        ValueError: fewer samples than d_out + 1, or data rank below d_out.
    """
    samples = np.asarray(samples, dtype=np.float64)
    n, _ = samples.shape
    if n <= d_out:
        raise ValueError("need more samples than output dimensions")
    mean = samples.mean(axis=0)
    centered = samples - mean
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    if eigvals[0] <= 0 or eigvals[d_out - 1] <= eigvals[0] * 1e-10:
        raise ValueError("insufficient rank: data rank below requested dimensions")
    basis = eigvecs[:, order[:d_out]].T
    flip = np.sign(basis[np.arange(d_out), np.argmax(np.abs(basis), axis=1)])
    basis *= flip[:, None]
    return PCAModel(mean=mean.astype(np.float32), basis=basis.astype(np.float32))


def pca_project(model: PCAModel, v: np.ndarray) -> np.ndarray:
    """Project one vector or a batch of rows: basis . (v - mean)."""
    v = np.asarray(v, dtype=np.float64)
    basis = model.basis.astype(np.float64)
    mean = model.mean.astype(np.float64)
    if v.ndim == 1:
        return basis @ (v - mean)
    return (v - mean) @ basis.T


def gmm_log_posteriors(model: GMMModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample log responsibilities and log-likelihoods.

    Returns:
        (log_gamma, log_lik) with shapes (n, k) and (n,).
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    log_w = np.log(model.weights)
    log_norm = -0.5 * (model.d * np.log(2.0 * np.pi) + np.log(model.variances).sum(axis=1))
    diff = x[:, None, :] - model.means[None, :, :]
    mahal = np.einsum("nkd,kd->nk", diff * diff, 1.0 / model.variances)
    joint = log_w[None, :] + log_norm[None, :] - 0.5 * mahal
    peak = joint.max(axis=1, keepdims=True)
    log_lik = peak[:, 0] + np.log(np.exp(joint - peak).sum(axis=1))
    return joint - log_lik[:, None], log_lik


def gmm_posteriors(model: GMMModel, x: np.ndarray) -> np.ndarray:
    """Responsibilities gamma_i(k), shape (n, k)."""
    log_gamma, _ = gmm_log_posteriors(model, x)
    return np.exp(log_gamma)


def gmm_train(samples: np.ndarray, n_components: int, iters: int = 50, seed: int = 0) -> GMMModel:
    """EM for a diagonal-covariance mixture, initialized from k-means.

    Total log-likelihood is non-decreasing per iteration within 1e-8 slack
    (the variance floor can nick the exact guarantee). Components whose total
    responsibility collapses are re-seeded from a random sample with a
    warning.
    """
    samples = np.asarray(samples, dtype=np.float64)
    n, _ = samples.shape
    rng = np.random.default_rng(seed)

    km = kmeans_train(samples, n_components, iters=10, seed=seed)
    means = km.centers.astype(np.float64).copy()
    assign = np.argmin(_squared_distances(samples, means), axis=1)
    weights = np.maximum(np.bincount(assign, minlength=n_components).astype(np.float64), 1.0)
    weights /= weights.sum()
    global_var = np.maximum(samples.var(axis=0), VARIANCE_FLOOR)
    variances = np.tile(global_var, (n_components, 1))

    trace = []
    model = GMMModel(weights=weights, means=means, variances=variances)
    for _ in range(max(1, iters)):
        log_gamma, log_lik = gmm_log_posteriors(model, samples)
        trace.append(float(log_lik.sum()))
        gamma = np.exp(log_gamma)
        totals = gamma.sum(axis=0)
        dead = np.flatnonzero(totals < 1e-10)
        if dead.size:
            warnings.warn(f"re-seeding {dead.size} degenerate mixture component(s)", RuntimeWarning)
            for j in dead:
                means[j] = samples[int(rng.integers(n))]
                variances[j] = global_var
                gamma[:, j] = 1e-8
            totals = gamma.sum(axis=0)
        weights = totals / totals.sum()
        means = (gamma.T @ samples) / totals[:, None]
        sq = (gamma.T @ (samples * samples)) / totals[:, None]
        variances = np.maximum(sq - means * means, VARIANCE_FLOOR)
        model = GMMModel(weights=weights, means=means, variances=variances)

    model.log_likelihood_trace = np.asarray(trace)
    return model


def binary_centers_train(codes: np.ndarray, n_bits: int, k: int = 32,
                         iters: int = 20, seed: int = 0) -> BinaryCenters:
    """k-majority clustering in Hamming space.

    Assignment is by Hamming distance (ties to the lowest index); the center
    update takes the per-bit majority of each cluster (ties to bit 0), so the
    total Hamming objective is non-increasing. Empty clusters re-seed from
    the codes farthest from their nearest center.

    Args:
        codes: (n, ceil(n_bits / 8)) packed uint8 matrix.
        n_bits: logical code length in bits.
        k: number of centers.

    Raises:
        ValueError: fewer than k distinct codes.
    """
    packed = np.ascontiguousarray(np.atleast_2d(codes), dtype=np.uint8)
    bits = unpack_bits(packed, n_bits)
    n = bits.shape[0]
    if np.unique(packed, axis=0).shape[0] < k:
        raise ValueError("insufficient samples: need at least k distinct codes")

    rng = np.random.default_rng(seed)
    centers = (_plusplus_seeds(bits.astype(np.float64), k, rng) > 0.5).astype(np.uint8)

    trace = []
    for _ in range(max(1, iters)):
        dists = hamming_cross(packed, pack_bits(centers), n_bits)
        assign = np.argmin(dists, axis=1)
        trace.append(float(dists[np.arange(n), assign].sum()))
        new_centers = np.zeros_like(centers)
        counts = np.bincount(assign, minlength=k)
        for j in range(k):
            members = bits[assign == j]
            if members.shape[0]:
                ones = members.sum(axis=0, dtype=np.int64)
                new_centers[j] = (2 * ones > members.shape[0]).astype(np.uint8)
        empties = np.flatnonzero(counts == 0)
        if empties.size:
            farthest = np.argsort(-dists[np.arange(n), assign], kind="stable")
            for slot, idx in zip(empties, farthest[: empties.size]):
                new_centers[slot] = bits[idx]
        centers = new_centers

    packed_centers = _dedupe_centers(pack_bits(centers), packed, n_bits)
    model = BinaryCenters(centers=packed_centers, n_bits=n_bits)
    model.objective_trace = np.asarray(trace)
    return model


def _dedupe_centers(packed_centers: np.ndarray, packed_codes: np.ndarray,
                    n_bits: int) -> np.ndarray:
    """Replace colliding centers with distinct far-away codes (type requires
    all centers distinct; collisions are rare but possible on tiny inputs)."""
    k = packed_centers.shape[0]
    _, first = np.unique(packed_centers, axis=0, return_index=True)
    dup_slots = sorted(set(range(k)) - set(int(i) for i in first))
    if not dup_slots:
        return packed_centers
    used = {packed_centers[i].tobytes() for i in first}
    dists = hamming_cross(packed_codes, packed_centers, n_bits)
    order = np.argsort(-dists.min(axis=1), kind="stable")
    cursor = 0
    for slot in dup_slots:
        while cursor < order.size and packed_codes[order[cursor]].tobytes() in used:
            cursor += 1
        if cursor >= order.size:
            raise ValueError("insufficient distinct codes to separate centers")
        packed_centers[slot] = packed_codes[order[cursor]]
        used.add(packed_centers[slot].tobytes())
    return packed_centers


def binary_assign(centers: BinaryCenters, code: np.ndarray) -> int:
    """Index of the Hamming-nearest center (lowest index on ties)."""
    return int(np.argmin(hamming_to_many(code, centers.centers)))


def binary_assign_batch(centers: BinaryCenters, codes: np.ndarray) -> np.ndarray:
    dists = hamming_cross(codes, centers.centers, centers.n_bits)
    return np.argmin(dists, axis=1).astype(np.int64)


@dataclass
class CodebookSet:
    """Every trained model the engine needs, versioned as one bundle."""

    bow: KMeansModel
    pq: PQModel
    pca: PCAModel
    gmm: GMMModel
    binary_centers: BinaryCenters
    format_version: int = 1
