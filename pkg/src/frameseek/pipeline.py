"""End-to-end orchestration: training, index building, batch querying.

These functions sit between the file formats and the per-module operations
so the CLI stays a thin argument parser and library users can drive the
whole engine from Python. Frame encoding and per-query evaluation can fan
out over a thread pool; results are gathered in input order, so the output
never depends on the thread count.
"""

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .codebooks import (CodebookSet, binary_centers_train, gmm_train,
                        kmeans_assign_batch, kmeans_train, pca_fit,
                        pca_project, pq_train)
from .config import EngineConfig
from .fusion import FusionConfig, RankedList, fuse
from .geometry import FrameGeometry
from .global_index import (GlobalIndex, build_global_index, fisher_vector,
                           make_signature)
from .global_query import GlobalQueryConfig, global_rank
from .local_index import LocalIndex, build_local_index, encode_frame_local
from .local_query import HoughConfig, PQScoreTable, local_rank
from .storage import read_global_features, read_local_descriptors


def _map_maybe_parallel(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _subsample(rows: np.ndarray, cap: int, rng: np.random.Generator) -> np.ndarray:
    if rows.shape[0] <= cap:
        return rows
    pick = rng.choice(rows.shape[0], size=cap, replace=False)
    return rows[np.sort(pick)]


def collect_descriptor_files(paths: list[str | Path], suffix: str) -> list[Path]:
    """Expand files and directories into a sorted list of descriptor files.

    Explicit files are routed by extension, so one mixed --features list can
    feed both the local (.ldsc) and global (.gdsc) training paths.
    """
    out: list[Path] = []
    for p in paths:
        p = Path(p)
        if p.is_dir():
            out.extend(sorted(p.glob(f"*{suffix}")))
        elif p.name.endswith(suffix):
            out.append(p)
    return out


def train_codebooks(local_files: list[Path], global_files: list[Path],
                    config: EngineConfig,
                    pca_files: list[Path] | None = None) -> CodebookSet:
    """Train the full model bundle from descriptor files.

    PCA may be fit on a different feature set than the GMM corpus when
    pca_files is given; by default the reference corpus serves both.
    """
    rng = np.random.default_rng(config.seed)

    descriptors = []
    for path in local_files:
        for _, _, records in read_local_descriptors(path):
            if records:
                descriptors.append(np.stack([r.descriptor for r in records]))
    if not descriptors:
        raise ValueError("no input files: no local descriptors to train on")
    descriptors = _subsample(np.concatenate(descriptors).astype(np.float64),
                             config.max_train_samples, rng)

    bow = kmeans_train(descriptors, config.d_bow, iters=config.train_iters, seed=config.seed)
    _, residuals = kmeans_assign_batch(bow, descriptors)
    pq = pq_train(residuals, m=config.m, n_centers=config.d_pq,
                  iters=config.train_iters, seed=config.seed + 1)

    def load_features(paths):
        frames = []
        for path in paths:
            frames.extend(read_global_features(path))
        if not frames:
            raise ValueError("no input files: no global features to train on")
        return frames

    frames = load_features(global_files)
    pooled = np.concatenate([f for _, _, f in frames]).astype(np.float64)
    if pca_files:
        pca_pool = np.concatenate([f for _, _, f in load_features(pca_files)]).astype(np.float64)
    else:
        pca_pool = pooled
    pca = pca_fit(_subsample(pca_pool, config.max_train_samples, rng), config.pca_dim)

    projected = pca_project(pca, _subsample(pooled, config.max_train_samples, rng))
    gmm = gmm_train(projected, config.d_fk, iters=config.gmm_iters, seed=config.seed + 2)

    signatures = [make_signature(fid, vid, fisher_vector(pca_project(pca, feats), gmm))
                  for fid, vid, feats in frames]
    codes = np.stack([s.bits for s in signatures])
    centers = binary_centers_train(codes, signatures[0].n_bits,
                                   k=config.binary_clusters,
                                   iters=config.train_iters, seed=config.seed + 3)
    return CodebookSet(bow=bow, pq=pq, pca=pca, gmm=gmm, binary_centers=centers)


def build_local_index_from_files(files: list[Path], books: CodebookSet,
                                 config: EngineConfig) -> LocalIndex:
    geometry = FrameGeometry(config.frame_width, config.frame_height)
    frames = []
    for path in files:
        frames.extend(read_local_descriptors(path))
    if not frames:
        raise ValueError("no input files: nothing to index")

    def encode(frame):
        _, _, records = frame
        return encode_frame_local(records, books.bow, books.pq, geometry)

    posting_lists = _map_maybe_parallel(encode, frames, config.threads)
    postings = [p for plist in posting_lists for p in plist]
    frame_to_video = {fid: vid for fid, vid, _ in frames}
    return build_local_index(postings, frame_to_video, n_words=books.bow.k,
                             m=books.pq.m, n_pq_centers=books.pq.n_centers,
                             prune_fraction=config.prune_fraction, geometry=geometry)


def build_global_index_from_files(files: list[Path], books: CodebookSet,
                                  config: EngineConfig) -> GlobalIndex:
    frames = []
    for path in files:
        frames.extend(read_global_features(path))
    if not frames:
        raise ValueError("no input files: nothing to index")

    def signature(frame):
        fid, vid, feats = frame
        return make_signature(fid, vid, fisher_vector(pca_project(books.pca, feats), books.gmm))

    signatures = _map_maybe_parallel(signature, frames, config.threads)
    return build_global_index(signatures, books.binary_centers,
                              n_gmm_components=books.gmm.n_components)


def check_compatible_local(books: CodebookSet, index: LocalIndex) -> None:
    if books.format_version != 1:
        raise ValueError(f"codebook format version {books.format_version} does not match "
                         f"index format version 1")
    if books.bow.k != index.n_words or books.pq.m != index.m \
            or books.pq.n_centers != index.n_pq_centers:
        raise ValueError(
            f"codebooks (D_bow={books.bow.k}, m={books.pq.m}, D_pq={books.pq.n_centers}) "
            f"do not match index (D_bow={index.n_words}, m={index.m}, D_pq={index.n_pq_centers})")


def check_compatible_global(books: CodebookSet, index: GlobalIndex) -> None:
    expected_bits = books.pca.d_out * books.gmm.n_components
    if expected_bits != index.n_bits or books.gmm.n_components != index.n_gmm_components:
        raise ValueError(
            f"codebooks (D_fk={books.gmm.n_components}, B={expected_bits}) do not match "
            f"index (D_fk={index.n_gmm_components}, B={index.n_bits})")


def query_local_file(path: str | Path, index: LocalIndex, books: CodebookSet,
                     config: EngineConfig, asymmetric: bool = False) -> dict[int, RankedList]:
    """Run every frame of an LDSC file as a query; keys are frame ids."""
    check_compatible_local(books, index)
    frames = read_local_descriptors(path)
    table = PQScoreTable(books.pq)
    geometry = FrameGeometry(config.frame_width, config.frame_height)
    hough = HoughConfig()

    def run(frame):
        _, _, records = frame
        return local_rank(records, index, books.bow, books.pq,
                          tau_pq=config.tau_pq, top_n=config.top_n, hough=hough,
                          query_geometry=geometry, table=table, asymmetric=asymmetric)

    ranked = _map_maybe_parallel(run, frames, config.threads)
    return {fid: r for (fid, _, _), r in zip(frames, ranked)}


def query_global_file(path: str | Path, index: GlobalIndex, books: CodebookSet,
                      config: EngineConfig, brute_force: bool = False) -> dict[int, RankedList]:
    """Run every frame of a GDSC file as a query; keys are frame ids."""
    check_compatible_global(books, index)
    frames = read_global_features(path)
    cfg = GlobalQueryConfig(k_probe=config.k_probe, top_n=config.top_n,
                            brute_force=brute_force)

    def run(frame):
        fid, vid, feats = frame
        sig = make_signature(fid, vid, fisher_vector(pca_project(books.pca, feats), books.gmm))
        return global_rank(sig.bits, index, cfg)

    ranked = _map_maybe_parallel(run, frames, config.threads)
    return {fid: r for (fid, _, _), r in zip(frames, ranked)}


def fuse_runs(local_runs: dict[int, list[tuple[int, float]]],
              global_runs: dict[int, list[tuple[int, float]]],
              config: EngineConfig) -> dict[int, list[tuple[int, float]]]:
    """Normalize and max-merge raw per-query runs from the two channels."""
    cfg = FusionConfig(epsilon=config.epsilon, warmup=config.warmup)
    out = {}
    for query in sorted(set(local_runs) | set(global_runs)):
        local = RankedList(entries=local_runs.get(query, []), channel="local")
        global_ = RankedList(entries=global_runs.get(query, []), channel="global")
        fused = fuse(local, global_, cfg, top_n=config.top_n)
        out[query] = fused.entries
    return out


def ranked_to_run(ranked: dict[int, RankedList]) -> dict[int, list[tuple[int, float]]]:
    return {query: r.entries for query, r in ranked.items()}
