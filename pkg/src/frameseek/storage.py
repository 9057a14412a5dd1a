"""On-disk formats: codebook bundle, descriptor files, indices, run files.

All binary files open with a 4-byte ASCII magic and an unsigned 16-bit
little-endian format version. Numeric payloads are little-endian: counts and
ids are unsigned 32-bit, floats are 32-bit, and bit-strings pack least-
significant-bit first within each byte. Writing the same in-memory object
twice yields byte-identical files.
"""

import io
import struct
from pathlib import Path

import numpy as np

from .bits import packed_length
from .codebooks import (BinaryCenters, CodebookSet, GMMModel, KMeansModel,
                        PCAModel, PQModel)
from .geometry import FrameGeometry
from .global_index import GlobalIndex
from .local_index import DESCRIPTOR_DIM, LocalIndex, LocalRecord

FORMAT_VERSION = 1

MAGIC_CODEBOOK = b"I2VC"
MAGIC_LOCAL_DESC = b"LDSC"
MAGIC_GLOBAL_DESC = b"GDSC"
MAGIC_LOCAL_INDEX = b"LIDX"
MAGIC_GLOBAL_INDEX = b"GIDX"

_KIND_KMEANS = 1
_KIND_PQ = 2
_KIND_PCA = 3
_KIND_GMM = 4
_KIND_BINARY = 5

GLOBAL_FEATURE_DIM = 384


class FileFormatError(Exception):
    """A file failed magic, version, or structural validation."""


def _f32_bytes(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f4").tobytes()


def _u32_bytes(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<u4").tobytes()


class _Reader:
    def __init__(self, data: bytes, path: str):
        self.buf = memoryview(data)
        self.pos = 0
        self.path = path

    def take(self, n: int) -> memoryview:
        if self.pos + n > len(self.buf):
            raise FileFormatError(f"{self.path}: truncated file")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def f32(self) -> float:
        return struct.unpack("<f", self.take(4))[0]

    def f32_array(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(4 * count), dtype="<f4").copy()

    def u32_array(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(4 * count), dtype="<u4").copy()

    def u16_array(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(2 * count), dtype="<u2").copy()

    def u8_array(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(count), dtype=np.uint8).copy()

    def done(self) -> bool:
        return self.pos >= len(self.buf)


def _open_checked(path: str | Path, magic: bytes) -> _Reader:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise FileFormatError(f"{path}: cannot read file ({exc})") from exc
    r = _Reader(data, str(path))
    got = bytes(r.take(4))
    if got != magic:
        raise FileFormatError(f"{path}: bad magic {got!r}, expected {magic!r}")
    version = r.u16()
    if version != FORMAT_VERSION:
        raise FileFormatError(f"{path}: file format version {version}, "
                              f"this build reads version {FORMAT_VERSION}")
    return r


# --- codebook bundle ---------------------------------------------------

def write_codebooks(books: CodebookSet, path: str | Path) -> None:
    out = io.BytesIO()
    out.write(MAGIC_CODEBOOK)
    out.write(struct.pack("<H", FORMAT_VERSION))
    out.write(struct.pack("<B", 5))

    out.write(struct.pack("<B", _KIND_KMEANS))
    out.write(struct.pack("<II", books.bow.k, books.bow.d))
    out.write(_f32_bytes(books.bow.centers))

    pq = books.pq
    out.write(struct.pack("<B", _KIND_PQ))
    out.write(struct.pack("<III", pq.m, pq.n_centers, pq.sub_dim))
    for sub in pq.sub_models:
        out.write(_f32_bytes(sub.centers))
    out.write(_f32_bytes(pq.max_dist))

    out.write(struct.pack("<B", _KIND_PCA))
    out.write(struct.pack("<II", books.pca.d_in, books.pca.d_out))
    out.write(_f32_bytes(books.pca.mean))
    out.write(_f32_bytes(books.pca.basis))

    gmm = books.gmm
    out.write(struct.pack("<B", _KIND_GMM))
    out.write(struct.pack("<II", gmm.n_components, gmm.d))
    out.write(_f32_bytes(gmm.weights))
    out.write(_f32_bytes(gmm.means))
    out.write(_f32_bytes(gmm.variances))

    bc = books.binary_centers
    out.write(struct.pack("<B", _KIND_BINARY))
    out.write(struct.pack("<II", bc.k, bc.n_bits))
    out.write(np.ascontiguousarray(bc.centers, dtype=np.uint8).tobytes())

    Path(path).write_bytes(out.getvalue())


def read_codebooks(path: str | Path) -> CodebookSet:
    r = _open_checked(path, MAGIC_CODEBOOK)
    count = r.u8()
    if count != 5:
        raise FileFormatError(f"{r.path}: expected 5 model blocks, found {count}")

    parts: dict[int, object] = {}
    for _ in range(count):
        kind = r.u8()
        if kind == _KIND_KMEANS:
            k, d = r.u32(), r.u32()
            parts[kind] = KMeansModel(centers=r.f32_array(k * d).reshape(k, d))
        elif kind == _KIND_PQ:
            m, n_centers, sub_dim = r.u32(), r.u32(), r.u32()
            subs = [KMeansModel(centers=r.f32_array(n_centers * sub_dim).reshape(n_centers, sub_dim))
                    for _ in range(m)]
            max_dist = r.f32_array(m).astype(np.float64)
            parts[kind] = PQModel(sub_models=subs, max_dist=max_dist)
        elif kind == _KIND_PCA:
            d_in, d_out = r.u32(), r.u32()
            mean = r.f32_array(d_in)
            basis = r.f32_array(d_out * d_in).reshape(d_out, d_in)
            parts[kind] = PCAModel(mean=mean, basis=basis)
        elif kind == _KIND_GMM:
            k, d = r.u32(), r.u32()
            parts[kind] = GMMModel(weights=r.f32_array(k).astype(np.float64),
                                   means=r.f32_array(k * d).reshape(k, d).astype(np.float64),
                                   variances=r.f32_array(k * d).reshape(k, d).astype(np.float64))
        elif kind == _KIND_BINARY:
            k, n_bits = r.u32(), r.u32()
            centers = r.u8_array(k * packed_length(n_bits)).reshape(k, packed_length(n_bits))
            parts[kind] = BinaryCenters(centers=centers, n_bits=n_bits)
        else:
            raise FileFormatError(f"{r.path}: unknown model kind tag {kind}")
    missing = {_KIND_KMEANS, _KIND_PQ, _KIND_PCA, _KIND_GMM, _KIND_BINARY} - set(parts)
    if missing:
        raise FileFormatError(f"{r.path}: missing model blocks {sorted(missing)}")
    return CodebookSet(bow=parts[_KIND_KMEANS], pq=parts[_KIND_PQ], pca=parts[_KIND_PCA],
                       gmm=parts[_KIND_GMM], binary_centers=parts[_KIND_BINARY],
                       format_version=FORMAT_VERSION)


# --- local descriptor files (LDSC, binary + text variant) ---------------

def write_local_descriptors(frames: list[tuple[int, int, list[LocalRecord]]],
                            path: str | Path) -> None:
    """Write per-frame blocks of (frame_id, video_id, records)."""
    out = io.BytesIO()
    out.write(MAGIC_LOCAL_DESC)
    out.write(struct.pack("<H", FORMAT_VERSION))
    for frame_id, video_id, records in frames:
        out.write(struct.pack("<III", frame_id, video_id, len(records)))
        for rec in records:
            out.write(struct.pack("<ffff", rec.x, rec.y, rec.theta, rec.log_scale))
            out.write(_f32_bytes(rec.descriptor))
    Path(path).write_bytes(out.getvalue())


def _read_local_text(path: Path) -> list[tuple[int, int, list[LocalRecord]]]:
    frames: dict[int, tuple[int, list[LocalRecord]]] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 6 + DESCRIPTOR_DIM:
            raise FileFormatError(f"{path}:{lineno}: expected {6 + DESCRIPTOR_DIM} fields, "
                                  f"found {len(fields)}")
        try:
            frame_id, video_id = int(fields[0]), int(fields[1])
            x, y, theta, log_scale = (float(v) for v in fields[2:6])
            descriptor = np.array([float(v) for v in fields[6:]], dtype=np.float32)
        except ValueError as exc:
            raise FileFormatError(f"{path}:{lineno}: {exc}") from exc
        rec = LocalRecord(frame_id=frame_id, video_id=video_id, x=x, y=y,
                          theta=theta, log_scale=log_scale, descriptor=descriptor)
        frames.setdefault(frame_id, (video_id, []))[1].append(rec)
    return [(fid, vid, recs) for fid, (vid, recs) in frames.items()]


def read_local_descriptors(path: str | Path) -> list[tuple[int, int, list[LocalRecord]]]:
    """Read an LDSC file (binary, or the line-oriented text variant)."""
    path = Path(path)
    try:
        with path.open("rb") as fh:
            head = fh.read(4)
    except OSError as exc:
        raise FileFormatError(f"{path}: cannot read file ({exc})") from exc
    if head != MAGIC_LOCAL_DESC:
        return _read_local_text(path)
    r = _open_checked(path, MAGIC_LOCAL_DESC)
    frames = []
    while not r.done():
        frame_id, video_id, n = r.u32(), r.u32(), r.u32()
        raw = r.f32_array(n * (4 + DESCRIPTOR_DIM)).reshape(n, 4 + DESCRIPTOR_DIM) \
            if n else np.empty((0, 4 + DESCRIPTOR_DIM), dtype=np.float32)
        records = [
            LocalRecord(frame_id=frame_id, video_id=video_id,
                        x=float(row[0]), y=float(row[1]), theta=float(row[2]),
                        log_scale=float(row[3]), descriptor=row[4:])
            for row in raw
        ]
        frames.append((frame_id, video_id, records))
    return frames


# --- global descriptor files (GDSC) -------------------------------------

def write_global_features(frames: list[tuple[int, int, np.ndarray]],
                          path: str | Path) -> None:
    """Write per-frame blocks of (frame_id, video_id, n x 384 features)."""
    out = io.BytesIO()
    out.write(MAGIC_GLOBAL_DESC)
    out.write(struct.pack("<H", FORMAT_VERSION))
    for frame_id, video_id, features in frames:
        features = np.atleast_2d(np.asarray(features))
        if features.shape[1] != GLOBAL_FEATURE_DIM:
            raise FileFormatError(f"{path}: frame {frame_id} features have dimension "
                                  f"{features.shape[1]}, expected {GLOBAL_FEATURE_DIM}")
        out.write(struct.pack("<III", frame_id, video_id, features.shape[0]))
        out.write(_f32_bytes(features))
    Path(path).write_bytes(out.getvalue())


def read_global_features(path: str | Path) -> list[tuple[int, int, np.ndarray]]:
    r = _open_checked(path, MAGIC_GLOBAL_DESC)
    frames = []
    while not r.done():
        frame_id, video_id, n = r.u32(), r.u32(), r.u32()
        feats = r.f32_array(n * GLOBAL_FEATURE_DIM).reshape(n, GLOBAL_FEATURE_DIM)
        frames.append((frame_id, video_id, feats))
    return frames


# --- local inverted index (LIDX) -----------------------------------------

def write_local_index(index: LocalIndex, path: str | Path) -> None:
    out = io.BytesIO()
    out.write(MAGIC_LOCAL_INDEX)
    out.write(struct.pack("<H", FORMAT_VERSION))
    out.write(struct.pack("<III", index.n_words, index.m, index.n_pq_centers))
    out.write(struct.pack("<f", index.prune_fraction))
    out.write(struct.pack("<I", index.n_frames))
    out.write(struct.pack("<ff", index.geometry.width, index.geometry.height))
    frame_ids = np.array(sorted(index.frame_to_video), dtype="<u4")
    out.write(_u32_bytes(frame_ids))
    out.write(_u32_bytes(np.array([index.frame_to_video[int(f)] for f in frame_ids], dtype="<u4")))
    out.write(np.packbits(index.stop_mask.astype(np.uint8), bitorder="little").tobytes())
    out.write(_f32_bytes(index.idf))
    out.write(_u32_bytes(index.doc_freq))
    words = sorted(index.postings)
    out.write(struct.pack("<I", len(words)))
    for word in words:
        arrs = index.postings[word]
        count = arrs["frame"].shape[0]
        out.write(struct.pack("<II", word, count))
        out.write(np.ascontiguousarray(arrs["codes"], dtype=np.uint8).tobytes())
        out.write(np.ascontiguousarray(arrs["qx"], dtype="<u2").tobytes())
        out.write(np.ascontiguousarray(arrs["qy"], dtype="<u2").tobytes())
        out.write(np.ascontiguousarray(arrs["qtheta"], dtype=np.uint8).tobytes())
        out.write(np.ascontiguousarray(arrs["qscale"], dtype=np.uint8).tobytes())
        out.write(_u32_bytes(arrs["frame"]))
    Path(path).write_bytes(out.getvalue())


def read_local_index(path: str | Path) -> LocalIndex:
    r = _open_checked(path, MAGIC_LOCAL_INDEX)
    n_words, m, n_pq = r.u32(), r.u32(), r.u32()
    prune_fraction = r.f32()
    n_frames = r.u32()
    width, height = r.f32(), r.f32()
    frame_ids = r.u32_array(n_frames)
    video_ids = r.u32_array(n_frames)
    mask_bytes = r.u8_array(packed_length(n_words))
    stop_mask = np.unpackbits(mask_bytes, bitorder="little")[:n_words].astype(bool)
    idf = r.f32_array(n_words)
    doc_freq = r.u32_array(n_words)
    postings = {}
    for _ in range(r.u32()):
        word, count = r.u32(), r.u32()
        postings[word] = {
            "codes": r.u8_array(count * m).reshape(count, m),
            "qx": r.u16_array(count),
            "qy": r.u16_array(count),
            "qtheta": r.u8_array(count),
            "qscale": r.u8_array(count),
            "frame": r.u32_array(count),
        }
    return LocalIndex(n_words=n_words, m=m, n_pq_centers=n_pq,
                      prune_fraction=float(prune_fraction),
                      geometry=FrameGeometry(width=float(width), height=float(height)),
                      doc_freq=doc_freq, stop_mask=stop_mask, idf=idf,
                      frame_to_video={int(f): int(v) for f, v in zip(frame_ids, video_ids)},
                      postings=postings)


# --- global index (GIDX) --------------------------------------------------

def write_global_index(index: GlobalIndex, path: str | Path) -> None:
    out = io.BytesIO()
    out.write(MAGIC_GLOBAL_INDEX)
    out.write(struct.pack("<H", FORMAT_VERSION))
    out.write(struct.pack("<III", index.n_bits, index.n_gmm_components, index.centers.k))
    out.write(np.ascontiguousarray(index.centers.centers, dtype=np.uint8).tobytes())
    for cluster in index.clusters:
        count = cluster["frame"].shape[0]
        out.write(struct.pack("<I", count))
        out.write(_u32_bytes(cluster["frame"]))
        out.write(_u32_bytes(cluster["video"]))
        out.write(np.ascontiguousarray(cluster["codes"], dtype=np.uint8).tobytes())
    Path(path).write_bytes(out.getvalue())


def read_global_index(path: str | Path) -> GlobalIndex:
    r = _open_checked(path, MAGIC_GLOBAL_INDEX)
    n_bits, n_gmm, n_centers = r.u32(), r.u32(), r.u32()
    width = packed_length(n_bits)
    centers = BinaryCenters(centers=r.u8_array(n_centers * width).reshape(n_centers, width),
                            n_bits=n_bits)
    clusters = []
    for _ in range(n_centers):
        count = r.u32()
        clusters.append({
            "frame": r.u32_array(count),
            "video": r.u32_array(count),
            "codes": r.u8_array(count * width).reshape(count, width),
        })
    return GlobalIndex(n_bits=n_bits, n_gmm_components=n_gmm, centers=centers,
                       clusters=clusters)


# --- run files and ground truth (text) ------------------------------------

def write_run(runs: dict[int, list[tuple[int, float]]], path: str | Path) -> None:
    """Write ranked (video, score) lists per query: one tab-separated line
    per retrieved video, ranks contiguous from 1, scores to 6 decimals."""
    lines = []
    for query in sorted(runs):
        for rank, (video, score) in enumerate(runs[query], start=1):
            lines.append(f"{query}\t{video}\t{rank}\t{score:.6f}")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_run(path: str | Path) -> dict[int, list[tuple[int, float]]]:
    path = Path(path)
    runs: dict[int, list[tuple[int, float]]] = {}
    seen: set[tuple[int, int]] = set()
    try:
        text = path.read_text()
    except OSError as exc:
        raise FileFormatError(f"{path}: cannot read file ({exc})") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise FileFormatError(f"{path}:{lineno}: expected 4 tab-separated fields")
        try:
            query, video, rank, score = int(fields[0]), int(fields[1]), int(fields[2]), float(fields[3])
        except ValueError as exc:
            raise FileFormatError(f"{path}:{lineno}: {exc}") from exc
        if (query, video) in seen:
            raise FileFormatError(f"{path}:{lineno}: duplicate (query, video) pair ({query}, {video})")
        seen.add((query, video))
        entries = runs.setdefault(query, [])
        if rank != len(entries) + 1:
            raise FileFormatError(f"{path}:{lineno}: rank {rank} breaks contiguity for query {query}")
        if entries and score > entries[-1][1]:
            raise FileFormatError(f"{path}:{lineno}: scores increase within query {query}")
        entries.append((video, score))
    return runs


def write_ground_truth(gt: dict[int, set[int]], path: str | Path) -> None:
    lines = [f"{query}\t{video}" for query in sorted(gt) for video in sorted(gt[query])]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_ground_truth(path: str | Path) -> dict[int, set[int]]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FileFormatError(f"{path}: cannot read file ({exc})") from exc
    gt: dict[int, set[int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 2:
            raise FileFormatError(f"{path}:{lineno}: expected 'query<TAB>video'")
        try:
            gt.setdefault(int(fields[0]), set()).add(int(fields[1]))
        except ValueError as exc:
            raise FileFormatError(f"{path}:{lineno}: {exc}") from exc
    return gt
