"""Local descriptor channel: two-stage encoding and the inverted file.

Every keypoint descriptor is mapped to its nearest coarse center (the
inverted-file key) and the residual is product-quantized into m one-byte
sub-codes. Keypoint geometry rides along in quantized form for the later
Hough vote. The index prunes the most frequent words as stop words and
carries an idf table used to weight match scores.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .codebooks import KMeansModel, PQModel, kmeans_assign_batch, pq_encode_batch
from .geometry import FrameGeometry, quantize_log_scale, quantize_theta

DESCRIPTOR_DIM = 128


@dataclass
class LocalRecord:
    """One keypoint: geometry plus its 128-d descriptor."""

    frame_id: int
    video_id: int
    x: float
    y: float
    theta: float  # radians, wrapped to [-pi, pi) at encode time
    log_scale: float  # log2 of keypoint scale
    descriptor: np.ndarray

    def __post_init__(self):
        self.descriptor = np.asarray(self.descriptor, dtype=np.float32)


@dataclass
class LocalPosting:
    """Indexed keypoint: coarse word, PQ codes, quantized geometry."""

    word: int
    codes: np.ndarray  # (m,) uint8
    qx: int
    qy: int
    qtheta: int
    qscale: int
    frame_id: int


@dataclass
class LocalIndex:
    """Frozen inverted file over coarse words.

    Postings for each retained word are struct-of-arrays, sorted by frame id.
    `stop_mask` marks exactly ceil(prune_fraction * n_words) words of highest
    document frequency (ties stop the lower word id); their postings are
    dropped. idf[w] = ln(n_frames / (1 + doc_freq[w])), clamped at 0.
    """

    n_words: int
    m: int
    n_pq_centers: int
    prune_fraction: float
    geometry: FrameGeometry
    doc_freq: np.ndarray  # (n_words,) uint32
    stop_mask: np.ndarray  # (n_words,) bool
    idf: np.ndarray  # (n_words,) float32
    frame_to_video: dict[int, int]
    postings: dict[int, dict[str, np.ndarray]] = field(repr=False)

    @property
    def n_frames(self) -> int:
        return len(self.frame_to_video)

    def n_postings(self) -> int:
        return sum(arrs["frame"].shape[0] for arrs in self.postings.values())


def encode_frame_local(records: list[LocalRecord], bow: KMeansModel, pq: PQModel,
                       geometry: FrameGeometry | None = None) -> list[LocalPosting]:
    """Encode keypoints into postings: coarse word, residual PQ codes, and
    quantized geometry.

    Raises:
        ValueError: descriptor dimensionality does not match the models.
    """
    if not records:
        return []
    geometry = geometry or FrameGeometry()
    descriptors = np.stack([r.descriptor for r in records]).astype(np.float64)
    if descriptors.shape[1] != bow.d:
        raise ValueError(f"descriptor dimension {descriptors.shape[1]} does not match vocabulary ({bow.d})")
    words, residuals = kmeans_assign_batch(bow, descriptors)
    codes = pq_encode_batch(pq, residuals)
    qx, qy = geometry.quantize_xy([r.x for r in records], [r.y for r in records])
    qtheta = quantize_theta([r.theta for r in records])
    qscale = quantize_log_scale([r.log_scale for r in records])
    return [
        LocalPosting(word=int(words[i]), codes=codes[i], qx=int(qx[i]), qy=int(qy[i]),
                     qtheta=int(qtheta[i]), qscale=int(qscale[i]), frame_id=records[i].frame_id)
        for i in range(len(records))
    ]


def build_local_index(postings: list[LocalPosting], frame_to_video: dict[int, int],
                      n_words: int, m: int, n_pq_centers: int,
                      prune_fraction: float = 0.05,
                      geometry: FrameGeometry | None = None) -> LocalIndex:
    """Assemble the frozen inverted file from a posting stream.

    Raises:
        ValueError: empty posting stream, or prune_fraction outside [0, 0.5).
    """
    if not postings:
        raise ValueError("no postings to index")
    if not 0.0 <= prune_fraction < 0.5:
        raise ValueError("prune_fraction must be in [0, 0.5)")
    geometry = geometry or FrameGeometry()

    doc_freq = np.zeros(n_words, dtype=np.uint32)
    seen: set[tuple[int, int]] = set()
    for p in postings:
        if not 0 <= p.word < n_words:
            raise ValueError(f"word {p.word} out of range [0, {n_words})")
        key = (p.word, p.frame_id)
        if key not in seen:
            seen.add(key)
            doc_freq[p.word] += 1

    n_stop = math.ceil(prune_fraction * n_words)
    stop_mask = np.zeros(n_words, dtype=bool)
    if n_stop:
        order = np.lexsort((np.arange(n_words), -doc_freq.astype(np.int64)))
        stop_mask[order[:n_stop]] = True

    n_frames = len(frame_to_video)
    idf = np.log(n_frames / (1.0 + doc_freq.astype(np.float64)))
    idf = np.maximum(idf, 0.0).astype(np.float32)

    by_word: dict[int, list[LocalPosting]] = {}
    for p in postings:
        if not stop_mask[p.word]:
            by_word.setdefault(p.word, []).append(p)

    packed: dict[int, dict[str, np.ndarray]] = {}
    for word in sorted(by_word):
        plist = sorted(by_word[word], key=lambda p: p.frame_id)
        packed[word] = {
            "codes": np.stack([p.codes for p in plist]).astype(np.uint8),
            "qx": np.array([p.qx for p in plist], dtype=np.uint16),
            "qy": np.array([p.qy for p in plist], dtype=np.uint16),
            "qtheta": np.array([p.qtheta for p in plist], dtype=np.uint8),
            "qscale": np.array([p.qscale for p in plist], dtype=np.uint8),
            "frame": np.array([p.frame_id for p in plist], dtype=np.uint32),
        }

    return LocalIndex(n_words=n_words, m=m, n_pq_centers=n_pq_centers,
                      prune_fraction=prune_fraction, geometry=geometry,
                      doc_freq=doc_freq, stop_mask=stop_mask, idf=idf,
                      frame_to_video=dict(frame_to_video), postings=packed)
