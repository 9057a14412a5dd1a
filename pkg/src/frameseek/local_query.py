"""Local channel query path: PQ scoring, candidate collection, Hough voting.

A query keypoint matches reference postings under the same coarse word whose
normalized PQ similarity exceeds tau_pq; surviving matches are weighted by
the word's idf and then checked for geometric consistency with a 4-dof
similarity-transform Hough vote. The dominant bin total, normalized by the
query's own score mass, becomes the frame score; videos take the maximum
over their frames.
"""

import math
from dataclasses import dataclass

import numpy as np

from .codebooks import KMeansModel, PQModel, kmeans_assign_batch, pq_encode_batch
from .fusion import LOCAL, RankedList, rank_videos
from .geometry import (FrameGeometry, dequantize_log_scale, dequantize_theta,
                       wrap_angle)
from .local_index import LocalIndex, LocalRecord


@dataclass
class HoughConfig:
    """Joint (rotation, log-scale, translation) histogram geometry.

    Rotation bins cover [-pi, pi); log2 scale-ratio bins cover [-4, 4);
    translation bins cover [-2, 2) in units of scaled query diagonals.
    Out-of-range scale and translation values clip to the boundary bins.
    """

    n_theta_bins: int = 16
    n_scale_bins: int = 8
    n_trans_bins: int = 16
    scale_range: tuple[float, float] = (-4.0, 4.0)
    trans_range: tuple[float, float] = (-2.0, 2.0)

    def __post_init__(self):
        if min(self.n_theta_bins, self.n_scale_bins, self.n_trans_bins) < 2:
            raise ValueError("all bin counts must be at least 2")


@dataclass
class QueryPosting:
    """Encoded query keypoint: hash codes plus raw (unquantized) geometry."""

    index: int  # position within the query frame
    word: int
    codes: np.ndarray  # (m,) uint8
    x: float
    y: float
    theta: float
    log_scale: float
    residual: np.ndarray | None = None  # kept for asymmetric scoring


@dataclass
class MatchCandidate:
    """A surviving query-to-reference keypoint match."""

    frame_id: int
    query_index: int
    score: float  # idf-weighted hard similarity, > 0
    qx: float
    qy: float
    qtheta: float
    qlog_scale: float
    rx: float
    ry: float
    rtheta: float
    rlog_scale: float


class PQScoreTable:
    """Precomputed per-subspace lookup tables for normalized code-to-code
    scoring.

    sim[k][i, j] = 1 - ||c_i - c_j|| / max_dist[k], clipped into [0, 1].
    """

    def __init__(self, pq: PQModel):
        self.m = pq.m
        self.tables = []
        for j, sub in enumerate(pq.sub_models):
            centers = sub.centers.astype(np.float64)
            diff = centers[:, None, :] - centers[None, :, :]
            dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
            self.tables.append(np.clip(1.0 - dist / pq.max_dist[j], 0.0, 1.0))

    def score(self, codes_r: np.ndarray, codes_q: np.ndarray) -> float:
        total = 0.0
        for j in range(self.m):
            total += self.tables[j][int(codes_r[j]), int(codes_q[j])]
        return total / self.m

    def score_many(self, codes_r: np.ndarray, codes_q: np.ndarray) -> np.ndarray:
        """Scores for many reference codes (n, m) against one query code (m,)."""
        acc = np.zeros(codes_r.shape[0], dtype=np.float64)
        for j in range(self.m):
            acc += self.tables[j][codes_r[:, j], int(codes_q[j])]
        return acc / self.m


def pq_score(codes_r: np.ndarray, codes_q: np.ndarray, pq: PQModel | PQScoreTable) -> float:
    """Normalized residual similarity of two PQ codes, in [0, 1].

    1.0 means identical codes; 0.0 means every subspace hits its maximally
    separated center pair. Symmetric in its arguments.
    """
    codes_r = np.asarray(codes_r)
    codes_q = np.asarray(codes_q)
    if codes_r.shape != codes_q.shape:
        raise ValueError("code length mismatch")
    table = pq if isinstance(pq, PQScoreTable) else PQScoreTable(pq)
    return table.score(codes_r, codes_q)


def pq_score_asymmetric(residual_q: np.ndarray, codes_r: np.ndarray, pq: PQModel) -> float:
    """Score a raw query residual against reference codes; clamped to [0, 1]
    since a raw residual can sit farther from a center than any center pair."""
    residual_q = np.asarray(residual_q, dtype=np.float64)
    sub_dim = pq.sub_dim
    total = 0.0
    for j, sub in enumerate(pq.sub_models):
        c = sub.centers[int(codes_r[j])].astype(np.float64)
        dist = math.sqrt(float(np.sum((residual_q[j * sub_dim:(j + 1) * sub_dim] - c) ** 2)))
        total += min(max(1.0 - dist / pq.max_dist[j], 0.0), 1.0)
    return total / pq.m


def encode_query_local(records: list[LocalRecord], bow: KMeansModel, pq: PQModel,
                       keep_residuals: bool = False) -> list[QueryPosting]:
    """Encode query keypoints, keeping raw geometry for the Hough vote."""
    if not records:
        return []
    descriptors = np.stack([r.descriptor for r in records]).astype(np.float64)
    if descriptors.shape[1] != bow.d:
        raise ValueError(f"descriptor dimension {descriptors.shape[1]} does not match vocabulary ({bow.d})")
    words, residuals = kmeans_assign_batch(bow, descriptors)
    codes = pq_encode_batch(pq, residuals)
    return [
        QueryPosting(index=i, word=int(words[i]), codes=codes[i],
                     x=float(r.x), y=float(r.y), theta=float(wrap_angle(r.theta)),
                     log_scale=float(r.log_scale),
                     residual=residuals[i] if keep_residuals else None)
        for i, r in enumerate(records)
    ]


def _asymmetric_scores(posting: QueryPosting, ref_codes: np.ndarray, pq: PQModel) -> np.ndarray:
    sub_dim = pq.sub_dim
    acc = np.zeros(ref_codes.shape[0], dtype=np.float64)
    for j, sub in enumerate(pq.sub_models):
        r = posting.residual[j * sub_dim:(j + 1) * sub_dim]
        dist = np.sqrt(np.sum((sub.centers.astype(np.float64) - r) ** 2, axis=1))
        lut = np.clip(1.0 - dist / pq.max_dist[j], 0.0, 1.0)
        acc += lut[ref_codes[:, j]]
    return acc / pq.m


def collect_matches(query: list[QueryPosting], index: LocalIndex,
                    pq: PQModel | PQScoreTable, tau_pq: float = 0.72,
                    asymmetric: bool = False,
                    pq_model: PQModel | None = None) -> list[MatchCandidate]:
    """Scan each query posting's inverted list and keep matches whose PQ
    similarity exceeds tau_pq, weighted by the word's idf.

    Stopped query words have no postings and are skipped by construction;
    candidates whose weighted score is not positive are never materialized.
    Asymmetric mode scores the raw query residual against reference centers
    (requires postings encoded with keep_residuals=True).
    """
    if not 0.0 <= tau_pq < 1.0:
        raise ValueError("tau_pq must be in [0, 1)")
    table = pq if isinstance(pq, PQScoreTable) else PQScoreTable(pq)
    if asymmetric and pq_model is None and isinstance(pq, PQModel):
        pq_model = pq
    geometry = index.geometry
    out: list[MatchCandidate] = []
    for posting in query:
        arrs = index.postings.get(posting.word)
        if arrs is None:
            continue
        idf = float(index.idf[posting.word])
        if idf <= 0.0:
            continue
        if asymmetric:
            if posting.residual is None or pq_model is None:
                raise ValueError("asymmetric scoring needs query residuals and the PQ model")
            scores = _asymmetric_scores(posting, arrs["codes"], pq_model)
        else:
            scores = table.score_many(arrs["codes"], posting.codes)
        hits = np.flatnonzero(scores > tau_pq)
        if not hits.size:
            continue
        rx, ry = geometry.dequantize_xy(arrs["qx"][hits], arrs["qy"][hits])
        rtheta = dequantize_theta(arrs["qtheta"][hits])
        rscale = dequantize_log_scale(arrs["qscale"][hits])
        frames = arrs["frame"][hits]
        for pos, hit in enumerate(hits):
            out.append(MatchCandidate(
                frame_id=int(frames[pos]), query_index=posting.index,
                score=idf * float(scores[hit]),
                qx=posting.x, qy=posting.y, qtheta=posting.theta,
                qlog_scale=posting.log_scale,
                rx=float(rx[pos]), ry=float(ry[pos]), rtheta=float(rtheta[pos]),
                rlog_scale=float(rscale[pos])))
    return out


def _theta_bin(theta_rel: float, n_bins: int) -> int:
    """Modular bin over [-pi, pi) with 0 at a bin center, so a zero rotation
    under geometry-quantization jitter stays in one bin."""
    width = 2.0 * math.pi / n_bins
    return int(math.floor((theta_rel + math.pi) / width + 0.5)) % n_bins


def _clipped_bin(value: float, lo: float, hi: float, n_bins: int) -> int:
    """Linear bin, centered so multiples of the width (0 included) fall at
    bin centers; out-of-range values clip to the boundary bins."""
    width = (hi - lo) / n_bins
    pos = int(math.floor((value - lo) / width + 0.5))
    return min(max(pos, 0), n_bins - 1)


def hough_verify(candidates: list[MatchCandidate], cfg: HoughConfig | None = None,
                 query_diagonal: float | None = None) -> dict[int, float]:
    """Score every reference frame by its dominant 4-dof transform bin.

    Each candidate votes its score into the joint (rotation difference,
    log2 scale ratio, normalized translation) bin implied by its query and
    reference geometry; a query keypoint contributes at most its best
    candidate per (frame, bin), which stops repeated structures from
    stacking votes. A frame's score is its highest bin total, so it never
    exceeds the frame's total candidate mass and reaches it only when all
    candidates agree on one transform.
    """
    cfg = cfg or HoughConfig()
    diag = query_diagonal if query_diagonal is not None else FrameGeometry().diagonal
    # frame -> bin -> {query keypoint -> best score}; dicts keep insertion
    # order so bin totals accumulate in keypoint order, deterministically
    acc: dict[int, dict[tuple[int, int, int], dict[int, float]]] = {}
    for c in candidates:
        theta_rel = float(wrap_angle(c.qtheta - c.rtheta))
        log_ratio = c.qlog_scale - c.rlog_scale
        scale = 2.0 ** log_ratio
        cos_t, sin_t = math.cos(theta_rel), math.sin(theta_rel)
        tx = c.qx - scale * (cos_t * c.rx - sin_t * c.ry)
        ty = c.qy - scale * (sin_t * c.rx + cos_t * c.ry)
        trans_stat = (tx + ty) / (scale * diag)
        key = (
            _theta_bin(theta_rel, cfg.n_theta_bins),
            _clipped_bin(log_ratio, cfg.scale_range[0], cfg.scale_range[1], cfg.n_scale_bins),
            _clipped_bin(trans_stat, cfg.trans_range[0], cfg.trans_range[1], cfg.n_trans_bins),
        )
        per_bin = acc.setdefault(c.frame_id, {}).setdefault(key, {})
        if c.score > per_bin.get(c.query_index, 0.0):
            per_bin[c.query_index] = c.score
    return {
        frame: max(sum(best.values()) for best in bins.values())
        for frame, bins in acc.items()
    }


def query_score_mass(query: list[QueryPosting], index: LocalIndex) -> float:
    """Total idf-weighted self-similarity of the query postings (stopped
    words can never match and contribute nothing)."""
    mass = 0.0
    for posting in query:
        if 0 <= posting.word < index.n_words and not index.stop_mask[posting.word]:
            mass += float(index.idf[posting.word])
    return mass


def local_rank(records: list[LocalRecord], index: LocalIndex, bow: KMeansModel,
               pq: PQModel, tau_pq: float = 0.72, top_n: int = 100,
               hough: HoughConfig | None = None,
               query_geometry: FrameGeometry | None = None,
               table: PQScoreTable | None = None,
               asymmetric: bool = False) -> RankedList:
    """Full local query: encode, match, verify, aggregate to videos.

    A video scores the maximum of its frames' dominant-bin totals, divided
    by the query's own score mass so results land in [0, 1]. Ties order by
    ascending video id; the list truncates to top_n.
    """
    query = encode_query_local(records, bow, pq, keep_residuals=asymmetric)
    mass = query_score_mass(query, index)
    if mass <= 0.0:
        return RankedList(entries=[], channel=LOCAL)
    table = table or PQScoreTable(pq)
    candidates = collect_matches(query, index, table, tau_pq,
                                 asymmetric=asymmetric, pq_model=pq)
    diag = (query_geometry or index.geometry).diagonal
    frame_scores = hough_verify(candidates, hough, query_diagonal=diag)
    videos: dict[int, float] = {}
    for frame, score in frame_scores.items():
        if score <= 0.0:
            continue
        video = index.frame_to_video[frame]
        normalized = score / mass
        if normalized > videos.get(video, 0.0):
            videos[video] = normalized
    return rank_videos(videos, LOCAL, top_n)
