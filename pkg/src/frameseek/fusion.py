"""Late fusion of local and global ranked lists.

Each channel's ranked list is normalized per query by subtracting an
adaptively chosen settling score: the score at the first position where the
list has stopped dropping materially over a warmup-length stretch. Videos
left at or below zero are dropped, and the two normalized lists merge by
per-video maximum.
"""

from dataclasses import dataclass

import numpy as np

LOCAL = "local"
GLOBAL = "global"
FUSED = "fused"


@dataclass
class FusionConfig:
    epsilon: float = 0.01
    warmup: int = 10

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.warmup < 1:
            raise ValueError("warmup must be at least 1")


@dataclass
class RankedList:
    """Descending (video_id, score) pairs for one query and channel."""

    entries: list[tuple[int, float]]
    channel: str = LOCAL
    normalized: bool = False

    def __post_init__(self):
        scores = [s for _, s in self.entries]
        if any(b > a for a, b in zip(scores, scores[1:])):
            raise ValueError("scores must be non-increasing")
        ids = [v for v, _ in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate video_id in ranked list")

    def __len__(self) -> int:
        return len(self.entries)

    def scores(self) -> np.ndarray:
        return np.array([s for _, s in self.entries], dtype=np.float64)

    def video_ids(self) -> list[int]:
        return [v for v, _ in self.entries]


def rank_videos(scores_by_video: dict[int, float], channel: str, top_n: int) -> RankedList:
    """Build a ranked list from per-video scores: descending score, ties by
    ascending video id, truncated to top_n."""
    items = sorted(scores_by_video.items(), key=lambda kv: (-kv[1], kv[0]))
    return RankedList(entries=items[:top_n], channel=channel)


def settling_point(ranked: RankedList, cfg: FusionConfig | None = None) -> tuple[int, float]:
    """Index and score where a ranked list settles.

    Returns the smallest index t >= warmup at which the total score drop
    across the trailing warmup-length window, score[t - warmup] - score[t],
    has fallen below epsilon / 5: past that point consecutive gaps have
    stayed negligible for a full warmup stretch. When no index qualifies
    (including lists shorter than warmup + 1), falls back to the last index,
    which matches plain last-element normalization.
    """
    cfg = cfg or FusionConfig()
    if not ranked.entries:
        raise ValueError("empty ranked list has no settling point")
    s = ranked.scores()
    n = s.shape[0]
    for t in range(cfg.warmup, n):
        if s[t - cfg.warmup] - s[t] < cfg.epsilon / 5.0:
            return t, float(s[t])
    return n - 1, float(s[n - 1])


def normalize_list(ranked: RankedList, cfg: FusionConfig | None = None) -> RankedList:
    """Subtract the settling score; drop entries left at or below zero."""
    cfg = cfg or FusionConfig()
    _, settle = settling_point(ranked, cfg)
    entries = [(v, s - settle) for v, s in ranked.entries if s - settle > 0]
    return RankedList(entries=entries, channel=ranked.channel, normalized=True)


def fuse(local: RankedList, global_: RankedList, cfg: FusionConfig | None = None,
         top_n: int | None = None) -> RankedList:
    """Merge two channel lists by per-video maximum of normalized scores.

    Lists not yet normalized are normalized here first (empty lists pass
    through). A video absent from one channel contributes 0 from it.
    """
    cfg = cfg or FusionConfig()
    merged: dict[int, float] = {}
    for ranked in (local, global_):
        if ranked.entries and not ranked.normalized:
            ranked = normalize_list(ranked, cfg)
        for video, score in ranked.entries:
            if score > merged.get(video, 0.0):
                merged[video] = score
    items = sorted(merged.items(), key=lambda kv: (-kv[1], kv[0]))
    if top_n is not None:
        items = items[:top_n]
    return RankedList(entries=items, channel=FUSED, normalized=True)
