"""Retrieval metrics: average precision, mAP, and mAP@1.

Ground truth maps each query id to its set of relevant video ids. A run is
a mapping from query id to an ordered list of retrieved video ids (highest
confidence first). AP is the non-interpolated form: mean over relevant items
of precision at their ranks, with unretrieved relevant items contributing 0.
"""

import warnings

GroundTruth = dict[int, set[int]]
Run = dict[int, list[int]]


def average_precision(ranked: list[int], relevant: set[int]) -> float:
    """Non-interpolated AP of one ranked list against a relevant set.

    Raises:
        ValueError: empty relevant set (the caller should exclude the query).
    """
    if not relevant:
        raise ValueError("empty relevant set")
    hits = 0
    total = 0.0
    for rank, video in enumerate(ranked, start=1):
        if video in relevant:
            hits += 1
            total += hits / rank
    return total / len(relevant)


def mean_ap(run: Run, gt: GroundTruth, cutoff: int = 100) -> float:
    """Mean AP over ground-truth queries, each list truncated at `cutoff`.

    Queries with an empty relevant set are excluded with a warning; queries
    missing from the run score 0 with a warning.
    """
    ap_values = []
    for query, relevant in sorted(gt.items()):
        if not relevant:
            warnings.warn(f"query {query} has no relevant videos; excluded", RuntimeWarning)
            continue
        if query not in run:
            warnings.warn(f"query {query} missing from run; scored 0", RuntimeWarning)
            ap_values.append(0.0)
            continue
        ap_values.append(average_precision(run[query][:cutoff], relevant))
    if not ap_values:
        raise ValueError("no evaluable queries")
    return sum(ap_values) / len(ap_values)


def map_at_1(run: Run, gt: GroundTruth) -> float:
    """Fraction of queries whose top-ranked video is relevant."""
    hits = 0
    count = 0
    for query, relevant in sorted(gt.items()):
        if not relevant:
            continue
        count += 1
        ranked = run.get(query, [])
        if ranked and ranked[0] in relevant:
            hits += 1
    if count == 0:
        raise ValueError("no evaluable queries")
    return hits / count
