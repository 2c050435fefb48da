"""Top-k retrieval of stimuli from brain embeddings over a gallery.

Queries are ranked against a gallery of unit-normalized stimulus embeddings
by cosine similarity (a dot product after construction-time normalization).
Exact similarity ties are broken by ascending stimulus id so reports are
reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, DegenerateInputError, ShapeError


class Gallery:
    """Candidate stimuli: unique ids with unit-normalized embedding rows."""

    def __init__(self, ids, embeddings):
        self.ids = np.asarray(ids, dtype=np.int64)
        embeddings = np.asarray(embeddings, dtype=np.float64)
        if embeddings.ndim != 2 or embeddings.shape[0] != len(self.ids):
            raise ShapeError("need one embedding row per id")
        if len(np.unique(self.ids)) != len(self.ids):
            raise DataError("gallery ids must be unique")
        norms = np.linalg.norm(embeddings, axis=1, keepdims=True)
        if np.any(norms == 0.0):
            raise DegenerateInputError("gallery rows must be nonzero")
        self.embeddings = embeddings / norms

    def __len__(self) -> int:
        return len(self.ids)

    def subset(self, ids) -> "Gallery":
        wanted = np.asarray(ids, dtype=np.int64)
        pos = {int(g): i for i, g in enumerate(self.ids)}
        missing = [int(i) for i in wanted if int(i) not in pos]
        if missing:
            raise DataError(f"ids not in gallery: {missing[:5]}")
        rows = [pos[int(i)] for i in wanted]
        return Gallery(self.ids[rows], self.embeddings[rows])


@dataclass
class RetrievalReport:
    top1: float
    top3: float
    per_query_ranks: list[int]
    topk: dict[int, float] = field(default_factory=dict)
    trials: list[float] | None = None


def _scores(query: np.ndarray, gallery: Gallery) -> np.ndarray:
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    if q.shape[0] != gallery.embeddings.shape[1]:
        raise ShapeError(
            f"query dim {q.shape[0]} != gallery dim {gallery.embeddings.shape[1]}"
        )
    norm = np.linalg.norm(q)
    if norm == 0.0:
        raise DegenerateInputError("query has zero norm")
    return gallery.embeddings @ (q / norm)


def retrieve_topk(query: np.ndarray, gallery: Gallery, k: int) -> list[int]:
    """Ids of the k most cosine-similar gallery rows, best first."""
    if k < 1 or k > len(gallery):
        raise ConfigError(f"k={k} out of range for gallery of {len(gallery)}")
    scores = _scores(query, gallery)
    order = np.lexsort((gallery.ids, -scores))
    return [int(i) for i in gallery.ids[order[:k]]]


def _true_ranks(queries: np.ndarray, true_ids: np.ndarray, gallery: Gallery) -> np.ndarray:
    """Tie-broken rank (1-based) of each query's true id in the gallery."""
    pos = {int(g): i for i, g in enumerate(gallery.ids)}
    try:
        true_rows = np.array([pos[int(t)] for t in true_ids])
    except KeyError as exc:
        raise DataError(f"true id {exc} not present in gallery") from None

    norms = np.linalg.norm(queries, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise DegenerateInputError("query has zero norm")
    scores = (queries / norms) @ gallery.embeddings.T

    idx = np.arange(len(true_ids))
    true_score = scores[idx, true_rows]
    true_gid = gallery.ids[true_rows]
    better = (scores > true_score[:, None]) | (
        (scores == true_score[:, None]) & (gallery.ids[None, :] < true_gid[:, None])
    )
    return better.sum(axis=1) + 1


def eval_topk(
    queries: np.ndarray,
    true_ids: np.ndarray,
    gallery: Gallery,
    ks: tuple[int, ...] = (1, 3),
) -> RetrievalReport:
    """Accuracy at each cutoff in ks: fraction of true ids ranked within k."""
    queries = np.asarray(queries, dtype=np.float64)
    true_ids = np.asarray(true_ids, dtype=np.int64)
    if queries.ndim != 2 or queries.shape[0] != len(true_ids):
        raise ShapeError("need one query row per true id")
    ranks = _true_ranks(queries, true_ids, gallery)
    topk = {int(k): float(np.mean(ranks <= k)) for k in ks}
    return RetrievalReport(
        top1=topk.get(1, float(np.mean(ranks <= 1))),
        top3=topk.get(3, float(np.mean(ranks <= 3))),
        per_query_ranks=[int(r) for r in ranks],
        topk=topk,
    )


def eval_subsample(
    queries: np.ndarray,
    true_ids: np.ndarray,
    gallery: Gallery,
    subset: int = 300,
    trials: int = 30,
    k: int = 1,
    seed: int = 0,
) -> tuple[float, list[float]]:
    """Repeated evaluation on random subsets of the query/gallery pairs.

    Each trial draws ``subset`` query indices without replacement and ranks
    those queries against the gallery restricted to the drawn stimuli.
    Returns the mean top-k accuracy over trials and the per-trial values.
    """
    queries = np.asarray(queries, dtype=np.float64)
    true_ids = np.asarray(true_ids, dtype=np.int64)
    n_total = len(true_ids)
    if subset < 1 or subset > n_total:
        raise ConfigError(f"subset={subset} out of range for {n_total} pairs")
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    accs = []
    for _ in range(trials):
        chosen = rng.choice(n_total, size=subset, replace=False)
        trial_gallery = gallery.subset(np.unique(true_ids[chosen]))
        report = eval_topk(queries[chosen], true_ids[chosen], trial_gallery, ks=(k,))
        accs.append(report.topk[k])
    return float(np.mean(accs)), accs
