"""Rank-credit similarity between subjects' voxel responses.

For every shared stimulus, candidates are ranked by the cosine similarity
of their response to the target's, and each of the top-k earns one credit.
Accumulated credits are robust to single-stimulus outliers, unlike a plain
mean of similarities (which is also provided, as a non-default alternative).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .losses import cosine_sim

DEFAULT_TOP_K = 10


@dataclass
class SubjectResponses:
    """One subject's flattened voxel responses keyed by stimulus id."""

    subject_id: int
    by_stimulus: dict[int, np.ndarray]

    def __post_init__(self):
        if not self.by_stimulus:
            raise DataError(f"subject {self.subject_id} has no responses")
        lengths = {len(v) for v in self.by_stimulus.values()}
        if len(lengths) != 1:
            raise DataError(
                f"subject {self.subject_id}: responses have mixed lengths {sorted(lengths)}"
            )

    @property
    def stimulus_ids(self) -> set[int]:
        return set(self.by_stimulus)


@dataclass
class RankCreditTable:
    """Accumulated top-k rank credits of each candidate toward one target."""

    target_id: int
    credits: dict[int, int]
    n_images: int
    top_k: int = DEFAULT_TOP_K


def sim_score(v_a: np.ndarray, v_b: np.ndarray) -> float:
    """Cosine similarity between two voxel responses."""
    return cosine_sim(v_a, v_b)


def rank_credit(
    target: SubjectResponses,
    candidates: list[SubjectResponses],
    top_k: int = DEFAULT_TOP_K,
) -> RankCreditTable:
    """Award one credit per stimulus to each of the top-k most similar candidates.

    Per-stimulus ranking is by descending similarity to the target's
    response, ties broken by ascending subject id.
    """
    if not candidates:
        raise DataError("no candidate subjects")
    if top_k < 1:
        raise ConfigError("top_k must be >= 1")
    cand_ids = [c.subject_id for c in candidates]
    if len(set(cand_ids)) != len(cand_ids):
        raise DataError("candidate subject ids must be unique")
    if target.subject_id in set(cand_ids):
        raise DataError(f"target subject {target.subject_id} is among the candidates")
    shared = target.stimulus_ids
    for c in candidates:
        if c.stimulus_ids != shared:
            raise DataError(
                f"subject {c.subject_id} does not share the target's stimulus set"
            )

    k = min(top_k, len(candidates))
    credits = {cid: 0 for cid in cand_ids}
    order_ids = np.array(cand_ids)
    for stimulus_id in sorted(shared):
        v_t = target.by_stimulus[stimulus_id]
        scores = np.array(
            [sim_score(v_t, c.by_stimulus[stimulus_id]) for c in candidates]
        )
        ranked = np.lexsort((order_ids, -scores))
        for pos in ranked[:k]:
            credits[int(order_ids[pos])] += 1
    return RankCreditTable(
        target_id=target.subject_id,
        credits=credits,
        n_images=len(shared),
        top_k=top_k,
    )


def mean_similarity(
    target: SubjectResponses, candidates: list[SubjectResponses]
) -> dict[int, float]:
    """Per-candidate mean cosine similarity over the shared stimuli."""
    shared = sorted(target.stimulus_ids)
    out = {}
    for c in candidates:
        if c.stimulus_ids != target.stimulus_ids:
            raise DataError(
                f"subject {c.subject_id} does not share the target's stimulus set"
            )
        out[c.subject_id] = float(
            np.mean([sim_score(target.by_stimulus[s], c.by_stimulus[s]) for s in shared])
        )
    return out


def select_subjects(table: RankCreditTable, n: int, mode: str) -> list[int]:
    """The n most or least credited subject ids, ties by ascending id."""
    if mode not in ("most_similar", "least_similar"):
        raise ConfigError(f"unknown selection mode {mode!r}")
    if n < 0 or n > len(table.credits):
        raise ConfigError(f"n={n} out of range for {len(table.credits)} candidates")
    sign = -1 if mode == "most_similar" else 1
    ranked = sorted(table.credits.items(), key=lambda kv: (sign * kv[1], kv[0]))
    return [cid for cid, _ in ranked[:n]]


def responses_from_pairs(pairs) -> dict[int, SubjectResponses]:
    """Group a PairSet's voxel rows into per-subject response maps."""
    out: dict[int, dict[int, np.ndarray]] = {}
    for i in range(len(pairs)):
        sid = int(pairs.subject_ids[i])
        out.setdefault(sid, {})[int(pairs.stimulus_ids[i])] = pairs.voxels[i].astype(
            np.float64
        )
    return {
        sid: SubjectResponses(subject_id=sid, by_stimulus=resp)
        for sid, resp in out.items()
    }
