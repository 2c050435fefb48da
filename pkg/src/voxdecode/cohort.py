"""Synthetic subjects with a controllable amount of cross-subject similarity.

Each subject is a linear measurement operator from stimulus-embedding space
to voxel space plus Gaussian trial noise.  The operator blends one cohort-wide
shared component with a per-subject individual component:

    operator = sqrt(shared_frac) * A_shared + sqrt(1 - shared_frac) * A_indiv

so shared_frac=1 gives identical subjects and shared_frac=0 gives unrelated
ones, with response variance independent of the blend.  A single decoder can
generalize across such subjects exactly to the extent a shared component
exists, which is the hypothesis the cohort experiments probe.

All draws are keyed by (seed, ids), so generation order does not matter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError

# Stream tags to keep per-purpose RNG streams disjoint under one seed.
_STREAM_SHARED = 0xA11CE
_STREAM_SUBJECT = 0xB0B
_STREAM_NOISE = 0xD1CE


@dataclass
class SubjectModel:
    """A subject's voxel response model: linear operator plus noise scale."""

    subject_id: int
    operator: np.ndarray  # (voxel_dim, latent_dim)
    noise_sigma: float

    def __post_init__(self):
        self.operator = np.asarray(self.operator, dtype=np.float64)
        if self.operator.ndim != 2:
            raise ShapeError("operator must be a 2-D matrix")
        if not np.all(np.isfinite(self.operator)):
            raise ShapeError("operator contains non-finite entries")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")

    @property
    def voxel_dim(self) -> int:
        return self.operator.shape[0]

    @property
    def latent_dim(self) -> int:
        return self.operator.shape[1]


@dataclass
class CohortConfig:
    n_subjects: int
    voxel_dim: int
    latent_dim: int
    shared_frac: float
    noise_sigma: float
    seed: int

    def __post_init__(self):
        if self.n_subjects < 1:
            raise ConfigError("n_subjects must be >= 1")
        if self.voxel_dim < 1 or self.latent_dim < 1:
            raise ConfigError("voxel_dim and latent_dim must be >= 1")
        if not 0.0 <= self.shared_frac <= 1.0:
            raise ConfigError(f"shared_frac must be in [0, 1], got {self.shared_frac}")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")


def gen_stimuli(n: int, embed_dim: int, seed: int) -> list[tuple[int, np.ndarray]]:
    """n unit-norm embedding vectors with ids 1..n, deterministic under seed."""
    if n < 1 or embed_dim < 1:
        raise ConfigError("n and embed_dim must be >= 1")
    rng = np.random.default_rng(seed)
    vecs = rng.standard_normal((n, embed_dim))
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    return [(i + 1, vecs[i]) for i in range(n)]


def _operator_entries(rng: np.random.Generator, voxel_dim: int, latent_dim: int) -> np.ndarray:
    # 1/sqrt(latent_dim) entry scale keeps per-voxel response variance O(1).
    return rng.standard_normal((voxel_dim, latent_dim)) / np.sqrt(latent_dim)


def gen_cohort(config: CohortConfig) -> list[SubjectModel]:
    """Draw one shared operator and per-subject individual operators, then blend."""
    shared = _operator_entries(
        np.random.default_rng([_STREAM_SHARED, config.seed]),
        config.voxel_dim,
        config.latent_dim,
    )
    w_shared = np.sqrt(config.shared_frac)
    w_indiv = np.sqrt(1.0 - config.shared_frac)
    subjects = []
    for subject_id in range(1, config.n_subjects + 1):
        indiv = _operator_entries(
            np.random.default_rng([_STREAM_SUBJECT, config.seed, subject_id]),
            config.voxel_dim,
            config.latent_dim,
        )
        subjects.append(
            SubjectModel(
                subject_id=subject_id,
                operator=w_shared * shared + w_indiv * indiv,
                noise_sigma=config.noise_sigma,
            )
        )
    return subjects


def gen_graded_cohort(
    n_candidates: int,
    voxel_dim: int,
    latent_dim: int,
    target_weights: np.ndarray,
    noise_sigma: float,
    seed: int,
) -> tuple[SubjectModel, list[SubjectModel]]:
    """A target subject plus candidates blending toward the target's operator.

    Candidate c's operator is sqrt(w_c) * target_operator
    + sqrt(1 - w_c) * individual, so w_c directly controls how similar
    candidate c's responses are to the target's.  Candidate ids are 1..n;
    the target gets id 0.
    """
    target_weights = np.asarray(target_weights, dtype=np.float64)
    if len(target_weights) != n_candidates:
        raise ConfigError("need one target weight per candidate")
    if np.any((target_weights < 0) | (target_weights > 1)):
        raise ConfigError("target weights must be in [0, 1]")
    target_op = _operator_entries(
        np.random.default_rng([_STREAM_SHARED, seed]), voxel_dim, latent_dim
    )
    target = SubjectModel(subject_id=0, operator=target_op, noise_sigma=noise_sigma)
    candidates = []
    for c in range(1, n_candidates + 1):
        indiv = _operator_entries(
            np.random.default_rng([_STREAM_SUBJECT, seed, c]), voxel_dim, latent_dim
        )
        w = target_weights[c - 1]
        candidates.append(
            SubjectModel(
                subject_id=c,
                operator=np.sqrt(w) * target_op + np.sqrt(1.0 - w) * indiv,
                noise_sigma=noise_sigma,
            )
        )
    return target, candidates


def simulate_response(
    subject: SubjectModel, embedding: np.ndarray, noise_seed: int
) -> np.ndarray:
    """operator @ embedding plus N(0, sigma^2) trial noise under noise_seed."""
    embedding = np.asarray(embedding, dtype=np.float64)
    if embedding.shape != (subject.latent_dim,):
        raise ShapeError(
            f"embedding length {embedding.shape} does not match latent_dim "
            f"{subject.latent_dim}"
        )
    response = subject.operator @ embedding
    if subject.noise_sigma > 0:
        rng = np.random.default_rng([_STREAM_NOISE, noise_seed])
        response = response + subject.noise_sigma * rng.standard_normal(
            subject.voxel_dim
        )
    return response


def response_seed(base_seed: int, subject_id: int, stimulus_id: int) -> int:
    """Stable per-(subject, stimulus) noise seed, order-independent."""
    return int(
        np.random.SeedSequence([base_seed, subject_id, stimulus_id]).generate_state(1)[0]
    )
