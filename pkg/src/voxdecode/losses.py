"""Contrastive objectives aligning brain embeddings with stimulus embeddings.

Three objectives are provided, each returning (loss, gradient) pairs with
analytic gradients on the brain side:

* ``clip_loss`` -- symmetric bidirectional InfoNCE over cosine-similarity
  logits, averaged with a 1/(2N) prefactor.  Gradients are taken with
  respect to the raw, pre-normalization brain rows.
* ``bimixco_loss`` -- bidirectional InfoNCE on mixup-blended inputs.  The
  forward direction weights each row's positive by its mixing coefficient
  and its partner's target by the complement; the backward direction sums
  over each target column's contributors.  Written as a raw sum (no 1/(2N)).
* ``softclip_loss`` -- cross-entropy against soft labels given by the
  within-batch target-target similarity softmax, also a raw sum.

``bimixco_loss`` and ``softclip_loss`` take rows that are already
L2-normalized (their gradients are with respect to those unit rows);
``clip_loss`` normalizes internally.  Logit matrices are max-shifted
before exponentiation, so small temperatures are safe in double precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError, DataError, DegenerateInputError, ShapeError

NORM_TOLERANCE = 1e-6


@dataclass
class LossConfig:
    """Temperature, mixup concentration, and normalization checking."""

    tau: float = 0.01
    alpha: float = 0.15
    normalize: bool = True

    def __post_init__(self):
        if self.tau <= 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if self.alpha <= 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")


@dataclass
class MixSpec:
    """Per-row mixup coefficients and partner indices (0-based)."""

    lambdas: np.ndarray
    partners: np.ndarray

    def __post_init__(self):
        self.lambdas = np.asarray(self.lambdas, dtype=np.float64)
        self.partners = np.asarray(self.partners, dtype=np.intp)
        if self.lambdas.shape != self.partners.shape or self.lambdas.ndim != 1:
            raise ShapeError("lambdas and partners must be equal-length vectors")
        n = len(self.lambdas)
        if np.any((self.lambdas < 0) | (self.lambdas > 1)):
            raise DataError("mixing coefficients must lie in [0, 1]")
        if np.any((self.partners < 0) | (self.partners >= n)):
            raise DataError("partner indices out of range")

    def __len__(self) -> int:
        return len(self.lambdas)


def cosine_sim(x: np.ndarray, y: np.ndarray) -> float:
    """Cosine of the angle between two vectors: x.y / (|x| |y|)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ShapeError(f"vectors must share one shape, got {x.shape} and {y.shape}")
    nx = np.linalg.norm(x)
    ny = np.linalg.norm(y)
    if nx == 0.0 or ny == 0.0:
        raise DegenerateInputError("cosine similarity of a zero vector is undefined")
    return float(x @ y / (nx * ny))


def _as_batch(rows: np.ndarray, name: str) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2:
        raise ShapeError(f"{name} must be a (batch, dim) array")
    if rows.shape[0] == 0:
        raise DataError(f"{name} is empty")
    if not np.all(np.isfinite(rows)):
        raise DataError(f"{name} contains non-finite values")
    return rows


def _require_unit_rows(rows: np.ndarray, name: str):
    norms = np.linalg.norm(rows, axis=1)
    bad = np.abs(norms - 1.0) > NORM_TOLERANCE
    if np.any(bad):
        raise ContractError(
            f"{name} rows must be unit-normalized; row {int(np.argmax(bad))} "
            f"has norm {norms[np.argmax(bad)]:.6g}"
        )


def normalize_rows(rows: np.ndarray) -> np.ndarray:
    """L2-normalize each row; zero rows are rejected."""
    rows = _as_batch(rows, "rows")
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise DegenerateInputError("cannot normalize a zero row")
    return rows / norms


def normalize_rows_backward(
    raw: np.ndarray, grad_normalized: np.ndarray
) -> np.ndarray:
    """Chain a gradient w.r.t. unit rows back to the raw rows.

    For u = r/|r|:  dL/dr = (g - (u.g) u) / |r|.
    """
    raw = np.asarray(raw, dtype=np.float64)
    g = np.asarray(grad_normalized, dtype=np.float64)
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise DegenerateInputError("cannot normalize a zero row")
    unit = raw / norms
    return (g - (unit * g).sum(axis=1, keepdims=True) * unit) / norms


def _row_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _row_log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def clip_loss(
    image_embeds: np.ndarray, brain_embeds: np.ndarray, tau: float
) -> tuple[float, np.ndarray]:
    """Bidirectional InfoNCE over cosine logits with the 1/(2N) prefactor.

    Both batches are normalized internally; the returned gradient is with
    respect to the raw ``brain_embeds`` rows.
    """
    if tau <= 0:
        raise ConfigError(f"tau must be positive, got {tau}")
    img = _as_batch(image_embeds, "image_embeds")
    brain = _as_batch(brain_embeds, "brain_embeds")
    if img.shape != brain.shape:
        raise ShapeError(f"batch shapes differ: {img.shape} vs {brain.shape}")
    n = img.shape[0]

    img_u = normalize_rows(img)
    brain_u = normalize_rows(brain)
    z = (img_u @ brain_u.T) / tau  # z[i, j] = cos(image_i, brain_j) / tau

    log_p_rows = _row_log_softmax(z)
    log_p_cols = _row_log_softmax(z.T).T
    diag = np.arange(n)
    loss = -(log_p_rows[diag, diag].sum() + log_p_cols[diag, diag].sum()) / (2.0 * n)

    p_rows = np.exp(log_p_rows)
    p_cols = np.exp(log_p_cols)
    eye = np.eye(n)
    dz = (p_rows - eye + p_cols - eye) / (2.0 * n * tau)
    grad_unit = dz.T @ img_u
    return float(loss), normalize_rows_backward(brain, grad_unit)


def sample_mixspec(n: int, alpha: float, seed: int) -> MixSpec:
    """Beta(alpha, alpha) coefficients and uniform partners (self excluded).

    With a single-row batch the only possible partner is the row itself.
    """
    if n < 1:
        raise ConfigError("batch size must be >= 1")
    if alpha <= 0:
        raise ConfigError("alpha must be positive")
    rng = np.random.default_rng(seed)
    lambdas = rng.beta(alpha, alpha, size=n)
    if n == 1:
        return MixSpec(lambdas=lambdas, partners=np.zeros(1, dtype=np.intp))
    partners = rng.integers(0, n, size=n)
    while True:
        collisions = partners == np.arange(n)
        if not collisions.any():
            break
        partners[collisions] = rng.integers(0, n, size=int(collisions.sum()))
    return MixSpec(lambdas=lambdas, partners=partners)


def mixco_mix(voxels: np.ndarray, spec: MixSpec) -> np.ndarray:
    """Blend row i with row partners[i]: lam*x_i + (1-lam)*x_partner."""
    x = np.asarray(voxels, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != len(spec):
        raise ShapeError(f"batch of {x.shape} does not match mix spec of {len(spec)}")
    lam = spec.lambdas[:, None]
    return lam * x + (1.0 - lam) * x[spec.partners]


def _mix_weights(spec: MixSpec) -> np.ndarray:
    """Soft positive-pair weights: lam_i at (i, i), 1-lam_i at (i, k_i).

    Both loss directions read the same matrix; they differ only in which
    axis the softmax runs over.
    """
    n = len(spec)
    w = np.zeros((n, n))
    idx = np.arange(n)
    w[idx, idx] = spec.lambdas
    np.add.at(w, (idx, spec.partners), 1.0 - spec.lambdas)
    return w


def bimixco_loss(
    mixed_brain: np.ndarray,
    targets: np.ndarray,
    spec: MixSpec,
    tau: float,
    check_normalized: bool = True,
) -> tuple[float, np.ndarray]:
    """Bidirectional mixup InfoNCE on unit rows; gradient w.r.t. ``mixed_brain``.

    Row i of ``mixed_brain`` is the embedding of the blended input
    lam_i*x_i + (1-lam_i)*x_{k_i}; the loss credits target i with weight
    lam_i and target k_i with weight 1-lam_i, in both softmax directions.
    At lam == 1 this reduces to the plain bidirectional InfoNCE sum.
    """
    if tau <= 0:
        raise ConfigError(f"tau must be positive, got {tau}")
    p = _as_batch(mixed_brain, "mixed_brain")
    t = _as_batch(targets, "targets")
    if p.shape != t.shape:
        raise ShapeError(f"batch shapes differ: {p.shape} vs {t.shape}")
    if len(spec) != p.shape[0]:
        raise ShapeError("mix spec length does not match batch")
    if check_normalized:
        _require_unit_rows(p, "mixed_brain")
        _require_unit_rows(t, "targets")

    z = (p @ t.T) / tau
    log_rows = _row_log_softmax(z)      # softmax over targets for each brain row
    log_cols = _row_log_softmax(z.T).T  # softmax over brain rows for each target
    w = _mix_weights(spec)

    loss = -np.sum(w * (log_rows + log_cols))

    # d(-sum w log softmax)/dz: softmax scaled by the direction's weight mass.
    row_mass = w.sum(axis=1, keepdims=True)  # == 1 per row
    col_mass = w.sum(axis=0, keepdims=True)  # lam_j + sum of partner credits
    dz = (np.exp(log_rows) * row_mass - w) + (np.exp(log_cols) * col_mass - w)
    grad_p = (dz @ t) / tau
    return float(loss), grad_p


def softclip_loss(
    brain: np.ndarray,
    targets: np.ndarray,
    tau: float,
    bidirectional: bool = True,
    check_normalized: bool = True,
) -> tuple[float, np.ndarray]:
    """Soft-label contrastive loss; gradient w.r.t. unit ``brain`` rows.

    Labels are the softmax of within-batch target-target similarities, so a
    brain row is pulled toward every target in proportion to how similar
    that target is to its own.  The symmetric (column) direction is added
    unless ``bidirectional`` is False.
    """
    if tau <= 0:
        raise ConfigError(f"tau must be positive, got {tau}")
    p = _as_batch(brain, "brain")
    t = _as_batch(targets, "targets")
    if p.shape != t.shape:
        raise ShapeError(f"batch shapes differ: {p.shape} vs {t.shape}")
    if check_normalized:
        _require_unit_rows(p, "brain")
        _require_unit_rows(t, "targets")

    z = (p @ t.T) / tau
    labels = _row_softmax((t @ t.T) / tau)
    log_rows = _row_log_softmax(z)
    loss = -np.sum(labels * log_rows)
    dz = np.exp(log_rows) - labels

    if bidirectional:
        labels_cols = labels.T  # target-target similarities are symmetric
        log_cols = _row_log_softmax(z.T).T
        loss -= np.sum(labels_cols * log_cols)
        dz = dz + (np.exp(log_cols) - labels_cols)

    grad_p = (dz @ t) / tau
    return float(loss), grad_p


def soft_label_entropy(targets: np.ndarray, tau: float, bidirectional: bool = True) -> float:
    """Entropy of the soft labels; the attainable floor of softclip_loss."""
    t = _as_batch(targets, "targets")
    labels = _row_softmax((t @ t.T) / tau)
    log_labels = _row_log_softmax((t @ t.T) / tau)
    h = -np.sum(labels * log_labels)
    return float(2.0 * h if bidirectional else h)
