"""Volume time series, stimulus/response pairing, and voxel grid resampling.

A recording is an ordered series of 3D voxel grids, one per repetition time
(TR).  Each stimulus shown at TR ``t`` is paired with the element-wise mean
of the grids in the window ``[t, t + window_len - 1]``, which captures the
delayed peak of the blood-flow response.  Grids from different subjects are
brought to a common size by align-corners trilinear resampling, flattened
row-major (z fastest), and optionally standardized per record.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, ShapeError

STANDARDIZE_EPS = 1e-8


@dataclass
class VoxelGrid:
    """A single 3D voxel volume.

    ``values`` is flat, length x*y*z, row-major with z fastest.
    """

    dims: tuple[int, int, int]
    values: np.ndarray

    def __post_init__(self):
        x, y, z = self.dims
        if x < 1 or y < 1 or z < 1:
            raise ShapeError(f"grid dims must be positive, got {self.dims}")
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if self.values.size != x * y * z:
            raise ShapeError(
                f"grid has {self.values.size} values, dims {self.dims} need {x * y * z}"
            )
        if not np.all(np.isfinite(self.values)):
            raise DataError("grid contains non-finite values")

    def as_array(self) -> np.ndarray:
        """The volume as a (x, y, z) array view."""
        return self.values.reshape(self.dims)


@dataclass
class VolumeSeries:
    """One subject's 4D recording: a list of equally-shaped grids, one per TR."""

    subject_id: int
    tr_seconds: float
    grids: list[VoxelGrid]

    def __post_init__(self):
        if not self.grids:
            raise DataError(f"subject {self.subject_id}: volume series is empty")
        if self.tr_seconds <= 0:
            raise ConfigError(f"tr_seconds must be positive, got {self.tr_seconds}")
        dims = self.grids[0].dims
        for i, g in enumerate(self.grids):
            if g.dims != dims:
                raise ShapeError(
                    f"subject {self.subject_id}: grid {i} has dims {g.dims}, expected {dims}"
                )

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.grids[0].dims

    @property
    def n_trs(self) -> int:
        return len(self.grids)


@dataclass
class PairSet:
    """Aligned (stimulus embedding, voxel vector) records, stored columnar.

    Arrays are parallel: row i of each describes one record.  Voxel and
    embedding payloads are float32, matching the on-disk pack format.
    """

    embed_dim: int
    voxel_dim: int
    stimulus_ids: np.ndarray
    subject_ids: np.ndarray
    embeddings: np.ndarray
    voxels: np.ndarray
    standardized: bool = False

    def __post_init__(self):
        self.stimulus_ids = np.asarray(self.stimulus_ids, dtype=np.uint32)
        self.subject_ids = np.asarray(self.subject_ids, dtype=np.uint32)
        self.embeddings = np.asarray(self.embeddings, dtype=np.float32).reshape(
            len(self.stimulus_ids), self.embed_dim
        )
        self.voxels = np.asarray(self.voxels, dtype=np.float32).reshape(
            len(self.stimulus_ids), self.voxel_dim
        )
        if len(self.subject_ids) != len(self.stimulus_ids):
            raise ShapeError("stimulus_ids and subject_ids differ in length")
        keys = set(zip(self.stimulus_ids.tolist(), self.subject_ids.tolist()))
        if len(keys) != len(self.stimulus_ids):
            raise DataError("duplicate (stimulus_id, subject_id) record")

    def __len__(self) -> int:
        return len(self.stimulus_ids)

    def subset(self, mask: np.ndarray) -> "PairSet":
        return PairSet(
            embed_dim=self.embed_dim,
            voxel_dim=self.voxel_dim,
            stimulus_ids=self.stimulus_ids[mask],
            subject_ids=self.subject_ids[mask],
            embeddings=self.embeddings[mask],
            voxels=self.voxels[mask],
            standardized=self.standardized,
        )


@dataclass
class PairingConfig:
    """Controls pairing and normalization when building a PairSet."""

    window_len: int = 5
    target_dims: tuple[int, int, int] = (16, 16, 8)
    standardize: bool = True

    def __post_init__(self):
        if self.window_len < 1:
            raise ConfigError(f"window_len must be >= 1, got {self.window_len}")
        if any(d < 1 for d in self.target_dims):
            raise ConfigError(f"target_dims must be >= 1, got {self.target_dims}")


def pair_schedule(n_trs: int, window_len: int) -> list[tuple[int, tuple[int, int]]]:
    """Stimulus/window schedule for a series of ``n_trs`` volumes.

    The stimulus shown at TR t (1-based) is paired with the window
    [t, t + window_len - 1]; trailing stimuli whose windows would run past
    the series are dropped.

    Returns a list of (stimulus_t, (window_start, window_end)) in TR order.
    """
    if window_len < 1:
        raise ConfigError(f"window_len must be >= 1, got {window_len}")
    if n_trs < window_len:
        raise DataError(
            f"series of {n_trs} TRs is shorter than the {window_len}-TR window"
        )
    return [(t, (t, t + window_len - 1)) for t in range(1, n_trs - window_len + 2)]


def average_window(series: VolumeSeries, stimulus_t: int, window_len: int) -> VoxelGrid:
    """Element-wise mean of the grids in [stimulus_t, stimulus_t + window_len - 1]."""
    lo, hi = stimulus_t, stimulus_t + window_len - 1
    if stimulus_t < 1 or window_len < 1 or hi > series.n_trs:
        raise DataError(
            f"window [{lo}, {hi}] out of range for series with {series.n_trs} TRs"
        )
    stack = np.stack([series.grids[t - 1].values for t in range(lo, hi + 1)])
    return VoxelGrid(dims=series.dims, values=stack.mean(axis=0))


def _axis_coords(n_out: int, n_in: int) -> np.ndarray:
    # Align-corners: output corner indices land exactly on input corners.
    if n_out == 1:
        return np.zeros(1)
    if n_in == 1:
        return np.zeros(n_out)
    return np.arange(n_out) * ((n_in - 1) / (n_out - 1))


def resample_trilinear(grid: VoxelGrid, target_dims: tuple[int, int, int]) -> VoxelGrid:
    """Resample a grid to ``target_dims`` by align-corners trilinear interpolation.

    Corner voxels map exactly onto corner voxels, so resampling to the input
    dims is the identity and linear fields are reproduced exactly.  A
    singleton input axis replicates its value across the output axis.
    """
    if any(d < 1 for d in target_dims):
        raise ConfigError(f"target dims must be >= 1, got {target_dims}")
    if tuple(target_dims) == tuple(grid.dims):
        return VoxelGrid(dims=grid.dims, values=grid.values.copy())

    vol = grid.as_array()
    coords = [_axis_coords(t, s) for t, s in zip(target_dims, grid.dims)]
    lo = [np.minimum(np.floor(c).astype(np.intp), max(s - 2, 0)) for c, s in zip(coords, grid.dims)]
    hi = [np.minimum(l + 1, s - 1) for l, s in zip(lo, grid.dims)]
    frac = [c - l for c, l in zip(coords, lo)]

    out = np.zeros(target_dims)
    fx = frac[0][:, None, None]
    fy = frac[1][None, :, None]
    fz = frac[2][None, None, :]
    for cx, wx in ((lo[0], 1.0 - fx), (hi[0], fx)):
        for cy, wy in ((lo[1], 1.0 - fy), (hi[1], fy)):
            for cz, wz in ((lo[2], 1.0 - fz), (hi[2], fz)):
                out += wx * wy * wz * vol[np.ix_(cx, cy, cz)]
    return VoxelGrid(dims=tuple(target_dims), values=out.reshape(-1))


def standardize_rows(rows: np.ndarray) -> np.ndarray:
    """Zero-mean, unit-std each row (population std, eps-guarded)."""
    rows = np.asarray(rows, dtype=np.float64)
    mean = rows.mean(axis=-1, keepdims=True)
    std = rows.std(axis=-1, keepdims=True)
    return (rows - mean) / (std + STANDARDIZE_EPS)


def build_pairs(
    series_list: list[VolumeSeries],
    embeddings: list[tuple[int, np.ndarray]],
    config: PairingConfig,
) -> PairSet:
    """Build the full (embedding, voxel) record set for a list of subjects.

    For every subject and every scheduled stimulus: average the response
    window, resample to ``config.target_dims``, flatten row-major, and
    optionally standardize.  Every subject contributes one record per
    scheduled stimulus.
    """
    if not series_list:
        raise DataError("no volume series given")
    tr = series_list[0].tr_seconds
    for s in series_list:
        if s.tr_seconds != tr:
            raise DataError(
                f"subject {s.subject_id}: tr_seconds {s.tr_seconds} != {tr}"
            )

    embed_map = {int(sid): np.asarray(vec, dtype=np.float64) for sid, vec in embeddings}
    if not embed_map:
        raise DataError("no stimulus embeddings given")
    embed_dim = len(next(iter(embed_map.values())))
    voxel_dim = int(np.prod(config.target_dims))

    stim_ids, subj_ids, embeds, voxels = [], [], [], []
    for series in series_list:
        for stimulus_t, _window in pair_schedule(series.n_trs, config.window_len):
            if stimulus_t not in embed_map:
                raise DataError(
                    f"no embedding for scheduled stimulus {stimulus_t} "
                    f"(subject {series.subject_id})"
                )
            avg = average_window(series, stimulus_t, config.window_len)
            flat = resample_trilinear(avg, config.target_dims).values
            if config.standardize:
                flat = standardize_rows(flat)
            stim_ids.append(stimulus_t)
            subj_ids.append(series.subject_id)
            embeds.append(embed_map[stimulus_t])
            voxels.append(flat)

    return PairSet(
        embed_dim=embed_dim,
        voxel_dim=voxel_dim,
        stimulus_ids=np.array(stim_ids),
        subject_ids=np.array(subj_ids),
        embeddings=np.stack(embeds),
        voxels=np.stack(voxels),
        standardized=config.standardize,
    )


def split_train_test(
    pairs: PairSet, n_test_stimuli: int, seed: int
) -> tuple[PairSet, PairSet]:
    """Split by stimulus: the same test stimuli are held out for every subject.

    Selects ``n_test_stimuli`` distinct stimulus ids uniformly at random
    under ``seed``; all subjects' records for those ids form the test set.
    """
    distinct = np.unique(pairs.stimulus_ids)
    if n_test_stimuli >= len(distinct):
        raise ConfigError(
            f"n_test_stimuli={n_test_stimuli} must be < {len(distinct)} distinct stimuli"
        )
    if n_test_stimuli < 0:
        raise ConfigError("n_test_stimuli must be >= 0")
    rng = np.random.default_rng(seed)
    test_ids = rng.choice(distinct, size=n_test_stimuli, replace=False)
    test_mask = np.isin(pairs.stimulus_ids, test_ids)
    return pairs.subset(~test_mask), pairs.subset(test_mask)
