"""Binary file formats: NDVOL volumes, NDPK pair packs, NDWT checkpoints.

All integers are unsigned 32-bit little-endian, all floats IEEE-754
binary32 little-endian.

NDVOL (raw volume series)::

    "NDVL" | u32 version=1 | u32 subject_id | u32 x | u32 y | u32 z
    | u32 n_trs | f32 tr_seconds | n_trs*x*y*z f32 (row-major, z fastest)

NDPK (pair pack; also carries bare stimulus embeddings with voxel_dim=0)::

    "NDPK" | u32 version=1 | u32 embed_dim | u32 voxel_dim | u32 n_records
    | u8 standardize_flag
    | per record: u32 stimulus_id | u32 subject_id | embed_dim f32 | voxel_dim f32

NDWT (encoder checkpoint)::

    "NDWT" | u32 version=1 | u32 n_layers
    | per layer: u32 rows | u32 cols | rows*cols f32 weights (row-major)
    | rows f32 biases
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .volume import PairSet, VolumeSeries, VoxelGrid

NDVOL_MAGIC = b"NDVL"
NDPK_MAGIC = b"NDPK"
NDWT_MAGIC = b"NDWT"
FORMAT_VERSION = 1


class _Reader:
    """Sequential little-endian reader that reports byte offsets on failure."""

    def __init__(self, data: bytes, path: str):
        self.data = data
        self.path = path
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(
                f"{self.path}: truncated, wanted {n} bytes", offset=self.pos
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u8(self) -> int:
        return self.take(1)[0]

    def f32(self) -> float:
        return struct.unpack("<f", self.take(4))[0]

    def f32_array(self, n: int) -> np.ndarray:
        return np.frombuffer(self.take(4 * n), dtype="<f4").copy()

    def expect_magic(self, magic: bytes):
        got = self.take(len(magic))
        if got != magic:
            raise FormatError(
                f"{self.path}: bad magic {got!r}, expected {magic!r}", offset=0
            )

    def expect_version(self, version: int):
        at = self.pos
        got = self.u32()
        if got != version:
            raise FormatError(
                f"{self.path}: unsupported version {got}", offset=at
            )

    def expect_eof(self):
        if self.pos != len(self.data):
            raise FormatError(
                f"{self.path}: {len(self.data) - self.pos} trailing bytes",
                offset=self.pos,
            )


def write_ndvol(path: str | Path, series: VolumeSeries) -> None:
    x, y, z = series.dims
    parts = [
        NDVOL_MAGIC,
        struct.pack(
            "<IIIIII", FORMAT_VERSION, series.subject_id, x, y, z, series.n_trs
        ),
        struct.pack("<f", series.tr_seconds),
    ]
    for grid in series.grids:
        parts.append(grid.values.astype("<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_ndvol(path: str | Path) -> VolumeSeries:
    r = _Reader(Path(path).read_bytes(), str(path))
    r.expect_magic(NDVOL_MAGIC)
    r.expect_version(FORMAT_VERSION)
    subject_id = r.u32()
    dims = (r.u32(), r.u32(), r.u32())
    n_trs = r.u32()
    tr_seconds = r.f32()
    voxels_per_tr = dims[0] * dims[1] * dims[2]
    grids = [
        VoxelGrid(dims=dims, values=r.f32_array(voxels_per_tr).astype(np.float64))
        for _ in range(n_trs)
    ]
    r.expect_eof()
    return VolumeSeries(subject_id=subject_id, tr_seconds=tr_seconds, grids=grids)


def write_ndpk(path: str | Path, pairs: PairSet) -> None:
    parts = [
        NDPK_MAGIC,
        struct.pack(
            "<IIIIB",
            FORMAT_VERSION,
            pairs.embed_dim,
            pairs.voxel_dim,
            len(pairs),
            1 if pairs.standardized else 0,
        ),
    ]
    embeds = pairs.embeddings.astype("<f4")
    voxels = pairs.voxels.astype("<f4")
    for i in range(len(pairs)):
        parts.append(
            struct.pack("<II", int(pairs.stimulus_ids[i]), int(pairs.subject_ids[i]))
        )
        parts.append(embeds[i].tobytes())
        parts.append(voxels[i].tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_ndpk(path: str | Path) -> PairSet:
    r = _Reader(Path(path).read_bytes(), str(path))
    r.expect_magic(NDPK_MAGIC)
    r.expect_version(FORMAT_VERSION)
    embed_dim = r.u32()
    voxel_dim = r.u32()
    n_records = r.u32()
    standardized = r.u8() != 0

    stim_ids = np.zeros(n_records, dtype=np.uint32)
    subj_ids = np.zeros(n_records, dtype=np.uint32)
    embeds = np.zeros((n_records, embed_dim), dtype=np.float32)
    voxels = np.zeros((n_records, voxel_dim), dtype=np.float32)
    for i in range(n_records):
        stim_ids[i] = r.u32()
        subj_ids[i] = r.u32()
        embeds[i] = r.f32_array(embed_dim)
        voxels[i] = r.f32_array(voxel_dim)
    r.expect_eof()
    return PairSet(
        embed_dim=embed_dim,
        voxel_dim=voxel_dim,
        stimulus_ids=stim_ids,
        subject_ids=subj_ids,
        embeddings=embeds,
        voxels=voxels,
        standardized=standardized,
    )


def write_stimuli_ndpk(path: str | Path, stimuli: list[tuple[int, np.ndarray]]) -> None:
    """Store bare (stimulus_id, embedding) rows as a pack with voxel_dim=0."""
    embeds = np.stack([np.asarray(v, dtype=np.float32) for _, v in stimuli])
    pairs = PairSet(
        embed_dim=embeds.shape[1],
        voxel_dim=0,
        stimulus_ids=np.array([sid for sid, _ in stimuli], dtype=np.uint32),
        subject_ids=np.zeros(len(stimuli), dtype=np.uint32),
        embeddings=embeds,
        voxels=np.zeros((len(stimuli), 0), dtype=np.float32),
        standardized=False,
    )
    write_ndpk(path, pairs)


def read_stimuli_ndpk(path: str | Path) -> list[tuple[int, np.ndarray]]:
    pack = read_ndpk(path)
    return [
        (int(pack.stimulus_ids[i]), pack.embeddings[i].astype(np.float64))
        for i in range(len(pack))
    ]


def write_ndwt(path: str | Path, weights: list[np.ndarray], biases: list[np.ndarray]) -> None:
    if len(weights) != len(biases):
        raise FormatError("weights and biases differ in layer count")
    parts = [NDWT_MAGIC, struct.pack("<II", FORMAT_VERSION, len(weights))]
    for w, b in zip(weights, biases):
        rows, cols = w.shape
        parts.append(struct.pack("<II", rows, cols))
        parts.append(np.ascontiguousarray(w, dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_ndwt(path: str | Path) -> tuple[list[np.ndarray], list[np.ndarray]]:
    r = _Reader(Path(path).read_bytes(), str(path))
    r.expect_magic(NDWT_MAGIC)
    r.expect_version(FORMAT_VERSION)
    n_layers = r.u32()
    weights, biases = [], []
    for _ in range(n_layers):
        rows = r.u32()
        cols = r.u32()
        weights.append(r.f32_array(rows * cols).astype(np.float64).reshape(rows, cols))
        biases.append(r.f32_array(rows).astype(np.float64))
    r.expect_eof()
    return weights, biases
