"""Layer shape calculator and the built-in reference backbone layouts.

Convolution output sizes follow the standard cross-correlation rule

    out = floor((in + 2*padding - kernel) / stride) + 1

per spatial axis.  ``validate_architecture`` chains the computed shape of
each layer into the next and compares against the layout's declared output
shape, so a single wrong layer is caught where it first appears.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod

from .errors import ArchitectureError

Shape = tuple[int, ...]

# Kinds that never change the shape of what flows through them.
_IDENTITY_KINDS = {"batchnorm", "relu", "resblock", "transformer_block"}


@dataclass
class LayerSpec:
    """One layer of a backbone, with only the parameters its kind needs.

    kind: conv3d | conv1d | linear | flatten | reshape | resblock
          | transformer_block | batchnorm | relu
    """

    kind: str
    label: str = ""
    kernel: tuple[int, ...] = ()
    stride: int = 1
    padding: int = 0
    out_channels: int = 0
    out_features: Shape = ()
    target_shape: Shape = ()
    width: int = 0
    heads: int = 0
    repeat: int = 1

    def __post_init__(self):
        known = {"conv3d", "conv1d", "linear", "flatten", "reshape"} | _IDENTITY_KINDS
        if self.kind not in known:
            raise ArchitectureError(f"{self.label or self.kind}: unknown kind {self.kind!r}")
        if self.kind in ("conv3d", "conv1d"):
            want = 3 if self.kind == "conv3d" else 1
            if len(self.kernel) != want or any(k < 1 for k in self.kernel):
                raise ArchitectureError(f"{self.label}: conv needs a {want}-axis kernel >= 1")
            if self.stride < 1 or self.padding < 0:
                raise ArchitectureError(f"{self.label}: stride >= 1 and padding >= 0 required")
            if self.out_channels < 1:
                raise ArchitectureError(f"{self.label}: out_channels required")
        if self.kind == "linear" and (not self.out_features or any(d < 1 for d in self.out_features)):
            raise ArchitectureError(f"{self.label}: linear needs positive out_features")
        if self.kind == "reshape" and (not self.target_shape or any(d < 1 for d in self.target_shape)):
            raise ArchitectureError(f"{self.label}: reshape needs a positive target_shape")
        if self.repeat < 1:
            raise ArchitectureError(f"{self.label}: repeat must be >= 1")


@dataclass
class ArchTable:
    """A backbone layout: input shape plus (layer, expected output shape) rows."""

    name: str
    input_shape: Shape
    rows: list[tuple[LayerSpec, Shape]]

    def __post_init__(self):
        if not self.rows:
            raise ArchitectureError(f"{self.name}: layout has no rows")


@dataclass
class RowResult:
    label: str
    kind: str
    in_shape: Shape
    computed: Shape
    expected: Shape

    @property
    def ok(self) -> bool:
        return self.computed == self.expected


@dataclass
class ArchReport:
    name: str
    rows: list[RowResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.rows)

    @property
    def n_failed(self) -> int:
        return sum(not r.ok for r in self.rows)


def _conv_axis(size: int, kernel: int, stride: int, padding: int, label: str) -> int:
    out = (size + 2 * padding - kernel) // stride + 1
    if out < 1:
        raise ArchitectureError(
            f"{label}: axis of size {size} collapses to {out} "
            f"(kernel {kernel}, stride {stride}, padding {padding})"
        )
    return out


def conv_output_shape(spec: LayerSpec, in_shape: Shape) -> Shape:
    """Output shape of one layer applied to ``in_shape``.

    Conv layers expect channel-first input: (C, spatial...).
    """
    if spec.kind in ("conv3d", "conv1d"):
        n_spatial = len(spec.kernel)
        if len(in_shape) != n_spatial + 1:
            raise ArchitectureError(
                f"{spec.label}: {spec.kind} expects {n_spatial + 1}-axis input, got {in_shape}"
            )
        spatial = tuple(
            _conv_axis(s, k, spec.stride, spec.padding, spec.label)
            for s, k in zip(in_shape[1:], spec.kernel)
        )
        return (spec.out_channels,) + spatial
    if spec.kind == "linear":
        if len(in_shape) != 1:
            raise ArchitectureError(f"{spec.label}: linear expects flat input, got {in_shape}")
        return tuple(spec.out_features)
    if spec.kind == "flatten":
        return (prod(in_shape),)
    if spec.kind == "reshape":
        if prod(spec.target_shape) != prod(in_shape):
            raise ArchitectureError(
                f"{spec.label}: cannot reshape {in_shape} to {spec.target_shape}"
            )
        return tuple(spec.target_shape)
    if spec.kind == "transformer_block" and spec.width and in_shape[-1] != spec.width:
        raise ArchitectureError(
            f"{spec.label}: token width {in_shape[-1]} != block width {spec.width}"
        )
    return tuple(in_shape)


def validate_architecture(table: ArchTable) -> ArchReport:
    """Chain every row's computed shape and compare with the declared one."""
    report = ArchReport(name=table.name)
    shape = tuple(table.input_shape)
    for spec, expected in table.rows:
        computed = shape
        for _ in range(spec.repeat):
            computed = conv_output_shape(spec, computed)
        report.rows.append(
            RowResult(
                label=spec.label or spec.kind,
                kind=spec.kind,
                in_shape=shape,
                computed=computed,
                expected=tuple(expected),
            )
        )
        shape = computed
    return report


def _conv3d(label, k, s, p, out_c):
    return LayerSpec(kind="conv3d", label=label, kernel=(k, k, k), stride=s, padding=p, out_channels=out_c)


def _front_end_3d() -> list[tuple[LayerSpec, Shape]]:
    """Shared 3-stage conv stack that reduces a full-size volume to 64 channels."""
    return [
        (_conv3d("conv1", 9, 3, 4, 32), (32, 38, 46, 38)),
        (LayerSpec(kind="batchnorm", label="bn1"), (32, 38, 46, 38)),
        (_conv3d("conv2", 7, 2, 3, 48), (48, 19, 23, 19)),
        (LayerSpec(kind="batchnorm", label="bn2"), (48, 19, 23, 19)),
        (_conv3d("conv3", 5, 2, 2, 64), (64, 10, 12, 10)),
        (LayerSpec(kind="batchnorm", label="bn3"), (64, 10, 12, 10)),
        (LayerSpec(kind="relu", label="relu"), (64, 10, 12, 10)),
    ]


FULL_VOLUME_SHAPE: Shape = (1, 113, 136, 113)
CLIP_FEATURE_SHAPE: Shape = (257, 1024)


def mlp_table() -> ArchTable:
    rows = _front_end_3d() + [
        (LayerSpec(kind="flatten", label="flatten"), (76800,)),
        (LayerSpec(kind="linear", label="lin0", out_features=(4096,)), (4096,)),
        (LayerSpec(kind="resblock", label="mlp_4layers"), (4096,)),
        (LayerSpec(kind="linear", label="lin1", out_features=CLIP_FEATURE_SHAPE), CLIP_FEATURE_SHAPE),
    ]
    return ArchTable(name="mlp", input_shape=FULL_VOLUME_SHAPE, rows=rows)


def cnn1d_table() -> ArchTable:
    def conv1d(label, k, s, out_c):
        return LayerSpec(kind="conv1d", label=label, kernel=(k,), stride=s, padding=0, out_channels=out_c)

    rows = _front_end_3d() + [
        (LayerSpec(kind="flatten", label="flatten"), (76800,)),
        (LayerSpec(kind="linear", label="lin0", out_features=(4096,)), (4096,)),
        (LayerSpec(kind="reshape", label="reshape", target_shape=(1, 4096)), (1, 4096)),
        # (4096 - 13)//6 + 1 = 681; the chain below follows from it.
        (conv1d("conv01", 13, 6, 64), (64, 681)),
        (LayerSpec(kind="batchnorm", label="bn01"), (64, 681)),
        (conv1d("conv02", 11, 5, 128), (128, 135)),
        (LayerSpec(kind="batchnorm", label="bn02"), (128, 135)),
        (conv1d("conv03", 9, 4, 256), (256, 32)),
        (LayerSpec(kind="batchnorm", label="bn03"), (256, 32)),
        (conv1d("conv04", 7, 3, 512), (512, 9)),
        (LayerSpec(kind="batchnorm", label="bn04"), (512, 9)),
        (LayerSpec(kind="resblock", label="resblock1d_x8", repeat=8), (512, 9)),
        (LayerSpec(kind="flatten", label="flatten2"), (4608,)),
        (LayerSpec(kind="linear", label="lin1", out_features=CLIP_FEATURE_SHAPE), CLIP_FEATURE_SHAPE),
    ]
    return ArchTable(name="cnn1d", input_shape=FULL_VOLUME_SHAPE, rows=rows)


def cnn3d_table() -> ArchTable:
    rows = [
        (_conv3d("conv1", 9, 3, 4, 32), (32, 38, 46, 38)),
        (LayerSpec(kind="batchnorm", label="bn1"), (32, 38, 46, 38)),
        (_conv3d("conv2", 7, 2, 3, 48), (48, 19, 23, 19)),
        (LayerSpec(kind="batchnorm", label="bn2"), (48, 19, 23, 19)),
        (_conv3d("conv3", 5, 2, 2, 64), (64, 10, 12, 10)),
        (LayerSpec(kind="batchnorm", label="bn3"), (64, 10, 12, 10)),
        (_conv3d("conv4", 5, 2, 2, 90), (90, 5, 6, 5)),
        (LayerSpec(kind="batchnorm", label="bn4"), (90, 5, 6, 5)),
        (_conv3d("conv5", 5, 2, 2, 150), (150, 3, 3, 3)),
        (LayerSpec(kind="batchnorm", label="bn5"), (150, 3, 3, 3)),
        (LayerSpec(kind="relu", label="relu"), (150, 3, 3, 3)),
        (LayerSpec(kind="resblock", label="resblock3d_x8", repeat=8), (150, 3, 3, 3)),
        (LayerSpec(kind="flatten", label="flatten"), (4050,)),
        (LayerSpec(kind="linear", label="lin1", out_features=CLIP_FEATURE_SHAPE), CLIP_FEATURE_SHAPE),
    ]
    return ArchTable(name="cnn3d", input_shape=FULL_VOLUME_SHAPE, rows=rows)


def transformer_table() -> ArchTable:
    rows = _front_end_3d() + [
        (LayerSpec(kind="flatten", label="flatten"), (76800,)),
        (LayerSpec(kind="linear", label="lin0", out_features=(4096,)), (4096,)),
        (LayerSpec(kind="reshape", label="reshape1", target_shape=(16, 256)), (16, 256)),
        (
            LayerSpec(kind="transformer_block", label="transformer_x24", width=256, heads=8, repeat=24),
            (16, 256),
        ),
        (LayerSpec(kind="reshape", label="reshape2", target_shape=(4096,)), (4096,)),
        (LayerSpec(kind="linear", label="lin1", out_features=CLIP_FEATURE_SHAPE), CLIP_FEATURE_SHAPE),
    ]
    return ArchTable(name="transformer", input_shape=FULL_VOLUME_SHAPE, rows=rows)


def builtin_tables() -> list[ArchTable]:
    """The four reference backbones checked by the shape-check command."""
    return [mlp_table(), cnn1d_table(), cnn3d_table(), transformer_table()]
