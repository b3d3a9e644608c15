"""
Model descriptors.

A ModelSpec is a flat list of layer descriptors plus the per-example input
shape. Shapes are propagated at construction time so an incompatible chain is
rejected before any parameter exists.
"""

from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from trajguard.constants import LayerKind, TaskKind
from trajguard.exceptions import ConfigError, ShapeMismatchError


class LayerSpec(BaseModel):
    """One layer of a sequential model."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str
    kind: LayerKind
    in_features: Optional[int] = Field(None, ge=1, description="dense input / lstm input size")
    out_features: Optional[int] = Field(None, ge=1, description="dense output / lstm hidden size")
    in_channels: Optional[int] = Field(None, ge=1)
    out_channels: Optional[int] = Field(None, ge=1)
    kernel_size: Optional[int] = Field(None, ge=1)
    stride: int = Field(1, ge=1)
    padding: int = Field(0, ge=0)

    def param_shapes(self) -> Dict[str, Tuple[int, ...]]:
        """Names and shapes of this layer's trainable tensors."""
        if self.kind == LayerKind.DENSE:
            return {
                f"{self.name}.weight": (self.out_features, self.in_features),
                f"{self.name}.bias": (self.out_features,),
            }
        if self.kind == LayerKind.CONV2D:
            k = self.kernel_size
            return {
                f"{self.name}.weight": (self.out_channels, self.in_channels, k, k),
                f"{self.name}.bias": (self.out_channels,),
            }
        if self.kind == LayerKind.LSTM:
            hidden = self.out_features
            return {
                f"{self.name}.weight_ih": (4 * hidden, self.in_features),
                f"{self.name}.weight_hh": (4 * hidden, hidden),
                f"{self.name}.bias": (4 * hidden,),
            }
        return {}

    def output_shape(self, shape: Tuple[int, ...]) -> Tuple[int, ...]:
        """Per-example output shape for a given per-example input shape."""
        if self.kind == LayerKind.DENSE:
            if len(shape) != 1 or shape[0] != self.in_features:
                raise ShapeMismatchError(
                    f"dense expects ({self.in_features},), got {shape}", layer=self.name
                )
            return (self.out_features,)
        if self.kind == LayerKind.CONV2D:
            if len(shape) != 3 or shape[0] != self.in_channels:
                raise ShapeMismatchError(
                    f"conv2d expects ({self.in_channels}, H, W), got {shape}", layer=self.name
                )
            k, s, p = self.kernel_size, self.stride, self.padding
            h = (shape[1] + 2 * p - k) // s + 1
            w = (shape[2] + 2 * p - k) // s + 1
            if h < 1 or w < 1:
                raise ShapeMismatchError(f"kernel larger than input {shape}", layer=self.name)
            return (self.out_channels, h, w)
        if self.kind == LayerKind.LSTM:
            if len(shape) != 2 or shape[1] != self.in_features:
                raise ShapeMismatchError(
                    f"lstm-cell expects (T, {self.in_features}), got {shape}", layer=self.name
                )
            return (self.out_features,)
        if self.kind == LayerKind.FLATTEN:
            size = 1
            for extent in shape:
                size *= extent
            return (size,)
        return shape

    @model_validator(mode="after")
    def _check_extents(self) -> "LayerSpec":
        required = {
            LayerKind.DENSE: ("in_features", "out_features"),
            LayerKind.LSTM: ("in_features", "out_features"),
            LayerKind.CONV2D: ("in_channels", "out_channels", "kernel_size"),
        }.get(self.kind, ())
        missing = [name for name in required if getattr(self, name) is None]
        if missing:
            raise ValueError(f"layer {self.name} ({self.kind.value}) missing {missing}")
        return self


class ModelSpec(BaseModel):
    """Sequential model: per-example input shape, layers, task and output size."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str
    input_shape: Tuple[int, ...]
    layers: Tuple[LayerSpec, ...]
    task: TaskKind
    output_dim: int = Field(..., ge=1)

    @model_validator(mode="after")
    def _check_chain(self) -> "ModelSpec":
        names = [layer.name for layer in self.layers]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate layer names in {names}")
        shape = self.output_shape()
        if shape != (self.output_dim,):
            raise ShapeMismatchError(
                f"model ends with shape {shape}, expected ({self.output_dim},)",
                layer=self.layers[-1].name if self.layers else "input",
            )
        return self

    def output_shape(self) -> Tuple[int, ...]:
        shape = tuple(self.input_shape)
        for layer in self.layers:
            shape = layer.output_shape(shape)
        return shape

    def param_shapes(self) -> Dict[str, Tuple[int, ...]]:
        """All trainable tensor shapes, in deterministic layer order."""
        shapes: Dict[str, Tuple[int, ...]] = {}
        for layer in self.layers:
            shapes.update(layer.param_shapes())
        return shapes

    def param_count(self) -> int:
        total = 0
        for shape in self.param_shapes().values():
            size = 1
            for extent in shape:
                size *= extent
            total += size
        return total

    def descriptor(self) -> str:
        """Canonical text form stored in checkpoint headers."""
        return self.model_dump_json()

    @classmethod
    def from_descriptor(cls, text: str) -> "ModelSpec":
        return cls.model_validate_json(text)


def _dense_stack(sizes: List[int], prefix: str = "fc") -> List[LayerSpec]:
    layers: List[LayerSpec] = []
    for i in range(len(sizes) - 1):
        layers.append(
            LayerSpec(
                name=f"{prefix}{i + 1}",
                kind=LayerKind.DENSE,
                in_features=sizes[i],
                out_features=sizes[i + 1],
            )
        )
        if i < len(sizes) - 2:
            layers.append(LayerSpec(name=f"relu{i + 1}", kind=LayerKind.RELU))
    return layers


def build_model_spec(
    spec_id: str,
    input_shape: Tuple[int, ...],
    output_dim: int,
    task: TaskKind,
) -> ModelSpec:
    """
    Build a ModelSpec from a compact id.

    Supported ids:
        mlp:<h1>,<h2>,...   dense stack with relu between layers
        cnn:<channels>      two 3x3 convolutions then a dense head
        lstm:<hidden>       one lstm-cell over (T, F) windows then a dense head

    Args:
        spec_id: Compact model id
        input_shape: Per-example input shape (from the dataset)
        output_dim: Number of classes or regression outputs
        task: Classification or regression

    Returns:
        Validated ModelSpec
    """
    family, _, args = spec_id.partition(":")
    try:
        sizes = [int(part) for part in args.split(",") if part.strip()] if args else []
    except ValueError as e:
        raise ConfigError(f"Bad model spec id {spec_id!r}: {e}") from e

    if family == "mlp":
        layers: List[LayerSpec] = []
        in_features = 1
        for extent in input_shape:
            in_features *= extent
        if len(input_shape) != 1:
            layers.append(LayerSpec(name="flatten", kind=LayerKind.FLATTEN))
        layers.extend(_dense_stack([in_features, *sizes, output_dim]))
    elif family == "cnn":
        if len(input_shape) != 3:
            raise ConfigError(f"cnn needs (C, H, W) inputs, dataset gives {input_shape}")
        channels = sizes[0] if sizes else 8
        conv1 = LayerSpec(
            name="conv1", kind=LayerKind.CONV2D, in_channels=input_shape[0],
            out_channels=channels, kernel_size=3, stride=1, padding=1,
        )
        conv2 = LayerSpec(
            name="conv2", kind=LayerKind.CONV2D, in_channels=channels,
            out_channels=2 * channels, kernel_size=3, stride=2, padding=1,
        )
        layers = [conv1, LayerSpec(name="relu1", kind=LayerKind.RELU), conv2,
                  LayerSpec(name="relu2", kind=LayerKind.RELU),
                  LayerSpec(name="flatten", kind=LayerKind.FLATTEN)]
        shape = tuple(input_shape)
        for layer in layers:
            shape = layer.output_shape(shape)
        layers.append(
            LayerSpec(name="fc1", kind=LayerKind.DENSE, in_features=shape[0], out_features=output_dim)
        )
    elif family == "lstm":
        if len(input_shape) != 2:
            raise ConfigError(f"lstm needs (T, F) inputs, dataset gives {input_shape}")
        hidden = sizes[0] if sizes else 16
        layers = [
            LayerSpec(name="lstm1", kind=LayerKind.LSTM, in_features=input_shape[1], out_features=hidden),
            LayerSpec(name="fc1", kind=LayerKind.DENSE, in_features=hidden, out_features=output_dim),
        ]
    else:
        raise ConfigError(f"Unknown model family {family!r} in {spec_id!r}")

    return ModelSpec(
        name=spec_id,
        input_shape=tuple(input_shape),
        layers=tuple(layers),
        task=task,
        output_dim=output_dim,
    )
