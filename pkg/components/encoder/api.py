"""Feedforward encoder with per-layer state capture and a trace buffer."""

import logging
from collections import deque
from dataclasses import dataclass
from typing import Deque, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.exceptions import DimensionError, HistoryError, InputError
from core.tensor import (
    DEFAULT_DTYPE,
    LayerRecord,
    activate,
    conv2d,
    conv_output_extent,
    maxpool2d,
)

from .config import LayerSpec

logger = logging.getLogger(__name__)


def pool_to_vector(z: np.ndarray) -> np.ndarray:
    """Spatial mean per channel of a C×H×W map; vectors pass through"""
    if z.ndim == 1:
        return z
    if z.ndim != 3:
        raise DimensionError(f"expected a C×H×W map or a vector, got shape {z.shape}")
    return z.mean(axis=(1, 2))


def vector_upstream(upstream: np.ndarray, output_shape: Tuple[int, ...]) -> np.ndarray:
    """Spread a gradient on ẑ back over the layer output it was averaged from"""
    if len(output_shape) == 1:
        return upstream
    _, height, width = output_shape
    return np.broadcast_to(upstream[:, None, None] / (height * width), output_shape).copy()


@dataclass(frozen=True)
class EncoderState:
    """Forward record of every layer for one input"""

    records: Tuple[LayerRecord, ...]
    vectors: Tuple[np.ndarray, ...]

    def __len__(self) -> int:
        return len(self.records)

    def vector(self, layer: int) -> np.ndarray:
        """Score-space vector ẑ of a layer"""
        return self.vectors[layer]


def _infer_shapes(
    specs: Sequence[LayerSpec], input_shape: Tuple[int, ...]
) -> Tuple[List[Tuple[int, ...]], List[Tuple[int, ...]]]:
    """Weight shape and output shape of every layer"""
    weight_shapes: List[Tuple[int, ...]] = []
    output_shapes: List[Tuple[int, ...]] = []
    shape = tuple(input_shape)
    for index, spec in enumerate(specs):
        if spec.kind == "dense":
            weight_shapes.append((spec.units, int(np.prod(shape)) + 1))
            shape = (spec.units,)
        else:
            if len(shape) != 3:
                raise DimensionError(f"layer {index}: conv layer needs a C×H×W input, got {shape}")
            channels, height, width = shape
            out_h = conv_output_extent(height, spec.kernel, spec.stride, spec.pad)
            out_w = conv_output_extent(width, spec.kernel, spec.stride, spec.pad)
            weight_shapes.append((spec.channels, channels, spec.kernel, spec.kernel))
            if spec.pool is not None:
                window, stride = spec.pool.window, spec.pool.stride
                if window > out_h or window > out_w:
                    raise DimensionError(f"layer {index}: pool window {window} exceeds map {out_h}×{out_w}")
                out_h = (out_h - window) // stride + 1
                out_w = (out_w - window) // stride + 1
            shape = (spec.channels, out_h, out_w)
        output_shapes.append(shape)
    return weight_shapes, output_shapes


class Encoder:
    """Stack of dense or conv(+pool) layers.

    Dense weights carry the bias as their last column (the input gets a
    constant 1 appended). Conv layers keep a separate bias per channel.
    """

    def __init__(
        self,
        specs: Sequence[LayerSpec],
        input_shape: Tuple[int, ...],
        trace_depth: int = 2,
        seed: Optional[int] = None,
        dtype: type = DEFAULT_DTYPE,
    ):
        if not specs:
            raise InputError("encoder needs at least one layer")
        if trace_depth < 1:
            raise InputError(f"trace depth must be positive, got {trace_depth}")
        self.specs = list(specs)
        self.input_shape = tuple(int(extent) for extent in input_shape)
        self.weight_shapes, self.output_shapes = _infer_shapes(self.specs, self.input_shape)
        self.trace_depth = trace_depth
        self.weights: List[np.ndarray] = [np.zeros(s, dtype=dtype) for s in self.weight_shapes]
        self.biases: List[Optional[np.ndarray]] = [
            np.zeros(spec.channels, dtype=dtype) if spec.kind == "conv" else None
            for spec in self.specs
        ]
        self._trace: Deque[EncoderState] = deque(maxlen=trace_depth)
        if seed is not None:
            self.initialize(seed)

    @property
    def n_layers(self) -> int:
        return len(self.specs)

    def vector_dim(self, layer: int) -> int:
        return self.output_shapes[layer][0]

    def initialize(self, seed: int) -> None:
        """Uniform init in ±1/√fan_in, drawn layer by layer from one seeded stream"""
        rng = np.random.default_rng(seed)
        for index, shape in enumerate(self.weight_shapes):
            fan_in = shape[1] - 1 if self.specs[index].kind == "dense" else int(np.prod(shape[1:]))
            bound = 1.0 / np.sqrt(max(fan_in, 1))
            self.weights[index][...] = rng.uniform(-bound, bound, size=shape)
            if self.biases[index] is not None:
                self.biases[index][...] = rng.uniform(-bound, bound, size=self.biases[index].shape)
        logger.info(f"Initialized encoder with {self.n_layers} layers, seed {seed}")

    def parameters(self) -> Dict[str, np.ndarray]:
        """Named views of every trainable tensor"""
        params: Dict[str, np.ndarray] = {}
        for index, weight in enumerate(self.weights):
            params[f"layer{index}.weight"] = weight
            if self.biases[index] is not None:
                params[f"layer{index}.bias"] = self.biases[index]
        return params

    def _forward_layer(self, index: int, x: np.ndarray) -> LayerRecord:
        spec = self.specs[index]
        weight = self.weights[index]
        if spec.kind == "dense":
            flat = x.reshape(-1)
            x_aug = np.concatenate([flat, np.ones(1, dtype=flat.dtype)])
            a = weight @ x_aug
            z = activate(a, spec.activation)
            return LayerRecord(
                kind="dense",
                x=x_aug,
                a=a,
                z=z,
                pooled=z,
                activation=spec.activation,
                weight_shape=weight.shape,
                input_shape=x.shape,
            )
        a = conv2d(x, weight, spec.stride, spec.pad) + self.biases[index][:, None, None]
        z = activate(a, spec.activation)
        pooled, pool_record = z, None
        if spec.pool is not None:
            pooled, pool_record = maxpool2d(z, spec.pool.window, spec.pool.stride)
        return LayerRecord(
            kind="conv",
            x=x,
            a=a,
            z=z,
            pooled=pooled,
            activation=spec.activation,
            weight_shape=weight.shape,
            input_shape=x.shape,
            stride=spec.stride,
            pad=spec.pad,
            pool_record=pool_record,
        )

    def forward(self, x: np.ndarray, record: bool = True) -> EncoderState:
        """Run every layer on one input

        Args:
            x: Input matching the encoder's input shape
            record: Append the resulting state to the trace buffer

        Raises:
            DimensionError: If x does not match the input shape
        """
        if tuple(x.shape) != self.input_shape:
            raise DimensionError(f"input shape {x.shape} does not match encoder input {self.input_shape}")
        records = []
        current = np.asarray(x, dtype=self.weights[0].dtype)
        for index in range(self.n_layers):
            layer = self._forward_layer(index, current)
            records.append(layer)
            current = layer.pooled
        state = EncoderState(
            records=tuple(records),
            vectors=tuple(pool_to_vector(layer.pooled) for layer in records),
        )
        if record:
            self._trace.append(state)
        return state

    def trace_at(self, delta: int) -> EncoderState:
        """State recorded ``delta`` steps ago (0 is the latest)

        Raises:
            HistoryError: If fewer than delta + 1 states are stored
        """
        if delta < 0 or delta >= len(self._trace):
            raise HistoryError(f"trace holds {len(self._trace)} states, cannot look back {delta}")
        return self._trace[-1 - delta]

    @property
    def history(self) -> int:
        return len(self._trace)

    def reset(self) -> None:
        """Drop the trace buffer"""
        self._trace.clear()

    def fork(self) -> "Encoder":
        """Encoder sharing these weight arrays but owning a fresh trace"""
        twin = Encoder.__new__(Encoder)
        twin.specs = self.specs
        twin.input_shape = self.input_shape
        twin.weight_shapes = self.weight_shapes
        twin.output_shapes = self.output_shapes
        twin.trace_depth = self.trace_depth
        twin.weights = self.weights
        twin.biases = self.biases
        twin._trace = deque(maxlen=self.trace_depth)
        return twin

    def copy(self) -> "Encoder":
        """Independent deep copy without trace"""
        twin = self.fork()
        twin.weights = [w.copy() for w in self.weights]
        twin.biases = [None if b is None else b.copy() for b in self.biases]
        return twin

    def manifest(self) -> Dict:
        return {
            "layers": [spec.model_dump() for spec in self.specs],
            "input_shape": list(self.input_shape),
            "trace_depth": self.trace_depth,
        }

    @classmethod
    def from_manifest(cls, manifest: Dict, tensors: Dict[str, np.ndarray]) -> "Encoder":
        """Rebuild an encoder from a checkpoint manifest and its tensors"""
        specs = [LayerSpec.model_validate(layer) for layer in manifest["layers"]]
        encoder = cls(specs, tuple(manifest["input_shape"]), manifest.get("trace_depth", 2))
        for name, target in encoder.parameters().items():
            if name not in tensors:
                raise InputError(f"checkpoint is missing tensor {name}")
            if tensors[name].shape != target.shape:
                raise DimensionError(f"tensor {name}: checkpoint shape {tensors[name].shape} != {target.shape}")
            target[...] = tensors[name]
        return encoder
