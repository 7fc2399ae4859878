"""Scores, the hinge loss, the broadcast modulator and the local update rules.

Every update here is returned in the direction that lowers the loss, so
callers add it to the weights (scaled by the optimizer). Gradients of the
score into the other side of the pair are blocked: the predicted-layer rule
treats the context vector as a constant and vice versa.
"""

import logging
from dataclasses import dataclass
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np

from components.encoder.api import EncoderState, vector_upstream
from core.exceptions import DimensionError, InputError
from core.tensor import DEFAULT_DTYPE, LayerGrad, LayerRecord, layer_adjoint

logger = logging.getLogger(__name__)

ContrastiveLoss = Literal["hinge", "softmax"]


@dataclass
class PredictorHead:
    """Prediction and retrodiction weights bound to one (predicted, context) pair"""

    w_pred: np.ndarray
    w_retro: np.ndarray
    predicted_layer: int
    context_layer: int
    offset: int = 1
    retro_frozen: bool = False

    def __post_init__(self) -> None:
        if self.w_retro.shape != self.w_pred.shape[::-1]:
            raise DimensionError(
                f"W_retro {self.w_retro.shape} must have the transposed shape of W_pred {self.w_pred.shape}"
            )

    @property
    def dim_z(self) -> int:
        return self.w_pred.shape[0]

    @property
    def dim_c(self) -> int:
        return self.w_pred.shape[1]

    @property
    def name(self) -> str:
        return f"head{self.predicted_layer}.dt{self.offset}"

    @classmethod
    def initialize(
        cls,
        dim_z: int,
        dim_c: int,
        rng: np.random.Generator,
        predicted_layer: int = 0,
        context_layer: int = 0,
        offset: int = 1,
        tied: bool = False,
        retrodiction: str = "learned",
        dtype: type = DEFAULT_DTYPE,
    ) -> "PredictorHead":
        """Uniform init in ±1/√fan_in; W_retro tied, independent or zero"""
        w_pred = rng.uniform(-1.0 / np.sqrt(dim_c), 1.0 / np.sqrt(dim_c), size=(dim_z, dim_c)).astype(dtype)
        if retrodiction == "zero":
            w_retro = np.zeros((dim_c, dim_z), dtype=dtype)
        elif tied:
            w_retro = w_pred.T.copy()
        else:
            w_retro = rng.uniform(
                -1.0 / np.sqrt(dim_z), 1.0 / np.sqrt(dim_z), size=(dim_c, dim_z)
            ).astype(dtype)
        return cls(
            w_pred=w_pred,
            w_retro=w_retro,
            predicted_layer=predicted_layer,
            context_layer=context_layer,
            offset=offset,
            retro_frozen=retrodiction == "zero",
        )

    def tensors(self) -> dict:
        return {f"{self.name}.w_pred": self.w_pred, f"{self.name}.w_retro": self.w_retro}


@dataclass(frozen=True)
class Modulator:
    """Broadcast factors: saccade label y, hinge gate H and their product γ"""

    y: int
    H: float
    gamma: float

    @property
    def active(self) -> bool:
        return self.H != 0.0


def _check_pair(z: np.ndarray, c: np.ndarray, head: PredictorHead) -> None:
    if z.shape != (head.dim_z,) or c.shape != (head.dim_c,):
        raise DimensionError(
            f"score operands z{z.shape}, c{c.shape} do not match head ({head.dim_z}, {head.dim_c})"
        )


def score(z: np.ndarray, c: np.ndarray, head: PredictorHead) -> float:
    """u = zᵀ W_pred c"""
    _check_pair(z, c, head)
    return float(z @ (head.w_pred @ c))


def split_score_pair(z: np.ndarray, c: np.ndarray, head: PredictorHead) -> Tuple[float, float]:
    """(u_z, u_c): the score as seen by the predicted side and by the context side

    u_z = zᵀ W_pred c drives the predicted layer and the head; u_c = (W_retro z)ᵀ c
    drives the context layer. They coincide when W_retro = W_predᵀ.
    """
    _check_pair(z, c, head)
    return float(z @ (head.w_pred @ c)), float((head.w_retro @ z) @ c)


def clapp_loss(u: float, y: int) -> float:
    """Hinge loss max(0, 1 − y·u)"""
    if y not in (1, -1):
        raise InputError(f"label y must be +1 or -1, got {y}")
    return max(0.0, 1.0 - y * u)


def modulator(u: float, y: int, eta: float) -> Modulator:
    """H = eta while the margin is violated (y·u < 1, strict), else 0; γ = y·H"""
    if eta <= 0:
        raise InputError(f"eta must be positive, got {eta}")
    if y not in (1, -1):
        raise InputError(f"label y must be +1 or -1, got {y}")
    gate = eta if y * u < 1.0 else 0.0
    return Modulator(y=y, H=gate, gamma=y * gate)


def _zero_grad(record: LayerRecord) -> LayerGrad:
    bias = None if record.kind == "dense" else np.zeros(record.weight_shape[0], dtype=record.a.dtype)
    return LayerGrad(np.zeros(record.weight_shape, dtype=record.a.dtype), bias)


def update_predicted_layer(
    state_now: EncoderState, c_prev: np.ndarray, head: PredictorHead, mod: Modulator
) -> LayerGrad:
    """ΔW of the predicted layer: γ · (W_pred c^{t−δt})_j · ρ'(a_j^t) · x_i^t

    ``c_prev`` is the context vector taken from the trace at t − δt.
    """
    record = state_now.records[head.predicted_layer]
    if not mod.active:
        return _zero_grad(record)
    dendritic = head.w_pred @ c_prev
    upstream = vector_upstream(mod.gamma * dendritic, record.pooled.shape)
    return layer_adjoint(upstream, record)


def update_context_layer(
    state_prev: EncoderState, z_now: np.ndarray, head: PredictorHead, mod: Modulator
) -> LayerGrad:
    """ΔW of the context layer: γ · (W_retro z^t)_k · ρ'(a_k^{c,t−δt}) · x_l^{c,t−δt}"""
    record = state_prev.records[head.context_layer]
    if not mod.active:
        return _zero_grad(record)
    dendritic = head.w_retro @ z_now
    upstream = vector_upstream(mod.gamma * dendritic, record.pooled.shape)
    return layer_adjoint(upstream, record)


def update_predictor(
    z_now: np.ndarray, c_prev: np.ndarray, mod: Modulator
) -> Tuple[np.ndarray, np.ndarray]:
    """(ΔW_pred, ΔW_retro) with ΔW_pred[j, k] = ΔW_retro[k, j] = γ · z_j · c_k"""
    delta = mod.gamma * np.outer(z_now, c_prev)
    return delta, delta.T.copy()


def add_grads(left: Optional[LayerGrad], right: LayerGrad, scale: float = 1.0) -> LayerGrad:
    """Sum of two layer gradients, the second scaled"""
    if left is None:
        bias = None if right.bias is None else scale * right.bias
        return LayerGrad(scale * right.weight, bias)
    bias = None if left.bias is None else left.bias + scale * right.bias
    return LayerGrad(left.weight + scale * right.weight, bias)


def softmax_probabilities(scores: np.ndarray) -> np.ndarray:
    shifted = np.exp(scores - scores.max())
    return shifted / shifted.sum()


def score_coefficients(
    scores: np.ndarray, loss: ContrastiveLoss
) -> Tuple[float, np.ndarray, np.ndarray]:
    """Loss value and −∂L/∂u per score; entry 0 is the positive pair.

    ``hinge`` averages max(0, 1 − y·u) over the N+1 pairs (y = +1 for the
    positive, −1 otherwise). ``softmax`` is the CPC cross-entropy
    −log π⁺.

    Returns:
        (loss, coefficients, probabilities); probabilities are the softmax
        values for ``softmax`` and the hinge activity indicators otherwise
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size < 2:
        raise InputError("contrastive losses need a positive and at least one negative")
    if loss == "softmax":
        pi = softmax_probabilities(scores)
        shifted = scores - scores.max()
        value = float(np.log(np.exp(shifted).sum()) - shifted[0])
        coefficients = -pi
        coefficients[0] += 1.0
        return value, coefficients, pi
    labels = -np.ones_like(scores)
    labels[0] = 1.0
    margins = labels * scores
    active = (margins < 1.0).astype(np.float64)
    value = float(np.maximum(0.0, 1.0 - margins).mean())
    return value, labels * active / scores.size, active


@dataclass(frozen=True)
class CpcGrads:
    """Reference gradients of log π⁺ (the negative of the CPC loss gradient)"""

    loss: float
    probabilities: np.ndarray
    w_pred: np.ndarray
    z_upstreams: List[np.ndarray]
    c_upstream: np.ndarray
    w_z: Optional[LayerGrad] = None
    w_c: Optional[LayerGrad] = None


def cpc_reference_grads(
    c: np.ndarray,
    z_positive: np.ndarray,
    z_negatives: Sequence[np.ndarray],
    w_pred: np.ndarray,
    z_records: Optional[Sequence[LayerRecord]] = None,
    c_record: Optional[LayerRecord] = None,
) -> CpcGrads:
    """Per-layer gradients of the softmax CPC objective.

    With π the softmax over scores u_τ = z_τᵀ W_pred c (positive first):
    ∇W_pred = (z⁺ − Σ_τ π_τ z_τ) cᵀ, the gradient reaching z_τ is
    (1[τ=+] − π_τ) W_pred c and the gradient reaching c is
    W_predᵀ (z⁺ − Σ_τ π_τ z_τ). When forward records are given, these are
    pushed through the predicted layer (summed over all pairs) and the
    context layer.
    """
    if not z_negatives:
        raise InputError("CPC reference gradients need at least one negative")
    zs = [z_positive, *z_negatives]
    if z_records is not None and len(z_records) != len(zs):
        raise DimensionError(f"{len(z_records)} records for {len(zs)} predicted vectors")
    prediction = w_pred @ c
    scores = np.array([z @ prediction for z in zs])
    value, coefficients, pi = score_coefficients(scores, "softmax")

    contrast = sum(coef * z for coef, z in zip(coefficients, zs))
    z_upstreams = [coef * prediction for coef in coefficients]
    c_upstream = w_pred.T @ contrast

    w_z = None
    if z_records is not None:
        for record, upstream in zip(z_records, z_upstreams):
            w_z = add_grads(w_z, layer_adjoint(vector_upstream(upstream, record.pooled.shape), record))
    w_c = None
    if c_record is not None:
        w_c = layer_adjoint(vector_upstream(c_upstream, c_record.pooled.shape), c_record)

    return CpcGrads(
        loss=value,
        probabilities=pi,
        w_pred=np.outer(contrast, c),
        z_upstreams=z_upstreams,
        c_upstream=c_upstream,
        w_z=w_z,
        w_c=w_c,
    )
