"""Reference gradients that share no code with the rules they certify.

Everything here runs in float64 on plain numpy arithmetic. Blocking means
each layer's input is frozen at its unperturbed value: a loss attached to
layer l only sees layer l's own weights, and the predicted and context
sides of a pair are separate copies of those weights.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from core.exceptions import InputError, NumericError

F64 = np.float64
KINK_TOLERANCE = 1e-3


def finite_diff(
    loss: Callable[[Dict[str, np.ndarray]], float],
    params: Dict[str, np.ndarray],
    h: float = 1e-5,
) -> Dict[str, np.ndarray]:
    """Central differences (L(θ+h) − L(θ−h)) / 2h for every entry of every tensor

    Raises:
        InputError: If h is not positive
        NumericError: If the loss is not finite at any probe point
    """
    if h <= 0:
        raise InputError(f"step h must be positive, got {h}")
    point = {name: np.array(value, dtype=F64, copy=True) for name, value in params.items()}
    if not np.isfinite(loss(point)):
        raise NumericError("loss is not finite at the expansion point")

    grads: Dict[str, np.ndarray] = {}
    for name, value in point.items():
        flat = value.reshape(-1)
        grad = np.zeros(flat.size, dtype=F64)
        for index in range(flat.size):
            original = flat[index]
            flat[index] = original + h
            plus = loss(point)
            flat[index] = original - h
            minus = loss(point)
            flat[index] = original
            if not (np.isfinite(plus) and np.isfinite(minus)):
                raise NumericError(f"loss is not finite around {name}[{index}]")
            grad[index] = (plus - minus) / (2.0 * h)
        grads[name] = grad.reshape(value.shape)
    return grads


def dense_layer(weight: np.ndarray, activation: str, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(x with a trailing 1, pre-activation, activation) of one dense layer"""
    x_aug = np.append(np.asarray(x, dtype=F64).reshape(-1), 1.0)
    a = weight @ x_aug
    z = np.where(a > 0, a, 0.0) if activation == "relu" else a
    return x_aug, a, z


@dataclass
class DenseInstance:
    """A random dense network with an observed pair (x_prev → x_now) and label y"""

    seed: int
    weights: List[np.ndarray]
    activations: List[str]
    w_pred: List[np.ndarray]
    x_now: np.ndarray
    x_prev: np.ndarray
    y: int
    eta: float
    x_negatives: List[np.ndarray] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.weights)

    def layer_inputs(self, x: np.ndarray) -> List[np.ndarray]:
        """Unperturbed input of every layer for the network input x"""
        inputs = []
        current = np.asarray(x, dtype=F64)
        for weight, activation in zip(self.weights, self.activations):
            inputs.append(current)
            _, _, current = dense_layer(weight, activation, current)
        return inputs

    def tensors(self) -> Dict[str, list]:
        out: Dict[str, list] = {"x_now": self.x_now.tolist(), "x_prev": self.x_prev.tolist(), "y": [self.y]}
        for index, weight in enumerate(self.weights):
            out[f"layer{index}.weight"] = weight.tolist()
            out[f"head{index}.w_pred"] = self.w_pred[index].tolist()
        for index, x in enumerate(self.x_negatives):
            out[f"x_negative{index}"] = x.tolist()
        return out


def random_dense_instance(
    seed: int,
    depth: int = 2,
    min_width: int = 3,
    max_width: int = 16,
    n_negatives: int = 0,
    eta: float = 0.05,
) -> DenseInstance:
    rng = np.random.default_rng(seed)
    widths = rng.integers(min_width, max_width + 1, size=depth + 1)
    weights, w_pred, activations = [], [], []
    for layer in range(depth):
        fan_in = int(widths[layer])
        weights.append(rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(int(widths[layer + 1]), fan_in + 1)))
        w_pred.append(rng.normal(0.0, 1.0 / np.sqrt(widths[layer + 1]), size=(widths[layer + 1], widths[layer + 1])))
        activations.append("relu" if rng.random() < 0.75 else "linear")
    return DenseInstance(
        seed=seed,
        weights=weights,
        activations=activations,
        w_pred=w_pred,
        x_now=rng.normal(size=int(widths[0])),
        x_prev=rng.normal(size=int(widths[0])),
        y=1 if rng.random() < 0.5 else -1,
        eta=eta,
        x_negatives=[rng.normal(size=int(widths[0])) for _ in range(n_negatives)],
    )


def blocked_clapp_loss(
    instance: DenseInstance,
    layer: int,
    weight_z: np.ndarray,
    weight_c: np.ndarray,
    w_pred: np.ndarray,
) -> float:
    """Hinge loss of one layer with both layer inputs frozen"""
    x_now = instance.layer_inputs(instance.x_now)[layer]
    x_prev = instance.layer_inputs(instance.x_prev)[layer]
    activation = instance.activations[layer]
    _, _, z = dense_layer(weight_z, activation, x_now)
    _, _, c = dense_layer(weight_c, activation, x_prev)
    return max(0.0, 1.0 - instance.y * float(z @ w_pred @ c))


def blocked_cpc_loss(
    instance: DenseInstance,
    layer: int,
    weight_z: np.ndarray,
    weight_c: np.ndarray,
    w_pred: np.ndarray,
) -> float:
    """−log softmax of the positive score among the negatives, inputs frozen"""
    activation = instance.activations[layer]
    _, _, c = dense_layer(weight_c, activation, instance.layer_inputs(instance.x_prev)[layer])
    scores = []
    for x in [instance.x_now, *instance.x_negatives]:
        _, _, z = dense_layer(weight_z, activation, instance.layer_inputs(x)[layer])
        scores.append(float(z @ w_pred @ c))
    scores = np.array(scores)
    top = scores.max()
    return float(top + np.log(np.exp(scores - top).sum()) - scores[0])


def blocked_analytic_grad(instance: DenseInstance) -> Dict[str, np.ndarray]:
    """∂L/∂θ of the summed per-layer hinge losses under blocking

    Keys: ``layer{l}.through_z`` and ``layer{l}.through_c`` (the two paths
    through the layer's weights, their sum being the full blocked gradient)
    and ``head{l}.w_pred``.
    """
    inputs_now = instance.layer_inputs(instance.x_now)
    inputs_prev = instance.layer_inputs(instance.x_prev)
    grads: Dict[str, np.ndarray] = {}
    for layer, (weight, activation) in enumerate(zip(instance.weights, instance.activations)):
        x_now, a_now, z = dense_layer(weight, activation, inputs_now[layer])
        x_prev, a_prev, c = dense_layer(weight, activation, inputs_prev[layer])
        w_pred = instance.w_pred[layer]
        u = float(z @ w_pred @ c)
        slope = -instance.y if instance.y * u < 1.0 else 0.0
        d_now = (a_now > 0).astype(F64) if activation == "relu" else np.ones_like(a_now)
        d_prev = (a_prev > 0).astype(F64) if activation == "relu" else np.ones_like(a_prev)
        grads[f"layer{layer}.through_z"] = slope * np.outer((w_pred @ c) * d_now, x_now)
        grads[f"layer{layer}.through_c"] = slope * np.outer((w_pred.T @ z) * d_prev, x_prev)
        grads[f"head{layer}.w_pred"] = slope * np.outer(z, c)
    return grads


def dense_kink(instance: DenseInstance, hinge: bool = True) -> bool:
    """True if any ReLU sits within the kink tolerance of 0 or any hinge of its margin

    Pass ``hinge=False`` for smooth objectives such as the softmax CPC loss.
    """
    for x in [instance.x_now, instance.x_prev, *instance.x_negatives]:
        for layer, current in enumerate(instance.layer_inputs(x)):
            _, a, _ = dense_layer(instance.weights[layer], instance.activations[layer], current)
            if instance.activations[layer] == "relu" and np.any(np.abs(a) < KINK_TOLERANCE):
                return True
    if not hinge:
        return False
    inputs_now = instance.layer_inputs(instance.x_now)
    inputs_prev = instance.layer_inputs(instance.x_prev)
    for layer, weight in enumerate(instance.weights):
        _, _, z = dense_layer(weight, instance.activations[layer], inputs_now[layer])
        _, _, c = dense_layer(weight, instance.activations[layer], inputs_prev[layer])
        if abs(instance.y * float(z @ instance.w_pred[layer] @ c) - 1.0) < KINK_TOLERANCE:
            return True
    return False


def direct_conv_pool(
    x: np.ndarray,
    weight: np.ndarray,
    bias: np.ndarray,
    pad: int,
    pool: int,
    relu: bool = True,
) -> Tuple[np.ndarray, np.ndarray]:
    """Per-window loops for conv (stride 1) → ReLU → optional pool×pool max-pool

    Returns:
        (pre-activation, layer output)
    """
    x = np.pad(np.asarray(x, dtype=F64), ((0, 0), (pad, pad), (pad, pad)))
    out_c, _, kh, kw = weight.shape
    out_h, out_w = x.shape[1] - kh + 1, x.shape[2] - kw + 1
    a = np.zeros((out_c, out_h, out_w))
    for o in range(out_c):
        for i in range(out_h):
            for j in range(out_w):
                a[o, i, j] = np.sum(x[:, i : i + kh, j : j + kw] * weight[o]) + bias[o]
    z = np.where(a > 0, a, 0.0) if relu else a
    if not pool:
        return a, z
    ph, pw = (out_h - pool) // pool + 1, (out_w - pool) // pool + 1
    pooled = np.zeros((out_c, ph, pw))
    for o in range(out_c):
        for i in range(ph):
            for j in range(pw):
                pooled[o, i, j] = z[o, i * pool : i * pool + pool, j * pool : j * pool + pool].max()
    return a, pooled


def pool_near_tie(z: np.ndarray, pool: int) -> bool:
    """True if some pooling window has its two largest values within the kink tolerance

    Windows whose maximum is 0 route no gradient, so ties among silent units
    do not count.
    """
    if not pool:
        return False
    out_c, height, width = z.shape
    for o in range(out_c):
        for i in range(0, height - pool + 1, pool):
            for j in range(0, width - pool + 1, pool):
                window = np.sort(z[o, i : i + pool, j : j + pool].reshape(-1))
                if window[-1] > 0 and window[-1] - window[-2] < KINK_TOLERANCE:
                    return True
    return False


def gru_trajectory(params: Dict[str, np.ndarray], xs: Sequence[np.ndarray]) -> List[np.ndarray]:
    """Hidden states h_0 = 0, h_1, …, h_T of a plain GRU"""
    h = np.zeros(params["w_hr"].shape[0])
    states = [h]
    for x in xs:
        h = _gru_cell(params, x, h, h)
        states.append(h)
    return states


def _gru_cell(params: Dict[str, np.ndarray], x: np.ndarray, frozen: np.ndarray, carry: np.ndarray) -> np.ndarray:
    def sig(v: np.ndarray) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-v))

    r = sig(params["w_ir"] @ x + params["b_ir"] + params["w_hr"] @ frozen + params["b_hr"])
    z = sig(params["w_iz"] @ x + params["b_iz"] + params["w_hz"] @ frozen + params["b_hz"])
    n = np.tanh(params["w_in"] @ x + params["b_in"] + r * (params["w_hn"] @ frozen + params["b_hn"]))
    return (1.0 - z) * n + z * carry


def blocked_gru_functional(
    params: Dict[str, np.ndarray],
    xs: Sequence[np.ndarray],
    frozen: Sequence[np.ndarray],
    signals: Sequence[np.ndarray],
    carry_blocked: bool = False,
) -> float:
    """Σ_t ⟨L_t, h_t⟩ with the recurrent products fed the frozen trajectory

    The carry z ⊙ h_{t-1} uses the live state unless ``carry_blocked``.
    """
    h = np.asarray(frozen[0], dtype=F64)
    total = 0.0
    for t, x in enumerate(xs):
        h = _gru_cell(params, x, frozen[t], frozen[t] if carry_blocked else h)
        total += float(signals[t] @ h)
    return total
