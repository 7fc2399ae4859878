"""GRU with gradient-blocked recurrence and e-prop updates.

The hidden state h_{t-1} is treated as a constant wherever it enters a
recurrent weight product (W_hr, W_hz, W_hn). The carry term z ⊙ h_{t-1}
keeps its per-unit dependence, which is what the eligibility traces follow
forward in time.
"""

import logging
from dataclasses import dataclass, field, fields
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.exceptions import DimensionError, HistoryError, InputError
from core.tensor import DEFAULT_DTYPE

logger = logging.getLogger(__name__)

PARAM_NAMES = (
    "w_ir", "w_iz", "w_in",
    "w_hr", "w_hz", "w_hn",
    "b_ir", "b_iz", "b_in",
    "b_hr", "b_hz", "b_hn",
)


def sigmoid(a: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * a))


@dataclass
class GruParams:
    """Input weights (hidden×input), recurrent weights (hidden×hidden) and biases"""

    w_ir: np.ndarray
    w_iz: np.ndarray
    w_in: np.ndarray
    w_hr: np.ndarray
    w_hz: np.ndarray
    w_hn: np.ndarray
    b_ir: np.ndarray
    b_iz: np.ndarray
    b_in: np.ndarray
    b_hr: np.ndarray
    b_hz: np.ndarray
    b_hn: np.ndarray

    def __post_init__(self) -> None:
        hidden, _ = self.w_ir.shape
        for name in ("w_iz", "w_in"):
            if getattr(self, name).shape != self.w_ir.shape:
                raise DimensionError(f"{name} shape {getattr(self, name).shape} != {self.w_ir.shape}")
        for name in ("w_hr", "w_hz", "w_hn"):
            if getattr(self, name).shape != (hidden, hidden):
                raise DimensionError(f"{name} must be {hidden}×{hidden}, got {getattr(self, name).shape}")
        for name in PARAM_NAMES[6:]:
            if getattr(self, name).shape != (hidden,):
                raise DimensionError(f"{name} must have {hidden} entries, got {getattr(self, name).shape}")

    @property
    def hidden_dim(self) -> int:
        return self.w_ir.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w_ir.shape[1]

    @classmethod
    def initialize(
        cls, input_dim: int, hidden_dim: int, seed: int, dtype: type = DEFAULT_DTYPE
    ) -> "GruParams":
        """Uniform init in ±1/√hidden_dim"""
        rng = np.random.default_rng(seed)
        bound = 1.0 / np.sqrt(hidden_dim)
        shapes = cls.shapes(input_dim, hidden_dim)
        return cls(**{name: rng.uniform(-bound, bound, size=shapes[name]).astype(dtype) for name in PARAM_NAMES})

    @classmethod
    def zeros(cls, input_dim: int, hidden_dim: int, dtype: type = DEFAULT_DTYPE) -> "GruParams":
        shapes = cls.shapes(input_dim, hidden_dim)
        return cls(**{name: np.zeros(shapes[name], dtype=dtype) for name in PARAM_NAMES})

    @staticmethod
    def shapes(input_dim: int, hidden_dim: int) -> Dict[str, Tuple[int, ...]]:
        shapes: Dict[str, Tuple[int, ...]] = {}
        for name in PARAM_NAMES:
            if name.startswith("w_i"):
                shapes[name] = (hidden_dim, input_dim)
            elif name.startswith("w_h"):
                shapes[name] = (hidden_dim, hidden_dim)
            else:
                shapes[name] = (hidden_dim,)
        return shapes

    def as_dict(self) -> Dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, tensors: Dict[str, np.ndarray]) -> "GruParams":
        missing = [name for name in PARAM_NAMES if name not in tensors]
        if missing:
            raise InputError(f"GRU parameters missing: {missing}")
        return cls(**{name: tensors[name] for name in PARAM_NAMES})


@dataclass(frozen=True)
class GruStep:
    """Forward cache of one step: input, previous state, gates and new state"""

    x: np.ndarray
    h_prev: np.ndarray
    r: np.ndarray
    z: np.ndarray
    n: np.ndarray
    hn_lin: np.ndarray
    h: np.ndarray


@dataclass
class GruState:
    """Hidden vector plus the per-step caches needed by the update pass"""

    h: np.ndarray
    cache: List[GruStep] = field(default_factory=list)

    @classmethod
    def initial(cls, hidden_dim: int, dtype: type = DEFAULT_DTYPE) -> "GruState":
        return cls(h=np.zeros(hidden_dim, dtype=dtype))

    def advance(self, x: np.ndarray, params: GruParams) -> GruStep:
        step = gru_forward_blocked(x, self.h, params)
        self.cache.append(step)
        self.h = step.h
        return step


def gru_forward_blocked(x: np.ndarray, h_prev: np.ndarray, params: GruParams) -> GruStep:
    """One GRU step; values equal a standard GRU, blocking only shapes gradients

    Raises:
        DimensionError: If x or h_prev do not match the parameters
    """
    if x.shape != (params.input_dim,):
        raise DimensionError(f"GRU input shape {x.shape} != ({params.input_dim},)")
    if h_prev.shape != (params.hidden_dim,):
        raise DimensionError(f"GRU state shape {h_prev.shape} != ({params.hidden_dim},)")
    r = sigmoid(params.w_ir @ x + params.b_ir + params.w_hr @ h_prev + params.b_hr)
    z = sigmoid(params.w_iz @ x + params.b_iz + params.w_hz @ h_prev + params.b_hz)
    hn_lin = params.w_hn @ h_prev + params.b_hn
    n = np.tanh(params.w_in @ x + params.b_in + r * hn_lin)
    h = (1.0 - z) * n + z * h_prev
    return GruStep(x=x, h_prev=h_prev, r=r, z=z, n=n, hn_lin=hn_lin, h=h)


def local_gradients(step: GruStep) -> Dict[str, np.ndarray]:
    """∂h_t/∂θ with h_{t-1} held constant; row j of each matrix belongs to unit j"""
    delta_n = (1.0 - step.z) * (1.0 - step.n ** 2)
    delta_z = (step.h_prev - step.n) * step.z * (1.0 - step.z)
    delta_r = delta_n * step.hn_lin * step.r * (1.0 - step.r)
    return {
        "w_ir": np.outer(delta_r, step.x),
        "w_iz": np.outer(delta_z, step.x),
        "w_in": np.outer(delta_n, step.x),
        "w_hr": np.outer(delta_r, step.h_prev),
        "w_hz": np.outer(delta_z, step.h_prev),
        "w_hn": np.outer(delta_n * step.r, step.h_prev),
        "b_ir": delta_r,
        "b_iz": delta_z,
        "b_in": delta_n,
        "b_hr": delta_r,
        "b_hz": delta_z,
        "b_hn": delta_n * step.r,
    }


def _per_unit(values: np.ndarray, like: np.ndarray) -> np.ndarray:
    return values[:, None] if like.ndim == 2 else values


def eprop_update(
    caches: Sequence[GruStep],
    signals: Sequence[np.ndarray],
    initial_traces: Optional[Dict[str, np.ndarray]] = None,
    carry_blocked: bool = False,
) -> Tuple[Dict[str, np.ndarray], Dict[str, np.ndarray]]:
    """Forward-in-time parameter updates from eligibility traces

    Each trace follows E_t = z_t ⊙ E_{t-1} + ∂h_t/∂θ along the carry path; the
    update is Σ_t L_t ⊙ E_t. With ``carry_blocked`` the trace is just the local
    term (pure one-step credit).

    Args:
        caches: Forward caches of consecutive steps
        signals: Learning signal ∂F/∂h_t for each step
        initial_traces: Traces carried over from a previous chunk

    Returns:
        (updates, final traces) keyed by parameter name

    Raises:
        HistoryError: If the cache is empty or does not cover every signal
    """
    if not caches:
        raise HistoryError("e-prop needs a recorded forward cache")
    if len(caches) != len(signals):
        raise HistoryError(f"{len(signals)} learning signals for {len(caches)} cached steps")

    traces = {name: value.copy() for name, value in (initial_traces or {}).items()}
    updates: Dict[str, np.ndarray] = {}
    for step, signal in zip(caches, signals):
        local = local_gradients(step)
        for name, term in local.items():
            if name in traces and not carry_blocked:
                traces[name] = _per_unit(step.z, term) * traces[name] + term
            else:
                traces[name] = term
            contribution = _per_unit(signal, term) * traces[name]
            updates[name] = updates[name] + contribution if name in updates else contribution
    return updates, traces


class RecurrentLearner:
    """Online GRU context layer trained by e-prop in chunks.

    Learning signals for h_{t-δ} arrive δ steps late, so a chunk is only
    turned into updates once every step in it is at least ``max_delay``
    steps old. Traces carry across chunk boundaries.
    """

    def __init__(
        self,
        params: GruParams,
        chunk_length: int = 16,
        max_delay: int = 1,
        carry_blocked: bool = False,
    ):
        self.params = params
        self.chunk_length = chunk_length
        self.max_delay = max_delay
        self.carry_blocked = carry_blocked
        self.state = GruState.initial(params.hidden_dim, params.w_ir.dtype)
        self._signals: List[np.ndarray] = []
        self._traces: Optional[Dict[str, np.ndarray]] = None

    def advance(self, x: np.ndarray) -> np.ndarray:
        self.state.advance(x, self.params)
        self._signals.append(np.zeros(self.params.hidden_dim, dtype=self.state.h.dtype))
        return self.state.h

    def hidden_at(self, delta: int) -> np.ndarray:
        """Hidden state produced ``delta`` steps ago"""
        index = len(self.state.cache) - 1 - delta
        if delta < 0 or index < 0:
            raise HistoryError(f"GRU cache holds {len(self.state.cache)} steps, cannot look back {delta}")
        return self.state.cache[index].h

    def add_signal(self, delta: int, signal: np.ndarray) -> None:
        index = len(self._signals) - 1 - delta
        if delta < 0 or index < 0:
            raise HistoryError(f"no cached GRU step {delta} steps back")
        self._signals[index] = self._signals[index] + signal

    def ready(self) -> bool:
        return len(self.state.cache) >= self.chunk_length + self.max_delay

    def flush(self, final: bool = False) -> Optional[Dict[str, np.ndarray]]:
        """Updates for the oldest complete chunk, or for everything when final"""
        if not self.state.cache or (not final and not self.ready()):
            return None
        count = len(self.state.cache) if final else self.chunk_length
        updates, self._traces = eprop_update(
            self.state.cache[:count],
            self._signals[:count],
            self._traces,
            self.carry_blocked,
        )
        del self.state.cache[:count]
        del self._signals[:count]
        logger.debug(f"Flushed e-prop chunk of {count} steps")
        return updates

    def reset(self) -> None:
        self.state = GruState.initial(self.params.hidden_dim, self.params.w_ir.dtype)
        self._signals = []
        self._traces = None
