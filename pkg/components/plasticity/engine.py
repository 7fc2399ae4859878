"""Plasticity engine: per-event local updates, batch averaging and application."""

import logging
from collections import deque
from dataclasses import dataclass
from typing import Deque, Dict, List, Optional, Sequence, Tuple

import numpy as np

from components.encoder.api import Encoder, EncoderState, vector_upstream
from components.recurrent.api import GruParams, RecurrentLearner
from components.recurrent.config import RecurrentConfig
from components.stream.api import StreamEvent
from core.exceptions import ConfigError, HistoryError, InputError
from core.mode_interface import ModeType, StepResult
from core.tensor import ensure_finite, layer_adjoint, layer_input_adjoint

from .buffer import UpdateBuffer
from .config import HyperParams
from .metrics import MetricRow
from .optimizer import build_optimizer
from .rules import (
    ContrastiveLoss,
    PredictorHead,
    clapp_loss,
    modulator,
    score_coefficients,
    split_score_pair,
    update_context_layer,
    update_predicted_layer,
    update_predictor,
)

logger = logging.getLogger(__name__)

# context_layer value of a head whose context is the recurrent layer
RECURRENT_CONTEXT = -1


@dataclass
class StreamContext:
    """Everything one stream needs: an encoder trace, recent labels and a buffer"""

    encoder: Encoder
    buffer: UpdateBuffer
    labels: Deque[int]
    learner: Optional[RecurrentLearner] = None

    def observe(self, event: StreamEvent) -> EncoderState:
        """Run the encoder on the event and push its label and recurrent step"""
        state = self.encoder.forward(event.x, record=True)
        self.labels.append(event.y)
        if self.learner is not None:
            self.learner.advance(state.vectors[-1])
        return state

    def pair_label(self, offset: int) -> int:
        """−1 if a saccade happened anywhere in (t − offset, t], else +1"""
        recent = list(self.labels)[-offset:]
        return -1 if -1 in recent else 1

    def reset(self) -> None:
        self.encoder.reset()
        self.labels.clear()
        if self.learner is not None:
            self.learner.reset()


class PlasticityEngine:
    """Owns the encoder, the predictor heads and the update machinery.

    Heads are built per (layer, offset). In ``clapp`` and ``clapp_s`` every
    layer gets a head whose context is the same layer or the layer above; in
    the reference modes only the top layer of each module carries one. With a
    recurrent layer the top head takes the GRU output as context.
    """

    def __init__(
        self,
        encoder: Encoder,
        hyper: HyperParams,
        seed: int,
        recurrent: Optional[RecurrentConfig] = None,
    ):
        self.encoder = encoder
        self.hyper = hyper
        self.recurrent_config = recurrent if recurrent is not None and recurrent.enabled else None
        if self.recurrent_config is not None and hyper.mode is not ModeType.CLAPP:
            raise ConfigError("a recurrent layer is only supported in clapp mode", "recurrent.enabled")
        try:
            self.module_groups = hyper.groups_for(encoder.n_layers)
        except ValueError as e:
            raise ConfigError(str(e), "hyper.module_groups") from e
        if encoder.trace_depth <= hyper.max_offset:
            raise ConfigError(
                f"encoder trace depth {encoder.trace_depth} cannot reach offset {hyper.max_offset}",
                "hyper.delta_t",
            )

        rng = np.random.default_rng(seed)
        self.gru: Optional[GruParams] = None
        if self.recurrent_config is not None:
            self.gru = GruParams.initialize(
                encoder.vector_dim(encoder.n_layers - 1),
                self.recurrent_config.hidden_dim,
                int(rng.integers(2**31)),
                encoder.weights[0].dtype,
            )
        self.heads: List[PredictorHead] = self._build_heads(rng)
        self.optimizer = build_optimizer(hyper)
        self.context = self.new_context(encoder)
        self.batches = 0
        logger.info(
            f"Plasticity engine ready: mode={hyper.mode.value}, {len(self.heads)} heads, "
            f"optimizer={hyper.optimizer}"
        )

    def _build_heads(self, rng: np.random.Generator) -> List[PredictorHead]:
        encoder, hyper = self.encoder, self.hyper
        top = encoder.n_layers - 1
        if hyper.synchronous and hyper.mode in (ModeType.HINGE_CPC, ModeType.CPC_GIM):
            pairs = [(group[-1], group[-1]) for group in self.module_groups]
        else:
            pairs = []
            for layer in range(encoder.n_layers):
                context = layer if hyper.context_source == "same_layer" else min(layer + 1, top)
                if self.gru is not None and layer == top:
                    context = RECURRENT_CONTEXT
                pairs.append((layer, context))

        heads = []
        for predicted, context in pairs:
            dim_c = self.gru.hidden_dim if context == RECURRENT_CONTEXT else encoder.vector_dim(context)
            for offset in hyper.prediction_offsets:
                heads.append(
                    PredictorHead.initialize(
                        encoder.vector_dim(predicted),
                        dim_c,
                        rng,
                        predicted_layer=predicted,
                        context_layer=context,
                        offset=offset,
                        tied=hyper.tied_init,
                        retrodiction=hyper.retrodiction,
                        dtype=encoder.weights[0].dtype,
                    )
                )
        return heads

    def new_context(self, encoder: Optional[Encoder] = None) -> StreamContext:
        """Context for a worker; encoders are forked so weights stay shared"""
        learner = None
        if self.gru is not None:
            learner = RecurrentLearner(
                self.gru,
                chunk_length=self.recurrent_config.chunk_length,
                max_delay=self.hyper.max_offset,
                carry_blocked=self.recurrent_config.carry_blocked,
            )
        return StreamContext(
            encoder=encoder if encoder is not None else self.encoder.fork(),
            buffer=UpdateBuffer(),
            labels=deque(maxlen=self.hyper.max_offset),
            learner=learner,
        )

    def parameters(self) -> Dict[str, np.ndarray]:
        """Every trainable tensor by name"""
        params = dict(self.encoder.parameters())
        for head in self.heads:
            params.update(head.tensors())
        if self.gru is not None:
            params.update({f"gru.{name}": value for name, value in self.gru.as_dict().items()})
        return params

    def load_tensors(self, tensors: Dict[str, np.ndarray]) -> None:
        """Overwrite every trainable tensor from a checkpoint

        Raises:
            InputError: If a tensor is missing or has the wrong shape
        """
        for name, target in self.parameters().items():
            if name not in tensors:
                raise InputError(f"checkpoint is missing tensor {name}")
            if tensors[name].shape != target.shape:
                raise InputError(f"tensor {name}: checkpoint shape {tensors[name].shape} != {target.shape}")
            target[...] = tensors[name]

    def _context_pair(
        self, head: PredictorHead, ctx: StreamContext
    ) -> Tuple[EncoderState, np.ndarray]:
        state_prev = ctx.encoder.trace_at(head.offset)
        if head.context_layer == RECURRENT_CONTEXT:
            return state_prev, ctx.learner.hidden_at(head.offset)
        return state_prev, state_prev.vector(head.context_layer)

    def clapp_step(self, event: StreamEvent, ctx: Optional[StreamContext] = None) -> StepResult:
        """Time-local CLAPP: one (z^t, c^{t−δt}) pair per head, labelled by the stream"""
        ctx = ctx or self.context
        state_now = ctx.observe(event)
        gate = self.hyper.gate_eta
        result = StepResult()

        for head in self.heads:
            try:
                state_prev, c = self._context_pair(head, ctx)
            except HistoryError:
                ctx.buffer.skipped += 1
                result.skipped += 1
                continue
            y = ctx.pair_label(head.offset)
            z = state_now.vector(head.predicted_layer)
            u_z, u_c = split_score_pair(z, c, head)
            mod_z = modulator(u_z, y, gate)
            mod_c = modulator(u_c, y, gate)
            loss = clapp_loss(u_z, y)
            ctx.buffer.record(head.predicted_layer, loss, mod_z.active)
            result.losses[head.name] = loss
            result.violations[head.name] = mod_z.active

            if mod_z.active:
                ctx.buffer.add_layer(
                    head.predicted_layer, update_predicted_layer(state_now, c, head, mod_z)
                )
                d_pred, d_retro = update_predictor(z, c, mod_z)
                ctx.buffer.add_head(head.name, d_pred, None if head.retro_frozen else d_retro)
            if mod_c.active and not head.retro_frozen:
                if head.context_layer == RECURRENT_CONTEXT:
                    ctx.learner.add_signal(head.offset, mod_c.gamma * (head.w_retro @ z))
                else:
                    ctx.buffer.add_layer(
                        head.context_layer, update_context_layer(state_prev, z, head, mod_c)
                    )

        ctx.buffer.events += 1
        if ctx.learner is not None and ctx.learner.ready():
            ctx.buffer.add_recurrent(ctx.learner.flush())
        return result

    def clapp_s_step(
        self,
        event: StreamEvent,
        negatives: Sequence[np.ndarray],
        ctx: Optional[StreamContext] = None,
    ) -> StepResult:
        """Synchronous CLAPP: the fixation pair plus N negatives, averaged over N+1 terms"""
        if not negatives:
            raise InputError("clapp_s needs at least one negative frame")
        ctx = ctx or self.context
        state_now = ctx.observe(event)
        negative_states = [ctx.encoder.forward(x, record=False) for x in negatives]
        terms = [(state_now, 1)] + [(state, -1) for state in negative_states]
        scale = 1.0 / len(terms)
        gate = self.hyper.gate_eta
        result = StepResult()

        for head in self.heads:
            try:
                state_prev, c = self._context_pair(head, ctx)
            except HistoryError:
                ctx.buffer.skipped += 1
                result.skipped += 1
                continue
            if ctx.pair_label(head.offset) == -1:
                # the context belongs to another sample, so there is no positive pair
                ctx.buffer.skipped += 1
                result.skipped += 1
                continue

            loss_sum, active = 0.0, 0
            for state, y in terms:
                z = state.vector(head.predicted_layer)
                u_z, u_c = split_score_pair(z, c, head)
                mod_z = modulator(u_z, y, gate)
                mod_c = modulator(u_c, y, gate)
                loss_sum += clapp_loss(u_z, y)
                if mod_z.active:
                    active += 1
                    ctx.buffer.add_layer(
                        head.predicted_layer,
                        update_predicted_layer(state, c, head, mod_z),
                        scale,
                    )
                    d_pred, d_retro = update_predictor(z, c, mod_z)
                    ctx.buffer.add_head(
                        head.name, d_pred, None if head.retro_frozen else d_retro, scale
                    )
                if mod_c.active and not head.retro_frozen:
                    ctx.buffer.add_layer(
                        head.context_layer,
                        update_context_layer(state_prev, z, head, mod_c),
                        scale,
                    )
            loss = loss_sum * scale
            ctx.buffer.record(head.predicted_layer, loss, active * scale)
            result.losses[head.name] = loss
            result.violations[head.name] = active > 0

        ctx.buffer.events += 1
        return result

    def module_backward(
        self,
        state: EncoderState,
        group: Sequence[int],
        vector_grad: np.ndarray,
        buffer: UpdateBuffer,
    ) -> None:
        """Push a gradient on the module's top vector down through the module's layers"""
        top = group[-1]
        upstream = vector_upstream(vector_grad, state.records[top].pooled.shape)
        for layer in reversed(group):
            record = state.records[layer]
            buffer.add_layer(layer, layer_adjoint(upstream, record))
            if layer != group[0]:
                upstream = layer_input_adjoint(upstream, record, self.encoder.weights[layer])

    def reference_step(
        self,
        event: StreamEvent,
        negatives: Sequence[np.ndarray],
        loss: ContrastiveLoss,
        ctx: Optional[StreamContext] = None,
    ) -> StepResult:
        """Hinge-CPC or CPC/GIM step with backpropagation inside each module.

        The context side receives its gradient through W_predᵀ (weight
        transport); W_retro is left untouched.
        """
        if not negatives:
            raise InputError(f"{self.hyper.mode.value} needs at least one negative frame")
        ctx = ctx or self.context
        state_now = ctx.observe(event)
        negative_states = [ctx.encoder.forward(x, record=False) for x in negatives]
        z_states = [state_now, *negative_states]
        gate = self.hyper.gate_eta
        result = StepResult()
        groups = {group[-1]: group for group in self.module_groups}

        for head in self.heads:
            group = groups[head.predicted_layer]
            try:
                state_prev, c = self._context_pair(head, ctx)
            except HistoryError:
                ctx.buffer.skipped += 1
                result.skipped += 1
                continue
            if ctx.pair_label(head.offset) == -1:
                ctx.buffer.skipped += 1
                result.skipped += 1
                continue

            prediction = head.w_pred @ c
            zs = [state.vector(head.predicted_layer) for state in z_states]
            value, coefficients, _ = score_coefficients(np.array([z @ prediction for z in zs]), loss)
            contrast = sum(coef * z for coef, z in zip(coefficients, zs))

            ctx.buffer.add_head(head.name, gate * np.outer(contrast, c), None)
            for coef, state in zip(coefficients, z_states):
                if coef != 0.0:
                    self.module_backward(state, group, gate * coef * prediction, ctx.buffer)
            self.module_backward(state_prev, group, gate * (head.w_pred.T @ contrast), ctx.buffer)

            violated = float(np.any(coefficients != 0.0)) if loss == "hinge" else 1.0
            ctx.buffer.record(head.predicted_layer, value, violated)
            result.losses[head.name] = value
            result.violations[head.name] = bool(violated)

        ctx.buffer.events += 1
        return result

    def merge(self, contexts: Sequence[StreamContext]) -> None:
        """Fold worker buffers into the main buffer in worker order"""
        self.context.buffer.merge(ctx.buffer for ctx in contexts if ctx is not self.context)

    def apply(self, step: int) -> List[MetricRow]:
        """Average the buffered updates over the batch and apply them

        Returns:
            One metric row per layer that saw a head evaluation in this batch

        Raises:
            NumericError: If an averaged update is not finite
        """
        buffer = self.context.buffer
        averaged = {name: ensure_finite(value, name) for name, value in buffer.averaged().items()}
        rows = []
        for layer, stats in sorted(buffer.stats.items()):
            norm_sq = sum(
                float(np.sum(np.square(value, dtype=np.float64)))
                for name, value in averaged.items()
                if name.startswith(f"layer{layer}.")
            )
            rows.append(
                MetricRow(
                    step=step,
                    layer=layer,
                    mode=self.hyper.mode.value,
                    loss=stats.mean_loss,
                    margin_violation_rate=stats.violation_rate,
                    update_norm=float(np.sqrt(norm_sq)),
                )
            )
        if averaged:
            self.optimizer.apply(self.parameters(), averaged)
        logger.debug(
            f"Applied batch {self.batches}: {buffer.events} events, {len(averaged)} tensors, "
            f"{buffer.skipped} skipped"
        )
        buffer.clear()
        self.batches += 1
        return rows

    def flush_recurrent(self, contexts: Optional[Sequence[StreamContext]] = None) -> None:
        """Turn any pending recurrent steps of each context into buffered updates"""
        for ctx in contexts or [self.context]:
            if ctx.learner is None:
                continue
            updates = ctx.learner.flush(final=True)
            if updates is not None:
                ctx.buffer.add_recurrent(updates)
