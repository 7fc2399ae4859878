"""Equivalence suite: every local rule checked against an independent oracle.

Rules are exercised through their public functions; oracles come from
``oracles.py``. Instances close to a ReLU or hinge kink are flagged and kept
out of the pass/fail decision; instances whose reference is identically zero
are flagged as degenerate and pass only if the rule is exactly zero too.
"""

import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from components.encoder.api import Encoder
from components.encoder.config import LayerSpec
from components.plasticity.config import HyperParams
from components.plasticity.engine import PlasticityEngine
from components.plasticity.rules import (
    PredictorHead,
    cpc_reference_grads,
    modulator,
    score,
    update_context_layer,
    update_predicted_layer,
    update_predictor,
)
from components.recurrent.api import PARAM_NAMES, GruParams, GruState, eprop_update
from components.recurrent.oracle import bptt_blocked_oracle
from components.stream.api import StreamEvent
from core.atomic import atomic_write_text
from core.exceptions import InputError, ToleranceBreachError
from core.tensor import LayerRecord, activate, conv2d, layer_adjoint, maxpool2d

from .oracles import (
    KINK_TOLERANCE,
    DenseInstance,
    blocked_analytic_grad,
    blocked_clapp_loss,
    blocked_cpc_loss,
    blocked_gru_functional,
    dense_kink,
    direct_conv_pool,
    finite_diff,
    gru_trajectory,
    pool_near_tie,
    random_dense_instance,
)

logger = logging.getLogger(__name__)

ANALYTIC_TOLERANCE = 1e-6
FINITE_DIFF_TOLERANCE = 1e-5
RULES = ("predicted_layer", "context_layer", "predictor", "clapp_total", "cpc", "eprop", "adjoint")
FINITE_DIFF_INSTANCES = 5


class Comparison(BaseModel):
    """One rule tensor against its reference"""

    name: str
    rel_error: float = Field(ge=0.0)
    max_abs_error: float = Field(ge=0.0)
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.rel_error <= self.tolerance


class InstanceResult(BaseModel):
    rule: str
    seed: int
    comparisons: List[Comparison] = Field(default_factory=list)
    kink: bool = False
    degenerate: bool = False

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.comparisons)

    @property
    def max_rel_error(self) -> float:
        return max((c.rel_error for c in self.comparisons), default=0.0)

    @property
    def hard_failure(self) -> bool:
        return not self.kink and not self.passed


class RuleSummary(BaseModel):
    rule: str
    n_instances: int
    n_kink: int
    n_degenerate: int
    max_rel_error: float
    mean_rel_error: float
    max_abs_error: float
    failures: int
    worst_seed: Optional[int] = None

    @property
    def passed(self) -> bool:
        return self.failures == 0


class WorstInstance(BaseModel):
    seed: int
    rel_error: float
    tensors: Dict[str, list]


class GradReport(BaseModel):
    """Per-rule error statistics plus every instance's comparisons"""

    master_seed: int
    instances_per_rule: int
    summaries: Dict[str, RuleSummary] = Field(default_factory=dict)
    instances: List[InstanceResult] = Field(default_factory=list)
    worst: Dict[str, WorstInstance] = Field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(summary.passed for summary in self.summaries.values())

    def failing_rules(self) -> List[str]:
        return [rule for rule, summary in self.summaries.items() if not summary.passed]

    def summary_text(self) -> str:
        lines = [f"{'rule':<12} {'n':>4} {'kink':>5} {'degen':>6} {'max_rel':>11} {'max_abs':>11}  status"]
        for rule, s in self.summaries.items():
            status = "PASS" if s.passed else f"FAIL ({s.failures}, worst seed {s.worst_seed})"
            lines.append(
                f"{rule:<12} {s.n_instances:>4} {s.n_kink:>5} {s.n_degenerate:>6} "
                f"{s.max_rel_error:>11.3e} {s.max_abs_error:>11.3e}  {status}"
            )
        return "\n".join(lines)


def compare(name: str, rule: np.ndarray, reference: np.ndarray, tolerance: float) -> Comparison:
    """Relative L2 error; 0 when both are exactly zero, inf when only the reference is"""
    rule = np.asarray(rule, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    diff = rule - reference
    ref_norm = float(np.linalg.norm(reference))
    diff_norm = float(np.linalg.norm(diff))
    if ref_norm == 0.0:
        rel = 0.0 if diff_norm == 0.0 else float("inf")
    else:
        rel = diff_norm / ref_norm
    max_abs = float(np.max(np.abs(diff))) if diff.size else 0.0
    return Comparison(name=name, rel_error=rel, max_abs_error=max_abs, tolerance=tolerance)


def _encoder_for(instance: DenseInstance) -> Encoder:
    specs = [
        LayerSpec(kind="dense", units=weight.shape[0], activation=activation)
        for weight, activation in zip(instance.weights, instance.activations)
    ]
    encoder = Encoder(specs, (instance.weights[0].shape[1] - 1,), trace_depth=2, dtype=np.float64)
    for target, weight in zip(encoder.weights, instance.weights):
        target[...] = weight
    return encoder


def _tied_heads(instance: DenseInstance) -> List[PredictorHead]:
    return [
        PredictorHead(w_pred=w.copy(), w_retro=w.T.copy(), predicted_layer=layer, context_layer=layer)
        for layer, w in enumerate(instance.w_pred)
    ]


def _pair_states(instance: DenseInstance):
    encoder = _encoder_for(instance)
    encoder.forward(instance.x_prev)
    encoder.forward(instance.x_now)
    return encoder, encoder.trace_at(0), encoder.trace_at(1)


def _degenerate(references: Sequence[np.ndarray]) -> bool:
    return all(not np.any(reference) for reference in references)


RuleOverrides = Dict[str, Callable]


def check_local_rule(rule: str, seed: int, overrides: RuleOverrides) -> Tuple[InstanceResult, Dict[str, list]]:
    """One local rule on every layer of a random 2-layer net with a tied head"""
    instance = random_dense_instance(seed)
    grads = blocked_analytic_grad(instance)
    _, state_now, state_prev = _pair_states(instance)
    result = InstanceResult(rule=rule, seed=seed, kink=dense_kink(instance))
    references = []
    for layer, head in enumerate(_tied_heads(instance)):
        z, c = state_now.vector(layer), state_prev.vector(layer)
        mod = modulator(score(z, c, head), instance.y, instance.eta)
        if rule == "predicted_layer":
            update = overrides.get("predicted_layer", update_predicted_layer)(state_now, c, head, mod).weight
            reference = -instance.eta * grads[f"layer{layer}.through_z"]
            result.comparisons.append(compare(f"layer{layer}.weight", update, reference, ANALYTIC_TOLERANCE))
        elif rule == "context_layer":
            update = overrides.get("context_layer", update_context_layer)(state_prev, z, head, mod).weight
            reference = -instance.eta * grads[f"layer{layer}.through_c"]
            result.comparisons.append(compare(f"layer{layer}.weight", update, reference, ANALYTIC_TOLERANCE))
        else:
            d_pred, d_retro = overrides.get("predictor", update_predictor)(z, c, mod)
            reference = -instance.eta * grads[f"head{layer}.w_pred"]
            result.comparisons.append(compare(f"head{layer}.w_pred", d_pred, reference, ANALYTIC_TOLERANCE))
            result.comparisons.append(compare(f"head{layer}.w_retro", d_retro, reference.T, ANALYTIC_TOLERANCE))
        references.append(reference)
    result.degenerate = _degenerate(references)
    return result, instance.tensors()


def check_clapp_total(seed: int, with_finite_diff: bool) -> Tuple[InstanceResult, Dict[str, list]]:
    """A full engine step against the blocked gradient (and finite differences)"""
    instance = random_dense_instance(seed)
    encoder = _encoder_for(instance)
    hyper = HyperParams(eta=instance.eta, optimizer="sgd", tied_init=True, batch_size=1)
    engine = PlasticityEngine(encoder, hyper, seed)
    for head, tied in zip(engine.heads, _tied_heads(instance)):
        head.w_pred[...] = tied.w_pred
        head.w_retro[...] = tied.w_retro
    engine.clapp_step(StreamEvent(x=instance.x_prev, t=0, source_id=0, y=1))
    engine.clapp_step(StreamEvent(x=instance.x_now, t=1, source_id=0 if instance.y == 1 else 1, y=instance.y))
    buffered = engine.context.buffer.updates

    grads = blocked_analytic_grad(instance)
    result = InstanceResult(rule="clapp_total", seed=seed, kink=dense_kink(instance))
    references = []
    for layer, head in enumerate(engine.heads):
        weight_ref = -instance.eta * (grads[f"layer{layer}.through_z"] + grads[f"layer{layer}.through_c"])
        pred_ref = -instance.eta * grads[f"head{layer}.w_pred"]
        weight_rule = buffered.get(f"layer{layer}.weight", np.zeros_like(weight_ref))
        pred_rule = buffered.get(f"{head.name}.w_pred", np.zeros_like(pred_ref))
        result.comparisons.append(compare(f"layer{layer}.weight", weight_rule, weight_ref, ANALYTIC_TOLERANCE))
        result.comparisons.append(compare(f"{head.name}.w_pred", pred_rule, pred_ref, ANALYTIC_TOLERANCE))
        references.extend([weight_ref, pred_ref])

        if with_finite_diff:
            def loss(p: Dict[str, np.ndarray], layer: int = layer) -> float:
                return blocked_clapp_loss(instance, layer, p["weight"], p["weight"], p["w_pred"])

            numeric = finite_diff(loss, {"weight": instance.weights[layer], "w_pred": instance.w_pred[layer]})
            result.comparisons.append(
                compare(f"layer{layer}.weight[fd]", weight_rule, -instance.eta * numeric["weight"], FINITE_DIFF_TOLERANCE)
            )
            result.comparisons.append(
                compare(f"{head.name}.w_pred[fd]", pred_rule, -instance.eta * numeric["w_pred"], FINITE_DIFF_TOLERANCE)
            )
    result.degenerate = _degenerate(references)
    return result, instance.tensors()


def check_cpc(seed: int, overrides: RuleOverrides) -> Tuple[InstanceResult, Dict[str, list]]:
    """Softmax CPC reference gradients of one layer against finite differences"""
    rng = np.random.default_rng(seed)
    instance = random_dense_instance(seed, depth=1, n_negatives=int(rng.integers(1, 5)))
    encoder = _encoder_for(instance)
    state_prev = encoder.forward(instance.x_prev, record=False)
    z_states = [encoder.forward(x, record=False) for x in [instance.x_now, *instance.x_negatives]]
    rule = overrides.get("cpc", cpc_reference_grads)
    grads = rule(
        state_prev.vector(0),
        z_states[0].vector(0),
        [state.vector(0) for state in z_states[1:]],
        instance.w_pred[0],
        z_records=[state.records[0] for state in z_states],
        c_record=state_prev.records[0],
    )

    def loss(p: Dict[str, np.ndarray]) -> float:
        return blocked_cpc_loss(instance, 0, p["weight_z"], p["weight_c"], p["w_pred"])

    numeric = finite_diff(
        loss,
        {"weight_z": instance.weights[0], "weight_c": instance.weights[0], "w_pred": instance.w_pred[0]},
    )
    result = InstanceResult(rule="cpc", seed=seed, kink=dense_kink(instance, hinge=False))
    result.comparisons = [
        compare("w_pred", grads.w_pred, -numeric["w_pred"], ANALYTIC_TOLERANCE),
        compare("w_z", grads.w_z.weight, -numeric["weight_z"], ANALYTIC_TOLERANCE),
        compare("w_c", grads.w_c.weight, -numeric["weight_c"], ANALYTIC_TOLERANCE),
        compare("softmax_normalization", np.sum(grads.probabilities), np.ones(()), 1e-12),
    ]
    result.degenerate = _degenerate([numeric["w_pred"], numeric["weight_z"], numeric["weight_c"]])
    return result, instance.tensors()


def check_eprop(seed: int, with_finite_diff: bool, overrides: RuleOverrides) -> Tuple[InstanceResult, Dict[str, list]]:
    """e-prop against the blocked BPTT sweep and, optionally, finite differences"""
    rng = np.random.default_rng(seed)
    upper = 6 if with_finite_diff else 16
    input_dim, hidden_dim = (int(v) for v in rng.integers(3, upper + 1, size=2))
    length = int(rng.integers(1, 17))
    params = GruParams.initialize(input_dim, hidden_dim, seed, dtype=np.float64)
    xs = [rng.normal(size=input_dim) for _ in range(length)]
    signals = [rng.normal(size=hidden_dim) for _ in range(length)]

    state = GruState.initial(hidden_dim, np.float64)
    for x in xs:
        state.advance(x, params)
    rule = overrides.get("eprop", eprop_update)
    updates, _ = rule(state.cache, signals)
    reference = bptt_blocked_oracle(state.cache, signals)

    result = InstanceResult(rule="eprop", seed=seed)
    for name in PARAM_NAMES:
        result.comparisons.append(compare(name, updates[name], reference[name], ANALYTIC_TOLERANCE))
    if with_finite_diff:
        tensors = {name: value.copy() for name, value in params.as_dict().items()}
        frozen = gru_trajectory(tensors, xs)
        numeric = finite_diff(lambda p: blocked_gru_functional(p, xs, frozen, signals), tensors)
        for name in PARAM_NAMES:
            result.comparisons.append(compare(f"{name}[fd]", updates[name], numeric[name], FINITE_DIFF_TOLERANCE))
    result.degenerate = _degenerate(list(reference.values()))
    dump = {"xs": [x.tolist() for x in xs], "signals": [s.tolist() for s in signals]}
    dump.update({name: value.tolist() for name, value in params.as_dict().items()})
    return result, dump


def check_adjoint(seed: int, overrides: RuleOverrides) -> Tuple[InstanceResult, Dict[str, list]]:
    """Conv(+pool) layer adjoint against finite differences of ⟨upstream, output⟩"""
    rng = np.random.default_rng(seed)
    channels_in, channels_out = (int(v) for v in rng.integers(1, 4, size=2))
    size = int(rng.integers(4, 9))
    kernel = int(rng.integers(2, 4))
    pad = int(rng.integers(0, 2))
    pool = 2 if rng.random() < 0.5 else 0
    x = rng.normal(size=(channels_in, size, size))
    weight = rng.normal(0.0, 0.5, size=(channels_out, channels_in, kernel, kernel))
    bias = rng.normal(0.0, 0.1, size=channels_out)

    a = conv2d(x, weight, 1, pad) + bias[:, None, None]
    z = activate(a, "relu")
    pooled, pool_record = (z, None) if not pool else maxpool2d(z, pool, pool)
    record = LayerRecord(
        kind="conv",
        x=x,
        a=a,
        z=z,
        pooled=pooled,
        activation="relu",
        weight_shape=weight.shape,
        input_shape=x.shape,
        pad=pad,
        pool_record=pool_record,
    )
    upstream = rng.normal(size=pooled.shape)
    grad = overrides.get("adjoint", layer_adjoint)(upstream, record)

    def functional(p: Dict[str, np.ndarray]) -> float:
        return float(np.sum(upstream * direct_conv_pool(x, p["weight"], p["bias"], pad, pool)[1]))

    numeric = finite_diff(functional, {"weight": weight, "bias": bias})
    direct_a, _ = direct_conv_pool(x, weight, bias, pad, 0, relu=False)
    result = InstanceResult(
        rule="adjoint",
        seed=seed,
        kink=bool(np.any(np.abs(direct_a) < KINK_TOLERANCE)) or pool_near_tie(np.where(a > 0, a, 0.0), pool),
    )
    result.comparisons = [
        compare("weight", grad.weight, numeric["weight"], ANALYTIC_TOLERANCE),
        compare("bias", grad.bias, numeric["bias"], ANALYTIC_TOLERANCE),
    ]
    result.degenerate = _degenerate([numeric["weight"], numeric["bias"]])
    return result, {"x": x.tolist(), "weight": weight.tolist(), "bias": bias.tolist(), "upstream": upstream.tolist()}


def _run_instance(rule: str, seed: int, index: int, overrides: RuleOverrides):
    if rule in ("predicted_layer", "context_layer", "predictor"):
        return check_local_rule(rule, seed, overrides)
    if rule == "clapp_total":
        return check_clapp_total(seed, with_finite_diff=True)
    if rule == "cpc":
        return check_cpc(seed, overrides)
    if rule == "eprop":
        return check_eprop(seed, index < FINITE_DIFF_INSTANCES, overrides)
    return check_adjoint(seed, overrides)


def equivalence_report(
    scope: str = "all",
    n_instances: int = 50,
    master_seed: int = 20240101,
    overrides: Optional[RuleOverrides] = None,
) -> GradReport:
    """Run seeded random instances of every rule in scope and aggregate the errors

    Args:
        scope: ``all`` or a comma-separated list of rule names
        n_instances: Instances per rule
        master_seed: Seed from which every instance seed is drawn
        overrides: Replacement rule functions by rule name

    Raises:
        InputError: If the scope names an unknown rule
    """
    rules = list(RULES) if scope == "all" else [name.strip() for name in scope.split(",")]
    unknown = [rule for rule in rules if rule not in RULES]
    if unknown:
        raise InputError(f"unknown rules {unknown}; choose from {list(RULES)}")
    overrides = overrides or {}
    seeds = np.random.default_rng(master_seed).integers(0, 2**31 - 1, size=(len(RULES), n_instances))

    report = GradReport(master_seed=master_seed, instances_per_rule=n_instances)
    for rule in rules:
        results: List[InstanceResult] = []
        worst_tensors: Optional[Dict[str, list]] = None
        worst: Optional[InstanceResult] = None
        for index, seed in enumerate(seeds[RULES.index(rule)]):
            result, tensors = _run_instance(rule, int(seed), index, overrides)
            results.append(result)
            if result.kink:
                logger.warning(f"{rule}: seed {seed} is near a kink, excluded from assertions")
            elif result.degenerate:
                logger.debug(f"{rule}: seed {seed} has an all-zero reference")
            if not result.kink and (worst is None or result.max_rel_error > worst.max_rel_error):
                worst, worst_tensors = result, tensors

        asserted = [r for r in results if not r.kink]
        errors = [r.max_rel_error for r in asserted]
        failures = [r for r in asserted if not r.passed]
        report.summaries[rule] = RuleSummary(
            rule=rule,
            n_instances=len(results),
            n_kink=sum(r.kink for r in results),
            n_degenerate=sum(r.degenerate for r in results),
            max_rel_error=max(errors, default=0.0),
            mean_rel_error=float(np.mean(errors)) if errors else 0.0,
            max_abs_error=max(
                (c.max_abs_error for r in asserted for c in r.comparisons), default=0.0
            ),
            failures=len(failures),
            worst_seed=worst.seed if worst is not None else None,
        )
        if worst is not None:
            report.worst[rule] = WorstInstance(seed=worst.seed, rel_error=worst.max_rel_error, tensors=worst_tensors)
        report.instances.extend(results)
        logger.info(f"Checked {rule}: {len(results)} instances, {len(failures)} failures")
    return report


def assert_report(report: GradReport) -> GradReport:
    """Raise if any unflagged instance exceeded its tolerance

    Raises:
        ToleranceBreachError: Naming every failing rule
    """
    failing = report.failing_rules()
    if failing:
        raise ToleranceBreachError(f"tolerance exceeded for {', '.join(failing)}", failing)
    return report


def write_report(report: GradReport, directory: Path) -> Path:
    """Write gradcheck.json and the plain-text summary table into a directory"""
    directory = Path(directory)
    atomic_write_text(directory / "gradcheck.json", report.model_dump_json(indent=2))
    atomic_write_text(directory / "gradcheck.txt", report.summary_text() + "\n")
    return directory / "gradcheck.json"
