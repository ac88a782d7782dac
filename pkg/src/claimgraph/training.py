"""Optimization loop: AdamW with decoupled weight decay, linear
warmup/decay schedule, global gradient-norm clipping, per-epoch validation
with best-checkpoint selection, and finite-difference gradient verification.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .corpus import Corpus, collapsed_label_universe
from .metrics import MetricsReport, score_corpus
from .model.network import InferenceConfig, LossConfig, joint_loss, predict
from .model.params import (
    STANDARD_ENTITY_LABELS,
    ModelParams,
    init_params,
)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 40
    batch_size: int = 8
    learning_rate: float = 5e-5
    warmup_fraction: float = 0.1
    weight_decay: float = 0.01
    max_grad_norm: float = 1.0
    dropout: float = 0.1
    seed: int = 0
    dim: int = 32
    max_span_size: int = 20
    span_repr_mode: str = "attention"
    attribute_filtering: str = "cascaded"
    attrs_as_ents: bool = False
    neg_entity_count: int = 100
    neg_relation_count: int = 100
    attr_threshold: float = 0.55
    rel_threshold: float = 0.4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.epochs <= 0 or self.batch_size <= 0 or self.learning_rate <= 0:
            raise ValueError("epochs, batch size and learning rate must be positive")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ValueError("warmup fraction must be in [0, 1)")
        if self.weight_decay < 0 or self.max_grad_norm <= 0:
            raise ValueError("invalid weight decay or gradient norm bound")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    def inference_config(self) -> InferenceConfig:
        return InferenceConfig(
            attr_threshold=self.attr_threshold, rel_threshold=self.rel_threshold,
            max_span_size=self.max_span_size, span_repr_mode=self.span_repr_mode,
            attribute_filtering=self.attribute_filtering)

    def loss_config(self, train: bool = True) -> LossConfig:
        return LossConfig(
            neg_entity_count=self.neg_entity_count,
            neg_relation_count=self.neg_relation_count,
            dropout=self.dropout if train else 0.0,
            span_repr_mode=self.span_repr_mode, train=train)


def lr_at_step(step: int, total_steps: int, config: TrainConfig) -> float:
    """Piecewise-linear schedule: 0 -> peak over the warmup steps, then
    peak -> 0 at total_steps."""
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    if total_steps == 0:
        return 0.0
    warmup = int(round(config.warmup_fraction * total_steps))
    peak = config.learning_rate
    if step < warmup:
        return peak * step / warmup
    return peak * (total_steps - step) / (total_steps - warmup)


class NonFiniteGradientError(RuntimeError):
    pass


def init_optimizer_state(params: ModelParams) -> dict:
    return {"m": params.zero_grads(), "v": params.zero_grads()}


def _decayable(name: str) -> bool:
    # Biases and the width embedding table are excluded from weight decay.
    return not name.endswith(".b") and name != "width.table"


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so the global L2 norm is at most
    max_norm; returns the pre-clip norm."""
    total = 0.0
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient in {name!r}")
        total += float(np.sum(g * g))
    norm = float(np.sqrt(total))
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


def optimizer_step(params: ModelParams, grads: dict, state: dict, step: int,
                   config: TrainConfig, lr: float | None = None) -> None:
    """One AdamW update (in place).  ``step`` is 1-based for bias correction.

    Gradients are globally norm-clipped first; weight decay is decoupled,
    applied to the pre-update weights and scaled by the learning rate.
    """
    if lr is None:
        lr = config.learning_rate
    clip_gradients(grads, config.max_grad_norm)
    b1, b2, eps = config.adam_beta1, config.adam_beta2, config.adam_eps
    bias1 = 1.0 - b1 ** step
    bias2 = 1.0 - b2 ** step
    for name, p in params.tensors.items():
        g = grads[name]
        m = state["m"][name]
        v = state["v"][name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        update = (m / bias1) / (np.sqrt(v / bias2) + eps)
        if config.weight_decay and _decayable(name):
            update = update + config.weight_decay * p
        p -= lr * update


@dataclass
class EpochRecord:
    loss: float
    entity_loss: float
    relation_loss: float
    attribute_loss: float
    val_micro_f1: dict[str, float] | None = None
    val_avg_f1: float | None = None


@dataclass
class TrainReport:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int | None = None
    best_avg_f1: float | None = None
    checkpoint_path: str | None = None

    def to_json(self) -> dict:
        return {
            "epochs": [
                {"loss": e.loss, "entity_loss": e.entity_loss,
                 "relation_loss": e.relation_loss, "attribute_loss": e.attribute_loss,
                 "val_micro_f1": e.val_micro_f1, "val_avg_f1": e.val_avg_f1}
                for e in self.epochs],
            "best_epoch": self.best_epoch,
            "best_avg_f1": self.best_avg_f1,
            "checkpoint_path": self.checkpoint_path,
        }


def build_model(corpus: Corpus, provider, config: TrainConfig,
                rng: np.random.Generator) -> ModelParams:
    """Fresh parameters sized for the configured label mode."""
    if config.attrs_as_ents:
        labels = tuple(str(l) for l in collapsed_label_universe(True, corpus))
        mode = "attrs_as_ents"
    else:
        labels = STANDARD_ENTITY_LABELS
        mode = "standard"
    return init_params(
        dim=config.dim if provider is None else provider.dim,
        max_span_size=config.max_span_size, entity_labels=labels, rng=rng,
        label_mode=mode, provider=provider,
        config_echo={"train_config": _config_echo(config)})


def _config_echo(config: TrainConfig) -> dict:
    return {k: getattr(config, k) for k in (
        "epochs", "batch_size", "learning_rate", "warmup_fraction",
        "weight_decay", "max_grad_norm", "dropout", "seed", "dim",
        "max_span_size", "span_repr_mode", "attribute_filtering",
        "attrs_as_ents", "neg_entity_count", "neg_relation_count",
        "attr_threshold", "rel_threshold")}


def evaluate_model(params: ModelParams, corpus: Corpus, provider,
                   inference: InferenceConfig) -> MetricsReport:
    predictions = {
        s.id: predict(s.graph.tokens, provider, params, inference, sid=s.id).graph
        for s in corpus}
    return score_corpus(corpus, predictions)


def train(corpus: Corpus, provider, config: TrainConfig,
          val: Corpus | None = None,
          warm_start: ModelParams | None = None,
          log=None) -> tuple[ModelParams, TrainReport]:
    """Run the optimization loop; deterministic given config.seed.

    Sentences tagged ``train`` form the training set (the whole corpus does
    when no sentence carries that tag).  Validation defaults to the corpus's
    ``val`` split; when present, the checkpoint with the best mean of the
    three task micro-F1s is returned, otherwise the final one.
    """
    train_split = corpus.subset("train")
    if len(train_split) == 0:
        train_split = corpus
    if len(train_split) == 0:
        raise ValueError("empty training split")
    if val is None:
        val = corpus.subset("val")

    rng = np.random.default_rng(config.seed)
    params = warm_start.copy() if warm_start is not None else build_model(
        train_split, provider, config, rng)
    state = init_optimizer_state(params)
    inference = config.inference_config()
    loss_cfg = config.loss_config(train=True)

    sentences = list(train_split)
    steps_per_epoch = (len(sentences) + config.batch_size - 1) // config.batch_size
    total_steps = config.epochs * steps_per_epoch

    report = TrainReport()
    best_params = params.copy()
    best_avg = -1.0
    global_step = 0

    for epoch in range(config.epochs):
        order = rng.permutation(len(sentences))
        epoch_losses = []
        weights = []
        for lo in range(0, len(sentences), config.batch_size):
            batch = [sentences[i] for i in order[lo:lo + config.batch_size]]
            result = joint_loss(batch, provider, params, loss_cfg, rng)
            global_step += 1
            lr = lr_at_step(global_step, total_steps, config)
            optimizer_step(params, result.grads, state, global_step, config, lr)
            epoch_losses.append((result.total, result.entity_loss,
                                 result.relation_loss, result.attribute_loss))
            weights.append(len(batch))
        mean = np.average(np.array(epoch_losses), axis=0, weights=weights)
        record = EpochRecord(*map(float, mean))

        if len(val):
            metrics = evaluate_model(params, val, provider, inference)
            record.val_micro_f1 = {t: metrics.micro[t].f1
                                   for t in ("entities", "attributes", "relations")}
            record.val_avg_f1 = metrics.micro_f1_average()
            if record.val_avg_f1 > best_avg:
                best_avg = record.val_avg_f1
                best_params = params.copy()
                report.best_epoch = epoch
                report.best_avg_f1 = best_avg
        report.epochs.append(record)
        if log is not None:
            log(f"epoch {epoch + 1}/{config.epochs} "
                f"loss {record.loss:.4f} (e {record.entity_loss:.4f} "
                f"r {record.relation_loss:.4f} a {record.attribute_loss:.4f})"
                + (f" val avg F1 {record.val_avg_f1:.4f}" if record.val_avg_f1 is not None else ""))

    if not len(val):
        best_params = params
        report.best_epoch = config.epochs - 1
    return best_params, report


# ---------------------------------------------------------------------------
# Gradient verification


def grad_check(params: ModelParams, batch, provider, epsilon: float = 1e-4,
               loss_cfg: LossConfig | None = None,
               sample_seed: int = 2024) -> dict[str, float]:
    """Central-difference check of the analytic gradients.

    Dropout is disabled and the negative-sampling RNG is re-seeded per loss
    evaluation so every evaluation sees the identical objective.  Returns the
    worst relative error per parameter group, where the relative error of
    analytic a vs numeric g is |a - g| / max(|a|, |g|, 1e-8).
    """
    if loss_cfg is None:
        loss_cfg = LossConfig(train=False, dropout=0.0)
    loss_cfg = replace(loss_cfg, train=False, dropout=0.0)

    def loss_at() -> float:
        rng = np.random.default_rng(sample_seed)
        return joint_loss(batch, provider, params, loss_cfg, rng).total

    analytic = joint_loss(batch, provider, params, loss_cfg,
                          np.random.default_rng(sample_seed)).grads
    worst: dict[str, float] = {}
    for name, tensor in params.tensors.items():
        flat = tensor.reshape(-1)
        a_flat = analytic[name].reshape(-1)
        err = 0.0
        for k in range(flat.size):
            original = flat[k]
            flat[k] = original + epsilon
            up = loss_at()
            flat[k] = original - epsilon
            down = loss_at()
            flat[k] = original
            numeric = (up - down) / (2.0 * epsilon)
            denom = max(abs(a_flat[k]), abs(numeric), 1e-8)
            err = max(err, abs(a_flat[k] - numeric) / denom)
        worst[name] = err
    return worst
