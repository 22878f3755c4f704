"""Optimizer, learning-rate schedule and the per-graph training loop.

All randomness (shuffling, dropout) is derived from the TrainConfig seed,
so a (seed, config) pair reproduces the metric history exactly.
"""

from __future__ import annotations

import math

import numpy as np

from .autodiff import ParameterStore
from .config import TrainConfig
from .errors import NumericalError, TrainingDiverged
from .graphs import Dataset
from .model import ChromaticGraphTransformer, loss_fn, metric_fn


class AdamW:
    """Adaptive moments with decoupled weight decay.

    Defaults beta1=0.9, beta2=0.999, eps=1e-8. step() consumes and zeroes
    the accumulated gradients; parameters with no gradient are skipped.
    """

    def __init__(self, store: ParameterStore, lr: float = 1e-3,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.0):
        self.store = store
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {name: np.zeros_like(t.data) for name, t in store.items()}
        self.v = {name: np.zeros_like(t.data) for name, t in store.items()}

    def step(self, lr: float | None = None) -> None:
        lr = self.lr if lr is None else lr
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, p in self.store.items():
            g = p.grad
            if g is None:
                continue
            if not np.isfinite(g).all():
                raise NumericalError(f"non-finite gradient for parameter {name!r}")
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.data -= lr * update
            if self.weight_decay:
                p.data -= lr * self.weight_decay * p.data
        self.store.zero_grad()


def cosine_warmup_lr(step: int, total_steps: int, warmup_steps: int,
                     base_lr: float) -> float:
    """Linear ramp 0 -> base_lr over the warmup, then a half cosine down to
    zero at total_steps. Continuous at the boundary."""
    if not (0 <= step <= total_steps):
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    if warmup_steps > 0 and step < warmup_steps:
        return base_lr * step / warmup_steps
    if total_steps == warmup_steps:
        return base_lr
    progress = (step - warmup_steps) / (total_steps - warmup_steps)
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


def clip_gradients(store: ParameterStore, max_norm: float) -> float:
    """Scale all gradients so their global l2 norm is at most max_norm."""
    total = 0.0
    for _, p in store.items():
        if p.grad is not None:
            total += float((p.grad**2).sum())
    norm = math.sqrt(total)
    if norm > max_norm and norm > 0:
        scale = max_norm / norm
        for _, p in store.items():
            if p.grad is not None:
                p.grad *= scale
    return norm


def train_model(model: ChromaticGraphTransformer, dataset: Dataset,
                structures, tcfg: TrainConfig,
                log=None) -> dict:
    """Train with gradient accumulation over per-graph forwards.

    Returns {"history": [...], "best_val": float, "best_epoch": int,
    "test_metric": float}; the model is left at its best-validation state.
    """
    tcfg.validate()
    graphs = dataset.graphs
    train_idx = dataset.indices("train")
    val_idx = dataset.indices("val")
    test_idx = dataset.indices("test")
    if not train_idx:
        raise ValueError("dataset has no training graphs")

    shuffle_rng = np.random.default_rng([tcfg.seed, 1])
    dropout_rng = np.random.default_rng([tcfg.seed, 2])
    optimizer = AdamW(model.store, lr=tcfg.lr, weight_decay=tcfg.weight_decay)

    steps_per_epoch = math.ceil(len(train_idx) / tcfg.batch_size)
    total_steps = steps_per_epoch * tcfg.epochs
    warmup_steps = steps_per_epoch * tcfg.warmup_epochs

    def snapshot():
        return model.store.state(), {k: v.copy() for k, v in model.buffers.items()}

    def restore(state):
        params, buffers = state
        model.store.load_state(params)
        for k, v in buffers.items():
            model.buffers[k] = v.copy()

    history: list[dict] = []
    best_val = metric_fn(model, graphs, structures, val_idx)
    best_epoch = 0
    best_state = snapshot()
    history.append({"epoch": 0, "lr": 0.0, "train_loss": None,
                    "val_metric": best_val})

    step = 0
    for epoch in range(1, tcfg.epochs + 1):
        order = shuffle_rng.permutation(len(train_idx))
        epoch_loss = 0.0
        for start in range(0, len(order), tcfg.batch_size):
            batch = [train_idx[j] for j in order[start:start + tcfg.batch_size]]
            lr = cosine_warmup_lr(step, total_steps, warmup_steps, tcfg.lr)
            model.store.zero_grad()
            for i in batch:
                out = model.forward(graphs[i], structures[i], train=True,
                                    rng=dropout_rng)
                loss = loss_fn(out, graphs[i].target, model.cfg.task)
                value = float(loss.data)
                if not math.isfinite(value):
                    raise TrainingDiverged(epoch)
                epoch_loss += value
                (loss * (1.0 / len(batch))).backward()
            if tcfg.clip_norm is not None:
                clip_gradients(model.store, tcfg.clip_norm)
            optimizer.step(lr=lr)
            step += 1

        val_metric = metric_fn(model, graphs, structures, val_idx)
        record = {
            "epoch": epoch,
            "lr": lr,
            "train_loss": epoch_loss / len(train_idx),
            "val_metric": val_metric,
        }
        history.append(record)
        if log is not None:
            log(record)
        if math.isnan(best_val) or (not math.isnan(val_metric) and val_metric < best_val):
            best_val = val_metric
            best_epoch = epoch
            best_state = snapshot()

    restore(best_state)
    test_metric = metric_fn(model, graphs, structures, test_idx)
    return {
        "history": history,
        "best_val": best_val,
        "best_epoch": best_epoch,
        "test_metric": test_metric,
    }
