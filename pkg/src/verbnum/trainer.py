"""Adam training loop with validation-based early stopping.

Each replica is an independent run: parameters initialized from its seed, the
corpus
reshuffled every epoch from a (seed, epoch) stream, updates applied from
mean gradients over mini-batches.  Training stops after the first epoch
whose validation error rate fails to strictly decrease (or at max_epochs)
and returns the parameters of the best-validation epoch, earliest on ties.

Config files are ``key = value`` lines with ``#`` comments; see
``parse_config`` for the accepted keys.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .corpus import Preamble
from .network import (
    ModelParams,
    NumericalError,
    _forward_batch,
    batch_backward,
    init_params,
)


class TrainError(RuntimeError):
    """One or more replicas failed to train."""


@dataclass(frozen=True)
class TrainConfig:
    dims: tuple[int, int, int]
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 64
    max_epochs: int = 20
    seeds: tuple[int, ...] = tuple(range(20))

    def __post_init__(self) -> None:
        if not 0 < self.beta1 < 1 or not 0 < self.beta2 < 1:
            raise ValueError("Adam betas must lie strictly between 0 and 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch size and max epochs must be at least 1")
        if not self.seeds:
            raise ValueError("at least one seed is required")

    @property
    def replicas(self) -> int:
        return len(self.seeds)


@dataclass(frozen=True)
class AdamState:
    first_moment: dict[str, np.ndarray]
    second_moment: dict[str, np.ndarray]
    timestep: int = 0


def init_adam(params: ModelParams) -> AdamState:
    fields = params.as_dict()
    return AdamState(
        {name: np.zeros_like(a) for name, a in fields.items()},
        {name: np.zeros_like(a) for name, a in fields.items()},
        0,
    )


def adam_update(
    params: ModelParams, adam: AdamState, grads: dict[str, np.ndarray], config: TrainConfig
) -> tuple[ModelParams, AdamState]:
    """One bias-corrected Adam step; rejects non-finite gradients."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient in parameter block {name!r}; update rejected")
    t = adam.timestep + 1
    new_params = {}
    new_m = {}
    new_v = {}
    for name, theta in params.as_dict().items():
        g = grads[name]
        m = config.beta1 * adam.first_moment[name] + (1 - config.beta1) * g
        v = config.beta2 * adam.second_moment[name] + (1 - config.beta2) * g * g
        m_hat = m / (1 - config.beta1**t)
        v_hat = v / (1 - config.beta2**t)
        new_params[name] = theta - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps)
        new_m[name] = m
        new_v[name] = v
    return ModelParams(**new_params), AdamState(new_m, new_v, t)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    training_loss: float
    validation_error: float


@dataclass
class TrainLog:
    epochs: list[EpochRecord] = field(default_factory=list)
    stop_reason: str = ""

    def to_text(self) -> str:
        lines = ["epoch\ttraining_loss\tvalidation_error"]
        for r in self.epochs:
            lines.append(f"{r.epoch}\t{r.training_loss!r}\t{r.validation_error!r}")
        lines.append(f"stop\t{self.stop_reason}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "TrainLog":
        log = cls()
        for line in text.splitlines():
            if not line.strip() or line.startswith("epoch\t"):
                continue
            fields = line.split("\t")
            if fields[0] == "stop":
                log.stop_reason = fields[1] if len(fields) > 1 else ""
                continue
            log.epochs.append(EpochRecord(int(fields[0]), float(fields[1]), float(fields[2])))
        return log


def error_rate(params: ModelParams, preambles: list[Preamble]) -> float:
    """Classification error over preambles, vectorized by length groups."""
    if not preambles:
        raise ValueError("cannot score an empty preamble list")
    by_length: dict[int, list[int]] = {}
    for idx, p in enumerate(preambles):
        by_length.setdefault(len(p), []).append(idx)
    errors = 0
    for length, idxs in sorted(by_length.items()):
        toks = np.array([preambles[i].tokens for i in idxs], dtype=np.intp)
        scores = _forward_batch(params, toks).scores
        predicted_plural = scores > 0.0  # logistic(score) > 0.5, ties singular
        labels = np.array([preambles[i].label for i in idxs], dtype=bool)
        errors += int(np.sum(predicted_plural != labels))
    return errors / len(preambles)


def train_replica(
    corpus: list[Preamble],
    validation: list[Preamble],
    config: TrainConfig,
    seed: int,
) -> tuple[ModelParams, TrainLog]:
    """Train one replica; the caller guarantees corpus/validation disjointness."""
    if not corpus or not validation:
        raise ValueError("corpus and validation sets must be non-empty")
    params = init_params(config.dims, seed)
    adam = init_adam(params)
    log = TrainLog()
    best_err = float("inf")
    best_params = params
    sequences = [p.tokens for p in corpus]
    labels = np.array([p.label for p in corpus], dtype=float)
    for epoch in range(1, config.max_epochs + 1):
        order = np.random.default_rng([seed, epoch]).permutation(len(corpus))
        loss_sum = 0.0
        for lo in range(0, len(order), config.batch_size):
            batch = order[lo : lo + config.batch_size]
            loss, grads = batch_backward(
                params, [sequences[i] for i in batch], labels[batch]
            )
            loss_sum += loss * len(batch)
            params, adam = adam_update(params, adam, grads, config)
        val_err = error_rate(params, validation)
        if not np.isfinite(val_err):
            raise NumericalError("validation error is not finite")
        log.epochs.append(EpochRecord(epoch, loss_sum / len(corpus), val_err))
        if val_err < best_err:
            best_err = val_err
            best_params = params
        if epoch >= 2 and val_err >= log.epochs[-2].validation_error:
            log.stop_reason = "validation error did not decrease"
            break
    else:
        log.stop_reason = "reached max epochs"
    return best_params, log


def _train_one(args) -> tuple[ModelParams, TrainLog]:
    corpus, validation, config, seed = args
    return train_replica(corpus, validation, config, seed)


def train_ensemble(
    corpus: list[Preamble],
    validation: list[Preamble],
    config: TrainConfig,
    threads: int = 1,
) -> list[tuple[ModelParams, TrainLog]]:
    """One replica per configured seed, in seed order.

    All replicas are attempted even if some fail; failures are then reported
    together so a single bad seed cannot silently truncate the ensemble.
    """
    results: dict[int, tuple[ModelParams, TrainLog]] = {}
    failures: list[tuple[int, Exception]] = []
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            jobs = pool.map(
                _train_one, [(corpus, validation, config, s) for s in config.seeds]
            )
            for seed, outcome in zip(config.seeds, jobs):
                results[seed] = outcome
    else:
        for seed in config.seeds:
            try:
                results[seed] = train_replica(corpus, validation, config, seed)
            except Exception as exc:  # noqa: BLE001 - collected and re-raised below
                failures.append((seed, exc))
    if failures:
        detail = "; ".join(f"seed {s}: {e}" for s, e in failures)
        raise TrainError(f"{len(failures)} replica(s) failed: {detail}")
    return [results[s] for s in config.seeds]


# -- config files -------------------------------------------------------------

CONFIG_KEYS = {
    "lexicon",
    "grammar",
    "cutoff",
    "input_dim",
    "hidden_dim",
    "learning_rate",
    "beta1",
    "beta2",
    "eps",
    "batch_size",
    "max_epochs",
    "replicas",
    "seed_base",
    "seeds",
    "train_n",
    "val_n",
    "max_depth",
    "max_tokens",
    "terminal_weighting",
    "bootstrap_samples",
    "curve_min_n",
}


def parse_config(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; unknown or duplicate keys are errors."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        if key in out:
            raise ValueError(f"config line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def config_seeds(mapping: dict[str, str]) -> tuple[int, ...]:
    if "seeds" in mapping:
        return tuple(int(s) for s in mapping["seeds"].replace(",", " ").split())
    base = int(mapping.get("seed_base", "0"))
    replicas = int(mapping.get("replicas", "20"))
    return tuple(range(base, base + replicas))


def train_config_from(mapping: dict[str, str], vocab_size: int) -> TrainConfig:
    """Build a TrainConfig from parsed config text plus the vocabulary size."""
    dims = (vocab_size, int(mapping.get("input_dim", "50")), int(mapping.get("hidden_dim", "50")))
    return TrainConfig(
        dims=dims,
        learning_rate=float(mapping.get("learning_rate", "1e-3")),
        beta1=float(mapping.get("beta1", "0.9")),
        beta2=float(mapping.get("beta2", "0.999")),
        eps=float(mapping.get("eps", "1e-8")),
        batch_size=int(mapping.get("batch_size", "64")),
        max_epochs=int(mapping.get("max_epochs", "20")),
        seeds=config_seeds(mapping),
    )
