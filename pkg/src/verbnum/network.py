"""Embedding + single-layer LSTM + binary logistic number classifier.

Gate blocks are stacked in the fixed order [input, forget, cell, output]
("ifgo") along the first axis of the 4h x (d+h) weight matrix; the input to
the gates is the concatenation [x_t, h_{t-1}].  The classifier reads the
final hidden state: p(Plural) = logistic(w . h_T + b).  All arithmetic is
float64; gradients are dense backpropagation through time over the whole
sequence.

Checkpoints are a self-describing binary container: a magic tag, a JSON
header (version, dims, gate order, seed, array manifest), then raw C-order
float64 buffers.  Round trips are bit-exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit, log_expit

from .corpus import Preamble
from .lexicon import Number

GATE_ORDER = "ifgo"
CHECKPOINT_MAGIC = b"VNCP"
CHECKPOINT_VERSION = 1
PARAM_FIELDS = ("embeddings", "lstm_weights", "lstm_bias", "output_weights", "output_bias")


class NetworkError(ValueError):
    """Invalid input to a network operation."""


class NumericalError(ArithmeticError):
    """Non-finite value encountered; names the offending parameter block."""


@dataclass(frozen=True)
class ModelParams:
    embeddings: np.ndarray  # (V, d)
    lstm_weights: np.ndarray  # (4h, d+h)
    lstm_bias: np.ndarray  # (4h,)
    output_weights: np.ndarray  # (h,)
    output_bias: np.ndarray  # ()

    @property
    def dims(self) -> tuple[int, int, int]:
        V, d = self.embeddings.shape
        h = self.output_weights.shape[0]
        return V, d, h

    def as_dict(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_FIELDS}


@dataclass(frozen=True)
class LstmState:
    hidden: np.ndarray
    cell: np.ndarray


def zero_state(hidden_dim: int) -> LstmState:
    return LstmState(np.zeros(hidden_dim), np.zeros(hidden_dim))


def init_params(dims: tuple[int, int, int], seed: int) -> ModelParams:
    """Uniform [-1/sqrt(h), 1/sqrt(h)] weights; forget-gate bias 1, others 0."""
    V, d, h = dims
    if min(V, d, h) < 1:
        raise NetworkError(f"dims must be positive, got {dims}")
    rng = np.random.default_rng(seed)
    k = 1.0 / np.sqrt(h)
    bias = np.zeros(4 * h)
    bias[h : 2 * h] = 1.0
    return ModelParams(
        embeddings=rng.uniform(-k, k, size=(V, d)),
        lstm_weights=rng.uniform(-k, k, size=(4 * h, d + h)),
        lstm_bias=bias,
        output_weights=rng.uniform(-k, k, size=h),
        output_bias=np.zeros(()),
    )


def _check_tokens(params: ModelParams, tokens) -> np.ndarray:
    V = params.embeddings.shape[0]
    ids = np.asarray(tokens, dtype=np.intp)
    if ids.ndim != 1 or ids.size == 0:
        raise NetworkError("token sequence must be a non-empty 1-d sequence")
    if ids.min() < 0 or ids.max() >= V:
        raise NetworkError(f"token id out of range for vocabulary of size {V}")
    return ids


def step(params: ModelParams, state: LstmState, token_id: int) -> LstmState:
    """One LSTM step on a single token; pure function of its inputs."""
    V, d, h = params.dims
    if not 0 <= token_id < V:
        raise NetworkError(f"token id {token_id} out of range for vocabulary of size {V}")
    x = params.embeddings[token_id]
    z = params.lstm_weights @ np.concatenate([x, state.hidden]) + params.lstm_bias
    i = expit(z[:h])
    f = expit(z[h : 2 * h])
    g = np.tanh(z[2 * h : 3 * h])
    o = expit(z[3 * h :])
    cell = f * state.cell + i * g
    return LstmState(o * np.tanh(cell), cell)


class _Cache:
    """Forward-pass intermediates for a same-length batch, kept for BPTT."""

    __slots__ = ("tokens", "xh", "i", "f", "g", "o", "c_prev", "tc", "h_final", "scores")

    def __init__(self, T: int):
        self.xh: list[np.ndarray] = [None] * T  # type: ignore[list-item]
        self.i: list[np.ndarray] = [None] * T  # type: ignore[list-item]
        self.f: list[np.ndarray] = [None] * T  # type: ignore[list-item]
        self.g: list[np.ndarray] = [None] * T  # type: ignore[list-item]
        self.o: list[np.ndarray] = [None] * T  # type: ignore[list-item]
        self.c_prev: list[np.ndarray] = [None] * T  # type: ignore[list-item]
        self.tc: list[np.ndarray] = [None] * T  # type: ignore[list-item]


def _forward_batch(params: ModelParams, tokens: np.ndarray) -> _Cache:
    """Run a (B, T) id array through the LSTM, caching per-step activations."""
    V, d, h = params.dims
    B, T = tokens.shape
    cache = _Cache(T)
    cache.tokens = tokens
    H = np.zeros((B, h))
    C = np.zeros((B, h))
    W_T = params.lstm_weights.T
    for t in range(T):
        xh = np.concatenate([params.embeddings[tokens[:, t]], H], axis=1)
        z = xh @ W_T + params.lstm_bias
        i = expit(z[:, :h])
        f = expit(z[:, h : 2 * h])
        g = np.tanh(z[:, 2 * h : 3 * h])
        o = expit(z[:, 3 * h :])
        c = f * C + i * g
        tc = np.tanh(c)
        cache.xh[t], cache.i[t], cache.f[t], cache.g[t], cache.o[t] = xh, i, f, g, o
        cache.c_prev[t], cache.tc[t] = C, tc
        H = o * tc
        C = c
    cache.h_final = H
    cache.scores = H @ params.output_weights + float(params.output_bias)
    return cache


def _backward_batch(
    params: ModelParams, cache: _Cache, dscore: np.ndarray
) -> dict[str, np.ndarray]:
    """Gradient sums over the batch given dLoss/dscore per sequence."""
    V, d, h = params.dims
    tokens = cache.tokens
    B, T = tokens.shape
    grads = {
        "embeddings": np.zeros_like(params.embeddings),
        "lstm_weights": np.zeros_like(params.lstm_weights),
        "lstm_bias": np.zeros_like(params.lstm_bias),
        "output_weights": cache.h_final.T @ dscore,
        "output_bias": np.asarray(dscore.sum()),
    }
    dH = dscore[:, None] * params.output_weights
    dC = np.zeros((B, h))
    for t in range(T - 1, -1, -1):
        i, f, g, o = cache.i[t], cache.f[t], cache.g[t], cache.o[t]
        tc = cache.tc[t]
        do = dH * tc
        dC = dC + dH * o * (1.0 - tc * tc)
        dz = np.concatenate(
            [
                dC * g * i * (1.0 - i),
                dC * cache.c_prev[t] * f * (1.0 - f),
                dC * i * (1.0 - g * g),
                do * o * (1.0 - o),
            ],
            axis=1,
        )
        grads["lstm_weights"] += dz.T @ cache.xh[t]
        grads["lstm_bias"] += dz.sum(axis=0)
        dxh = dz @ params.lstm_weights
        np.add.at(grads["embeddings"], tokens[:, t], dxh[:, :d])
        dH = dxh[:, d:]
        dC = dC * f
    return grads


def forward(params: ModelParams, tokens) -> float:
    """Probability that the upcoming verb is plural."""
    ids = _check_tokens(params, tokens)
    cache = _forward_batch(params, ids[None, :])
    return float(expit(cache.scores[0]))


def forward_probe(params: ModelParams, tokens, probe_points: list[int]) -> list[float]:
    """Plural probabilities read out after each probe position, one pass.

    Probe positions count consumed tokens, so position k classifies the
    prefix tokens[:k]; position 0 has no prefix and is rejected.
    """
    ids = _check_tokens(params, tokens)
    for pt in probe_points:
        if not 1 <= pt <= len(ids):
            raise NetworkError(f"probe position {pt} outside 1..{len(ids)}")
    V, d, h = params.dims
    state = zero_state(h)
    p_at: dict[int, float] = {}
    wanted = set(probe_points)
    for pos, tid in enumerate(ids, start=1):
        state = step(params, state, int(tid))
        if pos in wanted:
            score = state.hidden @ params.output_weights + float(params.output_bias)
            p_at[pos] = float(expit(score))
    return [p_at[pt] for pt in probe_points]


def _loss_vector(scores: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Binary cross-entropy per sequence, computed in log space."""
    return np.where(labels > 0, -log_expit(scores), -log_expit(-scores))


def _check_finite(grads: dict[str, np.ndarray]) -> None:
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient in parameter block {name!r}")


def backward(params: ModelParams, tokens, gold: Number) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and full-BPTT gradients for one sequence."""
    if gold not in (Number.SINGULAR, Number.PLURAL):
        raise NetworkError(f"gold number must be singular or plural, got {gold}")
    ids = _check_tokens(params, tokens)
    cache = _forward_batch(params, ids[None, :])
    label = np.array([1.0 if gold is Number.PLURAL else 0.0])
    loss = float(_loss_vector(cache.scores, label)[0])
    grads = _backward_batch(params, cache, expit(cache.scores) - label)
    _check_finite(grads)
    return loss, grads


def batch_backward(
    params: ModelParams, sequences: list[tuple[int, ...]], labels: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean loss and mean gradients over variable-length sequences.

    Sequences are grouped by length and each group is run as one vectorized
    recurrence, so no padding is ever introduced; groups are processed in
    ascending length order to keep summation order deterministic.
    """
    B = len(sequences)
    if B == 0:
        raise NetworkError("empty batch")
    labels = np.asarray(labels, dtype=float)
    by_length: dict[int, list[int]] = {}
    for idx, seq in enumerate(sequences):
        by_length.setdefault(len(seq), []).append(idx)
    total_loss = 0.0
    totals = {name: np.zeros_like(arr) for name, arr in params.as_dict().items()}
    for length in sorted(by_length):
        idxs = by_length[length]
        toks = np.array([sequences[i] for i in idxs], dtype=np.intp)
        if length == 0:
            raise NetworkError("empty sequence in batch")
        if toks.min() < 0 or toks.max() >= params.embeddings.shape[0]:
            raise NetworkError("token id out of range in batch")
        cache = _forward_batch(params, toks)
        y = labels[idxs]
        total_loss += float(_loss_vector(cache.scores, y).sum())
        grads = _backward_batch(params, cache, expit(cache.scores) - y)
        for name in totals:
            totals[name] += grads[name]
    for name in totals:
        totals[name] /= B
    _check_finite(totals)
    return total_loss / B, totals


def predict(params: ModelParams, preamble: Preamble) -> tuple[Number, bool]:
    """Predicted number and whether it mismatches the gold; 0.5 ties go singular."""
    p = forward(params, preamble.tokens)
    predicted = Number.PLURAL if p > 0.5 else Number.SINGULAR
    return predicted, predicted is not preamble.gold


def verify_gradients(
    params: ModelParams, tokens, gold: Number, eps: float = 1e-4
) -> float:
    """Max relative deviation of BPTT gradients from central finite differences.

    The relative error denominator is floored at 1e-4 so near-zero entry
    pairs do not inflate the ratio.
    """
    _, grads = backward(params, tokens, gold)
    worst = 0.0
    label = np.array([1.0 if gold is Number.PLURAL else 0.0])
    fields = params.as_dict()
    for name, arr in fields.items():
        flat = arr.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + eps
            ids = _check_tokens(params, tokens)
            lo_hi = float(_loss_vector(_forward_batch(params, ids[None, :]).scores, label)[0])
            flat[j] = orig - eps
            lo_lo = float(_loss_vector(_forward_batch(params, ids[None, :]).scores, label)[0])
            flat[j] = orig
            numeric = (lo_hi - lo_lo) / (2 * eps)
            analytic = float(grads[name].reshape(-1)[j])
            denom = max(abs(numeric) + abs(analytic), 1e-4)
            worst = max(worst, abs(numeric - analytic) / denom)
    return worst


# -- checkpoint container -----------------------------------------------------


def save_checkpoint(
    path: str | Path, params: ModelParams, seed: int | None = None
) -> None:
    arrays = params.as_dict()
    header = {
        "arrays": [[name, list(arrays[name].shape)] for name in PARAM_FIELDS],
        "dims": list(params.dims),
        "gate_order": GATE_ORDER,
        "seed": seed,
        "version": CHECKPOINT_VERSION,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(len(blob).to_bytes(4, "little"))
        fh.write(blob)
        for name in PARAM_FIELDS:
            fh.write(np.ascontiguousarray(arrays[name], dtype=np.float64).tobytes())


def load_checkpoint(path: str | Path) -> tuple[ModelParams, dict]:
    raw = Path(path).read_bytes()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise NetworkError(f"{path}: not a model checkpoint")
    hlen = int.from_bytes(raw[4:8], "little")
    header = json.loads(raw[8 : 8 + hlen].decode("utf-8"))
    if header.get("version") != CHECKPOINT_VERSION:
        raise NetworkError(f"{path}: unsupported checkpoint version {header.get('version')!r}")
    if header.get("gate_order") != GATE_ORDER:
        raise NetworkError(f"{path}: unknown gate order {header.get('gate_order')!r}")
    offset = 8 + hlen
    fields = {}
    for name, shape in header["arrays"]:
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        fields[name] = np.frombuffer(raw[offset:end], dtype=np.float64).reshape(shape).copy()
        offset = end
    if offset != len(raw):
        raise NetworkError(f"{path}: trailing bytes after parameter blocks")
    params = ModelParams(**fields)
    if list(params.dims) != header["dims"]:
        raise NetworkError(f"{path}: header dims {header['dims']} do not match arrays")
    return params, header
