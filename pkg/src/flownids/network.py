"""LSTM classifier built on raw numpy: gated cell, zero-state unrolling,
inverted dropout on the final hidden state, dense softmax head, and full
backpropagation through time.

All arithmetic is float64. Cell gates are computed from the concatenation
[h_prev, x] in that order, and a fresh sequence always starts from
h = C = 0. The public entry points accept either single vectors/sequences
or batches; traces produced by a training-mode forward carry everything
the backward pass needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NumericError

# Field order is load-bearing: initialization draws, optimizer state,
# serialization, and gradient flattening all iterate it.
LSTM_WEIGHT_FIELDS = ("w_forget", "w_input", "w_cand", "w_output")
LSTM_BIAS_FIELDS = ("b_forget", "b_input", "b_cand", "b_output")
LSTM_FIELDS = LSTM_WEIGHT_FIELDS + LSTM_BIAS_FIELDS
DENSE_FIELDS = ("weight", "bias")


@dataclass(frozen=True)
class ModelConfig:
    """Shape and regularization knobs of the classifier."""

    input_dim: int
    hidden_dim: int
    num_classes: int
    seq_len: int
    dropout_rate: float = 0.2

    def __post_init__(self):
        for name in ("input_dim", "hidden_dim", "num_classes", "seq_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")


@dataclass
class LstmParams:
    """Recurrent weights; each matrix is hidden x (hidden + input)."""

    w_forget: np.ndarray
    w_input: np.ndarray
    w_cand: np.ndarray
    w_output: np.ndarray
    b_forget: np.ndarray
    b_input: np.ndarray
    b_cand: np.ndarray
    b_output: np.ndarray


@dataclass
class DenseParams:
    """Classification head: weight is classes x hidden."""

    weight: np.ndarray
    bias: np.ndarray


@dataclass
class LstmState:
    h: np.ndarray
    c: np.ndarray


@dataclass
class CellCache:
    """Per-step activations retained for the backward pass."""

    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    f: np.ndarray
    i: np.ndarray
    cand: np.ndarray
    c: np.ndarray
    o: np.ndarray


@dataclass
class ForwardTrace:
    """Stacked per-timestep activations of a training-mode forward.

    All arrays carry a leading batch axis, even for batch size 1.
    ``dropout_mask`` already includes the 1/(1-p) survivor scaling, and
    ``logits`` are the pre-softmax head outputs.
    """

    inputs: np.ndarray        # (B, T, F)
    f: np.ndarray             # (B, T, H)
    i: np.ndarray             # (B, T, H)
    cand: np.ndarray          # (B, T, H)
    c: np.ndarray             # (B, T, H)
    o: np.ndarray             # (B, T, H)
    h: np.ndarray             # (B, T, H)
    dropout_mask: Optional[np.ndarray] = None   # (B, H)
    logits: Optional[np.ndarray] = None         # (B, C)


@dataclass
class Gradients:
    """Same shapes as LstmParams plus DenseParams, in the same field order."""

    w_forget: np.ndarray
    w_input: np.ndarray
    w_cand: np.ndarray
    w_output: np.ndarray
    b_forget: np.ndarray
    b_input: np.ndarray
    b_cand: np.ndarray
    b_output: np.ndarray
    weight: np.ndarray
    bias: np.ndarray


def param_items(params: LstmParams, dense: DenseParams):
    """Yield (name, array) over every trainable tensor in canonical order."""
    for name in LSTM_FIELDS:
        yield name, getattr(params, name)
    for name in DENSE_FIELDS:
        yield name, getattr(dense, name)


def grad_items(grads: Gradients):
    for name in LSTM_FIELDS + DENSE_FIELDS:
        yield name, getattr(grads, name)


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction for overflow safety."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def lstm_cell(params: LstmParams, state: LstmState, x: np.ndarray):
    """One gated cell step from (h, C) under input x.

    Accepts (H,)/(F,) vectors or (B, H)/(B, F) batches. Returns the new
    state and a cache of the activations the backward pass needs.
    """
    hx = np.concatenate([state.h, x], axis=-1)
    f = sigmoid(hx @ params.w_forget.T + params.b_forget)
    i = sigmoid(hx @ params.w_input.T + params.b_input)
    cand = np.tanh(hx @ params.w_cand.T + params.b_cand)
    c = f * state.c + i * cand
    o = sigmoid(hx @ params.w_output.T + params.b_output)
    h = o * np.tanh(c)
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(c))):
        raise NumericError(
            "non-finite LSTM cell output; "
            f"max |x|={np.max(np.abs(x)):.3e}, "
            f"max |h_prev|={np.max(np.abs(state.h)):.3e}, "
            f"max |w|={max(np.max(np.abs(getattr(params, n))) for n in LSTM_FIELDS):.3e}"
        )
    return LstmState(h, c), CellCache(x=x, h_prev=state.h, c_prev=state.c,
                                      f=f, i=i, cand=cand, c=c, o=o)


def lstm_forward(params: LstmParams, sequence: np.ndarray):
    """Unroll the cell over a (T, F) sequence from zero initial state.

    Returns the final hidden state (H,) and a batch-of-one ForwardTrace.
    """
    sequence = np.asarray(sequence, dtype=np.float64)
    if sequence.ndim != 2:
        raise ValueError(f"sequence must be (T, F), got shape {sequence.shape}")
    trace = _unroll(params, sequence[None, :, :])
    return trace.h[0, -1], trace


def _unroll(params: LstmParams, batch: np.ndarray) -> ForwardTrace:
    """Run the cell over a (B, T, F) batch; h_0 = C_0 = 0."""
    b, t_steps, _ = batch.shape
    hidden = params.b_forget.shape[0]
    state = LstmState(np.zeros((b, hidden)), np.zeros((b, hidden)))
    stack = {name: np.empty((b, t_steps, hidden)) for name in
             ("f", "i", "cand", "c", "o", "h")}
    for t in range(t_steps):
        state, cache = lstm_cell(params, state, batch[:, t, :])
        stack["f"][:, t] = cache.f
        stack["i"][:, t] = cache.i
        stack["cand"][:, t] = cache.cand
        stack["c"][:, t] = cache.c
        stack["o"][:, t] = cache.o
        stack["h"][:, t] = state.h
    return ForwardTrace(inputs=batch, **stack)


def dropout(h: np.ndarray, rate: float, training: bool,
            rng: Optional[np.random.Generator] = None):
    """Inverted dropout: zero units with probability ``rate`` and scale
    survivors by 1/(1-rate) so inference is a pure identity.

    Returns (output, mask); the mask already contains the scaling.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return h, np.ones_like(h)
    if rng is None:
        raise ValueError("training-mode dropout with rate > 0 needs an rng")
    keep = rng.random(h.shape) >= rate
    mask = keep.astype(np.float64) / (1.0 - rate)
    return h * mask, mask


def dense_softmax(dense: DenseParams, h: np.ndarray) -> np.ndarray:
    """Class probabilities from a hidden state: softmax(W h + b)."""
    return softmax(h @ dense.weight.T + dense.bias)


def model_forward(params: LstmParams, dense: DenseParams, cfg: ModelConfig,
                  batch: np.ndarray, training: bool = False,
                  rng: Optional[np.random.Generator] = None,
                  dropout_mask: Optional[np.ndarray] = None):
    """Full classifier pass over a (B, T, F) batch.

    Inference mode consumes no randomness and discards the trace.
    ``dropout_mask`` overrides the sampled mask (gradient tests fix it).
    """
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 3 or batch.shape[1] != cfg.seq_len or batch.shape[2] != cfg.input_dim:
        raise ValueError(
            f"batch shape {batch.shape} does not match "
            f"(B, {cfg.seq_len}, {cfg.input_dim})"
        )
    trace = _unroll(params, batch)
    h_last = trace.h[:, -1, :]
    if dropout_mask is not None:
        h_drop, mask = h_last * dropout_mask, dropout_mask
    else:
        h_drop, mask = dropout(h_last, cfg.dropout_rate, training, rng)
    logits = h_drop @ dense.weight.T + dense.bias
    probs = softmax(logits)
    if not training:
        return probs, None
    trace.dropout_mask = mask
    trace.logits = logits
    return probs, trace


def model_backward(params: LstmParams, dense: DenseParams, cfg: ModelConfig,
                   trace: ForwardTrace, d_logits: np.ndarray) -> Gradients:
    """Backpropagation through time.

    ``d_logits`` is the gradient of the batch-mean loss w.r.t. the
    pre-softmax logits, so the accumulated parameter gradients come out
    already averaged over the batch. Cell-state gradient flows both to the
    previous step (via the forget gate) and into the gate pre-activations.
    """
    if trace is None or trace.dropout_mask is None or trace.logits is None:
        raise ValueError("model_backward needs the trace of a training-mode forward")
    b, t_steps, hidden = trace.h.shape
    d_logits = np.asarray(d_logits, dtype=np.float64)
    if d_logits.shape != (b, cfg.num_classes):
        raise ValueError(
            f"d_logits shape {d_logits.shape} does not match ({b}, {cfg.num_classes})"
        )

    h_last = trace.h[:, -1, :]
    h_drop = h_last * trace.dropout_mask
    g = Gradients(
        **{n: np.zeros_like(getattr(params, n)) for n in LSTM_FIELDS},
        weight=d_logits.T @ h_drop,
        bias=d_logits.sum(axis=0),
    )

    dh = (d_logits @ dense.weight) * trace.dropout_mask
    dc = np.zeros((b, hidden))
    for t in range(t_steps - 1, -1, -1):
        f, i = trace.f[:, t], trace.i[:, t]
        cand, c, o = trace.cand[:, t], trace.c[:, t], trace.o[:, t]
        c_prev = trace.c[:, t - 1] if t > 0 else np.zeros((b, hidden))
        h_prev = trace.h[:, t - 1] if t > 0 else np.zeros((b, hidden))

        tanh_c = np.tanh(c)
        d_o = dh * tanh_c
        dc = dc + dh * o * (1.0 - tanh_c ** 2)
        d_f = dc * c_prev
        d_i = dc * cand
        d_cand = dc * i

        dz_f = d_f * f * (1.0 - f)
        dz_i = d_i * i * (1.0 - i)
        dz_c = d_cand * (1.0 - cand ** 2)
        dz_o = d_o * o * (1.0 - o)

        hx = np.concatenate([h_prev, trace.inputs[:, t]], axis=1)
        g.w_forget += dz_f.T @ hx
        g.w_input += dz_i.T @ hx
        g.w_cand += dz_c.T @ hx
        g.w_output += dz_o.T @ hx
        g.b_forget += dz_f.sum(axis=0)
        g.b_input += dz_i.sum(axis=0)
        g.b_cand += dz_c.sum(axis=0)
        g.b_output += dz_o.sum(axis=0)

        dhx = dz_f @ params.w_forget + dz_i @ params.w_input \
            + dz_c @ params.w_cand + dz_o @ params.w_output
        dh = dhx[:, :hidden]
        dc = dc * f
    return g


def init_params(cfg: ModelConfig, seed: int):
    """Glorot-uniform weights, zero biases except the forget-gate bias at 1.

    The forget bias keeps early cell-state gradients alive. Draw order is
    fixed (four gate matrices, then the head) so a seed pins every bit.
    """
    rng = np.random.default_rng(seed)
    h, f_in, c = cfg.hidden_dim, cfg.input_dim, cfg.num_classes

    def glorot(rows, cols):
        limit = math.sqrt(6.0 / (rows + cols))
        return rng.uniform(-limit, limit, size=(rows, cols))

    params = LstmParams(
        w_forget=glorot(h, h + f_in),
        w_input=glorot(h, h + f_in),
        w_cand=glorot(h, h + f_in),
        w_output=glorot(h, h + f_in),
        b_forget=np.ones(h),
        b_input=np.zeros(h),
        b_cand=np.zeros(h),
        b_output=np.zeros(h),
    )
    dense = DenseParams(weight=glorot(c, h), bias=np.zeros(c))
    return params, dense


def clip_gradients(grads: Gradients, max_norm: Optional[float]) -> float:
    """Scale all gradients in place so their global L2 norm is <= max_norm.

    Returns the pre-clip norm. None or a non-positive max_norm disables
    clipping (the norm is still computed and checked for finiteness).
    """
    total = 0.0
    for _, arr in grad_items(grads):
        total += float(np.sum(arr * arr))
    norm = math.sqrt(total)
    if not math.isfinite(norm):
        raise NumericError(f"non-finite gradient norm {norm}")
    if max_norm is not None and max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for _, arr in grad_items(grads):
            arr *= scale
    return norm
