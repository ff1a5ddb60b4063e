"""Disentangled emotion-semantic encoder.

Maps a token sequence to two parallel representation streams: per-token
semantic states ``H`` (``T x d_h``) and per-token emotion states ``E``
(``T x d_e``).  Each step filters a running context vector through a
sigmoid gate, attends over a two-slot key/value set built from the token
embedding and the previous semantic state, and finally passes the new
semantic state through a multiplicative emotion gate.

Initial states: ``h_0 = 0``, ``c_0 = 1``, ``e_0 = 1``.  Multiplicative
gates starting from zero context would collapse both streams to zero;
all-ones starting points give them full dynamic range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError, InputError

__all__ = [
    "DeseConfig",
    "DeseState",
    "DeseParams",
    "EncodedSequence",
    "initial_state",
    "filtered_context_step",
    "gated_attention_step",
    "emotion_gate_step",
    "encode",
]


@dataclass(frozen=True)
class DeseConfig:
    vocab_size: int
    embed_dim: int
    semantic_dim: int
    emotion_dim: int

    def __post_init__(self):
        for name in ("vocab_size", "embed_dim", "semantic_dim", "emotion_dim"):
            if getattr(self, name) < 1:
                raise ContractError(f"DeseConfig.{name} must be >= 1")


@dataclass
class DeseState:
    """Recurrent state carried between encoder steps."""

    h_prev: Tensor  # 1 x d_h, previous semantic state
    c_prev: Tensor  # 1 x d_h, previous filtered context
    e_prev: Tensor  # 1 x d_e, previous emotion state


@dataclass
class EncodedSequence:
    H: Tensor  # T x d_h
    E: Tensor  # T x d_e


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class DeseParams:
    """Learnable encoder parameters.

    Weight matrices are stored in (in_dim, out_dim) layout and applied as
    ``x @ W``; biases are ``1 x out_dim`` rows.
    """

    SEMANTIC_NAMES = ("embedding", "u_f", "b_f", "w_q", "w_k", "w_v")
    EMOTION_NAMES = ("w_u", "b_u")

    def __init__(self, cfg: DeseConfig, rng: np.random.Generator):
        self.cfg = cfg
        d_z, d_h, d_e = cfg.embed_dim, cfg.semantic_dim, cfg.emotion_dim
        cat = d_z + d_h

        def param(shape, fan_in):
            return Tensor(uniform_init(rng, shape, fan_in), requires_grad=True)

        # lookup rows feed the network directly, so their fan-in is 1
        self.embedding = param((cfg.vocab_size, d_z), 1)
        self.u_f = param((cat, d_h), cat)
        self.b_f = param((1, d_h), cat)
        self.w_q = param((d_h, d_h), d_h)
        self.w_k = param((cat, d_h), cat)
        self.w_v = param((cat, d_h), cat)
        self.w_u = param((d_h, d_e), d_h)
        self.b_u = param((1, d_e), d_h)

    def named(self) -> dict[str, Tensor]:
        return {name: getattr(self, name) for name in self.SEMANTIC_NAMES + self.EMOTION_NAMES}


def initial_state(cfg: DeseConfig) -> DeseState:
    return DeseState(
        h_prev=Tensor.zeros(1, cfg.semantic_dim),
        c_prev=Tensor.ones(1, cfg.semantic_dim),
        e_prev=Tensor.ones(1, cfg.emotion_dim),
    )


def filtered_context_step(z_t: Tensor, state: DeseState, params: DeseParams) -> Tensor:
    """Squash the joint (embedding, previous state) signal into a gate and
    multiply it onto the running context.  Gate values lie in (0, 1), so the
    context can only shrink elementwise."""
    gate_in = ad.concat([z_t, state.h_prev], axis=1)
    gate = ad.sigmoid(ad.matmul(gate_in, params.u_f) + params.b_f)
    return ad.mul(gate, state.c_prev)


def gated_attention_step(z_t: Tensor, c_t: Tensor, state: DeseState, params: DeseParams) -> Tensor:
    """Scaled dot-product attention over two slots: the embedded token and the
    previous semantic state, each zero-padded to the shared key/value input
    width.  The filtered context is the query, so the new semantic state is a
    convex combination of the two value vectors."""
    cfg = params.cfg
    d_z, d_h = cfg.embed_dim, cfg.semantic_dim
    zero_h = Tensor.zeros(1, d_h)
    zero_z = Tensor.zeros(1, d_z)
    slots = ad.concat(
        [ad.concat([z_t, zero_h], axis=1), ad.concat([zero_z, state.h_prev], axis=1)],
        axis=0,
    )  # 2 x (d_z + d_h)
    keys = ad.matmul(slots, params.w_k)  # 2 x d_h
    values = ad.matmul(slots, params.w_v)  # 2 x d_h
    query = ad.matmul(c_t, params.w_q)  # 1 x d_h
    logits = ad.scale(ad.matmul(query, ad.transpose(keys)), 1.0 / math.sqrt(d_h))
    weights = ad.softmax(logits, axis=1)  # 1 x 2
    return ad.matmul(weights, values)  # 1 x d_h


def emotion_gate_step(h_t: Tensor, state: DeseState, params: DeseParams) -> Tensor:
    """Multiplicative emotion gate: squash the semantic state and filter the
    previous emotion state with it (elementwise decay, absorbing at zero)."""
    gate = ad.sigmoid(ad.matmul(h_t, params.w_u) + params.b_u)
    return ad.mul(gate, state.e_prev)


def encode(tokens: Sequence[int], params: DeseParams, *, hold_emotion: bool = False) -> EncodedSequence:
    """Run the three encoder steps over the whole token sequence.

    ``hold_emotion=True`` keeps the emotion stream pinned at its initial
    value (the no-emotion-encoder ablation); shapes are unchanged and the
    emotion-gate parameters receive no gradient.
    """
    if len(tokens) == 0:
        raise ContractError("encode: empty token sequence")
    cfg = params.cfg
    for t in tokens:
        if not 0 <= int(t) < cfg.vocab_size:
            raise InputError(f"encode: token id {t} outside vocab of size {cfg.vocab_size}")
    state = initial_state(cfg)
    h_rows: list[Tensor] = []
    e_rows: list[Tensor] = []
    for t in tokens:
        z_t = ad.row(params.embedding, int(t))
        c_t = filtered_context_step(z_t, state, params)
        h_t = gated_attention_step(z_t, c_t, state, params)
        e_t = state.e_prev if hold_emotion else emotion_gate_step(h_t, state, params)
        state = DeseState(h_prev=h_t, c_prev=c_t, e_prev=e_t)
        h_rows.append(h_t)
        e_rows.append(e_t)
    return EncodedSequence(H=ad.concat(h_rows, axis=0), E=ad.concat(e_rows, axis=0))
