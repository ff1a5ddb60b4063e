"""Emotion-guided cross-attention decoder.

Turns the encoder's fused memory (semantic and emotion streams concatenated
per token) into a fixed number of pose frames plus a per-frame seven-class
emotion confidence vector.  Decoding is non-autoregressive: each output
frame owns a learned query slot (plus a fixed sinusoidal position code),
attends over the memory with multi-head scaled dot-product attention, and
feeds two linear heads (pose: identity activation, emotion: sigmoid).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .dese import uniform_init
from .errors import ContractError, DimensionError

__all__ = [
    "EMOTION_CLASSES",
    "EgsidConfig",
    "EgsidParams",
    "DecodedOutput",
    "sinusoidal_positions",
    "fuse_memory",
    "decode",
    "decode_semantic_only",
]

EMOTION_CLASSES = 7


@dataclass(frozen=True)
class EgsidConfig:
    model_dim: int
    num_heads: int
    pose_dim: int
    max_frames: int
    emotion_classes: int = EMOTION_CLASSES
    # Identity weight added to the value projection and the two readout heads
    # at init, so decoding starts as a leaky pass-through: the pose head reads
    # the semantic block of the memory, the emotion head reads the emotion
    # block.  Residual-style anchoring; 0 disables it.
    passthrough_init: float = 1.0
    # Confidence-head bias starts at a low base rate so the output sits near
    # the typical per-class confidence level instead of 0.5.
    emotion_bias_init: float = -1.5

    def __post_init__(self):
        if self.model_dim < 1 or self.num_heads < 1 or self.pose_dim < 1 or self.max_frames < 1:
            raise ContractError("EgsidConfig dimensions must be >= 1")
        if self.model_dim % self.num_heads != 0:
            raise ContractError(
                f"model_dim {self.model_dim} not divisible by num_heads {self.num_heads}"
            )
        if self.emotion_classes != EMOTION_CLASSES:
            raise ContractError(f"emotion_classes is fixed at {EMOTION_CLASSES}")
        if self.passthrough_init < 0:
            raise ContractError("passthrough_init must be >= 0")


@dataclass
class DecodedOutput:
    poses: Tensor  # M x pose_dim
    emotions: Tensor  # M x 7, sigmoid outputs in (0, 1)
    attention: list[np.ndarray] | None = None  # per head, M x T softmax weights


def sinusoidal_positions(n: int, dim: int) -> np.ndarray:
    """Fixed sine/cosine position codes, alternating along the feature axis."""
    pos = np.arange(n, dtype=np.float64)[:, None]
    idx = np.arange(dim, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, (2.0 * np.floor(idx / 2.0)) / dim)
    out = np.zeros((n, dim))
    out[:, 0::2] = np.sin(angle[:, 0::2])
    out[:, 1::2] = np.cos(angle[:, 1::2])
    return out


class EgsidParams:
    """Learnable decoder parameters.

    ``memory_dim`` is the fused per-token feature width (semantic plus
    emotion dims).  The position code table is a fixed constant, not a
    parameter.
    """

    PARAM_NAMES = ("u_q", "u_k", "u_v", "p_embed", "w_pose", "b_pose", "w_emo", "b_emo")

    def __init__(
        self,
        cfg: EgsidConfig,
        memory_dim: int,
        rng: np.random.Generator,
        semantic_width: int | None = None,
    ):
        self.cfg = cfg
        self.memory_dim = memory_dim
        # column where the emotion block starts inside a fused memory row
        self.semantic_width = cfg.pose_dim if semantic_width is None else semantic_width
        d = cfg.model_dim

        def param(shape, fan_in):
            return Tensor(uniform_init(rng, shape, fan_in), requires_grad=True)

        self.u_q = param((d, d), d)
        self.u_k = param((memory_dim, d), memory_dim)
        self.u_v = param((memory_dim, d), memory_dim)
        self.p_embed = param((cfg.max_frames, d), d)
        self.w_pose = param((d, cfg.pose_dim), d)
        self.b_pose = param((1, cfg.pose_dim), d)
        self.w_emo = param((d, cfg.emotion_classes), d)
        self.b_emo = param((1, cfg.emotion_classes), d)
        self.b_emo.data += cfg.emotion_bias_init
        self.p_pos = Tensor(sinusoidal_positions(cfg.max_frames, d))
        beta = cfg.passthrough_init
        if beta > 0:
            # memory feature i lands on attended channel i; the pose head then
            # reads the leading (semantic) channels and the emotion head the
            # channels where the emotion block sits
            for i in range(min(memory_dim, d)):
                self.u_v.data[i, i] += beta
            for i in range(min(d, cfg.pose_dim, self.semantic_width)):
                self.w_pose.data[i, i] += beta
            for j in range(cfg.emotion_classes):
                src = self.semantic_width + j
                if src < min(d, memory_dim):
                    self.w_emo.data[src, j] += beta

    def named(self) -> dict[str, Tensor]:
        return {name: getattr(self, name) for name in self.PARAM_NAMES}


def fuse_memory(H: Tensor, E: Tensor) -> Tensor:
    """Concatenate the semantic and emotion streams per token row."""
    if H.shape[0] != E.shape[0]:
        raise DimensionError(f"fuse_memory: row counts differ, {H.shape} vs {E.shape}")
    return ad.concat([H, E], axis=1)


def decode(memory: Tensor, num_frames: int, params: EgsidParams) -> DecodedOutput:
    """Cross-attend learned frame queries over the fused memory and read out
    poses and emotion confidences."""
    cfg = params.cfg
    if memory.shape[0] == 0:
        raise ContractError("decode: empty memory")
    if memory.shape[1] != params.memory_dim:
        raise DimensionError(
            f"decode: memory width {memory.shape[1]} != expected {params.memory_dim}"
        )
    if not 1 <= num_frames <= cfg.max_frames:
        raise ContractError(
            f"decode: num_frames {num_frames} outside [1, {cfg.max_frames}]"
        )
    head_dim = cfg.model_dim // cfg.num_heads
    queries = ad.slice2d(params.p_embed, slice(0, num_frames), slice(None)) + ad.slice2d(
        params.p_pos, slice(0, num_frames), slice(None)
    )
    q = ad.matmul(queries, params.u_q)  # M x d
    k = ad.matmul(memory, params.u_k)  # T x d
    v = ad.matmul(memory, params.u_v)  # T x d
    heads: list[Tensor] = []
    attn: list[np.ndarray] = []
    for h in range(cfg.num_heads):
        cols = slice(h * head_dim, (h + 1) * head_dim)
        q_h = ad.slice2d(q, slice(None), cols)
        k_h = ad.slice2d(k, slice(None), cols)
        v_h = ad.slice2d(v, slice(None), cols)
        logits = ad.scale(ad.matmul(q_h, ad.transpose(k_h)), 1.0 / math.sqrt(head_dim))
        weights = ad.softmax(logits, axis=1)  # M x T
        attn.append(weights.data.copy())
        heads.append(ad.matmul(weights, v_h))
    attended = ad.concat(heads, axis=1)  # M x d
    poses = ad.matmul(attended, params.w_pose) + params.b_pose
    emotions = ad.sigmoid(ad.matmul(attended, params.w_emo) + params.b_emo)
    return DecodedOutput(poses=poses, emotions=emotions, attention=attn)


def decode_semantic_only(H: Tensor, num_frames: int, params: EgsidParams) -> DecodedOutput:
    """Ablation path: run the identical pipeline with the emotion block of the
    memory replaced by zeros."""
    emo_width = params.memory_dim - H.shape[1]
    if emo_width < 0:
        raise DimensionError(
            f"decode_semantic_only: semantic width {H.shape[1]} exceeds memory width "
            f"{params.memory_dim}"
        )
    zeros = Tensor.zeros(H.shape[0], emo_width)
    return decode(fuse_memory(H, zeros), num_frames, params)
