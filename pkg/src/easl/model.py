"""Full encoder-decoder model: parameter construction, grouping, forward pass.

Groups matter for the freeze schedule: the encoder's semantic parameters,
the encoder's emotion-gate parameters, and everything in the decoder form
three disjoint sets.  The decoder group stays trainable in every phase.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

from . import dese, egsid
from .dese import DeseConfig, DeseParams, EncodedSequence
from .egsid import DecodedOutput, EgsidConfig, EgsidParams
from .registry import Group, ParamRegistry

__all__ = ["ModelConfig", "EaslModel"]


@dataclass(frozen=True)
class ModelConfig:
    dese: DeseConfig
    egsid: EgsidConfig

    def to_dict(self) -> dict:
        return {"dese": asdict(self.dese), "egsid": asdict(self.egsid)}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(dese=DeseConfig(**d["dese"]), egsid=EgsidConfig(**d["egsid"]))

    def config_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()


class EaslModel:
    """Encoder plus decoder with a grouped parameter registry."""

    def __init__(self, config: ModelConfig, seed: int):
        self.config = config
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.dese_params = DeseParams(config.dese, rng)
        memory_dim = config.dese.semantic_dim + config.dese.emotion_dim
        self.egsid_params = EgsidParams(
            config.egsid, memory_dim, rng, semantic_width=config.dese.semantic_dim
        )
        self.registry = self._build_registry()

    def _build_registry(self) -> ParamRegistry:
        reg = ParamRegistry()
        for name in DeseParams.SEMANTIC_NAMES:
            reg.add(f"dese.{name}", getattr(self.dese_params, name), Group.DESE_SEMANTIC)
        for name in DeseParams.EMOTION_NAMES:
            reg.add(f"dese.{name}", getattr(self.dese_params, name), Group.DESE_EMOTION)
        for name in EgsidParams.PARAM_NAMES:
            reg.add(f"egsid.{name}", getattr(self.egsid_params, name), Group.EGSID)
        return reg

    def encode(self, tokens, *, hold_emotion: bool = False) -> EncodedSequence:
        return dese.encode(tokens, self.dese_params, hold_emotion=hold_emotion)

    def forward(
        self,
        tokens,
        num_frames: int,
        *,
        no_e_dese: bool = False,
        no_e_egsid: bool = False,
    ) -> tuple[EncodedSequence, DecodedOutput]:
        """Encode tokens and decode ``num_frames`` output frames.

        ``no_e_dese`` holds the encoder's emotion stream at its initial value;
        ``no_e_egsid`` zero-masks the emotion block of the decoder memory.
        """
        enc = self.encode(tokens, hold_emotion=no_e_dese)
        if no_e_egsid:
            dec = egsid.decode_semantic_only(enc.H, num_frames, self.egsid_params)
        else:
            memory = egsid.fuse_memory(enc.H, enc.E)
            dec = egsid.decode(memory, num_frames, self.egsid_params)
        return enc, dec
