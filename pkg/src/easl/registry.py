"""Named parameter registry with group tags and per-parameter freeze flags."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator

import numpy as np

from .autodiff import Tensor
from .errors import ContractError

__all__ = ["Group", "Param", "ParamRegistry"]


class Group(str, Enum):
    DESE_SEMANTIC = "dese_semantic"
    DESE_EMOTION = "dese_emotion"
    EGSID = "egsid"


@dataclass
class Param:
    name: str
    tensor: Tensor
    group: Group
    frozen: bool = field(default=False)


class ParamRegistry:
    """Insertion-ordered mapping of parameter name -> (tensor, group, frozen).

    Every parameter belongs to exactly one group; the freeze schedule flips
    the ``frozen`` flags, and the optimizer skips frozen entries.
    """

    def __init__(self):
        self._params: dict[str, Param] = {}

    def add(self, name: str, tensor: Tensor, group: Group) -> None:
        if name in self._params:
            raise ContractError(f"duplicate parameter name {name!r}")
        if not tensor.requires_grad:
            raise ContractError(f"parameter {name!r} must require gradients")
        self._params[name] = Param(name=name, tensor=tensor, group=Group(group))

    def __iter__(self) -> Iterator[Param]:
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def get(self, name: str) -> Param:
        return self._params[name]

    def names(self) -> list[str]:
        return list(self._params)

    def group_params(self, group: Group) -> list[Param]:
        return [p for p in self if p.group == group]

    def set_trainable_groups(self, groups: set[Group]) -> None:
        for p in self:
            p.frozen = p.group not in groups

    def trainable(self) -> list[Param]:
        return [p for p in self if not p.frozen]

    def zero_grads(self) -> None:
        for p in self:
            p.tensor.zero_grad()

    def values(self) -> dict[str, np.ndarray]:
        """Copies of all parameter arrays, keyed by name."""
        return {p.name: p.tensor.data.copy() for p in self}

    def load_values(self, values: dict[str, np.ndarray]) -> None:
        missing = set(self._params) - set(values)
        extra = set(values) - set(self._params)
        if missing or extra:
            raise ContractError(
                f"parameter set mismatch: missing {sorted(missing)}, extra {sorted(extra)}"
            )
        for name, arr in values.items():
            p = self._params[name]
            if p.tensor.data.shape != arr.shape:
                raise ContractError(
                    f"shape mismatch for {name!r}: {p.tensor.data.shape} vs {arr.shape}"
                )
            p.tensor.data[...] = np.asarray(arr, dtype=np.float64)

    def param_hashes(self) -> dict[str, str]:
        """Per-parameter sha256 of the raw little-endian float64 bytes."""
        out = {}
        for p in self:
            buf = np.ascontiguousarray(p.tensor.data, dtype="<f8").tobytes()
            out[p.name] = hashlib.sha256(buf).hexdigest()
        return out
