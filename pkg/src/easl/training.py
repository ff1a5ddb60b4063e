"""Three-phase progressive training with parameter freezing.

Phase 1 trains the semantic path (encoder semantics plus decoder) on the
pose objective alone.  Phase 2 freezes the encoder's semantic parameters
and brings in the emotion objective to shape the emotion gate.  Phase 3
freezes the whole encoder and refines only the decoder on the joint loss.
The decoder is trainable in every phase.

Freezing is exact: the optimizer never touches frozen tensors, so their
bytes are identical at phase start and end.  Runs are deterministic for a
fixed seed; checkpoints round-trip bit-exactly through a self-describing
binary format with a JSON metadata preamble.
"""

from __future__ import annotations

import csv
import json
import os
import struct
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import autodiff as ad
from . import metrics
from .autodiff import Tensor
from .errors import (
    ContractError,
    DimensionError,
    InputError,
    ParseError,
    TrainingDivergedError,
    VersionError,
)
from .registry import Group, Param, ParamRegistry  # noqa: F401  (re-exported surface)

__all__ = [
    "Group",
    "ParamRegistry",
    "TrainConfig",
    "HistoryRow",
    "Checkpoint",
    "loss_pose",
    "loss_emo",
    "loss_total",
    "set_phase",
    "phase_loss_weights",
    "sgd_step",
    "train",
    "save_checkpoint",
    "load_checkpoint",
    "write_history_csv",
    "read_history_csv",
]

HISTORY_COLUMNS = (
    "phase",
    "epoch",
    "loss_pose",
    "loss_emo",
    "loss_total",
    "rho_sem",
    "rho_emo",
    "rho_cross",
)


@dataclass
class TrainConfig:
    epochs_per_phase: tuple[int, int, int] = (30, 30, 30)
    learning_rate: float = 0.05
    batch_size: int = 8
    lambda_pose: float = 1.0
    lambda_emo: float = 1.0
    seed: int = 0
    three_phase: bool = True
    pose_loss_in_phase2: bool = True
    no_e_dese: bool = False
    no_e_egsid: bool = False
    eval_subset: int = 64  # samples used for the per-epoch similarity curves

    def __post_init__(self):
        self.epochs_per_phase = tuple(int(e) for e in self.epochs_per_phase)
        if len(self.epochs_per_phase) != 3 or any(e < 0 for e in self.epochs_per_phase):
            raise ContractError("epochs_per_phase must be three non-negative counts")
        if self.lambda_pose < 0 or self.lambda_emo < 0:
            raise ContractError("loss weights must be non-negative")
        if self.lambda_pose + self.lambda_emo <= 0:
            raise ContractError("at least one loss weight must be positive")
        if self.batch_size < 1:
            raise ContractError("batch_size must be >= 1")


@dataclass
class HistoryRow:
    phase: int
    epoch: int
    loss_pose: float
    loss_emo: float
    loss_total: float
    rho_sem: float
    rho_emo: float
    rho_cross: float


@dataclass
class Checkpoint:
    params: dict[str, np.ndarray]
    groups: dict[str, str]
    phase: int
    epoch: int
    loss_history: list[HistoryRow]
    config_hash: str
    model_config: dict
    train_config: dict
    initial_eval: dict[str, float]
    final_eval: dict[str, float]
    phase_end_hashes: dict[str, dict[str, str]]


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------


def loss_pose(pred: Tensor, target: Tensor) -> Tensor:
    """Mean over frames of the mean absolute coordinate error."""
    if pred.shape != target.shape:
        raise DimensionError(f"loss_pose: shapes {pred.shape} vs {target.shape}")
    return ad.mean_abs(ad.sub(pred, target))


def loss_emo(pred: Tensor, target: Tensor) -> Tensor:
    """Mean over frames of the mean absolute confidence error across the
    seven categories.  Targets must be confidences in [0, 1]."""
    if pred.shape != target.shape:
        raise DimensionError(f"loss_emo: shapes {pred.shape} vs {target.shape}")
    t = target.data
    if t.min() < 0.0 or t.max() > 1.0:
        raise InputError("loss_emo: targets must lie in [0, 1]")
    return ad.mean_abs(ad.sub(pred, target))


def _weighted_total(lp: Tensor, le: Tensor, w_pose: float, w_emo: float) -> Tensor:
    return ad.scale(lp, w_pose) + ad.scale(le, w_emo)


def loss_total(lp: Tensor, le: Tensor, cfg: TrainConfig) -> Tensor:
    """Weighted sum of the pose and emotion terms under the configured weights."""
    return _weighted_total(lp, le, cfg.lambda_pose, cfg.lambda_emo)


# ---------------------------------------------------------------------------
# phase schedule
# ---------------------------------------------------------------------------

_PHASE_GROUPS = {
    1: {Group.DESE_SEMANTIC, Group.EGSID},
    2: {Group.DESE_EMOTION, Group.EGSID},
    3: {Group.EGSID},
}


def set_phase(registry: ParamRegistry, phase: int) -> None:
    """Apply the freeze pattern for one training phase."""
    if phase not in _PHASE_GROUPS:
        raise ContractError(f"set_phase: phase must be 1, 2 or 3, got {phase}")
    registry.set_trainable_groups(_PHASE_GROUPS[phase])


def phase_loss_weights(phase: int, cfg: TrainConfig) -> tuple[float, float]:
    """Effective (pose, emotion) loss weights for a phase.  Phase 1 forces the
    emotion weight to zero; phase 2 keeps the pose term unless configured off."""
    if phase == 1:
        return cfg.lambda_pose, 0.0
    if phase == 2:
        return (cfg.lambda_pose if cfg.pose_loss_in_phase2 else 0.0), cfg.lambda_emo
    if phase == 3:
        return cfg.lambda_pose, cfg.lambda_emo
    raise ContractError(f"phase_loss_weights: invalid phase {phase}")


def sgd_step(registry: ParamRegistry, lr: float) -> None:
    """Plain gradient step on unfrozen parameters, then zero all gradients."""
    for p in registry:
        if not p.frozen and p.tensor.grad is not None:
            p.tensor.data -= lr * p.tensor.grad
    registry.zero_grads()


# ---------------------------------------------------------------------------
# evaluation helpers
# ---------------------------------------------------------------------------


def _evaluate(model, samples, cfg: TrainConfig, w_pose: float, w_emo: float) -> dict[str, float]:
    """Loss terms and similarity scores of the current parameters on a sample set."""
    pose_sum = emo_sum = 0.0
    sem_sum = emo_rho_sum = cross_sum = 0.0
    with ad.no_grad():
        for s in samples:
            enc, dec = model.forward(
                s.tokens, s.poses.shape[0], no_e_dese=cfg.no_e_dese, no_e_egsid=cfg.no_e_egsid
            )
            pose_sum += float(np.abs(dec.poses.data - s.poses).mean())
            emo_sum += float(np.abs(dec.emotions.data - s.emotion_targets).mean())
            sem_sum += metrics.rho(enc.H.data, s.ref_sem)
            emo_rho_sum += metrics.rho(enc.E.data, s.ref_emo)
            cross_sum += metrics.paired_rho(enc.H.data, enc.E.data)
    n = len(samples)
    pose = pose_sum / n
    emo = emo_sum / n
    return {
        "mae_pose": pose,
        "mae_emo_mean": emo,
        "loss_total": w_pose * pose + w_emo * emo,
        "rho_sem": sem_sum / n,
        "rho_emo": emo_rho_sum / n,
        "rho_cross": cross_sum / n,
    }


def _finite_or_raise(value: float, term: str, phase: int, epoch: int, batch: int) -> None:
    if not np.isfinite(value):
        raise TrainingDivergedError(phase, epoch, batch, term, value)


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------


def train(
    model,
    dataset,
    cfg: TrainConfig,
    on_phase_end: Callable[[int, object], None] | None = None,
) -> Checkpoint:
    """Run the full training schedule and return the final checkpoint.

    The returned checkpoint carries the loss/similarity history (one row per
    epoch plus a pre-training baseline row with phase 0), full-dataset
    evaluations before and after training, and per-parameter hashes taken at
    the end of each phase for freeze verification.
    """
    if len(dataset) == 0:
        raise ContractError("train: empty dataset")
    registry = model.registry
    rng = np.random.default_rng(cfg.seed)
    n = len(dataset)
    eval_samples = dataset[: min(cfg.eval_subset, n)] if cfg.eval_subset > 0 else dataset

    if cfg.three_phase:
        segments = [(p, cfg.epochs_per_phase[p - 1]) for p in (1, 2, 3)]
    else:
        segments = [(1, sum(cfg.epochs_per_phase))]

    baseline = _evaluate(model, eval_samples, cfg, cfg.lambda_pose, cfg.lambda_emo)
    history = [
        HistoryRow(
            phase=0,
            epoch=0,
            loss_pose=baseline["mae_pose"],
            loss_emo=baseline["mae_emo_mean"],
            loss_total=baseline["loss_total"],
            rho_sem=baseline["rho_sem"],
            rho_emo=baseline["rho_emo"],
            rho_cross=baseline["rho_cross"],
        )
    ]
    initial_eval = _evaluate(model, dataset, cfg, cfg.lambda_pose, cfg.lambda_emo)

    registry.zero_grads()
    phase_end_hashes: dict[str, dict[str, str]] = {}
    global_epoch = 0
    last_phase = 0
    for phase, epochs in segments:
        if cfg.three_phase:
            set_phase(registry, phase)
            w_pose, w_emo = phase_loss_weights(phase, cfg)
        else:
            registry.set_trainable_groups({Group.DESE_SEMANTIC, Group.DESE_EMOTION, Group.EGSID})
            w_pose, w_emo = cfg.lambda_pose, cfg.lambda_emo
        last_phase = phase
        for _ in range(epochs):
            global_epoch += 1
            order = rng.permutation(n)
            pose_sum = emo_sum = total_sum = 0.0
            for batch_idx, start in enumerate(range(0, n, cfg.batch_size)):
                batch = order[start : start + cfg.batch_size]
                inv = 1.0 / len(batch)
                for idx in batch:
                    s = dataset[idx]
                    ad.clear_tape()
                    _, dec = model.forward(
                        s.tokens,
                        s.poses.shape[0],
                        no_e_dese=cfg.no_e_dese,
                        no_e_egsid=cfg.no_e_egsid,
                    )
                    lp = loss_pose(dec.poses, Tensor(s.poses))
                    le = loss_emo(dec.emotions, Tensor(s.emotion_targets))
                    _finite_or_raise(lp.item(), "loss_pose", phase, global_epoch, batch_idx)
                    _finite_or_raise(le.item(), "loss_emo", phase, global_epoch, batch_idx)
                    total = _weighted_total(lp, le, w_pose, w_emo)
                    ad.backward(ad.scale(total, inv))
                    pose_sum += lp.item()
                    emo_sum += le.item()
                    total_sum += total.item()
                sgd_step(registry, cfg.learning_rate)
            ad.clear_tape()
            scores = _evaluate(model, eval_samples, cfg, w_pose, w_emo)
            history.append(
                HistoryRow(
                    phase=phase,
                    epoch=global_epoch,
                    loss_pose=pose_sum / n,
                    loss_emo=emo_sum / n,
                    loss_total=total_sum / n,
                    rho_sem=scores["rho_sem"],
                    rho_emo=scores["rho_emo"],
                    rho_cross=scores["rho_cross"],
                )
            )
        phase_end_hashes[str(phase)] = registry.param_hashes()
        if on_phase_end is not None:
            on_phase_end(phase, model)

    final_eval = _evaluate(model, dataset, cfg, cfg.lambda_pose, cfg.lambda_emo)
    return Checkpoint(
        params=registry.values(),
        groups={p.name: p.group.value for p in registry},
        phase=last_phase,
        epoch=global_epoch,
        loss_history=history,
        config_hash=model.config.config_hash(),
        model_config=model.config.to_dict(),
        train_config=asdict(cfg),
        initial_eval=initial_eval,
        final_eval=final_eval,
        phase_end_hashes=phase_end_hashes,
    )


# ---------------------------------------------------------------------------
# checkpoint serialization
# ---------------------------------------------------------------------------

_MAGIC = b"EASLCKPT"
_VERSION = 1


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    """Self-describing binary: magic, version, JSON metadata preamble, then
    raw little-endian float64 parameter buffers.  Written atomically."""
    meta = {
        "params": [
            {"name": name, "group": ckpt.groups[name], "shape": list(arr.shape)}
            for name, arr in ckpt.params.items()
        ],
        "phase": ckpt.phase,
        "epoch": ckpt.epoch,
        "config_hash": ckpt.config_hash,
        "model_config": ckpt.model_config,
        "train_config": ckpt.train_config,
        "loss_history": [asdict(row) for row in ckpt.loss_history],
        "initial_eval": ckpt.initial_eval,
        "final_eval": ckpt.final_eval,
        "phase_end_hashes": ckpt.phase_end_hashes,
    }
    meta_bytes = json.dumps(meta).encode("utf-8")
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IQ", _VERSION, len(meta_bytes)))
        fh.write(meta_bytes)
        for arr in ckpt.params.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    os.replace(tmp, path)


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(_MAGIC)] != _MAGIC:
        raise ParseError(f"{path}: not a checkpoint file", byte_offset=0)
    offset = len(_MAGIC)
    try:
        version, meta_len = struct.unpack_from("<IQ", blob, offset)
    except struct.error:
        raise ParseError(f"{path}: truncated header", byte_offset=offset) from None
    if version != _VERSION:
        raise VersionError(f"{path}: unsupported checkpoint version {version}")
    offset += struct.calcsize("<IQ")
    try:
        meta = json.loads(blob[offset : offset + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: bad metadata ({exc})", byte_offset=offset) from None
    offset += meta_len
    params: dict[str, np.ndarray] = {}
    groups: dict[str, str] = {}
    for spec in meta["params"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if offset + nbytes > len(blob):
            raise ParseError(f"{path}: truncated parameter {spec['name']!r}", byte_offset=offset)
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).reshape(shape)
        params[spec["name"]] = arr.astype(np.float64)
        groups[spec["name"]] = spec["group"]
        offset += nbytes
    history = [HistoryRow(**row) for row in meta["loss_history"]]
    return Checkpoint(
        params=params,
        groups=groups,
        phase=meta["phase"],
        epoch=meta["epoch"],
        loss_history=history,
        config_hash=meta["config_hash"],
        model_config=meta["model_config"],
        train_config=meta["train_config"],
        initial_eval=meta["initial_eval"],
        final_eval=meta["final_eval"],
        phase_end_hashes=meta["phase_end_hashes"],
    )


# ---------------------------------------------------------------------------
# history CSV
# ---------------------------------------------------------------------------


def write_history_csv(rows: list[HistoryRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_COLUMNS)
        for row in rows:
            writer.writerow(
                [row.phase, row.epoch]
                + [repr(v) for v in (row.loss_pose, row.loss_emo, row.loss_total,
                                     row.rho_sem, row.rho_emo, row.rho_cross)]
            )


def read_history_csv(path) -> list[HistoryRow]:
    rows: list[HistoryRow] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != HISTORY_COLUMNS:
            raise ParseError(f"{path}: line 1: bad or missing history header {header!r}")
        for lineno, fields in enumerate(reader, start=2):
            if not fields:
                continue
            if len(fields) != len(HISTORY_COLUMNS):
                raise ParseError(f"{path}: line {lineno}: expected {len(HISTORY_COLUMNS)} fields")
            try:
                rows.append(
                    HistoryRow(
                        phase=int(fields[0]),
                        epoch=int(fields[1]),
                        **{
                            name: float(v)
                            for name, v in zip(HISTORY_COLUMNS[2:], fields[2:])
                        },
                    )
                )
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from None
    return rows
