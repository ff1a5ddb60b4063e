"""Synthetic teacher dataset: token sequences paired with pose sequences and
per-frame emotion confidence targets.

Each vocabulary token owns a short deterministic pose motif and a seven-class
emotion profile (category order: happy, sad, angry, fear, disgust, surprise,
neutral).  A sample concatenates the motifs of its tokens (plus Gaussian
noise) and stamps each frame with the active token's profile, cross-fading
over the two frames adjacent to every motif boundary.  Emotion rows are
independent per-class confidences in [0, 1], not a distribution.

Every sample also carries two fixed reference vectors used by the
similarity analysis: a semantic reference derived from the sample's clean
pose content and an emotion reference derived from its mean emotion profile.
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, ParseError, VersionError

__all__ = [
    "GeneratorConfig",
    "Sample",
    "SyntheticTeacher",
    "generate_dataset",
    "save_dataset",
    "load_dataset",
    "dataset_hash",
]

FORMAT_VERSION = 1
EMOTION_CLASSES = 7
CROSSFADE_FRAMES = 2


@dataclass(frozen=True)
class GeneratorConfig:
    vocab_size: int = 20
    pose_dim: int = 12
    semantic_dim: int = 12  # width of the semantic reference vectors
    emotion_dim: int = 7  # width of the emotion reference vectors
    min_tokens: int = 2
    max_tokens: int = 6
    min_motif_frames: int = 4
    max_motif_frames: int = 8
    motif_scale: float = 1.0
    motif_wiggle: float = 0.3  # per-frame spread, relative to motif_scale
    noise_sigma: float = 0.02

    def __post_init__(self):
        if self.vocab_size < 1 or self.pose_dim < 1:
            raise ContractError("vocab_size and pose_dim must be >= 1")
        if not 1 <= self.min_tokens <= self.max_tokens:
            raise ContractError("need 1 <= min_tokens <= max_tokens")
        if not 1 <= self.min_motif_frames <= self.max_motif_frames:
            raise ContractError("need 1 <= min_motif_frames <= max_motif_frames")
        if self.noise_sigma < 0:
            raise ContractError("noise_sigma must be >= 0")


@dataclass
class Sample:
    tokens: tuple[int, ...]
    poses: np.ndarray  # (M, pose_dim)
    emotion_targets: np.ndarray  # (M, 7), confidences in [0, 1]
    ref_sem: np.ndarray  # (semantic_dim,)
    ref_emo: np.ndarray  # (emotion_dim,)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Sample)
            and self.tokens == other.tokens
            and np.array_equal(self.poses, other.poses)
            and np.array_equal(self.emotion_targets, other.emotion_targets)
            and np.array_equal(self.ref_sem, other.ref_sem)
            and np.array_equal(self.ref_emo, other.ref_emo)
        )


class SyntheticTeacher:
    """Deterministic generator state: per-token motifs, emotion profiles, and
    the fixed maps that produce per-sample reference vectors."""

    def __init__(self, cfg: GeneratorConfig, seed: int):
        self.cfg = cfg
        rng = np.random.default_rng(seed)
        self._rng = rng
        self.motifs: list[np.ndarray] = []
        self.profiles = np.empty((cfg.vocab_size, EMOTION_CLASSES))
        for v in range(cfg.vocab_size):
            length = int(rng.integers(cfg.min_motif_frames, cfg.max_motif_frames + 1))
            direction = rng.normal(size=cfg.pose_dim)
            direction /= np.linalg.norm(direction)
            base = cfg.motif_scale * direction
            wiggle = cfg.motif_wiggle * cfg.motif_scale * rng.normal(size=(length, cfg.pose_dim))
            self.motifs.append(base[None, :] + wiggle)
            profile = rng.uniform(0.0, 0.15, size=EMOTION_CLASSES)
            profile[v % EMOTION_CLASSES] = rng.uniform(0.75, 0.95)
            self.profiles[v] = profile
        self.sem_map = self._reference_map(cfg.semantic_dim, cfg.pose_dim)
        self.emo_map = self._reference_map(cfg.emotion_dim, EMOTION_CLASSES)

    def _reference_map(self, out_dim: int, in_dim: int) -> np.ndarray:
        if out_dim == in_dim:
            return np.eye(out_dim)
        return self._rng.normal(size=(out_dim, in_dim)) / np.sqrt(in_dim)

    def clean_poses(self, tokens) -> np.ndarray:
        return np.concatenate([self.motifs[t] for t in tokens], axis=0)

    def emotion_targets(self, tokens) -> np.ndarray:
        lengths = [len(self.motifs[t]) for t in tokens]
        rows = np.concatenate(
            [np.repeat(self.profiles[t][None, :], n, axis=0) for t, n in zip(tokens, lengths)]
        )
        # cross-fade the two frames adjacent to each motif boundary
        boundary = 0
        for i in range(len(tokens) - 1):
            boundary += lengths[i]
            prev_p, next_p = self.profiles[tokens[i]], self.profiles[tokens[i + 1]]
            rows[boundary - 1] = (2.0 * prev_p + next_p) / 3.0
            rows[boundary] = (prev_p + 2.0 * next_p) / 3.0
        return rows

    def sample(self, rng: np.random.Generator) -> Sample:
        cfg = self.cfg
        n_tokens = int(rng.integers(cfg.min_tokens, cfg.max_tokens + 1))
        tokens = tuple(int(t) for t in rng.integers(0, cfg.vocab_size, size=n_tokens))
        clean = self.clean_poses(tokens)
        poses = clean + rng.normal(0.0, cfg.noise_sigma, size=clean.shape)
        emotions = self.emotion_targets(tokens)
        ref_sem = self.sem_map @ clean.mean(axis=0)
        # centered profile: the emotion stream starts out near the uniform
        # direction, so the reference measures class-specific structure only
        mean_profile = emotions.mean(axis=0)
        ref_emo = self.emo_map @ (mean_profile - mean_profile.mean())
        return Sample(
            tokens=tokens,
            poses=poses,
            emotion_targets=emotions,
            ref_sem=ref_sem,
            ref_emo=ref_emo,
        )


def generate_dataset(size: int, cfg: GeneratorConfig, seed: int) -> list[Sample]:
    """Pure function of (cfg, seed): the teacher and all sample draws come
    from one seeded stream."""
    if size < 1:
        raise ContractError("generate_dataset: size must be >= 1")
    teacher = SyntheticTeacher(cfg, seed)
    rng = teacher._rng
    return [teacher.sample(rng) for _ in range(size)]


# ---------------------------------------------------------------------------
# JSON-lines persistence
# ---------------------------------------------------------------------------


def _serialize(samples, vocab_size: int) -> str:
    pose_dim = samples[0].poses.shape[1] if samples else 0
    buf = io.StringIO()
    header = {
        "version": FORMAT_VERSION,
        "D": pose_dim,
        "K": EMOTION_CLASSES,
        "vocab_size": vocab_size,
    }
    buf.write(json.dumps(header) + "\n")
    for s in samples:
        record = {
            "tokens": list(s.tokens),
            "poses": s.poses.tolist(),
            "emotions": s.emotion_targets.tolist(),
            "ref_sem": s.ref_sem.tolist(),
            "ref_emo": s.ref_emo.tolist(),
        }
        buf.write(json.dumps(record) + "\n")
    return buf.getvalue()


def save_dataset(samples, path, vocab_size: int) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_serialize(samples, vocab_size))


def load_dataset(path) -> tuple[list[Sample], dict]:
    """Returns (samples, header).  Malformed content raises ParseError with
    the byte offset of the offending line; version mismatches raise
    VersionError."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.strip():
        raise ParseError(f"{path}: empty file, expected a header line", byte_offset=0)
    samples: list[Sample] = []
    header: dict | None = None
    offset = 0
    for line in blob.splitlines(keepends=True):
        stripped = line.strip()
        if not stripped:
            offset += len(line)
            continue
        try:
            record = json.loads(stripped.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            pos = getattr(exc, "pos", 0)
            raise ParseError(f"{path}: malformed JSON line", byte_offset=offset + pos) from None
        if header is None:
            if "version" not in record:
                raise ParseError(f"{path}: first line is not a header", byte_offset=offset)
            if record["version"] != FORMAT_VERSION:
                raise VersionError(
                    f"{path}: unsupported dataset version {record['version']} "
                    f"(expected {FORMAT_VERSION})"
                )
            header = record
        else:
            try:
                samples.append(
                    Sample(
                        tokens=tuple(int(t) for t in record["tokens"]),
                        poses=np.asarray(record["poses"], dtype=np.float64),
                        emotion_targets=np.asarray(record["emotions"], dtype=np.float64),
                        ref_sem=np.asarray(record["ref_sem"], dtype=np.float64),
                        ref_emo=np.asarray(record["ref_emo"], dtype=np.float64),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"{path}: bad sample record ({exc})", byte_offset=offset) from None
        offset += len(line)
    return samples, header


def dataset_hash(samples, vocab_size: int) -> str:
    """Stable content hash of the serialized dataset."""
    return hashlib.sha256(_serialize(samples, vocab_size).encode("utf-8")).hexdigest()
