"""Evaluation metrics.

Text side: clipped n-gram precision scores with a brevity penalty and a
longest-common-subsequence F-measure.  Pose side: mean absolute error and
nearest-neighbour back-translation against a training corpus.  Analysis
side: cosine-similarity tracking of the encoder's two representation
streams against per-sample reference vectors, affinely normalized from
[-1, 1] to [0, 1].
"""

from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from . import autodiff as ad
from .errors import ContractError, DimensionError

__all__ = [
    "EMOTION_LABELS",
    "NGramStats",
    "ngram_stats",
    "bleu_from_stats",
    "bleu_n",
    "corpus_bleu",
    "lcs_length",
    "rouge_l",
    "mae_per_category",
    "resample_frames",
    "back_translate",
    "rho",
    "paired_rho",
    "SimilarityReport",
    "EvalReport",
    "evaluate_model",
]

TokenSeq = Sequence[Hashable]

EMOTION_LABELS = ("happy", "sad", "angry", "fear", "disgust", "surprise", "neutral")

MAX_NGRAM = 4


@dataclass
class NGramStats:
    """Clipped matches and totals per n-gram order, aggregatable across samples."""

    matches: list[int] = field(default_factory=lambda: [0] * MAX_NGRAM)
    totals: list[int] = field(default_factory=lambda: [0] * MAX_NGRAM)
    cand_len: int = 0
    ref_len: int = 0

    def __iadd__(self, other: "NGramStats") -> "NGramStats":
        for k in range(MAX_NGRAM):
            self.matches[k] += other.matches[k]
            self.totals[k] += other.totals[k]
        self.cand_len += other.cand_len
        self.ref_len += other.ref_len
        return self


def _ngrams(seq: TokenSeq, n: int) -> Counter:
    return Counter(tuple(seq[i : i + n]) for i in range(len(seq) - n + 1))


def ngram_stats(candidate: TokenSeq, references: Sequence[TokenSeq]) -> NGramStats:
    """Per-order clipped match counts for one candidate against its references."""
    if not references:
        raise ContractError("ngram_stats: at least one reference is required")
    stats = NGramStats()
    stats.cand_len = len(candidate)
    # reference length closest to the candidate's (shorter wins ties)
    stats.ref_len = min((abs(len(r) - len(candidate)), len(r)) for r in references)[1]
    for n in range(1, MAX_NGRAM + 1):
        cand_counts = _ngrams(candidate, n)
        if not cand_counts:
            continue
        max_ref: Counter = Counter()
        for ref in references:
            for gram, count in _ngrams(ref, n).items():
                if count > max_ref[gram]:
                    max_ref[gram] = count
        stats.totals[n - 1] = max(0, len(candidate) - n + 1)
        stats.matches[n - 1] = sum(min(c, max_ref[g]) for g, c in cand_counts.items())
    return stats


def bleu_from_stats(stats: NGramStats, n: int) -> float:
    """Geometric mean of clipped precisions for orders 1..n, times the brevity
    penalty exp(min(0, 1 - ref_len/cand_len))."""
    if not 1 <= n <= MAX_NGRAM:
        raise ContractError(f"bleu order must be in 1..{MAX_NGRAM}, got {n}")
    if stats.cand_len == 0:
        return 0.0
    log_sum = 0.0
    for k in range(n):
        if stats.totals[k] == 0 or stats.matches[k] == 0:
            return 0.0
        log_sum += math.log(stats.matches[k] / stats.totals[k])
    bp = math.exp(min(0.0, 1.0 - stats.ref_len / stats.cand_len))
    return bp * math.exp(log_sum / n)


def bleu_n(candidate: TokenSeq, references: Sequence[TokenSeq], n: int) -> float:
    if len(candidate) == 0:
        warnings.warn("bleu_n: empty candidate scores 0", stacklevel=2)
        return 0.0
    return bleu_from_stats(ngram_stats(candidate, references), n)


def corpus_bleu(pairs: Sequence[tuple[TokenSeq, Sequence[TokenSeq]]], n: int) -> float:
    """Corpus-level score: statistics are pooled before the geometric mean."""
    agg = NGramStats()
    for candidate, references in pairs:
        agg += ngram_stats(candidate, references)
    return bleu_from_stats(agg, n)


def lcs_length(a: TokenSeq, b: TokenSeq) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, 1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: TokenSeq, reference: TokenSeq) -> float:
    """LCS F-measure: F = 2PR/(P+R) with P = LCS/|cand|, R = LCS/|ref|."""
    if len(reference) == 0:
        raise ContractError("rouge_l: empty reference")
    lcs = lcs_length(candidate, reference)
    if lcs == 0 or len(candidate) == 0:
        return 0.0
    p = lcs / len(candidate)
    r = lcs / len(reference)
    return 2.0 * p * r / (p + r)


def mae_per_category(pred: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, float]:
    """Per-category mean absolute error over frames, plus the category mean."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(f"mae_per_category: shapes {pred.shape} vs {target.shape}")
    per_cat = np.abs(pred - target).mean(axis=0)
    return per_cat, float(per_cat.mean())


def resample_frames(poses: np.ndarray, num_frames: int) -> np.ndarray:
    """Linear time resampling of an (M, D) sequence to (num_frames, D)."""
    poses = np.asarray(poses, dtype=np.float64)
    m = poses.shape[0]
    if m == num_frames:
        return poses
    src = np.linspace(0.0, 1.0, m) if m > 1 else np.zeros(1)
    dst = np.linspace(0.0, 1.0, num_frames) if num_frames > 1 else np.zeros(1)
    out = np.empty((num_frames, poses.shape[1]))
    for d in range(poses.shape[1]):
        out[:, d] = np.interp(dst, src, poses[:, d])
    return out


def back_translate(pred_poses: np.ndarray, corpus) -> tuple:
    """Map a generated pose sequence back to text: return the token sequence
    of the nearest corpus sample under frame-averaged MAE, after resampling
    each corpus sequence to the candidate's frame count.  Ties break toward
    the lower corpus index."""
    if len(corpus) == 0:
        raise ContractError("back_translate: empty corpus")
    pred = np.asarray(pred_poses, dtype=np.float64)
    dists = np.empty(len(corpus))
    for i, sample in enumerate(corpus):
        aligned = resample_frames(sample.poses, pred.shape[0])
        dists[i] = np.abs(aligned - pred).mean()
    return tuple(corpus[int(np.argmin(dists))].tokens)


def rho(Z: np.ndarray, z_ref: np.ndarray) -> float:
    """Mean cosine similarity of the rows of Z against one reference vector,
    affinely normalized from [-1, 1] to [0, 1].  Zero-norm rows contribute 0
    similarity and raise a warning."""
    Z = np.asarray(Z, dtype=np.float64)
    ref = np.asarray(z_ref, dtype=np.float64).reshape(-1)
    if Z.ndim != 2 or Z.shape[1] != ref.shape[0]:
        raise DimensionError(f"rho: shapes {Z.shape} vs reference {ref.shape}")
    ref_norm = np.linalg.norm(ref)
    if ref_norm == 0.0:
        raise ContractError("rho: zero reference vector")
    row_norms = np.linalg.norm(Z, axis=1)
    zero_rows = row_norms == 0.0
    if zero_rows.any():
        warnings.warn(f"rho: {int(zero_rows.sum())} zero-norm rows contribute 0", stacklevel=2)
    safe = np.where(zero_rows, 1.0, row_norms)
    cos = (Z @ ref) / (safe * ref_norm)
    cos[zero_rows] = 0.0
    return (float(cos.mean()) + 1.0) / 2.0


def paired_rho(A: np.ndarray, B: np.ndarray) -> float:
    """Mean cosine similarity between paired rows of two streams, normalized
    to [0, 1].  Feature widths may differ; the narrower stream is zero-padded."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape[0] != B.shape[0]:
        raise DimensionError(f"paired_rho: row counts differ, {A.shape} vs {B.shape}")
    width = max(A.shape[1], B.shape[1])
    if A.shape[1] < width:
        A = np.pad(A, ((0, 0), (0, width - A.shape[1])))
    if B.shape[1] < width:
        B = np.pad(B, ((0, 0), (0, width - B.shape[1])))
    na = np.linalg.norm(A, axis=1)
    nb = np.linalg.norm(B, axis=1)
    zero = (na == 0.0) | (nb == 0.0)
    safe = np.where(zero, 1.0, na * nb)
    cos = (A * B).sum(axis=1) / safe
    cos[zero] = 0.0
    return (float(cos.mean()) + 1.0) / 2.0


@dataclass
class SimilarityReport:
    """Per-epoch disentanglement curves."""

    rho_sem: list[float] = field(default_factory=list)
    rho_emo: list[float] = field(default_factory=list)
    rho_cross: list[float] = field(default_factory=list)

    def append(self, sem: float, emo: float, cross: float) -> None:
        self.rho_sem.append(sem)
        self.rho_emo.append(emo)
        self.rho_cross.append(cross)


@dataclass
class EvalReport:
    bleu: tuple[float, float, float, float]
    rouge_l: float
    mae_pose: float
    mae_emo_per_class: np.ndarray  # (7,)
    mae_emo_mean: float

    CSV_COLUMNS = (
        "bleu1",
        "bleu2",
        "bleu3",
        "bleu4",
        "rougeL",
        "mae_pose",
        "mae_emo_mean",
    ) + tuple(f"mae_emo_{name}" for name in EMOTION_LABELS)

    def csv_values(self) -> list[float]:
        return (
            list(self.bleu)
            + [self.rouge_l, self.mae_pose, self.mae_emo_mean]
            + [float(v) for v in self.mae_emo_per_class]
        )

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(self.CSV_COLUMNS) + "\n")
            fh.write(",".join(repr(v) for v in self.csv_values()) + "\n")

    def table(self) -> str:
        lines = ["metric            value", "-" * 26]
        for name, value in zip(self.CSV_COLUMNS, self.csv_values()):
            lines.append(f"{name:<18}{value:.4f}")
        return "\n".join(lines)


def evaluate_model(
    model,
    samples,
    corpus=None,
    *,
    no_e_dese: bool = False,
    no_e_egsid: bool = False,
) -> EvalReport:
    """Decode every sample, back-translate the poses against the corpus, and
    aggregate text and error metrics.  The corpus defaults to the evaluated
    samples themselves."""
    if len(samples) == 0:
        raise ContractError("evaluate_model: empty sample list")
    if corpus is None:
        corpus = samples
    agg = NGramStats()
    rouge_sum = 0.0
    pose_mae_sum = 0.0
    emo_abs_sum = np.zeros(len(EMOTION_LABELS))
    frames = 0
    with ad.no_grad():
        for s in samples:
            _, dec = model.forward(
                s.tokens, s.poses.shape[0], no_e_dese=no_e_dese, no_e_egsid=no_e_egsid
            )
            candidate = back_translate(dec.poses.data, corpus)
            agg += ngram_stats(candidate, [tuple(s.tokens)])
            rouge_sum += rouge_l(candidate, tuple(s.tokens))
            pose_mae_sum += float(np.abs(dec.poses.data - s.poses).mean())
            emo_abs_sum += np.abs(dec.emotions.data - s.emotion_targets).sum(axis=0)
            frames += s.poses.shape[0]
    per_class = emo_abs_sum / frames
    return EvalReport(
        bleu=tuple(bleu_from_stats(agg, n) for n in range(1, MAX_NGRAM + 1)),
        rouge_l=rouge_sum / len(samples),
        mae_pose=pose_mae_sum / len(samples),
        mae_emo_per_class=per_class,
        mae_emo_mean=float(per_class.mean()),
    )
