"""Command-line entry point.

Subcommands: ``gen-data`` (synthetic teacher dataset), ``train`` (three-phase
or ablated training), ``eval`` (back-translation and error metrics report),
``ablate`` (full ablation grid with a summary table), ``analyze`` (loss and
similarity figures from a history CSV).

Every command is deterministic given its flags, seed, and input files.
Exit codes: 0 success, 1 runtime failure, 2 usage error.  ``EASL_SEED`` in
the environment provides a default seed; an explicit flag or config-file
value takes precedence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field, replace

from .data import GeneratorConfig, generate_dataset, load_dataset, save_dataset
from .dese import DeseConfig
from .egsid import EgsidConfig
from .errors import ConfigMismatchError, ContractError, EaslError
from .metrics import evaluate_model
from .model import EaslModel, ModelConfig
from .training import (
    TrainConfig,
    load_checkpoint,
    read_history_csv,
    save_checkpoint,
    train,
    write_history_csv,
)

ENV_SEED = "EASL_SEED"

ABLATION_CONFIGS = ("full", "no_three_phase", "no_e_dese", "no_e_egsid", "no_e_dese_egsid")


@dataclass(frozen=True)
class ModelSection:
    embed_dim: int = 12
    semantic_dim: int | None = None  # None: match the dataset's semantic reference width
    emotion_dim: int | None = None  # None: match the dataset's emotion reference width
    model_dim: int = 20  # hosts the fused memory width (12 + 7) as a pass-through
    num_heads: int = 2
    max_frames: int = 64


@dataclass(frozen=True)
class TrainSection:
    epochs_per_phase: tuple[int, int, int] = (30, 30, 30)
    learning_rate: float = 0.05
    batch_size: int = 8
    lambda_pose: float = 1.0
    lambda_emo: float = 1.0
    pose_loss_in_phase2: bool = True
    eval_subset: int = 64


@dataclass(frozen=True)
class AblationFlags:
    no_three_phase: bool = False
    no_e_dese: bool = False
    no_e_egsid: bool = False


@dataclass
class RunConfig:
    """Everything one command needs; round-trips through a JSON document."""

    command: str = ""
    seed: int = 0
    paths: dict = field(default_factory=dict)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    model: ModelSection = field(default_factory=ModelSection)
    training: TrainSection = field(default_factory=TrainSection)
    ablation: AblationFlags = field(default_factory=AblationFlags)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        raw = json.loads(text)
        cfg = cls(
            command=raw.get("command", ""),
            seed=int(raw.get("seed", 0)),
            paths=dict(raw.get("paths", {})),
            generator=GeneratorConfig(**raw.get("generator", {})),
            model=ModelSection(**raw.get("model", {})),
            training=TrainSection(**raw.get("training", {})),
            ablation=AblationFlags(**raw.get("ablation", {})),
        )
        cfg.training = replace(
            cfg.training, epochs_per_phase=tuple(cfg.training.epochs_per_phase)
        )
        return cfg

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def _resolve_seed(flag_seed: int | None, file_seed: int | None) -> int:
    if flag_seed is not None:
        return flag_seed
    if file_seed is not None:
        return file_seed
    env = os.environ.get(ENV_SEED)
    if env is not None:
        return int(env)
    return 0


def _load_run_config(args) -> RunConfig:
    file_seed = None
    if getattr(args, "config", None):
        cfg = RunConfig.from_file(args.config)
        with open(args.config, "r", encoding="utf-8") as fh:
            if "seed" in json.load(fh):
                file_seed = cfg.seed
    else:
        cfg = RunConfig()
    cfg.seed = _resolve_seed(getattr(args, "seed", None), file_seed)
    return cfg


def build_model_config(cfg: RunConfig, header: dict, samples) -> ModelConfig:
    """Model dimensions come from the run config; vocabulary size and pose
    width come from the dataset header; reference widths pin the encoder's
    stream dims unless explicitly overridden."""
    sem_dim = cfg.model.semantic_dim
    emo_dim = cfg.model.emotion_dim
    if samples:
        if sem_dim is None:
            sem_dim = samples[0].ref_sem.shape[0]
        if emo_dim is None:
            emo_dim = samples[0].ref_emo.shape[0]
    sem_dim = sem_dim if sem_dim is not None else cfg.generator.semantic_dim
    emo_dim = emo_dim if emo_dim is not None else cfg.generator.emotion_dim
    dese = DeseConfig(
        vocab_size=int(header["vocab_size"]),
        embed_dim=cfg.model.embed_dim,
        semantic_dim=int(sem_dim),
        emotion_dim=int(emo_dim),
    )
    egsid = EgsidConfig(
        model_dim=cfg.model.model_dim,
        num_heads=cfg.model.num_heads,
        pose_dim=int(header["D"]),
        max_frames=cfg.model.max_frames,
    )
    return ModelConfig(dese=dese, egsid=egsid)


def _train_config(cfg: RunConfig) -> TrainConfig:
    t = cfg.training
    a = cfg.ablation
    return TrainConfig(
        epochs_per_phase=t.epochs_per_phase,
        learning_rate=t.learning_rate,
        batch_size=t.batch_size,
        lambda_pose=t.lambda_pose,
        lambda_emo=t.lambda_emo,
        seed=cfg.seed,
        three_phase=not a.no_three_phase,
        pose_loss_in_phase2=t.pose_loss_in_phase2,
        no_e_dese=a.no_e_dese,
        no_e_egsid=a.no_e_egsid,
        eval_subset=t.eval_subset,
    )


def _check_frames(samples, max_frames: int) -> None:
    longest = max(s.poses.shape[0] for s in samples)
    if longest > max_frames:
        raise ContractError(
            f"dataset has sequences of {longest} frames, above max_frames "
            f"{max_frames}; raise --max-frames"
        )


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_gen_data(args) -> int:
    cfg = _load_run_config(args)
    gen = cfg.generator
    overrides = {}
    for name in ("vocab_size", "pose_dim", "noise_sigma", "motif_scale"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if overrides:
        gen = replace(gen, **overrides)
    samples = generate_dataset(args.size, gen, cfg.seed)
    save_dataset(samples, args.out, vocab_size=gen.vocab_size)
    print(f"wrote {len(samples)} samples to {args.out}")
    return 0


def _run_training(cfg: RunConfig, data_path, checkpoint_path, history_path):
    samples, header = load_dataset(data_path)
    if not samples:
        raise ContractError(f"{data_path}: dataset is empty")
    model_cfg = build_model_config(cfg, header, samples)
    _check_frames(samples, model_cfg.egsid.max_frames)
    model = EaslModel(model_cfg, seed=cfg.seed)
    ckpt = train(model, samples, _train_config(cfg))
    save_checkpoint(ckpt, checkpoint_path)
    write_history_csv(ckpt.loss_history, history_path)
    return model, ckpt, samples


def cmd_train(args) -> int:
    cfg = _load_run_config(args)
    cfg.ablation = AblationFlags(
        no_three_phase=bool(args.no_three_phase) or cfg.ablation.no_three_phase,
        no_e_dese=bool(args.no_e_dese) or cfg.ablation.no_e_dese,
        no_e_egsid=bool(args.no_e_egsid) or cfg.ablation.no_e_egsid,
    )
    overrides = {}
    if args.epochs is not None:
        overrides["epochs_per_phase"] = _parse_epochs(args.epochs)
    for flag, name in (
        ("learning_rate", "learning_rate"),
        ("batch_size", "batch_size"),
        ("lambda_pose", "lambda_pose"),
        ("lambda_emo", "lambda_emo"),
    ):
        value = getattr(args, flag)
        if value is not None:
            overrides[name] = value
    if overrides:
        cfg.training = replace(cfg.training, **overrides)
    history = args.history or f"{args.checkpoint}.history.csv"
    _, ckpt, _ = _run_training(cfg, args.data, args.checkpoint, history)
    print(f"checkpoint: {args.checkpoint}")
    print(f"history:    {history}")
    ini, fin = ckpt.initial_eval, ckpt.final_eval
    print(
        f"pose MAE {ini['mae_pose']:.4f} -> {fin['mae_pose']:.4f}, "
        f"emotion MAE {ini['mae_emo_mean']:.4f} -> {fin['mae_emo_mean']:.4f}"
    )
    return 0


def cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    if args.config:
        cfg = _load_run_config(args)
        samples_peek, header_peek = load_dataset(args.data)
        requested = build_model_config(cfg, header_peek, samples_peek)
        if requested.config_hash() != ckpt.config_hash:
            raise ConfigMismatchError(
                f"checkpoint config hash {ckpt.config_hash[:12]}... does not match "
                f"requested config hash {requested.config_hash()[:12]}..."
            )
    model_cfg = ModelConfig.from_dict(ckpt.model_config)
    model = EaslModel(model_cfg, seed=int(ckpt.train_config.get("seed", 0)))
    model.registry.load_values(ckpt.params)
    samples, _ = load_dataset(args.data)
    if not samples:
        raise ContractError(f"{args.data}: dataset is empty")
    report = evaluate_model(
        model,
        samples,
        no_e_dese=bool(ckpt.train_config.get("no_e_dese", False)),
        no_e_egsid=bool(ckpt.train_config.get("no_e_egsid", False)),
    )
    report.write_csv(args.report)
    print(report.table())
    print(f"report: {args.report}")
    return 0


def _ablation_flags(name: str) -> AblationFlags:
    if name not in ABLATION_CONFIGS:
        raise ContractError(f"unknown ablation config {name!r}, pick from {ABLATION_CONFIGS}")
    return AblationFlags(
        no_three_phase=name == "no_three_phase",
        no_e_dese=name in ("no_e_dese", "no_e_dese_egsid"),
        no_e_egsid=name in ("no_e_egsid", "no_e_dese_egsid"),
    )


def cmd_ablate(args) -> int:
    cfg = _load_run_config(args)
    if args.epochs is not None:
        cfg.training = replace(cfg.training, epochs_per_phase=_parse_epochs(args.epochs))
    seeds = [int(s) for s in args.seeds.split(",")]
    configs = [c.strip() for c in args.configs.split(",") if c.strip()]
    os.makedirs(args.outdir, exist_ok=True)
    rows = []
    for name in configs:
        for seed in seeds:
            run_cfg = RunConfig(
                command="train",
                seed=seed,
                generator=cfg.generator,
                model=cfg.model,
                training=cfg.training,
                ablation=_ablation_flags(name),
            )
            stem = os.path.join(args.outdir, f"{name}_seed{seed}")
            model, ckpt, samples = _run_training(
                run_cfg, args.data, f"{stem}.ckpt", f"{stem}.history.csv"
            )
            report = evaluate_model(
                model,
                samples,
                no_e_dese=run_cfg.ablation.no_e_dese,
                no_e_egsid=run_cfg.ablation.no_e_egsid,
            )
            rows.append((name, seed, report.bleu[3], report.rouge_l, report.mae_emo_mean))
            print(
                f"{name:<18} seed {seed}: BLEU-4 {report.bleu[3]:.4f} "
                f"ROUGE-L {report.rouge_l:.4f} emotion MAE {report.mae_emo_mean:.4f}"
            )
    summary = os.path.join(args.outdir, "summary.csv")
    with open(summary, "w", encoding="utf-8") as fh:
        fh.write("config,seed,bleu4,rougeL,mae_emo_mean\n")
        for name, seed, b4, rl, mae in rows:
            fh.write(f"{name},{seed},{b4!r},{rl!r},{mae!r}\n")
    print(f"summary: {summary}")
    return 0


def cmd_analyze(args) -> int:
    from .plotting import render_history_figures  # defer matplotlib import

    rows = read_history_csv(args.history)
    paths = render_history_figures(rows, args.outdir)
    for p in paths:
        print(p)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _parse_epochs(text: str) -> tuple[int, int, int]:
    parts = [int(p) for p in text.split(",")]
    if len(parts) == 1:
        parts = [parts[0]] * 3
    if len(parts) != 3:
        raise ContractError(f"--epochs wants one count or three comma-separated, got {text!r}")
    return tuple(parts)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="easl",
        description="emotion-aware text-to-pose generation: data, training, "
        "evaluation, ablations, analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic teacher dataset")
    p.add_argument("--size", type=int, default=200)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--vocab-size", dest="vocab_size", type=int, default=None)
    p.add_argument("--pose-dim", dest="pose_dim", type=int, default=None)
    p.add_argument("--noise-sigma", dest="noise_sigma", type=float, default=None)
    p.add_argument("--motif-scale", dest="motif_scale", type=float, default=None)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a model on a dataset file")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--history", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--epochs", default=None, help="per-phase counts, e.g. 30,30,30")
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--lambda-pose", dest="lambda_pose", type=float, default=None)
    p.add_argument("--lambda-emo", dest="lambda_emo", type=float, default=None)
    p.add_argument("--no-three-phase", action="store_true")
    p.add_argument("--no-e-dese", action="store_true")
    p.add_argument("--no-e-egsid", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run the ablation grid and summarize")
    p.add_argument("--data", required=True)
    p.add_argument("--outdir", required=True)
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--configs", default=",".join(ABLATION_CONFIGS))
    p.add_argument("--epochs", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("analyze", help="render loss and similarity figures")
    p.add_argument("--history", required=True)
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_analyze)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (EaslError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
