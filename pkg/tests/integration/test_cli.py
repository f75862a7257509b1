"""Integration tests for the mirgan command line."""

import json
from pathlib import Path

import pytest

from src.exceptions import CheckpointError, DivergenceError, RefusalError
from src.main import build_parser, exit_code_for, main
from src.services.corpus_store import MANIFEST_NAME
from src.services.trainer import FINAL_CHECKPOINT, METRICS_FILE
from src.utils.csv_io import read_rows


@pytest.fixture
def trained(config_file: Path, tmp_path: Path) -> Path:
    """Output directory of a two-step training run."""
    out = tmp_path / "run"
    assert main(["train", "--config", str(config_file), "--out", str(out), "--steps", "2"]) == 0
    return out


class TestExitCodes:
    """Tests for the error to exit-code mapping."""

    def test_mapping(self) -> None:
        """Test the documented exit codes."""
        assert exit_code_for(RefusalError("x")) == 2
        assert exit_code_for(DivergenceError(1, {"L_rec": float("nan")})) == 3
        assert exit_code_for(CheckpointError("x", "magic")) == 4

    def test_unknown_command(self) -> None:
        """Test that argparse rejects an unknown subcommand."""
        with pytest.raises(SystemExit):
            build_parser().parse_args(["fly"])


class TestGenData:
    """Tests for gen-data."""

    def test_writes_corpus_and_refuses_overwrite(
        self, config_file: Path, tmp_path: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        """Test generation, refusal without --force and overwrite with it."""
        out = tmp_path / "generated"
        args = ["gen-data", "--config", str(config_file), "--out", str(out)]
        assert main(args) == 0
        assert (out / MANIFEST_NAME).exists()
        printed = json.loads(capsys.readouterr().out)
        assert printed["utterances"] == 12

        assert main(args) == 2
        error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert error["code"] == "REFUSED"
        assert main([*args, "--force"]) == 0

    def test_seed_flag_sets_corpus_seed(self, config_file: Path, tmp_path: Path) -> None:
        """Test that --seed changes the generated corpus."""
        a, b = tmp_path / "a", tmp_path / "b"
        main(["gen-data", "--config", str(config_file), "--out", str(a), "--seed", "1"])
        main(["gen-data", "--config", str(config_file), "--out", str(b), "--seed", "2"])
        manifest_a = json.loads((a / MANIFEST_NAME).read_text(encoding="utf-8"))
        manifest_b = json.loads((b / MANIFEST_NAME).read_text(encoding="utf-8"))
        assert manifest_a["spec"]["seed"] == 1
        assert manifest_b["spec"]["seed"] == 2


class TestTrain:
    """Tests for train."""

    def test_writes_one_row_per_step(self, trained: Path) -> None:
        """Test metrics.csv, config.json and the final checkpoint."""
        assert len(read_rows(trained / METRICS_FILE)) == 2
        assert (trained / FINAL_CHECKPOINT).exists()
        config = json.loads((trained / "config.json").read_text(encoding="utf-8"))
        assert config["model"]["d_model"] == 8

    def test_ablation_flag(self, config_file: Path, tmp_path: Path) -> None:
        """Test that --ablation no_mim leaves the L_MIM column empty."""
        out = tmp_path / "no_mim"
        code = main(
            [
                "train",
                "--config",
                str(config_file),
                "--out",
                str(out),
                "--steps",
                "1",
                "--ablation",
                "no_mim",
            ]
        )
        assert code == 0
        assert read_rows(out / METRICS_FILE)[0]["L_MIM"] == ""

    def test_divergence_exit_code(self, config_file: Path, tmp_path: Path) -> None:
        """Test that a runaway learning rate stops with exit 3 and divergence.json."""
        out = tmp_path / "diverged"
        code = main(
            [
                "train",
                "--config",
                str(config_file),
                "--out",
                str(out),
                "--set",
                "train.learning_rate=1e30",
            ]
        )
        assert code == 3
        report = json.loads((out / "divergence.json").read_text(encoding="utf-8"))
        assert report["code"] == "NUMERIC_DIVERGENCE"
        assert report["context"]["step"] >= 1

    def test_unknown_override(self, config_file: Path, tmp_path: Path) -> None:
        """Test that a bad --set key is a configuration error."""
        out = str(tmp_path / "x")
        code = main(["train", "--config", str(config_file), "--out", out, "--set", "train.nope=1"])
        assert code == 2

    def test_resume_continues_metrics(self, trained: Path, config_file: Path) -> None:
        """Test that resuming from the step-2 checkpoint appends rows 3 to 4."""
        code = main(
            [
                "train",
                "--config",
                str(config_file),
                "--out",
                str(trained),
                "--checkpoint",
                str(trained / FINAL_CHECKPOINT),
                "--steps",
                "4",
            ]
        )
        assert code == 0
        assert [r["step"] for r in read_rows(trained / METRICS_FILE)] == ["1", "2", "3", "4"]

    def test_resume_keeps_checkpoint_split(
        self, trained: Path, config_file: Path, tmp_path: Path
    ) -> None:
        """Test that resuming with another val_fraction still trains on the original split."""
        whole = tmp_path / "whole"
        base = ["train", "--config", str(config_file), "--steps", "4"]
        assert main([*base, "--out", str(whole)]) == 0
        resumed = [
            *base,
            "--out",
            str(trained),
            "--checkpoint",
            str(trained / FINAL_CHECKPOINT),
            "--set",
            "train.val_fraction=0.5",
        ]
        assert main(resumed) == 0
        assert (trained / METRICS_FILE).read_text(encoding="utf-8") == (
            whole / METRICS_FILE
        ).read_text(encoding="utf-8")
        config = json.loads((trained / "config.json").read_text(encoding="utf-8"))
        assert config["train"]["val_fraction"] == 0.25


class TestEval:
    """Tests for eval."""

    def test_report(
        self, trained: Path, config_file: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        """Test the default report over the configured SNR levels."""
        checkpoint = str(trained / FINAL_CHECKPOINT)
        args = ["eval", "--config", str(config_file), "--checkpoint", checkpoint]
        assert main(args) == 0
        report = json.loads(capsys.readouterr().out)
        assert set(report["per_snr"]) == {"-5", "5"}
        assert report["checkpoint_step"] == 2

    def test_clean_only(
        self, trained: Path, config_file: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        """Test that an empty --snr gives a clean-only report."""
        args = [
            "eval",
            "--config",
            str(config_file),
            "--checkpoint",
            str(trained / FINAL_CHECKPOINT),
            "--snr=",
            "--modality",
            "A",
        ]
        assert main(args) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["per_snr"] == {}
        assert report["noisy"] is None
        assert report["modality"] == "A"

    def test_incompatible_checkpoint(self, trained: Path, config_file: Path) -> None:
        """Test that another architecture exits with 4."""
        args = [
            "eval",
            "--config",
            str(config_file),
            "--checkpoint",
            str(trained / FINAL_CHECKPOINT),
            "--set",
            "model.d_model=16",
        ]
        assert main(args) == 4

    def test_missing_checkpoint(self, config_file: Path, tmp_path: Path) -> None:
        """Test that an absent checkpoint file exits with 4."""
        args = ["eval", "--config", str(config_file), "--checkpoint", str(tmp_path / "no.mirc")]
        assert main(args) == 4


class TestGradcheck:
    """Tests for gradcheck."""

    def test_ops_scope(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that the primitive checks pass and print a table."""
        assert main(["gradcheck", "--scope", "ops"]) == 0
        assert "checks passed" in capsys.readouterr().out


class TestDiagnose:
    """Tests for diagnose."""

    def test_embedding_rows(self, trained: Path, config_file: Path, tmp_path: Path) -> None:
        """Test that embeddings.csv holds three rows per corpus frame."""
        out = tmp_path / "diag"
        args = [
            "diagnose",
            "--config",
            str(config_file),
            "--checkpoint",
            str(trained / FINAL_CHECKPOINT),
            "--out",
            str(out),
            "--split",
            "all",
        ]
        assert main(args) == 0
        rows = read_rows(out / "embeddings.csv")
        paths = json.loads(config_file.read_text(encoding="utf-8"))["paths"]
        corpus_dir = Path(paths["corpus_dir"])
        manifest = json.loads((corpus_dir / MANIFEST_NAME).read_text(encoding="utf-8"))
        frames = sum(manifest["frames"])
        assert len(rows) == 3 * frames


class TestAblate:
    """Tests for ablate."""

    def test_summary_rows(self, config_file: Path, tmp_path: Path) -> None:
        """Test one summary row per mode with full as the baseline."""
        out = tmp_path / "ablate"
        args = [
            "ablate",
            "--config",
            str(config_file),
            "--out",
            str(out),
            "--seeds",
            "0",
            "--steps",
            "2",
        ]
        assert main(args) == 0
        rows = read_rows(out / "summary.csv")
        assert len(rows) == 8
        assert rows[0]["mode"] == "full"
        assert [r["baseline"] for r in rows] == ["true"] + ["false"] * 7
        assert (out / "no_mim" / "seed0" / "report.json").exists()
