"""Contract tests for the on-disk formats other tools read."""

import json
from pathlib import Path

import numpy as np
import pytest

from src.models.corpus import Utterance
from src.models.metrics import METRICS_COLUMNS, MetricsRow
from src.models.run_config import RunConfig
from src.services.checkpoint import TrainState, encode_checkpoint
from src.services.corpus_store import MANIFEST_NAME, blob_name
from src.services.diagnostics import EMBEDDINGS_FILE, run_diagnostics, write_diagnostics
from src.services.evaluation import evaluate
from src.services.network.params import InputDims, init_params
from src.services.network.pipeline import pipeline_for
from src.services.optimizer import AdamState
from src.utils.csv_io import MetricsWriter


class TestCorpusContainer:
    """Corpus directory layout."""

    def test_blob_layout(self, corpus_dir: Path, tiny_corpus: list[Utterance]) -> None:
        """Verify magic, little-endian header, f32 frames and u32 labels."""
        u = tiny_corpus[0]
        raw = (corpus_dir / blob_name(u.id)).read_bytes()
        assert raw[:4] == b"MIRU"
        version, frames, d_v, d_a = np.frombuffer(raw, dtype="<u4", count=4, offset=4)
        assert (version, frames, d_v, d_a) == (1, u.frames, 6, 5)
        offset = 20
        visual = np.frombuffer(raw, dtype="<f4", count=frames * d_v, offset=offset)
        np.testing.assert_array_equal(visual.reshape(frames, d_v), u.visual)
        offset += 4 * frames * (d_v + d_a)
        labels = np.frombuffer(raw, dtype="<u4", count=frames, offset=offset)
        np.testing.assert_array_equal(labels, u.labels)
        assert len(raw) == offset + 4 * frames

    def test_manifest_fields(self, corpus_dir: Path) -> None:
        """Verify the manifest echoes the corpus spec and lists every utterance."""
        manifest = json.loads((corpus_dir / MANIFEST_NAME).read_text(encoding="utf-8"))
        assert {"version", "spec", "ids", "frames", "d_visual", "d_audio", "vocab_size"} <= set(
            manifest
        )
        assert len(manifest["ids"]) == manifest["spec"]["n_utterances"] == 12


class TestCheckpointFormat:
    """Checkpoint preamble and header."""

    @pytest.fixture
    def raw(self, tiny_config: RunConfig, tiny_dims: InputDims) -> bytes:
        params = init_params(tiny_config.model, tiny_dims, pipeline_for(tiny_config.train), 0)
        state = TrainState(
            step=5,
            params=params,
            adam=AdamState.zeros_like(params),
            config=tiny_config,
            dims=tiny_dims,
        )
        return encode_checkpoint(state)

    def test_preamble_and_header(self, raw: bytes, tiny_config: RunConfig) -> None:
        """Verify magic, version and the length-prefixed JSON header."""
        assert raw[:4] == b"MIRC"
        version, header_len = np.frombuffer(raw, dtype="<u4", count=2, offset=4)
        assert version == 1
        header = json.loads(raw[12 : 12 + header_len].decode("utf-8"))
        assert header["step"] == 5
        assert header["dtype"] == "float32"
        assert header["rng"] == {"seed": tiny_config.train.seed, "next_step": 6}
        assert header["config"]["model"]["d_model"] == 8

    def test_tensor_section_size(self, raw: bytes) -> None:
        """Verify three f32 tensors (parameter, m, v) per manifest entry."""
        header_len = int(np.frombuffer(raw, dtype="<u4", count=1, offset=8)[0])
        header = json.loads(raw[12 : 12 + header_len].decode("utf-8"))
        scalars = sum(int(np.prod(e["shape"])) for e in header["manifest"])
        assert len(raw) == 12 + header_len + 3 * 4 * scalars


class TestMetricsCsv:
    """metrics.csv schema."""

    def test_header(self, tmp_path: Path) -> None:
        """Verify the column order."""
        path = tmp_path / "metrics.csv"
        MetricsWriter(path).append(
            MetricsRow(step=1, l_rec=1.0, total_phase_b=1.0, grad_norm_rest=0.5)
        )
        header = path.read_text(encoding="utf-8").splitlines()[0]
        assert header.split(",") == list(METRICS_COLUMNS)
        assert header.startswith("step,L_rec,L_D,L_G,L_MIM,total_phaseB")


class TestReports:
    """JSON report and embeddings schemas."""

    def test_eval_report_fields(
        self, tiny_config: RunConfig, tiny_dims: InputDims, tiny_corpus: list[Utterance]
    ) -> None:
        """Verify the keys of an evaluation report."""
        params = init_params(tiny_config.model, tiny_dims, pipeline_for(tiny_config.train), 0)
        payload = evaluate(params, tiny_config, tiny_corpus[:3]).model_dump(mode="json")
        assert {"modality", "noise_type", "clean_ter", "per_snr", "noisy", "frames"} <= set(payload)

    def test_embeddings_header(
        self,
        tiny_config: RunConfig,
        tiny_dims: InputDims,
        tiny_corpus: list[Utterance],
        tmp_path: Path,
    ) -> None:
        """Verify embeddings.csv columns: type, utt, frame, d_0..d_{D-1}."""
        params = init_params(tiny_config.model, tiny_dims, pipeline_for(tiny_config.train), 0)
        result = run_diagnostics(params, tiny_config, tiny_corpus[:1])
        write_diagnostics(result, tmp_path, tiny_config)
        header = (tmp_path / EMBEDDINGS_FILE).read_text(encoding="utf-8").splitlines()[0]
        assert header.split(",") == ["type", "utt", "frame", *(f"d_{i}" for i in range(8))]
