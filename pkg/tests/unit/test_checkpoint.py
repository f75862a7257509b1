"""Unit tests for training state checkpoints."""

from pathlib import Path

import numpy as np
import pytest

from src.exceptions import CheckpointError, FormatError
from src.models.run_config import RunConfig
from src.services.checkpoint import (
    CHECKPOINT_MAGIC,
    BestRecord,
    TrainState,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from src.services.network.params import InputDims, init_params
from src.services.network.pipeline import pipeline_for
from src.services.optimizer import AdamState


@pytest.fixture
def state(tiny_config: RunConfig, tiny_dims: InputDims) -> TrainState:
    params = init_params(tiny_config.model, tiny_dims, pipeline_for(tiny_config.train), seed=0)
    adam = AdamState.zeros_like(params)
    adam.t = dict.fromkeys(adam.t, 3)
    return TrainState(
        step=3,
        params=params,
        adam=adam,
        config=tiny_config,
        dims=tiny_dims,
        best_val=BestRecord(step=3, ter_clean=0.5, ter_noisy=0.6),
    )


class TestCheckpoint:
    """Tests for save_checkpoint and load_checkpoint."""

    def test_loaded_state_matches(self, state: TrainState, tmp_path: Path) -> None:
        """Test that parameters, moments and metadata survive a save."""
        path = save_checkpoint(state, tmp_path / "c.mirc")
        loaded = load_checkpoint(path, state.config, state.dims)
        assert loaded.step == 3
        assert loaded.config == state.config
        assert loaded.best_val == state.best_val
        assert loaded.adam.t == state.adam.t
        for name in state.params:
            np.testing.assert_array_equal(loaded.params[name], state.params[name])
            assert loaded.params[name].dtype == state.params[name].dtype

    def test_bytes_are_deterministic(self, state: TrainState) -> None:
        """Test that saving the same state twice gives identical bytes."""
        assert encode_checkpoint(state) == encode_checkpoint(state.copy())

    def test_bad_magic(self, state: TrainState) -> None:
        """Test that a foreign file is refused."""
        with pytest.raises(CheckpointError) as exc:
            decode_checkpoint(b"NOPE" + encode_checkpoint(state)[4:])
        assert exc.value.field == "magic"

    def test_truncated(self, state: TrainState) -> None:
        """Test that a cut file is a format error."""
        with pytest.raises(FormatError):
            decode_checkpoint(encode_checkpoint(state)[:-8])

    def test_architecture_mismatch(self, state: TrainState) -> None:
        """Test that a different model width is refused, naming the field."""
        other = state.config.with_updates({"model.d_model": 16})
        with pytest.raises(CheckpointError) as exc:
            decode_checkpoint(encode_checkpoint(state), expected_config=other)
        assert exc.value.field == "model.d_model"

    def test_vocab_mismatch(self, state: TrainState) -> None:
        """Test that a corpus with another vocabulary is refused."""
        dims = InputDims(state.dims.d_visual, state.dims.d_audio, state.dims.vocab_size + 1)
        with pytest.raises(CheckpointError) as exc:
            decode_checkpoint(encode_checkpoint(state), expected_dims=dims)
        assert exc.value.field == "vocab_size"

    def test_missing_file(self, tmp_path: Path) -> None:
        """Test that an absent path is a checkpoint error."""
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "none.mirc")

    def test_starts_with_magic(self, state: TrainState) -> None:
        """Test the file preamble."""
        assert encode_checkpoint(state)[:4] == CHECKPOINT_MAGIC
