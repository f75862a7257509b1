"""Unit tests for batching and the two training phases."""

import numpy as np
import pytest

from src.autodiff import ops
from src.exceptions import DivergenceError, InputError
from src.models.corpus import Utterance
from src.models.run_config import RunConfig
from src.services.checkpoint import TrainState
from src.services.network.params import InputDims, partition_of
from src.services.trainer import BatchSchedule, Trainer


def _snapshot(state: TrainState) -> dict[str, np.ndarray]:
    return {name: state.params[name].copy() for name in state.params}


def _changed(before: dict[str, np.ndarray], state: TrainState) -> set[str]:
    return {n for n, a in before.items() if not np.array_equal(a, state.params[n])}


@pytest.fixture
def trainer(tiny_config: RunConfig, tiny_corpus: list[Utterance], tiny_dims: InputDims) -> Trainer:
    return Trainer(tiny_config, tiny_corpus[:9], tiny_dims)


class TestBatchSchedule:
    """Tests for BatchSchedule."""

    def test_epoch_covers_every_utterance_once(self, tiny_corpus: list[Utterance]) -> None:
        """Test that one epoch visits each utterance exactly once."""
        schedule = BatchSchedule(tiny_corpus, batch_size=2, pool_batches=2, seed=0)
        assert schedule.batches_per_epoch == 6
        seen = [u.id for s in range(1, 7) for u in schedule.batch(s)]
        assert sorted(seen) == sorted(u.id for u in tiny_corpus)

    def test_partial_last_pool(self, tiny_corpus: list[Utterance]) -> None:
        """Test the batch count when the corpus does not fill the last pool."""
        schedule = BatchSchedule(tiny_corpus[:9], batch_size=2, pool_batches=2, seed=0)
        assert schedule.batches_per_epoch == 5
        assert sum(len(schedule.batch(s)) for s in range(1, 6)) == 9

    def test_pure_function_of_step(self, tiny_corpus: list[Utterance]) -> None:
        """Test that a step's batch does not depend on earlier calls."""
        a = BatchSchedule(tiny_corpus, 2, 2, seed=5)
        b = BatchSchedule(tiny_corpus, 2, 2, seed=5)
        for step in range(1, 8):
            a.batch(step)
        assert [u.id for u in a.batch(9)] == [u.id for u in b.batch(9)]

    def test_seed_changes_order(self, tiny_corpus: list[Utterance]) -> None:
        """Test that different seeds give different epochs."""
        a = BatchSchedule(tiny_corpus, 2, 2, seed=0)
        b = BatchSchedule(tiny_corpus, 2, 2, seed=1)
        first = [[u.id for u in a.batch(s)] for s in range(1, 7)]
        second = [[u.id for u in b.batch(s)] for s in range(1, 7)]
        assert first != second

    def test_empty_training_set(self) -> None:
        """Test that there is nothing to batch without utterances."""
        with pytest.raises(InputError):
            BatchSchedule([], 2, 2, seed=0)


class TestPhases:
    """Tests for the parameter discipline of each phase."""

    def test_phase_a_updates_only_discriminator(self, trainer: Trainer) -> None:
        """Test that Phase A leaves every non-discriminator parameter untouched."""
        state = trainer.init_state()
        before = _snapshot(state)
        result = trainer.phase_a(state, trainer.schedule.batch(1), 1)
        changed = _changed(before, state)
        assert changed
        assert {partition_of(n) for n in changed} == {"D"}
        assert result.mean_d_on_inv == pytest.approx(0.5)

    def test_phase_b_leaves_discriminator(self, trainer: Trainer) -> None:
        """Test that Phase B never changes θ_D and does change the rest."""
        state = trainer.init_state()
        before = _snapshot(state)
        result = trainer.phase_b(state, trainer.schedule.batch(1), 1)
        changed = _changed(before, state)
        assert not {n for n in changed if partition_of(n) == "D"}
        assert {"vf", "af", "vae", "G", "rec"} <= {partition_of(n) for n in changed}
        assert result.l_g is not None and result.l_mim is not None

    def test_train_step_row(self, trainer: Trainer) -> None:
        """Test the metrics row of a full step."""
        state = trainer.init_state()
        state, row = trainer.train_step(state, trainer.schedule.batch(1))
        assert state.step == row.step == 1
        # An untrained discriminator outputs 0.5 everywhere, so L_GAN starts at 0.
        assert row.l_d == pytest.approx(0.0, abs=1e-5)
        assert row.l_g is not None and row.l_g >= 2.0 * np.log(2.0) - 1e-6
        assert row.val_ter_clean is None

    def test_no_mim_reports_no_mim_loss(
        self, tiny_config: RunConfig, tiny_corpus: list[Utterance], tiny_dims: InputDims
    ) -> None:
        """Test that the no_mim mode leaves the L_MIM column empty."""
        config = tiny_config.with_updates({"train.ablation": "no_mim"})
        trainer = Trainer(config, tiny_corpus[:9], tiny_dims)
        _, row = trainer.train_step(trainer.init_state(), trainer.schedule.batch(1))
        assert row.l_mim is None
        assert row.l_d is not None

    def test_no_adversarial_skips_phase_a(
        self, tiny_config: RunConfig, tiny_corpus: list[Utterance], tiny_dims: InputDims
    ) -> None:
        """Test that without adversarial training θ_D stays at its initial value."""
        config = tiny_config.with_updates({"train.ablation": "no_adversarial"})
        trainer = Trainer(config, tiny_corpus[:9], tiny_dims)
        state = trainer.init_state()
        before = _snapshot(state)
        state, row = trainer.train_step(state, trainer.schedule.batch(1))
        assert row.l_d is None and row.mean_d_on_inv is None
        assert row.l_g is not None
        assert not {n for n in _changed(before, state) if partition_of(n) == "D"}

    def test_no_discriminator_columns(
        self, tiny_config: RunConfig, tiny_corpus: list[Utterance], tiny_dims: InputDims
    ) -> None:
        """Test that removing the discriminator empties all adversarial columns."""
        config = tiny_config.with_updates({"train.ablation": "no_discriminator"})
        trainer = Trainer(config, tiny_corpus[:9], tiny_dims)
        _, row = trainer.train_step(trainer.init_state(), trainer.schedule.batch(1))
        assert row.l_d is None and row.l_g is None and row.grad_norm_d is None
        assert row.l_mim is not None

    def test_non_finite_parameter_diverges(self, trainer: Trainer) -> None:
        """Test that a NaN in the recognizer is reported with every loss component."""
        state = trainer.init_state()
        bias = state.params["rec.out.bias"]
        state.params.arrays["rec.out.bias"] = np.full_like(bias, np.nan)
        with pytest.raises(DivergenceError) as exc:
            trainer.train_step(state, trainer.schedule.batch(1))
        components = exc.value.components
        assert exc.value.step == 1
        assert {"L_rec", "L_D", "L_G", "L_MIM", "total_phaseB"} <= set(components)
        assert components["L_rec"] is not None and np.isnan(components["L_rec"])
        assert components["L_D"] is not None and np.isfinite(components["L_D"])
        assert components["L_G"] is not None and np.isfinite(components["L_G"])

    def test_divergence_leaves_state_unchanged(self, trainer: Trainer) -> None:
        """Test that a failed step rolls back the discriminator update of Phase A."""
        state = trainer.init_state()
        bias = state.params["rec.out.bias"]
        state.params.arrays["rec.out.bias"] = np.full_like(bias, np.nan)
        before = _snapshot(state)
        with pytest.raises(DivergenceError):
            trainer.train_step(state, trainer.schedule.batch(1))
        assert state.step == 0
        assert not {n for n in _changed(before, state) if partition_of(n) == "D"}
        assert all(state.adam.t[n] == 0 for n in state.params.names(("D",)))
        assert all(not state.adam.m[n].any() for n in state.params.names(("D",)))

    def test_divergence_without_finite_checks(self, trainer: Trainer) -> None:
        """Test that the loss check still reports all components when op checks are off."""
        state = trainer.init_state()
        bias = state.params["rec.out.bias"]
        state.params.arrays["rec.out.bias"] = np.full_like(bias, np.nan)
        with ops.finite_checks(False), pytest.raises(DivergenceError) as exc:
            trainer.train_step(state, trainer.schedule.batch(1))
        assert {"L_rec", "L_D", "L_G", "L_MIM"} <= set(exc.value.components)
        assert exc.value.cause == "phase B"

    def test_augmentation_is_deterministic(self, trainer: Trainer) -> None:
        """Test that noise for a step depends only on seed and step."""
        batch = trainer.schedule.batch(2)
        first = trainer.augment(batch, 2)
        second = trainer.augment(batch, 2)
        for a, b in zip(first, second, strict=True):
            np.testing.assert_array_equal(a.audio, b.audio)
