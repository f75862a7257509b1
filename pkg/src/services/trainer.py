"""Two-phase adversarial training loop.

Every step first updates only the discriminator, ascending L_GAN with all
other parameters held as constants (Phase A). A fresh forward pass then
descends L_rec + λ_GAN·L_G + λ_MIM·L_MIM on everything except the
discriminator; θ_D is bound as constants, so gradients still flow through it
into the generator (Phase B).

All randomness of a step (batch choice, noise augmentation, dropout) is derived
from (seed, step), which makes runs reproducible and resumable from a
checkpoint without iterator state.
"""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from src.autodiff import ops
from src.autodiff.tensor import Array, Tape, Tensor
from src.exceptions import DivergenceError, InputError, MirGanError, NonFiniteError
from src.models.corpus import Utterance
from src.models.metrics import MetricsRow
from src.models.run_config import NoiseType, RunConfig
from src.services.checkpoint import BestRecord, TrainState, save_checkpoint
from src.services.evaluation import evaluate
from src.services.network.adversary import discriminate, loss_d, loss_g
from src.services.network.mim import MimConfig, mim_batch_loss
from src.services.network.model import Representations, forward, utterance_inputs
from src.services.network.params import (
    InputDims,
    ModelParams,
    ParamView,
    check_compatible,
    init_params,
)
from src.services.network.pipeline import Pipeline, pipeline_for
from src.services.optimizer import Adam, AdamState, LinearWarmupDecay, clip_global_norm
from src.services.synthdata import corrupt
from src.utils.csv_io import MetricsWriter
from src.utils.run_logger import get_run_logger

logger = logging.getLogger(__name__)

# Stream tags under (seed, step).
_AUGMENT, _DROPOUT_A, _DROPOUT_B = 0, 1, 2
_EPOCH_TAG = 3

CHECKPOINT_DIR = "checkpoints"
FINAL_CHECKPOINT = "checkpoint.mirc"
METRICS_FILE = "metrics.csv"

DIVERGENCE_COMPONENTS = ("L_rec", "L_D", "L_G", "L_MIM", "total_phaseB")

# Parameter, Adam m, Adam v and update count per discriminator parameter.
_Snapshot = dict[str, tuple[Array, Array, Array, int]]


def checkpoint_name(step: int) -> str:
    return f"step_{step:06d}.mirc"


class BatchSchedule:
    """Batches as a pure function of (seed, step).

    Each epoch shuffles the training set with a stream derived from
    (seed, epoch), sorts pools of `pool_batches` batches by length so batches
    hold similar T, and shuffles the batch order.
    """

    def __init__(
        self, utterances: list[Utterance], batch_size: int, pool_batches: int, seed: int
    ) -> None:
        if not utterances:
            raise InputError("training set is empty")
        self.utterances = utterances
        self.batch_size = batch_size
        self.pool_size = batch_size * pool_batches
        self.seed = seed
        n = len(utterances)
        full, rest = divmod(n, self.pool_size)
        self.batches_per_epoch = full * pool_batches + math.ceil(rest / batch_size)
        self._cached: tuple[int, list[list[int]]] | None = None

    def _epoch(self, epoch: int) -> list[list[int]]:
        if self._cached is not None and self._cached[0] == epoch:
            return self._cached[1]
        rng = np.random.default_rng([self.seed, _EPOCH_TAG, epoch])
        order = [int(i) for i in rng.permutation(len(self.utterances))]
        batches: list[list[int]] = []
        for start in range(0, len(order), self.pool_size):
            pool = sorted(
                order[start : start + self.pool_size],
                key=lambda i: (self.utterances[i].frames, i),
            )
            batches.extend(
                pool[j : j + self.batch_size] for j in range(0, len(pool), self.batch_size)
            )
        shuffled = [batches[int(i)] for i in rng.permutation(len(batches))]
        self._cached = (epoch, shuffled)
        return shuffled

    def batch(self, step: int) -> list[Utterance]:
        """Utterances of a 1-based step."""
        epoch, index = divmod(step - 1, self.batches_per_epoch)
        return [self.utterances[i] for i in self._epoch(epoch)[index]]


@dataclass
class PhaseAResult:
    l_gan: float
    grad_norm: float
    mean_d_on_inv: float
    mean_d_on_audio: float
    mean_d_on_visual: float


@dataclass
class PhaseBResult:
    l_rec: float
    l_g: float | None
    l_mim: float | None
    total: float
    grad_norm: float


def _value(t: Tensor) -> float:
    return float(t.item())


class Trainer:
    """Runs training steps for one configuration and corpus split."""

    def __init__(
        self,
        config: RunConfig,
        train_set: list[Utterance],
        dims: InputDims,
        val_set: list[Utterance] | None = None,
        run_id: str = "train",
    ) -> None:
        """Initialize the trainer.

        Args:
            config: Run configuration.
            train_set: Training utterances.
            dims: Corpus widths and vocabulary size.
            val_set: Held-out utterances evaluated every eval_interval steps.
            run_id: Identifier used in run-log events.
        """
        self.config = config
        self.train_cfg = config.train
        self.pipeline: Pipeline = pipeline_for(config.train)
        self.dims = dims
        self.train_set = train_set
        self.val_set = val_set or []
        self.run_id = run_id
        self.dtype = np.dtype(config.train.precision)
        self.mim_cfg = MimConfig(temperature=config.train.temperature)
        self.adam = Adam(config.train.adam_beta1, config.train.adam_beta2, config.train.adam_eps)
        self.lr = LinearWarmupDecay(
            config.train.learning_rate, config.train.warmup_steps, config.train.total_steps
        )
        self.schedule = BatchSchedule(
            train_set, config.train.batch_size, config.train.bucket_pool, config.train.seed
        )
        self.audio_pool = (
            [u.audio for u in train_set] if config.train.noise_type is NoiseType.BABBLE else []
        )

    def init_state(self) -> TrainState:
        params = init_params(
            self.config.model, self.dims, self.pipeline, self.train_cfg.seed, self.dtype
        )
        return TrainState(
            step=0,
            params=params,
            adam=AdamState.zeros_like(params),
            config=self.config,
            dims=self.dims,
        )

    def check_resumable(self, state: TrainState) -> None:
        """Raise DimensionError if the state's parameters do not fit this trainer."""
        fresh = init_params(self.config.model, self.dims, self.pipeline, 0, self.dtype)
        check_compatible(state.params, fresh)

    def _rng(self, step: int, tag: int) -> np.random.Generator:
        return np.random.default_rng([self.train_cfg.seed, step, tag])

    def _dropout_rng(self, step: int, tag: int) -> np.random.Generator | None:
        return self._rng(step, tag) if self.config.model.dropout > 0 else None

    def augment(self, batch: list[Utterance], step: int) -> list[Utterance]:
        """Noise each utterance's audio with probability noise_prob at the training SNR."""
        if self.train_cfg.noise_prob <= 0:
            return batch
        rng = self._rng(step, _AUGMENT)
        out = []
        for u in batch:
            if rng.random() < self.train_cfg.noise_prob:
                u = corrupt(
                    u, self.train_cfg.train_snr_db, self.train_cfg.noise_type, rng, self.audio_pool
                )
            out.append(u)
        return out

    def _forward_batch(
        self,
        view_params: ModelParams,
        tape: Tape,
        trainable: tuple[str, ...],
        batch: list[Utterance],
        rng: np.random.Generator | None,
        with_recognizer: bool,
    ) -> tuple[list[Representations], ParamView]:
        view = view_params.bind(tape, trainable)
        reps = []
        for u in batch:
            x_v, x_a = utterance_inputs(u, self.dtype)
            reps.append(
                forward(
                    view,
                    self.config.model,
                    self.pipeline,
                    self.train_cfg.modality,
                    x_v,
                    x_a,
                    rng,
                    with_recognizer,
                )
            )
        return reps, view

    def _discriminator_means(
        self, params: ModelParams, reps: list[Representations]
    ) -> tuple[float, float, float]:
        view = params.bind(None)
        cfg = self.config.model

        def mean_prob(arrays: list[np.ndarray]) -> float:
            probs, _ = discriminate(view, cfg, Tensor(np.concatenate(arrays, axis=0)))
            return float(np.mean(probs.data, dtype=np.float64))

        return (
            mean_prob([r.inv.data for r in reps if r.inv is not None]),
            mean_prob([r.a_spe.data for r in reps]),
            mean_prob([r.v_spe.data for r in reps]),
        )

    def phase_a(self, state: TrainState, batch: list[Utterance], step: int) -> PhaseAResult:
        """Discriminator ascent on L_GAN; only θ_D changes."""
        cfg = self.config.model
        with Tape() as tape:
            reps, view = self._forward_batch(
                state.params, tape, ("D",), batch, self._dropout_rng(step, _DROPOUT_A), False
            )
            assert all(r.inv is not None for r in reps)
            l_gan = loss_d(
                view,
                cfg,
                [r.a_spe for r in reps],
                [r.v_spe for r in reps],
                [r.inv for r in reps],  # type: ignore[misc]
            )
            grads = tape.grads_by_name(tape.backward(ops.negate(l_gan)))
        value = _value(l_gan)
        if not math.isfinite(value):
            raise DivergenceError(step, {"L_D": value}, "phase A")
        means = self._discriminator_means(state.params, reps)
        clipped, norm = clip_global_norm(grads, self.train_cfg.grad_clip)
        self.adam.step(state.params, state.adam, clipped, self.lr(step))
        return PhaseAResult(value, norm, *means)

    def _phase_b_losses(
        self, view: ParamView, reps: list[Representations], batch: list[Utterance]
    ) -> tuple[Tensor, dict[str, float | None]]:
        """Phase B objective and its components as floats."""
        cfg = self.config.model
        pipe = self.pipeline
        components: dict[str, float | None] = {}
        logits = ops.concat_rows([r.logits for r in reps])  # type: ignore[misc]
        labels = np.concatenate([u.labels for u in batch])
        l_rec = ops.cross_entropy(logits, labels)
        components["L_rec"] = _value(l_rec)
        total = l_rec

        if pipe.use_discriminator:
            l_g = loss_g(view, cfg, [r.inv for r in reps])  # type: ignore[arg-type, misc]
            components["L_G"] = _value(l_g)
            if pipe.lambda_gan > 0:
                total = ops.add(total, ops.scale(l_g, pipe.lambda_gan))

        if pipe.use_mim:
            l_mim = mim_batch_loss(
                [r.inv for r in reps],  # type: ignore[misc]
                [r.v_spe for r in reps],
                [r.a_spe for r in reps],
                self.mim_cfg,
            )
            components["L_MIM"] = _value(l_mim)
            if pipe.lambda_mim > 0:
                total = ops.add(total, ops.scale(l_mim, pipe.lambda_mim))

        components["total_phaseB"] = _value(total)
        return total, components

    def phase_b(self, state: TrainState, batch: list[Utterance], step: int) -> PhaseBResult:
        """Descent on L_rec + λ_GAN·L_G + λ_MIM·L_MIM over θ∖θ_D."""
        trainable = tuple(p for p in self.pipeline.partitions if p != "D")
        with Tape() as tape:
            reps, view = self._forward_batch(
                state.params, tape, trainable, batch, self._dropout_rng(step, _DROPOUT_B), True
            )
            total, components = self._phase_b_losses(view, reps, batch)
            if not all(v is None or math.isfinite(v) for v in components.values()):
                raise DivergenceError(step, components, "phase B")
            grads = tape.grads_by_name(tape.backward(total))

        clipped, norm = clip_global_norm(grads, self.train_cfg.grad_clip)
        self.adam.step(state.params, state.adam, clipped, self.lr(step))
        return PhaseBResult(
            l_rec=components["L_rec"] or 0.0,
            l_g=components.get("L_G"),
            l_mim=components.get("L_MIM"),
            total=_value(total),
            grad_norm=norm,
        )

    def loss_components(
        self, state: TrainState, batch: list[Utterance], step: int
    ) -> dict[str, float | None]:
        """Every loss of a step evaluated with finite checks off.

        Used for divergence reports: values that are NaN or Inf are reported
        as such instead of stopping at the first op that produced them.
        Components the ablation mode does not compute, or that cannot be
        evaluated at all, are None.
        """
        components: dict[str, float | None] = dict.fromkeys(DIVERGENCE_COMPONENTS)
        cfg = self.config.model
        with np.errstate(all="ignore"), ops.finite_checks(False):
            try:
                reps, view = self._forward_batch(
                    state.params, Tape(), (), batch, self._dropout_rng(step, _DROPOUT_B), True
                )
                if self.pipeline.adversarial:
                    components["L_D"] = _value(
                        loss_d(
                            view,
                            cfg,
                            [r.a_spe for r in reps],
                            [r.v_spe for r in reps],
                            [r.inv for r in reps],  # type: ignore[misc]
                        )
                    )
                components.update(self._phase_b_losses(view, reps, batch)[1])
            except MirGanError as e:
                logger.warning("step %d: loss components incomplete: %s", step, e)
        return components

    def _discriminator_snapshot(self, state: TrainState) -> _Snapshot:
        # Adam replaces arrays instead of writing into them, so references suffice.
        adam = state.adam
        return {
            n: (state.params.arrays[n], adam.m[n], adam.v[n], adam.t[n])
            for n in state.params.names(("D",))
        }

    @staticmethod
    def _restore(state: TrainState, snapshot: _Snapshot) -> None:
        for name, (param, m, v, t) in snapshot.items():
            state.params.arrays[name] = param
            state.adam.m[name] = m
            state.adam.v[name] = v
            state.adam.t[name] = t

    def train_step(
        self, state: TrainState, batch: list[Utterance]
    ) -> tuple[TrainState, MetricsRow]:
        """One two-phase update.

        Args:
            state: Current state; updated in place (parameter arrays are replaced).
            batch: Utterances of this step, before augmentation.

        Returns:
            (state, metrics row of the step).

        Raises:
            DivergenceError: If any loss or activation becomes non-finite. The
                error carries every loss component of the failed step and the
                state is left as it was before the step.
        """
        step = state.step + 1
        batch = self.augment(batch, step)
        snapshot = self._discriminator_snapshot(state)
        phase_a: PhaseAResult | None = None
        try:
            if self.pipeline.adversarial:
                phase_a = self.phase_a(state, batch, step)
            phase_b = self.phase_b(state, batch, step)
        except (NonFiniteError, DivergenceError) as e:
            components = self.loss_components(state, batch, step)
            if phase_a is not None:
                components["L_D"] = phase_a.l_gan
            self._restore(state, snapshot)
            cause = f"non-finite output of {e.op}" if isinstance(e, NonFiniteError) else e.cause
            raise DivergenceError(step, components, cause) from e

        state.step = step
        row = MetricsRow(
            step=step,
            l_rec=phase_b.l_rec,
            l_d=phase_a.l_gan if phase_a else None,
            l_g=phase_b.l_g,
            l_mim=phase_b.l_mim,
            total_phase_b=phase_b.total,
            mean_d_on_inv=phase_a.mean_d_on_inv if phase_a else None,
            mean_d_on_audio=phase_a.mean_d_on_audio if phase_a else None,
            mean_d_on_visual=phase_a.mean_d_on_visual if phase_a else None,
            grad_norm_d=phase_a.grad_norm if phase_a else None,
            grad_norm_rest=phase_b.grad_norm,
        )
        return state, row

    def _evaluate(self, state: TrainState, row: MetricsRow) -> MetricsRow:
        report = evaluate(state.params, self.config, self.val_set)
        if state.best_val is None or report.clean_ter < state.best_val.ter_clean:
            state.best_val = BestRecord(
                step=state.step, ter_clean=report.clean_ter, ter_noisy=report.noisy
            )
        get_run_logger().log_event(
            self.run_id,
            "eval",
            step=state.step,
            clean_ter=report.clean_ter,
            noisy_ter=report.noisy,
        )
        return row.model_copy(
            update={"val_ter_clean": report.clean_ter, "val_ter_noisy": report.noisy}
        )

    def fit(
        self,
        state: TrainState,
        out_dir: Path | None = None,
        until: int | None = None,
        on_row: Callable[[MetricsRow], None] | None = None,
    ) -> TrainState:
        """Train from state.step up to `until` (default total_steps).

        Writes metrics.csv (one row per step), evaluates the validation split
        every eval_interval steps and writes checkpoints every
        checkpoint_interval steps and at the last step.

        Args:
            state: Starting state (fresh or resumed).
            out_dir: Output directory; None keeps everything in memory.
            until: Last step to run.
            on_row: Callback receiving each metrics row.

        Returns:
            Final state.
        """
        cfg = self.train_cfg
        last = until if until is not None else cfg.total_steps
        writer = None
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            writer = MetricsWriter(out_dir / METRICS_FILE, state.step if state.step > 0 else None)
        run_log = get_run_logger()
        run_log.log_event(self.run_id, "fit_start", from_step=state.step, until=last)

        for step in range(state.step + 1, last + 1):
            state, row = self.train_step(state, self.schedule.batch(step))
            if self.val_set and cfg.eval_interval and step % cfg.eval_interval == 0:
                row = self._evaluate(state, row)
            if writer is not None:
                writer.append(row)
            if on_row is not None:
                on_row(row)
            logger.debug("step %d: L_rec=%.4f total=%.4f", step, row.l_rec, row.total_phase_b)

            if out_dir is not None and (
                (cfg.checkpoint_interval and step % cfg.checkpoint_interval == 0) or step == last
            ):
                path = save_checkpoint(state, out_dir / CHECKPOINT_DIR / checkpoint_name(step))
                run_log.log_event(self.run_id, "checkpoint", step=step, path=str(path))

        if out_dir is not None and state.step > 0:
            save_checkpoint(state, out_dir / FINAL_CHECKPOINT)
        best = state.best_val.model_dump() if state.best_val else None
        run_log.log_event(self.run_id, "fit_end", step=state.step, best_val=best)
        return state
