"""Metrics rows and command reports."""

from __future__ import annotations

import logging
import math
from typing import Any

from pydantic import BaseModel, Field, model_validator

logger = logging.getLogger(__name__)

# Lower bound of L_G, reached when the discriminator outputs 0.5 everywhere.
L_G_MIN = 2.0 * math.log(2.0)
# Float32 losses can land a few ulps below the bound.
L_G_SLACK = 1e-5

# Column order of metrics.csv.
METRICS_COLUMNS: tuple[str, ...] = (
    "step",
    "L_rec",
    "L_D",
    "L_G",
    "L_MIM",
    "total_phaseB",
    "mean_D_on_inv",
    "mean_D_on_audio",
    "mean_D_on_visual",
    "grad_norm_D",
    "grad_norm_rest",
    "val_TER_clean",
    "val_TER_noisy",
)


class MetricsRow(BaseModel):
    """One training step's losses and discriminator statistics.

    Columns that do not apply to the active ablation mode are None and are
    written as empty CSV cells. Validation TERs are set on eval steps only.
    """

    step: int = Field(ge=1)
    l_rec: float
    l_d: float | None = None
    l_g: float | None = None
    l_mim: float | None = None
    total_phase_b: float
    mean_d_on_inv: float | None = None
    mean_d_on_audio: float | None = None
    mean_d_on_visual: float | None = None
    grad_norm_d: float | None = None
    grad_norm_rest: float
    val_ter_clean: float | None = None
    val_ter_noisy: float | None = None

    @model_validator(mode="after")
    def _check_adversarial_bounds(self) -> MetricsRow:
        """Warn when a row breaks D ∈ (0, 1) or L_G ≥ 2 ln 2."""
        for name in ("mean_d_on_inv", "mean_d_on_audio", "mean_d_on_visual"):
            value = getattr(self, name)
            if value is not None and not 0.0 < value < 1.0:
                logger.warning("step %d: %s=%r is outside (0, 1)", self.step, name, value)
        if self.l_g is not None and self.l_g < L_G_MIN - L_G_SLACK:
            logger.warning("step %d: L_G=%r is below 2 ln 2", self.step, self.l_g)
        return self

    def csv_values(self) -> list[int | float | None]:
        """Values in METRICS_COLUMNS order."""
        return [
            self.step,
            self.l_rec,
            self.l_d,
            self.l_g,
            self.l_mim,
            self.total_phase_b,
            self.mean_d_on_inv,
            self.mean_d_on_audio,
            self.mean_d_on_visual,
            self.grad_norm_d,
            self.grad_norm_rest,
            self.val_ter_clean,
            self.val_ter_noisy,
        ]


class EvalReport(BaseModel):
    """Token error rates of one evaluation.

    Attributes:
        modality: Input modality used.
        noise_type: Noise used for the SNR levels.
        clean_ter: TER without added noise.
        per_snr: TER per SNR level, keyed by the level formatted as a string.
        noisy: Mean of the per-level TERs, None for a clean-only evaluation.
        frames: Frames scored per condition.
        utterances: Utterances scored per condition.
    """

    modality: str
    noise_type: str
    clean_ter: float
    per_snr: dict[str, float] = Field(default_factory=dict)
    noisy: float | None = None
    frames: int
    utterances: int
    checkpoint_step: int | None = None


class GradcheckResult(BaseModel):
    scope: str
    name: str
    max_rel_error: float
    coordinates: int
    passed: bool


class GradcheckReport(BaseModel):
    """Results of a gradient-check suite run."""

    tolerance: float
    results: list[GradcheckResult]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def failures(self) -> list[GradcheckResult]:
        return [r for r in self.results if not r.passed]

    def table(self) -> str:
        """Fixed-width pass/fail table."""
        width = max([len(r.name) for r in self.results] + [4])
        lines = [f"{'scope':<8} {'name':<{width}} {'max_rel_err':>12}  status"]
        for r in self.results:
            status = "PASS" if r.passed else "FAIL"
            lines.append(f"{r.scope:<8} {r.name:<{width}} {r.max_rel_error:>12.3e}  {status}")
        total = len(self.results)
        lines.append(f"{total - len(self.failures())}/{total} checks passed")
        return "\n".join(lines)


class AblationSummaryRow(BaseModel):
    """Aggregated TERs of one ablation mode over seeds."""

    mode: str
    baseline: bool
    seeds: int
    clean_ter_mean: float
    clean_ter_std: float
    noisy_ter_mean: float | None
    noisy_ter_std: float | None


class RepresentationStats(BaseModel):
    """Discriminator output statistics for one representation type."""

    representation: str
    mean: float
    std: float
    histogram: list[int]


class DiagnosticsSummary(BaseModel):
    """Scalar summary of a diagnose run."""

    diag_score_visual: float
    diag_score_audio: float
    discriminator: list[RepresentationStats]
    discriminator_accuracy: float | None = None
    mean_mask_visual: float | None = None
    mean_mask_audio: float | None = None
    utterances: int
    frames: int


class ErrorReport(BaseModel):
    """Failure payload written by the command line."""

    error: str
    code: str
    context: dict[str, Any] = Field(default_factory=dict)

    @classmethod
    def from_exception(cls, exc: Exception, code: str) -> ErrorReport:
        context = getattr(exc, "context", None)
        payload = context() if callable(context) else {}
        return cls(error=str(exc), code=code, context=_json_safe(payload))


def _json_safe(value: Any) -> Any:
    """Replace non-finite floats (not representable in JSON) with strings."""
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [_json_safe(v) for v in value]
    return value
