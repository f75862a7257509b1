"""Unit tests for the gradient-check suite."""

import pytest

from src.exceptions import UsageError
from src.services.gradcheck_suite import (
    OP_SHAPES,
    build_cases,
    run_cases,
    run_gradcheck,
)


class TestBuildCases:
    """Tests for case construction."""

    def test_ops_cover_every_primitive(self) -> None:
        """Test that each primitive is checked on every shape variant."""
        names = [c.name for c in build_cases("ops")]
        ops_checked = {name.split("[")[0] for name in names}
        assert {"matmul", "layer_norm", "cosine_rows", "cross_entropy"} <= ops_checked
        assert "multi_head_attention" in ops_checked
        assert len(OP_SHAPES) >= 5
        for op in ops_checked:
            assert [n for n in names if n.split("[")[0] == op] == [
                f"{op}[{i}]" for i in range(len(OP_SHAPES))
            ]

    def test_ops_include_edge_shapes(self) -> None:
        """Test single-row and single-column inputs among the variants."""
        cases = {c.name: c for c in build_cases("ops")}
        shapes = {cases[f"matmul[{i}]"].inputs[0].shape for i in range(len(OP_SHAPES))}
        assert any(rows == 1 for rows, _ in shapes)
        assert any(cols == 1 for _, cols in shapes)

    def test_module_names(self) -> None:
        """Test that each network module has a check."""
        names = {c.name for c in build_cases("modules")}
        assert {"encode", "generate", "loss_d", "loss_g", "mim_loss", "recognize"} <= names

    def test_unknown_scope(self) -> None:
        """Test that an unknown scope is a usage error."""
        with pytest.raises(UsageError):
            build_cases("everything")  # type: ignore[arg-type]


class TestRunGradcheck:
    """Tests for running checks."""

    def test_ops_pass(self) -> None:
        """Test that every primitive's gradient matches finite differences."""
        report = run_gradcheck("ops")
        assert report.passed, report.table()

    def test_zero_tolerance_fails(self) -> None:
        """Test that an impossible tolerance marks checks as failed."""
        report = run_cases(build_cases("ops")[:2], tolerance=0.0)
        assert not report.passed
        assert "FAIL" in report.table()

    @pytest.mark.slow
    def test_modules_pass(self) -> None:
        """Test the module scope."""
        report = run_gradcheck("modules")
        assert report.passed, report.table()

    @pytest.mark.slow
    def test_full_objective_passes(self) -> None:
        """Test the sampled checks of the complete objectives."""
        report = run_gradcheck("full")
        assert report.passed, report.table()
