"""Unit tests for core exceptions."""

import pytest

from core.exceptions import (
    ClappSystemError,
    ConfigError,
    DimensionError,
    HistoryError,
    InputError,
    ModeError,
    ModeValidationError,
    NumericError,
    ToleranceBreachError,
)


class TestExceptionHierarchy:
    """Test cases for the toolkit exception hierarchy."""

    @pytest.mark.parametrize(
        "error_class",
        [DimensionError, InputError, HistoryError, NumericError, ModeError],
    )
    def test_subclasses_share_base(self, error_class):
        """Every toolkit error can be caught as ClappSystemError."""
        with pytest.raises(ClappSystemError):
            raise error_class("boom")

    def test_mode_validation_error_is_mode_error(self):
        """ModeValidationError inherits from ModeError."""
        error = ModeValidationError("bad mode")
        assert isinstance(error, ModeError)
        assert str(error) == "bad mode"

    def test_config_error_carries_field_path(self):
        """ConfigError prefixes its message with the field path."""
        error = ConfigError("must be greater than 0", "hyper.eta")
        assert error.field_path == "hyper.eta"
        assert str(error) == "hyper.eta: must be greater than 0"

    def test_config_error_without_field_path(self):
        """ConfigError without a path keeps the plain message."""
        error = ConfigError("not valid JSON")
        assert error.field_path is None
        assert str(error) == "not valid JSON"

    def test_tolerance_breach_lists_rules(self):
        """ToleranceBreachError keeps the failing rule names."""
        error = ToleranceBreachError("tolerance exceeded", ("predicted_layer", "cpc"))
        assert error.rules == ["predicted_layer", "cpc"]
        assert isinstance(error, ClappSystemError)
