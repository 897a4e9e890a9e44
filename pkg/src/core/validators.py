from src.core.constants import ERR_POSITIVE


class ConfigValidators:
    """Encapsulates validation logic for configuration."""

    @staticmethod
    def validate_positive_int(v: int, name: str = "value") -> int:
        """Ensure an integer setting is >= 1."""
        if v < 1:
            raise ValueError(ERR_POSITIVE.format(name=name, value=v))
        return v

    @staticmethod
    def validate_tolerance(v: float) -> float:
        """Ensure a numeric tolerance is strictly positive and below 1."""
        if not (0.0 < v < 1.0):
            msg = f"Tolerance must lie in (0, 1), got {v}."
            raise ValueError(msg)
        return v

    @staticmethod
    def validate_log_level(v: str) -> str:
        """Normalise a logging level name."""
        level = v.strip().upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            msg = f"Unknown log level '{v}'."
            raise ValueError(msg)
        return level
