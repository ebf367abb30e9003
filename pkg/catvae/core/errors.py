class CatVAEError(Exception):
    """Base error. Carries a human-readable detail and the CLI exit code."""

    exit_code: int = 2

    def __init__(self, detail: str, exit_code: int | None = None) -> None:
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code


class ConfigError(CatVAEError):
    exit_code = 1


class DataError(CatVAEError):
    exit_code = 2


class StateError(CatVAEError):
    exit_code = 2


class PersistenceError(CatVAEError):
    exit_code = 2


class NumericError(CatVAEError):
    exit_code = 3


class NonFiniteLossError(NumericError):
    def __init__(self, term: str, value: float, epoch: int, step: int) -> None:
        super().__init__(
            f"Non-finite loss in term '{term}' (value={value}) at epoch {epoch}, step {step}"
        )
        self.term = term
