class HalluspanError(Exception):
    """Base class for all package errors."""


class RecordParseError(HalluspanError):
    def __init__(self, message: str, byte_offset: int):
        self.message = message
        self.byte_offset = byte_offset
        super().__init__(f"{message} (at byte {byte_offset})")


class SpanValidationError(HalluspanError, ValueError):
    def __init__(self, field: str, index: int, detail: str):
        self.field = field
        self.index = index
        self.detail = detail
        super().__init__(f"{field}[{index}]: {detail}")


class ConfigError(HalluspanError, ValueError):
    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ScoringError(HalluspanError):
    """Embedding provider failure while scoring a window."""

    def __init__(self, message: str, window=None):
        self.window = window
        super().__init__(message)


class ProviderError(HalluspanError):
    pass


class SamplerError(HalluspanError):
    def __init__(self, message: str, missing_indices: tuple[int, ...] = ()):
        self.missing_indices = tuple(missing_indices)
        super().__init__(message)


class MissingSamplesError(HalluspanError):
    def __init__(self, record_ids):
        self.record_ids = list(record_ids)
        super().__init__("no samples for record(s): " + ", ".join(map(str, self.record_ids)))


class MetricError(HalluspanError, ValueError):
    def __init__(self, record_id, detail: str):
        self.record_id = record_id
        super().__init__(f"record {record_id}: {detail}")


class TuningError(HalluspanError):
    pass
