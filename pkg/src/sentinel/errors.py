"""Exception hierarchy. Every error carries a stable ``code`` string."""

from __future__ import annotations


class SentinelError(Exception):
    code = "SENTINEL_ERROR"

    def __init__(self, message: str = "", **details):
        self.details = details
        super().__init__(message or self.code)

    def __str__(self) -> str:
        msg = super().__str__()
        return f"{self.code}: {msg}" if msg != self.code else msg


class CorpusError(SentinelError):
    code = "CORPUS_ERROR"


class MalformedCase(CorpusError):
    code = "MALFORMED_CASE"

    def __init__(self, case_id: str, field: str, reason: str):
        self.case_id = case_id
        self.field = field
        self.reason = reason
        super().__init__(f"{case_id}: field {field!r}: {reason}")


class DuplicateId(CorpusError):
    code = "DUPLICATE_ID"


class UnknownId(CorpusError):
    code = "UNKNOWN_ID"


class WrongKind(SentinelError):
    code = "WRONG_KIND"


class BackendError(SentinelError):
    code = "BACKEND_ERROR"


class BackendUnreachable(BackendError):
    code = "BACKEND_UNREACHABLE"


class AuthFailed(BackendError):
    code = "AUTH_FAILED"


class BackendTimeout(BackendError):
    code = "TIMEOUT"


class MalformedBackendReply(BackendError):
    code = "MALFORMED_BACKEND_REPLY"


class MissingRateCard(SentinelError):
    code = "MISSING_RATE_CARD"


class CheckerError(SentinelError):
    code = "CHECKER_ERROR"


class CheckerNotFound(CheckerError):
    code = "CHECKER_NOT_FOUND"


class WorkspaceIOError(CheckerError):
    code = "WORKSPACE_IO_ERROR"


class CheckerTimeout(CheckerError):
    code = "CHECKER_TIMEOUT"


class RenameCollision(SentinelError):
    code = "RENAME_COLLISION"


class UnlexableSource(SentinelError):
    code = "UNLEXABLE_SOURCE"


class MetricsError(SentinelError):
    code = "METRICS_ERROR"


class KOutOfRange(MetricsError):
    code = "K_OUT_OF_RANGE"


class PendingOutcomes(MetricsError):
    code = "PENDING_OUTCOMES"


class DuplicateTemperature(MetricsError):
    code = "DUPLICATE_TEMPERATURE"


class ReviewError(SentinelError):
    code = "REVIEW_ERROR"


class UnknownTriple(ReviewError):
    code = "UNKNOWN_TRIPLE"


class AlreadyAdjudicated(ReviewError):
    code = "ALREADY_ADJUDICATED"


class ConfigError(SentinelError):
    code = "CONFIG_ERROR"
