"""Exception types shared across the phx packages."""


class PhxError(Exception):
    """Base class for all phx errors."""


class ValidationFailed(PhxError):
    """An entity failed its invariant checks.

    Carries the list of violations so callers can surface every broken
    rule at once instead of the first one found.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        detail = "; ".join(f"{v.field}: {v.rule}" for v in self.violations)
        super().__init__(f"validation failed: {detail}")


class IllegalTransition(PhxError):
    """Requested status change is not on the pending -> running -> finished path."""


class InvalidTrace(PhxError, ValueError):
    """Power trace construction rejected (ordering, duplicates or bad values)."""


class InvalidName(PhxError, ValueError):
    """Database or collection name violates the naming convention."""


class StorageUnavailable(PhxError):
    """The persistence backend cannot be reached or written."""


class UnknownCollection(PhxError, KeyError):
    """Append or query targeted a collection that was never provisioned."""


class EmptyLog(PhxError):
    """No records were available where at least one is required."""


class EmptyWindow(PhxError):
    """A measurement window would be degenerate (t_start == t_end)."""


class MissingCopyIndex(PhxError):
    """Copy-index attributes required for the warm-up split are absent."""


class NoMeasurements(PhxError):
    """An evaluation has no power samples to integrate."""


class DegenerateSpread(PhxError):
    """A statistic that divides by a spread (IQR, variance) got zero spread."""


class SingularDesign(PhxError):
    """Regression design matrix is singular (constant predictor)."""


class MissingTruth(PhxError):
    """A prediction references an artifact absent from the ground-truth map."""


class LaunchFailed(PhxError):
    """An application could not be started by the runtime backend."""

    def __init__(self, app_id, reason=""):
        self.app_id = app_id
        super().__init__(f"launch failed for {app_id!r}: {reason}" if reason else f"launch failed for {app_id!r}")


class JobFailed(PhxError):
    """A job application exited nonzero."""

    def __init__(self, app_id, exit_status):
        self.app_id = app_id
        self.exit_status = exit_status
        super().__init__(f"job {app_id!r} exited with status {exit_status}")


class CoolingTimeout(PhxError):
    """A device did not fall below its cooling threshold in time."""


class ApiError(PhxError):
    """An HTTP endpoint answered with a 4xx/5xx status."""

    def __init__(self, status_code, payload=None):
        self.status_code = status_code
        self.payload = payload or {}
        message = self.payload.get("error") if isinstance(self.payload, dict) else None
        super().__init__(f"HTTP {status_code}: {message or self.payload}")


class TransportError(PhxError):
    """The backend could not be reached at all (connection refused, DNS, ...)."""
