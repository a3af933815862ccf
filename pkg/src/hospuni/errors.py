"""Exception types shared across the package.

Every error carries a short machine-readable ``code`` so the CLI and the
HTTP service can report failures uniformly.
"""

from __future__ import annotations


class HospuniError(Exception):
    """Base class for all domain errors."""

    code = "error"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class DuplicateOrgError(HospuniError):
    code = "duplicate-id"


class EmptyCanonicalNameError(HospuniError):
    code = "empty-canonical-name"


class UnknownOrgError(HospuniError):
    code = "unknown-org"


class ComponentCycleError(HospuniError):
    code = "component-cycle"


class InvalidWindowError(HospuniError):
    code = "invalid-window"


class MalformedRecordError(HospuniError):
    """A line in an input file failed validation.

    ``line`` is 1-based and refers to the offending line in ``path`` when
    known.
    """

    code = "malformed-record"

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f" ({path}" + (f":{line}" if line is not None else "") + ")"
        super().__init__(message + where)
        self.path = path
        self.line = line


class FormatVersionError(MalformedRecordError):
    code = "format-version"


class ChecksumMismatchError(HospuniError):
    code = "checksum-mismatch"


class EmptyUnitError(HospuniError):
    code = "empty-unit"


class UnknownPublicationError(HospuniError):
    code = "unknown-publication-id"


class InvalidEvidenceError(HospuniError):
    """An evidence value or dossier state violates a dossier invariant."""

    code = "invalid-evidence"


class WorkflowStateError(HospuniError):
    """An operation was attempted in a state that does not allow it."""

    code = "workflow-state"


class VersionConflictError(HospuniError):
    """Optimistic concurrency check failed: someone else wrote first."""

    code = "version-conflict"

    def __init__(self, message: str, expected: int, actual: int):
        super().__init__(message)
        self.expected = expected
        self.actual = actual
