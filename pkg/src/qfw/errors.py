"""Framework error types with the wire protocol's fixed error code table.

Codes: 1 parse/validation, 2 resource, 3 unknown method, 4 backend failure,
5 invalid state.
"""

from __future__ import annotations


class QfwError(Exception):
    """Base class for errors that cross the service boundary."""

    code = 0

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class ValidationError(QfwError):
    """Malformed or inconsistent request content (wire code 1)."""

    code = 1


class ResourceError(QfwError):
    """Resource request that can never be satisfied (wire code 2)."""

    code = 2


class UnknownMethodError(QfwError):
    """Wire method outside the supported set (wire code 3)."""

    code = 3


class BackendError(QfwError):
    """Backend execution failure (wire code 4)."""

    code = 4


class InvalidStateError(QfwError):
    """Operation not legal for the handle's current state (wire code 5)."""

    code = 5
