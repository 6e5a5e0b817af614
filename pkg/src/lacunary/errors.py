"""Exception hierarchy shared by the library and the CLI.

Each class carries the process exit code the CLI maps it to.
"""


class LacunaryError(Exception):
    exit_code = 1

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details

    def to_dict(self):
        return {"error": type(self).__name__, "message": str(self), "details": self.details}


class InputError(LacunaryError, ValueError):
    """Malformed or out-of-domain input."""

    exit_code = 1


class UnsupportedOperationError(InputError):
    """Operation not defined for the group kind (e.g. inversion in N)."""


class WrongVariantError(InputError):
    """Solver variant does not match the data (e.g. 0/1 solver on weights)."""


class VerificationError(LacunaryError):
    exit_code = 2


class GuardError(LacunaryError):
    """A configured resource cap would be exceeded."""

    exit_code = 3


class NonConvergenceError(LacunaryError):
    exit_code = 4
