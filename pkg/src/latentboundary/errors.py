"""Exception types shared across the attack engine and harness."""

from __future__ import annotations


class ContractViolation(ValueError):
    """A caller broke a documented precondition (bad dims, bad bounds, ...)."""


class DimensionMismatch(ContractViolation):
    """Two vectors that must share a dimension do not."""


class BudgetExhausted(Exception):
    """The classify budget ran out.

    Normal termination for an attack run; callers outside the engine must
    surface it instead of crashing. ``best`` optionally carries the
    best-so-far iterate at the moment the budget ran out.
    """

    def __init__(self, message: str = "classify budget exhausted", best=None):
        super().__init__(message)
        self.best = best


class InvalidEndpoints(ContractViolation):
    """Binary search needs one adversarial and one non-adversarial endpoint."""


class StepSearchFailed(Exception):
    """No step in the allotted halvings kept the iterate adversarial."""


class EncodingInvalid(Exception):
    """The encoded target latent does not generate into the target class."""


class SuiteConstructionFailed(Exception):
    """Could not build a well-separated synthetic suite within the retry cap."""


class TargetNotFound(KeyError):
    """The target bank holds no entry for the requested label."""


class OracleUnreachable(ConnectionError):
    """Remote oracle endpoint could not be reached."""


class ProtocolError(Exception):
    """Malformed or out-of-contract frame on the oracle wire protocol."""

    def __init__(self, message: str, byte_offset: int | None = None):
        if byte_offset is not None:
            message = f"{message} (at byte offset {byte_offset})"
        super().__init__(message)
        self.byte_offset = byte_offset
