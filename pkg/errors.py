"""Shared error codes, user-facing messages and exception types."""

from __future__ import annotations

INVALID_PATTERN = "INVALID_PATTERN"
LENGTH_MISMATCH = "LENGTH_MISMATCH"
DUPLICATE_PATTERN = "DUPLICATE_PATTERN"
PARAMETER_OUT_OF_RANGE = "PARAMETER_OUT_OF_RANGE"
QUBIT_OUT_OF_RANGE = "QUBIT_OUT_OF_RANGE"
INVALID_GATE = "INVALID_GATE"
INVALID_CIRCUIT = "INVALID_CIRCUIT"
UNSUPPORTED_MEMORY = "UNSUPPORTED_MEMORY"
MALFORMED_DATA = "MALFORMED_DATA"
TOPOLOGY_VIOLATION = "TOPOLOGY_VIOLATION"
INVALID_MAPPING = "INVALID_MAPPING"
USAGE_ERROR = "USAGE_ERROR"

ERROR_MESSAGES = {
    INVALID_PATTERN: "Pattern must be a non-empty string of 0s and 1s.",
    LENGTH_MISMATCH: "Patterns must all have the same length.",
    DUPLICATE_PATTERN: "A memory circuit cannot store the same pattern twice.",
    PARAMETER_OUT_OF_RANGE: "Parameter is outside its allowed range.",
    QUBIT_OUT_OF_RANGE: "Qubit index is outside the circuit.",
    INVALID_GATE: "Gate is not valid for this operation.",
    INVALID_CIRCUIT: "Circuit layout is inconsistent.",
    UNSUPPORTED_MEMORY: "Memory shape is not supported by the reduced circuit.",
    MALFORMED_DATA: "Input data could not be parsed.",
    TOPOLOGY_VIOLATION: "Circuit does not fit the coupling graph.",
    INVALID_MAPPING: "Qubit mapping is not injective or references unknown qubits.",
    USAGE_ERROR: "Invalid command-line usage.",
}

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_TOPOLOGY = 3


class PqmError(ValueError):
    """Base error; ``code`` is one of the constants above."""

    code = INVALID_PATTERN

    def __init__(self, message: str = "", code: str | None = None) -> None:
        if code is not None:
            self.code = code
        super().__init__(message or ERROR_MESSAGES.get(self.code, self.code))


class PatternError(PqmError):
    code = INVALID_PATTERN


class ParameterError(PqmError):
    code = PARAMETER_OUT_OF_RANGE


class GateError(PqmError):
    code = INVALID_GATE


class CircuitError(PqmError):
    code = INVALID_CIRCUIT


class DataError(PqmError):
    code = MALFORMED_DATA


class TopologyError(PqmError):
    code = INVALID_MAPPING


class UsageError(PqmError):
    code = USAGE_ERROR


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, UsageError):
        return EXIT_USAGE
    if isinstance(exc, TopologyError) and exc.code == TOPOLOGY_VIOLATION:
        return EXIT_TOPOLOGY
    return EXIT_DATA
