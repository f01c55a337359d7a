"""Core data models for the PQM toolkit."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, NamedTuple

import numpy as np

from errors import (
    DUPLICATE_PATTERN,
    LENGTH_MISMATCH,
    QUBIT_OUT_OF_RANGE,
    CircuitError,
    DataError,
    GateError,
    ParameterError,
    PatternError,
    TopologyError,
)


# ----------------------------------------------------------------------
# Circuits and states
# ----------------------------------------------------------------------

STATE_NORM_TOLERANCE = 1e-8


class GateKind(str, Enum):
    X = "X"
    H = "H"
    CNOT = "CNOT"
    TOFFOLI = "TOFFOLI"
    NXOR = "NXOR"
    PHASE = "PHASE"
    CPHASE = "CPHASE"
    U_PQM = "U_PQM"
    CU_PQM = "CU_PQM"
    CS = "CS"


HARDWARE_BASIS = frozenset(
    {GateKind.X, GateKind.H, GateKind.PHASE, GateKind.CPHASE, GateKind.CNOT}
)

# kind -> number of control qubits (None = one or more)
_CONTROL_ARITY: dict[GateKind, int | None] = {
    GateKind.X: 0,
    GateKind.H: 0,
    GateKind.PHASE: 0,
    GateKind.U_PQM: 0,
    GateKind.CNOT: 1,
    GateKind.CPHASE: 1,
    GateKind.CU_PQM: 1,
    GateKind.TOFFOLI: 2,
    GateKind.NXOR: None,
    GateKind.CS: 0,
}
_SELF_INVERSE = frozenset(
    {GateKind.X, GateKind.H, GateKind.CNOT, GateKind.TOFFOLI, GateKind.NXOR}
)


@dataclass(frozen=True)
class GateOp:
    """One gate application.

    Controlled kinds list their controls separately from the single target.
    ``CS`` takes the ordered pair ``(u1, u2)`` as targets; ``u1`` selects the
    subspace the rotation acts in and ``j`` is the rotation index.
    """

    kind: GateKind
    targets: tuple[int, ...]
    controls: tuple[int, ...] = ()
    theta: float = 0.0
    j: int = 0
    adjoint: bool = False

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.controls + self.targets

    @property
    def is_two_qubit(self) -> bool:
        return len(self.qubits) == 2

    def validate(self, num_qubits: int) -> None:
        expected_controls = _CONTROL_ARITY[self.kind]
        expected_targets = 2 if self.kind == GateKind.CS else 1
        if len(self.targets) != expected_targets:
            raise GateError(f"{self.kind.value} needs {expected_targets} target(s), got {self.targets}")
        if expected_controls is None:
            if not self.controls:
                raise GateError(f"{self.kind.value} needs at least one control")
        elif len(self.controls) != expected_controls:
            raise GateError(
                f"{self.kind.value} needs {expected_controls} control(s), got {self.controls}"
            )
        if self.kind == GateKind.CS and self.j < 1:
            raise GateError(f"CS(j) requires j >= 1, got {self.j}")
        qubits = self.qubits
        if len(set(qubits)) != len(qubits):
            raise GateError(f"{self.kind.value} uses repeated qubits {qubits}")
        for q in qubits:
            if not 0 <= q < num_qubits:
                raise GateError(
                    f"qubit {q} out of range for {num_qubits} qubits", code=QUBIT_OUT_OF_RANGE
                )

    def inverse(self) -> GateOp:
        if self.kind in _SELF_INVERSE:
            return self
        if self.kind == GateKind.CS:
            return GateOp(self.kind, self.targets, self.controls, j=self.j, adjoint=not self.adjoint)
        return GateOp(self.kind, self.targets, self.controls, theta=-self.theta)

    def label(self) -> str:
        if self.kind == GateKind.CS:
            return f"CS{'†' if self.adjoint else ''}({self.j}) {self.targets}"
        args = f"({self.theta:.6g})" if self.kind in _PARAMETRIC else ""
        return f"{self.kind.value}{args} c={self.controls} t={self.targets}"


_PARAMETRIC = frozenset({GateKind.PHASE, GateKind.CPHASE, GateKind.U_PQM, GateKind.CU_PQM})


@dataclass(frozen=True)
class Register:
    name: str
    start: int
    size: int

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(range(self.start, self.start + self.size))

    def __getitem__(self, k: int) -> int:
        if not 0 <= k < self.size:
            raise CircuitError(f"register {self.name} has no qubit {k}", code=QUBIT_OUT_OF_RANGE)
        return self.start + k


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    registers: tuple[Register, ...]
    ops: tuple[GateOp, ...] = ()
    measured: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.num_qubits < 1:
            raise CircuitError("circuit needs at least one qubit")
        names = [r.name for r in self.registers]
        if len(set(names)) != len(names):
            raise CircuitError(f"duplicate register names: {names}")
        covered: set[int] = set()
        for reg in self.registers:
            idx = set(reg.indices)
            if reg.size < 1 or reg.start < 0 or reg.start + reg.size > self.num_qubits:
                raise CircuitError(f"register {reg.name} does not fit {self.num_qubits} qubits")
            if covered & idx:
                raise CircuitError(f"register {reg.name} overlaps another register")
            covered |= idx
        for op in self.ops:
            op.validate(self.num_qubits)
        for q in self.measured:
            if not 0 <= q < self.num_qubits:
                raise CircuitError(f"measured qubit {q} out of range", code=QUBIT_OUT_OF_RANGE)

    def register(self, name: str) -> Register:
        for reg in self.registers:
            if reg.name == name:
                return reg
        raise CircuitError(f"no register named {name!r}")

    def has_register(self, name: str) -> bool:
        return any(r.name == name for r in self.registers)

    def with_ops(self, ops: list[GateOp] | tuple[GateOp, ...]) -> Circuit:
        return Circuit(self.num_qubits, self.registers, tuple(ops), self.measured)

    def gate_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for op in self.ops:
            counts[op.kind.value] = counts.get(op.kind.value, 0) + 1
        return counts

    def __len__(self) -> int:
        return len(self.ops)


@dataclass(frozen=True, eq=False)
class StateVector:
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        if self.amplitudes.shape != (1 << self.num_qubits,):
            raise CircuitError(
                f"state of {self.num_qubits} qubits needs {1 << self.num_qubits} amplitudes,"
                f" got shape {self.amplitudes.shape}"
            )
        norm = float(np.linalg.norm(self.amplitudes))
        if abs(norm - 1.0) > STATE_NORM_TOLERANCE:
            raise CircuitError(f"state is not normalised: norm {norm:.12g}")

    @classmethod
    def basis(cls, num_qubits: int, index: int = 0) -> StateVector:
        dim = 1 << num_qubits
        if not 0 <= index < dim:
            raise CircuitError(f"basis index {index} out of range for {num_qubits} qubits")
        amps = np.zeros(dim, dtype=np.complex128)
        amps[index] = 1.0
        return cls(num_qubits, amps)

    @classmethod
    def from_amplitudes(cls, amplitudes: Any) -> StateVector:
        amps = np.asarray(amplitudes, dtype=np.complex128).reshape(-1)
        num_qubits = int(amps.size).bit_length() - 1
        if amps.size < 2 or (1 << num_qubits) != amps.size:
            raise CircuitError(f"amplitude count {amps.size} is not a power of two")
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise CircuitError("cannot build a state from the zero vector")
        return cls(num_qubits, amps / norm)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def copy(self) -> StateVector:
        return StateVector(self.num_qubits, self.amplitudes.copy())


# ----------------------------------------------------------------------
# Patterns and memories
# ----------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class BitPattern:
    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.bits) < 1:
            raise PatternError("pattern must have at least one bit")
        if any(b not in (0, 1) for b in self.bits):
            raise PatternError(f"pattern bits must be 0 or 1, got {self.bits}")

    @classmethod
    def from_string(cls, text: str) -> BitPattern:
        cleaned = text.strip()
        if not cleaned or any(ch not in "01" for ch in cleaned):
            raise PatternError(f"not a bitstring: {text!r}")
        return cls(tuple(int(ch) for ch in cleaned))

    def __len__(self) -> int:
        return len(self.bits)

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)

    def as_int(self) -> int:
        value = 0
        for b in self.bits:
            value = (value << 1) | b
        return value


@dataclass(frozen=True)
class MemoryContent:
    """Stored patterns, in storage order.

    Repeats are allowed here; only the circuit builders reject them.
    """

    patterns: tuple[BitPattern, ...]

    def __post_init__(self) -> None:
        if not self.patterns:
            raise PatternError("memory needs at least one pattern")
        n = len(self.patterns[0])
        if any(len(p) != n for p in self.patterns):
            raise PatternError("stored patterns differ in length", code=LENGTH_MISMATCH)

    @classmethod
    def from_strings(cls, texts: list[str] | tuple[str, ...]) -> MemoryContent:
        return cls(tuple(BitPattern.from_string(t) for t in texts))

    @property
    def n(self) -> int:
        return len(self.patterns[0])

    @property
    def p(self) -> int:
        return len(self.patterns)

    @property
    def has_duplicates(self) -> bool:
        return len(set(self.patterns)) != len(self.patterns)

    def require_distinct(self) -> None:
        if self.has_duplicates:
            raise PatternError("memory contains repeated patterns", code=DUPLICATE_PATTERN)

    def deduplicated(self) -> MemoryContent:
        return MemoryContent(tuple(dict.fromkeys(self.patterns)))


@dataclass(frozen=True)
class PqmParameter:
    t: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 < self.t <= 1.0):
            raise ParameterError(f"t must satisfy 0 < t <= 1, got {self.t}")

    def angle(self, n: int) -> float:
        """Phase of the retrieval operator, pi / (2 n t)."""
        return math.pi / (2 * n * self.t)


@dataclass(frozen=True)
class RetrievalOutcome:
    p0: float
    p1: float
    per_pattern: tuple[tuple[BitPattern, float], ...] | None = None
    shots: int | None = None

    def __post_init__(self) -> None:
        if abs(self.p0 + self.p1 - 1.0) > 1e-9:
            raise ParameterError(f"p0 + p1 must be 1, got {self.p0} + {self.p1}")
        if self.per_pattern is not None and self.per_pattern:
            total = sum(prob for _, prob in self.per_pattern)
            if abs(total - 1.0) > 1e-9:
                raise ParameterError(f"post-selected distribution sums to {total}")

    def to_dict(self) -> dict[str, object]:
        payload: dict[str, object] = {"p0": self.p0, "p1": self.p1}
        if self.shots is not None:
            payload["shots"] = self.shots
        if self.per_pattern is not None:
            payload["per_pattern"] = {str(p): prob for p, prob in self.per_pattern}
        return payload


# ----------------------------------------------------------------------
# Classifier
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ClassMemory:
    label: str
    memory: MemoryContent
    t: PqmParameter = field(default_factory=PqmParameter)


@dataclass(frozen=True)
class PqmClassifier:
    classes: tuple[ClassMemory, ...]

    def __post_init__(self) -> None:
        if not self.classes:
            raise PatternError("classifier needs at least one class")
        labels = [c.label for c in self.classes]
        if len(set(labels)) != len(labels):
            raise PatternError(f"class labels must be unique: {labels}")
        n = self.classes[0].memory.n
        if any(c.memory.n != n for c in self.classes):
            raise PatternError("class memories differ in pattern length", code=LENGTH_MISMATCH)

    @property
    def n(self) -> int:
        return self.classes[0].memory.n

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(c.label for c in self.classes)

    def parameters(self) -> dict[str, float]:
        return {c.label: c.t.t for c in self.classes}

    def with_parameter(self, label: str, t: PqmParameter) -> PqmClassifier:
        return PqmClassifier(
            tuple(ClassMemory(c.label, c.memory, t) if c.label == label else c for c in self.classes)
        )


@dataclass(frozen=True)
class PredictionReport:
    per_class: tuple[tuple[str, float], ...]
    chosen: str


# ----------------------------------------------------------------------
# Datasets and evaluation
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class RawDataset:
    rows: tuple[tuple[tuple[str, ...], str], ...]
    attribute_names: tuple[str, ...]
    missing_marker: str = "?"

    def __post_init__(self) -> None:
        width = len(self.attribute_names)
        for i, (values, _) in enumerate(self.rows):
            if len(values) != width:
                raise DataError(f"row {i} has {len(values)} attributes, expected {width}")

    @property
    def num_attributes(self) -> int:
        return len(self.attribute_names)

    def column(self, j: int) -> list[str]:
        return [values[j] for values, _ in self.rows]

    def arities(self) -> list[int]:
        return [
            len({v for v in self.column(j) if v != self.missing_marker})
            for j in range(self.num_attributes)
        ]

    @property
    def labels(self) -> list[str]:
        return [label for _, label in self.rows]


@dataclass(frozen=True)
class AttributeEncoding:
    name: str
    values: tuple[str, ...]
    start: int

    @property
    def positions(self) -> tuple[int, ...]:
        return tuple(range(self.start, self.start + len(self.values)))


@dataclass(frozen=True)
class EncodedDataset:
    patterns: tuple[tuple[BitPattern, str], ...]
    encoding: tuple[AttributeEncoding, ...]

    def __post_init__(self) -> None:
        width = sum(len(a.values) for a in self.encoding)
        seen: list[int] = [p for a in self.encoding for p in a.positions]
        if sorted(seen) != list(range(width)):
            raise DataError("encoding map must cover every bit position exactly once")
        if any(len(p) != width for p, _ in self.patterns):
            raise DataError("encoded patterns differ from the encoding width", code=LENGTH_MISMATCH)

    @property
    def width(self) -> int:
        return sum(len(a.values) for a in self.encoding)

    @property
    def labels(self) -> list[str]:
        return [label for _, label in self.patterns]

    def subset(self, indices: tuple[int, ...] | list[int]) -> list[tuple[BitPattern, str]]:
        return [self.patterns[i] for i in indices]


@dataclass(frozen=True)
class FoldSpec:
    index: int
    train: tuple[int, ...]
    test: tuple[int, ...]


@dataclass(frozen=True)
class CVReport:
    dataset: str
    model: str
    per_fold: tuple[float, ...]
    mean: float
    std: float
    params: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_folds(
        cls,
        dataset: str,
        model: str,
        per_fold: list[float],
        params: dict[str, Any] | None = None,
    ) -> CVReport:
        arr = np.asarray(per_fold, dtype=float)
        return cls(
            dataset=dataset,
            model=model,
            per_fold=tuple(float(a) for a in per_fold),
            mean=float(arr.mean()) if arr.size else 0.0,
            std=float(arr.std()) if arr.size else 0.0,
            params=dict(params or {}),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "dataset": self.dataset,
            "model": self.model,
            "per_fold": list(self.per_fold),
            "mean": self.mean,
            "std": self.std,
            "params": self.params,
        }


# ----------------------------------------------------------------------
# Hardware targets
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class CouplingGraph:
    num_qubits: int
    edges: frozenset[tuple[int, int]]
    name: str = ""

    def __post_init__(self) -> None:
        for a, b in self.edges:
            if a == b:
                raise TopologyError(f"self-loop on qubit {a}")
            if not (0 <= a < self.num_qubits and 0 <= b < self.num_qubits):
                raise TopologyError(f"edge ({a}, {b}) references an unknown qubit")

    @property
    def symmetric_edges(self) -> frozenset[frozenset[int]]:
        return frozenset(frozenset(e) for e in self.edges)

    def has_edge(self, a: int, b: int) -> bool:
        return (a, b) in self.edges


@dataclass(frozen=True)
class ReducedCircuit:
    circuit: Circuit
    classical_input: BitPattern
    t: PqmParameter

    def __post_init__(self) -> None:
        n = len(self.classical_input)
        names = {r.name for r in self.circuit.registers}
        if names != {"m", "c"}:
            raise CircuitError(f"reduced circuit must hold only m and c registers, got {sorted(names)}")
        if self.circuit.num_qubits != n + 1:
            raise CircuitError(f"reduced circuit must use {n + 1} qubits")
        outside = sorted({op.kind.value for op in self.circuit.ops if op.kind not in HARDWARE_BASIS})
        if outside:
            raise CircuitError(f"reduced circuit uses gates outside the hardware basis: {outside}")

    @property
    def n(self) -> int:
        return len(self.classical_input)


@dataclass(frozen=True)
class TopologyIssue:
    gate_index: int
    kind: str
    logical: tuple[int, int]
    physical: tuple[int, int]
    severity: str
    message: str

    def to_dict(self) -> dict[str, object]:
        return {
            "gate_index": self.gate_index,
            "kind": self.kind,
            "logical": list(self.logical),
            "physical": list(self.physical),
            "severity": self.severity,
            "message": self.message,
        }


@dataclass(frozen=True)
class TopologyReport:
    violations: tuple[TopologyIssue, ...] = ()
    advisories: tuple[TopologyIssue, ...] = ()

    @property
    def placeable(self) -> bool:
        return not self.violations


# ----------------------------------------------------------------------
# CLI
# ----------------------------------------------------------------------


@dataclass
class RunConfig:
    command: str
    seed: int
    shots: int = 8192
    folds: int = 10
    grid: tuple[float, ...] = (1.0,)
    t: float = 1.0
    dataset: str | None = None
    memory: str | None = None
    input: str | None = None
    model: str | None = None
    coupling: str | None = None
    mapping: str | None = None
    out: str | None = None
    fmt: str = "json"
    extra: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        payload = {
            "command": self.command,
            "seed": self.seed,
            "shots": self.shots,
            "folds": self.folds,
            "grid": list(self.grid),
            "t": self.t,
            "dataset": self.dataset,
            "memory": self.memory,
            "input": self.input,
            "model": self.model,
            "coupling": self.coupling,
            "mapping": self.mapping,
            "out": self.out,
            "format": self.fmt,
        }
        payload.update(self.extra)
        return payload


@dataclass(frozen=True)
class CsvSchema:
    """How to read a categorical CSV: label column by index or header name."""

    label_column: int | str = -1
    header: bool = False
    missing_marker: str = "?"
    delimiter: str = ","


class WilcoxonResult(NamedTuple):
    statistic: float
    p_value: float
    reject: bool
