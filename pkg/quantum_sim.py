"""Dense state-vector simulation of the gate set used by PQM circuits.

Qubit 0 is the most significant bit of a basis index, so the amplitude
vector reshaped to ``[2] * num_qubits`` has qubit ``q`` on axis ``q``.
Every gate is a (possibly controlled) 2x2 action on one target axis and is
applied in place on strided views; no 2^q x 2^q matrix is ever built here.
"""

from __future__ import annotations

import logging
import math
from typing import Iterable

import numpy as np

from errors import CircuitError, GateError, ParameterError
from models import Circuit, GateKind, GateOp, Register, StateVector

log = logging.getLogger(__name__)

NORM_TOLERANCE = 1e-12

_SQRT_HALF = 1.0 / math.sqrt(2.0)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_H = np.array([[_SQRT_HALF, _SQRT_HALF], [_SQRT_HALF, -_SQRT_HALF]], dtype=np.complex128)


# ----------------------------------------------------------------------
# Gate constructors
# ----------------------------------------------------------------------


def x(q: int) -> GateOp:
    return GateOp(GateKind.X, (q,))


def h(q: int) -> GateOp:
    return GateOp(GateKind.H, (q,))


def cnot(control: int, target: int) -> GateOp:
    return GateOp(GateKind.CNOT, (target,), (control,))


def toffoli(c1: int, c2: int, target: int) -> GateOp:
    return GateOp(GateKind.TOFFOLI, (target,), (c1, c2))


def nxor(controls: Iterable[int], target: int) -> GateOp:
    return GateOp(GateKind.NXOR, (target,), tuple(controls))


def phase(q: int, theta: float) -> GateOp:
    return GateOp(GateKind.PHASE, (q,), theta=theta)


def cphase(control: int, target: int, theta: float) -> GateOp:
    return GateOp(GateKind.CPHASE, (target,), (control,), theta=theta)


def u_pqm(q: int, theta: float) -> GateOp:
    return GateOp(GateKind.U_PQM, (q,), theta=theta)


def cu_pqm(control: int, target: int, theta: float) -> GateOp:
    return GateOp(GateKind.CU_PQM, (target,), (control,), theta=theta)


def cs(u1: int, u2: int, j: int) -> GateOp:
    return GateOp(GateKind.CS, (u1, u2), j=j)


def inverse_ops(ops: Iterable[GateOp]) -> list[GateOp]:
    return [op.inverse() for op in reversed(list(ops))]


class CircuitBuilder:
    """Accumulates gates over named registers laid out contiguously."""

    def __init__(self, layout: Iterable[tuple[str, int]]) -> None:
        registers: list[Register] = []
        start = 0
        for name, size in layout:
            registers.append(Register(name, start, size))
            start += size
        self._registers = tuple(registers)
        self._num_qubits = start
        self._ops: list[GateOp] = []

    @property
    def num_qubits(self) -> int:
        return self._num_qubits

    def reg(self, name: str) -> Register:
        for reg in self._registers:
            if reg.name == name:
                return reg
        raise CircuitError(f"no register named {name!r}")

    def add(self, *ops: GateOp) -> CircuitBuilder:
        self._ops.extend(ops)
        return self

    def extend(self, ops: Iterable[GateOp]) -> CircuitBuilder:
        self._ops.extend(ops)
        return self

    def build(self, measured: Iterable[int] = ()) -> Circuit:
        return Circuit(self._num_qubits, self._registers, tuple(self._ops), tuple(measured))


# ----------------------------------------------------------------------
# Matrices
# ----------------------------------------------------------------------


def cs_rotation(j: int, adjoint: bool = False) -> np.ndarray:
    """Lower-right 2x2 block of CS^j (the u1 = 1 subspace)."""
    if j < 1:
        raise GateError(f"CS(j) requires j >= 1, got {j}")
    a = math.sqrt((j - 1) / j)
    b = 1.0 / math.sqrt(j)
    block = np.array([[a, b], [-b, a]], dtype=np.complex128)
    return block.conj().T if adjoint else block


def cs_matrix(j: int, adjoint: bool = False) -> np.ndarray:
    full = np.eye(4, dtype=np.complex128)
    full[2:, 2:] = cs_rotation(j, adjoint)
    return full


def target_matrix(gate: GateOp) -> np.ndarray:
    """The 2x2 action on the gate's target, applied when all controls are 1."""
    kind = gate.kind
    if kind in (GateKind.X, GateKind.CNOT, GateKind.TOFFOLI, GateKind.NXOR):
        return _X
    if kind == GateKind.H:
        return _H
    if kind in (GateKind.PHASE, GateKind.CPHASE):
        return np.diag([1.0, np.exp(1j * gate.theta)]).astype(np.complex128)
    if kind in (GateKind.U_PQM, GateKind.CU_PQM):
        return np.diag([np.exp(1j * gate.theta), 1.0]).astype(np.complex128)
    if kind == GateKind.CS:
        return cs_rotation(gate.j, gate.adjoint)
    raise GateError(f"unknown gate kind {kind}")


def _controls_and_target(gate: GateOp) -> tuple[tuple[int, ...], int]:
    if gate.kind == GateKind.CS:
        u1, u2 = gate.targets
        return (u1,), u2
    return gate.controls, gate.targets[0]


# ----------------------------------------------------------------------
# Kernels
# ----------------------------------------------------------------------


def _tensor_view(amplitudes: np.ndarray, num_qubits: int) -> np.ndarray:
    # trailing unit axis keeps fully indexed slices as views
    return amplitudes.reshape([2] * num_qubits + [1])


def _apply_inplace(tensor: np.ndarray, num_qubits: int, gate: GateOp) -> None:
    controls, target = _controls_and_target(gate)
    index: list[int | slice] = [slice(None)] * (num_qubits + 1)
    for c in controls:
        index[c] = 1
    index[target] = 0
    a0 = tensor[tuple(index)]
    index[target] = 1
    a1 = tensor[tuple(index)]

    kind = gate.kind
    if kind in (GateKind.X, GateKind.CNOT, GateKind.TOFFOLI, GateKind.NXOR):
        tmp = a0.copy()
        a0[...] = a1
        a1[...] = tmp
        return
    if kind in (GateKind.PHASE, GateKind.CPHASE):
        a1 *= np.exp(1j * gate.theta)
        return
    if kind in (GateKind.U_PQM, GateKind.CU_PQM):
        a0 *= np.exp(1j * gate.theta)
        return
    m = target_matrix(gate)
    new0 = m[0, 0] * a0 + m[0, 1] * a1
    new1 = m[1, 0] * a0 + m[1, 1] * a1
    a0[...] = new0
    a1[...] = new1


def apply_gate(state: StateVector, gate: GateOp) -> StateVector:
    gate.validate(state.num_qubits)
    amps = state.amplitudes.copy()
    _apply_inplace(_tensor_view(amps, state.num_qubits), state.num_qubits, gate)
    return StateVector(state.num_qubits, amps)


def run_circuit(circuit: Circuit, initial: int | StateVector = 0) -> StateVector:
    """Fold the circuit's gates over a basis state or a prepared state."""
    if isinstance(initial, StateVector):
        if initial.num_qubits != circuit.num_qubits:
            raise CircuitError(
                f"initial state has {initial.num_qubits} qubits, circuit has {circuit.num_qubits}"
            )
        amps = initial.amplitudes.copy()
    else:
        amps = StateVector.basis(circuit.num_qubits, initial).amplitudes
    tensor = _tensor_view(amps, circuit.num_qubits)
    for op in circuit.ops:
        _apply_inplace(tensor, circuit.num_qubits, op)
    result = StateVector(circuit.num_qubits, amps)
    drift = abs(result.norm() - 1.0)
    if drift > NORM_TOLERANCE * max(1, len(circuit.ops)):
        log.warning("norm drift %.3e after %d gates", drift, len(circuit.ops))
    return result


# ----------------------------------------------------------------------
# Measurement
# ----------------------------------------------------------------------


def make_rng(seed: int | np.random.Generator) -> np.random.Generator:
    """PCG64 generator; histograms are reproducible for a fixed seed."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def _check_qubit(state: StateVector, qubit: int) -> None:
    if not 0 <= qubit < state.num_qubits:
        raise GateError(f"qubit {qubit} out of range for {state.num_qubits} qubits")


def prob_of_qubit(state: StateVector, qubit: int, value: int) -> float:
    _check_qubit(state, qubit)
    if value not in (0, 1):
        raise GateError(f"measurement value must be 0 or 1, got {value}")
    view = state.amplitudes.reshape(1 << qubit, 2, -1)
    return float(np.sum(np.abs(view[:, value, :]) ** 2))


def marginal_distribution(state: StateVector, qubits: Iterable[int]) -> np.ndarray:
    """Probabilities over the listed qubits, first listed qubit most significant."""
    qubits = list(qubits)
    if not qubits:
        raise CircuitError("no qubits to marginalize onto")
    for q in qubits:
        _check_qubit(state, q)
    probs = state.probabilities().reshape([2] * state.num_qubits)
    others = tuple(q for q in range(state.num_qubits) if q not in qubits)
    reduced = probs.sum(axis=others) if others else probs
    # remaining axes are in ascending qubit order; reorder to the requested order
    kept = sorted(qubits)
    reduced = np.transpose(reduced, [kept.index(q) for q in qubits])
    return reduced.reshape(-1)


def measure_and_collapse(
    state: StateVector,
    qubit: int,
    rng_seed: int | np.random.Generator,
) -> tuple[int, StateVector]:
    _check_qubit(state, qubit)
    rng = make_rng(rng_seed)
    p0 = prob_of_qubit(state, qubit, 0)
    bit = 0 if rng.random() < p0 else 1
    prob = p0 if bit == 0 else 1.0 - p0
    assert prob > 0.0, "sampled an outcome of probability zero"
    amps = state.amplitudes.copy()
    view = amps.reshape(1 << qubit, 2, -1)
    view[:, 1 - bit, :] = 0.0
    amps /= math.sqrt(prob)
    return bit, StateVector(state.num_qubits, amps)


def sample_state(
    state: StateVector,
    measured_qubits: Iterable[int],
    shots: int,
    rng_seed: int | np.random.Generator,
) -> dict[str, int]:
    measured = list(measured_qubits)
    if not measured:
        raise CircuitError("measured_qubits must not be empty")
    if shots < 1:
        raise ParameterError(f"shots must be >= 1, got {shots}")
    probs = marginal_distribution(state, measured)
    probs = probs / probs.sum()
    counts = make_rng(rng_seed).multinomial(shots, probs)
    width = len(measured)
    return {
        format(i, f"0{width}b"): int(c)
        for i, c in enumerate(counts)
        if c > 0
    }


def sample_counts(
    circuit: Circuit,
    measured_qubits: Iterable[int],
    shots: int,
    rng_seed: int | np.random.Generator,
    initial: int | StateVector = 0,
) -> dict[str, int]:
    """Histogram of measured bitstrings; keys list qubits in the given order."""
    measured = list(measured_qubits)
    if not measured:
        raise CircuitError("measured_qubits must not be empty")
    state = run_circuit(circuit, initial)
    return sample_state(state, measured, shots, rng_seed)
