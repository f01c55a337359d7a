"""Probabilistic quantum memory: storage and retrieval circuits, closed form.

Register layouts (qubit 0 first):
    storage    |p>_n |u1 u2> |m>_n     2n + 2 qubits
    retrieval  |i>_n |m>_n |c>         2n + 1 qubits
"""

from __future__ import annotations

import logging
import math
from pathlib import Path

import numpy as np

from errors import LENGTH_MISMATCH, CircuitError, DataError, PatternError
from models import (
    BitPattern,
    Circuit,
    MemoryContent,
    PqmParameter,
    RetrievalOutcome,
    StateVector,
)
from quantum_sim import (
    CircuitBuilder,
    cnot,
    cs,
    cu_pqm,
    h,
    inverse_ops,
    nxor,
    prob_of_qubit,
    run_circuit,
    sample_state,
    toffoli,
    u_pqm,
    x,
)

log = logging.getLogger(__name__)

# below this P(c=0) the post-selected memory distribution is left undefined
POST_SELECTION_FLOOR = 1e-12


def _as_parameter(t: PqmParameter | float) -> PqmParameter:
    return t if isinstance(t, PqmParameter) else PqmParameter(float(t))


def _check_lengths(memory: MemoryContent, pattern: BitPattern) -> None:
    if len(pattern) != memory.n:
        raise PatternError(
            f"input has {len(pattern)} bits, memory holds {memory.n}-bit patterns",
            code=LENGTH_MISMATCH,
        )


def hamming(a: BitPattern, b: BitPattern) -> int:
    if len(a) != len(b):
        raise PatternError(f"cannot compare {len(a)}-bit and {len(b)}-bit patterns", code=LENGTH_MISMATCH)
    return sum(1 for x_bit, y_bit in zip(a.bits, b.bits) if x_bit != y_bit)


def load_memory_file(path: Path | str) -> MemoryContent:
    """Read one bitstring per line; ``#`` starts a comment."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: not valid UTF-8 (byte {exc.start})") from exc
    patterns: list[BitPattern] = []
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            pattern = BitPattern.from_string(line)
        except PatternError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
        if patterns and len(pattern) != len(patterns[0]):
            raise DataError(
                f"{path}:{lineno}: pattern has {len(pattern)} bits, expected {len(patterns[0])}",
                code=LENGTH_MISMATCH,
            )
        patterns.append(pattern)
    if not patterns:
        raise DataError(f"{path}: no patterns found")
    return MemoryContent(tuple(patterns))


# ----------------------------------------------------------------------
# Storage
# ----------------------------------------------------------------------


def storage_initial_index(n: int) -> int:
    """Basis index of |0...0; 01; 0...0>, the storage starting state."""
    return 1 << n


def build_storage_circuit(memory: MemoryContent) -> Circuit:
    memory.require_distinct()
    n, p = memory.n, memory.p
    builder = CircuitBuilder([("p", n), ("u", 2), ("m", n)])
    reg_p, reg_u, reg_m = builder.reg("p"), builder.reg("u"), builder.reg("m")
    u1, u2 = reg_u[0], reg_u[1]

    for i, pattern in enumerate(memory.patterns, start=1):
        load = [x(reg_p[j]) for j, bit in enumerate(pattern.bits) if bit]
        copy_flagged = [toffoli(reg_p[j], u2, reg_m[j]) for j in range(n)]
        mark_equal: list = []
        for j in range(n):
            mark_equal += [cnot(reg_p[j], reg_m[j]), x(reg_m[j])]
        flag = [nxor(reg_m.indices, u1)]

        builder.extend(load)
        builder.extend(copy_flagged)
        builder.extend(mark_equal)
        builder.extend(flag)
        builder.add(cs(u1, u2, p + 1 - i))
        builder.extend(inverse_ops(flag))
        builder.extend(inverse_ops(mark_equal))
        builder.extend(inverse_ops(copy_flagged))
        builder.extend(load)

    circuit = builder.build()
    log.debug("storage circuit: n=%d p=%d qubits=%d gates=%d", n, p, circuit.num_qubits, len(circuit))
    return circuit


def _run_storage(memory: MemoryContent) -> tuple[np.ndarray, int, int]:
    n = memory.n
    state = run_circuit(build_storage_circuit(memory), storage_initial_index(n))
    blocks = state.amplitudes.reshape(1 << n, 4, 1 << n)
    weights = np.sum(np.abs(blocks) ** 2, axis=2)
    p_value, u_value = np.unravel_index(int(np.argmax(weights)), weights.shape)
    if weights[p_value, u_value] < 1.0 - 1e-9:
        raise CircuitError("auxiliary registers did not return to a basis state")
    return blocks[p_value, u_value, :].copy(), int(p_value), int(u_value)


def storage_auxiliary_state(memory: MemoryContent) -> tuple[str, str]:
    """Basis values of the p and u registers after the storage circuit.

    Every stored branch passes through CS with u = |11>, lands in |10> and is
    unflagged by the second nXOR, so u ends as |00> (p is unloaded to 0).
    """
    _, p_value, u_value = _run_storage(memory)
    return format(p_value, f"0{memory.n}b"), format(u_value, "02b")


def prepare_memory_state(memory: MemoryContent, use_storage_circuit: bool = False) -> np.ndarray:
    """Amplitudes of the m register holding the uniform superposition of patterns."""
    memory.require_distinct()
    if use_storage_circuit:
        amps, _, _ = _run_storage(memory)
        return amps
    amps = np.zeros(1 << memory.n, dtype=np.complex128)
    weight = 1.0 / math.sqrt(memory.p)
    for pattern in memory.patterns:
        amps[pattern.as_int()] = weight
    return amps


# ----------------------------------------------------------------------
# Retrieval
# ----------------------------------------------------------------------


def build_retrieval_circuit(n: int, input_pattern: BitPattern, t: PqmParameter | float = 1.0) -> Circuit:
    if len(input_pattern) != n:
        raise PatternError(f"input has {len(input_pattern)} bits, expected {n}", code=LENGTH_MISMATCH)
    param = _as_parameter(t)
    theta = param.angle(n)
    builder = CircuitBuilder([("i", n), ("m", n), ("c", 1)])
    reg_i, reg_m = builder.reg("i"), builder.reg("m")
    c = builder.reg("c")[0]

    builder.extend(x(reg_i[j]) for j, bit in enumerate(input_pattern.bits) if bit)
    builder.add(h(c))
    mark_equal: list = []
    for j in range(n):
        mark_equal += [cnot(reg_i[j], reg_m[j]), x(reg_m[j])]
    builder.extend(mark_equal)
    builder.extend(u_pqm(reg_m[j], theta) for j in range(n))
    # U'^-2 controlled by c as a single controlled phase
    builder.extend(cu_pqm(c, reg_m[j], -2.0 * theta) for j in range(n))
    builder.extend(inverse_ops(mark_equal))
    builder.add(h(c))
    return builder.build(measured=(c,))


def _retrieval_state(
    memory: MemoryContent,
    input_pattern: BitPattern,
    param: PqmParameter,
    use_storage_circuit: bool,
) -> tuple[Circuit, StateVector]:
    _check_lengths(memory, input_pattern)
    n = memory.n
    circuit = build_retrieval_circuit(n, input_pattern, param)
    memory_amps = prepare_memory_state(memory, use_storage_circuit)
    amps = np.zeros(1 << circuit.num_qubits, dtype=np.complex128)
    # i starts at 0 (loaded by the circuit), c starts at 0
    amps[np.arange(1 << n) << 1] = memory_amps
    return circuit, run_circuit(circuit, StateVector(circuit.num_qubits, amps))


def retrieve_exact(
    memory: MemoryContent,
    input_pattern: BitPattern,
    t: PqmParameter | float = 1.0,
    use_storage_circuit: bool = False,
) -> RetrievalOutcome:
    param = _as_parameter(t)
    circuit, state = _retrieval_state(memory, input_pattern, param, use_storage_circuit)
    c = circuit.register("c")[0]
    p0 = prob_of_qubit(state, c, 0)
    p1 = prob_of_qubit(state, c, 1)
    total = p0 + p1
    p0, p1 = p0 / total, p1 / total

    per_pattern = None
    if p0 > POST_SELECTION_FLOOR:
        n = memory.n
        branch = state.amplitudes.reshape(1 << n, 1 << n, 2)[:, :, 0]
        m_probs = np.sum(np.abs(branch) ** 2, axis=0)
        weights = [float(m_probs[pattern.as_int()]) for pattern in memory.patterns]
        norm = sum(weights)
        per_pattern = tuple((pattern, w / norm) for pattern, w in zip(memory.patterns, weights))
    return RetrievalOutcome(p0=p0, p1=p1, per_pattern=per_pattern)


def retrieve_sampled(
    memory: MemoryContent,
    input_pattern: BitPattern,
    t: PqmParameter | float,
    shots: int,
    seed: int,
) -> RetrievalOutcome:
    param = _as_parameter(t)
    circuit, state = _retrieval_state(memory, input_pattern, param, False)
    counts = sample_state(state, circuit.measured, shots, seed)
    zeros = counts.get("0", 0)
    return RetrievalOutcome(p0=zeros / shots, p1=(shots - zeros) / shots, shots=shots)


def closed_form_p0(
    memory: MemoryContent,
    input_pattern: BitPattern,
    t: PqmParameter | float = 1.0,
) -> float:
    _check_lengths(memory, input_pattern)
    theta = _as_parameter(t).angle(memory.n)
    distances = np.array([hamming(input_pattern, p) for p in memory.patterns], dtype=float)
    return float(np.mean(np.cos(theta * distances) ** 2))


def closed_form_p1(
    memory: MemoryContent,
    input_pattern: BitPattern,
    t: PqmParameter | float = 1.0,
) -> float:
    _check_lengths(memory, input_pattern)
    theta = _as_parameter(t).angle(memory.n)
    distances = np.array([hamming(input_pattern, p) for p in memory.patterns], dtype=float)
    return float(np.mean(np.sin(theta * distances) ** 2))
