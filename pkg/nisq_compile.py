"""Reduced retrieval circuits for small devices.

The classical input is folded into X gates on the memory register, which
drops the input register (2n + 1 -> n + 1 qubits). Passes here are pure:
each takes a Circuit and returns a new one.
"""

from __future__ import annotations

import json
import logging
import re
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from diagnostics import log_health
from errors import (
    INVALID_MAPPING,
    LENGTH_MISMATCH,
    TOPOLOGY_VIOLATION,
    UNSUPPORTED_MEMORY,
    CircuitError,
    DataError,
    GateError,
    TopologyError,
)
from models import (
    HARDWARE_BASIS,
    BitPattern,
    Circuit,
    CouplingGraph,
    GateKind,
    GateOp,
    MemoryContent,
    PqmParameter,
    ReducedCircuit,
    Register,
    TopologyIssue,
    TopologyReport,
)
from pqm_core import closed_form_p0, retrieve_exact
from quantum_sim import (
    CircuitBuilder,
    cnot,
    cphase,
    cu_pqm,
    h,
    make_rng,
    phase,
    prob_of_qubit,
    run_circuit,
    sample_counts,
    u_pqm,
    x,
)

log = logging.getLogger(__name__)

TENERIFE = CouplingGraph(
    num_qubits=5,
    edges=frozenset({(2, 0), (2, 1), (1, 0), (3, 2), (3, 4), (4, 2)}),
    name="tenerife",
)


# ----------------------------------------------------------------------
# Coupling graphs
# ----------------------------------------------------------------------


def star_graph(center: int, leaves: Sequence[int], num_qubits: int | None = None) -> CouplingGraph:
    """Center coupled to every leaf in both directions."""
    size = num_qubits if num_qubits is not None else max([center, *leaves]) + 1
    edges = frozenset((center, leaf) for leaf in leaves) | frozenset((leaf, center) for leaf in leaves)
    return CouplingGraph(num_qubits=size, edges=edges, name=f"star{len(leaves)}")


def load_coupling_graph(path: Path | str) -> CouplingGraph:
    """Read ``{"qubits": int, "edges": [[a, b], ...]}``; an optional ``name`` is kept."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        edges = frozenset((int(a), int(b)) for a, b in data["edges"])
        qubits = int(data["qubits"])
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read coupling graph {path}: {exc}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: coupling graph needs 'qubits' and 'edges' pairs") from exc
    return CouplingGraph(num_qubits=qubits, edges=edges, name=str(data.get("name", path.stem)))


def parse_mapping(text: str) -> tuple[int, ...]:
    """``"2,4,3"`` -> logical qubit i sits on physical qubit mapping[i]."""
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise TopologyError(f"mapping must be a comma list of integers, got {text!r}") from exc


# ----------------------------------------------------------------------
# Memory preparation and folding
# ----------------------------------------------------------------------


def prepare_memory_subcircuit(patterns: MemoryContent) -> Circuit:
    """Gates on m (with c idle) preparing one pattern or two patterns one bit apart."""
    n = patterns.n
    first = patterns.patterns[0]
    if patterns.p == 1:
        differing: list[int] = []
    elif patterns.p == 2:
        second = patterns.patterns[1]
        differing = [j for j in range(n) if first.bits[j] != second.bits[j]]
        if len(differing) != 1:
            raise CircuitError(
                f"patterns {first} and {second} differ in {len(differing)} bits; "
                "only one differing bit has a direct preparation, simulate the storage circuit instead",
                code=UNSUPPORTED_MEMORY,
            )
    else:
        raise CircuitError(
            f"{patterns.p} patterns have no direct preparation; simulate the storage circuit instead",
            code=UNSUPPORTED_MEMORY,
        )

    builder = CircuitBuilder([("m", n), ("c", 1)])
    reg_m = builder.reg("m")
    for j in range(n):
        if j in differing:
            builder.add(h(reg_m[j]))
        elif first.bits[j]:
            builder.add(x(reg_m[j]))
    return builder.build()


def decompose_to_basis(circuit: Circuit) -> Circuit:
    """Rewrite U_PQM and CU_PQM as X-conjugated phase gates."""
    ops: list[GateOp] = []
    for op in circuit.ops:
        if op.kind in HARDWARE_BASIS:
            ops.append(op)
        elif op.kind == GateKind.U_PQM:
            target = op.targets[0]
            ops += [x(target), phase(target, op.theta), x(target)]
        elif op.kind == GateKind.CU_PQM:
            target = op.targets[0]
            ops += [x(target), cphase(op.controls[0], target, op.theta), x(target)]
        else:
            raise GateError(f"{op.kind.value} has no decomposition into the hardware basis")
    return circuit.with_ops(ops)


def cancel_adjacent_x(circuit: Circuit) -> Circuit:
    """Drop X pairs on a qubit with nothing touching that qubit in between.

    Each qubit keeps a stack of the gates last seen on it; an X meeting an X
    on top of its stack removes both, which also exposes nested pairs.
    """
    removed: set[int] = set()
    stacks: dict[int, list[int]] = {}
    for index, op in enumerate(circuit.ops):
        if op.kind == GateKind.X:
            stack = stacks.setdefault(op.targets[0], [])
            if stack and circuit.ops[stack[-1]].kind == GateKind.X:
                removed.add(stack.pop())
                removed.add(index)
                continue
        for q in op.qubits:
            stacks.setdefault(q, []).append(index)
    if not removed:
        return circuit
    return circuit.with_ops([op for i, op in enumerate(circuit.ops) if i not in removed])


def fold_classical_input(
    n: int,
    input_pattern: BitPattern,
    memory_prep: Circuit,
    t: PqmParameter | float = 1.0,
    optimize: bool = True,
) -> ReducedCircuit:
    """Retrieval over m and c only, with the input applied as X gates.

    With ``optimize`` off, the decomposed circuit is returned before X
    cancellation.
    """
    if len(input_pattern) != n:
        raise CircuitError(f"input has {len(input_pattern)} bits, expected {n}", code=LENGTH_MISMATCH)
    if memory_prep.num_qubits not in (n, n + 1):
        raise CircuitError(
            f"memory preparation spans {memory_prep.num_qubits} qubits, expected {n}",
            code=LENGTH_MISMATCH,
        )
    if any(n in op.qubits for op in memory_prep.ops):
        raise CircuitError("memory preparation must not touch the control qubit")
    param = t if isinstance(t, PqmParameter) else PqmParameter(float(t))
    theta = param.angle(n)

    builder = CircuitBuilder([("m", n), ("c", 1)])
    reg_m = builder.reg("m")
    c = builder.reg("c")[0]
    builder.extend(memory_prep.ops)
    builder.add(h(c))
    for j in range(n):
        if input_pattern.bits[j]:
            builder.add(x(reg_m[j]))
        builder.add(x(reg_m[j]))
    builder.extend(u_pqm(reg_m[j], theta) for j in range(n))
    builder.extend(cu_pqm(c, reg_m[j], -2.0 * theta) for j in range(n))
    for j in reversed(range(n)):
        builder.add(x(reg_m[j]))
        if input_pattern.bits[j]:
            builder.add(x(reg_m[j]))
    builder.add(h(c))

    circuit = decompose_to_basis(builder.build(measured=(c,)))
    if optimize:
        before = len(circuit)
        circuit = cancel_adjacent_x(circuit)
        log.debug("X cancellation: %d -> %d gates", before, len(circuit))
    return ReducedCircuit(circuit=circuit, classical_input=input_pattern, t=param)


def compile_reduced(memory: MemoryContent, input_pattern: BitPattern, t: PqmParameter | float = 1.0) -> ReducedCircuit:
    return fold_classical_input(memory.n, input_pattern, prepare_memory_subcircuit(memory), t)


def reduced_p0(reduced: ReducedCircuit | Circuit) -> float:
    """Exact P(c=0) of a reduced circuit, or of the first measured qubit of any circuit."""
    circuit = reduced.circuit if isinstance(reduced, ReducedCircuit) else reduced
    if not circuit.measured:
        raise CircuitError("circuit measures no qubit")
    return prob_of_qubit(run_circuit(circuit), circuit.measured[0], 0)


# ----------------------------------------------------------------------
# Topology
# ----------------------------------------------------------------------


def _check_mapping(circuit: Circuit, graph: CouplingGraph, mapping: Sequence[int] | Mapping[int, int]) -> dict[int, int]:
    if isinstance(mapping, Mapping):
        table = {int(k): int(v) for k, v in mapping.items()}
    else:
        table = {i: int(p) for i, p in enumerate(mapping)}
    missing = [q for q in range(circuit.num_qubits) if q not in table]
    if missing:
        raise TopologyError(f"mapping leaves logical qubits {missing} unplaced", code=INVALID_MAPPING)
    physical = [table[q] for q in range(circuit.num_qubits)]
    if len(set(physical)) != len(physical):
        raise TopologyError(f"mapping {physical} is not injective", code=INVALID_MAPPING)
    unknown = [p for p in physical if not 0 <= p < graph.num_qubits]
    if unknown:
        raise TopologyError(
            f"physical qubits {unknown} are not in the {graph.num_qubits}-qubit graph", code=INVALID_MAPPING
        )
    return table


def check_topology(
    circuit: Circuit,
    graph: CouplingGraph,
    mapping: Sequence[int] | Mapping[int, int],
) -> TopologyReport:
    """Classify every two-qubit gate against the coupling graph.

    Undirected gates accept an edge in either direction. A CNOT over a
    reversed edge is an advisory: H on both qubits flips it without a swap.
    """
    table = _check_mapping(circuit, graph, mapping)
    violations: list[TopologyIssue] = []
    advisories: list[TopologyIssue] = []
    for index, op in enumerate(circuit.ops):
        qubits = op.qubits
        if len(qubits) < 2:
            continue
        if len(qubits) > 2:
            raise GateError(f"gate {index} ({op.kind.value}) acts on {len(qubits)} qubits; decompose first")
        a, b = qubits
        pa, pb = table[a], table[b]
        if graph.has_edge(pa, pb):
            continue
        if graph.has_edge(pb, pa):
            if op.kind == GateKind.CNOT:
                advisories.append(
                    TopologyIssue(
                        index, op.kind.value, (a, b), (pa, pb), "advisory",
                        f"cx Q{pa}->Q{pb} only exists as Q{pb}->Q{pa}; requires H-conjugation",
                    )
                )
            continue
        violations.append(
            TopologyIssue(
                index, op.kind.value, (a, b), (pa, pb), "violation",
                f"no coupling between Q{pa} and Q{pb}",
            )
        )
    return TopologyReport(violations=tuple(violations), advisories=tuple(advisories))


def validate_topology(
    circuit: Circuit,
    graph: CouplingGraph,
    mapping: Sequence[int] | Mapping[int, int],
) -> list[TopologyIssue]:
    return list(check_topology(circuit, graph, mapping).violations)


def require_placeable(report: TopologyReport) -> None:
    if report.violations:
        pairs = ", ".join(f"(Q{i.physical[0]},Q{i.physical[1]})" for i in report.violations)
        raise TopologyError(f"{len(report.violations)} gate(s) need missing couplings: {pairs}", code=TOPOLOGY_VIOLATION)


# ----------------------------------------------------------------------
# OpenQASM 2.0
# ----------------------------------------------------------------------


def _angle(theta: float) -> str:
    return format(theta, ".17g")


def emit_qasm(circuit: Circuit) -> str:
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{circuit.num_qubits}];"]
    if circuit.measured:
        lines.append(f"creg c[{len(circuit.measured)}];")
    for op in circuit.ops:
        if op.kind == GateKind.X:
            lines.append(f"x q[{op.targets[0]}];")
        elif op.kind == GateKind.H:
            lines.append(f"h q[{op.targets[0]}];")
        elif op.kind == GateKind.PHASE:
            lines.append(f"u1({_angle(op.theta)}) q[{op.targets[0]}];")
        elif op.kind == GateKind.CPHASE:
            lines.append(f"cu1({_angle(op.theta)}) q[{op.controls[0]}],q[{op.targets[0]}];")
        elif op.kind == GateKind.CNOT:
            lines.append(f"cx q[{op.controls[0]}],q[{op.targets[0]}];")
        else:
            raise GateError(f"{op.kind.value} is outside the hardware basis; decompose first")
    for bit, qubit in enumerate(circuit.measured):
        lines.append(f"measure q[{qubit}] -> c[{bit}];")
    return "\n".join(lines) + "\n"


_QREG = re.compile(r"^qreg\s+q\[(\d+)\];$")
_CREG = re.compile(r"^creg\s+c\[(\d+)\];$")
_ONE = re.compile(r"^(x|h)\s+q\[(\d+)\];$")
_PHASE = re.compile(r"^u1\(([^)]+)\)\s+q\[(\d+)\];$")
_CPHASE = re.compile(r"^cu1\(([^)]+)\)\s+q\[(\d+)\],\s*q\[(\d+)\];$")
_CX = re.compile(r"^cx\s+q\[(\d+)\],\s*q\[(\d+)\];$")
_MEASURE = re.compile(r"^measure\s+q\[(\d+)\]\s*->\s*c\[(\d+)\];$")


def circuit_from_qasm(text: str) -> Circuit:
    """Parse the subset written by ``emit_qasm``."""
    num_qubits: int | None = None
    ops: list[GateOp] = []
    measured: dict[int, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("//", 1)[0].strip()
        if not line or line.startswith("OPENQASM") or line.startswith("include") or _CREG.match(line):
            continue
        if m := _QREG.match(line):
            num_qubits = int(m.group(1))
        elif m := _ONE.match(line):
            ops.append(x(int(m.group(2))) if m.group(1) == "x" else h(int(m.group(2))))
        elif m := _PHASE.match(line):
            ops.append(phase(int(m.group(2)), float(m.group(1))))
        elif m := _CPHASE.match(line):
            ops.append(cphase(int(m.group(2)), int(m.group(3)), float(m.group(1))))
        elif m := _CX.match(line):
            ops.append(cnot(int(m.group(1)), int(m.group(2))))
        elif m := _MEASURE.match(line):
            measured[int(m.group(2))] = int(m.group(1))
        else:
            raise DataError(f"line {lineno}: unsupported statement {line!r}")
    if num_qubits is None:
        raise DataError("missing qreg declaration")
    return Circuit(
        num_qubits=num_qubits,
        registers=(Register("q", 0, num_qubits),),
        ops=tuple(ops),
        measured=tuple(measured[bit] for bit in sorted(measured)),
    )


# ----------------------------------------------------------------------
# Reference runs (input 0...0 against small memories)
# ----------------------------------------------------------------------

REFERENCE_CONFIGURATIONS: tuple[tuple[tuple[str, ...], float], ...] = (
    (("0",), 1.0),
    (("0", "1"), 0.5),
    (("1",), 0.0),
    (("00",), 1.0),
    (("00", "01"), 0.75),
    (("11",), 0.0),
    (("000",), 1.0),
    (("000", "010"), 0.875),
    (("000", "100"), 0.875),
    (("000", "001"), 0.875),
    (("110", "111"), 0.125),
    (("111",), 0.0),
    (("0000",), 1.0),
    (("0000", "0100"), 0.9268),
    (("1000",), 0.8535),
    (("0100", "1100"), 0.6768),
    (("1010",), 0.5),
    (("0110", "1110"), 0.3232),
    (("1110",), 0.1465),
    (("0111", "1111"), 0.0732),
    (("1111",), 0.0),
)


def reproduce_reference_table(shots: int, seed: int) -> dict[str, object]:
    """Exact, full-circuit, reduced-circuit and sampled P(c=0) for every reference row.

    Rows are sampled in order from one generator, so a seed fixes the whole table.
    """
    rng = make_rng(seed)
    rows: list[dict[str, object]] = []
    for patterns, published in REFERENCE_CONFIGURATIONS:
        memory = MemoryContent.from_strings(patterns)
        zeros = BitPattern(tuple([0] * memory.n))
        reduced = compile_reduced(memory, zeros)
        exact = closed_form_p0(memory, zeros)
        counts = sample_counts(reduced.circuit, reduced.circuit.measured, shots, rng)
        sampled = counts.get("0", 0) / shots
        rows.append(
            {
                "n": memory.n,
                "memory": "+".join(patterns),
                "published": published,
                "exact": exact,
                "full_circuit": retrieve_exact(memory, zeros).p0,
                "reduced_circuit": reduced_p0(reduced),
                "sampled": sampled,
                "abs_error": abs(sampled - exact),
            }
        )
    errors = np.array([row["abs_error"] for row in rows], dtype=float)
    mse = float(np.mean(errors**2))
    log_health(
        log,
        "table4_completed",
        rows=len(rows),
        shots=shots,
        seed=seed,
        mse=mse,
        max_abs_error=float(errors.max()),
    )
    return {"rows": rows, "mse": mse, "shots": shots, "seed": seed}


def _all_patterns(n: int) -> list[BitPattern]:
    return [BitPattern(tuple(int(b) for b in format(value, f"0{n}b"))) for value in range(1 << n)]


def sweep_reference_inputs(shots: int, seed: int) -> dict[str, object]:
    """Sampled vs exact P(c=0) for every input against every reference memory.

    Each row aggregates the 2^n inputs of one memory: the mean squared and
    mean absolute sampling error, plus the largest gap between the reduced
    circuit and the closed form. ``mean_abs_error_by_n`` averages over all
    (memory, input) pairs of one pattern size.
    """
    rng = make_rng(seed)
    rows: list[dict[str, object]] = []
    errors_by_n: dict[int, list[float]] = {}
    for patterns, _ in REFERENCE_CONFIGURATIONS:
        memory = MemoryContent.from_strings(patterns)
        errors: list[float] = []
        reduction_gap = 0.0
        for pattern in _all_patterns(memory.n):
            reduced = compile_reduced(memory, pattern)
            exact = closed_form_p0(memory, pattern)
            reduction_gap = max(reduction_gap, abs(reduced_p0(reduced) - exact))
            counts = sample_counts(reduced.circuit, reduced.circuit.measured, shots, rng)
            errors.append(abs(counts.get("0", 0) / shots - exact))
        errors_by_n.setdefault(memory.n, []).extend(errors)
        err = np.array(errors, dtype=float)
        rows.append(
            {
                "n": memory.n,
                "memory": "+".join(patterns),
                "inputs": len(errors),
                "mse": float(np.mean(err**2)),
                "mean_abs_error": float(np.mean(err)),
                "max_abs_error": float(err.max()),
                "reduction_gap": reduction_gap,
            }
        )
    by_n = {str(n): float(np.mean(values)) for n, values in sorted(errors_by_n.items())}
    log_health(
        log,
        "table4_completed",
        rows=len(rows),
        inputs="all",
        shots=shots,
        seed=seed,
        mse=float(np.mean([row["mse"] for row in rows])),
        max_abs_error=float(max(row["max_abs_error"] for row in rows)),
    )
    return {"rows": rows, "mean_abs_error_by_n": by_n, "shots": shots, "seed": seed}
