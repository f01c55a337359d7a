from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from errors import INVALID_MAPPING, TOPOLOGY_VIOLATION, UNSUPPORTED_MEMORY, CircuitError, DataError, GateError, TopologyError
from models import BitPattern, GateKind, MemoryContent, StateVector
from nisq_compile import (
    REFERENCE_CONFIGURATIONS,
    TENERIFE,
    cancel_adjacent_x,
    check_topology,
    circuit_from_qasm,
    compile_reduced,
    decompose_to_basis,
    emit_qasm,
    fold_classical_input,
    load_coupling_graph,
    parse_mapping,
    prepare_memory_subcircuit,
    reduced_p0,
    reproduce_reference_table,
    require_placeable,
    star_graph,
    sweep_reference_inputs,
    validate_topology,
)
from pqm_core import closed_form_p0, retrieve_exact
from quantum_sim import CircuitBuilder, apply_gate, cnot, cu_pqm, h, run_circuit, toffoli, u_pqm, x

GOLDEN_CASES = {
    "n1_0": ("0",),
    "n1_0_1": ("0", "1"),
    "n1_1": ("1",),
    "n2_00": ("00",),
    "n2_00_01": ("00", "01"),
    "n2_11": ("11",),
}


def _zeros(n: int) -> BitPattern:
    return BitPattern(tuple([0] * n))


@pytest.mark.unit
@pytest.mark.parametrize("name", sorted(GOLDEN_CASES))
def test_reduced_qasm_matches_golden(name: str, golden_dir: Path) -> None:
    memory = MemoryContent.from_strings(GOLDEN_CASES[name])
    reduced = compile_reduced(memory, _zeros(memory.n))
    expected = (golden_dir / f"{name}.qasm").read_text(encoding="utf-8")
    assert emit_qasm(reduced.circuit) == expected


@pytest.mark.unit
def test_reduced_circuit_uses_n_plus_one_qubits_and_basis_gates() -> None:
    memory = MemoryContent.from_strings(["0000", "0100"])
    reduced = compile_reduced(memory, BitPattern.from_string("1010"), 0.5)
    assert reduced.circuit.num_qubits == 5
    assert {r.name for r in reduced.circuit.registers} == {"m", "c"}
    assert {op.kind for op in reduced.circuit.ops} <= {GateKind.X, GateKind.H, GateKind.PHASE, GateKind.CPHASE}
    assert reduced.circuit.measured == (4,)


@pytest.mark.unit
def test_memory_preparation_shapes() -> None:
    pair = prepare_memory_subcircuit(MemoryContent.from_strings(["0000", "0100"]))
    assert [(op.kind, op.targets) for op in pair.ops] == [(GateKind.H, (1,))]
    ones = prepare_memory_subcircuit(MemoryContent.from_strings(["1101"]))
    assert [op.targets[0] for op in ones.ops] == [0, 1, 3]
    assert all(op.kind == GateKind.X for op in ones.ops)
    assert ones.num_qubits == 5


@pytest.mark.unit
def test_memory_preparation_rejects_unsupported_memories() -> None:
    for patterns in (["000", "011"], ["000", "001", "010"], ["01", "01"]):
        with pytest.raises(CircuitError) as excinfo:
            prepare_memory_subcircuit(MemoryContent.from_strings(patterns))
        assert excinfo.value.code == UNSUPPORTED_MEMORY


def _random_supported_memory(rng: np.random.Generator, n: int) -> MemoryContent:
    first = tuple(int(b) for b in rng.integers(0, 2, size=n))
    if rng.random() < 0.5:
        return MemoryContent((BitPattern(first),))
    j = int(rng.integers(n))
    second = tuple(1 - b if k == j else b for k, b in enumerate(first))
    return MemoryContent((BitPattern(first), BitPattern(second)))


@pytest.mark.integration
def test_reduction_preserves_outcome_distribution() -> None:
    rng = np.random.default_rng(606)
    for _ in range(100):
        n = int(rng.integers(1, 5))
        memory = _random_supported_memory(rng, n)
        pattern = BitPattern(tuple(int(b) for b in rng.integers(0, 2, size=n)))
        t = float(rng.uniform(0.1, 1.0))
        full = retrieve_exact(memory, pattern, t).p0
        assert reduced_p0(compile_reduced(memory, pattern, t)) == pytest.approx(full, abs=1e-9)


@pytest.mark.unit
@pytest.mark.parametrize("name", sorted(GOLDEN_CASES))
def test_golden_qasm_simulates_to_reference_value(name: str, golden_dir: Path) -> None:
    memory = MemoryContent.from_strings(GOLDEN_CASES[name])
    published = dict(REFERENCE_CONFIGURATIONS)[GOLDEN_CASES[name]]
    circuit = circuit_from_qasm((golden_dir / f"{name}.qasm").read_text(encoding="utf-8"))
    assert circuit.num_qubits == memory.n + 1
    assert reduced_p0(circuit) == pytest.approx(published, abs=1e-9)
    assert reduced_p0(circuit) == pytest.approx(closed_form_p0(memory, _zeros(memory.n)), abs=1e-9)


@pytest.mark.unit
def test_cancellation_drops_gates_without_changing_state() -> None:
    memory = MemoryContent.from_strings(["011", "111"])
    pattern = BitPattern.from_string("101")
    prep = prepare_memory_subcircuit(memory)
    naive = fold_classical_input(3, pattern, prep, 0.7, optimize=False)
    optimized = fold_classical_input(3, pattern, prep, 0.7)
    assert len(optimized.circuit) < len(naive.circuit)
    assert np.allclose(run_circuit(optimized.circuit).amplitudes, run_circuit(naive.circuit).amplitudes)
    assert cancel_adjacent_x(optimized.circuit) == optimized.circuit


@pytest.mark.unit
def test_cancellation_handles_nested_and_blocked_pairs() -> None:
    nested = CircuitBuilder([("q", 2)]).add(x(0), x(1), x(1), x(0)).build()
    assert len(cancel_adjacent_x(nested)) == 0
    blocked = CircuitBuilder([("q", 2)]).add(x(0), h(0), x(0)).build()
    assert len(cancel_adjacent_x(blocked)) == 3
    controlled = CircuitBuilder([("q", 2)]).add(x(1), cnot(0, 1), x(1)).build()
    assert len(cancel_adjacent_x(controlled)) == 3
    other_qubit = CircuitBuilder([("q", 2)]).add(x(1), h(0), x(1)).build()
    assert [op.kind for op in cancel_adjacent_x(other_qubit).ops] == [GateKind.H]


@pytest.mark.unit
def test_decomposition_preserves_unitary(gate_oracle) -> None:  # noqa: ANN001
    theta = math.pi / 7
    for gate in (u_pqm(1, theta), cu_pqm(0, 2, -2 * theta)):
        circuit = CircuitBuilder([("q", 3)]).add(gate).build()
        decomposed = decompose_to_basis(circuit)
        product = np.eye(8, dtype=complex)
        for op in decomposed.ops:
            product = gate_oracle(op, 3) @ product
        assert np.allclose(product, gate_oracle(gate, 3))
    with pytest.raises(GateError):
        decompose_to_basis(CircuitBuilder([("q", 3)]).add(toffoli(0, 1, 2)).build())


@pytest.mark.unit
def test_fold_rejects_preparation_on_control_qubit() -> None:
    bad = CircuitBuilder([("m", 2), ("c", 1)]).add(h(2)).build()
    with pytest.raises(CircuitError):
        fold_classical_input(2, _zeros(2), bad)
    with pytest.raises(CircuitError):
        fold_classical_input(3, _zeros(2), bad)


@pytest.mark.unit
def test_tenerife_graph_from_fixture(fixtures_dir: Path) -> None:
    graph = load_coupling_graph(fixtures_dir / "tenerife.json")
    assert graph.edges == TENERIFE.edges
    assert graph.num_qubits == 5
    assert graph.name == "tenerife"


@pytest.mark.unit
def test_bad_coupling_file(tmp_path: Path) -> None:
    path = tmp_path / "graph.json"
    path.write_text('{"edges": [[0, 1]]}', encoding="utf-8")
    with pytest.raises(DataError):
        load_coupling_graph(path)
    with pytest.raises(DataError):
        load_coupling_graph(tmp_path / "absent.json")


@pytest.mark.unit
def test_two_bit_memory_fits_tenerife_with_remap() -> None:
    reduced = compile_reduced(MemoryContent.from_strings(["00", "01"]), _zeros(2))
    report = check_topology(reduced.circuit, TENERIFE, parse_mapping("2,4,3"))
    assert report.placeable
    assert validate_topology(reduced.circuit, TENERIFE, (2, 4, 3)) == []
    require_placeable(report)


@pytest.mark.unit
def test_four_bit_memory_violates_tenerife() -> None:
    reduced = compile_reduced(MemoryContent.from_strings(["0000", "0100"]), _zeros(4))
    violations = validate_topology(reduced.circuit, TENERIFE, (0, 1, 2, 4, 3))
    assert {issue.physical for issue in violations} == {(3, 0), (3, 1)}
    assert all(issue.severity == "violation" for issue in violations)
    with pytest.raises(TopologyError) as excinfo:
        require_placeable(check_topology(reduced.circuit, TENERIFE, (0, 1, 2, 4, 3)))
    assert excinfo.value.code == TOPOLOGY_VIOLATION


@pytest.mark.unit
def test_star_graph_places_four_bit_memory(fixtures_dir: Path) -> None:
    reduced = compile_reduced(MemoryContent.from_strings(["0000", "0100"]), _zeros(4))
    assert check_topology(reduced.circuit, star_graph(4, [0, 1, 2, 3]), range(5)).placeable
    star = load_coupling_graph(fixtures_dir / "star5.json")
    assert star.edges == star_graph(4, [0, 1, 2, 3]).edges


@pytest.mark.unit
def test_reversed_cnot_is_advisory_only() -> None:
    circuit = CircuitBuilder([("q", 3)]).add(cnot(0, 1)).build()
    report = check_topology(circuit, TENERIFE, (0, 2, 4))
    assert report.placeable
    assert [a.physical for a in report.advisories] == [(0, 2)]


@pytest.mark.unit
def test_mapping_validation() -> None:
    circuit = CircuitBuilder([("q", 3)]).add(cnot(0, 1)).build()
    for mapping in ((0, 0, 1), (0, 1), (0, 1, 9)):
        with pytest.raises(TopologyError) as excinfo:
            check_topology(circuit, TENERIFE, mapping)
        assert excinfo.value.code == INVALID_MAPPING
    with pytest.raises(TopologyError):
        parse_mapping("0,a")
    with pytest.raises(GateError):
        check_topology(CircuitBuilder([("q", 3)]).add(toffoli(0, 1, 2)).build(), TENERIFE, (0, 1, 2))


@pytest.mark.unit
def test_qasm_header_and_measurement_lines() -> None:
    idle = CircuitBuilder([("q", 1)]).build()
    assert emit_qasm(idle) == 'OPENQASM 2.0;\ninclude "qelib1.inc";\nqreg q[1];\n'
    measured = CircuitBuilder([("q", 2)]).add(h(0), cnot(0, 1)).build(measured=(1,))
    assert emit_qasm(measured).splitlines()[-3:] == ["h q[0];", "cx q[0],q[1];", "measure q[1] -> c[0];"]
    with pytest.raises(GateError):
        emit_qasm(CircuitBuilder([("q", 2)]).add(u_pqm(0, 0.1)).build())


@pytest.mark.unit
def test_qasm_parse_reproduces_circuit() -> None:
    reduced = compile_reduced(MemoryContent.from_strings(["0110", "1110"]), BitPattern.from_string("0011"), 0.35)
    parsed = circuit_from_qasm(emit_qasm(reduced.circuit))
    assert parsed.ops == reduced.circuit.ops
    assert parsed.measured == reduced.circuit.measured
    assert reduced_p0(parsed) == pytest.approx(reduced_p0(reduced), abs=1e-12)
    with pytest.raises(DataError):
        circuit_from_qasm("OPENQASM 2.0;\nqreg q[1];\nrz(0.1) q[0];\n")


@pytest.mark.unit
def test_hadamard_conjugation_realizes_reversed_cnot() -> None:
    state = StateVector.from_amplitudes(np.arange(1, 5, dtype=float))
    direct = apply_gate(state, cnot(1, 0))
    flipped = state
    for op in (h(0), h(1), cnot(0, 1), h(0), h(1)):
        flipped = apply_gate(flipped, op)
    assert np.allclose(flipped.amplitudes, direct.amplitudes)


@pytest.mark.integration
def test_reference_table_sampling() -> None:
    table = reproduce_reference_table(shots=8192, seed=20190101)
    rows = table["rows"]
    assert len(rows) == 21
    for row in rows:
        assert row["full_circuit"] == pytest.approx(row["exact"], abs=5e-5)
        assert row["reduced_circuit"] == pytest.approx(row["exact"], abs=1e-9)
        assert row["exact"] == pytest.approx(row["published"], abs=1e-4)
        assert row["abs_error"] <= 0.02
    assert table["mse"] < 1e-4
    again = reproduce_reference_table(shots=8192, seed=20190101)
    assert [r["sampled"] for r in again["rows"]] == [r["sampled"] for r in rows]


@pytest.mark.integration
def test_all_inputs_sweep_stays_within_shot_noise() -> None:
    shots = 8192
    table = sweep_reference_inputs(shots=shots, seed=31)
    rows = table["rows"]
    assert len(rows) == len(REFERENCE_CONFIGURATIONS)
    sigma = 0.5 / math.sqrt(shots)
    for row in rows:
        assert row["inputs"] == 2 ** row["n"]
        assert row["reduction_gap"] < 1e-9
        # binomial variance is at most 1/(4 shots) per input
        assert row["mse"] <= 10 * sigma**2
        assert row["max_abs_error"] <= 5 * sigma
    assert set(table["mean_abs_error_by_n"]) == {"1", "2", "3", "4"}
    assert all(err < 2 * sigma for err in table["mean_abs_error_by_n"].values())
    again = sweep_reference_inputs(shots=shots, seed=31)
    assert again["rows"] == rows

@pytest.mark.unit
def test_reduced_p0_needs_measured_qubit() -> None:
    with pytest.raises(CircuitError):
        reduced_p0(CircuitBuilder([("q", 1)]).add(h(0)).build())
    memory = MemoryContent.from_strings(["1000"])
    assert reduced_p0(compile_reduced(memory, _zeros(4))) == pytest.approx(closed_form_p0(memory, _zeros(4)))
