from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from errors import DUPLICATE_PATTERN, LENGTH_MISMATCH, DataError, ParameterError, PatternError
from models import BitPattern, MemoryContent, PqmParameter, StateVector
from nisq_compile import REFERENCE_CONFIGURATIONS
from pqm_core import (
    build_retrieval_circuit,
    build_storage_circuit,
    closed_form_p0,
    closed_form_p1,
    hamming,
    load_memory_file,
    prepare_memory_state,
    retrieve_exact,
    retrieve_sampled,
    storage_auxiliary_state,
)
from quantum_sim import marginal_distribution, run_circuit

INPUT_X = BitPattern.from_string("0111010101")
NEAR = MemoryContent.from_strings(["0110010101", "0101010101", "0111010001", "0011010101"])
FAR = MemoryContent.from_strings(["1111010110", "1100010101", "1101010001", "1111100101"])


def _zeros(n: int) -> BitPattern:
    return BitPattern(tuple([0] * n))


@pytest.mark.unit
def test_hamming_counts_differing_positions() -> None:
    assert hamming(BitPattern.from_string("0110"), BitPattern.from_string("0011")) == 2
    assert hamming(INPUT_X, INPUT_X) == 0
    with pytest.raises(PatternError) as excinfo:
        hamming(BitPattern.from_string("01"), BitPattern.from_string("011"))
    assert excinfo.value.code == LENGTH_MISMATCH


@pytest.mark.unit
def test_example_memories_sit_at_fixed_distances() -> None:
    assert {hamming(INPUT_X, p) for p in NEAR.patterns} == {1}
    assert {hamming(INPUT_X, p) for p in FAR.patterns} == {3}


@pytest.mark.unit
@pytest.mark.parametrize("patterns,published", REFERENCE_CONFIGURATIONS)
def test_closed_form_reproduces_reference_rows(patterns, published) -> None:  # noqa: ANN001
    memory = MemoryContent.from_strings(patterns)
    assert closed_form_p0(memory, _zeros(memory.n)) == pytest.approx(published, abs=1e-4)


@pytest.mark.integration
@pytest.mark.parametrize("patterns,published", REFERENCE_CONFIGURATIONS)
def test_full_circuit_reproduces_reference_rows(patterns, published) -> None:  # noqa: ANN001
    memory = MemoryContent.from_strings(patterns)
    outcome = retrieve_exact(memory, _zeros(memory.n))
    assert outcome.p0 == pytest.approx(closed_form_p0(memory, _zeros(memory.n)), abs=5e-5)
    assert outcome.p0 + outcome.p1 == pytest.approx(1.0)


@pytest.mark.unit
def test_near_and_far_memories_at_full_parameter() -> None:
    assert closed_form_p0(NEAR, INPUT_X) == pytest.approx(0.9755, abs=1e-4)
    assert closed_form_p0(FAR, INPUT_X) == pytest.approx(0.7939, abs=1e-4)
    assert 1 - closed_form_p0(NEAR, INPUT_X) == pytest.approx(0.0245, abs=1e-4)


@pytest.mark.unit
def test_small_parameter_widens_the_gap() -> None:
    assert closed_form_p0(NEAR, INPUT_X, 0.044) == pytest.approx(0.83, abs=0.005)
    assert closed_form_p0(FAR, INPUT_X, 0.044) == pytest.approx(0.079, abs=0.005)


@pytest.mark.integration
def test_near_memory_full_circuit_matches_closed_form() -> None:
    outcome = retrieve_exact(NEAR, INPUT_X)
    assert outcome.p0 == pytest.approx(closed_form_p0(NEAR, INPUT_X), abs=1e-9)


@pytest.mark.integration
@pytest.mark.slow
def test_circuit_matches_closed_form_on_random_instances(memory_factory) -> None:  # noqa: ANN001
    rng = np.random.default_rng(2019)
    for _ in range(500):
        n = int(rng.integers(1, 7))
        p = int(rng.integers(1, 9))
        t = float(rng.uniform(0.05, 1.0))
        memory = memory_factory(rng, n, p)
        pattern = BitPattern(tuple(int(b) for b in rng.integers(0, 2, size=n)))
        outcome = retrieve_exact(memory, pattern, t)
        assert outcome.p0 == pytest.approx(closed_form_p0(memory, pattern, t), abs=1e-9)
        assert outcome.p1 == pytest.approx(closed_form_p1(memory, pattern, t), abs=1e-9)


@pytest.mark.unit
def test_single_pattern_output_falls_with_distance() -> None:
    memory = MemoryContent.from_strings(["000000"])
    inputs = ["000000", "100000", "110000", "111000", "111100", "111110", "111111"]
    p0 = [retrieve_exact(memory, BitPattern.from_string(s)).p0 for s in inputs]
    assert all(a > b for a, b in zip(p0, p0[1:]))


@pytest.mark.integration
def test_retrieval_leaves_memory_register_on_stored_patterns(memory_factory) -> None:  # noqa: ANN001
    rng = np.random.default_rng(31)
    for _ in range(40):
        n = int(rng.integers(1, 6))
        memory = memory_factory(rng, n, int(rng.integers(1, 7)))
        pattern = BitPattern(tuple(int(b) for b in rng.integers(0, 2, size=n)))
        circuit = build_retrieval_circuit(n, pattern, float(rng.uniform(0.1, 1.0)))
        amps = np.zeros(1 << circuit.num_qubits, dtype=np.complex128)
        amps[np.arange(1 << n) << 1] = prepare_memory_state(memory)
        state = run_circuit(circuit, StateVector(circuit.num_qubits, amps))
        support = np.flatnonzero(marginal_distribution(state, circuit.register("m").indices) > 1e-12)
        assert set(support.tolist()) == {p.as_int() for p in memory.patterns}


@pytest.mark.unit
def test_zero_distance_everywhere_gives_certain_zero() -> None:
    memory = MemoryContent.from_strings(["0101"])
    assert retrieve_exact(memory, BitPattern.from_string("0101")).p0 == pytest.approx(1.0)
    assert closed_form_p0(memory, BitPattern.from_string("1010")) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.unit
def test_post_selection_weights_patterns_by_closeness() -> None:
    memory = MemoryContent.from_strings(["000", "010"])
    outcome = retrieve_exact(memory, BitPattern.from_string("000"))
    assert outcome.p0 == pytest.approx(0.875)
    weights = {str(p): w for p, w in outcome.per_pattern}
    assert weights["000"] == pytest.approx(1 / 1.75)
    assert weights["010"] == pytest.approx(0.75 / 1.75)


@pytest.mark.unit
def test_post_selection_undefined_when_zero_outcome_impossible() -> None:
    outcome = retrieve_exact(MemoryContent.from_strings(["1"]), BitPattern.from_string("0"))
    assert outcome.p0 == pytest.approx(0.0, abs=1e-15)
    assert outcome.per_pattern is None


@pytest.mark.unit
def test_parameter_bounds() -> None:
    for bad in (0.0, -0.3, 1.5):
        with pytest.raises(ParameterError):
            PqmParameter(bad)
    with pytest.raises(ParameterError):
        closed_form_p0(NEAR, INPUT_X, 0.0)
    assert PqmParameter(1.0).angle(4) == pytest.approx(math.pi / 8)


@pytest.mark.unit
def test_input_length_must_match_memory() -> None:
    with pytest.raises(PatternError) as excinfo:
        retrieve_exact(NEAR, BitPattern.from_string("0101"))
    assert excinfo.value.code == LENGTH_MISMATCH


@pytest.mark.unit
def test_circuit_layouts() -> None:
    memory = MemoryContent.from_strings(["010", "111"])
    storage = build_storage_circuit(memory)
    assert storage.num_qubits == 8
    assert [r.name for r in storage.registers] == ["p", "u", "m"]
    retrieval = build_retrieval_circuit(3, BitPattern.from_string("001"))
    assert retrieval.num_qubits == 7
    assert retrieval.measured == (retrieval.register("c")[0],)


@pytest.mark.unit
def test_storage_rejects_repeated_patterns() -> None:
    with pytest.raises(PatternError) as excinfo:
        build_storage_circuit(MemoryContent.from_strings(["01", "01"]))
    assert excinfo.value.code == DUPLICATE_PATTERN


@pytest.mark.integration
def test_storage_circuit_prepares_uniform_superposition(memory_factory) -> None:  # noqa: ANN001
    rng = np.random.default_rng(5)
    for _ in range(200):
        n = int(rng.integers(1, 6))
        p = int(rng.integers(1, 7))
        memory = memory_factory(rng, n, p)
        target = prepare_memory_state(memory)
        prepared = prepare_memory_state(memory, use_storage_circuit=True)
        fidelity = abs(np.vdot(target, prepared)) ** 2
        assert fidelity >= 1 - 1e-10


@pytest.mark.integration
def test_storage_returns_auxiliary_registers_to_zero() -> None:
    assert storage_auxiliary_state(MemoryContent.from_strings(["0110", "1001", "1111"])) == ("0000", "00")
    assert storage_auxiliary_state(MemoryContent.from_strings(["1"])) == ("0", "00")


@pytest.mark.integration
def test_retrieval_through_storage_circuit_agrees() -> None:
    memory = MemoryContent.from_strings(["0011", "0101", "1110"])
    pattern = BitPattern.from_string("0111")
    direct = retrieve_exact(memory, pattern, 0.6)
    stored = retrieve_exact(memory, pattern, 0.6, use_storage_circuit=True)
    assert stored.p0 == pytest.approx(direct.p0, abs=1e-10)


@pytest.mark.unit
def test_sampled_retrieval_is_reproducible_and_close() -> None:
    memory = MemoryContent.from_strings(["0000", "0100"])
    pattern = _zeros(4)
    first = retrieve_sampled(memory, pattern, 1.0, 8192, 7)
    second = retrieve_sampled(memory, pattern, 1.0, 8192, 7)
    assert first == second
    assert first.shots == 8192
    assert first.p0 == pytest.approx(0.9268, abs=0.02)


@pytest.mark.unit
def test_repeated_patterns_are_a_multiset_for_the_closed_form() -> None:
    single = MemoryContent.from_strings(["01"])
    doubled = MemoryContent.from_strings(["01", "01", "10"])
    pattern = BitPattern.from_string("01")
    assert closed_form_p0(doubled, pattern) == pytest.approx((2 * 1.0 + 0.0) / 3)
    assert closed_form_p0(single, pattern) == pytest.approx(1.0)


@pytest.mark.unit
def test_load_memory_file_skips_comments(fixtures_dir: Path) -> None:
    assert load_memory_file(fixtures_dir / "memory_near.txt") == NEAR
    assert load_memory_file(fixtures_dir / "memory_far.txt") == FAR


@pytest.mark.unit
def test_load_memory_file_reports_bad_line(tmp_path: Path) -> None:
    path = tmp_path / "mem.txt"
    path.write_text("0101\n\n01a1\n", encoding="utf-8")
    with pytest.raises(DataError, match=":3:"):
        load_memory_file(path)
    path.write_text("0101\n011\n", encoding="utf-8")
    with pytest.raises(DataError) as excinfo:
        load_memory_file(path)
    assert excinfo.value.code == LENGTH_MISMATCH
    path.write_text("# nothing\n", encoding="utf-8")
    with pytest.raises(DataError):
        load_memory_file(path)
