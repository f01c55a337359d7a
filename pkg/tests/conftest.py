from __future__ import annotations

import itertools
import math
from typing import Callable

import numpy as np
import pytest

from models import BitPattern, GateKind, GateOp, MemoryContent

_ONE_QUBIT = {
    GateKind.X: lambda theta: np.array([[0, 1], [1, 0]], dtype=complex),
    GateKind.CNOT: lambda theta: np.array([[0, 1], [1, 0]], dtype=complex),
    GateKind.TOFFOLI: lambda theta: np.array([[0, 1], [1, 0]], dtype=complex),
    GateKind.NXOR: lambda theta: np.array([[0, 1], [1, 0]], dtype=complex),
    GateKind.H: lambda theta: np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2),
    GateKind.PHASE: lambda theta: np.diag([1, np.exp(1j * theta)]),
    GateKind.CPHASE: lambda theta: np.diag([1, np.exp(1j * theta)]),
    GateKind.U_PQM: lambda theta: np.diag([np.exp(1j * theta), 1]),
    GateKind.CU_PQM: lambda theta: np.diag([np.exp(1j * theta), 1]),
}


def _cs_block(j: int, adjoint: bool) -> np.ndarray:
    a, b = math.sqrt((j - 1) / j), 1 / math.sqrt(j)
    block = np.array(
        [
            [1, 0, 0, 0],
            [0, 1, 0, 0],
            [0, 0, a, b],
            [0, 0, -b, a],
        ],
        dtype=complex,
    )
    return block.conj().T if adjoint else block


def full_unitary(gate: GateOp, num_qubits: int) -> np.ndarray:
    """Dense 2^N x 2^N matrix built column by column from basis states."""
    dim = 1 << num_qubits

    def bit(index: int, q: int) -> int:
        return (index >> (num_qubits - 1 - q)) & 1

    def flip(index: int, q: int, value: int) -> int:
        shift = num_qubits - 1 - q
        return (index & ~(1 << shift)) | (value << shift)

    matrix = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        if gate.kind == GateKind.CS:
            u1, u2 = gate.targets
            block = _cs_block(gate.j, gate.adjoint)
            local = 2 * bit(col, u1) + bit(col, u2)
            for out in range(4):
                row = flip(flip(col, u1, out >> 1), u2, out & 1)
                matrix[row, col] += block[out, local]
            continue
        if not all(bit(col, c) for c in gate.controls):
            matrix[col, col] = 1
            continue
        target = gate.targets[0]
        small = _ONE_QUBIT[gate.kind](gate.theta)
        for out in (0, 1):
            matrix[flip(col, target, out), col] += small[out, bit(col, target)]
    return matrix


def wilcoxon_bruteforce(a: list[float], b: list[float]) -> float:
    """Two-sided p from all 2^n sign assignments of the (average) ranks."""
    from scipy.stats import rankdata

    diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    diff = diff[diff != 0]
    ranks = rankdata(np.abs(diff))
    w = min(ranks[diff > 0].sum(), ranks[diff < 0].sum())
    hits = 0
    for signs in itertools.product((0, 1), repeat=len(ranks)):
        w_plus = sum(r for r, s in zip(ranks, signs) if s)
        if w_plus <= w + 1e-9:
            hits += 1
    return min(1.0, 2 * hits / 2 ** len(ranks))


def random_memory(rng: np.random.Generator, n: int, p: int) -> MemoryContent:
    p = min(p, 1 << n)
    values = rng.choice(1 << n, size=p, replace=False)
    return MemoryContent(
        tuple(BitPattern(tuple(int(b) for b in format(int(v), f"0{n}b"))) for v in values)
    )


@pytest.fixture
def gate_oracle() -> Callable[[GateOp, int], np.ndarray]:
    return full_unitary


@pytest.fixture
def wilcoxon_oracle() -> Callable[[list[float], list[float]], float]:
    return wilcoxon_bruteforce


@pytest.fixture
def memory_factory() -> Callable[[np.random.Generator, int, int], MemoryContent]:
    return random_memory


@pytest.fixture
def fixtures_dir() -> "Path":
    from pathlib import Path

    return Path(__file__).resolve().parents[1] / "fixtures"


@pytest.fixture
def golden_dir() -> "Path":
    from pathlib import Path

    return Path(__file__).resolve().parent / "golden"
