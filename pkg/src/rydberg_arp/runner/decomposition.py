"""CCZ from six CZ gates and perfect single-qubit gates.

Gates are written in the gate convention used throughout the package,
where the controlled phase acts on |0..0> (``ideal_ckz``). This is the
X-conjugate of the textbook convention, so the textbook Toffoli-phase
circuit carries over with the Hadamard replaced by ``X H X`` and the T
gate by ``exp(i pi/8 sigma_z)``; the CZ gates enter unchanged up to a
sign. The resulting global phase is fixed once in :data:`GLOBAL_PHASE`.
"""

from __future__ import annotations

from functools import reduce

import numpy as np

from ..fidelity import ideal_ckz

SQRT_HALF = np.sqrt(0.5)
X = np.array([[0, 1], [1, 0]], dtype=complex)
I2 = np.eye(2, dtype=complex)
HADAMARD = X @ (SQRT_HALF * np.array([[1, 1], [1, -1]], dtype=complex)) @ X
T_GATE = np.diag([np.exp(1j * np.pi / 8), np.exp(-1j * np.pi / 8)])
# textbook T = e^{i pi/8} T_GATE in this basis; four T and three T^dagger leave
# e^{i pi/8}, and the textbook CCZ maps to -ideal_ckz(2)
GLOBAL_PHASE = -np.exp(1j * np.pi / 8)

# (kind, qubits) with kind in {"cx", "t", "tdg"}; qubit 0 is the most significant
TOFFOLI_PHASE_CIRCUIT = (
    ("cx", (1, 2)), ("tdg", 2), ("cx", (0, 2)), ("t", 2), ("cx", (1, 2)), ("tdg", 2),
    ("cx", (0, 2)), ("t", 1), ("t", 2), ("cx", (0, 1)), ("t", 0), ("tdg", 1), ("cx", (0, 1)),
)


class DecompositionError(ValueError):
    """The assembled circuit does not reproduce the ideal gate."""


def _single(gate: np.ndarray, qubit: int, n: int = 3) -> np.ndarray:
    return reduce(np.kron, [gate if q == qubit else I2 for q in range(n)])


def _two(cz: np.ndarray, a: int, b: int, n: int = 3) -> np.ndarray:
    """Embed a 4x4 gate on qubits ``(a, b)`` of an n-qubit register."""
    d = 2**n
    out = np.zeros((d, d), dtype=complex)
    bits = [[(x >> (n - 1 - q)) & 1 for q in range(n)] for x in range(d)]
    for x in range(d):
        for y in range(d):
            if all(bits[x][q] == bits[y][q] for q in range(n) if q not in (a, b)):
                out[x, y] = cz[2 * bits[x][a] + bits[x][b], 2 * bits[y][a] + bits[y][b]]
    return out


def assemble_ccz(cz: np.ndarray) -> np.ndarray:
    """Three-qubit operator of the six-CZ circuit built from a 4x4 CZ channel."""
    cz = np.asarray(cz, dtype=complex)
    if cz.shape != (4, 4):
        raise DecompositionError("the CZ channel must be a 4x4 matrix")
    u = np.eye(8, dtype=complex)
    for kind, q in TOFFOLI_PHASE_CIRCUIT:
        if kind == "cx":
            h = _single(HADAMARD, q[1])
            g = h @ _two(cz, *q) @ h
        else:
            g = _single(T_GATE if kind == "t" else T_GATE.conj().T, q)
        u = g @ u
    return GLOBAL_PHASE * u


def check_identity(atol: float = 1e-12) -> float:
    """Max deviation of the ideal-CZ assembly from ``ideal_ckz(2)``; raises above *atol*."""
    dev = float(np.max(np.abs(assemble_ccz(ideal_ckz(1)) - ideal_ckz(2))))
    if dev > atol:
        raise DecompositionError(f"decomposition identity violated by {dev:.3g}")
    return dev


def circuit_fidelity(u: np.ndarray, k: int = 2) -> float:
    """Limited-tomography fidelity ``|<Psi| U_ideal^dagger U |Psi>|^2`` for a full matrix."""
    ideal = np.diag(ideal_ckz(k))
    d = len(ideal)
    return float(abs(np.sum(ideal.conj()[:, None] * u) / d) ** 2)
