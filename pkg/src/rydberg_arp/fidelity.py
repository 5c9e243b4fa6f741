"""Ideal gates, corrective phase and limited-tomography fidelity.

Computational inputs are indexed by the integer whose binary digits are
the qubit values, atom 0 being the most significant bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
from scipy.optimize import minimize_scalar

N_SCAN = 1024
TWO_PI = 2 * np.pi


class FidelityError(ValueError):
    """Missing or malformed gate amplitudes."""


def ideal_ckz(k: int) -> np.ndarray:
    """``2|0..0><0..0| - I`` on ``k + 1`` qubits."""
    if k < 1:
        raise ValueError("k must be at least 1")
    d = 2 ** (k + 1)
    u = -np.eye(d, dtype=complex)
    u[0, 0] = 1.0
    return u


def excitation_numbers(n_qubits: int) -> np.ndarray:
    """Number of qubits in |1> for every input index."""
    return np.array([bin(x).count("1") for x in range(2**n_qubits)])


def bitstring(x: int, n_qubits: int) -> str:
    return format(x, f"0{n_qubits}b")


def _n_qubits(size: int) -> int:
    n = int(round(np.log2(size)))
    if 2**n != size or n < 2:
        raise FidelityError(f"expected 2^(k+1) amplitudes, got {size}")
    return n


def apply_corrective_phase(amplitudes, phi: float) -> np.ndarray:
    """Multiply the amplitude of input x by ``exp(i n1(x) phi)``."""
    a = np.asarray(amplitudes, dtype=complex)
    n1 = excitation_numbers(_n_qubits(a.shape[-1]))
    return a * np.exp(1j * n1 * phi)


def fidelity_vs_phase(amplitudes, phi) -> np.ndarray:
    """``F(phi)`` for a scalar or an array of phases.

    *amplitudes* may carry leading batch axes; the result then has shape
    ``batch + phi.shape``.
    """
    a = np.asarray(amplitudes, dtype=complex)
    n = _n_qubits(a.shape[-1])
    s = np.diag(ideal_ckz(n - 1)).real
    n1 = excitation_numbers(n)
    phi = np.asarray(phi, dtype=float)
    basis = np.exp(1j * np.multiply.outer(phi, n1))  # phi.shape + (d,)
    amp = np.tensordot(a * s, basis, axes=([-1], [-1])) / 2**n
    out = np.abs(amp) ** 2
    return out if out.ndim else float(out)


def optimize_corrective_phase(amplitudes, tol: float = 1e-10) -> tuple[float, float]:
    """Global maximiser ``(phi*, F(phi*))`` of ``F`` over ``[0, 2 pi)``.

    A dense scan brackets the maximum, a bounded scalar search refines it.
    """
    a = np.asarray(amplitudes, dtype=complex)
    grid = np.arange(N_SCAN) * (TWO_PI / N_SCAN)
    scan = fidelity_vs_phase(a, grid)
    i = int(np.argmax(scan))
    step = TWO_PI / N_SCAN
    res = minimize_scalar(
        lambda p: -fidelity_vs_phase(a, p),
        bounds=(grid[i] - step, grid[i] + step),
        method="bounded",
        options={"xatol": 1e-12},
    )
    phi, f = float(res.x), float(-res.fun)
    if f < scan[i]:
        phi, f = float(grid[i]), float(scan[i])
    return phi % TWO_PI, f


@dataclass
class GateResult:
    """Fidelity and per-input diagnostics of one simulated gate.

    ``populations[x] = |a_x|^2`` and ``phases[x] = arg(a_x) + n1(x) phi*``
    (wrapped to ``(-pi, pi]``), where ``a_x = <x|U|x>``.
    """

    fidelity: float
    phi: float
    amplitudes: np.ndarray
    populations: np.ndarray
    phases: np.ndarray
    fidelity_uncorrected: float
    traces: dict[str, Any] = field(default_factory=dict, repr=False)

    @property
    def n_qubits(self) -> int:
        return _n_qubits(len(self.amplitudes))

    def population(self, bits: str) -> float:
        return float(self.populations[int(bits, 2)])

    def to_dict(self) -> dict[str, Any]:
        n = self.n_qubits
        keys = [bitstring(x, n) for x in range(2**n)]
        return {
            "fidelity": self.fidelity,
            "fidelity_phi0": self.fidelity_uncorrected,
            "phi_rad": self.phi,
            "populations": dict(zip(keys, map(float, self.populations))),
            "phases_rad": dict(zip(keys, map(float, self.phases))),
            "amplitudes": {k: [float(a.real), float(a.imag)] for k, a in zip(keys, self.amplitudes)},
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "GateResult":
        amps = data["amplitudes"]
        keys = sorted(amps, key=lambda b: int(b, 2))
        a = np.array([complex(*amps[k]) for k in keys])
        return evaluate_gate(a, optimize_phase=True)


def gather_amplitudes(amps: Mapping[str, complex] | np.ndarray, n_qubits: int | None = None) -> np.ndarray:
    """Order amplitudes by input index; a mapping must be keyed by bitstring."""
    if isinstance(amps, Mapping):
        if n_qubits is None:
            n_qubits = len(next(iter(amps)))
        out = np.empty(2**n_qubits, dtype=complex)
        for x in range(2**n_qubits):
            key = bitstring(x, n_qubits)
            if key not in amps:
                raise FidelityError(f"missing amplitude for input |{key}>")
            out[x] = amps[key]
        return out
    a = np.asarray(amps, dtype=complex)
    if a.ndim == 2:
        a = np.diag(a)
    if n_qubits is not None and a.shape[-1] != 2**n_qubits:
        raise FidelityError(f"expected {2**n_qubits} amplitudes, got {a.shape[-1]}")
    if np.any(~np.isfinite(a)):
        raise FidelityError("non-finite amplitude")
    return a


def evaluate_gate(amplitudes, optimize_phase: bool = True, n_qubits: int | None = None,
                  traces: dict[str, Any] | None = None) -> GateResult:
    """Limited-tomography fidelity from the diagonal amplitudes ``a_x``.

    *amplitudes* is a vector over all inputs, a full matrix (its diagonal
    is used) or a mapping keyed by bitstring.
    """
    a = gather_amplitudes(amplitudes, n_qubits)
    f0 = fidelity_vs_phase(a, 0.0)
    if optimize_phase:
        phi, f = optimize_corrective_phase(a)
    else:
        phi, f = 0.0, f0
    n1 = excitation_numbers(_n_qubits(len(a)))
    phases = np.angle(a * np.exp(1j * n1 * phi))
    return GateResult(min(f, 1.0), phi, a, np.abs(a) ** 2, phases, f0, traces or {})
