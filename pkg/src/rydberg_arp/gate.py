"""Simulation of a global-drive CkZ gate over all computational inputs.

Each input ``x`` evolves in its own block spanned by the atoms in |1>;
blocks whose interaction sub-matrices coincide up to a relabelling of
atoms give identical amplitudes, so only one representative per class
is integrated. All representatives are stacked into one block-diagonal
system and integrated together.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .atomdata import InteractionMap, LevelScheme
from .fidelity import GateResult, bitstring, evaluate_gate
from .model import NOMINAL, REDUCED, EnsembleModel, Perturbation, compose_ensemble, stack
from .propagator import DEFAULT_TOL, Trace, evolve
from .pulse import NoiseRealization, PulseSchedule

__all__ = ["GateSimulation", "build_gate_model", "simulate_gate", "block_signature"]


def block_signature(v: np.ndarray, decimals: int = 9) -> tuple:
    """Permutation-invariant key of a symmetric interaction block."""
    n = v.shape[0]
    if n < 2:
        return (n,)
    best = None
    for perm in itertools.permutations(range(n)):
        p = v[np.ix_(perm, perm)]
        key = tuple(np.round(p[np.triu_indices(n, 1)], decimals))
        if best is None or key < best:
            best = key
    return (n,) + best


@dataclass
class GateSimulation:
    model: EnsembleModel
    inputs: dict[int, int]  # input index -> block index inside the stacked model
    n_qubits: int

    def amplitudes(self, y: np.ndarray) -> np.ndarray:
        """Diagonal amplitudes ``a_x`` from a final state, shape ``batch + (2^n,)``."""
        out = np.ones(y.shape[:-1] + (2**self.n_qubits,), dtype=complex)
        for x, b in self.inputs.items():
            out[..., x] = y[..., self.model.blocks[b].start]
        return out


def build_gate_model(
    kind: str,
    scheme: LevelScheme,
    schedule: PulseSchedule,
    vmap: InteractionMap,
    *,
    perturbations: Sequence[Perturbation] = (NOMINAL,),
    noise: NoiseRealization | None = None,
    dedup: bool = True,
) -> GateSimulation:
    n = vmap.n_atoms
    classes: dict[tuple, int] = {}
    models, counts, inputs = [], [], {}
    for x in range(1, 2**n):
        atoms = tuple(i for i, c in enumerate(bitstring(x, n)) if c == "1")
        v = vmap.restrict(atoms)
        key = block_signature(v) if dedup else (x,)
        if key not in classes:
            classes[key] = len(models)
            models.append(compose_ensemble(kind, scheme, schedule, v, atoms=atoms))
            counts.append(0)
        counts[classes[key]] += 1
        inputs[x] = classes[key]
    weights = [c / 2**n for c in counts]
    model = stack(models, weights, idle_weight=1.0 / 2**n)
    model = model.with_batch(perturbations, noise)
    return GateSimulation(model, inputs, n)


def simulate_gate(
    scheme: LevelScheme,
    schedule: PulseSchedule,
    vmap: InteractionMap,
    kind: str = REDUCED,
    *,
    perturbations: Sequence[Perturbation] = (NOMINAL,),
    noise: NoiseRealization | None = None,
    tol: float = DEFAULT_TOL,
    n_samples: int | None = None,
    optimize_phase: bool = True,
    method: str = "dop853",
) -> list[GateResult]:
    """Evolve every computational input and evaluate the gate.

    Returns one :class:`GateResult` per batch member (perturbation or
    noise shot). With *n_samples* set, the uniform-superposition trace is
    attached to each result under ``traces["trace"]``.
    """
    sim = build_gate_model(kind, scheme, schedule, vmap, perturbations=perturbations, noise=noise)
    state, trace = evolve(sim.model, tol=tol, n_samples=n_samples, method=method)
    amps = sim.amplitudes(np.atleast_2d(state.amplitudes))
    results = []
    for i, a in enumerate(amps):
        traces = {}
        if trace is not None:
            traces["trace"] = trace if amps.shape[0] == 1 else _member_trace(trace, i)
        results.append(evaluate_gate(a, optimize_phase, traces=traces))
    return results


def _member_trace(trace: Trace, i: int) -> Trace:
    return Trace(trace.t, trace.norm[:, i], trace.p_e[:, i], trace.levels[:, i], trace.level_names,
                 trace.block_norms[:, i])
