"""Dissipative Schroedinger propagation of ensemble models.

Hamiltonians come in MHz (``/2pi``); the generator integrated here is
``-2 pi i H(t)``. Laser phase noise is handled in a rotating gauge: the
phases are piecewise constant, so between noise-grid points the state
evolves under the noiseless Hamiltonian and at each grid point it picks
up a diagonal phase kick.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .integrate import IntegrationError, integrate_linear
from .model import EnsembleModel

TWO_PI = 2 * np.pi
DEFAULT_TOL = 1e-9
DEFAULT_SAMPLES = 2000

__all__ = ["QuantumState", "Trace", "evolve", "evolve_protocol", "IntegrationError", "write_trace_csv"]


@dataclass
class QuantumState:
    """Amplitudes over a model basis; shape ``(d,)`` or ``(S, d)`` for a batch."""

    amplitudes: np.ndarray
    t: float = 0.0

    @property
    def norm(self) -> np.ndarray:
        return np.sum(np.abs(self.amplitudes) ** 2, axis=-1)


@dataclass
class Trace:
    """Superposition observables sampled during a propagation.

    ``norm`` is ``<Psi|Psi>`` of the weighted superposition of all blocks
    (plus ``idle_weight``), ``p_d = 1 - norm``, ``p_e`` the intermediate
    population and ``levels[:, l]`` the mean number of atoms in level ``l``.
    Arrays gain a trailing batch axis for batched propagation.
    """

    t: np.ndarray
    norm: np.ndarray
    p_e: np.ndarray
    levels: np.ndarray
    level_names: tuple[str, ...] = ()
    block_norms: np.ndarray = field(default=None, repr=False)

    @property
    def p_d(self) -> np.ndarray:
        return 1.0 - self.norm


def _noise_kick(model: EnsembleModel):
    noise = model.noise
    w1, w2 = model.phase_weights()

    def kick(t: float, y: np.ndarray) -> np.ndarray:
        k = int(round(t / noise.dt))
        if abs(t - k * noise.dt) > 1e-9 * noise.dt:
            return y  # a pulse boundary, not a noise step
        d1 = noise.phi1[..., k] - noise.phi1[..., k - 1]
        d2 = noise.phi2[..., k] - noise.phi2[..., k - 1]
        ph = np.multiply.outer(np.atleast_1d(d1), w1) + np.multiply.outer(np.atleast_1d(d2), w2)
        return y * np.exp(-1j * ph)

    return kick


def _gauge(model: EnsembleModel, t: float, sign: float, y: np.ndarray, before: bool = False) -> np.ndarray:
    """Multiply by ``exp(sign * i * (w1 phi1 + w2 phi2))`` at time *t*."""
    noise = model.noise
    if noise is None:
        return y
    w1, w2 = model.phase_weights()
    t_eval = max(t - 0.5 * noise.dt, 0.0) if before else t
    p1, p2 = noise.phases(t_eval)
    ph = np.multiply.outer(np.atleast_1d(p1), w1) + np.multiply.outer(np.atleast_1d(p2), w2)
    return y * np.exp(sign * 1j * ph)


def _trace(model: EnsembleModel, ts: np.ndarray, samples: np.ndarray) -> Trace:
    # samples: (n, S, d)
    pops = np.abs(samples) ** 2
    block_norms = np.stack([pops[..., b.start : b.start + b.dim].sum(axis=-1) for b in model.blocks], axis=-1)
    weights = np.array([b.weight for b in model.blocks])
    norm = model.idle_weight + block_norms @ weights
    bw = np.zeros(model.dim)
    for b in model.blocks:
        bw[b.start : b.start + b.dim] = b.weight
    pe_w = model.intermediate_weights(ts) * bw  # (n, d)
    p_e = np.einsum("nsd,nd->ns", pops, pe_w)
    levels = np.einsum("nsd,dl->nsl", pops * bw, model.counts)
    if samples.shape[1] == 1:
        norm, p_e, levels, block_norms = norm[:, 0], p_e[:, 0], levels[:, 0], block_norms[:, 0]
    names = model.blocks[0].basis.levels
    return Trace(ts, norm, p_e, levels, names, block_norms)


def evolve(
    model: EnsembleModel,
    initial: QuantumState | np.ndarray | None = None,
    t0: float = 0.0,
    t1: float | None = None,
    tol: float = DEFAULT_TOL,
    *,
    method: str = "dop853",
    n_samples: int | None = DEFAULT_SAMPLES,
    atol: float | None = None,
) -> tuple[QuantumState, Trace | None]:
    """Propagate *initial* from *t0* to *t1* under ``model``.

    The default initial state puts every active atom in |1>. For batched
    models (several perturbations or noise shots) the state gains a
    leading batch axis. *tol* bounds the local error per unit time
    (per microsecond), relative to the amplitudes; the absolute tolerance
    defaults to the same value (amplitudes are at most one).
    """
    if t1 is None:
        t1 = model.schedule.duration
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    if isinstance(initial, QuantumState):
        t0 = initial.t
        y0 = initial.amplitudes
    elif initial is None:
        y0 = model.initial_state()
    else:
        y0 = np.asarray(initial, dtype=complex)
    batch = model.batch
    if y0.ndim == 1 and batch > 1:
        y0 = np.broadcast_to(y0, (batch, y0.shape[0])).copy()

    def generator(ts):
        return -1j * TWO_PI * model.hamiltonians(ts)

    # the effective detuning jumps between the two pulses
    params = getattr(model.schedule, "params", None)
    breakpoints = [params.t1] if params is not None else []
    kick = None
    if model.noise is not None:
        breakpoints = np.union1d(breakpoints, model.noise.breakpoints(t0, t1))
        kick = _noise_kick(model)
        y0 = _gauge(model, t0, -1.0, y0)
    sample_times = None if not n_samples else np.linspace(t0, t1, n_samples)
    res = integrate_linear(
        generator,
        y0,
        t0,
        t1,
        rtol=tol,
        atol=tol if atol is None else atol,
        method=method,
        breakpoints=breakpoints,
        kick=kick,
        sample_times=sample_times,
        per_unit_time=True,
    )
    y = res.y
    samples = res.samples
    if model.noise is not None:
        y = _gauge(model, t1, 1.0, y, before=True)
    trace = None
    if samples is not None:
        if samples.ndim == 2:
            samples = samples[:, None, :]
        trace = _trace(model, sample_times, samples)
    return QuantumState(y, t1), trace


def evolve_protocol(model: EnsembleModel, initial: QuantumState | np.ndarray | None = None,
                    tol: float = DEFAULT_TOL, **kwargs) -> tuple[QuantumState, Trace | None]:
    """Run both ARP pulses as one continuous integration over ``[0, T1 + T2]``."""
    return evolve(model, initial, 0.0, model.schedule.duration, tol, **kwargs)


def write_trace_csv(path: str | Path, trace: Trace, levels: bool = False) -> Path:
    path = Path(path)
    cols = {"t_us": trace.t, "P_e": trace.p_e, "P_d": trace.p_d, "norm": trace.norm}
    if levels:
        for i, name in enumerate(trace.level_names):
            cols[f"pop_{name}"] = trace.levels[:, i]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(cols))
        for row in zip(*cols.values()):
            w.writerow([f"{v:.12g}" for v in row])
    return path
