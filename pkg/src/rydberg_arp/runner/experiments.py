"""Experiment drivers: gates, sweeps, phase-noise Monte Carlo, CZ optimisation."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

from ..atomdata import InteractionMap, interaction_map
from ..fidelity import GateResult, evaluate_gate
from ..gate import simulate_gate
from ..model import REDUCED, Perturbation
from ..optimizer import MinimizeOptions, OptimizationReport, apply_analytic, dcrab_search, optimize_analytic
from ..propagator import Trace
from ..pulse import PhaseNoiseModel, PulseSchedule, sample_phase_noise
from .config import ExperimentConfig
from .decomposition import assemble_ccz, check_identity, circuit_fidelity

THREADS_ENV = "RYDBERG_ARP_THREADS"

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1") or 1)
    return max(1, int(threads))


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: int | None = None) -> list[R]:
    """Order-preserving map over a bounded thread pool."""
    items = list(items)
    n = resolve_threads(threads)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))


CHUNK = 25  # batch members integrated together; fixed so results do not depend on the thread count


def _chunks(seq: Sequence[T], size: int = CHUNK) -> list[Sequence[T]]:
    return [seq[i : i + size] for i in range(0, len(seq), size)]


# ---------------------------------------------------------------------------
# gates


def run_gate(cfg: ExperimentConfig, *, kind: str | None = None, vmap: InteractionMap | None = None,
             schedule: PulseSchedule | None = None, traces: bool = True) -> GateResult:
    """Evolve every computational input of the configured gate and evaluate it."""
    return simulate_gate(
        cfg.scheme,
        schedule or cfg.schedule,
        vmap or cfg.interactions,
        kind or cfg.model,
        tol=cfg.tol,
        method=cfg.method,
        n_samples=cfg.trace_samples if traces else None,
    )[0]


def run_cccz(cfg: ExperimentConfig, **kwargs) -> GateResult:
    if cfg.interactions.n_atoms != 4:
        raise ValueError("CCCZ needs a 4-atom interaction map")
    return run_gate(cfg, **kwargs)


@dataclass
class SweepTable:
    columns: tuple[str, ...]
    rows: list[tuple[float, ...]]
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows])


def robustness_sweep(cfg: ExperimentConfig, threads: int | None = None, batched: bool = False) -> SweepTable:
    """Fidelity on a grid of relative intensity and detuning offsets.

    By default every grid point is integrated on its own, so the nominal
    point reproduces :func:`run_gate` exactly. With *batched* set, groups
    of points share one integration (one Hamiltonian per batch member);
    results then agree with the per-point ones to integrator tolerance.
    The grid contains (0, 0) when the number of points per axis is odd.
    """
    spec = cfg.robustness
    ei = np.linspace(-spec.intensity_rel_max, spec.intensity_rel_max, spec.n_intensity)
    ed = np.linspace(-spec.detuning_rel_max, spec.detuning_rel_max, spec.n_detuning)
    grid = [(float(a), float(b)) for a in ei for b in ed]

    def work(points):
        perts = [Perturbation(a, b) for a, b in points]
        res = simulate_gate(cfg.scheme, cfg.schedule, cfg.interactions, cfg.model, perturbations=perts,
                            tol=cfg.tol, method=cfg.method)
        return [(a, b, r.fidelity, r.phi) for (a, b), r in zip(points, res)]

    groups = _chunks(grid) if batched else [[g] for g in grid]
    rows = [row for part in parallel_map(work, groups, threads) for row in part]
    return SweepTable(("intensity_rel", "detuning_rel", "fidelity", "phi_rad"), rows)


def _scaled_map(base: InteractionMap, v) -> InteractionMap:
    """Interaction map for one blockade-sweep point.

    A matrix is used as given; a scalar rescales the base map so that its
    strongest pair equals the scalar.
    """
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 2:
        return interaction_map(arr)
    return base.scaled(float(arr) / float(np.max(base.v_rr)))


def blockade_sweep(cfg: ExperimentConfig, threads: int | None = None) -> SweepTable:
    """Fidelity (corrective phase re-optimised) at each configured separation."""
    spec = cfg.blockade
    if not spec.distances_um:
        raise ValueError("blockade sweep needs distances_um and v_rr_mhz")

    def work(item):
        d, v = item
        vmap = _scaled_map(cfg.interactions, v)
        r = run_gate(cfg, vmap=vmap, traces=False)
        return (float(d), float(np.max(vmap.v_rr)), r.fidelity, r.phi)

    rows = parallel_map(work, list(zip(spec.distances_um, spec.v_rr_mhz)), threads)
    return SweepTable(("distance_um", "v_rr_mhz", "fidelity", "phi_rad"), rows)


def noise_seed(seed: int) -> int:
    return int(np.random.SeedSequence([seed, 0x4E4F]).generate_state(1)[0])


def noise_monte_carlo(cfg: ExperimentConfig, threads: int | None = None,
                      fwhm_hz: Sequence[float] | None = None, n_shots: int | None = None) -> tuple[SweepTable, SweepTable]:
    """Mean and spread of the fidelity under laser phase noise.

    All linewidths reuse the same seeded white-noise draws (common random
    numbers), so trajectories scale as ``sqrt(fwhm)`` and differences between
    linewidths are not masked by sampling noise. Shots are integrated in
    batches sharing the noiseless Hamiltonian. A zero linewidth is the
    noiseless gate, evaluated once. The reduced model is always used.
    Returns the summary table and the per-shot table.
    """
    spec = cfg.noise
    fwhm_hz = list(spec.fwhm_hz if fwhm_hz is None else fwhm_hz)
    n_shots = spec.n_shots if n_shots is None else n_shots
    summary, shots = [], []
    for f_hz in fwhm_hz:
        if f_hz == 0:
            f0 = run_gate(cfg, kind=REDUCED, traces=False).fidelity
            fids = np.full(n_shots, f0)
        else:
            model = PhaseNoiseModel(f_hz * 1e-6, spec.dt_noise_us, noise_seed(cfg.seed))
            noise = sample_phase_noise(model, cfg.params.duration, n_shots)

            def work(idx, noise=noise):
                sub = type(noise)(noise.dt, noise.phi1[idx], noise.phi2[idx])
                res = simulate_gate(cfg.scheme, cfg.schedule, cfg.interactions, REDUCED, noise=sub,
                                    tol=cfg.tol, method=cfg.method)
                return [r.fidelity for r in res]

            parts = parallel_map(work, _chunks(np.arange(n_shots)), threads)
            fids = np.array([f for p in parts for f in p])
        # noiseless shots are identical: report f0 itself, not a rounded mean
        mean = f0 if f_hz == 0 else float(np.mean(fids))
        std = 0.0 if f_hz == 0 else float(np.std(fids, ddof=1))
        summary.append((float(f_hz), mean, std, n_shots))
        shots.extend((float(f_hz), j, float(f)) for j, f in enumerate(fids))
    return (SweepTable(("fwhm_hz", "mean_fidelity", "std_fidelity", "n_shots"), summary),
            SweepTable(("fwhm_hz", "shot", "fidelity"), shots))


# ---------------------------------------------------------------------------
# optimisation


def _options(cfg: ExperimentConfig, seed: int | None = None) -> MinimizeOptions:
    o = cfg.optimizer
    return MinimizeOptions(max_evals=o.max_evals, xatol=o.xatol, fatol=o.fatol, restarts=o.restarts,
                           initial_step=o.initial_step, seed=cfg.seed if seed is None else seed)


@dataclass
class OptimizedGate:
    report: OptimizationReport
    config: ExperimentConfig
    result: GateResult


def optimize_analytic_gate(cfg: ExperimentConfig) -> OptimizedGate:
    """Optimise the analytic pulse family on the reduced model, then re-evaluate.

    The final evaluation uses the configured model kind and tolerance.
    """
    rep = optimize_analytic(cfg.params, cfg.scheme, cfg.interactions, _options(cfg), cfg.optimizer.tol,
                            fixed=cfg.optimizer.fixed)
    v = rep.best.as_dict()
    i1 = (cfg.params.omega0 / cfg.scheme.calibration.c_omega) ** 2 / cfg.params.ir
    new = cfg.with_overrides(
        calibration={"delta_int_mhz": v["delta_int"]},
        pulse={
            "t1_us": v["t1"], "t2_us": v["t2"],
            "t1_over_tau1": v["t1_over_tau1"], "t2_over_tau2": v["t2_over_tau2"],
            "delta_r1_mhz": v["delta_r1"], "delta_r2_mhz": v["delta_r2"],
            "i1_mw_per_um2": i1 * v["i1_scale"], "omega0_mhz": None,
        },
    )
    params, _ = apply_analytic(rep.best, cfg.params, cfg.scheme)
    if not np.isclose(new.params.omega0, params.omega0, rtol=1e-12):
        raise ValueError("optimised configuration does not reproduce the optimised pulse")
    return OptimizedGate(rep, new, run_gate(new))


def optimize_dcrab_gate(cfg: ExperimentConfig) -> OptimizedGate:
    """dCRAB envelope search on top of the configured analytic pulses."""
    rep = dcrab_search(cfg.params, cfg.scheme, cfg.interactions, cfg.optimizer.super_iterations, cfg.seed,
                       initial=cfg.envelope, options=_options(cfg), tol=cfg.optimizer.tol)
    n = len(rep.best) // 3
    vals = rep.best.values
    env = {"a": vals[:n].tolist(), "b": vals[n : 2 * n].tolist(), "r": vals[2 * n :].tolist()}
    new = cfg.with_overrides(pulse={"dcrab": env})
    return OptimizedGate(rep, new, run_gate(new))


def run_cz_optimization(cfg: ExperimentConfig) -> OptimizedGate:
    if cfg.gate != "CZ" or cfg.interactions.n_atoms != 2:
        raise ValueError("CZ optimisation needs gate CZ and a 2-atom map")
    return optimize_analytic_gate(cfg)


def cz_channel(result: GateResult) -> np.ndarray:
    """Diagonal 4x4 CZ channel including its corrective phase."""
    return np.diag(result.amplitudes * np.exp(1j * np.array([0, 1, 1, 2]) * result.phi))


@dataclass
class DecompositionResult:
    fidelity: float
    fidelity_ideal: float
    identity_deviation: float
    cz_fidelity: float
    heuristic: float
    matrix: np.ndarray = field(repr=False)


def run_decomposition(cz: GateResult | np.ndarray) -> DecompositionResult:
    """Assemble the six-CZ circuit from a simulated CZ and evaluate it."""
    dev = check_identity()
    if isinstance(cz, GateResult):
        f2q = cz.fidelity
        channel = cz_channel(cz)
    else:
        channel = np.asarray(cz, dtype=complex)
        f2q = evaluate_gate(np.diag(channel), optimize_phase=False).fidelity
    u = assemble_ccz(channel)
    return DecompositionResult(circuit_fidelity(u), circuit_fidelity(assemble_ccz(np.diag([1, -1, -1, -1]))),
                               dev, f2q, f2q**6, u)
