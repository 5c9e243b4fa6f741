"""Derivative-free optimisation of ARP pulse parameters and dCRAB envelopes.

The simplex search itself is scipy's bounded Nelder-Mead; this module adds
named, bounded parameter vectors, restarts from seeded simplices,
rejection of non-finite objective values and a best-so-far history.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize as _scipy_minimize

from .atomdata import InteractionMap, LevelScheme
from .gate import simulate_gate
from .model import REDUCED
from .pulse import ArpParams, DcrabEnvelope, PulseSchedule

log = logging.getLogger(__name__)

REJECTED = 1e3  # objective value substituted for non-finite evaluations

ANALYTIC_NAMES = ("delta_int", "t1", "t2", "t1_over_tau1", "t2_over_tau2", "delta_r1", "delta_r2", "i1_scale")


class OptimizerError(RuntimeError):
    pass


@dataclass(frozen=True)
class ParameterVector:
    """Named real parameters with box bounds."""

    names: tuple[str, ...]
    values: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        for attr in ("values", "lower", "upper"):
            object.__setattr__(self, attr, np.asarray(getattr(self, attr), dtype=float).copy())
        n = len(self.names)
        if not (self.values.shape == self.lower.shape == self.upper.shape == (n,)):
            raise OptimizerError("names, values and bounds must have equal length")
        if np.any(self.lower > self.upper):
            raise OptimizerError("lower bound above upper bound")
        if np.any(self.values < self.lower) or np.any(self.values > self.upper):
            raise OptimizerError("initial values outside bounds")

    def __len__(self) -> int:
        return len(self.names)

    def with_values(self, values) -> "ParameterVector":
        return replace(self, values=np.clip(values, self.lower, self.upper))

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, map(float, self.values)))


def analytic_preset(params: ArpParams, delta_int: float) -> ParameterVector:
    """Analytic-pulse vector seeded at *params* with default bounds.

    Durations and duration ratios may change by a factor of two either way.
    The intermediate detuning may change by a factor of three either way
    and the two-photon detunings by up to three times the seed, sign
    included. The lower-leg intensity scale spans a factor of nine either
    way, enough to hold the Rabi frequency (proportional to
    ``sqrt(I1) / delta_int``) fixed over the whole detuning range.
    """
    seed = np.array([
        delta_int, params.t1, params.t2, params.t1 / params.tau1, params.t2 / params.tau2,
        params.delta_r1, params.delta_r2, 1.0,
    ])
    lower = np.array([seed[0] / 3, seed[1] / 2, seed[2] / 2, seed[3] / 2, seed[4] / 2, -3 * seed[5], -3 * seed[6], 1 / 9])
    upper = np.array([seed[0] * 3, seed[1] * 2, seed[2] * 2, seed[3] * 2, seed[4] * 2, 3 * seed[5], 3 * seed[6], 9.0])
    return ParameterVector(ANALYTIC_NAMES, seed, np.minimum(lower, upper), np.maximum(lower, upper))


def apply_analytic(vec: ParameterVector, base: ArpParams, scheme: LevelScheme) -> tuple[ArpParams, LevelScheme]:
    """Pulse parameters and level scheme described by an analytic vector.

    The peak Rabi frequency follows the calibration at the new detuning for
    the base intensities times ``i1_scale``.
    """
    v = vec.as_dict()
    cal = scheme.calibration.with_detuning(v["delta_int"])
    new_scheme = LevelScheme(cal) if not scheme.resolved else scheme
    i1 = (base.omega0 / scheme.calibration.c_omega) ** 2 / base.ir
    omega0 = cal.c_omega * np.sqrt(i1 * v["i1_scale"] * base.ir)
    params = ArpParams.from_ratios(v["t1"], v["t2"], v["t1_over_tau1"], v["t2_over_tau2"],
                                   v["delta_r1"], v["delta_r2"], omega0, base.ir)
    return params, new_scheme


def dcrab_preset(envelope: DcrabEnvelope, coeff_bound: float = 2.0, r_bound: float = 0.5) -> ParameterVector:
    n = envelope.n_modes
    names = tuple(f"a{k}" for k in range(1, n + 1)) + tuple(f"b{k}" for k in range(1, n + 1)) + tuple(
        f"r{k}" for k in range(1, n + 1))
    lower = np.r_[np.full(2 * n, -coeff_bound), np.full(n, -r_bound)]
    upper = -lower
    values = np.clip(envelope.to_vector(), lower, upper)
    return ParameterVector(names, values, lower, upper)


@dataclass
class MinimizeOptions:
    max_evals: int = 2000
    xatol: float = 1e-6
    fatol: float = 1e-9
    restarts: int = 0
    initial_step: float = 0.05  # fraction of the bound span per simplex edge
    seed: int = 0


@dataclass
class OptimizationReport:
    best: ParameterVector
    best_objective: float
    n_evals: int
    history: np.ndarray  # best-so-far objective after each evaluation
    objectives: np.ndarray = field(repr=False, default=None)  # raw objective per evaluation
    n_rejected: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "best": self.best.as_dict(),
            "best_objective": self.best_objective,
            "n_evals": self.n_evals,
            "n_rejected": self.n_rejected,
            **self.extra,
        }

    def write_history_csv(self, path: str | Path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["eval", "objective", "best_so_far"])
            for i, (f, b) in enumerate(zip(self.objectives, self.history)):
                w.writerow([i + 1, f"{f:.15g}", f"{b:.15g}"])
        return path


class _Budget(Exception):
    pass


def _simplex(x0, lower, upper, step, rng):
    span = np.where(np.isfinite(upper - lower), upper - lower, np.maximum(np.abs(x0), 1.0))
    n = len(x0)
    sx = np.tile(x0, (n + 1, 1))
    signs = np.ones(n) if rng is None else rng.choice([-1.0, 1.0], size=n)
    for i in range(n):
        d = signs[i] * step * span[i]
        if not lower[i] <= x0[i] + d <= upper[i]:
            d = -d
        sx[i + 1, i] += d
    return np.clip(sx, lower, upper)


def minimize(objective: Callable[[np.ndarray], float], x0: ParameterVector,
             options: MinimizeOptions | None = None) -> OptimizationReport:
    """Bounded Nelder-Mead with seeded restarts.

    Each restart starts from the incumbent with a fresh simplex whose edge
    directions are drawn from ``options.seed``. Non-finite objective values
    are logged and replaced by a large penalty, so the simplex moves away.
    """
    opts = options or MinimizeOptions()
    rng = np.random.default_rng(opts.seed)
    free = x0.lower < x0.upper  # pinned parameters are not searched
    lo, hi = x0.lower[free], x0.upper[free]
    full = x0.values.copy()
    objectives: list[float] = []
    best = {"x": x0.values.copy(), "f": np.inf}
    n_rej = 0

    def wrapped(xf):
        nonlocal n_rej
        if len(objectives) >= opts.max_evals:
            raise _Budget
        x = full.copy()
        x[free] = np.clip(xf, lo, hi)
        try:
            f = float(objective(x))
        except (ArithmeticError, ValueError, RuntimeError) as exc:
            log.warning("objective failed at %s: %s", x, exc)
            f = np.nan
        if not np.isfinite(f):
            n_rej += 1
            log.warning("rejected non-finite objective at %s", x)
            objectives.append(np.inf)
            return REJECTED
        objectives.append(f)
        if f < best["f"]:
            best["x"], best["f"] = x.copy(), f
        return f

    wrapped(x0.values[free])
    if n_rej:
        raise OptimizerError("objective is not finite at the initial point")
    for attempt in range(opts.restarts + 1 if free.any() else 0):
        xs = best["x"][free]
        sx = _simplex(xs, lo, hi, opts.initial_step, None if attempt == 0 else rng)
        f_before = best["f"]
        try:
            _scipy_minimize(
                wrapped, xs, method="Nelder-Mead", bounds=list(zip(lo, hi)),
                options={"initial_simplex": sx, "xatol": opts.xatol, "fatol": opts.fatol,
                         "maxfev": opts.max_evals, "adaptive": len(lo) > 4},
            )
        except _Budget:
            break
        if attempt and f_before - best["f"] <= opts.fatol:
            break
    raw = np.array(objectives)
    history = np.minimum.accumulate(raw)
    return OptimizationReport(x0.with_values(best["x"]), float(best["f"]), len(raw), history, raw, n_rej)


# ---------------------------------------------------------------------------
# gate objectives


def gate_infidelity(scheme: LevelScheme, schedule: PulseSchedule, vmap: InteractionMap, kind: str = REDUCED,
                    tol: float = 1e-8) -> float:
    """``1 - F`` with the corrective phase re-optimised."""
    return 1.0 - simulate_gate(scheme, schedule, vmap, kind, tol=tol)[0].fidelity


def analytic_objective(base: ArpParams, scheme: LevelScheme, vmap: InteractionMap, vec: ParameterVector,
                       tol: float = 1e-8) -> Callable[[np.ndarray], float]:
    def f(x):
        params, sch = apply_analytic(vec.with_values(x), base, scheme)
        return gate_infidelity(sch, PulseSchedule(params), vmap, REDUCED, tol)

    return f


def dcrab_objective(base: ArpParams, scheme: LevelScheme, vmap: InteractionMap,
                    tol: float = 1e-8) -> Callable[[np.ndarray], float]:
    def f(x):
        return gate_infidelity(scheme, PulseSchedule(base, DcrabEnvelope.from_vector(x)), vmap, REDUCED, tol)

    return f


def dcrab_search(
    base: ArpParams,
    scheme: LevelScheme,
    vmap: InteractionMap,
    super_iterations: int,
    seed: int = 0,
    *,
    n_modes: int = 6,
    initial: DcrabEnvelope | None = None,
    options: MinimizeOptions | None = None,
    tol: float = 1e-8,
    objective: Callable[[np.ndarray], float] | None = None,
) -> OptimizationReport:
    """Simplified dCRAB: restarts of the envelope search from random ``r_k``.

    The starting envelope (unit by default) is evaluated first, so the
    result is never worse than it. Each super-iteration keeps the best
    ``A_k, B_k`` found so far and draws fresh ``r_k`` uniformly within
    bounds before running :func:`minimize`.
    """
    rng = np.random.default_rng(seed)
    env0 = initial or DcrabEnvelope.unit(n_modes)
    vec = dcrab_preset(env0)
    f = objective or dcrab_objective(base, scheme, vmap, tol)
    opts = options or MinimizeOptions(seed=seed)
    best_x, best_f = vec.values.copy(), float(f(vec.values))
    raw = [best_f]
    n = env0.n_modes
    for it in range(super_iterations):
        x_start = best_x.copy()
        x_start[2 * n :] = rng.uniform(vec.lower[2 * n :], vec.upper[2 * n :])
        start = vec.with_values(x_start)
        rep = minimize(f, start, replace(opts, seed=int(rng.integers(2**31))))
        raw.extend(rep.objectives)
        log.info("dCRAB super-iteration %d: best %.6g", it + 1, rep.best_objective)
        if rep.best_objective < best_f:
            best_x, best_f = rep.best.values.copy(), rep.best_objective
    raw = np.array(raw)
    return OptimizationReport(vec.with_values(best_x), best_f, len(raw), np.minimum.accumulate(raw), raw,
                              extra={"super_iterations": super_iterations})


def optimize_analytic(base: ArpParams, scheme: LevelScheme, vmap: InteractionMap,
                      options: MinimizeOptions | None = None, tol: float = 1e-8,
                      fixed: Sequence[str] = ()) -> OptimizationReport:
    """Optimise the analytic preset; parameters named in *fixed* keep their seed value."""
    vec = analytic_preset(base, scheme.calibration.delta_int)
    lower, upper = vec.lower.copy(), vec.upper.copy()
    for name in fixed:
        i = vec.names.index(name)
        lower[i] = upper[i] = vec.values[i]
    vec = ParameterVector(vec.names, vec.values, lower, upper)
    return minimize(analytic_objective(base, scheme, vmap, vec, tol), vec, options)
