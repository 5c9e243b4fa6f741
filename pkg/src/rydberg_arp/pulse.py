"""Two-pulse adiabatic-rapid-passage drive.

Every schedule function accepts a scalar time or a numpy array of times
(microseconds) and returns values of matching shape.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .atomdata import LevelScheme, stark_shifts

_T_EPS = 1e-12


class PulseError(ValueError):
    """Raised for invalid pulse parameters or out-of-window evaluation."""


@dataclass(frozen=True)
class ArpParams:
    """Parameters of the two consecutive ARP pulses.

    ``omega0`` is the peak effective Rabi frequency and ``ir`` the fixed
    intensity of the upper-leg laser. Detuning amplitudes and Rabi
    frequency are in MHz, durations and widths in us.
    """

    t1: float
    t2: float
    tau1: float
    tau2: float
    delta_r1: float
    delta_r2: float
    omega0: float
    ir: float

    def __post_init__(self) -> None:
        for name in ("t1", "t2", "tau1", "tau2", "omega0", "ir"):
            if not getattr(self, name) > 0:
                raise PulseError(f"{name} must be positive")

    @property
    def duration(self) -> float:
        return self.t1 + self.t2

    @classmethod
    def from_ratios(
        cls,
        t1: float,
        t2: float,
        t1_over_tau1: float,
        t2_over_tau2: float,
        delta_r1: float,
        delta_r2: float,
        omega0: float,
        ir: float,
    ) -> "ArpParams":
        return cls(t1, t2, t1 / t1_over_tau1, t2 / t2_over_tau2, delta_r1, delta_r2, omega0, ir)


@dataclass(frozen=True)
class DcrabEnvelope:
    """Truncated randomized Fourier envelope ``g(t)`` applied to the Rabi frequency."""

    a: tuple[float, ...]
    b: tuple[float, ...]
    r: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", tuple(float(x) for x in self.a))
        object.__setattr__(self, "b", tuple(float(x) for x in self.b))
        object.__setattr__(self, "r", tuple(float(x) for x in self.r))
        if not len(self.a) == len(self.b) == len(self.r):
            raise PulseError("envelope coefficient lists must have equal length")

    @property
    def n_modes(self) -> int:
        return len(self.a)

    @classmethod
    def unit(cls, n_modes: int = 6, r: Sequence[float] | None = None) -> "DcrabEnvelope":
        zeros = (0.0,) * n_modes
        return cls(zeros, zeros, tuple(r) if r is not None else zeros)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.a, self.b, self.r])

    @classmethod
    def from_vector(cls, x: Sequence[float]) -> "DcrabEnvelope":
        x = np.asarray(x, dtype=float)
        n = len(x) // 3
        return cls(tuple(x[:n]), tuple(x[n : 2 * n]), tuple(x[2 * n : 3 * n]))


#: Envelope coefficients of the optimised CCZ pulse (N = 6).
TABLE_II_ENVELOPE = DcrabEnvelope(
    a=(-0.0859, 0.0145, 0.3612, -0.2605, 0.4847, 0.05360),
    b=(-0.7250, -1.7963, 0.9775, -0.4293, 0.5623, -0.5406),
    r=(0.3930, 0.0402, 0.0597, 0.3959, -0.2616, -0.2132),
)


def _window(params: ArpParams, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(t < -_T_EPS) or np.any(t > params.duration + _T_EPS):
        raise PulseError(f"time outside the gate window [0, {params.duration}] us")
    return t


def _split(params: ArpParams, t: np.ndarray):
    """Pulse index mask and pulse-local time; ``t == t1`` belongs to pulse 1."""
    second = t > params.t1
    local = np.where(second, t - params.t1, t)
    return second, local


def _quartic_bell(local, width, tau):
    # the floor uses the same expression as the bell so edges vanish exactly
    half = width / 2
    floor = np.exp(-((half / tau) ** 4))
    return (np.exp(-(((local - half) / tau) ** 4)) - floor) / (1 - floor)


def analytic_omega(params: ArpParams, t):
    """Super-Gaussian Rabi frequency, vanishing at 0, t1 and t1 + t2."""
    t = _window(params, t)
    second, local = _split(params, t)
    width = np.where(second, params.t2, params.t1)
    tau = np.where(second, params.tau2, params.tau1)
    local = np.clip(local, 0.0, width)
    out = params.omega0 * _quartic_bell(local, width, tau)
    return out if out.ndim else float(out)


def analytic_delta_r(params: ArpParams, t):
    """Effective detuning ``-delta_R^i cos(pi t'/T_i)`` on each pulse.

    Both pulses sweep in the same direction, so the detuning jumps from
    ``+delta_r1`` to ``-delta_r2`` at ``t1``.
    """
    t = _window(params, t)
    second, local = _split(params, t)
    width = np.where(second, params.t2, params.t1)
    amp = np.where(second, params.delta_r2, params.delta_r1)
    out = -amp * np.cos(np.pi * local / width)
    return out if out.ndim else float(out)


def envelope(params: ArpParams, env: DcrabEnvelope, t):
    """Envelope ``g(t)``; Fourier frequencies are ``2 pi k r_k / T_i``."""
    t = _window(params, t)
    second, local = _split(params, t)
    width = np.where(second, params.t2, params.t1)
    k = np.arange(1, env.n_modes + 1)
    omega = 2 * np.pi * k * np.asarray(env.r)
    phase = np.multiply.outer(local / width, omega)
    out = 1.0 + np.cos(phase) @ np.asarray(env.a) + np.sin(phase) @ np.asarray(env.b)
    return out if out.ndim else float(out)


def dcrab_omega(params: ArpParams, env: DcrabEnvelope, t):
    """Envelope-shaped Rabi frequency; may be negative (pi phase flip)."""
    out = np.asarray(envelope(params, env, t)) * np.asarray(analytic_omega(params, t))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class PulseSchedule:
    params: ArpParams
    envelope: DcrabEnvelope | None = None

    @property
    def duration(self) -> float:
        return self.params.duration

    def omega(self, t):
        if self.envelope is None:
            return analytic_omega(self.params, t)
        return dcrab_omega(self.params, self.envelope, t)

    def delta_r(self, t):
        return analytic_delta_r(self.params, t)

    def peak_omega(self, n: int = 20001) -> float:
        ts = np.linspace(0.0, self.duration, n)
        return float(np.max(np.abs(self.omega(ts))))


def intensity_schedule(scheme: LevelScheme, schedule: PulseSchedule, t):
    """Laser intensities ``(I1(t), Ir)`` realising the target Rabi frequency."""
    cal = scheme.calibration
    ir = schedule.params.ir
    if ir <= 0:
        raise PulseError("upper-leg intensity must be positive")
    om = np.asarray(schedule.omega(t))
    i1 = (om / cal.c_omega) ** 2 / ir
    return (i1 if i1.ndim else float(i1)), ir


def two_photon_detuning(scheme: LevelScheme, schedule: PulseSchedule, t):
    """Laser two-photon detuning ``delta = delta_R - Delta_1 + Delta_r``."""
    i1, ir = intensity_schedule(scheme, schedule, t)
    d1, dr = stark_shifts(scheme.calibration, i1, ir)
    out = np.asarray(schedule.delta_r(t)) - d1 + dr
    return out if out.ndim else float(out)


def schedule_table(scheme: LevelScheme, schedule: PulseSchedule, n: int = 2000) -> dict[str, np.ndarray]:
    ts = np.linspace(0.0, schedule.duration, n)
    i1, _ = intensity_schedule(scheme, schedule, ts)
    return {
        "t_us": ts,
        "omega_r_mhz": np.asarray(schedule.omega(ts)),
        "delta_r_mhz": np.asarray(schedule.delta_r(ts)),
        "delta_mhz": np.asarray(two_photon_detuning(scheme, schedule, ts)),
        "i1_mw_per_um2": np.asarray(i1),
    }


def write_schedule_csv(path: str | Path, scheme: LevelScheme, schedule: PulseSchedule, n: int = 2000) -> Path:
    table = schedule_table(scheme, schedule, n)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(table))
        for row in zip(*table.values()):
            w.writerow([f"{v:.12g}" for v in row])
    return path


# ---------------------------------------------------------------------------
# laser phase noise


@dataclass(frozen=True)
class PhaseNoiseModel:
    """White frequency noise giving a Lorentzian line of FWHM ``fwhm`` (MHz)."""

    fwhm: float
    dt_noise: float = 1e-3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.fwhm < 0:
            raise PulseError("linewidth must be non-negative")
        if not self.dt_noise > 0:
            raise PulseError("noise sampling step must be positive")


@dataclass(frozen=True)
class NoiseRealization:
    """Piecewise-constant laser phases on a uniform grid.

    ``phi1[..., k]`` holds on ``[k dt, (k+1) dt)``. Leading axes, if any,
    index independent shots.
    """

    dt: float
    phi1: np.ndarray
    phi2: np.ndarray = field(repr=False)

    @property
    def n_shots(self) -> int:
        return 1 if self.phi1.ndim == 1 else self.phi1.shape[0]

    def breakpoints(self, t0: float, t1: float) -> np.ndarray:
        k = np.arange(1, self.phi1.shape[-1]) * self.dt
        return k[(k > t0) & (k < t1)]

    def index(self, t) -> np.ndarray:
        return np.clip(np.floor(np.asarray(t) / self.dt + 1e-9).astype(int), 0, self.phi1.shape[-1] - 1)

    def phases(self, t):
        """``(phi1(t), phi2(t))`` with the grid rule above."""
        k = self.index(t)
        return self.phi1[..., k], self.phi2[..., k]

    def shot(self, i: int) -> "NoiseRealization":
        if self.phi1.ndim == 1:
            return self
        return NoiseRealization(self.dt, self.phi1[i], self.phi2[i])


def _wiener(rng: np.random.Generator, fwhm: float, dt: float, shape: tuple[int, ...]) -> np.ndarray:
    steps = rng.normal(0.0, np.sqrt(2 * np.pi * fwhm * dt), size=shape)
    steps[..., 0] = 0.0
    return np.cumsum(steps, axis=-1)


def sample_phase_noise(model: PhaseNoiseModel, duration: float, n_shots: int | None = None) -> NoiseRealization:
    """Draw independent Wiener phase trajectories for the two lasers.

    Increments have variance ``2 pi fwhm dt``, so ``<exp(i phi(t))>``
    decays as ``exp(-pi fwhm t)``. With *n_shots* given the arrays gain a
    leading shot axis. Deterministic in ``model.seed``.
    """
    if not duration > 0:
        raise PulseError("duration must be positive")
    n = int(np.ceil(duration / model.dt_noise - 1e-9)) + 1
    shape = (n,) if n_shots is None else (n_shots, n)
    if model.fwhm == 0:
        return NoiseRealization(model.dt_noise, np.zeros(shape), np.zeros(shape))
    rng = np.random.default_rng(model.seed)
    phi1 = _wiener(rng, model.fwhm, model.dt_noise, shape)
    phi2 = _wiener(rng, model.fwhm, model.dt_noise, shape)
    return NoiseRealization(model.dt_noise, phi1, phi2)
