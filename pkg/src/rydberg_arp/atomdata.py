"""Atomic calibration data, level schemes and pair-interaction maps.

All frequencies are stored as ``/2pi`` values in MHz, times in microseconds
and laser intensities in mW/um^2. Conversion to angular frequency happens
only inside the propagator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np


class AtomDataError(ValueError):
    """Raised for invalid calibration, level-scheme or geometry data."""


@dataclass(frozen=True)
class CouplingCalibration:
    """Intensity-to-coupling coefficients for the two-photon ladder.

    Parameters
    ----------
    c_omega : float
        Effective Rabi coefficient ``Omega_R / sqrt(I1 * Ir)``, MHz um^2/mW.
    c_delta1, c_deltar : float
        Stark coefficients ``Delta_1 / I1`` and ``Delta_r / Ir``, MHz um^2/mW.
    c_pe1, c_per : float
        Intermediate-state population per unit intensity for the lower and
        upper legs, um^2/mW. ``None`` selects ``c_delta / delta_int``.
    gamma_e, gamma_r : float
        Decay rates of the intermediate and Rydberg states, MHz.
    delta_int : float
        Centre-of-mass detuning of the intermediate state, MHz.
    qubit_splitting : float, optional
        Qubit frequency, MHz. Recorded only; it never enters the dynamics.
    """

    c_omega: float
    c_delta1: float
    c_deltar: float
    gamma_e: float
    gamma_r: float
    delta_int: float
    c_pe1: float | None = None
    c_per: float | None = None
    qubit_splitting: float | None = None

    def __post_init__(self) -> None:
        if self.c_pe1 is None:
            object.__setattr__(self, "c_pe1", self.c_delta1 / self.delta_int if self.delta_int else None)
        if self.c_per is None:
            object.__setattr__(self, "c_per", self.c_deltar / self.delta_int if self.delta_int else None)
        if self.gamma_e < 0 or self.gamma_r < 0:
            raise AtomDataError("decay rates must be non-negative")
        if not self.c_omega > 0:
            raise AtomDataError("c_omega must be positive")
        if self.delta_int == 0:
            raise AtomDataError("intermediate-state detuning must be non-zero")
        if not (self.c_pe1 > 0 and self.c_per > 0):
            raise AtomDataError("intermediate-population coefficients must be positive")

    def with_detuning(self, delta_int: float) -> "CouplingCalibration":
        """Rescale to another intermediate detuning (far-detuned limit).

        Rabi and Stark coefficients scale as ``1/Delta`` and intermediate
        populations as ``1/Delta^2``. Valid while hyperfine splittings are
        small compared with ``Delta``.
        """
        s = self.delta_int / delta_int
        return replace(
            self,
            delta_int=delta_int,
            c_omega=self.c_omega * s,
            c_delta1=self.c_delta1 * s,
            c_deltar=self.c_deltar * s,
            c_pe1=self.c_pe1 * s * s,
            c_per=self.c_per * s * s,
        )


#: Cs 6S1/2 -> 7P1/2 -> 82S1/2 ladder at Delta/2pi = 16.3 GHz, B = 10 G.
CS_CALIBRATION = CouplingCalibration(
    c_omega=2.780,
    c_delta1=24.006,
    c_deltar=0.643,
    gamma_e=1.031,
    gamma_r=0.280e-3,
    delta_int=16300.0,
    qubit_splitting=9192.631770,
)


@dataclass(frozen=True)
class HyperfineLevel:
    """One hyperfine/Zeeman sublevel of the intermediate state."""

    label: tuple[int, int]
    energy_offset: float
    coeff_lower: float
    coeff_upper: float


@dataclass(frozen=True)
class LevelScheme:
    """Calibration plus an optional resolved intermediate manifold."""

    calibration: CouplingCalibration
    hyperfine_levels: tuple[HyperfineLevel, ...] = ()
    consistency_tol: float = 0.01

    def __post_init__(self) -> None:
        levels = tuple(self.hyperfine_levels)
        object.__setattr__(self, "hyperfine_levels", levels)
        labels = [lv.label for lv in levels]
        if len(set(labels)) != len(labels):
            raise AtomDataError("hyperfine level labels must be unique")
        if levels:
            cal = self.calibration
            sums = self.aggregate_sums()
            for name, got, want in (
                ("c_omega", sums[0], cal.c_omega),
                ("c_delta1", sums[1], cal.c_delta1),
                ("c_deltar", sums[2], cal.c_deltar),
            ):
                if abs(got - want) > self.consistency_tol * abs(want):
                    raise AtomDataError(
                        f"hyperfine manifold gives {name}={got:.6g}, calibration has {want:.6g} "
                        f"(tolerance {self.consistency_tol:.1%})"
                    )

    @property
    def resolved(self) -> bool:
        return bool(self.hyperfine_levels)

    def level_detunings(self) -> np.ndarray:
        """``Delta - E`` for every resolved level, MHz."""
        det = np.array([self.calibration.delta_int - lv.energy_offset for lv in self.hyperfine_levels])
        if np.any(det == 0):
            raise AtomDataError("an intermediate level is exactly resonant (Delta - E = 0)")
        return det

    def aggregate_sums(self) -> tuple[float, float, float]:
        """Per-unit-intensity (Omega_R, Delta_1, Delta_r) implied by the manifold."""
        det = self.level_detunings()
        lo = np.array([lv.coeff_lower for lv in self.hyperfine_levels])
        up = np.array([lv.coeff_upper for lv in self.hyperfine_levels])
        return (
            float(np.sum(lo * up / (2 * det))),
            float(np.sum(lo**2 / (4 * det))),
            float(np.sum(up**2 / (4 * det))),
        )


def single_level_scheme(cal: CouplingCalibration) -> LevelScheme:
    """Synthetic one-level manifold whose aggregates match *cal* exactly.

    The lower/upper coefficients are fixed by ``c_delta1`` and ``c_omega``;
    ``c_deltar`` and the population coefficients of the returned calibration
    are then whatever a single level implies.
    """
    d = cal.delta_int
    lo = math.sqrt(4 * d * cal.c_delta1)
    up = 2 * d * cal.c_omega / lo
    level = HyperfineLevel(label=(0, 0), energy_offset=0.0, coeff_lower=lo, coeff_upper=up)
    matched = replace(
        cal,
        c_deltar=up**2 / (4 * d),
        c_pe1=lo**2 / (4 * d * d),
        c_per=up**2 / (4 * d * d),
    )
    return LevelScheme(matched, (level,))


def _check_intensities(*values: float | np.ndarray) -> None:
    for v in values:
        if np.any(np.asarray(v) < 0):
            raise AtomDataError("laser intensity must be non-negative")


def effective_rabi(cal: CouplingCalibration, i1, ir):
    """Two-photon Rabi frequency ``c_omega * sqrt(i1 * ir)`` in MHz."""
    _check_intensities(i1, ir)
    return cal.c_omega * np.sqrt(np.multiply(i1, ir))


def stark_shifts(cal: CouplingCalibration, i1, ir):
    """AC Stark shifts ``(Delta_1, Delta_r)`` of the qubit and Rydberg states, MHz."""
    _check_intensities(i1, ir)
    return cal.c_delta1 * np.asarray(i1), cal.c_deltar * np.asarray(ir)


def intermediate_populations(scheme: LevelScheme, i1, ir):
    """Adiabatic-elimination estimate of intermediate-state population per leg."""
    _check_intensities(i1, ir)
    if scheme.resolved:
        det = scheme.level_detunings()
        lo2 = sum(lv.coeff_lower**2 / (4 * d * d) for lv, d in zip(scheme.hyperfine_levels, det))
        up2 = sum(lv.coeff_upper**2 / (4 * d * d) for lv, d in zip(scheme.hyperfine_levels, det))
        return lo2 * np.asarray(i1), up2 * np.asarray(ir)
    cal = scheme.calibration
    return cal.c_pe1 * np.asarray(i1), cal.c_per * np.asarray(ir)


@dataclass(frozen=True)
class InteractionMap:
    """Symmetric matrix of pairwise Rydberg interactions, MHz."""

    v_rr: np.ndarray
    source: str = "explicit"
    c6: float | None = None
    positions: np.ndarray | None = field(default=None, compare=False)

    @property
    def n_atoms(self) -> int:
        return self.v_rr.shape[0]

    def restrict(self, atoms: Sequence[int]) -> np.ndarray:
        idx = np.asarray(atoms, dtype=int)
        return self.v_rr[np.ix_(idx, idx)]

    def scaled(self, factor: float) -> "InteractionMap":
        return InteractionMap(self.v_rr * factor, "explicit")


def interaction_map(
    v_rr: Sequence[Sequence[float]] | np.ndarray | None = None,
    *,
    c6: float | None = None,
    positions: Sequence[Sequence[float]] | np.ndarray | None = None,
) -> InteractionMap:
    """Build a validated :class:`InteractionMap`.

    Either pass an explicit symmetric matrix *v_rr*, or a van der Waals
    coefficient *c6* (MHz um^6) together with atom *positions* (um).
    """
    if v_rr is not None:
        if c6 is not None or positions is not None:
            raise AtomDataError("give either an explicit matrix or a power-law source, not both")
        v = np.array(v_rr, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] < 2:
            raise AtomDataError("interaction matrix must be square with at least two atoms")
        if not np.allclose(v, v.T, rtol=0, atol=1e-12):
            raise AtomDataError("interaction matrix must be symmetric")
        if np.any(np.diag(v) != 0):
            raise AtomDataError("interaction matrix must have a zero diagonal")
        return InteractionMap(v, "explicit")
    if c6 is None or positions is None:
        raise AtomDataError("power-law interactions need both c6 and positions")
    pos = np.array(positions, dtype=float)
    if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 2:
        raise AtomDataError("positions must be a list of at least two 3-vectors")
    d = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
    off = ~np.eye(len(pos), dtype=bool)
    if np.any(d[off] == 0):
        raise AtomDataError("coincident atom positions")
    v = np.zeros_like(d)
    v[off] = c6 / d[off] ** 6
    return InteractionMap(v, "power_law", c6=c6, positions=pos)


def uniform_map(n_atoms: int, v: float) -> InteractionMap:
    """All-to-all map with equal strength *v* (equilateral triangle, regular simplex)."""
    m = np.full((n_atoms, n_atoms), float(v))
    np.fill_diagonal(m, 0.0)
    return interaction_map(m)
