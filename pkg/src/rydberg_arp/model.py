"""Time-dependent non-Hermitian Hamiltonians for Rydberg ensembles.

Atoms in |0> never couple to light, so only the atoms in |1> of a given
computational input are simulated ("active" atoms). The per-atom level
list is ``[1, r]`` for the reduced model and ``[1, e_1..e_m, r]`` for the
full model; product states are ordered atom-major (atom 0 is the most
significant digit).

The Hamiltonian is written as ``H(t) = H_static + sum_k c_k(t) S_k``
where ``S_k`` are collective operators (sums of one single-atom operator
over all active atoms) and ``c_k`` are scalar drive coefficients shared
by every atom of a globally driven ensemble. All values are in MHz
(``/2pi``).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import block_diag

from .atomdata import LevelScheme, intermediate_populations, stark_shifts
from .pulse import NoiseRealization, PulseSchedule, intensity_schedule

REDUCED = "reduced"
FULL = "full"


class ModelError(ValueError):
    """Inconsistent model assembly."""


@dataclass(frozen=True)
class Perturbation:
    """Fixed relative offsets on the physical controls over the whole pulse.

    ``intensity_rel`` scales the lower-leg intensity ``I1(t)`` by
    ``1 + intensity_rel``; ``detuning_rel`` scales the laser two-photon
    detuning ``delta(t)``.
    """

    intensity_rel: float = 0.0
    detuning_rel: float = 0.0


NOMINAL = Perturbation()


@dataclass(frozen=True)
class BasisSpec:
    n_active: int
    levels: tuple[str, ...]

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def dim(self) -> int:
        return self.n_levels**self.n_active

    def index(self, state: Sequence[int]) -> int:
        idx = 0
        for lv in state:
            idx = idx * self.n_levels + lv
        return idx

    def states(self) -> list[tuple[int, ...]]:
        return list(itertools.product(range(self.n_levels), repeat=self.n_active))

    def labels(self) -> list[str]:
        return ["".join(self.levels[i] if len(self.levels[i]) == 1 else f"[{self.levels[i]}]" for i in s) for s in self.states()]

    def level_counts(self) -> np.ndarray:
        """``counts[j, l]`` = number of atoms in single-atom level *l* for basis state *j*."""
        st = np.array(self.states(), dtype=int).reshape(self.dim, self.n_active)
        return np.stack([(st == lv).sum(axis=1) for lv in range(self.n_levels)], axis=1)


def reduced_basis(n_active: int) -> BasisSpec:
    return BasisSpec(n_active, ("1", "r"))


def full_basis(n_active: int, n_e: int) -> BasisSpec:
    return BasisSpec(n_active, ("1",) + tuple(f"e{j}" for j in range(n_e)) + ("r",))


# ---------------------------------------------------------------------------
# drive coefficients


def _controls(scheme: LevelScheme, schedule: PulseSchedule, ts, perts: Sequence[Perturbation]):
    """Physical controls at times *ts* for every perturbation.

    Returns ``omega, i1, ir, delta`` with shape ``(n, P)`` (``ir`` scalar).
    ``omega`` is the signed effective Rabi frequency after the intensity
    offset; ``delta`` is the laser two-photon detuning after its offset.
    """
    cal = scheme.calibration
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    om0 = np.asarray(schedule.omega(ts))
    i10, ir = intensity_schedule(scheme, schedule, ts)
    d10, dr = stark_shifts(cal, i10, ir)
    delta0 = np.asarray(schedule.delta_r(ts)) - d10 + dr
    si = np.array([1.0 + p.intensity_rel for p in perts])
    sd = np.array([1.0 + p.detuning_rel for p in perts])
    if np.any(si < 0):
        raise ModelError("intensity offset below -100%")
    omega = om0[:, None] * np.sqrt(si)[None, :]
    i1 = i10[:, None] * si[None, :]
    delta = delta0[:, None] * sd[None, :]
    return omega, i1, ir, delta


def _reduced_coefficients(scheme, schedule, ts, perts):
    """Coefficients of ``[n1, nr, x+, x-]`` (noiseless)."""
    cal = scheme.calibration
    omega, i1, ir, delta = _controls(scheme, schedule, ts, perts)
    d1, dr = stark_shifts(cal, i1, ir)
    pe1, per = intermediate_populations(scheme, i1, ir)
    c = np.empty(omega.shape + (4,), dtype=complex)
    c[..., 0] = d1 - 0.5j * pe1 * cal.gamma_e
    c[..., 1] = (dr - delta) - 0.5j * (cal.gamma_r + per * cal.gamma_e)
    c[..., 2] = omega
    c[..., 3] = omega
    return c


def _full_coefficients(scheme, schedule, ts, perts):
    """Coefficients of ``[lo+, lo-, up+, up-, nr]`` (noiseless)."""
    cal = scheme.calibration
    omega, i1, ir, delta = _controls(scheme, schedule, ts, perts)
    lo = np.sign(omega) * np.sqrt(i1)
    c = np.empty(omega.shape + (5,), dtype=complex)
    c[..., 0] = lo
    c[..., 1] = lo
    c[..., 2] = np.sqrt(ir)
    c[..., 3] = np.sqrt(ir)
    c[..., 4] = -delta - 0.5j * cal.gamma_r
    return c


def _reduced_ops():
    n1 = np.diag([1.0, 0.0]).astype(complex)
    nr = np.diag([0.0, 1.0]).astype(complex)
    xp = np.array([[0, 0], [0.5, 0]], dtype=complex)  # |r><1| / 2
    return np.stack([n1, nr, xp, xp.T.copy()]), np.zeros((2, 2), dtype=complex)


def _full_ops(scheme: LevelScheme):
    cal = scheme.calibration
    lv = scheme.hyperfine_levels
    m = len(lv)
    n = m + 2
    r = n - 1
    lo_p = np.zeros((n, n), dtype=complex)
    up_p = np.zeros((n, n), dtype=complex)
    for j, level in enumerate(lv, start=1):
        lo_p[j, 0] = level.coeff_lower / 2  # |e_j><1|
        up_p[r, j] = level.coeff_upper / 2  # |r><e_j|
    nr = np.zeros((n, n), dtype=complex)
    nr[r, r] = 1.0
    static = np.zeros((n, n), dtype=complex)
    det = scheme.level_detunings()
    for j in range(m):
        static[j + 1, j + 1] = -det[j] - 0.5j * cal.gamma_e
    return np.stack([lo_p, lo_p.T.copy(), up_p, up_p.T.copy(), nr]), static


def _embed(op: np.ndarray, atom: int, n_active: int) -> np.ndarray:
    eye = np.eye(op.shape[0])
    out = np.array([[1.0]])
    for i in range(n_active):
        out = np.kron(out, op if i == atom else eye)
    return out


def _collective(op: np.ndarray, n_active: int) -> np.ndarray:
    return sum(_embed(op, i, n_active) for i in range(n_active))


def single_atom_reduced(scheme: LevelScheme, schedule: PulseSchedule, t: float, noise: NoiseRealization | None = None,
                        perturbation: Perturbation = NOMINAL) -> np.ndarray:
    """2x2 effective Hamiltonian over ``{|1>, |r>}`` at time *t*, MHz."""
    c = _reduced_coefficients(scheme, schedule, [t], [perturbation])[0, 0]
    ops, static = _reduced_ops()
    if noise is not None:
        p1, p2 = noise.phases(t)
        ph = np.exp(1j * (p1 + p2))
        c = c.copy()
        c[2] *= ph
        c[3] *= np.conj(ph)
    return static + np.tensordot(c, ops, axes=1)


def single_atom_full(scheme: LevelScheme, schedule: PulseSchedule, t: float, noise: NoiseRealization | None = None,
                     perturbation: Perturbation = NOMINAL) -> np.ndarray:
    """Single-atom Hamiltonian over ``{|1>, e_1..e_m, |r>}`` at time *t*, MHz."""
    if not scheme.resolved:
        raise ModelError("the full model needs a resolved intermediate-state manifold")
    c = _full_coefficients(scheme, schedule, [t], [perturbation])[0, 0]
    ops, static = _full_ops(scheme)
    if noise is not None:
        p1, p2 = noise.phases(t)
        c = c.copy()
        c[0] *= np.exp(1j * p1)
        c[1] *= np.exp(-1j * p1)
        c[2] *= np.exp(1j * p2)
        c[3] *= np.exp(-1j * p2)
    return static + np.tensordot(c, ops, axes=1)


# ---------------------------------------------------------------------------
# ensembles


@dataclass(frozen=True)
class BlockInfo:
    """One input block inside a (possibly stacked) model."""

    atoms: tuple[int, ...]
    start: int
    dim: int
    basis: BasisSpec
    weight: float = 1.0


@dataclass
class EnsembleModel:
    """Hamiltonian evaluator for one or more independent input blocks.

    Blocks share the global drive; a stacked model is block diagonal.
    ``perturbations`` turns evaluation into a batch: one Hamiltonian per
    perturbation. ``noise`` (optionally with a shot axis) is applied by the
    propagator through gauge kicks; :meth:`hamiltonian` shows the dressed
    matrix for inspection.
    """

    kind: str
    scheme: LevelScheme
    schedule: PulseSchedule
    blocks: list[BlockInfo]
    static: np.ndarray
    ops: np.ndarray
    counts: np.ndarray  # (dim, n_levels) atoms per single-atom level
    perturbations: tuple[Perturbation, ...] = (NOMINAL,)
    noise: NoiseRealization | None = None
    interactions: list[np.ndarray] = field(default_factory=list)
    idle_weight: float = 0.0  # superposition weight of inputs that never evolve

    @property
    def dim(self) -> int:
        return self.static.shape[0]

    @property
    def n_levels(self) -> int:
        return self.counts.shape[1]

    @property
    def batch(self) -> int:
        n_noise = 1 if self.noise is None else self.noise.n_shots
        return max(len(self.perturbations), n_noise)

    def coefficients(self, ts) -> np.ndarray:
        """Drive coefficients, shape ``(n, P, K)``."""
        if self.kind == REDUCED:
            return _reduced_coefficients(self.scheme, self.schedule, ts, self.perturbations)
        return _full_coefficients(self.scheme, self.schedule, ts, self.perturbations)

    def hamiltonians(self, ts) -> np.ndarray:
        """Noiseless ``H`` at every time in *ts*: ``(n, d, d)`` or ``(n, P, d, d)``."""
        c = self.coefficients(ts)
        if c.shape[1] == 1:
            return self.static + np.tensordot(c[:, 0, :], self.ops, axes=1)
        return self.static + np.tensordot(c, self.ops, axes=1)

    def hamiltonian(self, t: float, member: int = 0) -> np.ndarray:
        """Dressed ``H(t)`` for one batch member, noise phases included."""
        c = self.coefficients([t])[0, min(member, len(self.perturbations) - 1)].copy()
        if self.noise is not None:
            p1, p2 = self.noise.shot(member).phases(t)
            if self.kind == REDUCED:
                ph = np.exp(1j * (p1 + p2))
                c[2] *= ph
                c[3] *= np.conj(ph)
            else:
                c[0] *= np.exp(1j * p1)
                c[1] *= np.exp(-1j * p1)
                c[2] *= np.exp(1j * p2)
                c[3] *= np.exp(-1j * p2)
        return self.static + np.tensordot(c, self.ops, axes=1)

    def phase_weights(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-basis-state weights of the two laser phases in the gauge frame.

        An atom in an intermediate level carries ``phi1``; an atom in |r>
        carries ``phi1 + phi2``.
        """
        n_r = self.counts[:, -1]
        n_e = self.counts[:, 1:-1].sum(axis=1)
        return (n_e + n_r).astype(float), n_r.astype(float)

    def intermediate_weights(self, ts) -> np.ndarray:
        """Expected intermediate-state population per basis state, ``(n, d)``.

        Exact occupation for the full model; the adiabatic-elimination
        estimate ``P_e1 n_1 + P_er n_r`` for the reduced model.
        """
        ts = np.atleast_1d(ts)
        if self.kind == FULL:
            n_e = self.counts[:, 1:-1].sum(axis=1).astype(float)
            return np.broadcast_to(n_e, (len(ts), self.dim))
        omega, i1, ir, _ = _controls(self.scheme, self.schedule, ts, self.perturbations[:1])
        pe1, per = intermediate_populations(self.scheme, i1[:, 0], ir)
        return np.outer(pe1, self.counts[:, 0]) + np.outer(np.broadcast_to(per, pe1.shape), self.counts[:, -1])

    def initial_state(self) -> np.ndarray:
        """All active atoms in |1> in every block."""
        y = np.zeros(self.dim, dtype=complex)
        for b in self.blocks:
            y[b.start] = 1.0
        return y

    def with_batch(self, perturbations: Sequence[Perturbation] | None = None,
                   noise: NoiseRealization | None = None) -> "EnsembleModel":
        return EnsembleModel(
            self.kind, self.scheme, self.schedule, self.blocks, self.static, self.ops, self.counts,
            tuple(perturbations) if perturbations is not None else self.perturbations,
            noise if noise is not None else self.noise,
            self.interactions,
            self.idle_weight,
        )


def compose_ensemble(
    kind: str,
    scheme: LevelScheme,
    schedule: PulseSchedule,
    v_active: np.ndarray | Sequence[Sequence[float]],
    *,
    atoms: Sequence[int] | None = None,
    perturbation: Perturbation = NOMINAL,
    noise: NoiseRealization | None = None,
) -> EnsembleModel:
    """Model of the active atoms with pairwise interactions *v_active* (MHz).

    Multiply-excited Rydberg states are kept; the blockade is finite.
    """
    v = np.atleast_2d(np.asarray(v_active, dtype=float))
    n = v.shape[0]
    if v.shape != (n, n):
        raise ModelError("interaction block must be square")
    if atoms is None:
        atoms = tuple(range(n))
    if len(atoms) != n:
        raise ModelError("interaction block does not match the number of active atoms")
    if kind == REDUCED:
        single_ops, single_static = _reduced_ops()
        basis = reduced_basis(n)
    elif kind == FULL:
        if not scheme.resolved:
            raise ModelError("the full model needs a resolved intermediate-state manifold")
        single_ops, single_static = _full_ops(scheme)
        basis = full_basis(n, len(scheme.hyperfine_levels))
    else:
        raise ModelError(f"unknown model kind {kind!r}")
    ops = np.stack([_collective(o, n) for o in single_ops])
    static = _collective(single_static, n).astype(complex)
    counts = basis.level_counts()
    # dipole-dipole shift on doubly excited pairs
    r = basis.n_levels - 1
    states = np.array(basis.states(), dtype=int).reshape(basis.dim, n)
    in_r = states == r
    dd = np.zeros(basis.dim)
    for i, j in itertools.combinations(range(n), 2):
        dd += v[i, j] * (in_r[:, i] & in_r[:, j])
    static = static + np.diag(dd)
    block = BlockInfo(tuple(atoms), 0, basis.dim, basis)
    return EnsembleModel(kind, scheme, schedule, [block], static, ops, counts, (perturbation,), noise, [v])


def stack(models: Sequence[EnsembleModel], weights: Sequence[float] | None = None,
          idle_weight: float = 0.0) -> EnsembleModel:
    """Block-diagonal composition of models that share kind, scheme and drive."""
    first = models[0]
    for m in models[1:]:
        if m.kind != first.kind or m.scheme is not first.scheme and m.scheme != first.scheme:
            raise ModelError("stacked models must share kind and level scheme")
        if m.schedule != first.schedule or m.perturbations != first.perturbations:
            raise ModelError("stacked models must share the drive")
    if weights is None:
        weights = [1.0] * len(models)
    blocks, start = [], 0
    for m, w in zip(models, weights):
        for b in m.blocks:
            blocks.append(BlockInfo(b.atoms, start + b.start, b.dim, b.basis, w * b.weight))
        start += m.dim
    static = block_diag(*[m.static for m in models])
    ops = np.stack([block_diag(*[m.ops[k] for m in models]) for k in range(first.ops.shape[0])])
    counts = np.concatenate([m.counts for m in models])
    inter = [v for m in models for v in m.interactions]
    return EnsembleModel(first.kind, first.scheme, first.schedule, blocks, static, ops, counts,
                         first.perturbations, first.noise, inter, idle_weight)
