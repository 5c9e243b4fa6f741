"""Adaptive embedded Runge-Kutta integration of linear systems ``y' = A(t) y``.

The stepper is specialised for small dense generators:

* the generator is evaluated once per step attempt at all stage times,
* the state carries a leading batch axis, shape ``(S, d)``; the generator
  is either shared, shape ``(n, d, d)``, or per batch member,
  ``(n, S, d, d)``,
* steps never cross caller-supplied breakpoints, where an optional kick
  ``y <- kick(t, y)`` is applied,
* states at requested sample times come from a shortened step of the same
  tableau, so they are as accurate as the accepted steps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate._ivp import dop853_coefficients as _dop

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0


class IntegrationError(RuntimeError):
    """Step-size underflow or step budget exhausted."""


@dataclass(frozen=True)
class Tableau:
    name: str
    c: np.ndarray
    a: np.ndarray
    b: np.ndarray
    order: int
    error_order: int


_DP5 = Tableau(
    name="dopri5",
    c=np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0]),
    a=np.array(
        [
            [0, 0, 0, 0, 0],
            [1 / 5, 0, 0, 0, 0],
            [3 / 40, 9 / 40, 0, 0, 0],
            [44 / 45, -56 / 15, 32 / 9, 0, 0],
            [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0],
            [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
        ]
    ),
    b=np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
    order=5,
    error_order=4,
)
# b5 - b4 over the six stages plus the FSAL stage.
_DP5_E = np.array([71 / 57600, 0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

_DOP853 = Tableau(
    name="dop853",
    c=_dop.C[: _dop.N_STAGES],
    a=_dop.A[: _dop.N_STAGES, : _dop.N_STAGES],
    b=_dop.B,
    order=8,
    error_order=7,
)

TABLEAUS = {"dopri5": _DP5, "dop853": _DOP853}


@dataclass
class IntegrationResult:
    y: np.ndarray
    samples: np.ndarray | None
    n_steps: int
    n_rejected: int
    n_evals: int


def _apply(a: np.ndarray, y: np.ndarray) -> np.ndarray:
    if a.ndim == 2:
        return y @ a.T
    return np.einsum("sij,sj->si", a, y)


def _error_norm(tab: Tableau, k: np.ndarray, h: float, scale: np.ndarray) -> float:
    """Max over batch members of the per-member RMS scaled error."""
    d = scale.shape[-1]
    if tab.name == "dop853":
        e5 = np.tensordot(_dop.E5, k, axes=1) / scale
        e3 = np.tensordot(_dop.E3, k, axes=1) / scale
        n5 = np.sum(np.abs(e5) ** 2, axis=-1)
        n3 = np.sum(np.abs(e3) ** 2, axis=-1)
        den = n5 + 0.01 * n3
        with np.errstate(invalid="ignore", divide="ignore"):
            err = np.where(den > 0, abs(h) * n5 / np.sqrt(den * d), 0.0)
        return float(np.max(err))
    e = h * np.tensordot(_DP5_E, k, axes=1) / scale
    return float(np.max(np.sqrt(np.sum(np.abs(e) ** 2, axis=-1) / d)))


def _substep(tab, generator, t, y, f, hs):
    """States after one step of each size in *hs* from ``(t, y)``; no error control."""
    out = np.empty((len(hs),) + y.shape, dtype=complex)
    n_stages = len(tab.c)
    k = np.empty((n_stages,) + y.shape, dtype=complex)
    for i, h in enumerate(hs):
        if h == 0:
            out[i] = y
            continue
        a_stages = generator(t + h * tab.c[1:])
        k[0] = f
        for s in range(1, n_stages):
            k[s] = _apply(a_stages[s - 1], y + h * np.tensordot(tab.a[s, :s], k[:s], axes=1))
        out[i] = y + h * np.tensordot(tab.b, k, axes=1)
    return out


def integrate_linear(
    generator: Callable[[np.ndarray], np.ndarray],
    y0: np.ndarray,
    t0: float,
    t1: float,
    *,
    rtol: float = 1e-9,
    atol: float = 1e-9,
    method: str = "dop853",
    breakpoints: np.ndarray | None = None,
    kick: Callable[[float, np.ndarray], np.ndarray] | None = None,
    sample_times: np.ndarray | None = None,
    first_step: float | None = None,
    max_steps: int = 5_000_000,
    per_unit_time: bool = False,
) -> IntegrationResult:
    """Integrate ``dy/dt = A(t) y`` from *t0* to *t1*.

    Parameters
    ----------
    generator : callable
        ``generator(ts)`` returns ``A`` at every time in the 1-D array *ts*.
    y0 : ndarray, shape (d,) or (S, d)
    breakpoints : array, optional
        Times strictly inside ``(t0, t1)`` that steps must land on; the
        generator may be discontinuous there.
    kick : callable, optional
        Applied as ``y = kick(t, y)`` at every breakpoint.
    sample_times : array, optional
        Sorted times in ``[t0, t1]``; the returned ``samples`` has shape
        ``(len(sample_times), S, d)``.
    per_unit_time : bool
        Control the local error per unit time (error / h) instead of per
        step, so the accumulated error stays of order ``tol * (t1 - t0)``.
    """
    tab = TABLEAUS[method]
    y = np.array(y0, dtype=complex, copy=True)
    squeeze = y.ndim == 1
    if squeeze:
        y = y[None, :]
    samples = None
    if sample_times is not None:
        sample_times = np.asarray(sample_times, dtype=float)
        samples = np.empty((len(sample_times),) + y.shape, dtype=complex)
        si = 0
        while si < len(sample_times) and sample_times[si] <= t0:
            samples[si] = y
            si += 1
    if t1 <= t0:
        if samples is not None:
            samples[:] = y
        out = y[0] if squeeze else y
        return IntegrationResult(out, samples, 0, 0, 0)

    stops = [] if breakpoints is None else sorted(float(b) for b in breakpoints if t0 < b < t1)
    stops.append(t1)
    n_stages = len(tab.c)
    stage_c = np.append(tab.c[1:], 1.0)

    a_t = generator(np.array([t0]))[0]
    f = _apply(a_t, y)
    span = t1 - t0
    if first_step is None:
        fn = float(np.max(np.abs(f)))
        h = 0.01 * span if fn == 0 else min(0.01 * span, 0.01 / fn * max(1.0, float(np.max(np.abs(y)))))
    else:
        h = first_step
    exponent = -1.0 / (tab.error_order if per_unit_time else tab.error_order + 1)

    t = t0
    n_steps = n_rejected = n_evals = 0
    k = np.empty((n_stages + 1,) + y.shape, dtype=complex)
    stop_i = 0
    while t < t1:
        t_stop = stops[stop_i]
        min_step = 10 * np.spacing(max(abs(t), 1.0))
        while True:
            h_try = min(h, t_stop - t)
            landing = h_try >= t_stop - t - 1e-14 * span
            if landing:
                h_try = t_stop - t
            if h_try < min_step:
                raise IntegrationError(f"step size underflow at t={t:.6g} (h={h_try:.3g})")
            a_stages = generator(t + h_try * stage_c)
            n_evals += len(stage_c)
            k[0] = f
            for s in range(1, n_stages):
                dy = np.tensordot(tab.a[s, :s], k[:s], axes=1)
                k[s] = _apply(a_stages[s - 1], y + h_try * dy)
            y_new = y + h_try * np.tensordot(tab.b, k[:n_stages], axes=1)
            a_new = a_stages[-1]
            f_new = _apply(a_new, y_new)
            k[n_stages] = f_new
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = _error_norm(tab, k, h_try, scale)
            if per_unit_time:
                err /= h_try
            if err <= 1.0:
                factor = MAX_FACTOR if err == 0 else min(MAX_FACTOR, SAFETY * err**exponent)
                break
            n_rejected += 1
            h = h_try * max(MIN_FACTOR, SAFETY * err**exponent)
        t_new = t_stop if landing else t + h_try
        if samples is not None:
            j = si
            while j < len(sample_times) and sample_times[j] <= t_new:
                j += 1
            if j > si:
                inner = sample_times[si:j] < t_new
                hs = sample_times[si:j][inner] - t
                samples[si:j][inner] = _substep(tab, generator, t, y, f, hs)
                samples[si:j][~inner] = y_new
                n_evals += (n_stages - 1) * len(hs)
                si = j
        t, y, f = t_new, y_new, f_new
        n_steps += 1
        if n_steps > max_steps:
            raise IntegrationError(f"step budget of {max_steps} exhausted at t={t:.6g}")
        # a step clipped to a stop says nothing about the larger proposal
        h = max(h, h_try * factor) if landing and h_try < h else h_try * factor
        if landing:
            stop_i += 1
            if t_stop < t1:
                if kick is not None:
                    y = kick(t, y)
                # the generator may jump at a breakpoint: restart from its right limit
                a_right = generator(np.array([np.nextafter(t, np.inf)]))[0]
                n_evals += 1
                f = _apply(a_right, y)
    if samples is not None and si < len(sample_times):
        samples[si:] = y
    out = y[0] if squeeze else y
    if samples is not None and squeeze:
        samples = samples[:, 0, :]
    return IntegrationResult(out, samples, n_steps, n_rejected, n_evals)
