"""Phase-space and correlation diagnostics.

Wigner functions are computed for the reduced cantilever state in the
scaled (x, p) units in which the classical orbits live, i.e. the axes are
the quadratures multiplied by the coupling g, so a coherent state sits at
(sqrt(2) Re beta, sqrt(2) Im beta) with Gaussian width g.  The windowed
position autocorrelation

    R_tau(dtau) = integral_{tau-pi}^{tau+pi} <x(t') x(t'+dtau)> dt'

is provided both as a trajectory-ensemble estimator (mean over k of
x_k(t') x_k(t'+dtau), with the residual operator term bounded per
trajectory by sigma_x(t') sigma_x(t'+dtau)) and as a quantum-regression
oracle driven by the master engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .master import two_time_correlation
from .model import ModelParams, OperatorSet, derive_couplings
from .qsd import Ensemble, TrajectoryRecord


@dataclass(frozen=True)
class WignerGrid:
    x: np.ndarray
    p: np.ndarray
    w: np.ndarray  # shape (len(p), len(x)), real

    def norm(self) -> float:
        dx = self.x[1] - self.x[0]
        dp = self.p[1] - self.p[0]
        return float(self.w.sum() * dx * dp)


def _laguerre_clenshaw(ell: int, x: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Clenshaw evaluation of sum_n c_n (-1)^n sqrt(ell! n!/(ell+n)!)
    L_n^ell(x) over the grid x (stable for large Fock cutoffs, unlike the
    naive displaced-state recursion)."""
    if len(c) == 1:
        y0, y1 = c[0], 0.0
    elif len(c) == 2:
        y0, y1 = c[0], c[1]
    else:
        k = len(c)
        y0, y1 = c[-2], c[-1]
        for i in range(3, len(c) + 1):
            k -= 1
            y0, y1 = (
                c[-i] - y1 * math.sqrt((k - 1.0) * (ell + k - 1.0) / ((ell + k) * k)),
                y0 - y1 * (ell + 2.0 * k - 1.0 - x) / math.sqrt((ell + k) * k),
            )
    return y0 - y1 * (ell + 1.0 - x) / math.sqrt(ell + 1.0)


def _wigner_quadrature(rho: np.ndarray, xq: np.ndarray, pq: np.ndarray) -> np.ndarray:
    """Fock-basis Wigner transform on bare quadratures ([x,p] = i); vacuum
    gives exp(-x^2-p^2)/pi.  Diagonal-by-diagonal Laguerre sums evaluated by
    Clenshaw recurrence."""
    m_dim = rho.shape[0]
    xg, pg = np.meshgrid(xq, pq)
    a2 = math.sqrt(2.0) * (xg + 1j * pg)
    b = np.abs(a2) ** 2
    w = np.zeros_like(a2)
    for ell in range(m_dim - 1, -1, -1):
        diag = np.diagonal(rho, ell).copy()
        if ell == 0:
            diag *= 0.5  # the main diagonal enters once, not twice
        w = _laguerre_clenshaw(ell, b, diag) + w * a2 / math.sqrt(ell + 1.0)
    return 2.0 * w.real * np.exp(-0.5 * b) / math.pi


def wigner(
    state: np.ndarray,
    g: float,
    x_axis: np.ndarray,
    p_axis: np.ndarray,
    min_captured_mass: float = 1 - 1e-4,
) -> WignerGrid:
    """Wigner function of a mechanical state on scaled (x, p) axes.

    `state` is either a reduced density matrix or a pure mechanical state
    vector.  Raises if the grid captures less than `min_captured_mass` of
    the state (checked via the Wigner norm on the grid)."""
    state = np.asarray(state)
    rho = np.outer(state, state.conj()) if state.ndim == 1 else state
    if g <= 0:
        raise ValueError("need g > 0 to scale the quadrature axes")
    x_axis = np.asarray(x_axis, dtype=float)
    p_axis = np.asarray(p_axis, dtype=float)
    w = _wigner_quadrature(rho, x_axis / g, p_axis / g) / g**2
    grid = WignerGrid(x=x_axis, p=p_axis, w=w)
    mass = grid.norm() / np.real(np.trace(rho))
    if mass < min_captured_mass:
        raise ValueError(
            f"grid captures only {mass:.6f} of the state mass "
            f"(< {min_captured_mass}); enlarge the extent"
        )
    return grid


@dataclass(frozen=True)
class AutocorrelationSeries:
    tau: float
    dtau: np.ndarray
    values: np.ndarray
    residual_bound: np.ndarray | None = None  # Cauchy-Schwarz budget per lag
    stderr: np.ndarray | None = None


def _window_indices(taus: np.ndarray, tau: float, max_dtau: float):
    dt = taus[1] - taus[0]
    if dt > 2.0 * math.pi / 32.0 + 1e-12:
        raise ValueError(
            f"record stride {dt:.4g} too coarse for the window quadrature "
            "(need >= 32 samples per period)"
        )
    i_lo = int(round((tau - math.pi) / dt))
    i_hi = int(round((tau + math.pi) / dt))
    if i_lo < 0 or (i_hi + int(round(max_dtau / dt))) >= len(taus):
        raise ValueError(
            f"records do not cover the window [tau-pi, tau+pi+max dtau] for "
            f"tau={tau:.4g}"
        )
    return i_lo, i_hi, dt


def autocorrelation_trajectories(
    ensemble: Ensemble,
    tau: float,
    dtau_grid: np.ndarray,
) -> AutocorrelationSeries:
    """Trajectory estimator of the windowed autocorrelation: the first
    (product-of-means) term, with the residual term bounded per trajectory
    by sigma_x(t') sigma_x(t'+dtau) and reported as an error budget."""
    dtau_grid = np.asarray(dtau_grid, dtype=float)
    taus = ensemble.tau
    i_lo, i_hi, dt = _window_indices(taus, tau, float(dtau_grid.max()))
    ok = ensemble.ok
    x = ensemble.x[:, ok]
    sx = ensemble.sigma_x[:, ok]
    k_traj = x.shape[1]

    vals = np.empty(len(dtau_grid))
    bounds = np.empty(len(dtau_grid))
    errs = np.empty(len(dtau_grid))
    win = slice(i_lo, i_hi + 1)
    for j, dtau in enumerate(dtau_grid):
        lag = int(round(dtau / dt))
        shifted = slice(i_lo + lag, i_hi + 1 + lag)
        per_traj = np.trapezoid(x[win] * x[shifted], dx=dt, axis=0)
        vals[j] = per_traj.mean()
        errs[j] = per_traj.std(ddof=1) / math.sqrt(k_traj) if k_traj > 1 else 0.0
        bounds[j] = np.trapezoid(sx[win] * sx[shifted], dx=dt, axis=0).mean()
    return AutocorrelationSeries(tau=tau, dtau=dtau_grid, values=vals,
                                 residual_bound=bounds, stderr=errs)


def autocorrelation_regression(
    states: list,
    taus: np.ndarray,
    ops: OperatorSet,
    params: ModelParams,
    tau: float,
    dtau_grid: np.ndarray,
) -> AutocorrelationSeries:
    """Regression oracle: Re <x(t') x(t'+dtau)> from the master engine,
    window-integrated over t' in [tau-pi, tau+pi] by trapezoid rule.

    `states` and `taus` come from integrate_master over a grid covering the
    window."""
    dtau_grid = np.asarray(dtau_grid, dtype=float)
    taus = np.asarray(taus, dtype=float)
    i_lo, i_hi, dt = _window_indices(taus, tau, 0.0)
    corr = np.empty((i_hi - i_lo + 1, len(dtau_grid)))
    for i in range(i_lo, i_hi + 1):
        corr[i - i_lo] = np.real(
            two_time_correlation(states[i], ops, params, dtau_grid)
        )
    vals = np.trapezoid(corr, dx=dt, axis=0)
    return AutocorrelationSeries(tau=tau, dtau=dtau_grid, values=vals)


def uncertainty_floor(params: ModelParams) -> float:
    """Minimal sigma_x sigma_p product, (1/2) g^2 with g = 2*sigma*kappa_bar."""
    return 0.5 * derive_couplings(params).g ** 2


@dataclass(frozen=True)
class UncertaintySeries:
    tau: np.ndarray
    product: np.ndarray
    floor: float
    localized: np.ndarray  # product within a factor 2 of the floor


def uncertainty_series(record: TrajectoryRecord, params: ModelParams) -> UncertaintySeries:
    floor = uncertainty_floor(params)
    prod = record.sigma_x * record.sigma_p
    return UncertaintySeries(tau=record.tau, product=prod, floor=floor,
                             localized=prod < 2.0 * floor)


def stroboscopic_quantum(
    record: TrajectoryRecord,
    period: float = 2.0 * math.pi,
    offset: float = 0.0,
    discard: float = 0.0,
):
    """(x_k, p_k) sampled once per period, as for the classical stroboscope."""
    t0 = record.tau[0] + discard * (record.tau[-1] - record.tau[0])
    k0 = math.ceil((max(t0, offset) - offset) / period)
    k1 = math.floor((record.tau[-1] - offset) / period)
    times = offset + period * np.arange(k0, k1 + 1)
    if len(times) < 1:
        raise ValueError("record too short for stroboscopic sampling")
    xs = np.interp(times, record.tau, record.x)
    ps = np.interp(times, record.tau, record.p)
    return xs, ps
