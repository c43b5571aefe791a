"""Classical mean-field dynamics, attractor classification, and the
power-balance amplitude chart.

The mean-field equations for the scaled cavity amplitude alpha and
cantilever amplitude beta are

    d alpha/d tau = (i*delta - kappa_bar) alpha - i (beta + beta*) alpha - i/2
    d beta /d tau = (-i - gamma_bar) beta - (i/2) P |alpha|^2

with cantilever position/momentum x = (beta + beta*)/sqrt(2),
p = i (beta* - beta)/sqrt(2).

Self-sustained oscillations are located by the power-balance ansatz
x(tau) = x0 + A cos(tau): the cavity equation is driven by the forced
cantilever until time-periodic steady state, the offset x0 is solved
self-consistently from the period-averaged mechanical statics, and an
amplitude A is a stable orbit where the net power (radiation gain minus
friction loss) crosses zero from above with increasing A.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import ConvergenceError
from .model import ModelParams

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ClassicalState:
    alpha: complex
    beta: complex

    @property
    def x(self) -> float:
        return math.sqrt(2.0) * self.beta.real

    @property
    def p(self) -> float:
        # i (beta* - beta)/sqrt(2) = sqrt(2) Im beta
        return math.sqrt(2.0) * self.beta.imag

    @classmethod
    def from_xp(cls, x: float, p: float, alpha: complex = 0.0) -> "ClassicalState":
        return cls(alpha=alpha, beta=(x + 1j * p) / math.sqrt(2.0))


def classical_rhs(state: ClassicalState, params: ModelParams):
    """Right-hand side (d alpha, d beta). Total function."""
    a, b = state.alpha, state.beta
    da = (1j * params.delta - params.kappa_bar) * a - 1j * (b + b.conjugate()) * a - 0.5j
    db = (-1j - params.gamma_bar) * b - 0.5j * params.pump * abs(a) ** 2
    return da, db


@dataclass(frozen=True)
class ClassicalSeries:
    tau: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    @property
    def x(self) -> np.ndarray:
        return np.sqrt(2.0) * self.beta.real

    @property
    def p(self) -> np.ndarray:
        return np.sqrt(2.0) * self.beta.imag


def _rhs_flat(tau, y, params):
    a, b = y
    da = (1j * params.delta - params.kappa_bar) * a - 1j * 2.0 * b.real * a - 0.5j
    db = (-1j - params.gamma_bar) * b - 0.5j * params.pump * (a.real**2 + a.imag**2)
    return [da, db]


def integrate_classical(
    state0: ClassicalState,
    params: ModelParams,
    tau_end: float,
    tau_eval: np.ndarray | None = None,
    rtol: float = 1e-9,
    atol: float = 1e-11,
) -> ClassicalSeries:
    """Adaptive high-order Runge-Kutta integration with dense output."""
    if tau_end <= 0:
        raise ValueError("tau_end must be positive")
    if tau_eval is None:
        tau_eval = np.linspace(0.0, tau_end, max(int(tau_end * 32 / TWO_PI), 2))
    y0 = np.array([state0.alpha, state0.beta], dtype=complex)
    sol = solve_ivp(
        _rhs_flat, (0.0, tau_end), y0, t_eval=tau_eval,
        method="DOP853", rtol=rtol, atol=atol, args=(params,),
    )
    if not sol.success:
        raise ConvergenceError(f"classical integration failed: {sol.message}")
    return ClassicalSeries(tau=sol.t, alpha=sol.y[0], beta=sol.y[1])


def stroboscopic_samples(
    series: ClassicalSeries,
    period: float = TWO_PI,
    offset: float = 0.0,
    discard: float = 0.5,
):
    """(x, p) sampled at tau = offset + k*period after the discarded transient.

    Requires at least 10 periods of post-transient data.
    """
    t0 = series.tau[0] + discard * (series.tau[-1] - series.tau[0])
    t0 = max(t0, offset)
    k0 = math.ceil((t0 - offset) / period)
    times = offset + period * np.arange(k0, math.floor((series.tau[-1] - offset) / period) + 1)
    if len(times) < 10:
        raise ValueError(
            f"series too short: only {len(times)} stroboscopic samples after the "
            "transient, need >= 10"
        )
    xs = np.interp(times, series.tau, series.x)
    ps = np.interp(times, series.tau, series.p)
    return xs, ps


@dataclass(frozen=True)
class AttractorReport:
    kind: str                 # "fixed-point" | "period-n" | "chaotic" | "unclassified"
    period: int | None        # n for period-n, else None
    amplitude: float          # A = (max x - min x)/2 over the post-transient window
    offset: float             # x0 = (max x + min x)/2
    lyapunov: float
    strobe_x: np.ndarray = field(repr=False, default=None)
    strobe_p: np.ndarray = field(repr=False, default=None)


def _cluster(points: np.ndarray, tol: float):
    """Greedy radius clustering; returns (labels, centers)."""
    centers: list[np.ndarray] = []
    labels = np.empty(len(points), dtype=int)
    members: list[list[int]] = []
    for i, pt in enumerate(points):
        for j, c in enumerate(centers):
            if np.linalg.norm(pt - c) < tol:
                labels[i] = j
                members[j].append(i)
                centers[j] = points[members[j]].mean(axis=0)
                break
        else:
            labels[i] = len(centers)
            centers.append(pt.copy())
            members.append([i])
    return labels, np.array(centers)


def estimate_fundamental_period(series: ClassicalSeries, discard: float = 0.5):
    """Mean spacing of upward mean-crossings of x(tau), or None if x barely moves.

    Used instead of a hard-coded 2*pi because self-sustained orbits run
    slightly off the bare cantilever frequency; stroboscopic sampling at the
    wrong period smears a closed orbit into a ring.
    """
    i0 = np.searchsorted(series.tau, series.tau[0] + discard * (series.tau[-1] - series.tau[0]))
    t, x = series.tau[i0:], series.x[i0:]
    xm = x - x.mean()
    if np.max(np.abs(xm)) < 1e-6:
        return None
    up = np.nonzero((xm[:-1] < 0) & (xm[1:] >= 0))[0]
    if len(up) < 3:
        return None
    # linear interpolation of the crossing times
    tc = t[up] - xm[up] * (t[up + 1] - t[up]) / (xm[up + 1] - xm[up])
    return (tc[-1] - tc[0]) / (len(tc) - 1), tc[0]


def classify_attractor(
    series: ClassicalSeries,
    lyapunov: float,
    cluster_tol: float = 1e-2,
    lyapunov_threshold: float = 1e-3,
    discard: float = 0.5,
    max_period: int = 16,
) -> AttractorReport:
    """Classify the post-transient attractor of an integrated run.

    Chaos is decided by the Lyapunov exponent; otherwise stroboscopic samples
    at the estimated fundamental period are clustered and the cluster count
    gives the period.  Ambiguous clustering is reported as "unclassified",
    never guessed.
    """
    i0 = np.searchsorted(series.tau, series.tau[0] + discard * (series.tau[-1] - series.tau[0]))
    x_win = series.x[i0:]
    amp = 0.5 * (x_win.max() - x_win.min())
    x0 = 0.5 * (x_win.max() + x_win.min())

    est = estimate_fundamental_period(series, discard)
    if est is None or amp < 10 * cluster_tol:
        return AttractorReport(
            kind="fixed-point", period=None, amplitude=amp, offset=x0,
            lyapunov=lyapunov,
            strobe_x=np.array([x_win[-1]]), strobe_p=np.array([series.p[-1]]),
        )
    period, offset_tau = est
    try:
        xs, ps = stroboscopic_samples(series, period=period, offset=offset_tau,
                                      discard=discard)
    except ValueError:
        # too few post-transient periods to strobe: refuse to guess
        return AttractorReport(
            kind="unclassified", period=None, amplitude=amp, offset=x0,
            lyapunov=lyapunov,
            strobe_x=np.array([x_win[-1]]), strobe_p=np.array([series.p[-1]]),
        )

    if lyapunov > lyapunov_threshold:
        return AttractorReport(
            kind="chaotic", period=None, amplitude=amp, offset=x0,
            lyapunov=lyapunov, strobe_x=xs, strobe_p=ps,
        )

    pts = np.column_stack([xs, ps])
    # cluster tolerance is stated in x; allow the same radius in (x, p)
    labels, centers = _cluster(pts, max(cluster_tol, 0.02 * amp))
    n = len(centers)
    radii = [np.max(np.linalg.norm(pts[labels == j] - centers[j], axis=1), initial=0.0)
             for j in range(n)]
    if n <= max_period and max(radii) < max(cluster_tol, 0.02 * amp):
        return AttractorReport(
            kind=f"period-{n}", period=n, amplitude=amp, offset=x0,
            lyapunov=lyapunov, strobe_x=xs, strobe_p=ps,
        )
    return AttractorReport(
        kind="unclassified", period=None, amplitude=amp, offset=x0,
        lyapunov=lyapunov, strobe_x=xs, strobe_p=ps,
    )


# --- largest Lyapunov exponent (Benettin renormalization) -------------------

def _rhs_real(tau, y, params):
    ar, ai, br, bi = y
    d, k, g, pp = params.delta, params.kappa_bar, params.gamma_bar, params.pump
    return [
        -k * ar - (d - 2.0 * br) * ai,
        (d - 2.0 * br) * ar - k * ai - 0.5,
        bi - g * br,
        -br - g * bi - 0.5 * pp * (ar * ar + ai * ai),
    ]


def _jacobian(y, params):
    ar, ai, br, bi = y
    d, k, g, pp = params.delta, params.kappa_bar, params.gamma_bar, params.pump
    return np.array([
        [-k, -(d - 2.0 * br), 2.0 * ai, 0.0],
        [d - 2.0 * br, -k, -2.0 * ar, 0.0],
        [0.0, 0.0, -g, 1.0],
        [-pp * ar, -pp * ai, -1.0, -g],
    ])


def _rhs_tangent(tau, y, params):
    base = y[:4]
    v = y[4:]
    return np.concatenate([_rhs_real(tau, base, params), _jacobian(base, params) @ v])


@dataclass(frozen=True)
class LyapunovEstimate:
    value: float
    converged: bool
    history: np.ndarray = field(repr=False, default=None)


def largest_lyapunov(
    params: ModelParams,
    state0: ClassicalState,
    tau_end: float = 3000.0,
    transient: float = 300.0,
    renorm_interval: float = TWO_PI,
    rtol: float = 1e-9,
    atol: float = 1e-11,
    convergence_tol: float = 0.2,
) -> LyapunovEstimate:
    """Benettin tangent-space estimate of the largest exponent per unit tau.

    The tangent vector is renormalized every `renorm_interval`; the running
    estimate over the second half of the run must settle within
    `convergence_tol` (relative, floored at 1e-3 absolute) to be flagged
    converged.
    """
    y = np.array([state0.alpha.real, state0.alpha.imag,
                  state0.beta.real, state0.beta.imag])
    sol = solve_ivp(_rhs_real, (0.0, transient), y, method="DOP853",
                    rtol=rtol, atol=atol, args=(params,))
    y = sol.y[:, -1]

    rng = np.random.default_rng(0)
    v = rng.standard_normal(4)
    v /= np.linalg.norm(v)
    n_seg = max(int((tau_end - transient) / renorm_interval), 10)
    logs = np.empty(n_seg)
    state = np.concatenate([y, v])
    for i in range(n_seg):
        sol = solve_ivp(_rhs_tangent, (0.0, renorm_interval), state,
                        method="DOP853", rtol=rtol, atol=atol, args=(params,))
        state = sol.y[:, -1]
        nv = np.linalg.norm(state[4:])
        logs[i] = math.log(nv)
        state[4:] /= nv
    running = np.cumsum(logs) / (renorm_interval * np.arange(1, n_seg + 1))
    lam = running[-1]
    tail = running[n_seg // 2:]
    spread = tail.max() - tail.min()
    converged = spread < max(convergence_tol * abs(lam), 1e-3)
    return LyapunovEstimate(value=lam, converged=converged, history=running)


# --- power balance and amplitude chart ---------------------------------------

def _forced_cavity_rhs(tau, y, delta, kappa_bar, x0, amp):
    x = x0 + amp * math.cos(tau)
    a = y[0]
    return [(1j * delta - kappa_bar) * a - 1j * math.sqrt(2.0) * x * a - 0.5j]


@dataclass(frozen=True)
class PowerBalance:
    p_rad: float   # radiation-pressure gain (positive = net drive into the orbit)
    p_fric: float  # friction loss, gamma_bar * <|beta|^2> over one period
    x0: float      # self-consistent static offset

    @property
    def net(self) -> float:
        return self.p_rad - self.p_fric


def power_balance(
    amp: float,
    delta: float,
    params: ModelParams,
    n_samples: int = 256,
    steady_tol: float = 1e-8,
    x0_tol: float = 1e-8,
    max_x0_iter: int = 200,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> PowerBalance:
    """Power balance for the forced ansatz x(tau) = x0 + A cos(tau).

    The cavity equation is integrated with the forced cantilever until its
    period map converges, averages are taken over one period, and x0 is
    iterated on the period-averaged mechanical statics
    x0 = -(P/sqrt(2)) <|alpha|^2> / (1 + gamma_bar^2).

    Sign convention: p_rad is the mechanical energy gain rate
    -P <|alpha|^2 Im beta>, so that stable amplitudes are downward zero
    crossings of p_rad - p_fric in A.
    """
    if amp < 0:
        raise ValueError("amplitude must be >= 0")
    pp, kb, gb = params.pump, params.kappa_bar, params.gamma_bar
    grid = np.linspace(0.0, TWO_PI, n_samples, endpoint=False)
    cos_g, sin_g = np.cos(grid), np.sin(grid)

    def periodic_cavity(x0):
        """Periodic steady state of the forced cavity; returns |alpha|^2(grid)."""
        a = np.array([0.5 / complex(kb, -(delta - math.sqrt(2.0) * x0))])
        for _ in range(40):
            sol = solve_ivp(_forced_cavity_rhs, (0.0, TWO_PI), a, method="DOP853",
                            rtol=rtol, atol=atol, args=(delta, kb, x0, amp))
            a_next = sol.y[:, -1]
            done = abs(a_next[0] - a[0]) < steady_tol
            a = a_next
            if done:
                break
        else:
            raise ConvergenceError(
                f"forced cavity did not reach a periodic steady state at "
                f"A={amp:.4g}, delta={delta:.4g}"
            )
        sol = solve_ivp(_forced_cavity_rhs, (0.0, TWO_PI), a, method="DOP853",
                        rtol=rtol, atol=atol, t_eval=grid,
                        args=(delta, kb, x0, amp))
        return np.abs(sol.y[0]) ** 2

    scale = pp / (math.sqrt(2.0) * (1.0 + gb**2))

    def residual(x0):
        return x0 + scale * float(periodic_cavity(x0).mean())

    # the target map x0 -> -scale*<|alpha|^2> can have slope < -1 (the bare
    # fixed-point iteration two-cycles), so solve the statics by bracketed
    # root finding instead; <|alpha|^2> <= (0.5/kb)^2 bounds the bracket
    lo = -1.05 * scale * (0.5 / kb) ** 2 - 1e-9
    if residual(lo) > 0:
        # cannot happen: |alpha| <= 1/(2 kb) bounds the steady state
        raise ConvergenceError(
            f"static offset bracket failed at A={amp:.4g}, delta={delta:.4g}"
        )
    x0 = brentq(residual, lo, 0.0, xtol=x0_tol, maxiter=max_x0_iter)
    abs2 = periodic_cavity(x0)

    # ansatz cantilever: p = dx/dtau = -A sin(tau), Im beta = p/sqrt(2)
    im_beta = -amp * sin_g / math.sqrt(2.0)
    x_t = x0 + amp * cos_g
    p_rad = -pp * float(np.mean(abs2 * im_beta))
    p_fric = gb * float(np.mean((x_t**2 + (amp * sin_g) ** 2) / 2.0))
    return PowerBalance(p_rad=p_rad, p_fric=p_fric, x0=x0)


@dataclass(frozen=True)
class AmplitudeChart:
    deltas: np.ndarray
    amps: np.ndarray
    net: np.ndarray                 # net power, shape (len(deltas), len(amps))
    branches: tuple                 # per delta: tuple of stable amplitudes


def _chart_column(args):
    delta, amps, params = args
    net = np.array([power_balance(a, delta, params).net for a in amps])
    stable = []
    for i in range(len(amps) - 1):
        if net[i] > 0.0 and net[i + 1] < 0.0:
            root = brentq(
                lambda a: power_balance(a, delta, params).net,
                amps[i], amps[i + 1], xtol=1e-3,
            )
            stable.append(root)
    return net, tuple(stable)


def amplitude_chart(
    delta_grid: np.ndarray,
    amp_grid: np.ndarray,
    params: ModelParams,
    workers: int = 1,
) -> AmplitudeChart:
    """Net power on the (delta, A) grid, with stable branches refined by
    bisection at each delta.  Columns are independent and may run in
    parallel; results are merged in grid order."""
    delta_grid = np.asarray(delta_grid, dtype=float)
    amp_grid = np.asarray(amp_grid, dtype=float)
    if np.any(np.diff(delta_grid) <= 0) and len(delta_grid) > 1:
        raise ValueError("delta grid must be strictly increasing")
    if np.any(np.diff(amp_grid) <= 0):
        raise ValueError("amplitude grid must be strictly increasing")
    jobs = [(d, amp_grid, params) for d in delta_grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_chart_column, jobs))
    else:
        results = [_chart_column(j) for j in jobs]
    net = np.array([r[0] for r in results])
    branches = tuple(r[1] for r in results)
    return AmplitudeChart(deltas=delta_grid, amps=amp_grid, net=net, branches=branches)
