"""Exact (truncated) Lindblad master-equation engine.

Small-dimension oracle used to validate the stochastic trajectory engine
and to compute references: adaptive integration of

    d rho/d tau = -i [H, rho] + 2*gamma_bar D[b, rho] + 2*kappa_bar D[a, rho]

with D[L, rho] = L rho L^dag - (L^dag L rho + rho L^dag L)/2, plus
expectation values, the mechanical reduced state, and two-time correlators
via quantum regression.  Density matrices scale as dim^2 in memory; large
truncations belong to the trajectory engine, not here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConvergenceError
from .model import ModelParams, OperatorSet


def dissipator(L: np.ndarray, rho: np.ndarray) -> np.ndarray:
    Ld = L.conj().T
    LdL = Ld @ L
    return L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL)


def lindblad_rhs(rho: np.ndarray, ops: OperatorSet, params: ModelParams) -> np.ndarray:
    """Dimensionless Lindblad generator applied to rho."""
    h = ops.dense("h")
    out = -1j * (h @ rho - rho @ h)
    out += 2.0 * params.gamma_bar * dissipator(ops.dense("b"), rho)
    out += 2.0 * params.kappa_bar * dissipator(ops.dense("a"), rho)
    return out


def expectation(rho: np.ndarray, operator: np.ndarray) -> complex:
    return complex(np.trace(rho @ operator))


def uncertainty(rho: np.ndarray, operator: np.ndarray) -> float:
    """sqrt(<O^2> - <O>^2) for Hermitian O; tiny negative variances clip to 0."""
    op = np.asarray(operator)
    if not np.allclose(op, op.conj().T, atol=1e-12):
        raise ValueError("uncertainty requires a Hermitian operator")
    mean = np.real(expectation(rho, op))
    var = np.real(expectation(rho, op @ op)) - mean**2
    if var < -1e-12:
        raise ValueError(f"variance {var:.3e} is negative beyond roundoff")
    return float(np.sqrt(max(var, 0.0)))


def partial_trace_mech(rho: np.ndarray, n_cav: int, n_mech: int) -> np.ndarray:
    """Trace out the cavity; index convention i = n_c * n_mech + n_m."""
    r = rho.reshape(n_cav, n_mech, n_cav, n_mech)
    return np.einsum("cmcn->mn", r)


@dataclass(frozen=True)
class MasterSeries:
    tau: np.ndarray
    states: list | None                   # density matrices at tau, or None
    observables: dict = field(default_factory=dict)  # name -> complex array


def _evolve_matrix(
    m0: np.ndarray,
    ops: OperatorSet,
    params: ModelParams,
    tau_grid: np.ndarray,
    rtol: float,
    atol: float,
):
    """Integrate d m/d tau = L(m) for an arbitrary seed matrix m0 (used both
    for density matrices and for regression seeds)."""
    dim = ops.dim
    h = ops.dense("h")
    b = ops.dense("b")
    a = ops.dense("a")
    gb2, kb2 = 2.0 * params.gamma_bar, 2.0 * params.kappa_bar
    bd, ad = b.conj().T, a.conj().T
    nb, na = bd @ b, ad @ a
    # anti-Hermitian effective drift: -iH - (gamma_bar nb + kappa_bar na)
    k_eff = -1j * h - 0.5 * (gb2 * nb + kb2 * na)

    def rhs(tau, y):
        m = y.reshape(dim, dim)
        out = k_eff @ m + m @ k_eff.conj().T
        out += gb2 * (b @ m @ bd) + kb2 * (a @ m @ ad)
        return out.ravel()

    if tau_grid[-1] == tau_grid[0]:
        return [m0.astype(complex).copy() for _ in tau_grid]

    sol = solve_ivp(rhs, (tau_grid[0], tau_grid[-1]), m0.ravel().astype(complex),
                    t_eval=tau_grid, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise ConvergenceError(f"master integration failed: {sol.message}")
    return [sol.y[:, i].reshape(dim, dim) for i in range(sol.y.shape[1])]


def integrate_master(
    rho0: np.ndarray,
    ops: OperatorSet,
    params: ModelParams,
    tau_grid: np.ndarray,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    observables: dict | None = None,
    store_states: bool = True,
    leak_budget: float = 1e-4,
) -> MasterSeries:
    """Adaptive integration of the vectorized Liouvillian.

    `observables` maps names to operators; their traces against rho are
    recorded at every grid time.  Truncation leak (top Fock level occupation)
    is checked at each grid point and aborts above `leak_budget`.
    """
    tau_grid = np.asarray(tau_grid, dtype=float)
    states = _evolve_matrix(rho0, ops, params, tau_grid, rtol, atol)
    obs = {}
    if observables:
        for name, op in observables.items():
            op_d = op.toarray() if hasattr(op, "toarray") else np.asarray(op)
            obs[name] = np.array([np.trace(r @ op_d) for r in states])
    for tau, r in zip(tau_grid, states):
        ops.check_leak(r, tau=tau, budget=leak_budget)
    return MasterSeries(tau=tau_grid, states=states if store_states else None,
                        observables=obs)


def two_time_correlation(
    rho_tau: np.ndarray,
    ops: OperatorSet,
    params: ModelParams,
    dtau_grid: np.ndarray,
    operator: np.ndarray | None = None,
) -> np.ndarray:
    """Quantum-regression correlator <O(tau) O(tau + dtau)> for the state
    rho_tau: the seed O rho is propagated under the same generator and traced
    against O at each lag.  Defaults to the scaled position quadrature."""
    op = ops.dense("x") if operator is None else np.asarray(operator)
    dtau_grid = np.asarray(dtau_grid, dtype=float)
    prepend = dtau_grid[0] != 0.0
    grid = np.concatenate([[0.0], dtau_grid]) if prepend else dtau_grid
    seeds = _evolve_matrix(op @ rho_tau, ops, params, grid,
                           rtol=1e-9, atol=1e-11)
    if prepend:
        seeds = seeds[1:]
    return np.array([np.trace(op @ s) for s in seeds])
