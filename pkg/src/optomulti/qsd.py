"""Quantum-state-diffusion trajectory engine.

Each trajectory |psi_k> follows the continuous stochastic unraveling

    d psi = [ -i H - sum_m ( L_m^dag L_m / 2 - <L_m^dag> L_m
                             + |<L_m>|^2 / 2 ) psi ] d tau
            + sum_m (L_m - <L_m>) psi  d xi_m

with L_1 = sqrt(2*gamma_bar) b, L_2 = sqrt(2*kappa_bar) a and complex
Wiener increments E[d xi] = 0, E[d xi d xi*] = d tau, E[d xi^2] = 0.
These rates make the projector ensemble mean obey the same dimensionless
Lindblad equation as `master` exactly; this is validated by the
generator-equivalence tests rather than assumed.

Noise per trajectory comes from a counter-based Philox stream keyed by the
trajectory seed and drawn in fixed-size chunks, so a trajectory is
bit-identical whether run alone or inside a batched ensemble, in any
execution order.

The time stepper is Euler-Maruyama with per-step renormalization; a
higher-order drift backend ("rk4") treats the deterministic part with a
classic Runge-Kutta sweep and keeps the Euler noise term (strong order is
still 1/2, but stiff Hamiltonians at large truncations stay stable at the
default step).  Ensembles are propagated as a (dim, K) block so the inner
loop is dense/sparse matrix algebra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NormCollapseError, TruncationLeakError
from .model import ModelParams, OperatorSet

TWO_PI = 2.0 * math.pi
NOISE_CHUNK = 512  # steps of noise drawn per RNG call; part of the stream contract


@dataclass(frozen=True)
class Schedule:
    """Recording plan for a trajectory run.

    Records are taken every `record_stride` in tau from 0 to tau_end
    inclusive; full state snapshots are stored at `snapshot_taus` (snapped
    to the step grid).
    """

    tau_end: float
    record_stride: float
    snapshot_taus: tuple = ()

    def __post_init__(self):
        if self.tau_end <= 0 or self.record_stride <= 0:
            raise ConfigError("tau_end and record_stride must be positive")
        if self.record_stride > self.tau_end + 1e-12:
            raise ConfigError("record_stride exceeds tau_end")

    @property
    def record_taus(self) -> np.ndarray:
        n = int(round(self.tau_end / self.record_stride))
        return self.record_stride * np.arange(n + 1)


@dataclass(frozen=True)
class TrajectoryRecord:
    seed: int
    tau: np.ndarray
    x: np.ndarray
    p: np.ndarray
    exp_a: np.ndarray
    exp_b: np.ndarray
    sigma_x: np.ndarray
    sigma_p: np.ndarray
    snapshots: dict = field(default_factory=dict)  # tau -> state vector


@dataclass(frozen=True)
class Ensemble:
    n_traj: int
    base_seed: int
    tau: np.ndarray
    # per-trajectory series, shape (n_times, K)
    x: np.ndarray
    p: np.ndarray
    exp_a: np.ndarray
    exp_b: np.ndarray
    sigma_x: np.ndarray
    sigma_p: np.ndarray
    failed: tuple = ()                      # trajectory indices excluded
    mech_rho: dict = field(default_factory=dict)   # tau -> mean reduced matrix
    snapshots: dict = field(default_factory=dict)  # tau -> (dim, K) states

    @property
    def ok(self) -> np.ndarray:
        m = np.ones(self.n_traj, dtype=bool)
        m[list(self.failed)] = False
        return m

    def mean(self, name: str) -> np.ndarray:
        return getattr(self, name)[:, self.ok].mean(axis=1)

    def stderr(self, name: str) -> np.ndarray:
        vals = getattr(self, name)[:, self.ok]
        k = vals.shape[1]
        return vals.std(axis=1, ddof=1) / math.sqrt(k) if k > 1 else np.zeros(len(vals))

    def record(self, k: int) -> TrajectoryRecord:
        return TrajectoryRecord(
            seed=self.base_seed + k, tau=self.tau,
            x=self.x[:, k], p=self.p[:, k],
            exp_a=self.exp_a[:, k], exp_b=self.exp_b[:, k],
            sigma_x=self.sigma_x[:, k], sigma_p=self.sigma_p[:, k],
            snapshots={t: s[:, k] for t, s in self.snapshots.items()},
        )


class _Noise:
    """Per-trajectory Philox streams, drawn in fixed chunks of NOISE_CHUNK
    steps so single and batched runs consume identical sequences."""

    def __init__(self, seeds):
        self.gens = [np.random.Generator(np.random.Philox(key=int(s))) for s in seeds]
        self.buf = None
        self.pos = NOISE_CHUNK

    def increments(self, sqrt_half_dt: float):
        """Complex (2, K) increments for one step, E[|dxi|^2] = dt per mode."""
        if self.pos >= NOISE_CHUNK:
            draws = [g.standard_normal((NOISE_CHUNK, 2, 2)) for g in self.gens]
            self.buf = np.stack(draws, axis=-1)  # (CHUNK, 2, 2, K)
            self.pos = 0
        z = self.buf[self.pos]
        self.pos += 1
        return sqrt_half_dt * (z[:, 0, :] + 1j * z[:, 1, :])


def _expectations(psi: np.ndarray, op_psi: np.ndarray) -> np.ndarray:
    """<op> per column for normalized psi; both (dim, K)."""
    return np.einsum("ik,ik->k", psi.conj(), op_psi)


class _Engine:
    """Batched propagator over a (dim, K) state block."""

    def __init__(self, ops: OperatorSet, params: ModelParams, method: str = "rk4"):
        if method not in ("em", "rk4"):
            raise ConfigError(f"unknown stepper method {method!r}")
        self.method = method
        self.ops = ops
        self.gb2 = 2.0 * params.gamma_bar
        self.kb2 = 2.0 * params.kappa_bar
        h = ops.h
        # -iH - (gamma_bar n_b + kappa_bar n_a): all deterministic linear terms
        self.k_eff = (-1j) * h - 0.5 * (self.gb2 * ops.num_b + self.kb2 * ops.num_a)
        self.a = ops.a
        self.b = ops.b

    def drift(self, psi: np.ndarray) -> np.ndarray:
        norm2 = np.real(np.einsum("ik,ik->k", psi.conj(), psi))
        a_psi = self.a @ psi
        b_psi = self.b @ psi
        ea = _expectations(psi, a_psi) / norm2
        eb = _expectations(psi, b_psi) / norm2
        out = self.k_eff @ psi
        out += (self.gb2 * eb.conj()) * b_psi + (self.kb2 * ea.conj()) * a_psi
        out -= 0.5 * (self.gb2 * np.abs(eb) ** 2 + self.kb2 * np.abs(ea) ** 2) * psi
        return out

    def noise(self, psi: np.ndarray, dxi: np.ndarray) -> np.ndarray:
        """Diffusion increment; dxi has shape (2, K) for (mechanical, cavity)."""
        a_psi = self.a @ psi
        b_psi = self.b @ psi
        ea = _expectations(psi, a_psi)
        eb = _expectations(psi, b_psi)
        out = math.sqrt(self.gb2) * (b_psi - eb * psi) * dxi[0]
        out += math.sqrt(self.kb2) * (a_psi - ea * psi) * dxi[1]
        return out

    def step(self, psi: np.ndarray, dt: float, dxi: np.ndarray) -> np.ndarray:
        if self.method == "em":
            psi_new = psi + dt * self.drift(psi) + self.noise(psi, dxi)
        else:
            k1 = self.drift(psi)
            k2 = self.drift(psi + 0.5 * dt * k1)
            k3 = self.drift(psi + 0.5 * dt * k2)
            k4 = self.drift(psi + dt * k3)
            psi_new = psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            psi_new += self.noise(psi, dxi)
        norms = np.linalg.norm(psi_new, axis=0)
        if np.any(norms < 1e-6):
            bad = int(np.argmin(norms))
            raise NormCollapseError(
                f"state norm collapsed to {norms[bad]:.3e} in trajectory "
                f"column {bad}"
            )
        return psi_new / norms


def qsd_drift(psi: np.ndarray, ops: OperatorSet, params: ModelParams) -> np.ndarray:
    """Deterministic part of the unraveling for a single normalized state."""
    return _Engine(ops, params, "em").drift(psi[:, None])[:, 0]


def qsd_noise(psi: np.ndarray, ops: OperatorSet, params: ModelParams,
              dxi_mech: complex, dxi_cav: complex) -> np.ndarray:
    """Stochastic increment for given complex Wiener increments."""
    dxi = np.array([[dxi_mech], [dxi_cav]], dtype=complex)
    return _Engine(ops, params, "em").noise(psi[:, None], dxi)[:, 0]


def qsd_step(psi: np.ndarray, ops: OperatorSet, params: ModelParams,
             dt: float, dxi_mech: complex, dxi_cav: complex,
             method: str = "em", max_dt: float = 1e-3 * TWO_PI) -> np.ndarray:
    """One discrete update (drift*dt + noise, renormalized)."""
    if dt > max_dt * (1 + 1e-9):
        raise ConfigError(f"dt={dt:.3e} above the stability bound {max_dt:.3e}")
    dxi = np.array([[dxi_mech], [dxi_cav]], dtype=complex)
    return _Engine(ops, params, method).step(psi[:, None], dt, dxi)[:, 0]


def _run_block(
    psi0: np.ndarray,
    seeds,
    ops: OperatorSet,
    params: ModelParams,
    schedule: Schedule,
    dt: float,
    method: str,
    leak_budget: float,
    failure_budget: float,
):
    """Propagate a block of trajectories; shared core of run_trajectory and
    run_ensemble."""
    k_traj = len(seeds)
    dim = ops.dim
    psi = np.tile(psi0.astype(complex)[:, None], (1, k_traj))
    psi /= np.linalg.norm(psi, axis=0)

    record_taus = schedule.record_taus
    steps_per_record = max(int(round(schedule.record_stride / dt)), 1)
    dt_eff = schedule.record_stride / steps_per_record
    n_rec = len(record_taus)

    snap_idx = {}
    for t in schedule.snapshot_taus:
        snap_idx[int(round(t / dt_eff))] = float(t)

    eng = _Engine(ops, params, method)
    noise = _Noise(seeds)
    sq = math.sqrt(dt_eff / 2.0)

    cols = {n: np.empty((n_rec, k_traj), dtype=c)
            for n, c in (("x", float), ("p", float), ("sigma_x", float),
                         ("sigma_p", float))}
    cols["exp_a"] = np.empty((n_rec, k_traj), dtype=complex)
    cols["exp_b"] = np.empty((n_rec, k_traj), dtype=complex)
    snapshots: dict = {}
    failed_at: dict[int, float] = {}

    def record(i_rec):
        ex = np.real(_expectations(psi, ops.x @ psi))
        ep = np.real(_expectations(psi, ops.p @ psi))
        ex2 = np.real(_expectations(psi, ops.x2 @ psi))
        ep2 = np.real(_expectations(psi, ops.p2 @ psi))
        cols["x"][i_rec] = ex
        cols["p"][i_rec] = ep
        cols["sigma_x"][i_rec] = np.sqrt(np.clip(ex2 - ex**2, 0.0, None))
        cols["sigma_p"][i_rec] = np.sqrt(np.clip(ep2 - ep**2, 0.0, None))
        cols["exp_a"][i_rec] = _expectations(psi, ops.a @ psi)
        cols["exp_b"][i_rec] = _expectations(psi, ops.b @ psi)

    def check_leak(tau):
        mask = ops.top_cav | ops.top_mech
        occ = np.sum(np.abs(psi[mask]) ** 2, axis=0)
        for k in np.nonzero(occ > leak_budget)[0]:
            if int(k) not in failed_at:
                failed_at[int(k)] = tau
                # park the failed column in a harmless state; it is excluded
                # from every reduction afterwards
                psi[:, k] = 0.0
                psi[0, k] = 1.0

    record(0)
    check_leak(0.0)
    if 0 in snap_idx:
        snapshots[snap_idx[0]] = psi.copy()
    step_count = 0
    for i_rec in range(1, n_rec):
        for _ in range(steps_per_record):
            dxi = noise.increments(sq)
            psi[:] = eng.step(psi, dt_eff, dxi)
            step_count += 1
            if step_count in snap_idx:
                snapshots[snap_idx[step_count]] = psi.copy()
        check_leak(record_taus[i_rec])
        record(i_rec)

    if len(failed_at) > failure_budget * k_traj:
        first = min(failed_at.items(), key=lambda kv: kv[1])
        raise TruncationLeakError(
            f"{len(failed_at)}/{k_traj} trajectories exceeded the truncation "
            f"leak budget (first: trajectory {first[0]} at tau={first[1]:.4g}); "
            f"failure budget is {failure_budget:.0%}",
            tau=first[1],
        )
    return record_taus, cols, snapshots, tuple(sorted(failed_at))


def run_trajectory(
    psi0: np.ndarray,
    seed: int,
    ops: OperatorSet,
    params: ModelParams,
    schedule: Schedule,
    dt: float = 1e-3 * TWO_PI,
    method: str = "rk4",
    leak_budget: float = 1e-4,
) -> TrajectoryRecord:
    """Single trajectory; bit-identical on re-run with the same arguments.

    A truncation-leak overflow in a single-trajectory run is always fatal
    (there is no ensemble to absorb it)."""
    taus, cols, snaps, failed = _run_block(
        psi0, [seed], ops, params, schedule, dt, method, leak_budget,
        failure_budget=0.0,
    )
    return TrajectoryRecord(
        seed=seed, tau=taus,
        x=cols["x"][:, 0], p=cols["p"][:, 0],
        exp_a=cols["exp_a"][:, 0], exp_b=cols["exp_b"][:, 0],
        sigma_x=cols["sigma_x"][:, 0], sigma_p=cols["sigma_p"][:, 0],
        snapshots={t: s[:, 0] for t, s in snaps.items()},
    )


def run_ensemble(
    n_traj: int,
    base_seed: int,
    psi0: np.ndarray,
    ops: OperatorSet,
    params: ModelParams,
    schedule: Schedule,
    dt: float = 1e-3 * TWO_PI,
    method: str = "rk4",
    leak_budget: float = 1e-4,
    failure_budget: float = 0.01,
) -> Ensemble:
    """Seeded ensemble: trajectory k uses seed base_seed + k.

    Reductions (means, standard errors, mean reduced mechanical state at
    snapshot times) are ordered folds over k and therefore deterministic.
    Individual trajectory failures are excluded up to `failure_budget`,
    beyond which the whole run fails.
    """
    if n_traj < 1:
        raise ConfigError("need at least one trajectory")
    seeds = [base_seed + k for k in range(n_traj)]
    taus, cols, snaps, failed = _run_block(
        psi0, seeds, ops, params, schedule, dt, method, leak_budget,
        failure_budget,
    )
    ok = np.ones(n_traj, dtype=bool)
    ok[list(failed)] = False
    mech_rho = {}
    for t, block in snaps.items():
        good = block[:, ok]
        resh = good.reshape(ops.n_cav, ops.n_mech, good.shape[1])
        mech_rho[t] = np.einsum("cmk,cnk->mn", resh, resh.conj()) / good.shape[1]
    return Ensemble(
        n_traj=n_traj, base_seed=base_seed, tau=taus,
        x=cols["x"], p=cols["p"], exp_a=cols["exp_a"], exp_b=cols["exp_b"],
        sigma_x=cols["sigma_x"], sigma_p=cols["sigma_p"],
        failed=failed, mech_rho=mech_rho, snapshots=snaps,
    )
