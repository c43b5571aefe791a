import numpy as np
import pytest

from optomulti.errors import ConfigError, TruncationLeakError
from optomulti.master import lindblad_rhs
from optomulti.model import (
    FockConfig,
    ModelParams,
    build_operators,
    coherent_state,
    derive_couplings,
    product_state,
)
from optomulti.qsd import (
    Schedule,
    _Engine,
    qsd_drift,
    qsd_noise,
    qsd_step,
    run_ensemble,
    run_trajectory,
)

PARAMS = ModelParams(delta=-0.4, pump=0.05, sigma=1.0)


@pytest.fixture(scope="module")
def ops():
    return build_operators(FockConfig(5, 5), derive_couplings(PARAMS), PARAMS.delta)


@pytest.fixture(scope="module")
def psi0(ops):
    return product_state(coherent_state(0.1, 5), coherent_state(0.1j, 5))


def test_schedule_grid():
    s = Schedule(tau_end=1.0, record_stride=0.25)
    assert np.allclose(s.record_taus, [0.0, 0.25, 0.5, 0.75, 1.0])
    with pytest.raises(ConfigError):
        Schedule(tau_end=-1.0, record_stride=0.1)
    with pytest.raises(ConfigError):
        Schedule(tau_end=0.1, record_stride=0.5)


def test_noise_null_on_vacuum(ops):
    # the vacuum is a joint eigenstate of both annihilators, so the
    # stochastic increment vanishes identically for any Wiener increment
    vac = np.zeros(ops.dim, complex)
    vac[0] = 1.0
    out = qsd_noise(vac, ops, PARAMS, 0.7 - 0.2j, -1.1 + 0.4j)
    assert np.max(np.abs(out)) == 0.0


def test_noise_small_on_coherent_state(ops, psi0):
    # truncated coherent states are annihilator eigenstates up to tail mass
    out = qsd_noise(psi0, ops, PARAMS, 1.0, 1.0)
    assert np.linalg.norm(out) < 1e-3


def test_zero_noise_step_is_pure_drift(ops, psi0):
    dt = 1e-4
    stepped = qsd_step(psi0, ops, PARAMS, dt, 0.0, 0.0, method="em")
    manual = psi0 + dt * qsd_drift(psi0, ops, PARAMS)
    manual /= np.linalg.norm(manual)
    assert np.allclose(stepped, manual, atol=1e-14)


def test_step_rejects_unstable_dt(ops, psi0):
    with pytest.raises(ConfigError):
        qsd_step(psi0, ops, PARAMS, 1.0, 0.0, 0.0)


def test_states_stay_normalized(ops, psi0):
    sched = Schedule(tau_end=1.0, record_stride=0.5, snapshot_taus=(0.0, 1.0))
    rec = run_trajectory(psi0, 11, ops, PARAMS, sched, dt=1e-3,
                         leak_budget=np.inf)
    for snap in rec.snapshots.values():
        assert np.linalg.norm(snap) == pytest.approx(1.0, abs=1e-12)
    assert 0.0 in rec.snapshots  # the initial state is captured too


def test_determinism_bit_identical(ops, psi0):
    sched = Schedule(tau_end=0.5, record_stride=0.1)
    a = run_trajectory(psi0, 42, ops, PARAMS, sched, dt=1e-3, leak_budget=np.inf)
    b = run_trajectory(psi0, 42, ops, PARAMS, sched, dt=1e-3, leak_budget=np.inf)
    assert np.array_equal(a.x, b.x)
    assert np.array_equal(a.sigma_p, b.sigma_p)


def test_single_trajectory_equals_k1_ensemble(ops, psi0):
    sched = Schedule(tau_end=0.5, record_stride=0.1)
    single = run_trajectory(psi0, 7, ops, PARAMS, sched, dt=1e-3,
                            leak_budget=np.inf)
    ens = run_ensemble(1, 7, psi0, ops, PARAMS, sched, dt=1e-3,
                       leak_budget=np.inf)
    assert np.array_equal(single.x, ens.x[:, 0])
    assert np.array_equal(single.p, ens.p[:, 0])


def test_ensemble_trajectory_k_matches_seed_k(ops, psi0):
    # trajectory k of an ensemble uses the same noise stream as a standalone
    # run with seed base_seed + k; the batched matrix products differ from
    # the single-column ones only at accumulation-order roundoff
    sched = Schedule(tau_end=0.5, record_stride=0.1)
    ens = run_ensemble(4, 100, psi0, ops, PARAMS, sched, dt=1e-3,
                       leak_budget=np.inf)
    solo = run_trajectory(psi0, 102, ops, PARAMS, sched, dt=1e-3,
                          leak_budget=np.inf)
    assert np.allclose(ens.record(2).x, solo.x, atol=1e-12, rtol=0)


def test_leak_aborts_single_trajectory(ops, psi0):
    sched = Schedule(tau_end=5.0, record_stride=0.5)
    with pytest.raises(TruncationLeakError):
        run_trajectory(psi0, 1, ops, PARAMS, sched, dt=1e-3, leak_budget=1e-12)


def test_mean_projector_increment_matches_lindblad(ops, psi0):
    # one Euler-Maruyama step over many noise realizations: the ensemble
    # mean of the projector increment must reproduce the Lindblad generator
    rng = np.random.default_rng(5)
    k = 200_000
    dt = 1e-2
    psi = np.repeat(psi0[:, None], k, axis=1)
    dxi = np.sqrt(dt / 2.0) * (
        rng.standard_normal((2, k)) + 1j * rng.standard_normal((2, k))
    )
    eng = _Engine(ops, PARAMS, method="em")
    stepped = eng.step(psi, dt, dxi)
    mean_proj = np.einsum("ik,jk->ij", stepped, stepped.conj()) / k
    rho0 = np.outer(psi0, psi0.conj())
    numeric = (mean_proj - rho0) / dt
    exact = lindblad_rhs(rho0, ops, PARAMS)
    scale = np.abs(exact).max()
    # tolerance: O(dt) discretization bias plus Monte Carlo error
    assert np.abs(numeric - exact).max() < 0.05 * scale


def test_em_strong_convergence_under_refinement(ops, psi0):
    # shared-Brownian refinement: halving dt must shrink the strong error
    rng = np.random.default_rng(9)
    t_end, n_coarse = 0.5, 64
    dt_c = t_end / n_coarse
    k = 128
    fine_dxi = np.sqrt(dt_c / 4.0) * (
        rng.standard_normal((2 * n_coarse, 2, k))
        + 1j * rng.standard_normal((2 * n_coarse, 2, k))
    )
    eng = _Engine(ops, PARAMS, method="em")

    def propagate(dxis, dt):
        psi = np.repeat(psi0[:, None], k, axis=1)
        for dxi in dxis:
            psi = eng.step(psi, dt, dxi)
        return psi

    fine = propagate(fine_dxi, dt_c / 2.0)
    coarse_dxi = fine_dxi[0::2] + fine_dxi[1::2]
    coarse = propagate(coarse_dxi, dt_c)
    # even coarser path (dt = 2 dt_c) from the same Brownian motion
    coarser = propagate(coarse_dxi[0::2] + coarse_dxi[1::2], 2.0 * dt_c)

    err_c = np.linalg.norm(fine - coarse, axis=0).mean()
    err_2c = np.linalg.norm(fine - coarser, axis=0).mean()
    assert err_2c / err_c > 1.2  # error decreases under refinement


def test_failure_budget_enforced(ops, psi0):
    sched = Schedule(tau_end=5.0, record_stride=0.5)
    with pytest.raises(TruncationLeakError):
        run_ensemble(4, 1, psi0, ops, PARAMS, sched, dt=1e-3,
                     leak_budget=1e-12, failure_budget=0.01)
