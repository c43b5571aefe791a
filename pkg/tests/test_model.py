import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optomulti.errors import ConfigError, TruncationLeakError
from optomulti.model import (
    FockConfig,
    ModelParams,
    annihilation,
    build_operators,
    cat_state,
    coherent_levels_needed,
    coherent_state,
    derive_couplings,
    product_state,
)


def test_param_validation():
    with pytest.raises(ConfigError):
        ModelParams(delta=-0.4, pump=-1.0)
    with pytest.raises(ConfigError):
        ModelParams(delta=-0.4, kappa_bar=0.0)
    with pytest.raises(ConfigError):
        ModelParams(delta=-0.4, gamma_bar=-1e-4)
    with pytest.raises(ConfigError):
        ModelParams(delta=-0.4, sigma=-0.1)


def test_derived_couplings():
    p = ModelParams(delta=-0.4, sigma=0.1)
    c = derive_couplings(p)
    assert c.g == pytest.approx(2 * 0.1 * 0.5)
    assert c.eps == pytest.approx(np.sqrt(1.5 / 8.0) / c.g)
    assert c.r_cav == pytest.approx(1.0)
    assert c.r_mech == pytest.approx(1e-3)


def test_eps_undefined_in_classical_limit():
    c = derive_couplings(ModelParams(delta=-0.4))
    with pytest.raises(ConfigError):
        c.eps


@given(
    sigma=st.floats(1e-3, 10.0),
    pump=st.floats(1e-6, 100.0),
    kappa=st.floats(1e-3, 10.0),
)
def test_pump_reconstruction_roundtrip(sigma, pump, kappa):
    # P = 8 eps^2 g^2 must invert derive_couplings to 12 digits
    c = derive_couplings(ModelParams(delta=-0.4, pump=pump, sigma=sigma,
                                     kappa_bar=kappa))
    assert 8.0 * c.eps**2 * c.g**2 == pytest.approx(pump, rel=1e-12)


def test_annihilation_ladder():
    b = annihilation(5)
    comm = b @ b.conj().T - b.conj().T @ b
    # canonical on all but the top level
    assert np.allclose(comm[:-1, :-1], np.eye(4))


def test_coherent_state_examples():
    vac = coherent_state(0j, 6)
    assert np.allclose(vac, np.eye(6)[0])

    c = coherent_state(1.0, 20)
    n_mean = np.sum(np.arange(20) * np.abs(c) ** 2)
    assert n_mean == pytest.approx(1.0, abs=1e-8)
    assert np.linalg.norm(c) == pytest.approx(1.0, abs=1e-14)

    z = 2.0 + 1.0j
    c = coherent_state(z, 40)
    b = annihilation(40)
    assert np.vdot(c, b @ c) == pytest.approx(z, abs=1e-6)


@given(st.complex_numbers(max_magnitude=2.5, allow_nan=False, allow_infinity=False))
@settings(max_examples=50)
def test_coherent_state_normalized(z):
    dim = coherent_levels_needed(z)
    c = coherent_state(z, dim)
    assert np.linalg.norm(c) == pytest.approx(1.0, abs=1e-12)


def test_coherent_state_rejects_truncation_overflow():
    with pytest.raises(ConfigError):
        coherent_state(3.0, 4)


def test_cat_state_norm_and_parity():
    cat = cat_state(1.5, -1.5, 30)
    assert np.linalg.norm(cat) == pytest.approx(1.0, abs=1e-12)
    # even superposition of +-z has support only on even Fock levels
    assert np.max(np.abs(cat[1::2])) < 1e-12


def test_fock_config_validation():
    with pytest.raises(ConfigError):
        FockConfig(1, 5)
    with pytest.raises(ConfigError):
        FockConfig(1000, 1000, max_dim=10_000)


@pytest.fixture(scope="module")
def small_ops():
    params = ModelParams(delta=-0.4, sigma=0.3)
    return build_operators(FockConfig(4, 5), derive_couplings(params), params.delta)


def test_operator_shapes_and_hermiticity(small_ops):
    h = small_ops.dense("h")
    assert h.shape == (20, 20)
    assert np.allclose(h, h.conj().T)
    assert np.isrealobj(h) or np.allclose(h.imag, 0)


def test_quadrature_commutator(small_ops):
    # [x, p] = i g^2 away from the truncation edge
    x, p = small_ops.dense("x"), small_ops.dense("p")
    comm = x @ p - p @ x
    keep = ~small_ops.top_mech
    expected = 1j * small_ops.g**2 * np.eye(small_ops.dim)
    assert np.allclose(comm[np.ix_(keep, keep)], expected[np.ix_(keep, keep)])


def test_squared_quadratures(small_ops):
    x, p = small_ops.dense("x"), small_ops.dense("p")
    assert np.allclose(small_ops.dense("x2"), x @ x)
    assert np.allclose(small_ops.dense("p2"), np.real(p @ p))


def test_sparse_dense_agree():
    params = ModelParams(delta=-0.7, sigma=0.2, pump=0.3)
    coup = derive_couplings(params)
    dense = build_operators(FockConfig(4, 6), coup, params.delta)
    sparse = build_operators(FockConfig(4, 6, dense_threshold=8), coup, params.delta)
    for name in ("a", "b", "num_a", "num_b", "h", "x", "p", "x2", "p2"):
        assert np.allclose(sparse.dense(name), dense.dense(name)), name


def test_product_state_index_convention(small_ops):
    cav = np.eye(4)[2].astype(complex)   # |2> cavity
    mech = np.eye(5)[3].astype(complex)  # |3> cantilever
    psi = product_state(cav, mech)
    assert np.vdot(psi, small_ops.dense("num_a") @ psi) == pytest.approx(2.0)
    assert np.vdot(psi, small_ops.dense("num_b") @ psi) == pytest.approx(3.0)


def test_leak_monitor(small_ops):
    top = product_state(np.eye(4)[3].astype(complex), np.eye(5)[0].astype(complex))
    assert small_ops.leak(top) == pytest.approx(1.0)
    with pytest.raises(TruncationLeakError):
        small_ops.check_leak(top, tau=1.0, budget=1e-4)
    vac = product_state(np.eye(4)[0].astype(complex), np.eye(5)[0].astype(complex))
    assert small_ops.leak(vac) == 0.0
    small_ops.check_leak(vac)  # no raise
    # density-matrix form
    rho = np.outer(top, top.conj())
    assert small_ops.leak(rho) == pytest.approx(1.0)
