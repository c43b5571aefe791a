"""Parameters, unit conventions, Fock truncation, and operator construction.

Everything is dimensionless.  Time is measured in units of the inverse
mechanical frequency (tau), and the five knobs are

    delta      laser-cavity detuning in units of the mechanical frequency
    pump       drive power P
    sigma      quantum-classical parameter (radiation coupling / cavity decay)
    kappa_bar  cavity half-damping, kappa / (2 Omega)
    gamma_bar  mechanical half-damping, Gamma / (2 Omega)

From these the quantum engines use the scaled coupling g = 2*sigma*kappa_bar
and scaled drive eps = sqrt(P/8)/g.  The dimensionless Hamiltonian is

    H = (-delta + g (b^dag + b)) a^dag a + b^dag b + eps (a^dag + a)

and dissipation enters with rates 2*gamma_bar (mechanical) and
2*kappa_bar (cavity), so that mean-field equations reduce to the classical
ones in `classical` under alpha = <a>/(2 eps), beta = g <b>.

The scaled quadratures x = (g/sqrt(2))(b^dag + b), p = (i g/sqrt(2))(b^dag - b)
satisfy [x, p] = i g^2; classical orbits overlay them directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps
from scipy.special import gammaln
from scipy.stats import poisson

from .errors import ConfigError, TruncationLeakError


@dataclass(frozen=True)
class ModelParams:
    """The five dimensionless parameters. Defaults are the standard preset
    used throughout: kappa_bar = 0.5, gamma_bar = 5e-4, pump = 1.5."""

    delta: float
    pump: float = 1.5
    sigma: float = 0.0
    kappa_bar: float = 0.5
    gamma_bar: float = 5e-4

    def __post_init__(self):
        if self.pump < 0:
            raise ConfigError(f"pump must be >= 0, got {self.pump}")
        if self.sigma < 0:
            raise ConfigError(f"sigma must be >= 0, got {self.sigma}")
        if self.kappa_bar <= 0:
            raise ConfigError(f"kappa_bar must be > 0, got {self.kappa_bar}")
        if self.gamma_bar <= 0:
            raise ConfigError(f"gamma_bar must be > 0, got {self.gamma_bar}")


@dataclass(frozen=True)
class DerivedCouplings:
    """Scaled coupling/drive/rates derived from ModelParams.

    The drive scale eps is undefined in the classical limit sigma = 0;
    accessing it there raises (the classical engine never needs it).
    """

    g: float
    r_cav: float
    r_mech: float
    _eps: float | None = None

    @property
    def eps(self) -> float:
        if self._eps is None:
            raise ConfigError(
                "drive scale requested at sigma = 0: "
                "the classical limit has no quantum drive scale"
            )
        return self._eps


def derive_couplings(params: ModelParams) -> DerivedCouplings:
    """g = 2*sigma*kappa_bar; eps = sqrt(P/8)/g for g > 0."""
    g = 2.0 * params.sigma * params.kappa_bar
    eps = np.sqrt(params.pump / 8.0) / g if g > 0 else None
    return DerivedCouplings(
        g=g, r_cav=2.0 * params.kappa_bar, r_mech=2.0 * params.gamma_bar, _eps=eps
    )


@dataclass(frozen=True)
class FockConfig:
    """Truncation of the two-mode product space (counts of Fock levels)."""

    n_cav: int
    n_mech: int
    max_dim: int = 500_000       # memory budget on n_cav * n_mech
    dense_threshold: int = 4096  # operators kept dense up to this dimension

    def __post_init__(self):
        if self.n_cav < 2 or self.n_mech < 2:
            raise ConfigError(
                f"need at least 2 Fock levels per mode, got "
                f"({self.n_cav}, {self.n_mech})"
            )
        if self.n_cav * self.n_mech > self.max_dim:
            raise ConfigError(
                f"total dimension {self.n_cav * self.n_mech} exceeds the "
                f"memory budget max_dim={self.max_dim}"
            )

    @property
    def dim(self) -> int:
        return self.n_cav * self.n_mech


def annihilation(n: int) -> np.ndarray:
    """Dense truncated annihilation operator on n Fock levels."""
    return np.diag(np.sqrt(np.arange(1.0, n)), 1)


@dataclass(frozen=True)
class OperatorSet:
    """All operators used by the quantum engines, on the product space
    |n_cav> (x) |n_mech| with index n_c * n_mech + n_m.

    Matrices are numpy arrays below FockConfig.dense_threshold and CSR
    sparse above it; both support `@` against state arrays.  Immutable:
    safe to share across workers.
    """

    n_cav: int
    n_mech: int
    g: float
    a: object
    b: object
    num_a: object
    num_b: object
    h: object
    x: object
    p: object
    x2: object
    p2: object
    # boolean masks selecting basis states on the top Fock level of each mode
    top_cav: np.ndarray = field(repr=False, default=None)
    top_mech: np.ndarray = field(repr=False, default=None)

    @property
    def dim(self) -> int:
        return self.n_cav * self.n_mech

    def dense(self, name: str) -> np.ndarray:
        m = getattr(self, name)
        return m.toarray() if sps.issparse(m) else np.asarray(m)

    def leak(self, psi_or_rho: np.ndarray) -> float:
        """Occupation probability of the top Fock level of either mode.

        Accepts a state vector (dim,), a batch (dim, K) -> per-column max,
        or a density matrix (dim, dim).
        """
        mask = self.top_cav | self.top_mech
        arr = np.asarray(psi_or_rho)
        if arr.ndim == 2 and arr.shape[0] == arr.shape[1] == self.dim:
            return float(np.real(np.trace(arr[np.ix_(mask, mask)])))
        w = np.abs(arr[mask]) ** 2
        return float(np.max(np.sum(w, axis=0))) if arr.ndim == 2 else float(np.sum(w))

    def check_leak(self, psi_or_rho, tau=None, budget=1e-4):
        occ = self.leak(psi_or_rho)
        if occ > budget:
            where = f" at tau={tau:.4g}" if tau is not None else ""
            raise TruncationLeakError(
                f"top-level Fock occupation {occ:.3e} exceeds budget "
                f"{budget:.1e}{where}",
                tau=tau,
                occupation=occ,
            )


def build_operators(
    config: FockConfig, couplings: DerivedCouplings, delta: float
) -> OperatorSet:
    """Assemble a, b, H, and the scaled quadratures on the product space.

    H is real symmetric by construction.  eps is taken from the couplings
    (raises at sigma = 0: the quantum engines are meaningless there).
    """
    nc, nm = config.n_cav, config.n_mech
    g, eps = couplings.g, couplings.eps

    sparse = config.dim > config.dense_threshold

    a1 = annihilation(nc)
    b1 = annihilation(nm)
    na1 = np.diag(np.arange(nc, dtype=float))
    nb1 = np.diag(np.arange(nm, dtype=float))
    xb1 = b1 + b1.T  # b^dag + b on the mechanical factor
    ic = np.eye(nc)
    im = np.eye(nm)

    if sparse:
        # assemble directly in sparse form: dense kron at large dims would
        # transiently allocate dim^2 floats per operator
        def kron(u, v):
            return sps.kron(sps.csr_matrix(u), sps.csr_matrix(v), format="csr")
    else:
        kron = np.kron

    a = kron(a1, im)
    b = kron(ic, b1)
    num_a = kron(na1, im)
    num_b = kron(ic, nb1)

    h = (
        -delta * num_a
        + g * kron(na1, xb1)
        + num_b
        + eps * kron(a1 + a1.T, im)
    )

    x = (g / np.sqrt(2.0)) * kron(ic, xb1)
    p = (1j * g / np.sqrt(2.0)) * kron(ic, b1.T - b1)
    x2 = (g**2 / 2.0) * kron(ic, xb1 @ xb1)
    pp1 = np.real((1j * (b1.T - b1)) @ (1j * (b1.T - b1)))
    p2 = (g**2 / 2.0) * kron(ic, pp1)  # p^2 is real symmetric

    idx_c, idx_m = np.divmod(np.arange(config.dim), nm)
    top_cav = idx_c == nc - 1
    top_mech = idx_m == nm - 1

    return OperatorSet(
        n_cav=nc, n_mech=nm, g=g,
        a=a, b=b, num_a=num_a, num_b=num_b,
        h=h, x=x, p=p, x2=x2, p2=p2,
        top_cav=top_cav, top_mech=top_mech,
    )


def coherent_levels_needed(amplitude: complex, tail_tol: float = 1e-8) -> int:
    """Smallest Fock count whose Poisson tail mass is below tail_tol."""
    mu = abs(amplitude) ** 2
    if mu == 0.0:
        return 2
    n = int(poisson.isf(tail_tol, mu)) + 2
    while poisson.sf(n - 1, mu) >= tail_tol:
        n += 1
    return max(n, 2)


def coherent_state(amplitude: complex, dim: int, tail_tol: float = 1e-8) -> np.ndarray:
    """Truncated coherent state c_n = exp(-|z|^2/2) z^n / sqrt(n!), renormalized.

    Refuses truncations that drop more than tail_tol of Poisson mass and
    reports the dimension that would suffice.
    """
    z = complex(amplitude)
    mu = abs(z) ** 2
    if mu > 0 and poisson.sf(dim - 1, mu) >= tail_tol:
        raise ConfigError(
            f"coherent amplitude |z|={abs(z):.4g} needs at least "
            f"{coherent_levels_needed(z, tail_tol)} Fock levels "
            f"(tail mass {poisson.sf(dim - 1, mu):.2e} at dim={dim})"
        )
    n = np.arange(dim)
    if mu == 0.0:
        c = np.zeros(dim, dtype=complex)
        c[0] = 1.0
        return c
    # log-space magnitudes to stay finite at large |z|
    logmag = -mu / 2.0 + n * np.log(abs(z)) - 0.5 * gammaln(n + 1.0)
    c = np.exp(logmag) * np.exp(1j * n * np.angle(z))
    return c / np.linalg.norm(c)


def cat_state(z1: complex, z2: complex, dim: int, tail_tol: float = 1e-8) -> np.ndarray:
    """Normalized superposition of two coherent states."""
    psi = coherent_state(z1, dim, tail_tol) + coherent_state(z2, dim, tail_tol)
    return psi / np.linalg.norm(psi)


def product_state(cavity: np.ndarray, mech: np.ndarray) -> np.ndarray:
    return np.kron(cavity, mech)
