"""Construction of the open Rabi model: parameters, Hamiltonian, Liouvillian.

The model is a cavity mode (frequency ``omega``, decay rate ``kappa``)
coupled to a qubit (frequency ``Omega``) with coupling ``lam``.  Two derived
quantities organize all of the critical physics: the effective size
``eta = Omega / omega`` and the dimensionless coupling
``g = 2 lam / sqrt(Omega omega)``, with a critical point at
``g_cp = sqrt(1 + (kappa / 2 omega)^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from . import core

#: Hard ceiling on the Fock cutoff unless the caller raises it explicitly.
DEFAULT_MAX_CUTOFF = 160

#: Fraction of Fock levels counted as the truncation tail.
TAIL_FRACTION = 0.1
#: Maximum tolerated population in the tail after a solve.
TAIL_TOL = 1e-6


class TruncationError(RuntimeError):
    """Fock-space tail population stayed above tolerance at the cutoff cap."""


def g_critical(omega: float, kappa: float) -> float:
    """Location of the dissipative critical point, sqrt(1 + (kappa/2 omega)^2)."""
    if omega <= 0:
        raise ValueError(f"omega must be positive, got {omega}")
    if kappa < 0:
        raise ValueError(f"kappa must be nonnegative, got {kappa}")
    return math.sqrt(1.0 + (kappa / (2.0 * omega)) ** 2)


def default_cutoff(g: float, eta: float) -> int:
    """Default Fock cutoff; validated a posteriori by the tail check."""
    # Steady occupation grows ~ sqrt(eta) at the critical point, with an O(1)
    # prefactor; a generous multiple keeps the tail below TAIL_TOL in practice.
    return max(16, int(math.ceil(7.0 * math.sqrt(eta) * max(g, 0.5))))


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the open Rabi model.

    ``eta`` and ``g`` are always recomputed from the stored frequencies so the
    defining relations hold exactly.
    """

    omega: float = 1.0
    Omega: float = 1.0
    lam: float = 0.5
    kappa: float = 0.1
    efficiency: float = 1.0
    n_cutoff: int = 20

    def __post_init__(self):
        if self.omega <= 0 or self.Omega <= 0:
            raise ValueError("frequencies must be positive")
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if not 0.0 < self.efficiency <= 1.0:
            raise ValueError("efficiency must lie in (0, 1]")
        if self.n_cutoff < 2:
            raise ValueError("n_cutoff must be >= 2")

    @property
    def eta(self) -> float:
        return self.Omega / self.omega

    @property
    def g(self) -> float:
        return 2.0 * self.lam / math.sqrt(self.Omega * self.omega)

    @property
    def dim(self) -> int:
        return 2 * self.n_cutoff

    def with_omega(self, omega: float) -> "ModelParams":
        """Same physical model with a shifted cavity frequency (estimation parameter)."""
        return replace(self, omega=omega)

    def with_cutoff(self, n_cutoff: int) -> "ModelParams":
        return replace(self, n_cutoff=n_cutoff)

    def to_dict(self) -> dict:
        return {
            "omega": self.omega,
            "Omega": self.Omega,
            "lam": self.lam,
            "kappa": self.kappa,
            "efficiency": self.efficiency,
            "n_cutoff": self.n_cutoff,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        return cls(**data)


def params_at(
    g: float,
    eta: float,
    omega: float = 1.0,
    kappa: float = 0.1,
    efficiency: float = 1.0,
    n_cutoff: int | None = None,
) -> ModelParams:
    """Build ModelParams from the critical coordinates (g, eta)."""
    if g <= 0 or eta <= 0:
        raise ValueError("g and eta must be positive")
    Omega = eta * omega
    lam = g * math.sqrt(Omega * omega) / 2.0
    if n_cutoff is None:
        n_cutoff = default_cutoff(g, eta)
    return ModelParams(
        omega=omega,
        Omega=Omega,
        lam=lam,
        kappa=kappa,
        efficiency=efficiency,
        n_cutoff=n_cutoff,
    )


def cavity_annihilation(p: ModelParams) -> np.ndarray:
    """Annihilation operator lifted to the full qubit (x) cavity space."""
    return core.kron(core.IDENTITY_2, core.annihilation(p.n_cutoff))


def number_operator(p: ModelParams) -> np.ndarray:
    c = cavity_annihilation(p)
    return c.conj().T @ c


def hamiltonian(p: ModelParams) -> np.ndarray:
    """Rabi Hamiltonian omega c^dag c + (Omega/2) sigma_z - lam (c + c^dag) sigma_x."""
    a = core.annihilation(p.n_cutoff)
    n_cav = a.conj().T @ a
    x_cav = a + a.conj().T
    eye = core.identity(p.n_cutoff)
    h = (
        p.omega * core.kron(core.IDENTITY_2, n_cav)
        + 0.5 * p.Omega * core.kron(core.SIGMA_Z, eye)
        - p.lam * core.kron(core.SIGMA_X, x_cav)
    )
    return h


def _spre(op: np.ndarray) -> sp.csr_matrix:
    """Superoperator of left multiplication under column-stacking vectorization."""
    dim = op.shape[0]
    return sp.kron(sp.identity(dim, format="csr"), sp.csr_matrix(op), format="csr")


def _spost(op: np.ndarray) -> sp.csr_matrix:
    """Superoperator of right multiplication under column-stacking vectorization."""
    dim = op.shape[0]
    return sp.kron(sp.csr_matrix(op).T, sp.identity(dim, format="csr"), format="csr")


def _sandwich(left: np.ndarray, right: np.ndarray) -> sp.csr_matrix:
    """Superoperator of rho -> left rho right."""
    return sp.kron(sp.csr_matrix(right).T, sp.csr_matrix(left), format="csr")


MAX_SUPEROP_DIM = 40_000


def _guard_superop(p: ModelParams) -> None:
    if p.dim * p.dim > MAX_SUPEROP_DIM:
        raise MemoryError(
            f"superoperator dimension {p.dim ** 2} exceeds configured limit {MAX_SUPEROP_DIM}"
        )


def dissipator(jump: np.ndarray, rate: float = 1.0) -> sp.csr_matrix:
    """rate * (J . J^dag - {J^dag J, .} / 2), vectorized."""
    jdj = jump.conj().T @ jump
    out = _sandwich(jump, jump.conj().T) - 0.5 * (_spre(jdj) + _spost(jdj))
    return (rate * out).tocsr()


def liouvillian(p: ModelParams) -> sp.csr_matrix:
    """Lindblad generator of the open Rabi model on column-stacked density matrices."""
    _guard_superop(p)
    h = hamiltonian(p)
    c = cavity_annihilation(p)
    return (-1j * (_spre(h) - _spost(h)) + dissipator(c, p.kappa)).tocsr()


def liouvillian_generalized(p: ModelParams, delta_omega: float) -> sp.csr_matrix:
    """Two-sided generator -i H(omega+d) rho + i rho H(omega-d) + kappa D[c].

    Its solution's trace gives the global quantum Fisher information through a
    single off-diagonal finite-difference stencil.
    """
    _guard_superop(p)
    h_plus = hamiltonian(p.with_omega(p.omega + delta_omega))
    h_minus = hamiltonian(p.with_omega(p.omega - delta_omega))
    c = cavity_annihilation(p)
    return (-1j * _spre(h_plus) + 1j * _spost(h_minus) + dissipator(c, p.kappa)).tocsr()


def parity_operator(p: ModelParams) -> np.ndarray:
    """Unitary of the Z2 symmetry c -> -c, sigma_x -> -sigma_x."""
    phases = np.array([(-1.0) ** n for n in range(p.n_cutoff)])
    return core.kron(core.SIGMA_Z, np.diag(phases).astype(complex))


def parity_superoperator(p: ModelParams) -> sp.csr_matrix:
    pi = parity_operator(p)
    return _sandwich(pi, pi.conj().T)


def vectorize(rho: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return rho.ravel(order="F")


def unvectorize(vec: np.ndarray) -> np.ndarray:
    dim = int(round(math.sqrt(vec.size)))
    return vec.reshape(dim, dim, order="F")


def trace_vector(dim: int) -> np.ndarray:
    """Row functional tr(.) acting on column-stacked matrices."""
    out = np.zeros(dim * dim, dtype=complex)
    out[:: dim + 1] = 1.0
    return out


def vacuum_down_state(p: ModelParams) -> np.ndarray:
    """Default initial state: cavity vacuum, qubit down."""
    return core.kron_all(core.qubit_state(up=False).reshape(2, 1),
                         core.fock_state(p.n_cutoff, 0).reshape(p.n_cutoff, 1)).ravel()


def tail_population(rho_or_psi: np.ndarray, n_cutoff: int) -> float:
    """Population in the top TAIL_FRACTION of Fock levels."""
    arr = np.asarray(rho_or_psi)
    if arr.ndim == 2:
        pops = np.real(np.diag(arr))
    else:
        pops = np.abs(arr) ** 2
        norm = pops.sum()
        if norm > 0:
            pops = pops / norm
    pops = pops.reshape(2, n_cutoff).sum(axis=0)
    n_tail = max(1, int(math.ceil(TAIL_FRACTION * n_cutoff)))
    return float(pops[-n_tail:].sum())


def check_tail(rho_or_psi: np.ndarray, n_cutoff: int, tol: float = TAIL_TOL) -> bool:
    return tail_population(rho_or_psi, n_cutoff) < tol


def grow_cutoff(p: ModelParams, max_cutoff: int = DEFAULT_MAX_CUTOFF) -> ModelParams:
    """Next cutoff in the adaptive refinement ladder (factor 1.5, capped)."""
    new = int(math.ceil(1.5 * p.n_cutoff))
    if new > max_cutoff:
        raise TruncationError(
            f"needed Fock cutoff beyond cap {max_cutoff}; raise the cap to proceed"
        )
    return p.with_cutoff(new)
