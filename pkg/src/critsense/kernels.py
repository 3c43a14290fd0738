"""Backend selection and precomputation for the trajectory engine.

The no-click segment of a photon-counting trajectory is generated by the
non-Hermitian matrix K = iH + (kappa/2) n_op.  Diagonalizing K once lets every
no-click advance by m bins cost O(dim) instead of a matrix exponential, at the
price of working in a non-orthogonal eigenbasis.  `CountingKernelSetup` caches
the eigendecomposition and the transformed operators used by the backends:

  a        state in eigen coordinates, a = Vinv psi
  l0       per-mode log decay over one bin, exp(l0 * m) advances m bins
  gram     V^dag V, so <psi|psi> = a^dag gram a
  n_til    V^dag diag(n) V, numerator of the conditional occupation
  c_til    Vinv c V, the jump operator in eigen coordinates

Backend choice: numba unless CRITSENSE_DISABLE_NUMBA is set (any non-empty
value other than "0") or numba fails to import.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import _engine_numpy
from .model import ModelParams, cavity_annihilation, hamiltonian, number_operator

STATUS_OK = _engine_numpy.STATUS_OK
STATUS_UNIFORMS_EXHAUSTED = _engine_numpy.STATUS_UNIFORMS_EXHAUSTED
STATUS_DEGENERATE_JUMP = _engine_numpy.STATUS_DEGENERATE_JUMP


def _numba_disabled() -> bool:
    flag = os.environ.get("CRITSENSE_DISABLE_NUMBA", "")
    return flag not in ("", "0")


def get_backend(name: str = "auto"):
    """Return the engine module: "numba", "numpy", or "auto" (env-controlled)."""
    if name == "numpy":
        return _engine_numpy
    if name == "auto" and _numba_disabled():
        return _engine_numpy
    try:
        from . import _engine_numba
        return _engine_numba
    except ImportError:
        if name == "numba":
            raise
        return _engine_numpy


def backend_name(module) -> str:
    return "numba" if module.__name__.endswith("_numba") else "numpy"


@dataclass
class CountingKernelSetup:
    """Eigenbasis data for one parameter point and bin width."""

    params: ModelParams
    dt: float
    l0: np.ndarray = field(init=False)
    v: np.ndarray = field(init=False)
    vinv: np.ndarray = field(init=False)
    gram: np.ndarray = field(init=False)
    n_til: np.ndarray = field(init=False)
    c_til: np.ndarray = field(init=False)

    def __post_init__(self):
        p = self.params
        h = hamiltonian(p)
        n_op = number_operator(p)
        c_op = cavity_annihilation(p)
        k_mat = 1j * h + 0.5 * p.kappa * n_op
        mu, v = np.linalg.eig(k_mat)
        vinv = np.linalg.inv(v)
        self.l0 = -mu * self.dt
        self.v = v
        self.vinv = vinv
        self.gram = v.conj().T @ v
        self.n_til = v.conj().T @ n_op @ v
        self.c_til = vinv @ c_op @ v

    @property
    def kappa_dt(self) -> float:
        return self.params.kappa * self.dt

    def to_eigen(self, psi: np.ndarray) -> np.ndarray:
        return self.vinv @ psi.astype(np.complex128)

    def from_eigen(self, a: np.ndarray) -> np.ndarray:
        return self.v @ a
