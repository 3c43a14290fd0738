"""Dense complex linear algebra and elementary operators on the truncated
qubit (x) Fock space.

Basis convention used everywhere in this package: the qubit index is the
slowest one, i.e. basis state ``|s, n>`` has flat index ``s * n_cutoff + n``
with ``s = 0`` the qubit ground state (down) and ``n`` the Fock level.
Operators on the product space are therefore built as ``kron(qubit_op,
cavity_op)``.
"""

from __future__ import annotations

import json

import numpy as np

# Default numerical tolerances; every check below accepts an override.
HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-8
POSITIVITY_TOL = 1e-8

# Pauli matrices in the {down, up} ordering (down = index 0).
SIGMA_Z = np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=complex)
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


class DimensionError(ValueError):
    """Operator or state dimensions are invalid or incompatible."""


def annihilation(n_cutoff: int) -> np.ndarray:
    """Bosonic annihilation operator on a Fock space truncated at n_cutoff levels."""
    if n_cutoff < 2:
        raise DimensionError(f"Fock cutoff must be >= 2, got {n_cutoff}")
    op = np.zeros((n_cutoff, n_cutoff), dtype=complex)
    for n in range(1, n_cutoff):
        op[n - 1, n] = np.sqrt(n)
    return op


def identity(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex)


def fock_state(n_cutoff: int, n: int) -> np.ndarray:
    """Fock basis vector |n> on the truncated cavity space."""
    if not 0 <= n < n_cutoff:
        raise DimensionError(f"Fock level {n} outside cutoff {n_cutoff}")
    psi = np.zeros(n_cutoff, dtype=complex)
    psi[n] = 1.0
    return psi


def qubit_state(up: bool) -> np.ndarray:
    psi = np.zeros(2, dtype=complex)
    psi[1 if up else 0] = 1.0
    return psi


MAX_KRON_DIM = 1 << 20


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Tensor product with the qubit-slowest convention (left factor slowest)."""
    dim = a.shape[0] * b.shape[0]
    if dim > MAX_KRON_DIM:
        raise DimensionError(f"kron result dimension {dim} exceeds guard {MAX_KRON_DIM}")
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def kron_all(*ops: np.ndarray) -> np.ndarray:
    """Left-fold tensor product; fixes an unambiguous assembly order."""
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        out = kron(out, op)
    return out


def expectation(state: np.ndarray, op: np.ndarray) -> complex:
    """<A> for a density matrix (tr(A rho)) or a state vector (<psi|A|psi>/<psi|psi>).

    State vectors follow the normalized convention of conditional states:
    an unnormalized vector is divided by its own norm squared.
    """
    state = np.asarray(state)
    op = np.asarray(op)
    if state.ndim == 1:
        if op.shape[0] != state.shape[0]:
            raise DimensionError(f"operator dim {op.shape[0]} vs state dim {state.shape[0]}")
        norm_sq = float(np.real(np.vdot(state, state)))
        if norm_sq == 0.0:
            raise ValueError("cannot take expectation in a zero-norm state")
        return complex(np.vdot(state, op @ state) / norm_sq)
    if op.shape[0] != state.shape[0]:
        raise DimensionError(f"operator dim {op.shape[0]} vs density matrix dim {state.shape[0]}")
    return complex(np.trace(op @ state))


def hermiticity_residual(op: np.ndarray) -> float:
    return float(np.max(np.abs(op - op.conj().T)))


def assert_hermitian(op: np.ndarray, tol: float = HERMITICITY_TOL) -> None:
    res = hermiticity_residual(op)
    if res > tol:
        raise ValueError(f"operator not Hermitian: residual {res:.3e} > {tol:.3e}")


def check_density_matrix(
    rho: np.ndarray,
    trace_tol: float = TRACE_TOL,
    herm_tol: float = HERMITICITY_TOL,
    positivity_tol: float | None = POSITIVITY_TOL,
) -> None:
    """Validate trace, Hermiticity and (optionally) positivity of a density matrix."""
    tr = complex(np.trace(rho))
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"trace {tr} deviates from 1 by more than {trace_tol:.1e}")
    assert_hermitian(rho, herm_tol)
    if positivity_tol is not None:
        min_eig = float(np.linalg.eigvalsh((rho + rho.conj().T) / 2).min())
        if min_eig < -positivity_tol:
            raise ValueError(f"minimum eigenvalue {min_eig:.3e} below -{positivity_tol:.1e}")


def purity(rho: np.ndarray) -> float:
    return float(np.real(np.trace(rho @ rho)))


def operator_to_json(op: np.ndarray) -> str:
    """Debug serialization: dim plus interleaved re/im entries, row-major."""
    op = np.asarray(op, dtype=complex)
    flat = np.empty(2 * op.size)
    flat[0::2] = op.real.ravel()
    flat[1::2] = op.imag.ravel()
    return json.dumps({"dim": op.shape[0], "entries": flat.tolist()})


def operator_from_json(text: str) -> np.ndarray:
    data = json.loads(text)
    dim = int(data["dim"])
    flat = np.asarray(data["entries"], dtype=float)
    if flat.size != 2 * dim * dim:
        raise DimensionError("entry count does not match dim")
    return (flat[0::2] + 1j * flat[1::2]).reshape(dim, dim)
