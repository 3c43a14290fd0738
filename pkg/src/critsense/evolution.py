"""Deterministic dynamics: master-equation propagation, steady states, spectral gap."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import core, model
from .model import ModelParams, TruncationError

#: Eigenvalues with a decay rate below this (relative to kappa) count as
#: non-decaying directions and are excluded from the gap.
GAP_ZERO_TOL = 1e-8


def default_dt(p: ModelParams) -> float:
    """Conservative step size heuristic for the fixed-step RK4 integrator."""
    scale = max(p.omega * p.n_cutoff, p.kappa * p.n_cutoff,
                p.lam * math.sqrt(p.n_cutoff), 0.5 * p.Omega)
    return 0.1 / scale


@dataclass
class PropagationResult:
    times: np.ndarray
    states: list  # density matrices, one per time point
    truncation_ok: bool
    trace_drift: float = 0.0

    def expectations(self, op: np.ndarray) -> np.ndarray:
        return np.array([np.real(np.trace(op @ rho)) for rho in self.states])


def _rk4_sparse(lv: sp.spmatrix, vec: np.ndarray, dt: float, n_steps: int,
                record_at: np.ndarray | None = None):
    """Classic RK4 on x' = L x; yields (step_index, x) at requested steps."""
    record = set(int(k) for k in record_at) if record_at is not None else None
    out = []
    x = vec.copy()
    if record is None or 0 in record:
        out.append((0, x.copy()))
    for k in range(1, n_steps + 1):
        k1 = lv @ x
        k2 = lv @ (x + 0.5 * dt * k1)
        k3 = lv @ (x + 0.5 * dt * k2)
        k4 = lv @ (x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if record is None or k in record:
            out.append((k, x.copy()))
    return out


def propagate_vector(lv: sp.spmatrix, vec0: np.ndarray, times: np.ndarray,
                     dt: float) -> list[np.ndarray]:
    """Integrate x' = L x and return x at the requested times.

    The time grid is snapped onto multiples of dt (times must be close to
    multiples; the caller controls the grid) so that runs are reproducible.
    """
    times = np.asarray(times, dtype=float)
    steps = np.rint(times / dt).astype(int)
    if not np.allclose(steps * dt, times, rtol=0, atol=1e-9 * max(dt, 1e-30)):
        raise ValueError("requested times are not multiples of dt")
    n_steps = int(steps.max()) if steps.size else 0
    recorded = dict(_rk4_sparse(lv, vec0, dt, n_steps, record_at=steps))
    return [recorded[k] for k in steps]


def propagate(rho0: np.ndarray, p: ModelParams, t_final: float,
              dt: float | None = None, n_points: int = 51,
              check_invariants: bool = True) -> PropagationResult:
    """Propagate the Lindblad master equation with fixed-step RK4.

    States are recorded on a uniform grid of n_points spanning [0, t_final].
    """
    if dt is None:
        dt = default_dt(p)
    # Snap dt so the grid points are exact step multiples.
    stride = max(1, int(round(t_final / (n_points - 1) / dt))) if n_points > 1 else 1
    n_steps = stride * (n_points - 1) if n_points > 1 else int(round(t_final / dt))
    dt = t_final / n_steps if n_steps else dt
    times = dt * stride * np.arange(n_points) if n_points > 1 else np.array([0.0])

    lv = model.liouvillian(p)
    vec0 = model.vectorize(np.asarray(rho0, dtype=complex))
    recorded = _rk4_sparse(lv, vec0, dt, n_steps,
                           record_at=stride * np.arange(n_points))
    states = [model.unvectorize(v) for _, v in recorded]

    traces = np.array([np.trace(rho) for rho in states])
    drift = float(np.max(np.abs(traces - traces[0])))
    if check_invariants and drift > 1e-6:
        raise RuntimeError(f"trace drift {drift:.2e} exceeds 1e-6; reduce dt")
    truncation_ok = all(model.check_tail(rho, p.n_cutoff) for rho in states)
    if check_invariants:
        for rho in states[:: max(1, len(states) // 8)]:
            core.check_density_matrix(rho, trace_tol=1e-5, herm_tol=1e-7,
                                      positivity_tol=1e-7)
    return PropagationResult(times=np.asarray(times), states=states,
                             truncation_ok=truncation_ok, trace_drift=drift)


def _steady_state_once(p: ModelParams) -> np.ndarray:
    lv = model.liouvillian(p).tolil()
    dim = p.dim
    # Replace the first row by the trace functional; the unique trace-one
    # kernel element is then the solution of a plain linear system.
    tr_row = model.trace_vector(dim)
    lv[0, :] = tr_row
    rhs = np.zeros(dim * dim, dtype=complex)
    rhs[0] = 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", spla.MatrixRankWarning)
        vec = spla.spsolve(lv.tocsc(), rhs)
    if not np.all(np.isfinite(vec)):
        raise RuntimeError("steady-state solve is singular or ill-conditioned")
    rho = model.unvectorize(vec)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho)
    return rho


def steady_state(p: ModelParams, adapt_cutoff: bool = True,
                 max_cutoff: int = model.DEFAULT_MAX_CUTOFF) -> tuple[np.ndarray, ModelParams]:
    """Solve L rho = 0 with unit trace; returns (rho, params actually used).

    With adapt_cutoff the Fock cutoff grows until the truncation tail check
    passes, so callers always receive a converged state.
    """
    if p.kappa <= 0:
        raise ValueError("steady state requires kappa > 0")
    if p.lam == 0.0:
        # Decoupled limit: the stationary space is degenerate (any diagonal
        # qubit state survives).  Return the lam -> 0+ limit, cavity vacuum
        # with the qubit relaxed to its ground state.
        psi = model.vacuum_down_state(p)
        return np.outer(psi, psi.conj()), p
    while True:
        rho = _steady_state_once(p)
        if model.check_tail(rho, p.n_cutoff):
            core.check_density_matrix(rho, trace_tol=1e-8, herm_tol=1e-8,
                                      positivity_tol=1e-6)
            return rho, p
        if not adapt_cutoff:
            raise TruncationError(
                f"tail population {model.tail_population(rho, p.n_cutoff):.2e} "
                f"at n_cutoff={p.n_cutoff}")
        p = model.grow_cutoff(p, max_cutoff)


def steady_residual(p: ModelParams, rho: np.ndarray) -> float:
    """|| L rho || / || L ||, the relative fixed-point residual."""
    lv = model.liouvillian(p)
    vec = model.vectorize(rho)
    return float(np.linalg.norm(lv @ vec) / spla.norm(lv))


@dataclass
class GapResult:
    gap: float
    method: str  # "sparse-eigensolve" or "decay-fit"
    residual: float
    eigenvalues: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=complex))
    fallback_warning: bool = False


def _gap_eigensolve(p: ModelParams, k: int = 10) -> GapResult:
    lv = model.liouvillian(p).tocsc()
    # Shift-invert around a small positive real shift: the spectrum lies in
    # Re <= 0, so the shifted matrix is nonsingular while the zero mode and the
    # slowest decaying modes are still the nearest eigenvalues.
    sigma = 0.05 * p.kappa
    vals, vecs = spla.eigs(lv, k=k, sigma=sigma, which="LM")
    res = np.array([
        np.linalg.norm(lv @ vecs[:, i] - vals[i] * vecs[:, i]) / np.linalg.norm(vecs[:, i])
        for i in range(len(vals))
    ])
    # Keep only the symmetric (parity-even) sector: the default initial state
    # and the occupation observable live there, while the odd sector holds
    # qubit-coherence modes that rotate near Omega and never mix in.
    par = model.parity_superoperator(p)
    parity = np.array([
        float(np.real(np.vdot(vecs[:, i], par @ vecs[:, i]))
              / np.real(np.vdot(vecs[:, i], vecs[:, i])))
        for i in range(len(vals))
    ])
    decaying = (-np.real(vals) > GAP_ZERO_TOL * p.kappa) & (parity > 0.5)
    if not np.any(decaying):
        raise RuntimeError("no decaying even-sector eigenvalue found near zero")
    rates = -np.real(vals[decaying])
    idx = int(np.argmin(rates))
    return GapResult(gap=float(rates[idx]), method="sparse-eigensolve",
                     residual=float(res[decaying][idx]), eigenvalues=vals)


def _gap_decay_fit(p: ModelParams) -> GapResult:
    rho_st, p = steady_state(p)
    n_op = model.number_operator(p)
    n_st = float(np.real(np.trace(n_op @ rho_st)))
    # Kick the steady state and fit the slowest relaxation of <n>(t).
    psi0 = model.vacuum_down_state(p)
    rho0 = np.outer(psi0, psi0.conj())
    rho0 = 0.5 * (rho0 + rho_st)
    t_final = 40.0 / p.kappa
    res = propagate(rho0, p, t_final, n_points=201, check_invariants=False)
    dev = np.abs(res.expectations(n_op) - n_st)
    mask = dev > 1e-10 * max(n_st, 1.0)
    # Tail half of the usable window is dominated by the slowest mode.
    usable = np.where(mask)[0]
    tail = usable[usable >= usable[-1] // 2]
    coeffs, cov = np.polyfit(res.times[tail], np.log(dev[tail]), 1, cov=True)
    return GapResult(gap=float(-coeffs[0]), method="decay-fit",
                     residual=float(np.sqrt(cov[0, 0])))


#: Largest effective size handled by the sparse eigensolve route.
GAP_EIGENSOLVE_MAX_ETA = 40.0


def liouvillian_gap(p: ModelParams, method: str = "auto") -> GapResult:
    """Slowest nonzero decay rate in the symmetric sector of the spectrum.

    The generator commutes with the Z2 parity, so the spectrum splits into an
    even and an odd sector.  States evolved from the (parity-even) vacuum and
    the occupation observable never touch the odd sector, whose slow
    qubit-coherence modes rotate near Omega; the relaxation rate that governs
    every quantity computed here is the even-sector gap.  Purely rotating
    directions (zero real part) are excluded alongside the steady state.
    """
    if p.kappa <= 0:
        raise ValueError("gap requires kappa > 0")
    if p.lam == 0.0:
        # Decoupled limit, closed-form spectrum: decay rates kappa*(n+m)/2
        # over Fock coherences |n><m|; the slowest decaying direction is the
        # cavity |0><1| coherence at kappa/2.  The shift-invert search cannot
        # see it (it rotates at omega, far from the real axis).
        return GapResult(gap=0.5 * p.kappa, method="analytic", residual=0.0,
                         eigenvalues=np.array([0.0, -0.5 * p.kappa]))
    if method == "decay-fit":
        return _gap_decay_fit(p)
    if method in ("auto", "sparse-eigensolve"):
        if method == "auto" and p.eta > GAP_EIGENSOLVE_MAX_ETA:
            return _gap_decay_fit(p)
        try:
            return _gap_eigensolve(p)
        except Exception as exc:  # ARPACK non-convergence and kin
            if method == "sparse-eigensolve":
                raise
            out = _gap_decay_fit(p)
            out.fallback_warning = True
            warnings.warn(f"gap eigensolve failed ({exc}); used decay fit")
            return out
    raise ValueError(f"unknown gap method {method!r}")
