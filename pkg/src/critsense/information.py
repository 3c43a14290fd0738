"""Fisher information of click records and global quantum Fisher information.

Three routes to an information-vs-time curve:

* `fi_photon_counting` — Monte Carlo over click records.  Each record sampled
  at the working frequency is replayed, unchanged, at omega +/- delta; the
  squared two-sided log-likelihood derivative averaged over records is the
  classical Fisher information of the counting signal.
* `global_qfi_generalized_me` — one propagation of a two-sided generator whose
  left and right Hamiltonians sit at omega +/- delta.  The trace of the
  solution decays like exp(-I delta^2 / 2), so the QFI is read off from a
  single off-diagonal stencil entry (the diagonal entries vanish exactly by
  trace preservation).
* `global_qfi_correlator` — double time integral of the connected occupation
  correlator, 8 * int_0^t dtau int_0^{t-tau} ds Re<dn(tau+s) dn(tau)>.

The first is an estimator with Monte Carlo error bars; the last two are
deterministic and serve as mutual cross-checks.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import correlators, evolution, model, trajectories
from .kernels import CountingKernelSetup
from .model import ModelParams

DEFAULT_DELTA_OMEGA_REL = 1e-4  # FI replay stencil, relative to omega
DEFAULT_DELTA_THETA_REL = 1e-3  # generalized-ME stencil, relative to omega
RICHARDSON_RTOL = 0.01


@dataclass
class FIEstimate:
    """Monte Carlo Fisher information of the counting record vs time."""

    t_grid: np.ndarray
    fi: np.ndarray
    stderr: np.ndarray
    n_traj: int
    delta_omega: float
    converged: bool = True
    scores_sq: np.ndarray | None = None  # (n_traj, n_times), kept for reuse

    def half_sample_estimate(self) -> "FIEstimate":
        """Estimate from the first half of the trajectories (convergence check)."""
        if self.scores_sq is None:
            raise ValueError("per-trajectory scores were not retained")
        half = self.scores_sq[: self.n_traj // 2]
        return FIEstimate(
            t_grid=self.t_grid,
            fi=half.mean(axis=0),
            stderr=half.std(axis=0, ddof=1) / np.sqrt(len(half)),
            n_traj=len(half),
            delta_omega=self.delta_omega,
            converged=self.converged,
        )


@dataclass
class QFIResult:
    """Deterministic global QFI curve."""

    t_grid: np.ndarray
    qfi: np.ndarray
    method: str  # "generalized-me" or "correlator-integral"
    delta_theta: float | None = None
    converged: bool = True


def default_fi_grid(t_final: float, dt: float, n_points: int = 24) -> np.ndarray:
    """Logarithmic time grid snapped to the bin lattice."""
    lo = max(10 * dt, 1e-3 * t_final)
    raw = np.geomspace(lo, t_final, n_points)
    bins = np.unique(np.rint(raw / dt).astype(np.int64))
    return bins[bins > 0] * dt


def _score_batch(setups, n_bins, grid_bins, master_seed, indices, delta_omega, backend):
    setup_0, setup_p, setup_m = setups
    out = np.empty((len(indices), len(grid_bins)))
    nbar = np.empty((len(indices), len(grid_bins)))
    for row, idx in enumerate(indices):
        clicks, _, nb = trajectories.fast_sample(
            setup_0, n_bins, grid_bins, master_seed, idx, backend=backend)
        lp = trajectories.fast_replay(setup_p, n_bins, clicks, grid_bins, backend=backend)
        lm = trajectories.fast_replay(setup_m, n_bins, clicks, grid_bins, backend=backend)
        out[row] = ((lp - lm) / (2.0 * delta_omega)) ** 2
        nbar[row] = nb
    return out, nbar


def fi_photon_counting(
    p: ModelParams,
    t_final: float,
    dt: float,
    n_traj: int,
    delta_omega: float | None = None,
    master_seed: int = 0,
    t_grid: np.ndarray | None = None,
    threads: int = 1,
    backend: str = "auto",
    richardson_check: bool = True,
    keep_scores: bool = True,
) -> FIEstimate:
    """Fisher information of photon counting by shared-record replay.

    F(t) = mean over records of [d/domega log P(record up to t)]^2, with the
    derivative from replaying the same record at omega +/- delta_omega.
    """
    if n_traj < 100:
        raise ValueError("n_traj must be at least 100")
    trajectories.check_bin_width(p, dt)
    if delta_omega is None:
        delta_omega = DEFAULT_DELTA_OMEGA_REL * p.omega
    n_bins = int(round(t_final / dt))
    if t_grid is None:
        t_grid = default_fi_grid(t_final, dt)
    grid_bins = trajectories.grid_to_bins(t_grid, dt, n_bins)

    def setups_for(delta):
        return (
            CountingKernelSetup(p, dt),
            CountingKernelSetup(p.with_omega(p.omega + delta), dt),
            CountingKernelSetup(p.with_omega(p.omega - delta), dt),
        )

    setups = setups_for(delta_omega)
    indices = np.arange(n_traj)
    if threads > 1:
        chunks = np.array_split(indices, threads * 4)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(
                lambda ch: _score_batch(setups, n_bins, grid_bins, master_seed,
                                        ch, delta_omega, backend),
                [c for c in chunks if len(c)]))
        scores_sq = np.vstack([s for s, _ in parts])
    else:
        scores_sq, _ = _score_batch(setups, n_bins, grid_bins, master_seed,
                                    indices, delta_omega, backend)

    fi = scores_sq.mean(axis=0)
    stderr = scores_sq.std(axis=0, ddof=1) / np.sqrt(n_traj)

    converged = True
    if richardson_check:
        n_check = min(200, n_traj)
        setups_half = setups_for(0.5 * delta_omega)
        check_sq, _ = _score_batch(setups_half, n_bins, grid_bins, master_seed,
                                   indices[:n_check], 0.5 * delta_omega, backend)
        ref_sq = scores_sq[:n_check]
        a, b = check_sq.mean(axis=0), ref_sq.mean(axis=0)
        scale = np.maximum(np.abs(b), 1e-300)
        if np.any(np.abs(a - b) / scale > RICHARDSON_RTOL):
            converged = False
            warnings.warn("FI replay derivative not converged under step halving",
                          stacklevel=2)

    return FIEstimate(
        t_grid=np.asarray(t_grid, dtype=float), fi=fi, stderr=stderr,
        n_traj=n_traj, delta_omega=delta_omega, converged=converged,
        scores_sq=scores_sq if keep_scores else None,
    )


def ensemble_occupation(
    p: ModelParams,
    t_final: float,
    dt: float,
    n_traj: int,
    master_seed: int = 0,
    t_grid: np.ndarray | None = None,
    backend: str = "auto",
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Trajectory-ensemble mean occupation with standard errors.

    The unraveling average of the conditional <n> must reproduce the
    unconditional master-equation curve.
    """
    n_bins = int(round(t_final / dt))
    if t_grid is None:
        t_grid = np.linspace(0.0, t_final, 41)
    t_grid = np.rint(np.asarray(t_grid) / dt) * dt
    grid_bins = trajectories.grid_to_bins(t_grid, dt, n_bins)
    setup = CountingKernelSetup(p, dt)
    acc = np.zeros((n_traj, len(grid_bins)))
    for idx in range(n_traj):
        _, _, nb = trajectories.fast_sample(setup, n_bins, grid_bins,
                                            master_seed, idx, backend=backend)
        acc[idx] = nb
    return t_grid, acc.mean(axis=0), acc.std(axis=0, ddof=1) / np.sqrt(n_traj)


def global_qfi_generalized_me(
    p: ModelParams,
    t_final: float,
    dt: float | None = None,
    delta_theta: float | None = None,
    t_grid: np.ndarray | None = None,
    rho0: np.ndarray | None = None,
    check_halving: bool = False,
) -> QFIResult:
    """Global QFI from the trace decay of a two-sided master equation."""
    if delta_theta is None:
        delta_theta = DEFAULT_DELTA_THETA_REL
    if not 1e-6 <= delta_theta <= 1e-2:
        raise ValueError("relative delta_theta must lie in [1e-6, 1e-2]")
    delta = delta_theta * p.omega
    if dt is None:
        dt = evolution.default_dt(p)
    if t_grid is None:
        t_grid = np.linspace(0.0, t_final, 41)
    t_grid = np.rint(np.asarray(t_grid, dtype=float) / dt) * dt
    if rho0 is None:
        psi = model.vacuum_down_state(p)
        rho0 = np.outer(psi, psi.conj())

    def solve(d):
        lvg = model.liouvillian_generalized(p, d)
        tr_vec = model.trace_vector(p.dim)
        states = evolution.propagate_vector(
            lvg, model.vectorize(np.asarray(rho0, dtype=complex)), t_grid, dt)
        traces = np.array([complex(tr_vec @ x) for x in states])
        mags = np.abs(traces)
        if np.any(mags < 1e-280):
            raise FloatingPointError("two-sided trace underflow; reduce delta_theta")
        return -2.0 * np.log(mags) / d**2

    qfi = solve(delta)
    converged = True
    if check_halving:
        qfi_half = solve(0.5 * delta)
        scale = np.maximum(np.abs(qfi), 1e-12 * max(1.0, np.max(np.abs(qfi))))
        rel = np.abs(qfi_half - qfi) / scale
        if np.any(rel[t_grid > 0] > RICHARDSON_RTOL):
            converged = False
            warnings.warn("generalized-ME QFI not converged under delta halving",
                          stacklevel=2)
    return QFIResult(t_grid=t_grid, qfi=qfi, method="generalized-me",
                     delta_theta=delta_theta, converged=converged)


def global_qfi_correlator(
    p: ModelParams,
    t_final: float,
    n_grid: int = 40,
    rho0: np.ndarray | None = None,
    dt: float | None = None,
    refine_check: bool = True,
) -> QFIResult:
    """Global QFI from the double time integral of the occupation correlator.

    Trapezoid rule on a uniform (tau, s) mesh with step t_final/n_grid; the
    triangular domain boundaries fall exactly on mesh lines.
    """
    if n_grid < 4:
        raise ValueError("n_grid must be at least 4")
    if rho0 is None:
        psi = model.vacuum_down_state(p)
        rho0 = np.outer(psi, psi.conj())
    if dt is None:
        dt = evolution.default_dt(p)
    step = t_final / n_grid
    # Align the mesh step with the integrator lattice.
    step = max(1, int(round(step / dt))) * dt
    mesh = step * np.arange(n_grid + 1)
    grid = correlators.structure_factor_dynamic(p, rho0, mesh, mesh, dt=dt)
    re_c = grid.real_values()

    def integrate(c, h, upto):
        out = np.zeros(upto + 1)
        for k in range(1, upto + 1):
            inner = np.array([np.trapezoid(c[i, : k - i + 1], dx=h)
                              for i in range(k + 1)])
            out[k] = 8.0 * np.trapezoid(inner, dx=h)
        return out

    qfi = integrate(re_c, step, n_grid)
    converged = True
    if refine_check and n_grid % 2 == 0:
        coarse = integrate(re_c[::2, ::2], 2 * step, n_grid // 2)
        a, b = coarse[-1], qfi[-1]
        if abs(b) > 1e-12 and abs(a - b) / abs(b) > 0.02:
            converged = False
            warnings.warn("correlator QFI integral not converged under mesh "
                          "refinement", stacklevel=2)
    return QFIResult(t_grid=mesh, qfi=qfi, method="correlator-integral",
                     converged=converged)
