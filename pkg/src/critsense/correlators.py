"""Two-time correlators of the cavity occupation via quantum regression.

The regression formula evaluates <dO(tau+s) dO(tau)> as
tr[O e^{Ls}(O e^{L tau} rho0)] minus the product of the two single-time means.
For grids the adjoint trick is used: w(s) = e^{L^dag s} vec(O) is propagated
once, after which every (tau, s) entry is an inner product with vec(O rho(tau)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import evolution, model
from .model import ModelParams


@dataclass
class CorrelatorGrid:
    """Connected correlator <dO(tau+s) dO(tau)> on a (tau, s) mesh."""

    tau_grid: np.ndarray
    s_grid: np.ndarray
    values: np.ndarray  # complex, shape (len(tau_grid), len(s_grid))
    op_label: str = "n"

    def real_values(self) -> np.ndarray:
        return np.real(self.values)


def _snap_times(times: np.ndarray, dt: float) -> np.ndarray:
    """Round requested times onto the integrator step lattice."""
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("correlator times must be nonnegative")
    return np.rint(times / dt) * dt


def _mean_on_grid(lv, vec0, n_vec, times, dt) -> np.ndarray:
    states = evolution.propagate_vector(lv, vec0, times, dt)
    return np.array([float(np.real(np.vdot(n_vec, x))) for x in states])


def two_time(
    p: ModelParams,
    rho0: np.ndarray,
    tau: float,
    s: float,
    op: np.ndarray | None = None,
    dt: float | None = None,
) -> complex:
    """Single connected correlator value by two nested propagations."""
    if tau < 0 or s < 0:
        raise ValueError("tau and s must be nonnegative")
    if dt is None:
        dt = evolution.default_dt(p)
    if op is None:
        op = model.number_operator(p)
    tau, s = float(_snap_times(np.array([tau]), dt)[0]), float(_snap_times(np.array([s]), dt)[0])
    lv = model.liouvillian(p)
    vec0 = model.vectorize(np.asarray(rho0, dtype=complex))
    op_vec = model.vectorize(op.conj().T.copy())

    x_tau = evolution.propagate_vector(lv, vec0, np.array([tau]), dt)[0]
    mean_tau = complex(np.vdot(op_vec, x_tau))
    pushed = model.vectorize(op @ model.unvectorize(x_tau))
    x_s = evolution.propagate_vector(lv, pushed, np.array([s]), dt)[0]
    raw = complex(np.vdot(op_vec, x_s))
    x_ts = evolution.propagate_vector(lv, x_tau, np.array([s]), dt)[0]
    mean_ts = complex(np.vdot(op_vec, x_ts))
    return raw - mean_ts * mean_tau


def structure_factor_stationary(
    p: ModelParams,
    s_grid: np.ndarray,
    dt: float | None = None,
    adapt_cutoff: bool = True,
) -> tuple[np.ndarray, np.ndarray, ModelParams]:
    """Stationary occupation correlator Re<dn(s) dn(0)>_st on a grid.

    Returns (s_grid_snapped, values, params_used); a single propagation of
    vec(n rho_st) covers the whole grid.
    """
    rho_st, p_used = evolution.steady_state(p, adapt_cutoff=adapt_cutoff)
    if dt is None:
        dt = evolution.default_dt(p_used)
    s_grid = _snap_times(s_grid, dt)
    n_op = model.number_operator(p_used)
    n_vec = model.vectorize(n_op)  # n is Hermitian
    lv = model.liouvillian(p_used)
    n_mean = float(np.real(np.trace(n_op @ rho_st)))
    pushed = model.vectorize(n_op @ rho_st)
    states = evolution.propagate_vector(lv, pushed, s_grid, dt)
    vals = np.array([float(np.real(np.vdot(n_vec, x))) - n_mean**2 for x in states])
    return s_grid, vals, p_used


def structure_factor_dynamic(
    p: ModelParams,
    rho0: np.ndarray | None,
    tau_grid: np.ndarray,
    s_grid: np.ndarray,
    dt: float | None = None,
) -> CorrelatorGrid:
    """Full connected-correlator grid from a (generally non-stationary) start.

    One adjoint propagation of vec(n) over the s grid, one forward propagation
    of rho0 over the tau grid, and one forward propagation for the single-time
    means; each (tau, s) entry is then an inner product.
    """
    if rho0 is None:
        psi = model.vacuum_down_state(p)
        rho0 = np.outer(psi, psi.conj())
    if dt is None:
        dt = evolution.default_dt(p)
    tau_grid = _snap_times(tau_grid, dt)
    s_grid = _snap_times(s_grid, dt)
    n_op = model.number_operator(p)
    n_vec = model.vectorize(n_op)
    lv = model.liouvillian(p)
    lv_adj = lv.conj().T.tocsr()

    w_s = evolution.propagate_vector(lv_adj, n_vec, s_grid, dt)
    rho_tau = evolution.propagate_vector(
        lv, model.vectorize(np.asarray(rho0, dtype=complex)), tau_grid, dt)

    sum_times = np.unique(np.rint(
        (tau_grid[:, None] + s_grid[None, :]).ravel() / dt)) * dt
    means_flat = _mean_on_grid(lv, model.vectorize(np.asarray(rho0, dtype=complex)),
                               n_vec, sum_times, dt)
    mean_at = dict(zip(np.rint(sum_times / dt).astype(int), means_flat))

    values = np.empty((len(tau_grid), len(s_grid)), dtype=complex)
    for i, x_tau in enumerate(rho_tau):
        pushed = model.vectorize(n_op @ model.unvectorize(x_tau))
        mean_tau = mean_at[int(round(tau_grid[i] / dt))]
        for j, w in enumerate(w_s):
            raw = complex(np.vdot(w, pushed))
            mean_ts = mean_at[int(round((tau_grid[i] + s_grid[j]) / dt))]
            values[i, j] = raw - mean_ts * mean_tau
    return CorrelatorGrid(tau_grid=tau_grid, s_grid=s_grid, values=values)


def default_tau_grid(p: ModelParams, t_final: float, n_points: int = 16) -> np.ndarray:
    """Logarithmic tau grid from one integrator step up to t_final."""
    lo = max(evolution.default_dt(p) * 10, 1e-3 * t_final)
    return np.geomspace(lo, t_final, n_points)


def default_s_grid(p: ModelParams, n_points: int = 32) -> np.ndarray:
    """Linear s grid out to ten gap times."""
    gap = evolution.liouvillian_gap(p).gap
    return np.linspace(0.0, 10.0 / gap, n_points)


def grid_to_csv(grid: CorrelatorGrid, p: ModelParams) -> str:
    lines = ["eta,g,tau,s,re_value,im_value"]
    for i, tau in enumerate(grid.tau_grid):
        for j, s in enumerate(grid.s_grid):
            v = grid.values[i, j]
            lines.append(f"{p.eta:.10g},{p.g:.10g},{tau:.10g},{s:.10g},"
                         f"{v.real:.12g},{v.imag:.12g}")
    return "\n".join(lines) + "\n"
