"""Photon-counting unraveling of the damped Rabi model.

Two samplers share one statistical contract:

* `sample_trajectory` is the reference binned sampler.  Each bin of width dt
  emits a click with conditional probability p1 = kappa*dt*<n>_c; a click
  applies sqrt(kappa*dt)*c, otherwise the no-click propagator
  M0 = exp[-dt(iH + kappa*n/2)] acts.  The accumulated log of squared norms is
  the log record probability.
* `batch_sample` / `batch_replay` run the waiting-time engine from `kernels`
  (numba or numpy backend).  Instead of a Bernoulli draw per bin it inverts the
  exact multi-bin survival probability S(m) = ||M0^m psi||^2 by binary search,
  so the cost scales with the number of clicks, not the number of bins.  The
  likelihood it reports uses the same per-bin norms as the reference sampler.

Records replayed under perturbed Hamiltonian parameters (same kappa, same bin
grid) give the likelihood derivatives used for Fisher information estimation.
"""

from __future__ import annotations

import hashlib
import io
import struct
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from . import kernels
from .core import DimensionError, expectation
from .model import (
    MAX_SUPEROP_DIM,
    ModelParams,
    _sandwich,
    _spost,
    _spre,
    cavity_annihilation,
    hamiltonian,
    number_operator,
    unvectorize,
    vacuum_down_state,
    vectorize,
)
from .rng import trajectory_rng

BIN_OCCUPATION_BUDGET = 0.01
NORM_FLOOR_LOG = -690.0  # exp() underflows to 0 near -745

_MAGIC = b"CTRJ1"


class BinWidthError(ValueError):
    """dt too coarse for the per-bin click probability budget."""


class RecordMismatchError(ValueError):
    """Replay parameters incompatible with the record being replayed."""


@dataclass(frozen=True)
class TrajectoryRecord:
    """A binned click record plus everything needed to regenerate it."""

    dt: float
    clicks: np.ndarray  # uint8, one entry per bin
    seed: int
    params_used: ModelParams

    def __post_init__(self):
        clicks = np.ascontiguousarray(self.clicks, dtype=np.uint8)
        if clicks.ndim != 1 or not np.all(clicks <= 1):
            raise ValueError("clicks must be a flat 0/1 sequence")
        object.__setattr__(self, "clicks", clicks)

    @property
    def n_bins(self) -> int:
        return int(self.clicks.shape[0])

    @property
    def n_clicks(self) -> int:
        return int(self.clicks.sum())

    @property
    def click_bins(self) -> np.ndarray:
        return np.flatnonzero(self.clicks).astype(np.int64)

    @property
    def t_final(self) -> float:
        return self.dt * self.n_bins

    def params_hash(self) -> bytes:
        blob = repr(sorted(self.params_used.to_dict().items())).encode()
        return hashlib.sha256(blob).digest()

    def to_bytes(self) -> bytes:
        """Compact binary form: fixed header plus bit-packed clicks."""
        buf = io.BytesIO()
        buf.write(_MAGIC)
        buf.write(struct.pack("<dqq", self.dt, self.n_bins, self.seed))
        buf.write(self.params_hash())
        buf.write(np.packbits(self.clicks).tobytes())
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes, params: ModelParams) -> "TrajectoryRecord":
        if data[:5] != _MAGIC:
            raise RecordMismatchError("not a trajectory record blob")
        dt, n_bins, seed = struct.unpack_from("<dqq", data, 5)
        digest = data[29:61]
        clicks = np.unpackbits(np.frombuffer(data[61:], dtype=np.uint8))[:n_bins]
        rec = cls(dt=dt, clicks=clicks, seed=int(seed), params_used=params)
        if rec.params_hash() != digest:
            raise RecordMismatchError("params do not match the record header hash")
        return rec

    def to_csv(self) -> str:
        lines = ["bin,t,click"]
        for k in self.click_bins:
            lines.append(f"{k},{(k + 1) * self.dt:.12g},1")
        return "\n".join(lines) + "\n"


@dataclass
class ConditionalState:
    """Normalized conditional state plus the accumulated log squared norm.

    exp(log_norm) is the record probability; the product of per-bin norms
    underflows within a few damping times, so only the log is tracked.
    """

    state: np.ndarray
    log_norm: float

    @property
    def is_pure(self) -> bool:
        return self.state.ndim == 1


def check_bin_width(p: ModelParams, dt: float) -> None:
    """Require kappa*dt*n_max <= budget, with n_max the largest Fock level."""
    if p.kappa * dt * (p.n_cutoff - 1) > BIN_OCCUPATION_BUDGET:
        raise BinWidthError(
            f"kappa*dt*(n_cutoff-1) = {p.kappa * dt * (p.n_cutoff - 1):.3g} "
            f"exceeds {BIN_OCCUPATION_BUDGET}; reduce dt"
        )


def _no_click_propagator(p: ModelParams, dt: float) -> np.ndarray:
    h = hamiltonian(p)
    n_op = number_operator(p)
    return expm(-dt * (1j * h + 0.5 * p.kappa * n_op))


def _apply_bin(psi, log_norm, click, m0, c_op, kappa_dt):
    """One bin of conditional evolution; shared by sampling and replay."""
    if click:
        amp = c_op @ psi
        prob = kappa_dt * float(np.real(np.vdot(amp, amp)))
        if prob <= 0.0:
            raise RecordMismatchError("click recorded where click probability is zero")
        psi = amp / np.linalg.norm(amp)
    else:
        amp = m0 @ psi
        prob = float(np.real(np.vdot(amp, amp)))
        psi = amp / np.linalg.norm(amp)
    log_norm += np.log(prob)
    if log_norm < NORM_FLOOR_LOG:
        raise FloatingPointError("conditional norm underflow; dt too coarse")
    return psi, log_norm


def sample_trajectory(
    p: ModelParams,
    psi0: np.ndarray | None,
    t_final: float,
    dt: float,
    seed: int,
) -> tuple[TrajectoryRecord, ConditionalState]:
    """Reference per-bin sampler (Bernoulli draw each bin)."""
    check_bin_width(p, dt)
    if psi0 is None:
        psi0 = vacuum_down_state(p)
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (p.dim,):
        raise DimensionError(f"psi0 shape {psi0.shape} does not match dim {p.dim}")
    n_bins = int(round(t_final / dt))
    m0 = _no_click_propagator(p, dt)
    c_op = cavity_annihilation(p)
    n_op = number_operator(p)
    kappa_dt = p.kappa * dt
    rng = trajectory_rng(seed, 0)
    psi = psi0 / np.linalg.norm(psi0)
    log_norm = 0.0
    clicks = np.zeros(n_bins, dtype=np.uint8)
    for k in range(n_bins):
        p1 = kappa_dt * float(np.real(expectation(psi, n_op)))
        click = rng.random() < p1
        clicks[k] = 1 if click else 0
        psi, log_norm = _apply_bin(psi, log_norm, click, m0, c_op, kappa_dt)
    rec = TrajectoryRecord(dt=dt, clicks=clicks, seed=int(seed), params_used=p)
    return rec, ConditionalState(state=psi, log_norm=log_norm)


def replay_log_likelihood(
    rec: TrajectoryRecord,
    p_alt: ModelParams,
    psi0: np.ndarray | None = None,
) -> float:
    """Log probability of a fixed record under perturbed Hamiltonian parameters.

    Deterministic: consumes no randomness.  kappa and the cutoff must match the
    record, otherwise the click-measure normalization would change and the
    likelihoods of different parameter points would not be comparable.
    """
    base = rec.params_used
    if p_alt.kappa != base.kappa:
        raise RecordMismatchError("kappa must match the record (fixed jump measure)")
    if p_alt.n_cutoff != base.n_cutoff:
        raise RecordMismatchError("cutoff must match the record")
    if psi0 is None:
        psi0 = vacuum_down_state(p_alt)
    psi0 = np.asarray(psi0, dtype=complex)
    m0 = _no_click_propagator(p_alt, rec.dt)
    c_op = cavity_annihilation(p_alt)
    kappa_dt = p_alt.kappa * rec.dt
    psi = psi0 / np.linalg.norm(psi0)
    log_norm = 0.0
    for k in range(rec.n_bins):
        psi, log_norm = _apply_bin(psi, log_norm, bool(rec.clicks[k]), m0, c_op, kappa_dt)
    return log_norm


def sample_trajectory_inefficient(
    p: ModelParams,
    rho0: np.ndarray | None,
    t_final: float,
    dt: float,
    seed: int,
) -> tuple[TrajectoryRecord, ConditionalState]:
    """Finite-efficiency sampler; the conditional state is a density matrix.

    Detected decay (rate eps*kappa) produces clicks; the undetected channel
    (1-eps)*kappa acts as a deterministic dissipator between clicks.
    """
    eps = p.efficiency
    if not 0.0 <= eps <= 1.0:
        raise ValueError("efficiency must lie in [0, 1]")
    check_bin_width(p, dt)
    if (2 * p.n_cutoff) ** 2 > MAX_SUPEROP_DIM**2:
        raise DimensionError("cutoff too large for the dense no-click superoperator")
    if rho0 is None:
        psi = vacuum_down_state(p)
        rho0 = np.outer(psi, psi.conj())
    rho0 = np.asarray(rho0, dtype=complex)
    h = hamiltonian(p)
    c_op = cavity_annihilation(p)
    n_op = number_operator(p)
    gen = (
        -1j * (_spre(h) - _spost(h))
        - 0.5 * p.kappa * (_spre(n_op) + _spost(n_op))
        + (1.0 - eps) * p.kappa * _sandwich(c_op, c_op.conj().T)
    ).toarray()
    e0 = expm(dt * gen)
    n_bins = int(round(t_final / dt))
    rng = trajectory_rng(seed, 0)
    rho = rho0 / np.real(np.trace(rho0))
    log_norm = 0.0
    clicks = np.zeros(n_bins, dtype=np.uint8)
    eps_kdt = eps * p.kappa * dt
    for k in range(n_bins):
        p1 = eps_kdt * float(np.real(np.trace(n_op @ rho)))
        if rng.random() < p1:
            clicks[k] = 1
            rho = c_op @ rho @ c_op.conj().T
            prob = p1
        else:
            rho = unvectorize(e0 @ vectorize(rho))
            prob = float(np.real(np.trace(rho)))
        if prob <= 0.0:
            raise FloatingPointError("conditional trace collapsed; dt too coarse")
        log_norm += np.log(prob)
        rho = rho / np.real(np.trace(rho))
        rho = 0.5 * (rho + rho.conj().T)
    rec = TrajectoryRecord(dt=dt, clicks=clicks, seed=int(seed), params_used=p)
    return rec, ConditionalState(state=rho, log_norm=log_norm)


# ---------------------------------------------------------------------------
# Fast waiting-time engine entry points


def grid_to_bins(grid_times: np.ndarray, dt: float, n_bins: int) -> np.ndarray:
    """Map requested times to bin counts; times must sit on the bin grid."""
    grid_times = np.asarray(grid_times, dtype=float)
    bins = np.rint(grid_times / dt).astype(np.int64)
    if np.any(np.abs(bins * dt - grid_times) > 1e-9 * max(dt, 1.0)):
        raise ValueError("grid times must be integer multiples of dt")
    if np.any(bins < 0) or np.any(bins > n_bins):
        raise ValueError("grid times outside [0, t_final]")
    if np.any(np.diff(bins) < 0):
        raise ValueError("grid times must be nondecreasing")
    return bins


_INITIAL_UNIFORMS = 256


def fast_sample(
    setup: kernels.CountingKernelSetup,
    n_bins: int,
    grid_bins: np.ndarray,
    seed: int,
    index: int,
    psi0: np.ndarray | None = None,
    backend: str = "auto",
):
    """Sample one record with the waiting-time engine.

    Returns (click_bins, lognorm_grid, nbar_grid).  On uniform-buffer
    exhaustion the buffer is extended and the whole record is regenerated from
    the same stream prefix, so results are deterministic in (seed, index).
    """
    eng = kernels.get_backend(backend)
    p = setup.params
    if psi0 is None:
        psi0 = vacuum_down_state(p)
    a0 = setup.to_eigen(psi0)
    rng = trajectory_rng(seed, index)
    uniforms = rng.random(_INITIAL_UNIFORMS)
    while True:
        status, click_bins, n_clicks, lognorm_grid, nbar_grid = eng.sample_record(
            a0, setup.l0, setup.gram, setup.n_til, setup.c_til,
            setup.kappa_dt, n_bins, grid_bins, uniforms,
        )
        if status == kernels.STATUS_OK:
            return click_bins[:n_clicks].copy(), lognorm_grid, nbar_grid
        if status == kernels.STATUS_UNIFORMS_EXHAUSTED:
            uniforms = np.concatenate([uniforms, rng.random(len(uniforms))])
            continue
        raise RecordMismatchError("degenerate jump amplitude during sampling")


def fast_replay(
    setup: kernels.CountingKernelSetup,
    n_bins: int,
    click_bins: np.ndarray,
    grid_bins: np.ndarray,
    psi0: np.ndarray | None = None,
    backend: str = "auto",
) -> np.ndarray:
    """Replay a click-bin list under (possibly perturbed) parameters."""
    eng = kernels.get_backend(backend)
    if psi0 is None:
        psi0 = vacuum_down_state(setup.params)
    a0 = setup.to_eigen(psi0)
    click_bins = np.ascontiguousarray(click_bins, dtype=np.int64)
    return eng.replay_record(
        a0, setup.l0, setup.gram, setup.c_til, setup.kappa_dt,
        n_bins, click_bins, len(click_bins), grid_bins,
    )


def fast_record_to_trajectory_record(
    click_bins: np.ndarray, n_bins: int, dt: float, seed: int, p: ModelParams
) -> TrajectoryRecord:
    clicks = np.zeros(n_bins, dtype=np.uint8)
    clicks[np.asarray(click_bins, dtype=np.int64)] = 1
    return TrajectoryRecord(dt=dt, clicks=clicks, seed=int(seed), params_used=p)
