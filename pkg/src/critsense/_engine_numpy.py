"""Pure-numpy backend for the photon-counting trajectory engine.

Same contract as `_engine_numba`; selected when numba is disabled (env flag
CRITSENSE_DISABLE_NUMBA) or unavailable.  The per-segment algorithm is
identical: waiting-time search over no-jump survival probabilities evaluated
in the eigenbasis of the non-Hermitian no-jump generator.
"""

from __future__ import annotations

import numpy as np

STATUS_OK = 0
STATUS_UNIFORMS_EXHAUSTED = 1
STATUS_DEGENERATE_JUMP = 2


def _qform(mat: np.ndarray, vec: np.ndarray) -> float:
    return float(np.real(np.vdot(vec, mat @ vec)))


def _advanced(a: np.ndarray, l0: np.ndarray, m: int) -> np.ndarray:
    return a * np.exp(l0 * m)


def _surv(gram: np.ndarray, a: np.ndarray, l0: np.ndarray, m: int) -> float:
    return _qform(gram, _advanced(a, l0, m))


def sample_record(a0, l0, gram, n_til, c_til, kappa_dt, n_bins, grid_bins, uniforms):
    a = a0 / np.sqrt(_qform(gram, a0))
    ngrid = grid_bins.shape[0]
    lognorm_grid = np.zeros(ngrid)
    nbar_grid = np.zeros(ngrid)
    click_bins = np.zeros(uniforms.shape[0], dtype=np.int64)
    lognorm = 0.0
    n_clicks = 0
    iu = 0
    b = 0
    gi = 0
    status = STATUS_OK
    while gi < ngrid and grid_bins[gi] == 0:
        nbar_grid[gi] = _qform(n_til, a)
        gi += 1
    while b < n_bins:
        if iu >= uniforms.shape[0]:
            status = STATUS_UNIFORMS_EXHAUSTED
            break
        u = uniforms[iu]
        iu += 1
        rem = n_bins - b
        s_rem = _surv(gram, a, l0, rem)
        if s_rem >= u:
            k = rem
            click = False
        else:
            lo, hi = 0, rem
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if _surv(gram, a, l0, mid) < u:
                    hi = mid
                else:
                    lo = mid
            k = hi - 1
            click = True
        while gi < ngrid and grid_bins[gi] <= b + k:
            m = int(grid_bins[gi] - b)
            am = _advanced(a, l0, m)
            s_m = _qform(gram, am)
            lognorm_grid[gi] = lognorm + np.log(s_m)
            nbar_grid[gi] = _qform(n_til, am) / s_m
            gi += 1
        if click:
            s_k = _surv(gram, a, l0, k)
            a = _advanced(a, l0, k) / np.sqrt(s_k)
            lognorm += np.log(s_k)
            ac = c_til @ a
            qc = _qform(gram, ac)
            if qc <= 0.0:
                status = STATUS_DEGENERATE_JUMP
                break
            lognorm += np.log(kappa_dt * qc)
            a = ac / np.sqrt(qc)
            click_bins[n_clicks] = b + k
            n_clicks += 1
            b += k + 1
            while gi < ngrid and grid_bins[gi] == b:
                lognorm_grid[gi] = lognorm
                nbar_grid[gi] = _qform(n_til, a)
                gi += 1
        else:
            a = _advanced(a, l0, k) / np.sqrt(s_rem)
            lognorm += np.log(s_rem)
            b += k
    return status, click_bins, n_clicks, lognorm_grid, nbar_grid


def replay_record(a0, l0, gram, c_til, kappa_dt, n_bins, click_bins, n_clicks, grid_bins):
    a = a0 / np.sqrt(_qform(gram, a0))
    ngrid = grid_bins.shape[0]
    lognorm_grid = np.zeros(ngrid)
    lognorm = 0.0
    b = 0
    gi = 0
    while gi < ngrid and grid_bins[gi] == 0:
        gi += 1
    for ic in range(n_clicks + 1):
        target = int(click_bins[ic]) if ic < n_clicks else n_bins
        k = target - b
        while gi < ngrid and grid_bins[gi] <= b + k:
            m = int(grid_bins[gi] - b)
            lognorm_grid[gi] = lognorm + np.log(_surv(gram, a, l0, m))
            gi += 1
        if k > 0:
            s_k = _surv(gram, a, l0, k)
            a = _advanced(a, l0, k) / np.sqrt(s_k)
            lognorm += np.log(s_k)
            b += k
        if ic < n_clicks:
            ac = c_til @ a
            qc = _qform(gram, ac)
            lognorm += np.log(kappa_dt * qc)
            a = ac / np.sqrt(qc)
            b += 1
            while gi < ngrid and grid_bins[gi] == b:
                lognorm_grid[gi] = lognorm
                gi += 1
    return lognorm_grid
