"""Numba backend for the photon-counting trajectory engine.

Hot inner loops of the waiting-time sampler: survival-probability quadratic
forms in the eigenbasis of the no-jump generator, binary search for the next
click bin, and deterministic replay of a fixed click record.  Mirrors the
contract of `_engine_numpy` exactly.
"""

from __future__ import annotations

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_UNIFORMS_EXHAUSTED = 1
STATUS_DEGENERATE_JUMP = 2


@njit(cache=True, nogil=True)
def _qform(mat, vec):
    d = vec.shape[0]
    acc = 0.0
    for i in range(d):
        row = 0.0 + 0.0j
        for j in range(d):
            row += mat[i, j] * vec[j]
        acc += (np.conj(vec[i]) * row).real
    return acc


@njit(cache=True, nogil=True)
def _advanced(a, l0, m):
    d = a.shape[0]
    out = np.empty(d, np.complex128)
    for i in range(d):
        out[i] = a[i] * np.exp(l0[i] * m)
    return out


@njit(cache=True, nogil=True)
def _surv(gram, a, l0, m):
    return _qform(gram, _advanced(a, l0, m))


@njit(cache=True, nogil=True)
def _matvec(mat, vec):
    d = vec.shape[0]
    out = np.empty(d, np.complex128)
    for i in range(d):
        acc = 0.0 + 0.0j
        for j in range(d):
            acc += mat[i, j] * vec[j]
        out[i] = acc
    return out


@njit(cache=True, nogil=True)
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
            lo = 0
            hi = rem
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if _surv(gram, a, l0, mid) < u:
                    hi = mid
                else:
                    lo = mid
            k = hi - 1
            click = True
        while gi < ngrid and grid_bins[gi] <= b + k:
            m = grid_bins[gi] - b
            am = _advanced(a, l0, m)
            s_m = _qform(gram, am)
            lognorm_grid[gi] = lognorm + np.log(s_m)
            nbar_grid[gi] = _qform(n_til, am) / s_m
            gi += 1
        if click:
            s_k = _surv(gram, a, l0, k)
            a = _advanced(a, l0, k) / np.sqrt(s_k)
            lognorm += np.log(s_k)
            ac = _matvec(c_til, a)
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


@njit(cache=True, nogil=True)
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
        target = click_bins[ic] if ic < n_clicks else n_bins
        k = target - b
        while gi < ngrid and grid_bins[gi] <= b + k:
            m = grid_bins[gi] - b
            lognorm_grid[gi] = lognorm + np.log(_surv(gram, a, l0, m))
            gi += 1
        if k > 0:
            s_k = _surv(gram, a, l0, k)
            a = _advanced(a, l0, k) / np.sqrt(s_k)
            lognorm += np.log(s_k)
            b += k
        if ic < n_clicks:
            ac = _matvec(c_til, a)
            qc = _qform(gram, ac)
            lognorm += np.log(kappa_dt * qc)
            a = ac / np.sqrt(qc)
            b += 1
            while gi < ngrid and grid_bins[gi] == b:
                lognorm_grid[gi] = lognorm
                gi += 1
    return lognorm_grid
