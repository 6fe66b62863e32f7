"""Hot loops shared by the queue and path-integral Monte Carlo drivers.

Every kernel is written as a plain nopython-compatible function and compiled
with numba unless the environment variable ``LOWSPEC_NO_NUMBA`` is set (any
non-empty value), in which case the pure-Python/numpy version runs as is.
Randomness never enters a kernel: callers draw all variates up front from
counter-based bit generators (see `block_rng`), so both execution paths are
bit-identical and results do not depend on the thread count.
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

USE_NUMBA = not os.environ.get("LOWSPEC_NO_NUMBA")
if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        USE_NUMBA = False

# paths per RNG block; fixed so that estimates are invariant under the
# worker count and only depend on (seed, n)
BLOCK = 4096


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Counter-based generator for one block of Monte Carlo paths."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))


def run_blocks(fn, n_total: int, workers: int = 1):
    """Split ``n_total`` paths into fixed-size blocks and run ``fn(block, count)``.

    Returns the per-block results in block order regardless of scheduling,
    so any associative reduction over them is deterministic.
    """
    counts = [min(BLOCK, n_total - i) for i in range(0, n_total, BLOCK)]
    if workers <= 1:
        return [fn(b, c) for b, c in enumerate(counts)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, b, c) for b, c in enumerate(counts)]
        return [f.result() for f in futures]


def _queue_sweep(u, s, offsets, horizon, tgrid,
                 d1, a1, t1, d1_cens, a1_cens, dorm_total, zero_counts):
    """Sweep sorted arrival/service pairs of one block of M/G/infinity paths.

    u, s           arrival times and service durations, concatenated per path
    offsets        path i owns entries offsets[i]:offsets[i+1]; u slices sorted
    horizon        simulation horizon T (arrivals live on [0, T])
    tgrid          sorted probe times in [0, horizon]

    Per-path outputs: first dormant period d1, first active period a1, first
    regeneration t1 (d1 + a1), censor flags, and total dormant time on
    [0, horizon].  zero_counts[j] accumulates #paths with X_{tgrid[j]} = 0.
    """
    n = offsets.shape[0] - 1
    ng = tgrid.shape[0]
    for i in range(n):
        lo, hi = offsets[i], offsets[i + 1]
        if lo == hi:
            d1[i] = horizon
            d1_cens[i] = 1
            a1[i] = 0.0
            a1_cens[i] = 1
            t1[i] = horizon
            dorm_total[i] = horizon
            for j in range(ng):
                zero_counts[j] += 1
            continue
        d1[i] = u[lo]
        d1_cens[i] = 0
        dorm = u[lo]
        # count grid points in the leading dormant interval [0, u[lo])
        j = 0
        while j < ng and tgrid[j] < u[lo]:
            zero_counts[j] += 1
            j += 1
        first_end = -1.0
        cur_end = u[lo] + s[lo]
        for k in range(lo + 1, hi):
            if u[k] > cur_end:
                if first_end < 0.0:
                    first_end = cur_end
                if cur_end < horizon:
                    gap_hi = min(u[k], horizon)
                    dorm += gap_hi - cur_end
                while j < ng and tgrid[j] < u[k]:
                    if tgrid[j] >= cur_end:
                        zero_counts[j] += 1
                    j += 1
                cur_end = u[k] + s[k]
            elif u[k] + s[k] > cur_end:
                cur_end = u[k] + s[k]
        if first_end < 0.0:
            first_end = cur_end
        if cur_end < horizon:
            dorm += horizon - cur_end
        while j < ng:
            if tgrid[j] >= cur_end:
                zero_counts[j] += 1
            j += 1
        dorm_total[i] = dorm
        if first_end <= horizon:
            a1[i] = first_end - u[lo]
            a1_cens[i] = 0
        else:
            a1[i] = horizon - u[lo]
            a1_cens[i] = 1
        t1[i] = u[lo] + a1[i]
    return d1


def _fk_pair_sum(seg_t, seg_len, seg_state, offsets, w, v, omega, nu2, eps, logw):
    """Log FK weight of each piecewise-constant path, no time discretization.

    The double integral of g(t-s) w(X_s) w(X_t) over the square is evaluated
    per ordered pair of constancy segments through the antiderivatives of
    e^{-omega|t-s|}; ``eps`` shifts every mode frequency (infrared
    regularization g -> e^{-eps|t|} g).
    """
    n = offsets.shape[0] - 1
    nk = omega.shape[0]
    for i in range(n):
        lo, hi = offsets[i], offsets[i + 1]
        acc = 0.0
        for a in range(lo, hi):
            la = seg_len[a]
            wa = w[seg_state[a]]
            acc += 2.0 * v[seg_state[a]] * la
            for k in range(nk):
                om = omega[k] + eps
                x = om * la
                # int_I int_I e^{-om|t-s|} = 2 (x - 1 + e^{-x}) / om^2
                acc += nu2[k] * wa * wa * 2.0 * (x + np.expm1(-x)) / (om * om)
            for b in range(a + 1, hi):
                gap = seg_t[b] - (seg_t[a] + la)
                wab = wa * w[seg_state[b]]
                for k in range(nk):
                    om = omega[k] + eps
                    val = (np.expm1(-om * la) * np.expm1(-om * seg_len[b])
                           * np.exp(-om * gap) / (om * om))
                    # ordered pairs (I,J) and (J,I) contribute equally
                    acc += 2.0 * nu2[k] * wab * val
        logw[i] = 0.5 * acc
    return logw


def _fk_pair_cross(seg_t_x, seg_len_x, seg_state_x, off_x,
                   seg_t_y, seg_len_y, seg_state_y, off_y,
                   w, omega, nu2, eps, out):
    """Per path pair, int over [0,Tx]x[0,Ty] of g(u+v) w(X_u) w(Y_v).

    Uses int_I int_J e^{-om(u+v)} du dv = (e^{-om a} - e^{-om a'})
    (e^{-om c} - e^{-om c'}) / om^2 for segments I=[a,a'), J=[c,c').
    """
    n = off_x.shape[0] - 1
    nk = omega.shape[0]
    for i in range(n):
        acc = 0.0
        for a in range(off_x[i], off_x[i + 1]):
            fa = w[seg_state_x[a]]
            for b in range(off_y[i], off_y[i + 1]):
                fb = fa * w[seg_state_y[b]]
                for k in range(nk):
                    om = omega[k] + eps
                    val = (np.exp(-om * (seg_t_x[a] + seg_t_y[b]))
                           * np.expm1(-om * seg_len_x[a])
                           * np.expm1(-om * seg_len_y[b]) / (om * om))
                    acc += nu2[k] * fb * val
        out[i] = acc
    return out


def _path_probe(seg_t, seg_state, offsets, tgrid, states, jumps):
    """State index and jump count of each path at each probe time.

    jumps[i, j] counts jump times <= tgrid[j], so the number of jumps in
    (s, t] is jumps[:, jt] - jumps[:, js].
    """
    n = offsets.shape[0] - 1
    ng = tgrid.shape[0]
    for i in range(n):
        lo, hi = offsets[i], offsets[i + 1]
        k = lo
        for j in range(ng):
            while k + 1 < hi and seg_t[k + 1] <= tgrid[j]:
                k += 1
            states[i, j] = seg_state[k]
            jumps[i, j] = k - lo
    return states


if USE_NUMBA:
    queue_sweep = njit(cache=True, nogil=True)(_queue_sweep)
    fk_pair_sum = njit(cache=True, nogil=True)(_fk_pair_sum)
    fk_pair_cross = njit(cache=True, nogil=True)(_fk_pair_cross)
    path_probe = njit(cache=True, nogil=True)(_path_probe)
else:
    queue_sweep = _queue_sweep
    fk_pair_sum = _fk_pair_sum
    fk_pair_cross = _fk_pair_cross
    path_probe = _path_probe
