# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled trial loop: one algorithm over a pregenerated observation stream.

Mirrors ptgsr._loop_py.run_filter_trial operation for operation; the Python
wrapper there documents the contract.  Kept in plain C loops (no BLAS calls)
so whole trials run without the GIL and parallel trial workers scale.
"""

from libc.math cimport fabs, isfinite, sqrt

import numpy as np

ALGO_GLMS = 0
ALGO_PTGLMS = 1
ALGO_PTGELMS = 2
ALGO_ELMS = 3

GAIN_IDENTITY = 0
GAIN_LITERATURE = 1
GAIN_GMSD = 2


cdef inline double _clampv(double v, double lo, double hi) nogil:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


def run_filter_trial(
    const double[:, :, ::1] A_stack,
    const double[:, ::1] Y,
    const double[::1] s_true,
    const double[::1] ce_diag,
    int algo,
    int gain_rule,
    double mu,
    int k_history,
    double rho,
    double delta,
    double eps_g,
    double gain_cap,
    bint nonneg_gains,
    int inner_iters,
    bint force_h_zero,
    double div_threshold,
    double[::1] nmsd_out,
    double[:, ::1] gstat_out,
    double[::1] gbar_out,
    double[::1] hbar_out,
):
    cdef int T = Y.shape[0]
    cdef int M = Y.shape[1]
    cdef int N = s_true.shape[0]
    cdef int TA = A_stack.shape[0]
    cdef int hist_cap = k_history - 1
    cdef bint uses_history = algo == ALGO_PTGELMS or algo == ALGO_ELMS
    cdef bint gmsd_rule = (
        gain_rule == GAIN_GMSD and (algo == ALGO_PTGLMS or algo == ALGO_PTGELMS)
    )
    cdef int eff_rule = gain_rule
    if algo == ALGO_GLMS or algo == ALGO_ELMS:
        eff_rule = GAIN_IDENTITY
    cdef bint rule_identity = eff_rule == GAIN_IDENTITY
    cdef bint rule_literature = eff_rule == GAIN_LITERATURE
    cdef bint coupled = algo == ALGO_PTGELMS and gain_rule == GAIN_GMSD

    scratch = {
        "s": np.zeros(N), "eh": np.zeros(M), "z": np.zeros(N),
        "m1": np.zeros(N), "m2": np.zeros(N), "cross": np.zeros(N),
        "colsq": np.zeros(N), "sigma": np.zeros(N),
        "g": np.zeros(N), "h": np.zeros(N), "d": np.zeros(N),
        "Ad": np.zeros(M), "cg": np.zeros(N), "ch": np.zeros(N),
    }
    cdef double[::1] s = scratch["s"]
    cdef double[::1] eh = scratch["eh"]
    cdef double[::1] z = scratch["z"]
    cdef double[::1] m1 = scratch["m1"]
    cdef double[::1] m2 = scratch["m2"]
    cdef double[::1] cross = scratch["cross"]
    cdef double[::1] colsq = scratch["colsq"]
    cdef double[::1] sigma = scratch["sigma"]
    cdef double[::1] g = scratch["g"]
    cdef double[::1] h = scratch["h"]
    cdef double[::1] d = scratch["d"]
    cdef double[::1] Ad = scratch["Ad"]
    cdef double[::1] cg = scratch["cg"]
    cdef double[::1] ch = scratch["ch"]

    ring_y_arr = np.zeros((hist_cap if hist_cap > 0 else 1, M))
    ring_a_arr = np.zeros(hist_cap if hist_cap > 0 else 1, dtype=np.int64)
    cdef double[:, ::1] ring_y = ring_y_arr
    cdef long long[::1] ring_a = ring_a_arr

    cdef double ref = 0.0, acc, t_scale, den, num, gmin, gmax, gsum
    cdef double gamma_min, gamma, gmean, lo, hi, ehn, denom
    cdef int n, i, j, m, k, a_idx, hc = 0, ring_head = 0, it, aj
    cdef int diverged_at = -1
    cdef bint skip, static_cols_done = False

    hi = gain_cap
    lo = 0.0 if nonneg_gains else -gain_cap

    for i in range(N):
        ref += s_true[i] * s_true[i]
        gbar_out[i] = 0.0
        hbar_out[i] = 0.0

    with nogil:
        for n in range(T):
            # NMSD of the state before this update
            acc = 0.0
            for i in range(N):
                acc += (s_true[i] - s[i]) * (s_true[i] - s[i])
            nmsd_out[n] = acc / ref

            a_idx = 0 if TA == 1 else n

            # column stats (cached across steps for a static operator)
            if TA != 1 or not static_cols_done:
                for i in range(N):
                    acc = 0.0
                    num = 0.0
                    for j in range(M):
                        acc += A_stack[a_idx, j, i] * A_stack[a_idx, j, i]
                        num += ce_diag[j] * A_stack[a_idx, j, i] * A_stack[a_idx, j, i]
                    colsq[i] = acc
                    sigma[i] = num
                static_cols_done = True

            # residual and instantaneous gradient step
            ehn = 0.0
            for j in range(M):
                acc = 0.0
                for i in range(N):
                    acc += A_stack[a_idx, j, i] * s[i]
                eh[j] = Y[n, j] - acc
                ehn += eh[j] * eh[j]
            ehn = sqrt(ehn)
            for i in range(N):
                acc = 0.0
                for j in range(M):
                    acc += A_stack[a_idx, j, i] * eh[j]
                z[i] = acc
                m1[i] = mu * acc

            # history terms (newest first, matching the reference path)
            if uses_history and hc > 0:
                for i in range(N):
                    m2[i] = 0.0
                    cross[i] = 0.0
                for k in range(hc):
                    j = ring_head - 1 - k
                    if j < 0:
                        j += hist_cap
                    aj = <int> ring_a[j]
                    for m in range(M):
                        acc = 0.0
                        for i in range(N):
                            acc += A_stack[aj, m, i] * s[i]
                        Ad[m] = ring_y[j, m] - acc  # reuse Ad as scratch
                    for i in range(N):
                        acc = 0.0
                        for m in range(M):
                            acc += A_stack[aj, m, i] * Ad[m]
                        m2[i] += acc
                        # cross-term of current and past columns through C_e
                        acc = 0.0
                        for m in range(M):
                            acc += ce_diag[m] * A_stack[a_idx, m, i] * A_stack[aj, m, i]
                        cross[i] += acc
                for i in range(N):
                    m2[i] = mu * m2[i]

            skip = gmsd_rule and ehn < 1e-14

            # gains
            if skip:
                for i in range(N):
                    g[i] = 0.0
                    h[i] = 0.0
            elif rule_identity:
                for i in range(N):
                    g[i] = 1.0
                    h[i] = 1.0 if (uses_history and hc > 0) else 0.0
            elif rule_literature:
                gamma_min = delta
                for i in range(N):
                    if fabs(s[i]) > gamma_min:
                        gamma_min = fabs(s[i])
                gmean = 0.0
                for i in range(N):
                    gamma = fabs(s[i])
                    if rho * gamma_min > gamma:
                        gamma = rho * gamma_min
                    g[i] = gamma
                    gmean += gamma
                gmean /= N
                for i in range(N):
                    g[i] /= gmean
                    h[i] = 0.0
            elif not coupled:
                for i in range(N):
                    num = (m1[i] * m1[i]) / mu - mu * sigma[i]
                    den = (m1[i] * m1[i]) * colsq[i] + eps_g
                    g[i] = _clampv(num / den, lo, hi)
                    h[i] = 0.0
            else:  # coupled gains
                for i in range(N):
                    cg[i] = (m1[i] * m1[i]) / mu - mu * sigma[i]
                    ch[i] = (m1[i] * m2[i]) / mu - mu * cross[i]
                    h[i] = 0.0
                for it in range(inner_iters):
                    for i in range(N):
                        num = cg[i] - h[i] * m1[i] * m2[i] * colsq[i]
                        den = (m1[i] * m1[i]) * colsq[i] + eps_g
                        g[i] = _clampv(num / den, lo, hi)
                        if hc > 0 and m2[i] != 0.0 and not force_h_zero:
                            num = ch[i] - g[i] * m1[i] * m2[i] * colsq[i]
                            den = (m2[i] * m2[i]) * colsq[i] + eps_g
                            h[i] = _clampv(num / den, lo, hi)
                        else:
                            h[i] = 0.0

            # direction, trust scale, update
            if not skip:
                if uses_history and hc > 0:
                    for i in range(N):
                        d[i] = g[i] * m1[i] + h[i] * m2[i]
                else:
                    for i in range(N):
                        d[i] = g[i] * m1[i]
                if gmsd_rule:
                    den = 0.0
                    num = 0.0
                    for j in range(M):
                        acc = 0.0
                        for i in range(N):
                            acc += A_stack[a_idx, j, i] * d[i]
                        Ad[j] = acc
                        den += acc * acc
                        num += eh[j] * acc
                    t_scale = 1.0 if den == 0.0 else _clampv(num / den, -1.0, 1.0)
                    for i in range(N):
                        d[i] = t_scale * d[i]
                        g[i] = t_scale * g[i]
                        h[i] = t_scale * h[i]
                for i in range(N):
                    s[i] = s[i] + d[i]

            # ring push
            if uses_history and hist_cap > 0:
                for m in range(M):
                    ring_y[ring_head, m] = Y[n, m]
                ring_a[ring_head] = a_idx
                ring_head = (ring_head + 1) % hist_cap
                if hc < hist_cap:
                    hc += 1

            # applied-gain statistics
            gmin = g[0]
            gmax = g[0]
            gsum = 0.0
            for i in range(N):
                if g[i] < gmin:
                    gmin = g[i]
                if g[i] > gmax:
                    gmax = g[i]
                gsum += g[i]
                gbar_out[i] += g[i]
                hbar_out[i] += h[i]
            gstat_out[n, 0] = gmin
            gstat_out[n, 1] = gmax
            gstat_out[n, 2] = gsum / N

            # divergence check on the updated state
            acc = 0.0
            for i in range(N):
                acc += (s_true[i] - s[i]) * (s_true[i] - s[i])
                if not isfinite(s[i]):
                    acc = div_threshold * 2.0 + 1.0
                    break
            if not isfinite(acc) or acc / ref > div_threshold:
                diverged_at = n
                break

    if diverged_at >= 0:
        for n in range(diverged_at + 1, T):
            nmsd_out[n] = np.inf
        denom = diverged_at + 1.0
    else:
        denom = <double> T
    for i in range(N):
        gbar_out[i] /= denom
        hbar_out[i] /= denom
    return diverged_at
