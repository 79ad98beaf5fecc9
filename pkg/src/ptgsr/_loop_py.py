"""Pure-NumPy trial loop; the fallback when the compiled kernel is absent.

Drives the reference step functions from `ptgsr.filters`, so this path *is*
the specification of a trial.  The compiled kernel in `_speedup.pyx` mirrors
it operation for operation.
"""

from __future__ import annotations

import numpy as np

from . import filters
from .errors import NonFiniteState

ALGO_GLMS = 0
ALGO_PTGLMS = 1
ALGO_PTGELMS = 2
ALGO_ELMS = 3

GAIN_IDENTITY = 0
GAIN_LITERATURE = 1
GAIN_GMSD = 2

_GAIN_NAMES = {
    GAIN_IDENTITY: "identity",
    GAIN_LITERATURE: "literature",
    GAIN_GMSD: "gmsd_optimal",
}


def run_filter_trial(
    A_stack: np.ndarray,
    Y: np.ndarray,
    s_true: np.ndarray,
    ce_diag: np.ndarray,
    algo: int,
    gain_rule: int,
    mu: float,
    k_history: int,
    rho: float,
    delta: float,
    eps_g: float,
    gain_cap: float,
    nonneg_gains: bool,
    inner_iters: int,
    force_h_zero: bool,
    div_threshold: float,
    nmsd_out: np.ndarray,
    gstat_out: np.ndarray,
    gbar_out: np.ndarray,
    hbar_out: np.ndarray,
) -> int:
    """Run one algorithm over a pregenerated observation stream.

    ``A_stack`` has shape (1, M, N) for a static operator or (T, M, N) when
    the operator is redrawn each iteration.  Records the NMSD of the state
    *before* each update (so entry 0 is 1 for a zero start), per-iteration
    (min, max, mean) of the applied gains, and the time-averaged gain
    vectors.  Returns the iteration index of divergence, or -1.
    """
    T = Y.shape[0]
    n_nodes = s_true.shape[0]
    ref = float(s_true @ s_true)
    cfg = filters.FilterConfig(
        mu=mu,
        k_history=k_history,
        gain_rule=_GAIN_NAMES[gain_rule],
        rho=rho,
        delta=delta,
        eps_g=eps_g,
        gain_cap=gain_cap,
        nonneg_gains=bool(nonneg_gains),
        inner_iters=inner_iters,
        noise_cov=ce_diag,
        force_h_zero=bool(force_h_zero),
    )
    step = {
        ALGO_GLMS: filters.glms_step,
        ALGO_PTGLMS: filters.ptglms_step,
        ALGO_PTGELMS: filters.ptgelms_step,
        ALGO_ELMS: filters.elms_step,
    }[algo]

    state = filters.initial_state(n_nodes)
    gbar_out[:] = 0.0
    hbar_out[:] = 0.0
    static = A_stack.shape[0] == 1
    for n in range(T):
        diff = s_true - state.s_est
        nmsd_out[n] = float(diff @ diff) / ref
        A = A_stack[0] if static else A_stack[n]
        try:
            state = step(state, A, Y[n], cfg)
        except NonFiniteState:
            nmsd_out[n + 1 :] = np.inf
            gbar_out /= n + 1
            hbar_out /= n + 1
            return n
        g = state.g_diag
        gstat_out[n, 0] = g.min()
        gstat_out[n, 1] = g.max()
        gstat_out[n, 2] = g.mean()
        gbar_out += g
        hbar_out += state.h_diag
        diff = s_true - state.s_est
        if float(diff @ diff) / ref > div_threshold:
            nmsd_out[n + 1 :] = np.inf
            gbar_out /= n + 1
            hbar_out /= n + 1
            return n
    gbar_out /= T
    hbar_out /= T
    return -1
