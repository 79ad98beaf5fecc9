"""Trial-loop backend selection: compiled kernel with pure-NumPy fallback.

The compiled extension is preferred when importable; set PTGSR_BACKEND to
``python`` or ``compiled`` to force a choice (forcing ``compiled`` raises if
the extension is missing).  `benchmarks/bench_backends.py` compares the two.
"""

from __future__ import annotations

import os

import numpy as np

from ._loop_py import (
    ALGO_ELMS,
    ALGO_GLMS,
    ALGO_PTGELMS,
    ALGO_PTGLMS,
    GAIN_GMSD,
    GAIN_IDENTITY,
    GAIN_LITERATURE,
)
from ._loop_py import run_filter_trial as _py_run
from .filters import FilterConfig

try:
    from ._speedup import run_filter_trial as _c_run
except ImportError:  # pragma: no cover - build-env dependent
    _c_run = None


def _select():
    choice = os.environ.get("PTGSR_BACKEND", "auto")
    if choice == "python":
        return _py_run, "python"
    if choice == "compiled":
        if _c_run is None:
            raise ImportError("PTGSR_BACKEND=compiled but ptgsr._speedup is not built")
        return _c_run, "compiled"
    if _c_run is not None:
        return _c_run, "compiled"
    return _py_run, "python"


_RUN, BACKEND = _select()

_ALGO_CODES = {
    ("glms", "identity"): (ALGO_GLMS, GAIN_IDENTITY),
    ("ptglms", "identity"): (ALGO_PTGLMS, GAIN_IDENTITY),
    ("ptglms", "literature"): (ALGO_PTGLMS, GAIN_LITERATURE),
    ("ptglms", "gmsd_optimal"): (ALGO_PTGLMS, GAIN_GMSD),
    ("ptgelms", "identity"): (ALGO_PTGELMS, GAIN_IDENTITY),
    ("ptgelms", "gmsd_optimal"): (ALGO_PTGELMS, GAIN_GMSD),
    ("elms", "identity"): (ALGO_ELMS, GAIN_IDENTITY),
}

DIVERGENCE_THRESHOLD = 1e12


def algo_codes(algorithm: str, gain_rule: str):
    key = (algorithm, gain_rule)
    if key not in _ALGO_CODES:
        raise KeyError(f"unsupported algorithm/gain combination {key}")
    return _ALGO_CODES[key]


def run_trial(
    A_stack: np.ndarray,
    Y: np.ndarray,
    s_true: np.ndarray,
    cfg: FilterConfig,
    algorithm: str,
    backend=None,
):
    """Run one algorithm over one trial's observation stream.

    Returns a dict with the NMSD curve, per-iteration applied-gain stats,
    time-averaged gain vectors, and the divergence index (-1 if none).
    """
    algorithm = algorithm.lower()
    rule = "identity" if algorithm in ("glms", "elms") else cfg.gain_rule
    algo, gain_rule = algo_codes(algorithm, rule)

    T = Y.shape[0]
    n = s_true.shape[0]
    m = Y.shape[1]
    ce = cfg.noise_cov
    if ce is None:
        ce = np.zeros(m)
    ce = np.ascontiguousarray(np.broadcast_to(np.asarray(ce, dtype=np.float64), (m,)))

    nmsd = np.empty(T)
    gstat = np.empty((T, 3))
    gbar = np.empty(n)
    hbar = np.empty(n)
    run = _RUN if backend is None else {"python": _py_run, "compiled": _c_run}[backend]
    if run is None:
        raise ImportError("requested backend is not available")
    diverged_at = run(
        np.ascontiguousarray(A_stack, dtype=np.float64),
        np.ascontiguousarray(Y, dtype=np.float64),
        np.ascontiguousarray(s_true, dtype=np.float64),
        ce,
        algo,
        gain_rule,
        cfg.mu,
        cfg.k_history,
        cfg.rho,
        cfg.delta,
        cfg.eps_g,
        cfg.gain_cap,
        cfg.nonneg_gains,
        cfg.inner_iters,
        cfg.force_h_zero,
        DIVERGENCE_THRESHOLD,
        nmsd,
        gstat,
        gbar,
        hbar,
    )
    return {
        "nmsd": nmsd,
        "gain_stats": gstat,
        "gain_mean_g": gbar,
        "gain_mean_h": hbar,
        "diverged_at": int(diverged_at),
    }
