"""Streaming recovery filters: GLMS, Pt-GLMS, Pt-GELMS, and the ELMS baseline.

All four share one update skeleton

    s[n+1] = s[n] + G[n] m1[n] + H[n] m2[n]

where m1 = mu * A^T (y - A s) is the instantaneous gradient step and m2 is
the same quantity accumulated over the K-1 most recent past observations.
The algorithms differ only in how the diagonal gains G, H are chosen:

* identity gains reproduce plain (extended) LMS;
* literature gains are the classic proportionate rule (magnitude-driven,
  normalized to unit mean);
* closed-form gains minimize the per-coordinate one-step change of the
  Q-weighted squared error (Q = A^T A), debiased for the known observation
  noise covariance.

The closed-form gains solve each coordinate's quadratic exactly, so applying
all of them simultaneously overshoots whenever columns of A interact; raw
application diverges in any undersampled geometry.  Steps therefore rescale
the gain-weighted direction by a residual line search t = <e, Ad>/||Ad||^2
clipped to [-1, 1].  The gain formulas themselves are exposed unmodified
(`ptglms_gain`, `ptgelms_gain_pair`) together with the objective evaluators
used by the stationarity tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonFiniteState, OutOfRange

GAIN_RULES = ("identity", "literature", "gmsd_optimal")

#: residual 2-norm below which gain computation is skipped (0/0 guard)
ZERO_RESIDUAL_TOL = 1e-14


@dataclass(frozen=True)
class FilterConfig:
    mu: float
    k_history: int = 1
    gain_rule: str = "identity"
    rho: float = 0.01
    delta: float = 0.01
    eps_g: float = 1e-12
    gain_cap: float = 1e3
    nonneg_gains: bool = False
    inner_iters: int = 2
    noise_cov: np.ndarray | None = None  # diagonal of C_e, observation space
    force_h_zero: bool = False

    def __post_init__(self):
        if self.mu <= 0.0:
            raise OutOfRange("mu must be positive")
        if self.k_history < 1:
            raise OutOfRange("k_history must be >= 1")
        if self.inner_iters < 1:
            raise OutOfRange("inner_iters must be >= 1")
        if self.gain_rule not in GAIN_RULES:
            raise OutOfRange(f"gain_rule must be one of {GAIN_RULES}")
        if self.noise_cov is not None:
            cov = np.asarray(self.noise_cov, dtype=np.float64)
            object.__setattr__(self, "noise_cov", cov)


@dataclass(frozen=True)
class FilterState:
    s_est: np.ndarray
    g_diag: np.ndarray
    h_diag: np.ndarray
    history: tuple = ()  # ((A, y), ...) newest first, length <= K-1
    n: int = 0


def initial_state(n_nodes: int) -> FilterState:
    z = np.zeros(n_nodes)
    return FilterState(s_est=z, g_diag=z.copy(), h_diag=z.copy())


# ---------------------------------------------------------------------------
# gain rules
# ---------------------------------------------------------------------------


def literature_gains(state: FilterState, cfg: FilterConfig) -> np.ndarray:
    """Proportionate gains from coefficient magnitudes, normalized to mean 1."""
    return _literature_gain_vector(state.s_est, cfg.rho, cfg.delta)


def _literature_gain_vector(s: np.ndarray, rho: float, delta: float) -> np.ndarray:
    mag = np.abs(s)
    gamma_min = max(delta, mag.max(initial=0.0))
    gamma = np.maximum(rho * gamma_min, mag)
    return gamma / gamma.mean()


def gmsd_delta_single(gain, m1_i, colsq_i, sigma_i, mu):
    """Per-coordinate one-step objective for the single-gain filter.

    delta_i(g) = g^2 m1_i^2 S_i - 2 g c_i with S_i the squared column norm
    and c_i = mu [(A_i^T e)^2 - A_i^T C_e A_i].  `ptglms_gain` returns its
    unique minimizer (up to the eps_g regularizer).
    """
    c = (m1_i * m1_i) / mu - mu * sigma_i
    return gain * gain * (m1_i * m1_i) * colsq_i - 2.0 * gain * c


def gmsd_delta_coupled(g, h, m1_i, m2_i, colsq_i, sigma_i, cross_i, mu):
    """Per-coordinate objective for the coupled (g, h) gains.

    delta_i(g, h) = S_i (g m1 + h m2)^2 - 2 g c_g - 2 h c_h, with
    c_g as in `gmsd_delta_single` and c_h = mu [(A_i^T e)(A_i^T r2) - cross_i]
    where r2 sums the past residuals and cross_i couples the current column
    with the past ones through C_e.

    The quadratic term depends on (g, h) only through u = g m1 + h m2, so the
    Hessian is rank one: the two stationarity equations define parallel lines
    and admit no joint solution unless c_g m2 == c_h m1 (e.g. noise-free).
    Each returned gain is stationary for its own equation at the operating
    point where it was computed; see `ptgelms_gain_pair`.
    """
    u = g * m1_i + h * m2_i
    c_g = (m1_i * m1_i) / mu - mu * sigma_i
    c_h = (m1_i * m2_i) / mu - mu * cross_i
    return colsq_i * u * u - 2.0 * g * c_g - 2.0 * h * c_h


def _column_stats(A: np.ndarray, ce_diag: np.ndarray):
    """Squared column norms and the per-column noise quadratic forms."""
    colsq = (A * A).sum(axis=0)
    sigma = (ce_diag[:, None] * A * A).sum(axis=0)
    return colsq, sigma


def _ce_diag(cfg: FilterConfig, m: int) -> np.ndarray:
    if cfg.noise_cov is None:
        return np.zeros(m)
    cov = cfg.noise_cov
    if cov.ndim == 0:
        return np.full(m, float(cov))
    if cov.shape != (m,):
        raise DimensionMismatch(f"noise_cov must have length {m}, got {cov.shape}")
    return cov


def _clamp(g: np.ndarray, cfg: FilterConfig) -> np.ndarray:
    lo = 0.0 if cfg.nonneg_gains else -cfg.gain_cap
    return np.clip(g, lo, cfg.gain_cap)


def ptglms_gain(state: FilterState, A, y, cfg: FilterConfig, return_unclamped=False):
    """Closed-form single gain: the minimizer of `gmsd_delta_single` per node.

    Returns the clamped gain vector; with ``return_unclamped`` also the raw
    minimizer (the stationarity tests operate on the raw values).
    """
    A = np.asarray(A, dtype=np.float64)
    eh = np.asarray(y, dtype=np.float64) - A @ state.s_est
    z = A.T @ eh
    m1 = cfg.mu * z
    colsq, sigma = _column_stats(A, _ce_diag(cfg, A.shape[0]))
    raw = _ptglms_gain_vector(m1, colsq, sigma, cfg.mu, cfg.eps_g)
    clamped = _clamp(raw, cfg)
    if return_unclamped:
        return clamped, raw
    return clamped


def _ptglms_gain_vector(m1, colsq, sigma, mu, eps_g):
    num = (m1 * m1) / mu - mu * sigma
    den = (m1 * m1) * colsq + eps_g
    return num / den


def ptgelms_gain_pair(
    state: FilterState, A, y, cfg: FilterConfig, return_trace=False
):
    """Coupled gains by alternating coordinate solves, h initialized at zero.

    Each pass solves the g-equation at the current h, then the h-equation at
    the new g; `inner_iters` passes are taken and both gains are clamped
    after each solve.  With no history (or m2 = 0) h is pinned to zero and
    g reduces to the single-gain formula.
    """
    A = np.asarray(A, dtype=np.float64)
    s = state.s_est
    eh = np.asarray(y, dtype=np.float64) - A @ s
    z = A.T @ eh
    m1 = cfg.mu * z
    ce = _ce_diag(cfg, A.shape[0])
    colsq, sigma = _column_stats(A, ce)
    m2, cross = _history_terms(A, s, state.history, ce, cfg.mu)
    g, h, trace = _ptgelms_alternation(m1, m2, colsq, sigma, cross, cfg)
    if return_trace:
        return g, h, trace
    return g, h


def _history_terms(A, s, history, ce_diag, mu):
    n = A.shape[1]
    m2 = np.zeros(n)
    cross = np.zeros(n)
    for (Aj, yj) in history:
        m2 += Aj.T @ (yj - Aj @ s)
        cross += (ce_diag[:, None] * A * Aj).sum(axis=0)
    return mu * m2, cross


def _ptgelms_alternation(m1, m2, colsq, sigma, cross, cfg: FilterConfig):
    mu, eps = cfg.mu, cfg.eps_g
    c_g = (m1 * m1) / mu - mu * sigma
    c_h = (m1 * m2) / mu - mu * cross
    has_h = (m2 != 0.0) & (not cfg.force_h_zero)
    h = np.zeros_like(m1)
    g = np.zeros_like(m1)
    trace = []
    for _ in range(cfg.inner_iters):
        g_raw = (c_g - h * m1 * m2 * colsq) / ((m1 * m1) * colsq + eps)
        g = _clamp(g_raw, cfg)
        h_raw = np.zeros_like(m1)
        np.divide(
            c_h - g * m1 * m2 * colsq,
            (m2 * m2) * colsq + eps,
            out=h_raw,
            where=has_h,
        )
        h = _clamp(h_raw, cfg)
        trace.append((g_raw, h_raw))
    return g, h, trace


# ---------------------------------------------------------------------------
# steps
# ---------------------------------------------------------------------------


def _check_dims(state: FilterState, A: np.ndarray, y: np.ndarray):
    if A.ndim != 2 or A.shape[1] != state.s_est.shape[0]:
        raise DimensionMismatch(
            f"A must be (M, {state.s_est.shape[0]}), got {A.shape}"
        )
    if y.shape != (A.shape[0],):
        raise DimensionMismatch(f"y must have length {A.shape[0]}, got {y.shape}")


def _trust_scale(eh: np.ndarray, A: np.ndarray, d: np.ndarray) -> float:
    """Residual line search along the update direction, clipped to [-1, 1]."""
    Ad = A @ d
    den = float(Ad @ Ad)
    if den == 0.0:
        return 1.0
    t = float(eh @ Ad) / den
    return min(1.0, max(-1.0, t))


def _finish(state, s_new, g_applied, h_applied, push=None):
    if not np.all(np.isfinite(s_new)):
        raise NonFiniteState(f"non-finite state at iteration {state.n}")
    history = state.history
    if push is not None:
        A, y, k = push
        if k > 1:
            history = ((A, y),) + history
            history = history[: k - 1]
    s_new.flags.writeable = False
    return FilterState(
        s_est=s_new,
        g_diag=g_applied,
        h_diag=h_applied,
        history=history,
        n=state.n + 1,
    )


def glms_step(state: FilterState, A, y, cfg: FilterConfig) -> FilterState:
    """Plain graph LMS: s + mu A^T (y - A s)."""
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_dims(state, A, y)
    eh = y - A @ state.s_est
    m1 = cfg.mu * (A.T @ eh)
    ones = np.ones_like(m1)
    return _finish(state, state.s_est + ones * m1, ones, np.zeros_like(m1))


def ptglms_step(state: FilterState, A, y, cfg: FilterConfig) -> FilterState:
    """Proportionate graph LMS with the configured gain rule."""
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_dims(state, A, y)
    eh = y - A @ state.s_est
    m1 = cfg.mu * (A.T @ eh)
    zeros = np.zeros_like(m1)
    if cfg.gain_rule == "identity":
        g = np.ones_like(m1)
        return _finish(state, state.s_est + g * m1, g, zeros)
    if cfg.gain_rule == "literature":
        g = _literature_gain_vector(state.s_est, cfg.rho, cfg.delta)
        return _finish(state, state.s_est + g * m1, g, zeros)
    # gmsd_optimal
    if float(np.linalg.norm(eh)) < ZERO_RESIDUAL_TOL:
        return _finish(state, state.s_est.copy(), zeros, zeros.copy())
    colsq, sigma = _column_stats(A, _ce_diag(cfg, A.shape[0]))
    g = _clamp(_ptglms_gain_vector(m1, colsq, sigma, cfg.mu, cfg.eps_g), cfg)
    d = g * m1
    t = _trust_scale(eh, A, d)
    return _finish(state, state.s_est + t * d, t * g, zeros)


def ptgelms_step(state: FilterState, A, y, cfg: FilterConfig) -> FilterState:
    """Extended proportionate filter reusing the K-1 most recent observations.

    With ``gain_rule`` set to ``identity`` both gain matrices are the
    identity and the step coincides with `elms_step`.
    """
    if cfg.gain_rule == "literature":
        raise OutOfRange("ptgelms supports identity or gmsd_optimal gain rules")
    if cfg.gain_rule == "identity":
        return elms_step(state, A, y, cfg)
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_dims(state, A, y)
    push = (A, y, cfg.k_history)
    s = state.s_est
    eh = y - A @ s
    m1 = cfg.mu * (A.T @ eh)
    zeros = np.zeros_like(m1)
    if float(np.linalg.norm(eh)) < ZERO_RESIDUAL_TOL:
        return _finish(state, s.copy(), zeros, zeros.copy(), push=push)
    ce = _ce_diag(cfg, A.shape[0])
    colsq, sigma = _column_stats(A, ce)
    m2, cross = _history_terms(A, s, state.history, ce, cfg.mu)
    g, h, _ = _ptgelms_alternation(m1, m2, colsq, sigma, cross, cfg)
    if state.history:
        d = g * m1 + h * m2
    else:
        d = g * m1
    t = _trust_scale(eh, A, d)
    return _finish(state, s + t * d, t * g, t * h, push=push)


def elms_step(state: FilterState, A, y, cfg: FilterConfig) -> FilterState:
    """Extended LMS baseline: identity gains on both terms."""
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_dims(state, A, y)
    push = (A, y, cfg.k_history)
    s = state.s_est
    eh = y - A @ s
    m1 = cfg.mu * (A.T @ eh)
    ones = np.ones_like(m1)
    if state.history:
        m2, _ = _history_terms(A, s, state.history, np.zeros(A.shape[0]), cfg.mu)
        d = ones * m1 + ones * m2
        h = ones
    else:
        d = ones * m1
        h = np.zeros_like(m1)
    return _finish(state, s + d, ones, h, push=push)
