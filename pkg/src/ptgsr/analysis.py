"""Theoretical predictors: step-size bound, mean recursion, steady-state MSD.

These operate on a *frozen* gain snapshot (e.g. time-averaged gains from a
pilot run); the adaptive algorithms vary their gains per iteration, so the
predictions describe the linearized recursion

    err[n+1] = (I - mu B1) err[n] + mu (noise terms)

with B1 = G A^T A + H sum_j A[n-j]^T A[n-j].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    NonPositiveLambdaMax,
    SpectralRadiusGeOne,
    TooLarge,
)

#: cap on N for the dense N^2 x N^2 steady-state solve
MAX_DENSE_N = 64


def build_b1(g_diag, h_diag, A_current, A_history=()) -> np.ndarray:
    """B1 = diag(g) A^T A + diag(h) sum_j A_j^T A_j."""
    A = np.asarray(A_current, dtype=np.float64)
    g = np.asarray(g_diag, dtype=np.float64)
    h = np.asarray(h_diag, dtype=np.float64)
    n = A.shape[1]
    if g.shape != (n,) or h.shape != (n,):
        raise DimensionMismatch("gain vectors must match the operator column count")
    b1 = g[:, None] * (A.T @ A)
    if len(A_history):
        acc = np.zeros((n, n))
        for Aj in A_history:
            Aj = np.asarray(Aj, dtype=np.float64)
            if Aj.shape[1] != n:
                raise DimensionMismatch("history operator has wrong column count")
            acc += Aj.T @ Aj
        b1 = b1 + h[:, None] * acc
    return b1


@dataclass(frozen=True)
class StabilityReport:
    b1: np.ndarray
    lambda_max: float
    mu_bound: float
    mean_spectral_radius: float | None
    mu: float | None
    mu_within_bound: bool | None


def stability_bound(b1, mu: float | None = None) -> StabilityReport:
    """Step-size bound 2 / lambda_max(B1) plus the exact spectral radius.

    B1 is generally non-symmetric (diagonal gains times a Gram matrix), so
    lambda_max is taken on the symmetric part, reproducing the bound's
    symmetric-case reading; rho(I - mu B1) is reported as the operative
    mean-stability check when mu is given.
    """
    b1 = np.asarray(b1, dtype=np.float64)
    if b1.ndim != 2 or b1.shape[0] != b1.shape[1]:
        raise DimensionMismatch(f"B1 must be square, got {b1.shape}")
    lam = float(np.linalg.eigvalsh((b1 + b1.T) / 2.0).max())
    if lam <= 0.0:
        raise NonPositiveLambdaMax(f"lambda_max = {lam:.3e}")
    bound = 2.0 / lam
    radius = None
    within = None
    if mu is not None:
        radius = float(np.abs(np.linalg.eigvals(np.eye(b1.shape[0]) - mu * b1)).max())
        within = bool(0.0 < mu < bound)
    return StabilityReport(
        b1=b1,
        lambda_max=lam,
        mu_bound=bound,
        mean_spectral_radius=radius,
        mu=mu,
        mu_within_bound=within,
    )


@dataclass(frozen=True)
class SteadyStatePrediction:
    p: np.ndarray
    q: np.ndarray
    msd: float
    msd_adjoint: float
    spectral_radius: float


def steady_state_msd(
    g_diag, h_diag, A_current, A_history, ce_diag, mu: float
) -> SteadyStatePrediction:
    """Steady-state MSD mu^2 vec(P)^T (I - Q)^-1 vec(I) for frozen gains.

    P = G A^T C_e A G + H (sum_j A_j^T C_e A_j) H and Q is the Kronecker
    square of I - mu B1.  ``msd`` follows that expression; ``msd_adjoint``
    evaluates mu^2 vec(I)^T (I - Q)^-1 vec(P), which equals the trace of the
    stationary error covariance.  The two agree whenever B1 is symmetric
    (uniform gains); for non-normal I - mu B1 the adjoint form is the one
    that matches Monte Carlo.
    """
    A = np.asarray(A_current, dtype=np.float64)
    g = np.asarray(g_diag, dtype=np.float64)
    h = np.asarray(h_diag, dtype=np.float64)
    ce = np.asarray(ce_diag, dtype=np.float64)
    n = A.shape[1]
    if n > MAX_DENSE_N:
        raise TooLarge(f"N = {n} exceeds the dense-solve cap {MAX_DENSE_N}")
    if ce.shape != (A.shape[0],):
        raise DimensionMismatch("ce_diag must match the measurement count")

    b1 = build_b1(g, h, A, A_history)
    t1 = np.eye(n) - mu * b1
    radius = float(np.abs(np.linalg.eigvals(t1)).max())
    if radius >= 1.0:
        raise SpectralRadiusGeOne(f"rho(I - mu B1) = {radius:.6f} >= 1")

    core = A.T @ (ce[:, None] * A)
    p = g[:, None] * core * g[None, :]
    if len(A_history):
        acc = np.zeros((n, n))
        for Aj in A_history:
            Aj = np.asarray(Aj, dtype=np.float64)
            acc += Aj.T @ (ce[:, None] * Aj)
        p = p + h[:, None] * acc * h[None, :]

    q = np.kron(t1, t1)
    lhs = np.eye(n * n) - q
    vec_i = np.eye(n).reshape(-1, order="F")
    vec_p = p.reshape(-1, order="F")
    msd = mu**2 * float(vec_p @ np.linalg.solve(lhs, vec_i))
    msd_adjoint = mu**2 * float(vec_i @ np.linalg.solve(lhs, vec_p))
    return SteadyStatePrediction(
        p=p, q=q, msd=msd, msd_adjoint=msd_adjoint, spectral_radius=radius
    )


def mean_recursion_check(
    g_diag, h_diag, A_current, A_history, mu: float, horizon: int, err0=None
):
    """Iterate the mean-error recursion and report the contraction factor.

    Returns (trajectory of ||E err[n]||, contraction factor estimate) where
    the factor is the geometric mean step ratio over the horizon.
    """
    b1 = build_b1(g_diag, h_diag, A_current, A_history)
    n = b1.shape[0]
    t1 = np.eye(n) - mu * b1
    e = np.ones(n) / np.sqrt(n) if err0 is None else np.asarray(err0, dtype=np.float64)
    norms = np.empty(horizon + 1)
    norms[0] = np.linalg.norm(e)
    with np.errstate(over="ignore", invalid="ignore"):
        # divergence is a legitimate outcome here; norms saturate at inf
        for k in range(horizon):
            e = t1 @ e
            norms[k + 1] = np.linalg.norm(e)
    nz = norms[norms > 0]
    factor = (nz[-1] / nz[0]) ** (1.0 / max(len(nz) - 1, 1)) if len(nz) > 1 else 0.0
    return norms, float(factor)


def monte_carlo_msd(
    g_diag,
    h_diag,
    A_current,
    A_history,
    ce_diag,
    mu: float,
    horizon: int,
    trials: int,
    seed: int = 0,
    tail_fraction: float = 0.1,
) -> float:
    """Empirical steady-state MSD of the frozen-gain recursion.

    Vectorizes all trials through the linear error recursion and averages
    the squared error norm over the final ``tail_fraction`` of iterations.
    Serves as the independent oracle for `steady_state_msd`.
    """
    A = np.asarray(A_current, dtype=np.float64)
    g = np.asarray(g_diag, dtype=np.float64)
    h = np.asarray(h_diag, dtype=np.float64)
    ce = np.asarray(ce_diag, dtype=np.float64)
    n = A.shape[1]
    m = A.shape[0]
    hist = [np.asarray(Aj, dtype=np.float64) for Aj in A_history]

    b1 = build_b1(g, h, A, hist)
    t1 = np.eye(n) - mu * b1
    mg = mu * (g[:, None] * A.T)
    mhs = [mu * (h[:, None] * Aj.T) for Aj in hist]
    std = np.sqrt(ce)

    rng = np.random.default_rng(seed)
    err = rng.normal(0.0, 1.0, (n, trials))
    ring = [np.zeros((m, trials)) for _ in hist]
    tail_start = horizon - max(1, int(horizon * tail_fraction))
    acc = 0.0
    count = 0
    for k in range(horizon):
        e_now = std[:, None] * rng.standard_normal((m, trials))
        err = t1 @ err + mg @ e_now
        for mh, e_past in zip(mhs, ring):
            err += mh @ e_past
        if ring:
            ring.pop()
            ring.insert(0, e_now)
        if k >= tail_start:
            acc += float((err * err).sum(axis=0).mean())
            count += 1
    return acc / count
