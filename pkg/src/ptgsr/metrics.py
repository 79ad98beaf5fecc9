"""Error metrics and deterministic ensemble aggregation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, RaggedInput, ZeroReference


def nmsd(s_true, s_est) -> float:
    """Normalized squared deviation ||s_true - s_est||^2 / ||s_true||^2."""
    s_true = np.asarray(s_true, dtype=np.float64)
    s_est = np.asarray(s_est, dtype=np.float64)
    if s_true.shape != s_est.shape:
        raise DimensionMismatch(f"{s_true.shape} vs {s_est.shape}")
    ref = float(s_true @ s_true)
    if ref == 0.0:
        raise ZeroReference("reference signal has zero norm")
    diff = s_true - s_est
    return float(diff @ diff) / ref


def gmsd_empirical(s_true, s_before, s_after, A) -> float:
    """One-step change of the Q-weighted squared error, Q = A^T A.

    Diagnostic only: requires the true signal.
    """
    A = np.asarray(A, dtype=np.float64)
    s_true = np.asarray(s_true, dtype=np.float64)
    for v in (s_before, s_after):
        if np.asarray(v).shape != s_true.shape:
            raise DimensionMismatch("state vectors must match s_true")
    if A.shape[1] != s_true.shape[0]:
        raise DimensionMismatch(f"A has {A.shape[1]} columns, state has {s_true.shape[0]}")
    e_b = A @ (s_true - np.asarray(s_before, dtype=np.float64))
    e_a = A @ (s_true - np.asarray(s_after, dtype=np.float64))
    return float(e_a @ e_a) - float(e_b @ e_b)


@dataclass(frozen=True)
class NmsdCurve:
    """Ensemble-mean NMSD trajectory for one algorithm on one scenario."""

    values: np.ndarray
    stderr: np.ndarray
    trials: int
    algorithm: str
    scenario_hash: str


def ensemble_mean(
    curves, algorithm: str = "", scenario_hash: str = ""
) -> NmsdCurve:
    """Arithmetic per-iteration mean and standard error over trials.

    Uses numpy's pairwise summation over a (trials, T) array in trial order,
    so aggregation is bit-reproducible for a fixed trial set.
    """
    curves = list(curves)
    if not curves:
        raise RaggedInput("no curves to aggregate")
    length = len(curves[0])
    if any(len(c) != length for c in curves):
        raise RaggedInput("curves have unequal lengths")
    arr = np.asarray(curves, dtype=np.float64)
    mean = arr.mean(axis=0)
    if arr.shape[0] > 1:
        stderr = arr.std(axis=0, ddof=1) / np.sqrt(arr.shape[0])
    else:
        stderr = np.zeros(length)
    mean.flags.writeable = False
    stderr.flags.writeable = False
    return NmsdCurve(
        values=mean,
        stderr=stderr,
        trials=arr.shape[0],
        algorithm=algorithm,
        scenario_hash=scenario_hash,
    )
