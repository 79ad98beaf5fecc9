"""Compressive observation operators A = B * diag(sel) * U and noisy readouts.

The sensing matrix B has i.i.d. Gaussian entries with variance 1/N (so each
measurement row has unit expected energy regardless of how many measurements
are taken), and diag(sel) masks the sampled node subset.  All randomness is
drawn from counter-based Philox streams keyed on (seed, time index), which
makes every operator and every noise draw reproducible from scratch and safe
to generate from parallel workers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, OutOfRange
from .graph import GftBasis

#: sampling policies for time variation of (B[n], D[n])
POLICIES = ("static", "per_iteration")


def _philox(key_material, counter_index: int) -> np.random.Generator:
    """Generator positioned at a (key, counter) pair; distinct indices never overlap."""
    key = np.asarray(key_material, dtype=np.uint64)
    bitgen = np.random.Philox(counter=[0, 0, int(counter_index), 0], key=key)
    return np.random.Generator(bitgen)


def stream_key(seed: int, stream: str) -> np.ndarray:
    """Derive a 2x64-bit Philox key from an integer seed and a stream name."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(hash_stream(stream),))
    return ss.generate_state(2, dtype=np.uint64)


def hash_stream(stream: str) -> int:
    """Stable (process-independent) small integer id for a stream name."""
    acc = 0
    for ch in stream.encode("utf-8"):
        acc = (acc * 131 + ch) % (2**31)
    return acc


@dataclass(frozen=True)
class SamplingOperator:
    """Sensing matrix, node-selection mask, and the composite map."""

    sensing: np.ndarray  # (M, N)
    selection: np.ndarray  # (N,) of {0., 1.}
    composite: np.ndarray  # (M, N) == sensing @ diag(selection) @ U
    seed: int
    time_index: int

    @property
    def m_measurements(self) -> int:
        return self.sensing.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.sensing.shape[1]

    @property
    def s_count(self) -> int:
        return int(self.selection.sum())


@dataclass(frozen=True)
class NoiseModel:
    """Diagonal observation-noise covariance plus its stream seed."""

    covariance: np.ndarray  # (M,) diagonal of C_e
    seed: int

    def __post_init__(self):
        cov = np.asarray(self.covariance, dtype=np.float64)
        if (cov < 0.0).any():
            raise OutOfRange("noise variances must be nonnegative")
        object.__setattr__(self, "covariance", cov)


def make_operator(
    basis: GftBasis,
    m: int,
    s_count: int,
    seed: int,
    time_index: int = 0,
    sensing=None,
    check_bandwidth: int | None = None,
) -> SamplingOperator:
    """Draw a sampling operator for one time index.

    ``sensing`` overrides the Gaussian draw (e.g. the identity for full
    observation).  With ``check_bandwidth`` set, a warning is emitted when the
    operator restricted to the first |F| basis columns loses rank; the
    recursions still run, so this is not an error.
    """
    n = basis.n_nodes
    if not 1 <= m <= n:
        raise OutOfRange(f"m must be in [1, {n}], got {m}")
    if not 1 <= s_count <= n:
        raise OutOfRange(f"s_count must be in [1, {n}], got {s_count}")

    gen = _philox(stream_key(seed, "selection"), time_index)
    chosen = gen.permutation(n)[:s_count]
    selection = np.zeros(n)
    selection[chosen] = 1.0

    if sensing is None:
        gen_b = _philox(stream_key(seed, "sensing"), time_index)
        sensing = gen_b.normal(0.0, 1.0 / np.sqrt(n), size=(m, n))
    else:
        sensing = np.asarray(sensing, dtype=np.float64)
        if sensing.shape != (m, n):
            raise DimensionMismatch(f"sensing must be {(m, n)}, got {sensing.shape}")

    composite = sensing @ (selection[:, None] * basis.eigenvectors)
    if check_bandwidth is not None:
        sub = composite[:, :check_bandwidth]
        rank = np.linalg.matrix_rank(sub)
        if rank < check_bandwidth:
            warnings.warn(
                f"operator rank {rank} over the first {check_bandwidth} "
                "basis columns is below the signal bandwidth",
                stacklevel=2,
            )
    for a in (sensing, selection, composite):
        a.flags.writeable = False
    return SamplingOperator(
        sensing=sensing,
        selection=selection,
        composite=composite,
        seed=int(seed),
        time_index=int(time_index),
    )


def resample(op: SamplingOperator, basis: GftBasis, policy: str, n: int) -> SamplingOperator:
    """Operator for time step n under the configured policy.

    ``static`` returns the input unchanged; ``per_iteration`` redraws both the
    sensing matrix and the node selection from the same keyed streams.
    """
    if policy not in POLICIES:
        raise OutOfRange(f"unknown policy {policy!r}")
    if policy == "static":
        return op
    return make_operator(basis, op.m_measurements, op.s_count, op.seed, time_index=n)


def observe(op: SamplingOperator, s_true, noise: NoiseModel, n: int) -> np.ndarray:
    """One noisy observation y[n] = A s_true + e[n].

    The noise vector is drawn from a Philox stream keyed on the noise seed
    with counter n, so identical (seed, n) pairs always give identical draws.
    """
    s_true = np.asarray(s_true, dtype=np.float64)
    if s_true.shape != (op.n_nodes,):
        raise DimensionMismatch(
            f"s_true must have length {op.n_nodes}, got {s_true.shape}"
        )
    m = op.m_measurements
    if noise.covariance.shape not in ((m,), ()):
        raise DimensionMismatch(
            f"noise covariance diagonal must have length {m}, got {noise.covariance.shape}"
        )
    gen = _philox(stream_key(noise.seed, "noise"), n)
    e = gen.standard_normal(m) * np.sqrt(noise.covariance)
    return op.composite @ s_true + e


def save_operator(op: SamplingOperator, path) -> None:
    """Dump an operator to CSV: header M,N,s_count then selection then B rows."""
    with open(path, "w", newline="") as fh:
        fh.write(f"{op.m_measurements},{op.n_nodes},{op.s_count}\n")
        fh.write(",".join(repr(float(v)) for v in op.selection) + "\n")
        for row in op.sensing:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_operator(path, basis: GftBasis) -> SamplingOperator:
    """Rebuild an operator from a CSV dump; the composite is recomputed."""
    with open(path) as fh:
        m, n, s_count = (int(t) for t in fh.readline().split(","))
        selection = np.array([float(t) for t in fh.readline().split(",")])
        sensing = np.array(
            [[float(t) for t in fh.readline().split(",")] for _ in range(m)]
        )
    if basis.n_nodes != n:
        raise DimensionMismatch(f"basis has {basis.n_nodes} nodes, file has {n}")
    if int(selection.sum()) != s_count:
        raise OutOfRange("selection mask does not match recorded s_count")
    composite = sensing @ (selection[:, None] * basis.eigenvectors)
    for a in (sensing, selection, composite):
        a.flags.writeable = False
    return SamplingOperator(
        sensing=sensing, selection=selection, composite=composite, seed=-1, time_index=0
    )
