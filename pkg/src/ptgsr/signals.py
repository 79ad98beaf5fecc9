"""Bandlimited ground-truth synthesis and real sensor-data loading."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DisconnectedResult, EmptySlot, OutOfRange, UnknownSensor
from .graph import GftBasis, WeightedGraph, build_graph
from .sampling import _philox, stream_key


@dataclass(frozen=True)
class GroundTruth:
    """True frequency-domain signal, its node-domain image, and the bandwidth."""

    s_true: np.ndarray
    x_true: np.ndarray
    bandwidth: int


def synth_bandlimited(
    basis: GftBasis, bandwidth: int, seed: int, amplitude: float = 1.0
) -> GroundTruth:
    """Random bandlimited signal: first `bandwidth` GFT coefficients are
    i.i.d. N(0, amplitude^2), the rest are stored as exact zeros."""
    n = basis.n_nodes
    if not 1 <= bandwidth <= n:
        raise OutOfRange(f"bandwidth must be in [1, {n}], got {bandwidth}")
    gen = _philox(stream_key(seed, "signal"), 0)
    s = np.zeros(n)
    s[:bandwidth] = gen.normal(0.0, amplitude, size=bandwidth)
    x = basis.eigenvectors @ s
    s.flags.writeable = False
    x.flags.writeable = False
    return GroundTruth(s_true=s, x_true=x, bandwidth=int(bandwidth))


def ground_truth_from_vector(basis: GftBasis, x) -> GroundTruth:
    """Ground truth whose spectrum is the GFT of a measured node-domain vector."""
    x = np.asarray(x, dtype=np.float64)
    s = basis.eigenvectors.T @ x
    s.flags.writeable = False
    xc = x.copy()
    xc.flags.writeable = False
    return GroundTruth(s_true=s, x_true=xc, bandwidth=basis.n_nodes)


@dataclass(frozen=True)
class SensorSlots:
    """Per-timestamp node vectors loaded from a sensor CSV."""

    times: list
    values: np.ndarray  # (T, N)
    imputed: np.ndarray  # (T, N) bool, True where a reading was filled in


def load_sensor_csv(
    path,
    n_nodes: int,
    columns: tuple[int, int, int] = (0, 1, 2),
    graph: WeightedGraph | None = None,
) -> SensorSlots:
    """Load (timestamp, sensor_id, value) rows into per-slot node vectors.

    Missing readings are imputed with the mean of the sensor's graph
    neighbours (requires ``graph``); slots where every sensor is missing
    raise EmptySlot.  Sensor ids must lie in 0..n_nodes-1.
    """
    tcol, scol, vcol = columns
    slots: dict = {}
    order: list = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            t = row[tcol].strip()
            sid = int(row[scol])
            if not 0 <= sid < n_nodes:
                raise UnknownSensor(f"sensor id {sid} outside 0..{n_nodes - 1}")
            if t not in slots:
                slots[t] = {}
                order.append(t)
            slots[t][sid] = float(row[vcol])

    values = np.full((len(order), n_nodes), np.nan)
    for ti, t in enumerate(order):
        if not slots[t]:
            raise EmptySlot(f"slot {t!r} has no readings")
        for sid, v in slots[t].items():
            values[ti, sid] = v

    imputed = np.isnan(values)
    if imputed.any():
        if np.isnan(values).all(axis=1).any():
            bad = order[int(np.nonzero(np.isnan(values).all(axis=1))[0][0])]
            raise EmptySlot(f"slot {bad!r} has no readings")
        if graph is None:
            raise EmptySlot(
                "missing readings present; a graph is required for neighbour imputation"
            )
        w = graph.weights
        for ti in range(values.shape[0]):
            missing = np.nonzero(np.isnan(values[ti]))[0]
            for sid in missing:
                nb = np.nonzero(w[sid] > 0.0)[0]
                nb_vals = values[ti, nb]
                nb_vals = nb_vals[~np.isnan(nb_vals)]
                if nb_vals.size == 0:
                    # isolated gap: fall back to the slot mean
                    nb_vals = values[ti][~np.isnan(values[ti])]
                values[ti, sid] = nb_vals.mean()
    values.flags.writeable = False
    imputed.flags.writeable = False
    return SensorSlots(times=order, values=values, imputed=imputed)


def save_sensor_csv(slots: SensorSlots, path) -> None:
    """Write slots back out in the (timestamp, sensor_id, value) schema."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for ti, t in enumerate(slots.times):
            for sid in range(slots.values.shape[1]):
                writer.writerow([t, sid, repr(float(slots.values[ti, sid]))])


def build_sensor_graph(
    coords,
    theta: float | None = None,
    kappa: float = 0.0,
    require_connected: bool = False,
) -> WeightedGraph:
    """Gaussian-kernel graph on sensor coordinates.

    W_ij = exp(-dist(i,j)^2 / theta^2) when that value is >= kappa, else 0.
    theta defaults to the mean pairwise distance.
    """
    pts = np.asarray(coords, dtype=np.float64)
    if pts.ndim != 2:
        raise OutOfRange("coords must be an (N, d) array")
    diff = pts[:, None, :] - pts[None, :, :]
    dist2 = (diff**2).sum(axis=2)
    if theta is None:
        off = dist2[~np.eye(len(pts), dtype=bool)]
        theta = float(np.sqrt(off).mean()) if off.size else 1.0
    if theta <= 0.0:
        raise DisconnectedResult("theta must be positive; zero kernel width prunes all edges")
    w = np.exp(-dist2 / theta**2)
    np.fill_diagonal(w, 0.0)
    w[w < kappa] = 0.0
    return build_graph(w, require_connected=require_connected)


def load_coords_csv(path) -> np.ndarray:
    """Load (sensor_id, x, y) rows into an (N, 2) array ordered by id."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            rows.append((int(row[0]), float(row[1]), float(row[2])))
    rows.sort()
    ids = [r[0] for r in rows]
    if ids != list(range(len(rows))):
        raise UnknownSensor("sensor ids must be dense 0..N-1")
    return np.array([[r[1], r[2]] for r in rows])
