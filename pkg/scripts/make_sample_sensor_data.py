"""Generate the bundled 54-sensor sample dataset (deterministic).

Writes src/ptgsr/configs/data/sample_coords.csv and sample_readings.csv.
The readings are a smooth synthetic temperature field over a jittered grid;
a few entries are dropped to exercise neighbour-mean imputation.  Swap in a
real export (same schema) to reproduce the real-data experiments.
"""

from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "ptgsr" / "configs" / "data"


def main():
    rng = np.random.default_rng(540)
    n = 54
    gx, gy = np.meshgrid(np.arange(9), np.arange(6))
    coords = np.stack([gx.ravel(), gy.ravel()], axis=1).astype(float)
    coords += rng.uniform(-0.25, 0.25, coords.shape)

    OUT.mkdir(parents=True, exist_ok=True)
    with open(OUT / "sample_coords.csv", "w") as fh:
        fh.write("# sensor_id,x,y\n")
        for i, (x, y) in enumerate(coords):
            fh.write(f"{i},{float(x)!r},{float(y)!r}\n")

    slots = 4
    drop = {(1, 5), (2, 17), (2, 40)}  # (slot, sensor) gaps for imputation
    with open(OUT / "sample_readings.csv", "w") as fh:
        fh.write("# epoch,sensor_id,temperature\n")
        for t in range(slots):
            drift = 0.4 * t
            field = (
                20.0
                + drift
                + 3.0 * np.sin(coords[:, 0] / 3.0 + 0.2 * t)
                + 2.0 * np.cos(coords[:, 1] / 2.0)
                + rng.normal(0.0, 0.15, n)
            )
            for i in range(n):
                if (t, i) in drop:
                    continue
                fh.write(f"{1000 + t},{i},{float(field[i])!r}\n")
    print(f"wrote {OUT}/sample_coords.csv and sample_readings.csv")


if __name__ == "__main__":
    main()
