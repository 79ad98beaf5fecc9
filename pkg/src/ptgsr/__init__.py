"""Proportionate-type adaptive graph signal recovery.

Recover bandlimited graph signals from compressed, noisy node samples with a
family of streaming LMS-type filters whose per-coefficient gains are either
magnitude-proportionate or closed-form minimizers of the one-step weighted
error decrease, plus the matching stability and steady-state predictors and
a reproducible experiment harness.
"""

from .analysis import (
    StabilityReport,
    SteadyStatePrediction,
    build_b1,
    mean_recursion_check,
    monte_carlo_msd,
    stability_bound,
    steady_state_msd,
)
from .backend import BACKEND, run_trial
from .filters import (
    FilterConfig,
    FilterState,
    elms_step,
    glms_step,
    initial_state,
    literature_gains,
    ptgelms_gain_pair,
    ptgelms_step,
    ptglms_gain,
    ptglms_step,
)
from .graph import (
    GftBasis,
    Laplacian,
    WeightedGraph,
    build_graph,
    gft,
    gft_basis,
    igft,
    laplacian,
    load_dense_csv,
    load_edge_csv,
)
from .metrics import NmsdCurve, ensemble_mean, gmsd_empirical, nmsd
from .sampling import NoiseModel, SamplingOperator, make_operator, observe, resample
from .signals import (
    GroundTruth,
    build_sensor_graph,
    ground_truth_from_vector,
    load_sensor_csv,
    synth_bandlimited,
)

__version__ = "0.1.0"
