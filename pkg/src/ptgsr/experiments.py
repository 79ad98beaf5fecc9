"""Declarative scenario configs, the ensemble runner, and report emission.

A scenario is a TOML file with one ``[scenario]`` table and one or more
``[[algorithms]]`` tables; `run_scenario` executes every algorithm on the
same per-trial observation streams (paired comparison), aggregates ensemble
NMSD curves deterministically, and attaches a stability report per
algorithm.  Diverging trials are excluded from the aggregate and counted,
never fatal.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from . import analysis, backend, graph, metrics, sampling, signals
from .errors import ConfigError
from .filters import FilterConfig

GRAPH_SOURCES = ("synthetic-uniform", "edge-csv", "sensor-kernel")
ALGORITHMS = ("glms", "ptglms", "ptgelms", "elms")


@dataclass(frozen=True)
class AlgorithmSpec:
    name: str
    label: str
    mu: float
    k_history: int = 1
    gain_rule: str = "identity"
    rho: float = 0.01
    delta: float = 0.01
    eps_g: float = 1e-12
    gain_cap: float = 1e3
    nonneg_gains: bool = False
    inner_iters: int = 2
    force_h_zero: bool = False

    def filter_config(self, noise_cov) -> FilterConfig:
        return FilterConfig(
            mu=self.mu,
            k_history=self.k_history,
            gain_rule=self.gain_rule,
            rho=self.rho,
            delta=self.delta,
            eps_g=self.eps_g,
            gain_cap=self.gain_cap,
            nonneg_gains=self.nonneg_gains,
            inner_iters=self.inner_iters,
            noise_cov=noise_cov,
            force_h_zero=self.force_h_zero,
        )


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    graph_source: str
    n_nodes: int
    bandwidth: int
    m_measurements: int
    s_count: int
    noise_sigma2: float
    trials: int
    horizon: int
    master_seed: int
    sampling_policy: str = "static"
    signal_sigma: float = 1.0
    noise_cov: tuple | None = None
    graph_csv: str | None = None
    coords_csv: str | None = None
    readings_csv: str | None = None
    slot_index: int = 0
    kernel_theta: float | None = None
    kernel_kappa: float = 0.0
    algorithms: tuple = ()

    @staticmethod
    def from_dict(raw: dict, base_dir: Path | None = None) -> "ScenarioConfig":
        try:
            sc = dict(raw["scenario"])
            algos = [dict(a) for a in raw["algorithms"]]
        except KeyError as exc:
            raise ConfigError(f"missing config section: {exc}") from exc
        specs = []
        for a in algos:
            name = a.pop("name", None)
            if name not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {name!r}")
            a.setdefault("label", name)
            if name == "ptgelms":
                a.setdefault("gain_rule", "gmsd_optimal")
            try:
                specs.append(AlgorithmSpec(name=name, **a))
            except TypeError as exc:
                raise ConfigError(f"bad algorithm entry {name}: {exc}") from exc
        labels = [s.label for s in specs]
        if len(set(labels)) != len(labels):
            raise ConfigError("algorithm labels must be unique")
        if "noise_cov" in sc and sc["noise_cov"] is not None:
            sc["noise_cov"] = tuple(float(v) for v in sc["noise_cov"])
        for key in ("graph_csv", "coords_csv", "readings_csv"):
            if sc.get(key) and base_dir is not None:
                p = Path(sc[key])
                if not p.is_absolute():
                    sc[key] = str((base_dir / p).resolve())
        try:
            cfg = ScenarioConfig(algorithms=tuple(specs), **sc)
        except TypeError as exc:
            raise ConfigError(f"bad scenario section: {exc}") from exc
        cfg.validate()
        return cfg

    @staticmethod
    def from_toml(path) -> "ScenarioConfig":
        path = Path(path)
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
        return ScenarioConfig.from_dict(raw, base_dir=path.parent)

    def validate(self):
        n = self.n_nodes
        if self.graph_source not in GRAPH_SOURCES:
            raise ConfigError(f"graph_source must be one of {GRAPH_SOURCES}")
        if self.sampling_policy not in sampling.POLICIES:
            raise ConfigError(f"sampling_policy must be one of {sampling.POLICIES}")
        for label, v in (
            ("n_nodes", n),
            ("trials", self.trials),
            ("horizon", self.horizon),
        ):
            if v < 1:
                raise ConfigError(f"{label} must be >= 1")
        for label, v in (
            ("bandwidth", self.bandwidth),
            ("m_measurements", self.m_measurements),
            ("s_count", self.s_count),
        ):
            if not 1 <= v <= n:
                raise ConfigError(f"{label} must be in [1, {n}], got {v}")
        if self.noise_sigma2 < 0:
            raise ConfigError("noise_sigma2 must be nonnegative")
        if self.noise_cov is not None and len(self.noise_cov) != self.m_measurements:
            raise ConfigError("noise_cov must have m_measurements entries")
        if not self.algorithms:
            raise ConfigError("at least one [[algorithms]] entry is required")
        if self.graph_source == "edge-csv" and not self.graph_csv:
            raise ConfigError("edge-csv source requires graph_csv")
        if self.graph_source == "sensor-kernel":
            if not (self.coords_csv and self.readings_csv):
                raise ConfigError("sensor-kernel source requires coords_csv and readings_csv")
        for key in ("graph_csv", "coords_csv", "readings_csv"):
            p = getattr(self, key)
            if p and not Path(p).exists():
                raise ConfigError(f"{key} file does not exist: {p}")

    def to_canonical_dict(self) -> dict:
        d = asdict(self)
        d["algorithms"] = [asdict(a) for a in self.algorithms]
        return d

    def content_hash(self) -> str:
        blob = json.dumps(self.to_canonical_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def replace(self, algorithms=None, **scenario_updates) -> "ScenarioConfig":
        d = self.to_canonical_dict()
        d.update(scenario_updates)
        algos = d.pop("algorithms")
        if algorithms is None:
            algorithms = tuple(AlgorithmSpec(**a) for a in algos)
        cfg = ScenarioConfig(algorithms=tuple(algorithms), **d)
        cfg.validate()
        return cfg


def trial_seed(master_seed: int, trial: int) -> int:
    """Stable per-trial seed derived from the master seed."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(trial),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class TrialOutput:
    curves: dict
    gain_stats: dict
    gain_means: dict
    diverged_at: dict


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    scenario_hash: str
    curves: dict  # label -> NmsdCurve (ensemble mean over non-diverged trials)
    per_trial: dict  # label -> (trials, T) array
    excluded: dict  # label -> count of diverged trials
    diverged_trials: dict  # label -> [trial indices]
    stability: dict  # label -> dict
    gain_stats: dict = field(default_factory=dict)  # label -> (trials, T, 3)
    gain_means: dict = field(default_factory=dict)  # label -> (gbar, hbar), trial 0
    backend_name: str = backend.BACKEND


def _fixed_graph_basis(cfg: ScenarioConfig):
    """Graph/basis shared across trials for data-driven sources."""
    if cfg.graph_source == "edge-csv":
        g = graph.load_edge_csv(cfg.graph_csv, cfg.n_nodes)
    else:
        coords = signals.load_coords_csv(cfg.coords_csv)
        if coords.shape[0] != cfg.n_nodes:
            raise ConfigError(
                f"coords file has {coords.shape[0]} sensors, config says {cfg.n_nodes}"
            )
        g = signals.build_sensor_graph(coords, cfg.kernel_theta, cfg.kernel_kappa)
    return g, graph.gft_basis(graph.laplacian(g))


def _fixed_truth(cfg: ScenarioConfig, g, basis):
    slots = signals.load_sensor_csv(cfg.readings_csv, cfg.n_nodes, graph=g)
    if not 0 <= cfg.slot_index < len(slots.times):
        raise ConfigError(f"slot_index {cfg.slot_index} outside 0..{len(slots.times) - 1}")
    return signals.ground_truth_from_vector(basis, slots.values[cfg.slot_index])


def _noise_diag(cfg: ScenarioConfig) -> np.ndarray:
    if cfg.noise_cov is not None:
        return np.asarray(cfg.noise_cov, dtype=np.float64)
    return np.full(cfg.m_measurements, float(cfg.noise_sigma2))


def _run_trial(cfg: ScenarioConfig, trial: int, shared) -> TrialOutput:
    seed = trial_seed(cfg.master_seed, trial)
    if shared is None:
        rng = sampling._philox(sampling.stream_key(seed, "graph"), 0)
        w = rng.uniform(0.0, 1.0, (cfg.n_nodes, cfg.n_nodes))
        g = graph.build_graph((w + w.T) / 2.0)
        basis = graph.gft_basis(graph.laplacian(g))
        truth = signals.synth_bandlimited(
            basis, cfg.bandwidth, seed, amplitude=cfg.signal_sigma
        )
    else:
        basis, truth = shared

    op = sampling.make_operator(
        basis,
        cfg.m_measurements,
        cfg.s_count,
        seed,
        check_bandwidth=cfg.bandwidth if trial == 0 else None,
    )
    noise = sampling.NoiseModel(covariance=_noise_diag(cfg), seed=seed)

    T = cfg.horizon
    if cfg.sampling_policy == "per_iteration":
        ops = [sampling.resample(op, basis, "per_iteration", n) for n in range(T)]
        a_stack = np.stack([o.composite for o in ops])
    else:
        ops = [op] * T
        a_stack = op.composite[None, :, :]
    Y = np.stack(
        [sampling.observe(ops[n], truth.s_true, noise, n) for n in range(T)]
    )

    out = TrialOutput(curves={}, gain_stats={}, gain_means={}, diverged_at={})
    for spec in cfg.algorithms:
        fcfg = spec.filter_config(noise.covariance)
        res = backend.run_trial(a_stack, Y, truth.s_true, fcfg, spec.name)
        out.curves[spec.label] = res["nmsd"]
        out.gain_stats[spec.label] = res["gain_stats"]
        out.gain_means[spec.label] = (res["gain_mean_g"], res["gain_mean_h"])
        out.diverged_at[spec.label] = res["diverged_at"]
    return out


def _stability_snapshot(cfg: ScenarioConfig, outputs, shared) -> dict:
    """Stability report per algorithm from trial-0 operators and averaged gains."""
    seed = trial_seed(cfg.master_seed, 0)
    if shared is None:
        rng = sampling._philox(sampling.stream_key(seed, "graph"), 0)
        w = rng.uniform(0.0, 1.0, (cfg.n_nodes, cfg.n_nodes))
        g0 = graph.build_graph((w + w.T) / 2.0)
        basis = graph.gft_basis(graph.laplacian(g0))
    else:
        basis = shared[0]
    op = sampling.make_operator(basis, cfg.m_measurements, cfg.s_count, seed)
    reports = {}
    for spec in cfg.algorithms:
        gbar, hbar = outputs[0].gain_means[spec.label]
        k = spec.k_history
        history = [op.composite] * (k - 1)
        b1 = analysis.build_b1(gbar, hbar, op.composite, history)
        try:
            rep = analysis.stability_bound(b1, mu=spec.mu)
            reports[spec.label] = {
                "lambda_max": rep.lambda_max,
                "mu_bound": rep.mu_bound,
                "spectral_radius": rep.mean_spectral_radius,
                "mu": spec.mu,
                "mu_within_bound": rep.mu_within_bound,
            }
        except Exception as exc:
            reports[spec.label] = {"error": f"{type(exc).__name__}: {exc}"}
    return reports


def run_scenario(
    cfg: ScenarioConfig, threads: int = 1, trials_override: int | None = None
) -> ScenarioResult:
    trials = cfg.trials if trials_override is None else int(trials_override)
    if trials < 1:
        raise ConfigError("trials must be >= 1")

    shared = None
    if cfg.graph_source != "synthetic-uniform":
        g, basis = _fixed_graph_basis(cfg)
        if cfg.graph_source == "sensor-kernel":
            truth = _fixed_truth(cfg, g, basis)
        else:
            seed0 = trial_seed(cfg.master_seed, 0)
            truth = signals.synth_bandlimited(
                basis, cfg.bandwidth, seed0, amplitude=cfg.signal_sigma
            )
        shared = (basis, truth)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outputs = list(
                pool.map(lambda t: _run_trial(cfg, t, shared), range(trials))
            )
    else:
        outputs = [_run_trial(cfg, t, shared) for t in range(trials)]

    scenario_hash = cfg.content_hash()
    curves = {}
    per_trial = {}
    excluded = {}
    diverged = {}
    gain_stats = {}
    for spec in cfg.algorithms:
        label = spec.label
        stack = np.stack([o.curves[label] for o in outputs])
        per_trial[label] = stack
        gain_stats[label] = np.stack([o.gain_stats[label] for o in outputs])
        bad = [t for t, o in enumerate(outputs) if o.diverged_at[label] >= 0]
        diverged[label] = bad
        excluded[label] = len(bad)
        keep = [i for i in range(trials) if i not in bad]
        if keep:
            curves[label] = metrics.ensemble_mean(
                stack[keep], algorithm=label, scenario_hash=scenario_hash
            )
    stability = _stability_snapshot(cfg, outputs, shared)
    return ScenarioResult(
        config=cfg,
        scenario_hash=scenario_hash,
        curves=curves,
        per_trial=per_trial,
        excluded=excluded,
        diverged_trials=diverged,
        stability=stability,
        gain_stats=gain_stats,
        gain_means={s.label: outputs[0].gain_means[s.label] for s in cfg.algorithms},
    )


SWEEP_AXES = {
    "K": "k_history",
    "M": "m_measurements",
    "bandwidth": "bandwidth",
    "s_count": "s_count",
}


def sweep(cfg: ScenarioConfig, axis: str, values, threads: int = 1, trials_override=None):
    """Clone the config per axis value and rerun; trial seeds stay paired."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {sorted(SWEEP_AXES)}")
    results = {}
    for v in values:
        v = int(v)
        if axis == "K":
            algos = tuple(
                AlgorithmSpec(**{**asdict(a), "k_history": v}) for a in cfg.algorithms
            )
            cell = cfg.replace(algorithms=algos)
        else:
            cell = cfg.replace(**{SWEEP_AXES[axis]: v})
        results[v] = run_scenario(cell, threads=threads, trials_override=trials_override)
    return results


def _fmt(x: float) -> str:
    return repr(float(x))


def emit_report(result: ScenarioResult, out_dir, trace: bool = False) -> dict:
    """Write per-algorithm curve CSVs, a long-format CSV, and a JSON manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = result.config.name
    files = {}
    for label, curve in result.curves.items():
        path = out / f"{name}_{label}.csv"
        with open(path, "w", newline="") as fh:
            fh.write("iter,mean_nmsd,stderr\n")
            for i, (m, s) in enumerate(zip(curve.values, curve.stderr)):
                fh.write(f"{i},{_fmt(m)},{_fmt(s)}\n")
        files[label] = str(path)

    long_path = out / f"{name}_long.csv"
    with open(long_path, "w", newline="") as fh:
        fh.write("scenario,algorithm,iter,mean_nmsd,stderr\n")
        for label, curve in sorted(result.curves.items()):
            for i, (m, s) in enumerate(zip(curve.values, curve.stderr)):
                fh.write(f"{name},{label},{i},{_fmt(m)},{_fmt(s)}\n")

    if trace:
        trace_path = out / f"{name}_trace.csv"
        with open(trace_path, "w", newline="") as fh:
            fh.write("trial,n,algorithm,nmsd,min_gain,max_gain,mean_gain\n")
            for label in sorted(result.per_trial):
                stack = result.per_trial[label]
                stats = result.gain_stats[label]
                for t in range(stack.shape[0]):
                    for n in range(stack.shape[1]):
                        fh.write(
                            f"{t},{n},{label},{_fmt(stack[t, n])},"
                            f"{_fmt(stats[t, n, 0])},{_fmt(stats[t, n, 1])},"
                            f"{_fmt(stats[t, n, 2])}\n"
                        )

    manifest = {
        "scenario": result.config.to_canonical_dict(),
        "content_hash": result.scenario_hash,
        "backend": result.backend_name,
        "excluded_trials": result.excluded,
        "diverged_trials": result.diverged_trials,
        "stability": result.stability,
        "curve_files": {k: Path(v).name for k, v in files.items()},
    }
    manifest_path = out / f"{name}_manifest.json"
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return {"curves": files, "long": str(long_path), "manifest": str(manifest_path)}
