"""Command-line entry point: run / sweep / analyze scenario configs."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import analysis, backend, experiments, graph, sampling
from .errors import ConfigError, GsrError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ALL_DIVERGED = 3


def _add_common(p):
    p.add_argument("config", help="scenario TOML file")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--trials-override", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ptgsr",
        description="Proportionate-type adaptive graph signal recovery experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario and write curve CSVs")
    _add_common(p_run)
    p_run.add_argument("--trace", action="store_true", help="write a per-iteration trace CSV")

    p_sweep = sub.add_parser("sweep", help="rerun a scenario across one axis")
    _add_common(p_sweep)
    p_sweep.add_argument("--axis", required=True, choices=sorted(experiments.SWEEP_AXES))
    p_sweep.add_argument("--values", required=True, help="comma-separated integers")

    p_an = sub.add_parser("analyze", help="emit a JSON stability/steady-state report")
    _add_common(p_an)
    p_an.add_argument("--pilot-iters", type=int, default=200)
    return parser


def _check_diverged(result) -> bool:
    """True when some algorithm lost every trial to divergence."""
    trials = result.per_trial[next(iter(result.per_trial))].shape[0]
    return any(count >= trials for count in result.excluded.values())


def cmd_run(args) -> int:
    cfg = experiments.ScenarioConfig.from_toml(args.config)
    result = experiments.run_scenario(
        cfg, threads=args.threads, trials_override=args.trials_override
    )
    paths = experiments.emit_report(result, args.out, trace=args.trace)
    for label, curve in sorted(result.curves.items()):
        print(
            f"{cfg.name} {label}: final mean NMSD {curve.values[-1]:.6g} "
            f"({curve.trials} trials, {result.excluded[label]} excluded)"
        )
    print(f"wrote {paths['manifest']}")
    return EXIT_ALL_DIVERGED if _check_diverged(result) else EXIT_OK


def cmd_sweep(args) -> int:
    cfg = experiments.ScenarioConfig.from_toml(args.config)
    values = [int(v) for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("--values must contain at least one integer")
    results = experiments.sweep(
        cfg, args.axis, values, threads=args.threads, trials_override=args.trials_override
    )
    any_all_diverged = False
    for v, result in results.items():
        cell_dir = Path(args.out) / f"{args.axis}={v}"
        experiments.emit_report(result, cell_dir)
        any_all_diverged = any_all_diverged or _check_diverged(result)
        for label, curve in sorted(result.curves.items()):
            print(f"{args.axis}={v} {label}: final mean NMSD {curve.values[-1]:.6g}")
    return EXIT_ALL_DIVERGED if any_all_diverged else EXIT_OK


def cmd_analyze(args) -> int:
    cfg = experiments.ScenarioConfig.from_toml(args.config)
    pilot_cfg = cfg.replace(horizon=min(cfg.horizon, args.pilot_iters))
    pilot = experiments.run_scenario(pilot_cfg, trials_override=1)
    seed = experiments.trial_seed(cfg.master_seed, 0)
    if cfg.graph_source == "synthetic-uniform":
        rng = sampling._philox(sampling.stream_key(seed, "graph"), 0)
        w = rng.uniform(0.0, 1.0, (cfg.n_nodes, cfg.n_nodes))
        basis = graph.gft_basis(graph.laplacian(graph.build_graph((w + w.T) / 2.0)))
    else:
        _, basis = experiments._fixed_graph_basis(cfg)
    op = sampling.make_operator(basis, cfg.m_measurements, cfg.s_count, seed)
    ce = experiments._noise_diag(cfg)

    report = {
        "scenario": cfg.name,
        "content_hash": cfg.content_hash(),
        "backend": backend.BACKEND,
        "sampling_policy": cfg.sampling_policy,
        "algorithms": {},
    }
    for spec in cfg.algorithms:
        gbar, hbar = pilot.gain_means[spec.label]
        history = [op.composite] * (spec.k_history - 1)
        b1 = analysis.build_b1(gbar, hbar, op.composite, history)
        entry = {}
        try:
            rep = analysis.stability_bound(b1, mu=spec.mu)
            entry.update(
                lambda_max=rep.lambda_max,
                mu_bound=rep.mu_bound,
                spectral_radius=rep.mean_spectral_radius,
                mu=spec.mu,
                mu_within_bound=rep.mu_within_bound,
            )
        except GsrError as exc:
            entry["stability_error"] = str(exc)
        try:
            pred = analysis.steady_state_msd(
                gbar, hbar, op.composite, history, ce, spec.mu
            )
            entry["predicted_msd"] = pred.msd
            entry["predicted_msd_adjoint"] = pred.msd_adjoint
        except GsrError as exc:
            entry["predicted_msd"] = None
            entry["msd_error"] = str(exc)
        report["algorithms"][spec.label] = entry

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{cfg.name}_analysis.json"
    with open(path, "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(json.dumps(report, sort_keys=True, indent=2))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        return cmd_analyze(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GsrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
