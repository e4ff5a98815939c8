"""Command line front end.

Every subcommand reads CSV/JSON files, runs one pipeline stage, and writes
CSV/JSON files into ``--out-dir``. Exit codes: 0 on success, 2 when the
inputs are invalid, 3 when a solve breaks down numerically.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .core import (
    Coupling,
    RepairBand,
    SolverError,
    Support,
    ValidationError,
    cost_matrix,
    disparity_vector,
    make_histogram,
)
from .data_io import (
    ADULT_FEATURES,
    GROUP_COL,
    LABEL_COL,
    WEIGHT_COL,
    DatasetSchema,
    build_support,
    cost_weights_from_ranges,
    feature_selection_by_tv,
    load_adult,
    load_coupling,
    load_dataset,
    load_histogram,
    load_scores,
    save_coupling,
    save_dataset,
    save_histogram,
)
from .datasets import WeightedDataset
from .experiments import SyntheticConfig, adult_experiment, synthetic_experiment
from .metrics import (
    MetricReport,
    confusion_from_predictions,
    disparate_impact,
    empirical_distribution,
    f1_scores,
    groupwise_distributions,
    s_wise_tv,
)
from .repair import apply_map, projection_map, theta_bound_check
from .solver import (
    SolveConfig,
    barycentre_group_maps,
    solve_barycentre_coupling,
    solve_repair_coupling,
)

__all__ = ["main", "build_parser"]

#: Row tolerance when turning finite-iteration couplings into maps.
_MAP_ROW_TOL = 1e-3


def _parse_theta(text: str) -> float:
    if text == "zero":
        return 0.0
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"theta must be a nonnegative real or 'zero', got {text!r}"
        ) from None
    if value < 0.0:
        raise argparse.ArgumentTypeError("theta must be nonnegative")
    return value


def _add_solve_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--epsilon", type=float, default=None, help="entropic regularization")
    sub.add_argument("--iters", type=int, default=None, help="prox-step budget")
    sub.add_argument(
        "--theta",
        type=_parse_theta,
        default=None,
        help="uniform parity band half-width, a real or 'zero'",
    )
    sub.add_argument(
        "--target",
        default="self",
        help="target histogram CSV, or 'self' for the source distribution",
    )
    sub.add_argument("--config", default=None, help="JSON file with solver settings")


def _add_io_flags(sub: argparse.ArgumentParser, out_required: bool = True) -> None:
    sub.add_argument("dataset", help="weighted dataset CSV")
    sub.add_argument("--schema", required=True, help="dataset schema JSON file")
    sub.add_argument("--out-dir", required=out_required, help="directory for outputs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="otparity",
        description="group-blind distribution repair via constrained entropic transport",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    solve = commands.add_parser("solve", help="solve a repair coupling from a dataset")
    _add_io_flags(solve)
    _add_solve_flags(solve)

    repair = commands.add_parser("repair", help="apply a repair map to a dataset")
    _add_io_flags(repair)
    _add_solve_flags(repair)
    repair.add_argument(
        "--coupling", default=None, help="precomputed coupling CSV (skips the solve)"
    )
    repair.add_argument(
        "--min-weight", type=float, default=0.0, help="drop splits at or below this weight"
    )

    bary = commands.add_parser(
        "barycentre", help="repair both groups onto their entropic barycentre"
    )
    _add_io_flags(bary)
    bary.add_argument("--epsilon", type=float, default=0.01)
    bary.add_argument("--iters", type=int, default=400)
    bary.add_argument("--min-weight", type=float, default=0.0)

    metrics = commands.add_parser("metrics", help="fairness indices of a dataset")
    _add_io_flags(metrics, out_required=False)
    metrics.add_argument(
        "--scores", default=None, help="per-row classifier scores in [0, 1], one per line"
    )
    metrics.add_argument(
        "--f-th", type=float, default=0.1, help="decision threshold on the scores"
    )

    synth = commands.add_parser("synthetic-exp", help="run the synthetic mixture study")
    synth.add_argument("--seed", type=int, default=None)
    synth.add_argument("--config", default=None, help="JSON file overriding study fields")
    synth.add_argument("--out-dir", required=True)

    adult = commands.add_parser("adult-exp", help="run the census study")
    adult.add_argument("data", help="directory holding adult.data and adult.test")
    adult.add_argument("--s", choices=("race", "sex"), default="race", dest="s_name")
    adult.add_argument("--trials", type=int, default=30)
    adult.add_argument("--seed", type=int, default=0)
    adult.add_argument("--epsilon", type=float, default=0.01)
    adult.add_argument("--iters", type=int, default=600)
    adult.add_argument("--out-dir", required=True)

    return parser


def _write_repaired(out_dir: Path, repaired: WeightedDataset) -> None:
    """The repaired CSV plus a schema that reads it back, side by side."""
    save_dataset(repaired, out_dir / "repaired.csv")
    schema = DatasetSchema(
        adjusted=repaired.adjusted,
        neutral=tuple(n for n in repaired.feature_names if n not in repaired.adjusted),
        group=GROUP_COL if repaired.group is not None else None,
        label=LABEL_COL if repaired.label is not None else None,
        weight=WEIGHT_COL,
    )
    (out_dir / "repaired_schema.json").write_text(schema.to_json() + "\n")


def _read_dataset(args) -> WeightedDataset:
    schema_path = Path(args.schema)
    if not schema_path.exists():
        raise ValidationError(f"no such schema file: {schema_path}")
    schema = DatasetSchema.from_json(schema_path.read_text())
    return load_dataset(args.dataset, schema)


def _solve_config(args) -> SolveConfig:
    base = SolveConfig()
    if args.config is not None:
        config_path = Path(args.config)
        if not config_path.exists():
            raise ValidationError(f"no such config file: {config_path}")
        base = SolveConfig.from_json(config_path.read_text())
    overrides = {}
    if args.epsilon is not None:
        overrides["epsilon"] = args.epsilon
    if args.iters is not None:
        overrides["max_iters"] = args.iters
    if args.theta is not None:
        overrides["theta"] = args.theta
    if overrides:
        base = SolveConfig(
            epsilon=overrides.get("epsilon", base.epsilon),
            max_iters=overrides.get("max_iters", base.max_iters),
            residual_tol=base.residual_tol,
            theta=overrides.get("theta", base.theta),
        )
    return base


def _solve_inputs(data: WeightedDataset, args):
    """Histograms, disparity vector, target and cost shared by solve/repair."""
    if data.group is None or len(data.group_values) != 2:
        raise ValidationError("repair needs a dataset with exactly two groups")
    support = build_support(data)
    p_x = empirical_distribution(data)
    dists = groupwise_distributions(data)
    h0 = dists[data.group_values[0]]
    h1 = dists[data.group_values[1]]
    v = disparity_vector(h0, h1, p_x)
    if args.target == "self":
        target = p_x
    else:
        target = load_histogram(args.target)
    g = cost_weights_from_ranges(data)
    cost = cost_matrix(support, target.support, g)
    return support, p_x, h0, h1, v, target, cost


def _write_solve_outputs(out_dir: Path, p_x, h0, h1, target, coupling, report, bound) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    save_histogram(p_x, out_dir / "source_hist.csv")
    save_histogram(target, out_dir / "target_hist.csv")
    save_histogram(h0, out_dir / "group0_hist.csv")
    save_histogram(h1, out_dir / "group1_hist.csv")
    save_coupling(coupling, out_dir / "coupling.csv", "source_hist.csv", "target_hist.csv")
    tv_bound, achieved, holds = bound
    payload = {
        "iterations_run": report.iterations_run,
        "final_residuals": report.final_residuals,
        "kl_to_kernel": report.kl_to_kernel,
        "converged": report.converged,
        "tv_bound": tv_bound,
        "achieved_tv": achieved,
        "bound_holds": holds,
    }
    (out_dir / "report.json").write_text(json.dumps(payload, indent=2) + "\n")


def _cmd_solve(args) -> int:
    data = _read_dataset(args)
    config = _solve_config(args)
    _, p_x, h0, h1, v, target, cost = _solve_inputs(data, args)
    theta = config.theta if config.theta is not None else 0.0
    band = RepairBand.uniform(target.support, theta)
    coupling, report = solve_repair_coupling(p_x, target, v, band, cost, config)
    bound = theta_bound_check(coupling, v, band)
    _write_solve_outputs(Path(args.out_dir), p_x, h0, h1, target, coupling, report, bound)
    print(f"coupling written to {args.out_dir} after {report.iterations_run} steps")
    return 0


def _cmd_repair(args) -> int:
    data = _read_dataset(args)
    out_dir = Path(args.out_dir)
    if args.coupling is not None:
        coupling = load_coupling(args.coupling)
        p_x = empirical_distribution(data)
    else:
        config = _solve_config(args)
        _, p_x, h0, h1, v, target, cost = _solve_inputs(data, args)
        theta = config.theta if config.theta is not None else 0.0
        band = RepairBand.uniform(target.support, theta)
        coupling, report = solve_repair_coupling(p_x, target, v, band, cost, config)
        bound = theta_bound_check(coupling, v, band)
        _write_solve_outputs(out_dir, p_x, h0, h1, target, coupling, report, bound)
    pmap = projection_map(coupling, p_x, tol=_MAP_ROW_TOL)
    repaired, dropped = apply_map(data, pmap, args.min_weight)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_repaired(out_dir, repaired)
    summary = {
        "rows_in": data.n_samples,
        "rows_out": repaired.n_samples,
        "dropped_mass": dropped,
        "s_wise_tv": s_wise_tv(repaired) if repaired.group is not None else None,
    }
    (out_dir / "repair_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"repaired dataset written to {out_dir / 'repaired.csv'}")
    return 0


def _cmd_barycentre(args) -> int:
    data = _read_dataset(args)
    if data.group is None or len(data.group_values) != 2:
        raise ValidationError("barycentre repair needs exactly two groups")
    support = build_support(data)
    dists = groupwise_distributions(data)
    h0 = dists[data.group_values[0]]
    h1 = dists[data.group_values[1]]
    g = cost_weights_from_ranges(data)
    cost = cost_matrix(support, support, g)
    gamma_b = solve_barycentre_coupling(h0, h1, cost, args.epsilon, max_iters=args.iters)
    pi0 = float(data.weight[data.group == 0].sum() / data.weight.sum())
    gamma0, gamma1 = barycentre_group_maps(gamma_b, pi0)
    parts = []
    dropped = 0.0
    for code, gamma, hist in ((0, gamma0, h0), (1, gamma1, h1)):
        rows = np.flatnonzero(hist.mass > 0.0)
        sub_support = Support(hist.support.points[rows])
        sub_hist = make_histogram(sub_support, hist.mass[rows])
        sub_coupling = Coupling(sub_support, gamma.target, gamma.mass[rows])
        pmap = projection_map(sub_coupling, sub_hist, tol=_MAP_ROW_TOL)
        part, lost = apply_map(data.take(data.group == code), pmap, args.min_weight)
        parts.append(part)
        dropped += lost
    repaired = WeightedDataset.concat(parts)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_repaired(out_dir, repaired)
    summary = {
        "pi0": pi0,
        "rows_in": data.n_samples,
        "rows_out": repaired.n_samples,
        "dropped_mass": dropped,
        "s_wise_tv": s_wise_tv(repaired),
    }
    (out_dir / "repair_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"barycentre-repaired dataset written to {out_dir / 'repaired.csv'}")
    return 0


def _cmd_metrics(args) -> int:
    data = _read_dataset(args)
    tv = s_wise_tv(data) if data.group is not None else float("nan")
    report = MetricReport(s_wise_tv=tv)
    if args.scores is not None:
        if data.label is None:
            raise ValidationError("scored metrics need a dataset with labels")
        if data.group is None:
            raise ValidationError("scored metrics need a dataset with groups")
        scores = load_scores(args.scores, expected_rows=data.n_samples)
        predictions = (scores >= args.f_th).astype(int)
        confusion = confusion_from_predictions(
            data.label, predictions, data.group, data.weight
        )
        priors = np.array(
            [data.weight[data.group == k].sum() for k in range(len(data.group_values))]
        )
        micro, macro, weighted = f1_scores(confusion, priors / priors.sum())
        report = MetricReport(
            f1_micro=micro,
            f1_macro=macro,
            f1_weighted=weighted,
            disparate_impact=disparate_impact(predictions, data.group, data.weight),
            s_wise_tv=tv,
        )
    print(report.to_json())
    if args.out_dir is not None:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "metrics.json").write_text(report.to_json() + "\n")
        (out_dir / "metrics.csv").write_text(
            MetricReport.csv_header() + "\n" + report.to_csv_row() + "\n"
        )
    return 0


def _cmd_synthetic(args) -> int:
    config = SyntheticConfig()
    if args.config is not None:
        config_path = Path(args.config)
        if not config_path.exists():
            raise ValidationError(f"no such config file: {config_path}")
        try:
            raw = json.loads(config_path.read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid config JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ValidationError("config JSON must be an object")
        known = set(SyntheticConfig.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ValidationError(f"unknown config field {sorted(unknown)[0]!r}")
        if "theta_grid" in raw:
            raw["theta_grid"] = tuple(float(t) for t in raw["theta_grid"])
        config = SyntheticConfig(**raw)
    if args.seed is not None:
        kwargs = {f: getattr(config, f) for f in SyntheticConfig.__dataclass_fields__}
        kwargs["seed"] = args.seed
        config = SyntheticConfig(**kwargs)
    run = synthetic_experiment(config, out_dir=args.out_dir)
    for arm in run.arm_order:
        tv = run.trials[arm].report.s_wise_tv
        print(f"{arm}: group TV {tv:.6f}")
    print(f"tables written to {args.out_dir}")
    return 0


def _cmd_adult(args) -> int:
    data, counts = load_adult(args.data, args.s_name)
    selected, table = feature_selection_by_tv(data, ADULT_FEATURES)
    if not selected:
        raise ValidationError("no feature passes the group TV threshold")
    data = data.with_adjusted(selected)
    run = adult_experiment(
        data,
        n_trials=args.trials,
        seed=args.seed,
        epsilon=args.epsilon,
        k_repair=args.iters,
        out_dir=args.out_dir,
    )
    out_dir = Path(args.out_dir)
    meta = {
        "s_name": args.s_name,
        "rows": counts,
        "adjusted_features": list(selected),
        "tv_table": table,
    }
    (out_dir / "dataset.json").write_text(json.dumps(meta, indent=2) + "\n")
    for arm, report in run.mean.items():
        print(
            f"{arm}: DI {report.disparate_impact:.4f}, "
            f"group TV {report.s_wise_tv:.4f}, f1 {report.f1_macro:.4f}"
        )
    print(f"tables written to {args.out_dir}")
    return 0


_COMMANDS = {
    "solve": _cmd_solve,
    "repair": _cmd_repair,
    "barycentre": _cmd_barycentre,
    "metrics": _cmd_metrics,
    "synthetic-exp": _cmd_synthetic,
    "adult-exp": _cmd_adult,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
