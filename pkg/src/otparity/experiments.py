"""End-to-end studies: the synthetic Gaussian mixture and the census one.

Both studies share the same skeleton: build histograms and the disparity
vector from data, solve one coupling per arm, turn each coupling into a
projection map, split the samples, and score the result. The synthetic
study measures distributional quality against a known target; the census
study adds a classifier and the fairness indices.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.ensemble import RandomForestClassifier

from .core import (
    Coupling,
    Histogram,
    RepairBand,
    Support,
    ValidationError,
    cost_matrix,
    disparity_vector,
    gibbs_kernel,
    make_histogram,
    tv_distance,
)
from .data_io import build_support, cost_weights_from_ranges, save_histogram
from .datasets import WeightedDataset
from .metrics import (
    MetricReport,
    confusion_from_predictions,
    disparate_impact,
    empirical_distribution,
    f1_scores,
    groupwise_distributions,
    s_wise_tv,
)
from .repair import ProjectionMap, _split_arrays, apply_map, projection_map, theta_bound_check
from .solver import (
    SolveConfig,
    SolveReport,
    barycentre_group_maps,
    bregman_iterate,
    solve_barycentre_coupling,
    solve_repair_coupling,
)

__all__ = [
    "SyntheticConfig",
    "TrialResult",
    "SyntheticRun",
    "AdultRun",
    "synthetic_experiment",
    "adult_experiment",
    "repaired_prediction",
    "train_stub_classifier",
    "ARM_ORIGIN",
    "ARM_BASELINE",
    "ARM_BARYCENTRE",
]

ARM_ORIGIN = "Origin"
ARM_BASELINE = "Baseline"
ARM_BARYCENTRE = "Barycentre"
ARM_TOTAL = "total-repair"

#: Couplings stopped at a fixed iteration budget match their prescribed row
#: marginal to roughly the solver's final residual, far better than this,
#: but not to the strict default of projection_map.
_MAP_ROW_TOL = 1e-3


def _arm_name(theta_value: float) -> str:
    if theta_value == 0.0:
        return ARM_TOTAL
    exponent = np.log10(theta_value)
    if np.isclose(exponent, round(exponent)):
        return f"1e{round(exponent)}-repair"
    return f"{theta_value:g}-repair"


_KNOWN_ARMS = (ARM_ORIGIN, ARM_BASELINE, ARM_BARYCENTRE, "1e-2-repair", "1e-3-repair", ARM_TOTAL)


@dataclass(frozen=True)
class TrialResult:
    """One arm's metrics for one trial."""

    arm: str
    report: MetricReport
    runtime_seconds: float

    def __post_init__(self) -> None:
        if not self.arm or (self.arm not in _KNOWN_ARMS and not self.arm.endswith("-repair")):
            raise ValidationError(f"unknown arm name {self.arm!r}")
        if self.runtime_seconds < 0.0:
            raise ValidationError("runtime must be nonnegative")


@dataclass(frozen=True)
class SyntheticConfig:
    """Knobs of the synthetic study, defaulting to the desk-scale setup."""

    seed: int = 7
    m: int = 10_000
    p_s0: float = 0.7
    mean_s0: float = -10.0
    std_s0: float = 6.0
    mean_s1: float = 1.0
    std_s1: float = 3.0
    target_mean: float = -5.0
    target_std: float = 5.0
    lo: int = -30
    hi: int = 10
    epsilon: float = 0.01
    k_baseline: int = 400
    k_repair: int = 600
    theta_grid: tuple[float, ...] = (1e-2, 1e-3, 0.0)

    def __post_init__(self) -> None:
        if not 0.0 < self.p_s0 < 1.0:
            raise ValidationError("p_s0 must lie strictly between 0 and 1")
        if self.m < 1:
            raise ValidationError("m must be at least 1")
        if self.lo >= self.hi:
            raise ValidationError("support bounds must satisfy lo < hi")
        if min(self.std_s0, self.std_s1, self.target_std) <= 0.0:
            raise ValidationError("standard deviations must be positive")
        if any(t < 0.0 for t in self.theta_grid):
            raise ValidationError("theta values must be nonnegative")


@dataclass(frozen=True)
class SyntheticRun:
    """Everything the synthetic study produced, keyed by arm name."""

    trials: dict[str, TrialResult]
    projected: dict[str, Histogram]
    groupwise: dict[str, tuple[Histogram, Histogram]]
    tv_to_target: dict[str, float]
    bounds: dict[str, tuple[float, float, bool]]
    reports: dict[str, SolveReport]
    source: Histogram
    target: Histogram

    @property
    def arm_order(self) -> tuple[str, ...]:
        return tuple(self.trials)

    def tv_ordering_holds(self, slack: float = 1e-12) -> bool:
        """Group TV must not increase along Origin, Baseline, shrinking theta."""
        tvs = [self.trials[a].report.s_wise_tv for a in self.arm_order]
        return all(a >= b - slack for a, b in zip(tvs, tvs[1:]))


def _gaussian_histogram(support: Support, mean: float, std: float) -> Histogram:
    """Discretised Gaussian: unit cells, tails folded into the end bins."""
    from scipy.stats import norm

    edges = np.append(support.points[:, 0], support.points[-1, 0] + 1.0)
    cdf = norm.cdf(edges, loc=mean, scale=std)
    mass = np.diff(cdf)
    mass = np.concatenate([[cdf[0] + mass[0]], mass[1:]])
    mass[-1] += 1.0 - cdf[-1]
    return make_histogram(support, mass)


def _synthetic_dataset(config: SyntheticConfig) -> WeightedDataset:
    rng = np.random.default_rng(config.seed)
    in_s1 = rng.random(config.m) < (1.0 - config.p_s0)
    draw0 = rng.normal(config.mean_s0, config.std_s0, config.m)
    draw1 = rng.normal(config.mean_s1, config.std_s1, config.m)
    x = np.where(in_s1, draw1, draw0)
    x = np.clip(np.floor(x), config.lo, config.hi)
    return WeightedDataset(
        feature_names=("x",),
        features=x[:, None],
        weight=np.ones(config.m),
        adjusted=("x",),
        group=in_s1.astype(np.intp),
        group_values=("s0", "s1"),
    )


def _metricless(tv: float) -> MetricReport:
    return MetricReport(s_wise_tv=tv)


def synthetic_experiment(config: SyntheticConfig | None = None, out_dir=None) -> SyntheticRun:
    """Run all arms of the synthetic study; optionally emit CSV tables.

    Arms run in fixed order: Origin, Baseline, then one Theta-repair arm
    per grid value. The returned run holds per-arm metrics, projected
    group-blind and group-wise histograms, distances to the analytic
    target, and the repair-guarantee checks.
    """
    if config is None:
        config = SyntheticConfig()
    data = _synthetic_dataset(config)
    source_support = build_support(data)
    target_support = Support(
        np.arange(config.lo, config.hi + 1, dtype=float)[:, None]
    )
    p_x = empirical_distribution(data)
    dists = groupwise_distributions(data)
    h0, h1 = dists["s0"], dists["s1"]
    v = disparity_vector(h0, h1, p_x)
    target = _gaussian_histogram(target_support, config.target_mean, config.target_std)
    g = cost_weights_from_ranges(data)
    cost = cost_matrix(source_support, target_support, g)

    trials: dict[str, TrialResult] = {}
    projected: dict[str, Histogram] = {}
    groupwise: dict[str, tuple[Histogram, Histogram]] = {}
    tv_to_target: dict[str, float] = {}
    bounds: dict[str, tuple[float, float, bool]] = {}
    reports: dict[str, SolveReport] = {}

    start = time.perf_counter()
    trials[ARM_ORIGIN] = TrialResult(
        ARM_ORIGIN, _metricless(s_wise_tv(data)), time.perf_counter() - start
    )
    projected[ARM_ORIGIN] = p_x
    groupwise[ARM_ORIGIN] = (h0, h1)
    tv_to_target[ARM_ORIGIN] = float("nan")

    def run_arm(arm: str, coupling: Coupling, report: SolveReport, t0: float) -> None:
        pmap = projection_map(coupling, p_x, tol=_MAP_ROW_TOL)
        repaired, _ = apply_map(data, pmap)
        post = groupwise_distributions(repaired)
        blind = empirical_distribution(repaired)
        trials[arm] = TrialResult(
            arm, _metricless(s_wise_tv(repaired)), time.perf_counter() - t0
        )
        projected[arm] = blind
        groupwise[arm] = (post["s0"], post["s1"])
        tv_to_target[arm] = tv_distance(blind, target)
        reports[arm] = report

    t0 = time.perf_counter()
    xi = gibbs_kernel(cost, config.epsilon)
    base_mass, base_report = bregman_iterate(
        xi, p_x, target, max_iters=config.k_baseline
    )
    run_arm(ARM_BASELINE, Coupling(source_support, target_support, base_mass), base_report, t0)

    for theta_value in config.theta_grid:
        arm = _arm_name(theta_value)
        t0 = time.perf_counter()
        band = RepairBand.uniform(target_support, theta_value)
        coupling, report = solve_repair_coupling(
            p_x,
            target,
            v,
            band,
            cost,
            SolveConfig(epsilon=config.epsilon, max_iters=config.k_repair),
        )
        bounds[arm] = theta_bound_check(coupling, v, band)
        run_arm(arm, coupling, report, t0)

    run = SyntheticRun(
        trials=trials,
        projected=projected,
        groupwise=groupwise,
        tv_to_target=tv_to_target,
        bounds=bounds,
        reports=reports,
        source=p_x,
        target=target,
    )
    if out_dir is not None:
        _emit_synthetic(run, Path(out_dir))
    return run


def _emit_synthetic(run: SyntheticRun, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    save_histogram(run.source, out_dir / "source.csv")
    save_histogram(run.target, out_dir / "target.csv")
    summary: dict[str, dict] = {}
    for arm in run.arm_order:
        safe = arm.lower()
        save_histogram(run.projected[arm], out_dir / f"{safe}_projected.csv")
        g0, g1 = run.groupwise[arm]
        save_histogram(g0, out_dir / f"{safe}_group_s0.csv")
        save_histogram(g1, out_dir / f"{safe}_group_s1.csv")
        entry = {
            "s_wise_tv": run.trials[arm].report.s_wise_tv,
            "tv_to_target": run.tv_to_target[arm],
            "runtime_seconds": run.trials[arm].runtime_seconds,
        }
        if arm in run.bounds:
            bound, achieved, holds = run.bounds[arm]
            entry["tv_bound"] = bound
            entry["achieved_tv"] = achieved
            entry["bound_holds"] = holds
        if arm in run.reports:
            entry["iterations_run"] = run.reports[arm].iterations_run
            entry["final_residuals"] = run.reports[arm].final_residuals
            entry["converged"] = run.reports[arm].converged
        summary[arm] = entry
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    lines = ["arm,s_wise_tv,tv_to_target,runtime_seconds"]
    for arm in run.arm_order:
        lines.append(
            f"{arm},{run.trials[arm].report.s_wise_tv!r},"
            f"{run.tv_to_target[arm]!r},{run.trials[arm].runtime_seconds!r}"
        )
    (out_dir / "summary.csv").write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# census study
# ---------------------------------------------------------------------------


def repaired_prediction(weights, scores, f_th: float = 0.1) -> int:
    """Predict for one original sample from its splits' weights and scores.

    The split weights must sum to one within 1e-6 (renormalize after
    pruning); the prediction is 1 exactly when the weighted average score
    reaches ``f_th``.
    """
    w = np.asarray(weights, dtype=float)
    s = np.asarray(scores, dtype=float)
    if w.size == 0:
        raise ValidationError("empty split list")
    if w.shape != s.shape:
        raise ValidationError("weights and scores must have equal length")
    if abs(w.sum() - 1.0) > 1e-6:
        raise ValidationError("split weights must sum to one")
    return int((w * s).sum() >= f_th)


def train_stub_classifier(train: WeightedDataset, seed: int):
    """Deterministic bagged-tree scorer standing in for any real model.

    Returns a function mapping a feature block to scores in [0, 1]. The
    ensemble is small and shallow on purpose: the studies need a stable,
    fast, seedable scorer, not a tuned model. Callers with their own
    classifier can pass any score function of the same shape to
    :func:`adult_experiment`.
    """
    if train.label is None:
        raise ValidationError("training data has no labels")
    y = train.label.astype(int)
    if np.unique(y).size < 2:
        raise ValidationError("single-class training labels")
    forest = RandomForestClassifier(
        n_estimators=64, max_depth=8, random_state=seed, n_jobs=1
    )
    forest.fit(train.features, y, sample_weight=train.weight)
    positive = int(np.flatnonzero(forest.classes_ == 1)[0])

    def score(features: np.ndarray) -> np.ndarray:
        return forest.predict_proba(np.asarray(features, dtype=float))[:, positive]

    return score


def _split_predictions(
    data: WeightedDataset,
    pmap: ProjectionMap,
    score_fn,
    f_th: float,
    min_weight: float,
) -> np.ndarray:
    """Repaired predictions for every sample, without materializing splits."""
    row, tgt, w = _split_arrays(data, pmap, min_weight)
    if row.size == 0:
        raise ValidationError("all mass dropped")
    cols = data.column_indices(data.adjusted)
    feats = data.features[row].copy()
    feats[:, cols] = pmap.target.points[tgt]
    scores = score_fn(feats)
    num = np.zeros(data.n_samples)
    den = np.zeros(data.n_samples)
    np.add.at(num, row, w * scores)
    np.add.at(den, row, w)
    if (den <= 0.0).any():
        bad = int(np.flatnonzero(den <= 0.0)[0])
        raise ValidationError(f"row {bad}: all mass dropped")
    return (num / den >= f_th).astype(int)


@dataclass(frozen=True)
class AdultRun:
    """Aggregated census study results."""

    trials: list[dict[str, TrialResult]]
    mean: dict[str, MetricReport] = field(default_factory=dict)
    std: dict[str, MetricReport] = field(default_factory=dict)


def _aggregate(trials: list[dict[str, TrialResult]]) -> tuple[dict, dict]:
    arms = list(trials[0])
    mean: dict[str, MetricReport] = {}
    std: dict[str, MetricReport] = {}
    for arm in arms:
        values = {
            name: np.array([getattr(t[arm].report, name) for t in trials])
            for name in MetricReport._FIELDS
        }
        mean[arm] = MetricReport(**{k: float(v.mean()) for k, v in values.items()})
        std[arm] = MetricReport(**{k: float(v.std()) for k, v in values.items()})
    return mean, std


def _group_projection_map(
    gamma: Coupling, h: Histogram, tol: float
) -> ProjectionMap:
    """Map for one group, restricted to the rows that group occupies."""
    rows = np.flatnonzero(h.mass > 0.0)
    sub_support = Support(h.support.points[rows])
    sub_hist = make_histogram(sub_support, h.mass[rows])
    sub_coupling = Coupling(sub_support, gamma.target, gamma.mass[rows])
    return projection_map(sub_coupling, sub_hist, tol=tol)


def adult_experiment(
    data: WeightedDataset,
    n_trials: int = 30,
    seed: int = 0,
    epsilon: float = 0.01,
    k_baseline: int = 400,
    k_repair: int = 600,
    theta_values: tuple[float, ...] = (1e-2, 1e-3),
    f_th: float = 0.1,
    min_weight: float = 1e-6,
    out_dir=None,
) -> AdultRun:
    """Cross-validated five-arm study on a labeled two-group dataset.

    ``data`` carries its adjusted/neutral partition (set it from
    :func:`otparity.data_io.feature_selection_by_tv` first), a group
    column with two values, and binary labels. Each trial draws a fresh
    60/40 split with seed ``seed + trial``, trains the stub classifier on
    the train part, and evaluates every arm on the test part.
    """
    if data.group is None or len(data.group_values) != 2:
        raise ValidationError("census study needs exactly two groups")
    if data.label is None:
        raise ValidationError("census study needs labels")
    if n_trials < 1:
        raise ValidationError("n_trials must be at least 1")
    all_trials: list[dict[str, TrialResult]] = []
    for trial in range(n_trials):
        rng = np.random.default_rng(seed + trial)
        perm = rng.permutation(data.n_samples)
        n_train = int(round(0.6 * data.n_samples))
        train = data.take(perm[:n_train])
        test = data.take(perm[n_train:])
        score_fn = train_stub_classifier(train, seed=seed + trial)
        all_trials.append(
            _adult_trial(
                test, score_fn, epsilon, k_baseline, k_repair, theta_values, f_th, min_weight
            )
        )
    mean, std = _aggregate(all_trials)
    run = AdultRun(trials=all_trials, mean=mean, std=std)
    if out_dir is not None:
        _emit_adult(run, Path(out_dir))
    return run


def _adult_trial(
    test: WeightedDataset,
    score_fn,
    epsilon: float,
    k_baseline: int,
    k_repair: int,
    theta_values: tuple[float, ...],
    f_th: float,
    min_weight: float,
) -> dict[str, TrialResult]:
    support = build_support(test)
    p_x = empirical_distribution(test)
    dists = groupwise_distributions(test)
    h0 = dists[test.group_values[0]]
    h1 = dists[test.group_values[1]]
    v = disparity_vector(h0, h1, p_x)
    g = cost_weights_from_ranges(test)
    cost = cost_matrix(support, support, g)
    y_true = test.label
    groups = test.group
    results: dict[str, TrialResult] = {}

    def evaluate(arm: str, predictions: np.ndarray, tv: float, t0: float) -> None:
        confusion = confusion_from_predictions(y_true, predictions, groups, test.weight)
        priors = np.array(
            [test.weight[groups == 0].sum(), test.weight[groups == 1].sum()]
        )
        micro, macro, weighted = f1_scores(confusion, priors / priors.sum())
        results[arm] = TrialResult(
            arm,
            MetricReport(
                f1_micro=micro,
                f1_macro=macro,
                f1_weighted=weighted,
                disparate_impact=disparate_impact(predictions, groups, test.weight),
                s_wise_tv=tv,
            ),
            time.perf_counter() - t0,
        )

    t0 = time.perf_counter()
    origin_pred = (score_fn(test.features) >= f_th).astype(int)
    evaluate(ARM_ORIGIN, origin_pred, s_wise_tv(test), t0)

    t0 = time.perf_counter()
    xi = gibbs_kernel(cost, epsilon)
    base_mass, _ = bregman_iterate(xi, p_x, p_x, max_iters=k_baseline)
    base_map = projection_map(
        Coupling(support, support, base_mass), p_x, tol=_MAP_ROW_TOL
    )
    base_pred = _split_predictions(test, base_map, score_fn, f_th, min_weight)
    base_split, _ = apply_map(test, base_map, min_weight)
    evaluate(ARM_BASELINE, base_pred, s_wise_tv(base_split), t0)

    t0 = time.perf_counter()
    gamma_b = solve_barycentre_coupling(h0, h1, cost, epsilon, max_iters=k_baseline)
    pi0 = float(test.weight[groups == 0].sum() / test.weight.sum())
    map0_coupling, map1_coupling = barycentre_group_maps(gamma_b, pi0)
    map0 = _group_projection_map(map0_coupling, h0, tol=_MAP_ROW_TOL)
    map1 = _group_projection_map(map1_coupling, h1, tol=_MAP_ROW_TOL)
    part0 = test.take(groups == 0)
    part1 = test.take(groups == 1)
    pred0 = _split_predictions(part0, map0, score_fn, f_th, min_weight)
    pred1 = _split_predictions(part1, map1, score_fn, f_th, min_weight)
    split0, _ = apply_map(part0, map0, min_weight)
    split1, _ = apply_map(part1, map1, min_weight)
    bary_pred = np.concatenate([pred0, pred1])
    bary_groups = np.concatenate([part0.group, part1.group])
    bary_split = WeightedDataset.concat([split0, split1])
    confusion = confusion_from_predictions(
        np.concatenate([part0.label, part1.label]),
        bary_pred,
        bary_groups,
        np.concatenate([part0.weight, part1.weight]),
    )
    priors = np.array(
        [test.weight[groups == 0].sum(), test.weight[groups == 1].sum()]
    )
    micro, macro, weighted = f1_scores(confusion, priors / priors.sum())
    results[ARM_BARYCENTRE] = TrialResult(
        ARM_BARYCENTRE,
        MetricReport(
            f1_micro=micro,
            f1_macro=macro,
            f1_weighted=weighted,
            disparate_impact=disparate_impact(
                bary_pred,
                bary_groups,
                np.concatenate([part0.weight, part1.weight]),
            ),
            s_wise_tv=s_wise_tv(bary_split),
        ),
        time.perf_counter() - t0,
    )

    for theta_value in theta_values:
        arm = _arm_name(theta_value)
        t0 = time.perf_counter()
        band = RepairBand.uniform(support, theta_value)
        coupling, _ = solve_repair_coupling(
            p_x,
            p_x,
            v,
            band,
            cost,
            SolveConfig(epsilon=epsilon, max_iters=k_repair),
        )
        pmap = projection_map(coupling, p_x, tol=_MAP_ROW_TOL)
        predictions = _split_predictions(test, pmap, score_fn, f_th, min_weight)
        split_data, _ = apply_map(test, pmap, min_weight)
        evaluate(arm, predictions, s_wise_tv(split_data), t0)

    return results


def _emit_adult(run: AdultRun, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    arms = list(run.trials[0])
    payload = {
        "n_trials": len(run.trials),
        "mean": {arm: json.loads(run.mean[arm].to_json()) for arm in arms},
        "std": {arm: json.loads(run.std[arm].to_json()) for arm in arms},
    }
    (out_dir / "summary.json").write_text(json.dumps(payload, indent=2) + "\n")
    lines = ["arm,statistic," + MetricReport.csv_header()]
    for arm in arms:
        lines.append(f"{arm},mean," + run.mean[arm].to_csv_row())
        lines.append(f"{arm},std," + run.std[arm].to_csv_row())
    (out_dir / "summary.csv").write_text("\n".join(lines) + "\n")
    trial_lines = ["trial,arm," + MetricReport.csv_header() + ",runtime_seconds"]
    for t, trial in enumerate(run.trials):
        for arm in arms:
            trial_lines.append(
                f"{t},{arm}," + trial[arm].report.to_csv_row() + f",{trial[arm].runtime_seconds!r}"
            )
    (out_dir / "trials.csv").write_text("\n".join(trial_lines) + "\n")
