"""Shared fixtures and the acceptance summary hook."""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import pytest

from otparity import (
    Support,
    WeightedDataset,
    cost_matrix,
    disparity_vector,
    empirical_distribution,
    groupwise_distributions,
)

# ---------------------------------------------------------------------------
# acceptance reporting: one status line per criterion at the end of the run
# ---------------------------------------------------------------------------

_acceptance_results: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.skipped:
        reason = report.longrepr[2] if isinstance(report.longrepr, tuple) else str(report.longrepr)
        reason = reason.removeprefix("Skipped: ")
        _acceptance_results[name] = ("SKIPPED", reason)
    elif report.when == "call":
        _acceptance_results[name] = ("PASS" if report.passed else "FAIL", "")
    elif report.failed:
        _acceptance_results[name] = ("FAIL", f"{report.when} error")


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance_results):
        status, extra = _acceptance_results[name]
        suffix = f" ({extra})" if extra else ""
        terminalreporter.write_line(f"{name}: {status}{suffix}")


# ---------------------------------------------------------------------------
# census data gate
# ---------------------------------------------------------------------------


def adult_dir_or_none() -> Path | None:
    env = os.environ.get("OTPARITY_ADULT_DIR")
    root = Path(env) if env else Path(__file__).resolve().parent.parent / "data" / "adult"
    if (root / "adult.data").exists() and (root / "adult.test").exists():
        return root
    return None


@pytest.fixture(scope="session")
def adult_dir() -> Path:
    root = adult_dir_or_none()
    if root is None:
        pytest.skip("census dataset not fetched; see the README section 'Census data'")
    return root


# ---------------------------------------------------------------------------
# the analytic two-point instance
# ---------------------------------------------------------------------------


@pytest.fixture
def two_point_dataset() -> WeightedDataset:
    """Six unit-weight observations on {0, 1} with mirrored group skews.

    Group a holds one sample at 0 and two at 1, group b the reverse, so
    the pooled distribution is uniform while the conditionals are
    [1/3, 2/3] and [2/3, 1/3].
    """
    return WeightedDataset(
        feature_names=("x",),
        features=np.array([[0.0], [1.0], [1.0], [0.0], [0.0], [1.0]]),
        weight=np.ones(6),
        adjusted=("x",),
        group=np.array([0, 0, 0, 1, 1, 1], dtype=np.intp),
        group_values=("a", "b"),
    )


@pytest.fixture
def two_point_instance(two_point_dataset):
    """Histograms, disparity vector, and cost for the two-point instance."""
    data = two_point_dataset
    p_x = empirical_distribution(data)
    dists = groupwise_distributions(data)
    v = disparity_vector(dists["a"], dists["b"], p_x)
    cost = cost_matrix(p_x.support, p_x.support, [1.0])
    return data, p_x, dists["a"], dists["b"], v, cost


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)


def random_histogram(rng: np.random.Generator, support: Support, floor: float = 0.05):
    """Strictly positive histogram with mass bounded away from zero."""
    from otparity import make_histogram

    w = floor + rng.random(support.size)
    return make_histogram(support, w)
