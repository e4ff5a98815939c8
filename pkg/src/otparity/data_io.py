"""File formats and dataset ingestion.

Three small formats cover everything the library reads or writes: a
weighted-dataset CSV (feature columns plus optional ``__group__``,
``__label__``, ``__weight__``), a histogram CSV (``point_0..point_{d-1},
mass`` in canonical support order), and a coupling CSV (sparse
``src_index,tgt_index,mass`` triplets with a JSON sidecar naming the two
histogram files that define the supports). Floats are written with repr
so canonical files round-trip bit-exactly.

The census income dataset is not bundled. Fetch it from the UCI
repository (see the README for the exact commands), keep the two files
``adult.data`` and ``adult.test`` together in one directory, and record
their sha256 sums at fetch time; :func:`load_adult` verifies structure
and reports how many rows were dropped and why.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Coupling, Histogram, Support, ValidationError
from .datasets import WeightedDataset
from .metrics import s_wise_tv

__all__ = [
    "DatasetSchema",
    "load_dataset",
    "save_dataset",
    "load_histogram",
    "save_histogram",
    "load_coupling",
    "save_coupling",
    "load_scores",
    "build_support",
    "discretize_floor",
    "feature_selection_by_tv",
    "cost_weights_from_ranges",
    "ADULT_FEATURES",
    "load_adult",
]

GROUP_COL = "__group__"
LABEL_COL = "__label__"
WEIGHT_COL = "__weight__"


@dataclass(frozen=True)
class DatasetSchema:
    """Names and roles of the columns of a dataset file."""

    adjusted: tuple[str, ...]
    neutral: tuple[str, ...] = ()
    group: str | None = GROUP_COL
    label: str | None = LABEL_COL
    weight: str | None = WEIGHT_COL

    def __post_init__(self) -> None:
        object.__setattr__(self, "adjusted", tuple(self.adjusted))
        object.__setattr__(self, "neutral", tuple(self.neutral))
        if not self.adjusted:
            raise ValidationError("schema needs at least one adjusted feature")
        names = self.adjusted + self.neutral
        special = [c for c in (self.group, self.label, self.weight) if c is not None]
        if len(set(names) | set(special)) != len(names) + len(special):
            raise ValidationError("schema column names must be unique")

    @property
    def features(self) -> tuple[str, ...]:
        return self.adjusted + self.neutral

    def to_json(self) -> str:
        return json.dumps(
            {
                "adjusted": list(self.adjusted),
                "neutral": list(self.neutral),
                "group": self.group,
                "label": self.label,
                "weight": self.weight,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "DatasetSchema":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid schema JSON: {exc}") from exc
        return cls(
            adjusted=tuple(raw.get("adjusted", ())),
            neutral=tuple(raw.get("neutral", ())),
            group=raw.get("group", GROUP_COL),
            label=raw.get("label", LABEL_COL),
            weight=raw.get("weight", WEIGHT_COL),
        )


def _parse_float(token: str, lineno: int, column: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise ValidationError(
            f"line {lineno}: non-numeric value {token!r} in column {column!r}"
        ) from None


def load_dataset(path, schema: DatasetSchema) -> WeightedDataset:
    """Read a weighted-dataset CSV against ``schema``.

    Every header column must be declared by the schema; the group, label,
    and weight columns may be absent, and a missing weight column means
    every sample has weight one.
    """
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"no such file: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError("empty distribution") from None
        header = [h.strip() for h in header]
        known = set(schema.features) | {
            c for c in (schema.group, schema.label, schema.weight) if c is not None
        }
        for name in header:
            if name not in known:
                raise ValidationError(f"unknown column {name!r}")
        missing = [n for n in schema.features if n not in header]
        if missing:
            raise ValidationError(f"missing feature column {missing[0]!r}")
        pos = {name: i for i, name in enumerate(header)}
        feat_idx = [pos[n] for n in schema.features]
        group_idx = pos.get(schema.group) if schema.group else None
        label_idx = pos.get(schema.label) if schema.label else None
        weight_idx = pos.get(schema.weight) if schema.weight else None
        feats: list[list[float]] = []
        weights: list[float] = []
        raw_groups: list[str] = []
        labels: list[float] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValidationError(
                    f"line {lineno}: expected {len(header)} fields, got {len(row)}"
                )
            feats.append(
                [_parse_float(row[i].strip(), lineno, header[i]) for i in feat_idx]
            )
            if weight_idx is not None:
                w = _parse_float(row[weight_idx].strip(), lineno, schema.weight)
                if w <= 0.0:
                    raise ValidationError(f"line {lineno}: weight must be positive")
                weights.append(w)
            else:
                weights.append(1.0)
            if group_idx is not None:
                raw_groups.append(row[group_idx].strip())
            if label_idx is not None:
                labels.append(_parse_float(row[label_idx].strip(), lineno, schema.label))
    if not feats:
        raise ValidationError("empty distribution")
    group = None
    group_values: tuple[str, ...] = ()
    if group_idx is not None:
        group_values = tuple(sorted(set(raw_groups)))
        codes = {v: i for i, v in enumerate(group_values)}
        group = np.array([codes[g] for g in raw_groups], dtype=np.intp)
    return WeightedDataset(
        feature_names=schema.features,
        features=np.array(feats, dtype=float),
        weight=np.array(weights, dtype=float),
        adjusted=schema.adjusted,
        group=group,
        group_values=group_values,
        label=np.array(labels, dtype=float) if label_idx is not None else None,
    )


def save_dataset(data: WeightedDataset, path) -> None:
    """Write a dataset as the canonical weighted-dataset CSV."""
    path = Path(path)
    header = list(data.feature_names)
    if data.group is not None:
        header.append(GROUP_COL)
    if data.label is not None:
        header.append(LABEL_COL)
    header.append(WEIGHT_COL)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(data.n_samples):
            row = [repr(float(x)) for x in data.features[i]]
            if data.group is not None:
                row.append(data.group_values[data.group[i]])
            if data.label is not None:
                row.append(repr(float(data.label[i])))
            row.append(repr(float(data.weight[i])))
            writer.writerow(row)


def save_histogram(hist: Histogram, path) -> None:
    path = Path(path)
    d = hist.support.dim
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"point_{k}" for k in range(d)] + ["mass"])
        for i in range(hist.support.size):
            row = [repr(float(x)) for x in hist.support.points[i]]
            writer.writerow(row + [repr(float(hist.mass[i]))])


def load_histogram(path) -> Histogram:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"no such file: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError("empty distribution") from None
        d = len(header) - 1
        if d < 1 or header[-1] != "mass" or header[:-1] != [f"point_{k}" for k in range(d)]:
            raise ValidationError("histogram header must be point_0..point_{d-1},mass")
        points: list[list[float]] = []
        mass: list[float] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise ValidationError(f"line {lineno}: expected {d + 1} fields, got {len(row)}")
            points.append([_parse_float(t, lineno, header[j]) for j, t in enumerate(row[:-1])])
            mass.append(_parse_float(row[-1], lineno, "mass"))
    if not points:
        raise ValidationError("empty distribution")
    return Histogram(Support(np.array(points, dtype=float)), np.array(mass, dtype=float))


def save_coupling(coupling: Coupling, path, source_file: str, target_file: str) -> None:
    """Write nonzero entries as triplets plus a sidecar naming the supports.

    ``source_file`` and ``target_file`` are the (relative) names of two
    histogram CSVs whose point columns define the row and column supports;
    the caller is responsible for writing those files.
    """
    path = Path(path)
    i, j = np.nonzero(coupling.mass)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["src_index", "tgt_index", "mass"])
        for a, b in zip(i, j):
            writer.writerow([int(a), int(b), repr(float(coupling.mass[a, b]))])
    sidecar = {
        "source_support": source_file,
        "target_support": target_file,
        "shape": [coupling.mass.shape[0], coupling.mass.shape[1]],
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2) + "\n")


def load_coupling(path) -> Coupling:
    path = Path(path)
    sidecar_path = path.with_suffix(".json")
    if not path.exists() or not sidecar_path.exists():
        raise ValidationError(f"coupling needs both {path.name} and {sidecar_path.name}")
    try:
        sidecar = json.loads(sidecar_path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid coupling sidecar: {exc}") from exc
    source = load_histogram(path.parent / sidecar["source_support"]).support
    target = load_histogram(path.parent / sidecar["target_support"]).support
    mass = np.zeros((source.size, target.size))
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["src_index", "tgt_index", "mass"]:
            raise ValidationError("coupling header must be src_index,tgt_index,mass")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValidationError(f"line {lineno}: expected 3 fields, got {len(row)}")
            a, b = int(row[0]), int(row[1])
            if not (0 <= a < source.size and 0 <= b < target.size):
                raise ValidationError(f"line {lineno}: index outside the supports")
            mass[a, b] = _parse_float(row[2], lineno, "mass")
    return Coupling(source, target, mass)


def load_scores(path, expected_rows: int | None = None) -> np.ndarray:
    """Read one score per line (optional ``score`` header), values in [0, 1]."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"no such file: {path}")
    lines = [ln.strip() for ln in path.read_text().splitlines() if ln.strip()]
    if lines and lines[0] == "score":
        lines = lines[1:]
    scores = np.array(
        [_parse_float(tok, i + 1, "score") for i, tok in enumerate(lines)], dtype=float
    )
    if expected_rows is not None and scores.size != expected_rows:
        raise ValidationError(f"score file has {scores.size} rows, expected {expected_rows}")
    if scores.size and ((scores < 0.0) | (scores > 1.0)).any():
        raise ValidationError("scores must lie in [0, 1]")
    return scores


def build_support(data: WeightedDataset, adjusted_features=None) -> Support:
    """Support of the observed adjusted-feature tuples, canonical order."""
    names = tuple(adjusted_features) if adjusted_features is not None else data.adjusted
    return Support.from_points(data.feature_block(names))


def discretize_floor(values) -> np.ndarray:
    """Elementwise floor, the discretization used throughout."""
    arr = np.asarray(values, dtype=float)
    if not np.isfinite(arr).all():
        raise ValidationError("non-finite values cannot be discretized")
    return np.floor(arr)


def feature_selection_by_tv(
    data: WeightedDataset,
    candidate_features,
    threshold: float = 0.08,
) -> tuple[tuple[str, ...], dict[str, float]]:
    """Split candidates into adjusted and neutral by marginal group TV.

    Computes the group-wise TV of each candidate's one-dimensional
    marginal and selects the features whose TV exceeds the threshold.
    Returns the selection and the full TV table.
    """
    table = {name: s_wise_tv(data, feature_cols=(name,)) for name in candidate_features}
    selected = tuple(name for name in candidate_features if table[name] > threshold)
    return selected, table


def cost_weights_from_ranges(data: WeightedDataset, adjusted_features=None) -> np.ndarray:
    """Reciprocal feature ranges, the ground-cost weights of the studies."""
    names = tuple(adjusted_features) if adjusted_features is not None else data.adjusted
    block = data.feature_block(names)
    spread = block.max(axis=0) - block.min(axis=0)
    flat = np.flatnonzero(spread <= 0.0)
    if flat.size:
        raise ValidationError(
            f"constant feature cannot be adjusted: {names[int(flat[0])]!r}"
        )
    return 1.0 / spread


# ---------------------------------------------------------------------------
# census income dataset
# ---------------------------------------------------------------------------

_ADULT_COLUMNS = (
    "age",
    "workclass",
    "fnlwgt",
    "education",
    "education-num",
    "marital-status",
    "occupation",
    "relationship",
    "race",
    "sex",
    "capital-gain",
    "capital-loss",
    "hours-per-week",
    "native-country",
    "income",
)

#: The five numeric features every census study in this package uses.
ADULT_FEATURES = ("age", "education-num", "capital-gain", "capital-loss", "hours-per-week")

_FETCH_HINT = (
    "census income dataset not found at {path}; fetch adult.data and "
    "adult.test from the UCI repository into one directory and pass that "
    "directory (see the README section 'Census data' for the exact "
    "commands and checksum step)"
)


def load_adult(path, s_name: str) -> tuple[WeightedDataset, dict[str, int]]:
    """Load the census income files and select the protected attribute.

    ``path`` may be a directory holding ``adult.data`` and/or
    ``adult.test`` or a single data file. With ``s_name='race'`` only rows
    whose race is Black or White are kept; with ``s_name='sex'`` all rows
    are kept. Rows with missing values in any used column are dropped and
    counted. The returned report maps ``rows_read``, ``rows_kept``, and
    ``rows_dropped`` to their counts.
    """
    if s_name not in ("race", "sex"):
        raise ValidationError("s_name must be 'race' or 'sex'")
    path = Path(path)
    if path.is_dir():
        files = [p for p in (path / "adult.data", path / "adult.test") if p.exists()]
        if not files:
            raise ValidationError(_FETCH_HINT.format(path=path))
    elif path.exists():
        files = [path]
    else:
        raise ValidationError(_FETCH_HINT.format(path=path))
    used = ADULT_FEATURES + (s_name, "income")
    used_idx = [_ADULT_COLUMNS.index(c) for c in used]
    feat_idx = [_ADULT_COLUMNS.index(c) for c in ADULT_FEATURES]
    s_idx = _ADULT_COLUMNS.index(s_name)
    y_idx = _ADULT_COLUMNS.index("income")
    feats: list[list[float]] = []
    raw_groups: list[str] = []
    labels: list[float] = []
    rows_read = 0
    rows_dropped = 0
    for file in files:
        with file.open() as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("|"):
                    continue
                tokens = [t.strip() for t in line.split(",")]
                rows_read += 1
                if len(tokens) != len(_ADULT_COLUMNS) or any(
                    tokens[i] in ("", "?") for i in used_idx
                ):
                    rows_dropped += 1
                    continue
                group = tokens[s_idx]
                if s_name == "race" and group not in ("Black", "White"):
                    rows_dropped += 1
                    continue
                feats.append([float(tokens[i]) for i in feat_idx])
                raw_groups.append(group)
                labels.append(1.0 if tokens[y_idx].rstrip(".") == ">50K" else 0.0)
    if not feats:
        raise ValidationError("empty distribution")
    group_values = tuple(sorted(set(raw_groups)))
    codes = {v: i for i, v in enumerate(group_values)}
    data = WeightedDataset(
        feature_names=ADULT_FEATURES,
        features=np.array(feats, dtype=float),
        weight=np.ones(len(feats)),
        adjusted=ADULT_FEATURES,
        group=np.array([codes[g] for g in raw_groups], dtype=np.intp),
        group_values=group_values,
        label=np.array(labels, dtype=float),
    )
    report = {"rows_read": rows_read, "rows_kept": len(feats), "rows_dropped": rows_dropped}
    return data, report
