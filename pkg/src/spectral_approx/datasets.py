"""Synthetic two-cluster benchmark shapes and CSV input/output."""

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "DataMatrix",
    "ShapeSpec",
    "SHAPES",
    "DEFAULT_SIZES",
    "DEFAULT_NOISE",
    "DEFAULT_GEOMETRY",
    "gen_synthetic",
    "load_csv",
    "emit_csv",
    "write_csv",
]

SHAPES = (
    "gaussian-strips",
    "half-rings",
    "concentric-rings",
    "concentric-spheres",
    "tangent-spheres",
    "interlocked-rings",
)

# full-scale sizes of the benchmark sets
DEFAULT_SIZES = {
    "gaussian-strips": 200,
    "half-rings": 373,
    "concentric-rings": 800,
    "concentric-spheres": 5000,
    "tangent-spheres": 10000,
    "interlocked-rings": 10000,
}

DEFAULT_NOISE = {
    "gaussian-strips": 0.15,
    "half-rings": 0.05,
    "concentric-rings": 0.05,
    "concentric-spheres": 0.05,
    "tangent-spheres": 0.02,
    "interlocked-rings": 0.05,
}

# Project constants; chosen to mirror the usual look of these shapes.
DEFAULT_GEOMETRY = {
    "gaussian-strips": {"length": 3.0, "separation": 2.0},
    "half-rings": {"radius": 1.0, "offset_x": 1.0, "offset_y": 0.5},
    "concentric-rings": {"inner_radius": 0.5, "outer_radius": 2.5},
    "concentric-spheres": {"inner_radius": 1.0, "outer_radius": 2.0},
    "tangent-spheres": {"radius": 1.0, "gap": 0.3},
    "interlocked-rings": {"radius": 1.0, "offset": 1.0},
}


@dataclass
class DataMatrix:
    """n x d data table with optional integer ground-truth labels."""

    values: np.ndarray
    labels: np.ndarray | None = None
    columns: list | None = None
    label_names: list | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("values must be two-dimensional")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("values must be finite")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int)
            if self.labels.shape != (self.n,):
                raise ValueError("labels must have length n")
        if self.columns is not None and len(self.columns) != self.d:
            raise ValueError("columns must name every feature")

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def d(self):
        return self.values.shape[1]


@dataclass(frozen=True)
class ShapeSpec:
    """Parameters of one synthetic dataset; unset fields take the shape's defaults."""

    shape: str
    n: int | None = None
    noise: float | None = None
    geometry: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}; choose from {', '.join(SHAPES)}")
        if self.n is not None and self.n < 4:
            raise ValueError("n must be at least 4")
        if self.noise is not None and self.noise < 0:
            raise ValueError("noise must be nonnegative")
        unknown = set(self.geometry) - set(DEFAULT_GEOMETRY[self.shape])
        if unknown:
            raise ValueError(f"unknown geometry keys for {self.shape}: {sorted(unknown)}")

    @property
    def size(self):
        return DEFAULT_SIZES[self.shape] if self.n is None else self.n

    @property
    def jitter(self):
        return DEFAULT_NOISE[self.shape] if self.noise is None else self.noise

    @property
    def params(self):
        return {**DEFAULT_GEOMETRY[self.shape], **self.geometry}

    @property
    def name(self):
        return f"{self.shape}-n{self.size}-s{self.seed}"


def _unit_sphere(rng, m):
    g = rng.standard_normal((m, 3))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _strips(rng, sizes, p):
    out = []
    for c, m in enumerate(sizes):
        x = rng.uniform(-p["length"] / 2, p["length"] / 2, m)
        y = np.full(m, (c - 0.5) * p["separation"])
        out.append(np.column_stack([x, y]))
    return out, p["separation"]


def _half_rings(rng, sizes, p):
    r = p["radius"]
    t0 = rng.uniform(0.0, math.pi, sizes[0])
    t1 = rng.uniform(math.pi, 2 * math.pi, sizes[1])
    a = np.column_stack([r * np.cos(t0), r * np.sin(t0)])
    b = np.column_stack([p["offset_x"] + r * np.cos(t1), p["offset_y"] + r * np.sin(t1)])
    return [a, b], None


def _concentric_rings(rng, sizes, p):
    out = []
    for m, r in zip(sizes, (p["inner_radius"], p["outer_radius"])):
        t = rng.uniform(0.0, 2 * math.pi, m)
        out.append(np.column_stack([r * np.cos(t), r * np.sin(t)]))
    return out, abs(p["outer_radius"] - p["inner_radius"])


def _concentric_spheres(rng, sizes, p):
    out = [r * _unit_sphere(rng, m) for m, r in zip(sizes, (p["inner_radius"], p["outer_radius"]))]
    return out, abs(p["outer_radius"] - p["inner_radius"])


def _tangent_spheres(rng, sizes, p):
    # gap=0 makes the spheres touch at a point
    r = p["radius"]
    out = []
    for m, sx in zip(sizes, (-1.0, 1.0)):
        out.append(r * _unit_sphere(rng, m) + np.array([sx * (r + p["gap"] / 2), 0.0, 0.0]))
    return out, p["gap"]


def _interlocked_rings(rng, sizes, p):
    r = p["radius"]
    t0 = rng.uniform(0.0, 2 * math.pi, sizes[0])
    t1 = rng.uniform(0.0, 2 * math.pi, sizes[1])
    a = np.column_stack([r * np.cos(t0), r * np.sin(t0), np.zeros(sizes[0])])
    b = np.column_stack([p["offset"] + r * np.cos(t1), np.zeros(sizes[1]), r * np.sin(t1)])
    return [a, b], None


_GENERATORS = {
    "gaussian-strips": _strips,
    "half-rings": _half_rings,
    "concentric-rings": _concentric_rings,
    "concentric-spheres": _concentric_spheres,
    "tangent-spheres": _tangent_spheres,
    "interlocked-rings": _interlocked_rings,
}


def _min_gap(parts):
    # coarse check on a subsample; only used to decide whether to warn
    a, b = (part[: min(len(part), 400)] for part in parts)
    diff = a[:, None, :] - b[None, :, :]
    return float(np.sqrt((diff * diff).sum(-1).min()))


def gen_synthetic(spec):
    """Points on the two manifolds of ``spec.shape`` plus isotropic Gaussian jitter.

    Cluster 0 occupies the first ceil(n/2) rows, cluster 1 the rest.
    Deterministic for a given seed.
    """
    n = spec.size
    sizes = ((n + 1) // 2, n // 2)
    rng = np.random.default_rng(spec.seed)
    parts, gap = _GENERATORS[spec.shape](rng, sizes, spec.params)
    if gap is None:
        gap = _min_gap(parts)
    noise = spec.jitter
    if noise > 0 and 6 * noise >= gap:
        warnings.warn(
            f"{spec.shape}: noise {noise:g} is large relative to the cluster gap {gap:g}; "
            "clusters may overlap",
            stacklevel=2,
        )
    X = np.vstack(parts)
    if noise > 0:
        X = X + rng.normal(0.0, noise, X.shape)
    labels = np.repeat([0, 1], sizes)
    return DataMatrix(X, labels)


def emit_csv(data, path, label_column="label"):
    """Write a DataMatrix as CSV: header row, 17 significant digits, UNIX newlines."""
    with open(path, "w", newline="") as fh:
        write_csv(data, fh, label_column)
    return Path(path)


def write_csv(data, fh, label_column="label"):
    """Same as :func:`emit_csv` but onto an open text stream."""
    cols = data.columns or [f"x{j}" for j in range(data.d)]
    header = list(cols)
    if data.labels is not None:
        header.append(label_column)
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    for i in range(data.n):
        row = [format(v, ".17g") for v in data.values[i]]
        if data.labels is not None:
            lab = data.labels[i]
            row.append(data.label_names[lab] if data.label_names else str(int(lab)))
        writer.writerow(row)


def load_csv(path, has_header=True, label_column=None):
    """Read a numeric CSV table, optionally splitting off one label column."""
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = rows.pop(0) if has_header else None
    if label_column is not None and header is None:
        raise ValueError("label_column needs a header row")
    width = len(header) if header else len(rows[0])
    for lineno, row in enumerate(rows, start=2 if has_header else 1):
        if len(row) != width:
            raise ValueError(f"{path}:{lineno}: ragged row ({len(row)} fields, expected {width})")
    label_idx = None
    if label_column is not None:
        if label_column not in header:
            raise ValueError(f"{path}: no label column {label_column!r}")
        label_idx = header.index(label_column)
    feat_idx = [j for j in range(width) if j != label_idx]
    values = np.empty((len(rows), len(feat_idx)))
    for i, row in enumerate(rows):
        for out_j, j in enumerate(feat_idx):
            try:
                values[i, out_j] = float(row[j])
            except ValueError:
                raise ValueError(f"{path}: non-numeric cell {row[j]!r} in row {i + 1}") from None
    labels = label_names = None
    if label_idx is not None:
        raw = [row[label_idx].strip() for row in rows]
        try:
            labels = np.array([int(s) for s in raw])
        except ValueError:
            label_names = sorted(set(raw))
            code = {s: c for c, s in enumerate(label_names)}
            labels = np.array([code[s] for s in raw])
    columns = [header[j] for j in feat_idx] if header else None
    return DataMatrix(values, labels, columns, label_names)
