"""Config-driven benchmark grid: methods x sample fractions x repetitions.

Config files are line-oriented ``key = value`` text (``#`` starts a
comment, lists are comma-separated)::

    dataset = concentric-rings      # a shape name, or a path to a CSV file
    n = 800
    methods = fast, espec, nystrom, budget
    sample_fractions = 0.05, 0.1
    repetitions = 10
    seed = 0
    reference = exact-spectral      # or ground-truth-labels
    nystrom.kernel = fixed-sigma
    nystrom.sigma = 0.8
"""

import configparser
import csv
import hashlib
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import approx
from .datasets import SHAPES, ShapeSpec, gen_synthetic, load_csv
from .exact import cluster_similarity, spectral_cluster
from .metrics import misclustering_rate, perturbation_report
from .similarity import KernelSpec, build_similarity, degrees, normalized_laplacian

__all__ = [
    "METHODS",
    "MethodSpec",
    "ExperimentConfig",
    "ExperimentRecord",
    "parse_config",
    "load_config",
    "kernel_from_options",
    "cell_seed",
    "load_dataset",
    "compute_reference",
    "run_method",
    "run_experiment",
    "emit_records",
    "read_records",
    "summarize",
    "perturbation_run",
    "PERTURB_METHODS",
    "CSV_HEADER",
]

log = logging.getLogger(__name__)

METHODS = ("exact", "fast", "espec", "nystrom", "budget")
REFERENCES = ("exact-spectral", "ground-truth-labels")
CSV_HEADER = ["dataset", "method", "sample_fraction", "rep", "seed", "wall_seconds", "error"]

# kernels used when a method's config leaves it unset
DEFAULT_KERNELS = {
    "exact": KernelSpec.self_tuned(),
    "fast": KernelSpec.self_tuned(),
    "espec": KernelSpec.self_tuned(),
    "nystrom": KernelSpec.fixed(1.0),
    "budget": KernelSpec.fixed(1.0),
}
METHOD_PARAMS = {"fast": {"T": 100}, "espec": {"m": 1}}
_KERNEL_KEYS = ("kernel", "sigma", "K", "c", "scaling_convention")


def kernel_from_options(kind=None, sigma=None, K=None, c=None, scaling_convention=None, default=None):
    """KernelSpec from loose options; unspecified kind falls back to ``default``."""
    if kind is None:
        if default is None:
            raise ValueError("no kernel kind given")
        kind = default.kind
        sigma = default.sigma if sigma is None else sigma
        K = default.K if K is None else K
        c = default.c if c is None else c
        scaling_convention = default.scaling_convention if scaling_convention is None else scaling_convention
    if kind == "fixed-sigma":
        return KernelSpec.fixed(1.0 if sigma is None else sigma)
    if kind == "self-tuned":
        return KernelSpec.self_tuned(7 if K is None else K, scaling_convention or "product")
    if kind == "psd-self-tuned":
        return KernelSpec.psd_self_tuned(7 if K is None else K, 1.0 if c is None else c)
    raise ValueError(f"unknown kernel kind {kind!r}")


@dataclass(frozen=True)
class MethodSpec:
    method: str
    kernel: KernelSpec
    params: dict = field(default_factory=dict)


@dataclass
class ExperimentConfig:
    dataset: object  # ShapeSpec or Path
    methods: list
    sample_fractions: list
    repetitions: int = 10
    seed: int = 0
    reference: str = "exact-spectral"
    reference_kernel: KernelSpec = field(default_factory=KernelSpec.self_tuned)
    label_column: str | None = None
    has_header: bool = True

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not self.methods:
            raise ValueError("at least one method is required")
        if not self.sample_fractions:
            raise ValueError("at least one sample fraction is required")
        for f in self.sample_fractions:
            if not 0 < f <= 1:
                raise ValueError(f"sample fractions must be in (0, 1], got {f}")
        if self.reference not in REFERENCES:
            raise ValueError(f"reference must be one of {REFERENCES}")

    @property
    def dataset_id(self):
        if isinstance(self.dataset, ShapeSpec):
            return self.dataset.name
        return Path(self.dataset).stem


@dataclass
class ExperimentRecord:
    dataset: str
    method: str
    sample_fraction: float
    rep: int
    seed: int
    wall_seconds: float
    error: float
    diagnostic: str = ""

    def csv_row(self):
        return [
            self.dataset,
            self.method,
            format(self.sample_fraction, "g"),
            str(self.rep),
            str(self.seed),
            f"{self.wall_seconds:.6f}",
            "nan" if math.isnan(self.error) else f"{self.error:.6f}",
        ]


def _split_list(text):
    return [item.strip() for item in text.split(",") if item.strip()]


def _number(text, key, kind):
    try:
        return kind(text)
    except ValueError:
        raise ValueError(f"config key {key!r}: cannot parse {text!r} as {kind.__name__}") from None


def parse_config(text, base_dir=None):
    """Build an ExperimentConfig from ``key = value`` text."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    cp.optionxform = str
    cp.read_string("[experiment]\n" + text)
    kv = dict(cp["experiment"])

    known = {
        "dataset", "n", "noise", "dataset_seed", "label_column", "has_header", "methods",
        "sample_fractions", "repetitions", "seed", "reference",
    }
    method_keys = {}
    geometry = {}
    for key in list(kv):
        if "." in key:
            head, tail = key.split(".", 1)
            if head == "geometry":
                geometry[tail] = _number(kv.pop(key), key, float)
            elif head in METHODS or head == "reference":
                method_keys.setdefault(head, {})[tail] = kv.pop(key)
            else:
                raise ValueError(f"unknown config key {key!r}")
        elif key not in known:
            raise ValueError(f"unknown config key {key!r}")

    if "dataset" not in kv:
        raise ValueError("config needs a 'dataset' key")
    ds = kv["dataset"]
    if ds in SHAPES:
        dataset = ShapeSpec(
            ds,
            n=_number(kv["n"], "n", int) if "n" in kv else None,
            noise=_number(kv["noise"], "noise", float) if "noise" in kv else None,
            geometry=geometry,
            seed=_number(kv.get("dataset_seed", "0"), "dataset_seed", int),
        )
    else:
        path = Path(ds)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        dataset = path

    methods = []
    for name in _split_list(kv.get("methods", "")):
        if name not in METHODS:
            raise ValueError(f"unknown method {name!r}; choose from {', '.join(METHODS)}")
        opts = method_keys.get(name, {})
        params = dict(METHOD_PARAMS.get(name, {}))
        for key, value in opts.items():
            if key in _KERNEL_KEYS:
                continue
            if key not in params:
                raise ValueError(f"unknown parameter {name}.{key}")
            params[key] = _number(value, f"{name}.{key}", int)
        methods.append(MethodSpec(name, _kernel_from_keys(opts, DEFAULT_KERNELS[name], name), params))

    return ExperimentConfig(
        dataset=dataset,
        methods=methods,
        sample_fractions=[_number(f, "sample_fractions", float) for f in _split_list(kv.get("sample_fractions", ""))],
        repetitions=_number(kv.get("repetitions", "10"), "repetitions", int),
        seed=_number(kv.get("seed", "0"), "seed", int),
        reference=kv.get("reference", "exact-spectral"),
        reference_kernel=_kernel_from_keys(method_keys.get("reference", {}), KernelSpec.self_tuned(), "reference"),
        label_column=kv.get("label_column"),
        has_header=_flag(kv.get("has_header", "true"), "has_header"),
    )


def _flag(text, key):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"config key {key!r}: expected a boolean, got {text!r}")


def _kernel_from_keys(opts, default, owner):
    return kernel_from_options(
        opts.get("kernel"),
        sigma=_number(opts["sigma"], f"{owner}.sigma", float) if "sigma" in opts else None,
        K=_number(opts["K"], f"{owner}.K", int) if "K" in opts else None,
        c=_number(opts["c"], f"{owner}.c", float) if "c" in opts else None,
        scaling_convention=opts.get("scaling_convention"),
        default=default,
    )


def load_config(path):
    path = Path(path)
    return parse_config(path.read_text(), base_dir=path.parent)


def cell_seed(base, method, fraction, rep):
    """Seed of one grid cell: base plus a stable hash of (method, fraction, rep)."""
    key = f"{method}|{format(fraction, 'g')}|{rep}".encode()
    return int(base) + int.from_bytes(hashlib.sha256(key).digest()[:4], "big")


def load_dataset(config):
    if isinstance(config.dataset, ShapeSpec):
        return gen_synthetic(config.dataset)
    return load_csv(config.dataset, has_header=config.has_header, label_column=config.label_column)


def compute_reference(data, config):
    """Reference labeling the errors are measured against."""
    if config.reference == "ground-truth-labels":
        if data.labels is None:
            raise ValueError("reference=ground-truth-labels but the dataset has no labels")
        return np.asarray(data.labels)
    return spectral_cluster(data.values, config.reference_kernel)


def run_method(X, spec, fraction, seed):
    """Run one method; ``fraction`` is the sample share (representatives for fast, pairs for budget)."""
    n = X.shape[0]
    m = spec.method
    if m == "exact":
        return spectral_cluster(X, spec.kernel)
    if m == "fast":
        k = max(2, min(n, math.ceil(fraction * n - 1e-9)))
        return approx.fast_sc(X, k, T=spec.params.get("T", 100), kernel=spec.kernel, seed=seed)
    if m == "espec":
        return approx.espec(X, approx.SampleSpec(fraction, seed), m=spec.params.get("m", 1), kernel=spec.kernel)
    if m == "nystrom":
        return approx.nystrom_sc(X, approx.SampleSpec(fraction, seed), spec.kernel)
    if m == "budget":
        return approx.budget_sc(X, approx.budget_from_fraction(n, fraction), spec.kernel, seed=seed)
    raise ValueError(f"unknown method {m!r}")


def run_experiment(config, data=None):
    """Every (method, fraction, repetition) cell once, in grid order.

    The dataset is materialized and the reference labeling computed once.
    A failing cell yields a record with ``error = nan`` and the exception
    text in ``diagnostic``; the grid always runs to completion.
    """
    if data is None:
        data = load_dataset(config)
    reference = compute_reference(data, config)
    X = data.values
    records = []
    for spec in config.methods:
        for fraction in config.sample_fractions:
            for rep in range(config.repetitions):
                seed = cell_seed(config.seed, spec.method, fraction, rep)
                t0 = time.perf_counter()
                try:
                    labels = run_method(X, spec, fraction, seed)
                    elapsed = time.perf_counter() - t0
                    err, note = misclustering_rate(reference, labels), ""
                except Exception as exc:  # recorded, never fatal
                    elapsed = time.perf_counter() - t0
                    err, note = float("nan"), f"{type(exc).__name__}: {exc}"
                    log.warning("%s fraction=%g rep=%d failed: %s", spec.method, fraction, rep, note)
                records.append(
                    ExperimentRecord(config.dataset_id, spec.method, fraction, rep, seed, elapsed, err, note)
                )
    return records


def emit_records(records, path):
    """Write records as CSV (header plus one row per record, grid order)."""
    if not records:
        raise ValueError("no records to write")
    with open(path, "w", newline="") as fh:
        _write(records, fh)
    return Path(path)


def _write(records, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow(r.csv_row())


def read_records(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected header {header}")
        return [
            ExperimentRecord(d, m, float(f), int(r), int(s), float(w), float(e))
            for d, m, f, r, s, w, e in reader
        ]


def summarize(records):
    """Median wall time and median error per (method, fraction), failures excluded from the medians."""
    groups = {}
    for r in records:
        groups.setdefault((r.method, r.sample_fraction), []).append(r)
    rows = []
    for (method, fraction), rs in groups.items():
        ok = [r for r in rs if not math.isnan(r.error)]
        rows.append(
            {
                "method": method,
                "sample_fraction": fraction,
                "runs": len(rs),
                "failures": len(rs) - len(ok),
                "median_seconds": float(np.median([r.wall_seconds for r in ok])) if ok else float("nan"),
                "median_error": float(np.median([r.error for r in ok])) if ok else float("nan"),
            }
        )
    return rows


PERTURB_METHODS = ("budget", "nystrom")


def perturbation_run(X, method, fraction, kernel, seed=0):
    """PerturbationReport comparing exact and approximate Laplacians built with the same kernel."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    W = build_similarity(X, kernel)
    d = degrees(W)
    L = normalized_laplacian(W)
    ref = cluster_similarity(W, seed=seed).labels
    if method == "budget":
        Wt = approx.budget_matrix(X, approx.budget_from_fraction(n, fraction), kernel, seed=seed)
        dt = degrees(Wt)
        Lt = normalized_laplacian(Wt)
        Lt = Lt.toarray() if hasattr(Lt, "toarray") else Lt
        test = cluster_similarity(Wt, seed=seed).labels
    elif method == "nystrom":
        sample = approx.SampleSpec(fraction, seed)
        f, perm = approx.nystrom_factors(X, sample.draw(n), kernel, normalize=True)
        inv = np.argsort(perm)
        Wn = f.reconstruct()[np.ix_(inv, inv)]
        Lt = np.eye(n) - 0.5 * (Wn + Wn.T)
        dt = f.degrees[inv]
        test = approx.nystrom_sc(X, sample, kernel)
    else:
        raise ValueError(f"perturbation diagnostics support {PERTURB_METHODS}, not {method!r}")
    return perturbation_report(L, Lt, ref, test, degrees=d, degrees_tilde=dt, seed=seed)
