"""Command-line entry point: ``spectral-approx {gen,cluster,bench,attrition,perturb}``."""

import argparse
import csv
import json
import logging
import sys
import time

import numpy as np

from . import bench
from .attrition import SUBGROUPS, cluster_attrition, cluster_table, encode_attrition, gen_attrition_standin, holdout_analysis
from .datasets import SHAPES, ShapeSpec, gen_synthetic, load_csv, write_csv
from .exact import spectral_cluster
from .metrics import PerturbationReport, misclustering_rate

PROG = "spectral-approx"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # one-line diagnostic, exit status 2
        self.exit(2, f"{self.prog}: error: {message}\n")


def _geometry(items, parser):
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        try:
            if not sep:
                raise ValueError
            out[key.strip()] = float(value)
        except ValueError:
            parser.error(f"--geometry expects KEY=NUMBER, got {item!r}")
    return out


def _add_data_args(p):
    src = p.add_argument_group("data (one of --shape / --data)")
    src.add_argument("--shape", choices=SHAPES)
    src.add_argument("--n", type=int, help="points to generate (default: the shape's benchmark size)")
    src.add_argument("--noise", type=float)
    src.add_argument("--geometry", action="append", metavar="KEY=VALUE", help="override a geometry constant")
    src.add_argument("--data-seed", type=int, default=0, help="seed of the generated dataset")
    src.add_argument("--data", metavar="CSV", help="read points from a CSV file with a header row")
    src.add_argument("--label-column", help="ground-truth column of --data")


def _add_kernel_args(p):
    k = p.add_argument_group("kernel")
    k.add_argument("--kernel", choices=("fixed-sigma", "self-tuned", "psd-self-tuned"))
    k.add_argument("--sigma", type=float)
    k.add_argument("--K", type=int, help="neighbor index of self-tuned kernels")
    k.add_argument("--c", type=float, help="bandwidth of the psd-self-tuned kernel")
    k.add_argument("--scaling-convention", choices=("product", "product_squared"))


def _kernel(args, default):
    return bench.kernel_from_options(args.kernel, args.sigma, args.K, args.c, args.scaling_convention, default=default)


def _load(args, parser):
    if (args.shape is None) == (args.data is None):
        parser.error("give exactly one of --shape and --data")
    if args.data:
        return load_csv(args.data, has_header=True, label_column=args.label_column), args.data
    spec = ShapeSpec(args.shape, n=args.n, noise=args.noise, geometry=_geometry(args.geometry, parser), seed=args.data_seed)
    return gen_synthetic(spec), spec.name


def build_parser():
    parser = _Parser(prog=PROG, description="Exact and approximate two-way spectral clustering.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="write a synthetic dataset as CSV")
    p.add_argument("--shape", choices=SHAPES, required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--geometry", action="append", metavar="KEY=VALUE")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-", help="output path (default stdout)")

    p = sub.add_parser("cluster", help="run one method on one dataset and print JSON")
    _add_data_args(p)
    _add_kernel_args(p)
    p.add_argument("--method", choices=bench.METHODS, default="exact")
    p.add_argument("--fraction", type=float, default=0.1, help="sample / representative / pair fraction")
    p.add_argument("--m", type=int, default=1, help="eSPEC vote size")
    p.add_argument("--T", type=int, default=100, help="k-means iterations for fast SC")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reference", choices=("exact", "labels", "none"), default="exact")
    p.add_argument("--out", default="-")

    p = sub.add_parser("bench", help="run a benchmark grid from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="override the config's base seed")
    p.add_argument("--out", default="-")
    p.add_argument("--summary", action="store_true", help="print per-cell medians instead of every run")

    p = sub.add_parser("attrition", help="cluster the synthetic attrition cohort and test attritor proportions")
    p.add_argument("--n", type=int, default=4528)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--subgroup", choices=tuple(SUBGROUPS), default="all")
    p.add_argument("--drop-movers", action="store_true")
    p.add_argument("--movers-as", choices=("stayer", "leaver"), default="stayer",
                   help="how kept movers count in the Z-test")
    p.add_argument("--no-dummy", action="store_true", help="omit the uniform dummy column")
    p.add_argument("--K", type=int, default=7, help="self-tuning neighbor index")
    p.add_argument("--ztest", action="store_true", help="append the two-proportion Z-test")
    p.add_argument("--holdout", type=float, metavar="FRACTION",
                   help="cluster this fraction and predict the rest")
    p.add_argument("--out", default="-")

    p = sub.add_parser("perturb", help="eigenvector perturbation diagnostics as CSV")
    _add_data_args(p)
    _add_kernel_args(p)
    p.add_argument("--method", choices=bench.PERTURB_METHODS, default="budget")
    p.add_argument("--fractions", default="0.5", help="comma-separated sample fractions")
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    return parser


class _Output:
    def __init__(self, path):
        self.path = path

    def __enter__(self):
        self.fh = sys.stdout if self.path == "-" else open(self.path, "w", newline="")
        return self.fh

    def __exit__(self, *exc):
        if self.fh is not sys.stdout:
            self.fh.close()
        else:
            self.fh.flush()


def cmd_gen(args, parser):
    data = gen_synthetic(ShapeSpec(args.shape, n=args.n, noise=args.noise, geometry=_geometry(args.geometry, parser), seed=args.seed))
    with _Output(args.out) as fh:
        write_csv(data, fh)
    return 0


def cmd_cluster(args, parser):
    data, name = _load(args, parser)
    spec = bench.MethodSpec(args.method, _kernel(args, bench.DEFAULT_KERNELS[args.method]), {"T": args.T, "m": args.m})
    t0 = time.perf_counter()
    labels = bench.run_method(data.values, spec, args.fraction, args.seed)
    elapsed = time.perf_counter() - t0
    out = {
        "dataset": str(name),
        "method": args.method,
        "kernel": spec.kernel.describe(),
        "sample_fraction": None if args.method == "exact" else args.fraction,
        "seed": args.seed,
        "n": data.n,
        "wall_seconds": round(elapsed, 6),
        "labels": [int(v) for v in labels],
    }
    if args.reference == "labels":
        if data.labels is None:
            parser.error("--reference labels needs labeled data")
        out["error"] = misclustering_rate(data.labels, labels)
    elif args.reference == "exact":
        out["error"] = misclustering_rate(spectral_cluster(data.values), labels)
    with _Output(args.out) as fh:
        json.dump(out, fh)
        fh.write("\n")
    return 0


def cmd_bench(args, parser):
    config = bench.load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    records = bench.run_experiment(config)
    with _Output(args.out) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if args.summary:
            rows = bench.summarize(records)
            cols = list(rows[0])
            writer.writerow(cols)
            for r in rows:
                writer.writerow([format(r[c], "g") if isinstance(r[c], float) else r[c] for c in cols])
        else:
            writer.writerow(bench.CSV_HEADER)
            for r in records:
                writer.writerow(r.csv_row())
    return 0


def cmd_attrition(args, parser):
    from .similarity import KernelSpec

    records = gen_attrition_standin(args.n, args.seed)
    data = encode_attrition(
        records, include_dummy=not args.no_dummy, subgroup=args.subgroup, drop_movers=args.drop_movers, seed=args.seed
    )
    kernel = KernelSpec.self_tuned(args.K)
    with _Output(args.out) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if args.holdout is not None:
            rep = holdout_analysis(data, args.holdout, kernel, seed=args.seed, movers_as=args.movers_as)
            writer.writerows(rep.rows())
            writer.writerow(["predicates", ";".join(f"{k}={v:g}" for k, v in rep.predicates.items())])
            writer.writerow(["agreement", f"{rep.agreement:.6f}"])
            z = rep.ztest
        else:
            labels = cluster_attrition(data, kernel)
            table = cluster_table(data.labels, labels, movers_as=args.movers_as)
            writer.writerows(table.rows())
            writer.writerow(["attritors", *table.attritors])
            z = table.ztest
        if args.ztest:
            writer.writerow(["z", f"{z.z:.6f}"])
            writer.writerow(["direction", "cluster1 " + ("larger" if z.direction == "greater" else "smaller")])
            writer.writerow(["p_one_tailed", f"{z.p_one_tailed:.6g}"])
            if z.degenerate:
                writer.writerow(["degenerate", "pooled proportion is 0 or 1"])
    return 0


def cmd_perturb(args, parser):
    data, name = _load(args, parser)
    try:
        fractions = [float(f) for f in args.fractions.split(",") if f.strip()]
    except ValueError:
        parser.error(f"bad --fractions {args.fractions!r}")
    kernel = _kernel(args, bench.DEFAULT_KERNELS[args.method])
    with _Output(args.out) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["dataset", "method", "sample_fraction", "rep", "seed", *PerturbationReport.header(), "vec_dist_sq"])
        for fraction in fractions:
            for rep in range(args.reps):
                seed = bench.cell_seed(args.seed, args.method, fraction, rep)
                r = bench.perturbation_run(data.values, args.method, fraction, kernel, seed=seed)
                writer.writerow(
                    [name, args.method, format(fraction, "g"), rep, seed]
                    + [f"{v:.6e}" for v in r.row()]
                    + [f"{r.vec_dist ** 2:.6e}"]
                )
    return 0


COMMANDS = {
    "gen": cmd_gen,
    "cluster": cmd_cluster,
    "bench": cmd_bench,
    "attrition": cmd_attrition,
    "perturb": cmd_perturb,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, parser)
    except (ValueError, RuntimeError, OSError, np.linalg.LinAlgError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"{PROG}: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
