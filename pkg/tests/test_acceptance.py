"""End-to-end acceptance checks, one test per criterion.

Each test records its outcome in ``conftest.ACCEPTANCE`` (reported as one
PASS/FAIL line per criterion at the end of the run), prints the same line,
and then asserts.
"""

import itertools
import time

import numpy as np
from scipy.integrate import quad

from conftest import ACCEPTANCE
from spectral_approx.approx import SampleSpec, budget_from_fraction, budget_sc, espec, fast_sc, nystrom_sc
from spectral_approx.bench import parse_config, perturbation_run, run_experiment, summarize
from spectral_approx.cli import main
from spectral_approx.datasets import ShapeSpec, gen_synthetic
from spectral_approx.exact import cluster_similarity, kmeans, spectral_cluster, split_eigenvector
from spectral_approx.linalg import frobenius_norm, sym_eig
from spectral_approx.metrics import misclustering_rate, normal_cdf, perturbation_report, two_prop_ztest
from spectral_approx.similarity import KernelSpec, build_similarity, ncut, normalized_laplacian

APPROX = ("fast", "espec", "nystrom", "budget")


def verdict(num, ok, detail):
    ACCEPTANCE[num] = (bool(ok), detail)
    print(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def grid(text):
    return summarize(run_experiment(parse_config(text)))


def medians(rows):
    return {(r["method"], r["sample_fraction"]): r for r in rows}


def test_criterion_01_exact_recovers_ground_truth():
    sets = [
        ("gaussian-strips", 200),
        ("half-rings", 373),
        ("concentric-rings", 800),
        ("tangent-spheres", 2000),
        ("interlocked-rings", 2000),
        ("concentric-spheres", 2000),
    ]
    worst_err, worst_time, bad = 0.0, 0.0, []
    for shape, n in sets:
        for seed in range(5):
            data = gen_synthetic(ShapeSpec(shape, n=n, seed=seed))
            t0 = time.perf_counter()
            labels = spectral_cluster(data.values)
            elapsed = time.perf_counter() - t0
            err = misclustering_rate(data.labels, labels)
            worst_err, worst_time = max(worst_err, err), max(worst_time, elapsed)
            if err != 0 or elapsed > 60:
                bad.append(f"{shape}/s{seed}: rho={err:g} t={elapsed:.1f}s")
    verdict(1, not bad, f"30 runs, max rho={worst_err:g}, max time={worst_time:.2f}s" + (f"; {bad}" if bad else ""))


def test_criterion_02_strips_table():
    rows = medians(
        grid(
            """
            dataset = gaussian-strips
            methods = fast, espec, nystrom, budget
            sample_fractions = 0.15, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0
            repetitions = 10
            nystrom.sigma = 1
            budget.sigma = 1
            """
        )
    )
    floors = {"fast": 0.2, "budget": 0.15, "nystrom": 0.4, "espec": 0.3}
    checked = {k: r["median_error"] for k, r in rows.items() if k[1] >= floors[k[0]] - 1e-12}
    failures = {k: r["failures"] for k, r in rows.items() if k in checked and r["failures"]}
    bad = {k: v for k, v in checked.items() if not v <= 0.02}
    verdict(
        2,
        not bad and not failures,
        f"{len(checked)} cells, max median error={max(checked.values()):g}" + (f"; over: {bad}" if bad else ""),
    )


def test_criterion_03_half_rings_nystrom():
    (row,) = grid(
        """
        dataset = half-rings
        methods = nystrom
        sample_fractions = 0.15
        repetitions = 10
        nystrom.sigma = 0.2
        """
    )
    ok = row["failures"] == 0 and row["median_error"] <= 0.01
    verdict(3, ok, f"Nystrom sigma=0.2 at 15%: median error={row['median_error']:g}")


def test_criterion_04_rings_ten_percent():
    rows = grid(
        """
        dataset = concentric-rings
        methods = fast, espec, nystrom, budget
        sample_fractions = 0.1
        repetitions = 10
        nystrom.sigma = 0.8
        budget.sigma = 0.8
        """
    )
    errs = {r["method"]: r["median_error"] for r in rows}
    ok = all(r["failures"] == 0 for r in rows) and all(e <= 0.005 for e in errs.values())
    verdict(4, ok, "median errors " + ", ".join(f"{m}={e:g}" for m, e in errs.items()))


def test_criterion_05_tangent_spheres_speed_and_accuracy():
    data = gen_synthetic(ShapeSpec("tangent-spheres", n=2000, seed=0))
    X = data.values
    exact_times = []
    for _ in range(3):
        t0 = time.perf_counter()
        ref = spectral_cluster(X)
        exact_times.append(time.perf_counter() - t0)
    exact_time = float(np.median(exact_times))
    sigma = KernelSpec.fixed(1.0)
    runs = {
        "fast": lambda s: fast_sc(X, 100, seed=s),
        "espec": lambda s: espec(X, SampleSpec(0.05, s)),
        "nystrom": lambda s: nystrom_sc(X, SampleSpec(0.05, s), sigma),
        "budget": lambda s: budget_sc(X, budget_from_fraction(X.shape[0], 0.05), sigma, seed=s),
    }
    summary, ok = [], True
    for method, fn in runs.items():
        errs, times = [], []
        for s in range(10):
            t0 = time.perf_counter()
            labels = fn(s)
            times.append(time.perf_counter() - t0)
            errs.append(misclustering_rate(ref, labels))
        med_err, med_t = float(np.median(errs)), float(np.median(times))
        ok &= med_err <= 0.02 and med_t < exact_time
        summary.append(f"{method} err={med_err:.4f} t={med_t:.3f}s")
    verdict(5, ok, f"exact t={exact_time:.3f}s; " + "; ".join(summary))


def test_criterion_06_degenerate_equivalence():
    shapes = ["gaussian-strips", "half-rings", "concentric-rings", "concentric-spheres", "interlocked-rings"]
    mismatches = []
    for s in range(10):
        X = gen_synthetic(ShapeSpec(shapes[s % 5], n=150, seed=s)).values
        ref = spectral_cluster(X)
        fixed = KernelSpec.fixed(0.5)
        checks = {
            "espec": misclustering_rate(ref, espec(X, SampleSpec(1.0, s))),
            "nystrom": misclustering_rate(spectral_cluster(X, fixed), nystrom_sc(X, SampleSpec(1.0, s), fixed)),
            "fast": misclustering_rate(ref, fast_sc(X, 150, seed=s)),
        }
        mismatches += [f"{m}@{s}:{e:g}" for m, e in checks.items() if e != 0]
    verdict(6, not mismatches, f"30 comparisons, {len(mismatches)} mismatches {mismatches or ''}".rstrip())


def _brute_kmeans(X):
    best = np.inf
    for lab in itertools.product((0, 1), repeat=len(X)):
        lab = np.array(lab)
        if 0 < lab.sum() < len(X):
            best = min(best, sum(float(((X[lab == j] - X[lab == j].mean(0)) ** 2).sum()) for j in (0, 1)))
    return best


def _planted_graph(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 13))
    a = int(rng.integers(2, n - 1))
    block = rng.permutation(np.repeat([0, 1], [a, n - a]))
    W = np.where(block[:, None] == block[None, :], rng.uniform(0.3, 1.0, (n, n)), rng.uniform(0.0, 0.05, (n, n)))
    W = (W + W.T) / 2
    np.fill_diagonal(W, 1.0)
    return W


def _sweep_cost(v):
    s = np.sort(v)
    return min(((s[:c] - s[:c].mean()) ** 2).sum() + ((s[c:] - s[c:].mean()) ** 2).sum() for c in range(1, len(s)))


def _split_cost(v, lab):
    return sum(((v[lab == k] - v[lab == k].mean()) ** 2).sum() for k in (0, 1))


def test_criterion_07_oracles():
    km_bad = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 7))
        X = np.vstack([rng.normal(size=(n // 2, 2)) * 0.3, rng.normal(size=(n - n // 2, 2)) * 0.3 + [3.0, 0.0]])
        km_bad += kmeans(X, 2, seed=seed).objective > _brute_kmeans(X) * (1 + 1e-9)
    nc_bad = 0
    for seed in range(20):
        W = _planted_graph(seed)
        n = W.shape[0]
        best = min(ncut(W, np.array([(m >> i) & 1 for i in range(n)])) for m in range(1, 2 ** (n - 1)))
        nc_bad += ncut(W, cluster_similarity(W).labels) > best * (1 + 1e-9)
    sp_bad = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        v = rng.normal(size=int(rng.integers(2, 60)))
        sp_bad += _split_cost(v, split_eigenvector(v)) > _sweep_cost(v) * (1 + 1e-9) + 1e-12
    verdict(
        7,
        km_bad == nc_bad == sp_bad == 0,
        f"kmeans {20 - km_bad}/20, ncut {20 - nc_bad}/20, split {100 - sp_bad}/100 match their oracles",
    )


def test_criterion_08_first_order_perturbation():
    found, seed, details, ok = 0, 0, [], True
    while found < 5:
        rng = np.random.default_rng(seed)
        seed += 1
        n = int(rng.integers(8, 16))
        L = normalized_laplacian(build_similarity(rng.normal(size=(n, 2)), KernelSpec.fixed(1.5)))
        lam = sym_eig(L, which="full").values
        if not (lam[2] - lam[1] >= 0.1 and lam[1] - lam[0] >= lam[2] - lam[1]):
            continue
        found += 1
        E0 = rng.normal(size=(n, n))
        E0 = (E0 + E0.T) / 2
        norm2 = float(np.max(np.abs(np.linalg.eigvalsh(E0))))
        lab = np.zeros(n, dtype=int)
        lab[0] = 1
        t = 1e-6
        r = perturbation_report(L, L + t * E0, lab, lab)
        bound = norm2 / r.eigengap * 1.01
        ok &= r.vec_dist / t <= bound
        details.append(f"{r.vec_dist / t:.2f}<={bound:.2f}")
    verdict(8, ok, "vec_dist/t vs bound: " + ", ".join(details))


def test_criterion_09_budget_misclustering_vs_vector_distance():
    ok, details = True, []
    for s in range(10):
        rng = np.random.default_rng(s)
        X = np.vstack([rng.normal(0, 0.3, (100, 2)), rng.normal(0, 0.3, (100, 2)) + [3.0, 0.0]])
        r = perturbation_run(X, "budget", 0.5, KernelSpec.fixed(1.0), seed=s)
        ok &= r.rho <= r.vec_dist**2
        details.append(f"{r.rho:g}<={r.vec_dist ** 2:.2e}")
    verdict(9, ok, "rho <= vec_dist^2: " + ", ".join(details))


def test_criterion_10_ztest():
    p1 = two_prop_ztest(48, 148, 699, 1569, direction="less").p_one_tailed
    p2 = two_prop_ztest(173, 173, 810, 1598, direction="greater").p_one_tailed
    density = lambda x: np.exp(-x * x / 2) / np.sqrt(2 * np.pi)
    worst = 0.0
    for z in np.linspace(-6, 6, 241):
        oracle = quad(density, -np.inf, z, epsabs=1e-14)[0] if z <= 0 else 1 - quad(density, z, np.inf, epsabs=1e-14)[0]
        worst = max(worst, abs(normal_cdf(z) - oracle))
    ok = abs(p1 - 0.0023) <= 0.0005 and p2 < 1e-4 and worst <= 1e-6
    verdict(10, ok, f"p={p1:.5f}, p={p2:.2e}, max CDF deviation={worst:.1e}")


def test_criterion_11_eigensolver_quality():
    worst_res = worst_orth = worst_trace = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 51))
        A = rng.normal(size=(n, n))
        M = (A + A.T) / 2
        res = sym_eig(M, which="full")
        normF = frobenius_norm(M)
        resid = np.linalg.norm(M @ res.vectors - res.vectors * res.values, axis=0)
        worst_res = max(worst_res, float(np.max(resid / ((1 + np.abs(res.values)) * normF))))
        worst_orth = max(worst_orth, float(np.max(np.abs(res.vectors.T @ res.vectors - np.eye(n)))))
        scale = max(float(np.sum(np.abs(res.values))), 1e-300)
        worst_trace = max(worst_trace, abs(float(res.values.sum() - np.trace(M))) / scale)
    ok = worst_res <= 1e-8 and worst_orth <= 1e-8 and worst_trace <= 1e-8
    verdict(11, ok, f"max scaled residual={worst_res:.1e}, orthonormality={worst_orth:.1e}, trace={worst_trace:.1e}")


def test_criterion_12_bench_replay(tmp_path, capsys):
    cfg = tmp_path / "grid.cfg"
    cfg.write_text(
        "dataset = concentric-rings\nn = 400\nmethods = exact, fast, espec, nystrom, budget\n"
        "sample_fractions = 0.1, 0.3\nrepetitions = 3\nseed = 5\nnystrom.sigma = 0.8\nbudget.sigma = 0.8\n"
    )
    columns = []
    for name in ("first.csv", "second.csv"):
        assert main(["bench", "--config", str(cfg), "--out", str(tmp_path / name)]) == 0
        lines = (tmp_path / name).read_bytes().splitlines()
        columns.append(b"\n".join(line.rsplit(b",", 1)[1] for line in lines))
    capsys.readouterr()
    ok = columns[0] == columns[1]
    verdict(12, ok, f"{len(columns[0].splitlines()) - 1} rows, error columns byte-identical={ok}")
