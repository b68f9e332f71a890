"""Employee-attrition survey records: encoding, a synthetic stand-in cohort and cluster analyses.

Each record holds six survey answers (household income bracket, marital
status, children, age of youngest child, other dependents, number of
dissatisfaction complaints) and an employment status: stayer, mover
(changed workplace) or leaver.
"""

import math
from dataclasses import dataclass

import numpy as np

from .datasets import DataMatrix
from .exact import spectral_cluster
from .metrics import two_prop_ztest
from .similarity import KernelSpec

__all__ = [
    "INCOME_BRACKETS",
    "STATUSES",
    "SUBGROUPS",
    "FEATURES",
    "AttritionRecord",
    "encode_attrition",
    "gen_attrition_standin",
    "ClusterTable",
    "cluster_table",
    "cluster_attrition",
    "HoldoutReport",
    "holdout_analysis",
]

# survey order; encoded as the list index
INCOME_BRACKETS = (
    "under 15,000",
    "15,000-24,999",
    "25,000-34,999",
    "35,000-49,999",
    "50,000-59,999",
    "60,000-74,999",
    "75,000-99,999",
    "100,000 or more",
)
STATUSES = ("stayer", "mover", "leaver")
MARITAL = {0: "never married", 1: "married", 2: "separated"}
NO_CHILD_AGE = -1
FEATURES = ("income", "marital", "children", "youngest_age", "other_dependents", "dissatisfaction")
MAX_DISSATISFACTION = 3

SUBGROUPS = {
    "all": lambda r: True,
    "unmarried": lambda r: r.marital == 0,
    "married": lambda r: r.marital == 1,
    "separated": lambda r: r.marital == 2,
    "childless": lambda r: r.num_children == 0,
    "with-children": lambda r: r.num_children > 0,
}


@dataclass(frozen=True)
class AttritionRecord:
    income_bracket: str
    marital: int
    num_children: int
    youngest_age: int
    other_dependents: int
    dissatisfaction: int
    status: str

    def __post_init__(self):
        if self.income_bracket not in INCOME_BRACKETS:
            raise ValueError(f"unknown income bracket {self.income_bracket!r}")
        if self.marital not in MARITAL:
            raise ValueError(f"marital code must be 0, 1 or 2, got {self.marital}")
        if self.num_children < 0 or self.other_dependents < 0:
            raise ValueError("counts must be nonnegative")
        if (self.youngest_age == NO_CHILD_AGE) != (self.num_children == 0):
            raise ValueError("youngest_age must be -1 exactly when there are no children")
        if self.num_children and self.youngest_age < 0:
            raise ValueError("youngest_age must be nonnegative when there are children")
        if not 0 <= self.dissatisfaction <= MAX_DISSATISFACTION:
            raise ValueError(f"dissatisfaction must be in 0..{MAX_DISSATISFACTION}")
        if self.status not in STATUSES:
            raise ValueError(f"status must be one of {STATUSES}")

    def features(self):
        return (
            INCOME_BRACKETS.index(self.income_bracket),
            self.marital,
            self.num_children,
            self.youngest_age,
            self.other_dependents,
            self.dissatisfaction,
        )


def encode_attrition(records, include_dummy=True, subgroup="all", drop_movers=False, seed=0):
    """Numeric table of the surviving records; labels are status codes (stayer 0, mover 1, leaver 2).

    The optional last column is a seeded Uniform[0, 1) dummy that keeps
    records with identical answers apart.
    """
    if subgroup not in SUBGROUPS:
        raise ValueError(f"unknown subgroup {subgroup!r}; choose from {', '.join(SUBGROUPS)}")
    keep = SUBGROUPS[subgroup]
    rows = [r for r in records if keep(r) and not (drop_movers and r.status == "mover")]
    values = np.array([r.features() for r in rows], dtype=float).reshape(len(rows), len(FEATURES))
    columns = list(FEATURES)
    if include_dummy:
        dummy = np.random.default_rng(seed).uniform(0.0, 1.0, len(rows))
        values = np.column_stack([values, dummy])
        columns.append("dummy")
    labels = np.array([STATUSES.index(r.status) for r in rows], dtype=int)
    return DataMatrix(values, labels, columns, list(STATUSES))


# Target composition of the stand-in cohort at its reference size.
_REFERENCE_N = 4528
_HOMOGENEOUS = {"stayer": 92, "mover": 24, "leaver": 81}  # never married, childless, one bracket, content
_QUITTERS = {"leaver": 173}  # married, childless, same bracket, at most one complaint
_MAJORITY = {"stayer": 1666, "mover": 1016, "leaver": 1476}


def _scaled(counts, n):
    return {k: v * n / _REFERENCE_N for k, v in counts.items()}


def _round_to_total(parts, total):
    """Largest-remainder rounding of a dict of nonnegative reals to integers summing to ``total``."""
    base = {k: math.floor(v) for k, v in parts.items()}
    short = total - sum(base.values())
    for k in sorted(parts, key=lambda k: (base[k] - parts[k], k))[:short]:
        base[k] += 1
    return base


def _is_planted(income, marital, children, dependents, dissat):
    if income != 5 or children != 0 or dependents != 0:
        return False
    return (marital == 0 and dissat == 0) or (marital == 1 and dissat <= 1)


def gen_attrition_standin(n=_REFERENCE_N, seed=0):
    """Synthetic cohort with planted structure.

    A small homogeneous group (never married, childless, no other
    dependents, income 60,000-74,999, no complaints) with a mixed status
    profile, a group of married childless records in the same bracket who
    all left, and a heterogeneous majority whose leaver propensity grows
    with the number of complaints. Group sizes scale with ``n``.
    """
    if n < 10:
        raise ValueError("n must be at least 10")
    rng = np.random.default_rng(seed)
    sizes = _round_to_total(
        {
            "homogeneous": sum(_scaled(_HOMOGENEOUS, n).values()),
            "quitters": sum(_scaled(_QUITTERS, n).values()),
            "majority": sum(_scaled(_MAJORITY, n).values()),
        },
        n,
    )
    for g in ("homogeneous", "quitters"):
        if sizes[g] == 0:
            sizes[g] = 1
            sizes["majority"] -= 1

    records = []
    bracket = INCOME_BRACKETS[5]
    h_status = _round_to_total(_scaled(_HOMOGENEOUS, sizes["homogeneous"] * _REFERENCE_N / 197), sizes["homogeneous"])
    h_labels = [s for s in STATUSES for _ in range(h_status.get(s, 0))]
    rng.shuffle(h_labels)
    for s in h_labels:
        records.append(AttritionRecord(bracket, 0, 0, NO_CHILD_AGE, 0, 0, s))
    for _ in range(sizes["quitters"]):
        records.append(AttritionRecord(bracket, 1, 0, NO_CHILD_AGE, 0, int(rng.integers(0, 2)), "leaver"))

    m = sizes["majority"]
    feats = []
    while len(feats) < m:
        income = int(rng.integers(0, len(INCOME_BRACKETS)))
        marital = int(rng.choice(3, p=[0.2, 0.65, 0.15]))
        children = 0 if rng.random() < 0.35 else int(rng.integers(1, 5))
        youngest = NO_CHILD_AGE if children == 0 else int(rng.integers(0, 39))
        dependents = int(rng.choice(4, p=[0.8, 0.12, 0.05, 0.03]))
        dissat = int(rng.choice(4, p=[0.45, 0.3, 0.15, 0.1]))
        if _is_planted(income, marital, children, dependents, dissat):
            continue
        feats.append((income, marital, children, youngest, dependents, dissat))
    # exact status counts, leavers drawn with weight rising in dissatisfaction
    # (weighted sampling without replacement via exponential keys)
    maj = _round_to_total(_scaled(_MAJORITY, m * _REFERENCE_N / sum(_MAJORITY.values())), m)
    weight = np.array([1.0 + 1.5 * f[5] for f in feats])
    keys = rng.exponential(size=m) / weight
    order = np.argsort(keys, kind="stable")
    status = np.empty(m, dtype=object)
    status[order[: maj["leaver"]]] = "leaver"
    rest = rng.permutation(order[maj["leaver"]:])
    status[rest[: maj["mover"]]] = "mover"
    status[rest[maj["mover"]:]] = "stayer"
    for f, s in zip(feats, status):
        records.append(AttritionRecord(INCOME_BRACKETS[f[0]], f[1], f[2], f[3], f[4], f[5], s))

    perm = rng.permutation(len(records))
    return [records[i] for i in perm]


def _attritors(status_codes, movers_as):
    leaver = status_codes == STATUSES.index("leaver")
    if movers_as == "leaver":
        return leaver | (status_codes == STATUSES.index("mover"))
    return leaver


@dataclass
class ClusterTable:
    """Status counts of a two-cluster split; cluster 1 is the smaller cluster."""

    counts: dict  # status -> (cluster1, cluster2)
    attritors: tuple
    totals: tuple
    ztest: object

    def rows(self):
        out = [["status", "cluster1", "cluster2"]]
        for s in STATUSES:
            if s in self.counts:
                out.append([s, *self.counts[s]])
        out.append(["total", *self.totals])
        return out


def _smaller_first(labels):
    labels = np.asarray(labels)
    ones = int(labels.sum())
    # cluster 1 := the smaller cluster (label 1 wins ties)
    return labels.astype(bool) if ones <= labels.size - ones else ~labels.astype(bool)


def cluster_table(status_codes, labels, movers_as="stayer", direction=None):
    """Cross-tabulate statuses by cluster and Z-test the attritor proportions.

    ``movers_as`` decides whether movers count as attritors ("leaver") or
    not ("stayer"). The one-tailed direction defaults to the observed one.
    """
    if movers_as not in ("stayer", "leaver"):
        raise ValueError("movers_as must be 'stayer' or 'leaver'")
    status_codes = np.asarray(status_codes)
    c1 = _smaller_first(labels)
    counts = {}
    for code, s in enumerate(STATUSES):
        hit = status_codes == code
        if hit.any():
            counts[s] = (int(np.sum(hit & c1)), int(np.sum(hit & ~c1)))
    att = _attritors(status_codes, movers_as)
    a = (int(np.sum(att & c1)), int(np.sum(att & ~c1)))
    t = (int(c1.sum()), int((~c1).sum()))
    if min(t) == 0:
        raise ValueError("clustering produced an empty cluster")
    if direction is None:
        direction = "greater" if a[0] / t[0] >= a[1] / t[1] else "less"
    return ClusterTable(counts, a, t, two_prop_ztest(a[0], t[0], a[1], t[1], direction))


def cluster_attrition(data, kernel=None):
    """Exact two-way spectral clustering of encoded survey rows."""
    kernel = kernel or KernelSpec.self_tuned()
    if data.n < 2:
        raise ValueError("need at least two records")
    return spectral_cluster(data.values, kernel)


@dataclass
class HoldoutReport:
    """Cluster-on-a-sample, predict-the-rest summary.

    Each ``(attritors, total)`` pair is given for (cluster 1, cluster 2):
    ``sample`` from clustering the sample, ``predicted`` from applying the
    sample's attritor rates to the holdout groups, ``actual`` the observed
    counts in those groups, and ``holdout_sc`` from clustering the holdout
    itself. ``predicates`` are the attribute values shared by every sampled
    cluster-1 record.
    """

    n_sample: int
    n_holdout: int
    predicates: dict
    sample: tuple
    predicted: tuple
    actual: tuple
    holdout_sc: tuple
    agreement: float
    ztest: object

    def rows(self):
        def frac(p):
            return f"{p[0]}/{p[1]}"

        return [
            ["row", "cluster1", "cluster2"],
            ["sc_sample", frac(self.sample[0]), frac(self.sample[1])],
            ["predicted", frac(self.predicted[0]), frac(self.predicted[1])],
            ["actual", frac(self.actual[0]), frac(self.actual[1])],
            ["sc_holdout", frac(self.holdout_sc[0]), frac(self.holdout_sc[1])],
        ]


def holdout_analysis(data, fraction=1 / 3, kernel=None, seed=0, movers_as="stayer"):
    """Cluster a random ``fraction`` of the rows and use the result to predict the rest.

    A holdout row is predicted into cluster 1 when it matches every survey
    attribute (the dummy column excluded) that is constant across the
    sampled cluster 1.
    """
    if not 0 < fraction < 1:
        raise ValueError("holdout sample fraction must be in (0, 1)")
    kernel = kernel or KernelSpec.self_tuned()
    n = data.n
    m = math.ceil(fraction * n - 1e-9)
    if m < 2 or n - m < 2:
        raise ValueError(f"cannot split {n} rows into a {fraction:g} sample and a holdout")
    rng = np.random.default_rng(seed)
    S = np.sort(rng.choice(n, size=m, replace=False))
    H = np.setdiff1d(np.arange(n), S)
    att = _attritors(data.labels, movers_as)

    def k_for(size):
        return kernel.with_neighbors(size - 1) if kernel.K is not None and kernel.K > size - 1 else kernel

    c1s = _smaller_first(spectral_cluster(data.values[S], k_for(m)))
    if c1s.all() or not c1s.any():
        raise ValueError("sample clustering produced an empty cluster")
    survey = [j for j, c in enumerate(data.columns or FEATURES) if c != "dummy"]
    Xs = data.values[S][c1s]
    predicates = {}
    for j in survey:
        col = Xs[:, j]
        if np.all(col == col[0]):
            predicates[j] = float(col[0])
    XH = data.values[H]
    pred1 = np.ones(H.size, dtype=bool)
    for j, v in predicates.items():
        pred1 &= XH[:, j] == v

    def pair(mask, base):
        return int(np.sum(att[base][mask])), int(mask.sum())

    sample = (pair(c1s, S), pair(~c1s, S))
    rates = [a / t if t else 0.0 for a, t in sample]
    actual = (pair(pred1, H), pair(~pred1, H))
    predicted = tuple((round(r * t), t) for r, (_, t) in zip(rates, actual))

    hl = np.asarray(spectral_cluster(XH, k_for(H.size))).astype(bool)
    # orient the holdout clustering to agree best with the prediction
    if np.sum(hl == pred1) < np.sum(hl != pred1):
        hl = ~hl
    holdout_sc = (pair(hl, H), pair(~hl, H))
    agreement = float(np.mean(hl == pred1))
    (a1, t1), (a2, t2) = sample
    direction = "greater" if a1 / t1 >= a2 / t2 else "less"
    names = data.columns or list(FEATURES)
    return HoldoutReport(
        n_sample=m,
        n_holdout=int(H.size),
        predicates={names[j]: v for j, v in predicates.items()},
        sample=sample,
        predicted=predicted,
        actual=actual,
        holdout_sc=holdout_sc,
        agreement=agreement,
        ztest=two_prop_ztest(a1, t1, a2, t2, direction),
    )
