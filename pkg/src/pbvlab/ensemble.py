"""Ensemble statistics over many emitters: histograms and region correlations.

A pillar's region membership is a set (two peaks in one region count once).
The joint counts matrix is symmetric with the per-region counts on the
diagonal; overall probabilities are p(i) = counts(i,i)/n and conditional ones
p(i|j) = counts(i,j)/counts(j,j).
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ValidationError
from .spectral import DEFAULT_REGIONS


@dataclass(frozen=True)
class AssignmentSet:
    """Region membership of one pillar, with the peak centers behind it."""

    pillar_id: str
    regions_present: frozenset
    peak_centers_nm: tuple = ()

    def validate_against(self, table):
        derived = {table.classify(c) for c in self.peak_centers_nm}
        derived.discard(None)
        if self.peak_centers_nm and derived != set(self.regions_present):
            raise ValidationError(
                f"pillar {self.pillar_id}: regions {sorted(self.regions_present)} "
                f"inconsistent with centers under the active table ({sorted(derived)})")


def assignment_from_centers(pillar_id, centers_nm, regions=DEFAULT_REGIONS):
    """Build an AssignmentSet from peak centers under a region table."""
    present = {regions.classify(c) for c in centers_nm}
    present.discard(None)
    return AssignmentSet(pillar_id=str(pillar_id), regions_present=frozenset(present),
                         peak_centers_nm=tuple(float(c) for c in centers_nm))


# ---------------------------------------------------------------------------
# histograms

@dataclass
class Histogram:
    edges_nm: np.ndarray
    counts: np.ndarray

    @property
    def centers_nm(self):
        return 0.5 * (self.edges_nm[:-1] + self.edges_nm[1:])


def build_histogram(centers_nm, bin_nm=0.5, range_nm=None):
    """Bin peak centers into half-open uniform bins [lo, lo+bin), ...

    Centers outside the range are dropped; within the range the total count
    is preserved exactly.
    """
    if bin_nm <= 0:
        raise DomainError("bin width must be positive")
    centers = np.asarray(list(centers_nm), dtype=float)
    if range_nm is None:
        if centers.size == 0:
            raise DomainError("cannot infer a range from zero centers")
        lo = float(np.floor(centers.min() / bin_nm) * bin_nm)
        hi = float(np.ceil((centers.max() + 1e-12) / bin_nm) * bin_nm)
    else:
        lo, hi = (float(v) for v in range_nm)
    if hi <= lo:
        raise DomainError(f"empty range [{lo}, {hi})")
    nbins = int(np.ceil((hi - lo) / bin_nm))
    idx = np.floor((centers - lo) / bin_nm).astype(int)
    ok = (idx >= 0) & (idx < nbins)
    counts = np.bincount(idx[ok], minlength=nbins)
    edges = lo + bin_nm * np.arange(nbins + 1)
    return Histogram(edges_nm=edges, counts=counts)


# ---------------------------------------------------------------------------
# probabilities

@dataclass
class ProbabilityReport:
    n_pillars: int
    labels: tuple
    counts: np.ndarray       # joint occurrence matrix, diagonal = per-region counts
    p: dict = field(default_factory=dict)          # label -> overall probability
    p_cond: dict = field(default_factory=dict)     # (i, j) -> P(i | j)


def probabilities(assignments, labels):
    """Joint counts and overall/conditional probabilities over pillars.

    counts(i, j) is the number of pillars containing both region i and
    region j (the diagonal counts pillars containing i). Probabilities are
    exact ratios; round only at presentation.
    """
    labels = tuple(labels)
    if len(assignments) < 1:
        raise ValidationError("need at least one pillar")
    index = {label: k for k, label in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for a in assignments:
        present = sorted(a.regions_present)
        for r in present:
            if r not in index:
                raise ValidationError(f"pillar {a.pillar_id}: unknown region label {r!r}")
        for r in present:
            for s in present:
                counts[index[r], index[s]] += 1

    n = len(assignments)
    p = {label: counts[k, k] / n for k, label in enumerate(labels)}
    p_cond = {}
    for j, lj in enumerate(labels):
        if counts[j, j] == 0:
            continue
        for i, li in enumerate(labels):
            p_cond[(li, lj)] = counts[i, j] / counts[j, j]
    return ProbabilityReport(n_pillars=n, labels=labels, counts=counts, p=p, p_cond=p_cond)


@dataclass
class PairVerdict:
    i: str
    j: str
    p_i: float
    p_cond_ij: float
    gap: float
    independent: bool


@dataclass
class IndependenceReport:
    tol: float
    pairs: list
    bayes_consistent: bool
    max_bayes_gap: float

    @property
    def all_independent(self):
        return all(v.independent for v in self.pairs)


def independence_report(report, tol=0.08):
    """Flag |P(i|j) - P(i)| <= tol per ordered pair and check Bayes symmetry.

    P(i|j) P(j) and P(j|i) P(i) both equal counts(i,j)/n, so their gap is a
    pure rounding check (tolerance 1e-12).
    """
    pairs = []
    for j in report.labels:
        for i in report.labels:
            if i == j or (i, j) not in report.p_cond:
                continue
            gap = abs(report.p_cond[(i, j)] - report.p[i])
            pairs.append(PairVerdict(i=i, j=j, p_i=report.p[i],
                                     p_cond_ij=report.p_cond[(i, j)],
                                     gap=gap, independent=bool(gap <= tol)))
    max_gap = 0.0
    for (i, j), pij in report.p_cond.items():
        if (j, i) in report.p_cond:
            max_gap = max(max_gap, abs(pij * report.p[j] - report.p_cond[(j, i)] * report.p[i]))
    return IndependenceReport(tol=tol, pairs=pairs,
                              bayes_consistent=bool(max_gap <= 1e-12),
                              max_bayes_gap=max_gap)


# ---------------------------------------------------------------------------
# serialization

def read_assignments_jsonl(document):
    """Read assignments from JSON lines: {pillar_id, peak_centers_nm: [...]}."""
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    out = []
    for ln, line in enumerate(document.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            out.append(assignment_from_centers(rec["pillar_id"], rec["peak_centers_nm"]))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ValidationError(f"bad assignment record on line {ln}: {exc}") from None
    return out


def write_assignments_jsonl(assignments):
    lines = [json.dumps({"pillar_id": a.pillar_id,
                         "peak_centers_nm": list(a.peak_centers_nm)})
             for a in assignments]
    return ("\n".join(lines) + "\n").encode("utf-8")


def report_to_dict(report, verdicts=None):
    """JSON-ready dict of a ProbabilityReport (+ optional independence report)."""
    out = {
        "n_pillars": report.n_pillars,
        "labels": list(report.labels),
        "counts": report.counts.tolist(),
        "p": {label: report.p[label] for label in report.labels},
        "p_cond": {f"{i}|{j}": v for (i, j), v in sorted(report.p_cond.items())},
    }
    if verdicts is not None:
        out["independence"] = {
            "tol": verdicts.tol,
            "bayes_consistent": verdicts.bayes_consistent,
            "all_independent": verdicts.all_independent,
            "pairs": [{"i": v.i, "j": v.j, "p_i": v.p_i, "p_cond": v.p_cond_ij,
                       "gap": v.gap, "independent": v.independent}
                      for v in verdicts.pairs],
        }
    return out
