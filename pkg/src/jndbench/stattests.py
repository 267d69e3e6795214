"""Pairwise superiority tests between metrics.

Two tests decide whether metric A is significantly better than metric B on
the same stimuli:

* MRR: difference between two dependent SROCCs that share the subjective
  scores (Fisher z with the Meng-Rosenthal-Rubin correction).
* Wilcoxon signed-rank on paired absolute residuals of the logistic-mapped
  scores, normal approximation, winner by smaller median residual.

Decisions are +1 (A better), -1 (B better) or 0 (no significant difference).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from jndbench.criteria import oriented, srocc
from jndbench.dataset import (
    FidelityRange,
    MetricScoreTable,
    SubjectiveDataset,
    join,
)
from jndbench.transform import LogisticParams, fit_logistic, fit_logistic_joint, transformed

DEFAULT_ALPHA = 0.05


class StatTestError(ValueError):
    pass


class DegenerateCorrelation(StatTestError):
    pass


class SigTest(enum.Enum):
    MRR = "mrr"
    WILCOXON = "wilcoxon"


def two_sided_p(z: float) -> float:
    return float(2.0 * stats.norm.sf(abs(z)))


@dataclass(frozen=True)
class MrrResult:
    r1s: float
    r2s: float
    r12: float
    n: int
    z1: float
    z2: float
    rbar_sq: float
    f: float
    h: float
    z_stat: float
    p_value: float
    alpha: float
    decision: int


def mrr_from_correlations(
    r1s: float, r2s: float, r12: float, n: int, alpha: float = DEFAULT_ALPHA
) -> MrrResult:
    """MRR statistic from the two correlations with the subjective scores
    (``r1s``, ``r2s``) and the correlation between the metrics (``r12``).

    ``f`` is capped at 1 as in the original method, which keeps ``h`` positive.
    """
    if n <= 3:
        raise StatTestError(f"MRR needs n >= 4, got {n}")
    if abs(r1s) >= 1 or abs(r2s) >= 1:
        raise DegenerateCorrelation(
            f"Fisher transform undefined for |r| = 1 (r1s={r1s}, r2s={r2s})"
        )
    z1, z2 = math.atanh(r1s), math.atanh(r2s)
    rbar_sq = (r1s**2 + r2s**2) / 2.0
    f = min(1.0, (1.0 - r12) / (2.0 * (1.0 - rbar_sq)))
    h = (1.0 - f * rbar_sq) / (1.0 - rbar_sq)
    if z1 == z2:
        z = 0.0
    else:
        var = 2.0 * (1.0 - r12) * h / (n - 3)
        if var <= 0:
            raise DegenerateCorrelation("A and B are perfectly rank-correlated but differ")
        z = (z1 - z2) / math.sqrt(var)
    p = two_sided_p(z)
    decision = 0
    if p < alpha:
        decision = 1 if z > 0 else -1 if z < 0 else 0
    return MrrResult(r1s, r2s, r12, n, z1, z2, rbar_sq, f, h, z, p, alpha, decision)


def mrr_test(scores_a, scores_b, subj, alpha: float = DEFAULT_ALPHA) -> MrrResult:
    """Compare SROCC(A, subj) with SROCC(B, subj).

    Scores must already be oriented the same way relative to ``subj``.
    """
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    s = np.asarray(subj, dtype=np.float64)
    n = len(s)
    if not (len(a) == len(b) == n):
        raise StatTestError("MRR inputs must have equal lengths")
    if n <= 3:
        raise StatTestError(f"MRR needs n >= 4, got {n}")
    return mrr_from_correlations(srocc(a, s), srocc(b, s), srocc(a, b), n, alpha)


@dataclass(frozen=True)
class WilcoxonResult:
    n_total: int
    n_nonzero: int
    w_stat: float
    mu_w: float
    sigma_w: float
    z_stat: float
    p_value: float
    effect_size_r: float
    median_resid_a: float
    median_resid_b: float
    threshold: float
    policy: str  # "alpha" or "effect_size"
    continuity: bool
    degenerate: bool
    decision: int


def signed_rank_statistic(d: np.ndarray) -> tuple[float, int]:
    """Sum of ranks of |d| over positive d, zeros dropped; returns (W, n)."""
    d = np.asarray(d, dtype=np.float64)
    d = d[d != 0]
    if len(d) == 0:
        return 0.0, 0
    ranks = stats.rankdata(np.abs(d), method="average")
    return float(ranks[d > 0].sum()), len(d)


def signed_rank_z(w: float, n: int, continuity: bool = True) -> tuple[float, float, float]:
    """Normal approximation for W over ``n`` non-zero differences: (mu, sigma, Z)."""
    mu = n * (n + 1) / 4.0
    sigma = math.sqrt(n * (n + 1) * (2 * n + 1) / 24.0)
    dev = w - mu
    if continuity:
        dev = math.copysign(max(abs(dev) - 0.5, 0.0), dev)
    return mu, sigma, dev / sigma


def wilcoxon_test(
    resid_a,
    resid_b,
    use_paper_threshold: bool = False,
    alpha: float = DEFAULT_ALPHA,
    continuity: bool = True,
) -> WilcoxonResult:
    """Paired signed-rank test on absolute residuals ``resid_a``, ``resid_b``.

    Mean of W is n(n+1)/4 (the textbook null mean; n(n+1)/2 is W's maximum).
    With ``use_paper_threshold`` the p-value is compared against |r| = |Z|/sqrt(N)
    instead of ``alpha``. ``continuity`` applies the usual half-unit correction
    to |W - mu|; without it the approximation drifts up to ~0.03 in p from the
    exact null distribution for n around 15.
    """
    ra = np.asarray(resid_a, dtype=np.float64)
    rb = np.asarray(resid_b, dtype=np.float64)
    if ra.shape != rb.shape or ra.ndim != 1:
        raise StatTestError("residual series must be 1-D with equal lengths")
    n_total = len(ra)
    if n_total == 0:
        raise StatTestError("no residual pairs")
    med_a, med_b = float(np.median(ra)), float(np.median(rb))
    w, n = signed_rank_statistic(ra - rb)
    policy = "effect_size" if use_paper_threshold else "alpha"
    if n == 0:
        return WilcoxonResult(n_total, 0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, med_a, med_b,
                              0.0 if use_paper_threshold else alpha, policy, continuity,
                              True, 0)
    mu, sigma, z = signed_rank_z(w, n, continuity)
    p = two_sided_p(z)
    r = z / math.sqrt(n_total)
    threshold = abs(r) if use_paper_threshold else alpha
    decision = 0
    if p < threshold:
        if med_a < med_b:
            decision = 1
        elif med_a > med_b:
            decision = -1
        else:
            # Equal medians: fall back on the rank-sum direction (W > mu: A larger).
            decision = -1 if z > 0 else 1 if z < 0 else 0
    return WilcoxonResult(n_total, n, w, mu, sigma, z, p, r, med_a, med_b, threshold,
                          policy, continuity, False, decision)


@dataclass(frozen=True)
class MetricSeries:
    """One metric on one slice: raw scores oriented like the JND scale, plus
    transformed predictions."""

    name: str
    oriented: np.ndarray
    pred: np.ndarray


@dataclass(frozen=True)
class SignificanceMatrix:
    metrics: list[str]
    cells: np.ndarray  # cells[i, j]: +1 if column j beats row i
    test: str
    sroccs: list[float] | None = None

    def __post_init__(self):
        c = np.asarray(self.cells, dtype=int)
        object.__setattr__(self, "cells", c)
        validate_matrix(c)

    def render(self) -> str:
        """Text table: '+' column better, '-' column worse, '.' no difference."""
        sym = {1: "+", 0: ".", -1: "-"}
        width = max(len(m) for m in self.metrics)
        lines = [" " * width + "  " + " ".join(str(j % 10) for j in range(len(self.metrics)))]
        for i, m in enumerate(self.metrics):
            row = " ".join(sym[int(v)] for v in self.cells[i])
            lines.append(f"{m:>{width}}  {row}")
        legend = ", ".join(f"{j % 10}={m}" for j, m in enumerate(self.metrics))
        lines.append("")
        lines.append(f"columns: {legend}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {"test": self.test, "metrics": list(self.metrics), "cells": self.cells.tolist(),
                "srocc": self.sroccs}


def validate_matrix(cells: np.ndarray) -> None:
    if cells.ndim != 2 or cells.shape[0] != cells.shape[1]:
        raise StatTestError("significance matrix must be square")
    if np.any(np.diag(cells) != 0):
        raise StatTestError("significance matrix diagonal must be zero")
    if np.any(cells != -cells.T):
        raise StatTestError("significance matrix is not antisymmetric")
    if not np.isin(cells, (-1, 0, 1)).all():
        raise StatTestError("significance cells must be -1, 0 or 1")


def pair_decision(
    a: MetricSeries,
    b: MetricSeries,
    target: np.ndarray,
    test: SigTest | str,
    alpha: float = DEFAULT_ALPHA,
    use_paper_threshold: bool = False,
) -> int:
    """Decision for A against B (+1 means A is better)."""
    test = SigTest(test)
    if test is SigTest.MRR:
        return mrr_test(a.oriented, b.oriented, target, alpha).decision
    return wilcoxon_test(
        np.abs(a.pred - target), np.abs(b.pred - target), use_paper_threshold, alpha
    ).decision


def metric_series(
    ds: SubjectiveDataset,
    table: MetricScoreTable,
    metric: str,
    variant: str = "full",
    params: LogisticParams | None = None,
) -> MetricSeries:
    joined = join(ds, table, metric, variant)
    if params is None:
        params = fit_logistic(joined.scores, joined.jnd_mean)
    return MetricSeries(
        metric, oriented(joined.scores, table.polarity[metric]), transformed(params, joined.scores)
    )


def significance_matrix(
    ds: SubjectiveDataset,
    table: MetricScoreTable,
    metrics: Sequence[str],
    test: SigTest | str = SigTest.MRR,
    variant: str = "full",
    alpha: float = DEFAULT_ALPHA,
    use_paper_threshold: bool = False,
    fidelity: FidelityRange | str = FidelityRange.ALL,
    params: dict[str, LogisticParams] | None = None,
) -> SignificanceMatrix:
    """Pairwise decisions, metrics sorted by descending SROCC on the slice.

    Every cell is computed on its own (no mirror fill), so antisymmetry is a
    real check.
    """
    test = SigTest(test)
    fidelity = FidelityRange.parse(fidelity)
    params = params or {}
    series = [metric_series(ds, table, m, variant, params.get(m)) for m in metrics]
    target = ds.jnd_mean
    mask = np.array([fidelity.contains(v) for v in target])
    target = target[mask]
    series = [MetricSeries(s.name, s.oriented[mask], s.pred[mask]) for s in series]
    rho = [srocc(s.oriented, target) for s in series]
    order = sorted(range(len(series)), key=lambda i: (-rho[i], series[i].name))
    series = [series[i] for i in order]
    k = len(series)
    cells = np.zeros((k, k), dtype=int)
    for i in range(k):
        for j in range(k):
            if i != j:
                cells[i, j] = pair_decision(
                    series[j], series[i], target, test, alpha, use_paper_threshold
                )
    return SignificanceMatrix([s.name for s in series], cells, test.value,
                              [rho[i] for i in order])


@dataclass(frozen=True)
class VariantComparison:
    metric: str
    params: LogisticParams
    mrr: MrrResult
    wilcoxon: WilcoxonResult


def compare_variants(
    ds: SubjectiveDataset,
    table: MetricScoreTable,
    metric: str,
    alpha: float = DEFAULT_ALPHA,
    use_paper_threshold: bool = False,
) -> VariantComparison:
    """Crop (A) against full (B) under one jointly fitted logistic map."""
    full = join(ds, table, metric, "full")
    crop = join(ds, table, metric, "crop")
    params = fit_logistic_joint(full.scores, crop.scores, full.jnd_mean)
    target = full.jnd_mean
    pol = table.polarity[metric]
    mrr = mrr_test(oriented(crop.scores, pol), oriented(full.scores, pol), target, alpha)
    wil = wilcoxon_test(
        np.abs(transformed(params, crop.scores) - target),
        np.abs(transformed(params, full.scores) - target),
        use_paper_threshold,
        alpha,
    )
    return VariantComparison(metric, params, mrr, wil)
