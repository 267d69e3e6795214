"""Evaluation criteria for one metric over one fidelity slice.

Correlations are oriented so that a metric agreeing with the subjective
impairment scale reports a positive value. RMSE, Z-RMSE, LLR, outlier ratio
and PWRC use logistic-transformed scores.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, stats

from jndbench.dataset import (
    EmptySlice,
    FidelityRange,
    MetricScoreTable,
    Polarity,
    SubjectiveDataset,
    join,
)
from jndbench.transform import LogisticParams, fit_logistic, transformed

PWRC_LAMBDA = 2.0
ST_GRID_STEPS = 64
OUTLIER_Z = 1.96


class CriteriaError(ValueError):
    pass


class ConstantSeries(CriteriaError):
    pass


class NonPositiveSigma(CriteriaError):
    pass


@dataclass(frozen=True)
class CriteriaReport:
    metric: str
    range: str
    n: int
    plcc: float
    srocc: float
    kt: float
    rmse: float
    z_rmse: float
    llr: float
    outlier_ratio: float
    pwrc_auc: float

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SaStCurve:
    thresholds: np.ndarray
    sa: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.thresholds, dtype=np.float64)
        sa = np.asarray(self.sa, dtype=np.float64)
        if t.shape != sa.shape or t.ndim != 1:
            raise CriteriaError("thresholds and SA must be 1-D and the same length")
        object.__setattr__(self, "thresholds", t)
        object.__setattr__(self, "sa", sa)


def _arrays(*xs):
    arrs = [np.asarray(x, dtype=np.float64) for x in xs]
    n = len(arrs[0])
    if any(len(a) != n for a in arrs):
        raise CriteriaError("series lengths differ: " + ", ".join(str(len(a)) for a in arrs))
    return arrs


def plcc(x, y) -> float:
    x, y = _arrays(x, y)
    if len(x) < 3:
        raise CriteriaError("PLCC needs at least 3 samples")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = np.dot(dx, dx), np.dot(dy, dy)
    if sxx == 0 or syy == 0:
        raise ConstantSeries("PLCC is undefined for a constant series")
    r = np.dot(dx, dy) / math.sqrt(sxx * syy)
    return float(min(1.0, max(-1.0, r)))


def rank(x) -> np.ndarray:
    """Fractional ranks (ties get their average rank)."""
    return stats.rankdata(np.asarray(x, dtype=np.float64), method="average")


def srocc(x, y) -> float:
    x, y = _arrays(x, y)
    if len(x) < 3:
        raise CriteriaError("SROCC needs at least 3 samples")
    return plcc(rank(x), rank(y))


def kendall_tau(x, y) -> float:
    """Kendall tau-b."""
    x, y = _arrays(x, y)
    if len(x) < 3:
        raise CriteriaError("KT needs at least 3 samples")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise ConstantSeries("Kendall tau is undefined for an all-tied series")
    return float(stats.kendalltau(x, y, variant="b").statistic)


def rmse(pred, target) -> float:
    pred, target = _arrays(pred, target)
    if len(pred) == 0:
        raise CriteriaError("RMSE of an empty series")
    return float(np.sqrt(np.mean((pred - target) ** 2)))


def _check_sigma(sigma: np.ndarray):
    if not np.all(sigma > 0):
        raise NonPositiveSigma("every sigma must be > 0")


def z_rmse(pred, target, sigma) -> float:
    """RMSE of residuals standardized by the per-stimulus subjective std."""
    pred, target, sigma = _arrays(pred, target, sigma)
    _check_sigma(sigma)
    if len(pred) == 0:
        raise CriteriaError("Z-RMSE of an empty series")
    return float(np.sqrt(np.mean(((pred - target) / sigma) ** 2)))


def llr(pred, target, sigma) -> float:
    """Gaussian log-likelihood ratio log(L0 / L(pred)) of a perfect predictor.

    The normalizing terms of both likelihoods cancel, leaving half the sum of
    squared standardized residuals.
    """
    pred, target, sigma = _arrays(pred, target, sigma)
    _check_sigma(sigma)
    return float(0.5 * np.sum(((pred - target) / sigma) ** 2))


def outlier_ratio(pred, target, sigma, z: float = OUTLIER_Z) -> float:
    pred, target, sigma = _arrays(pred, target, sigma)
    _check_sigma(sigma)
    if len(pred) == 0:
        raise CriteriaError("outlier ratio of an empty series")
    return float(np.mean(np.abs(pred - target) > z * sigma))


def default_st_grid(target, steps: int = ST_GRID_STEPS) -> np.ndarray:
    top = float(np.max(target))
    if not top > 0:
        raise CriteriaError("degenerate ST grid: max(target) must be > 0")
    return np.linspace(0.0, top, steps + 1)


def pair_weights(target: np.ndarray, lam: float = PWRC_LAMBDA) -> np.ndarray:
    """w_ij = exp(-min(t_i, t_j) / lam): pairs touching high quality weigh more."""
    return np.exp(-np.minimum.outer(target, target) / lam)


def pwrc_curve(pred, target, st_grid=None, lam: float = PWRC_LAMBDA) -> SaStCurve:
    """Weighted sorting accuracy over pairs whose target gap exceeds each threshold."""
    pred, target = _arrays(pred, target)
    if len(pred) < 3:
        raise CriteriaError("PWRC needs at least 3 samples")
    grid = default_st_grid(target) if st_grid is None else np.asarray(st_grid, dtype=np.float64)
    if grid.ndim != 1 or len(grid) < 2 or grid[0] != 0 or np.any(np.diff(grid) <= 0):
        raise CriteriaError("degenerate ST grid: must start at 0 and strictly increase")
    iu = np.triu_indices(len(pred), k=1)
    gap = np.abs(np.subtract.outer(target, target))[iu]
    agree = (
        np.sign(np.subtract.outer(pred, pred)) * np.sign(np.subtract.outer(target, target))
    )[iu]
    w = pair_weights(target, lam)[iu]
    sa = np.zeros(len(grid))
    for k, t in enumerate(grid):
        active = gap > t
        wsum = w[active].sum()
        if wsum > 0:
            sa[k] = float(np.dot(w[active], agree[active]) / wsum)
    return SaStCurve(grid, sa)


def pwrc_auc(curve: SaStCurve) -> float:
    return float(integrate.trapezoid(curve.sa, curve.thresholds))


def oriented(scores, polarity: Polarity) -> np.ndarray:
    """Scores flipped, if needed, so larger means more impairment (like JND)."""
    s = np.asarray(scores, dtype=np.float64)
    return -s if polarity is Polarity.HIGHER_IS_BETTER else s


def evaluate_series(
    metric: str,
    range_label: str,
    raw: np.ndarray,
    pred: np.ndarray,
    target: np.ndarray,
    sigma: np.ndarray,
    polarity: Polarity,
) -> CriteriaReport:
    """All criteria from raw scores and their already-transformed predictions."""
    raw_o = oriented(raw, polarity)
    curve = pwrc_curve(pred, target)
    return CriteriaReport(
        metric=metric,
        range=range_label,
        n=len(target),
        plcc=plcc(pred, target),
        srocc=srocc(raw_o, target),
        kt=kendall_tau(raw_o, target),
        rmse=rmse(pred, target),
        z_rmse=z_rmse(pred, target, sigma),
        llr=llr(pred, target, sigma),
        outlier_ratio=outlier_ratio(pred, target, sigma),
        pwrc_auc=pwrc_auc(curve),
    )


def criteria_report(
    ds: SubjectiveDataset,
    table: MetricScoreTable,
    metric: str,
    variant: str = "full",
    fidelity: FidelityRange | str = FidelityRange.ALL,
    params: LogisticParams | None = None,
) -> CriteriaReport:
    """Criteria on one slice; the transform is fitted on the whole of ``ds``."""
    fidelity = FidelityRange.parse(fidelity)
    series = join(ds, table, metric, variant)
    if params is None:
        params = fit_logistic(series.scores, series.jnd_mean)
    pred = transformed(params, series.scores)
    mask = np.array([fidelity.contains(m) for m in series.jnd_mean])
    if not mask.any():
        raise EmptySlice(f"{fidelity.label} slice is empty")
    return evaluate_series(
        metric,
        fidelity.label,
        series.scores[mask],
        pred[mask],
        series.jnd_mean[mask],
        series.jnd_std[mask],
        table.polarity[metric],
    )
