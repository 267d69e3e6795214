"""Nadaraya-Watson regression with a Gaussian kernel and leave-one-out bandwidth."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Total kernel weight below this leaves a grid point undefined.
MASS_FLOOR = 1e-300
N_CANDIDATES = 32


class KernelRegError(ValueError):
    pass


@dataclass(frozen=True)
class RegressionCurve:
    grid_x: np.ndarray
    estimate_y: np.ndarray  # NaN where undefined
    bandwidth: float

    @property
    def defined(self) -> np.ndarray:
        return np.isfinite(self.estimate_y)

    def rows(self):
        for x, y, ok in zip(self.grid_x, self.estimate_y, self.defined):
            yield float(x), (float(y) if ok else ""), int(ok)


def gaussian_kernel(u: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * u * u) / np.sqrt(2.0 * np.pi)


def _weights(points, x, h):
    return gaussian_kernel((np.asarray(points)[:, None] - np.asarray(x)[None, :]) / h)


def nw_regress(x, y, h: float, grid) -> RegressionCurve:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    grid = np.asarray(grid, dtype=np.float64)
    if not h > 0:
        raise KernelRegError(f"bandwidth must be > 0, got {h}")
    if len(x) < 2 or len(x) != len(y):
        raise KernelRegError("need at least 2 paired samples")
    if len(grid) > 1 and np.any(np.diff(grid) <= 0):
        raise KernelRegError("grid must be strictly increasing")
    k = _weights(grid, x, h)
    mass = k.sum(axis=1)
    est = np.full(len(grid), np.nan)
    ok = mass >= MASS_FLOOR
    est[ok] = (k[ok] @ y) / mass[ok]
    return RegressionCurve(grid, est, float(h))


def loo_cv_score(x, y, h: float) -> float:
    """Sum of squared leave-one-out residuals; inf if any LOO estimate is undefined."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    k = _weights(x, x, h)
    # Drop each point's own weight from the full sums.
    diag = np.diag(k)
    mass = k.sum(axis=1) - diag
    num = k @ y - diag * y
    if np.any(mass < MASS_FLOOR):
        return np.inf
    return float(np.sum((y - num / mass) ** 2))


def default_candidates(x, n: int = N_CANDIDATES) -> np.ndarray:
    span = float(np.ptp(x))
    if span <= 0:
        raise KernelRegError("x has zero range; cannot build a bandwidth grid")
    return np.geomspace(0.01 * span, span, n)


def loo_cv_bandwidth(x, y, candidates=None) -> float:
    """Candidate bandwidth minimizing the leave-one-out squared error.

    Ties go to the smallest bandwidth.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) < 3 or len(x) != len(y):
        raise KernelRegError("need at least 3 paired samples")
    cands = default_candidates(x) if candidates is None else np.asarray(candidates, dtype=np.float64)
    if cands.size == 0 or np.any(cands <= 0):
        raise KernelRegError("bandwidth candidates must be positive")
    cands = np.unique(cands)  # sorted ascending, so argmin prefers the smallest
    scores = np.array([loo_cv_score(x, y, h) for h in cands])
    if not np.isfinite(scores).any():
        raise KernelRegError("every candidate bandwidth leaves some LOO estimate undefined")
    return float(cands[int(np.argmin(scores))])


def linear_trend(curve: RegressionCurve) -> float:
    """Least-squares slope of the defined part of a curve."""
    ok = curve.defined
    if ok.sum() < 2:
        raise KernelRegError("not enough defined points for a trend")
    return float(np.polyfit(curve.grid_x[ok], curve.estimate_y[ok], 1)[0])


def residual_curves(jnd, pred, sigma, grid=None, candidates=None) -> dict[str, RegressionCurve]:
    """Smoothed |residual| and |residual|/sigma as functions of the JND mean."""
    jnd = np.asarray(jnd, dtype=np.float64)
    abs_res = np.abs(np.asarray(pred, dtype=np.float64) - jnd)
    z_res = abs_res / np.asarray(sigma, dtype=np.float64)
    if grid is None:
        grid = np.linspace(jnd.min(), jnd.max(), 101)
    out = {}
    for name, y in (("rmse", abs_res), ("z_rmse", z_res)):
        h = loo_cv_bandwidth(jnd, y, candidates)
        out[name] = nw_regress(jnd, y, h, grid)
    return out
