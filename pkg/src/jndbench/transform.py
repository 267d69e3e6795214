"""Four-parameter logistic mapping from objective scores to the JND scale.

    S_trans = B2 + (B1 - B2) / (1 + exp(-(s_obj - B3) / B4))
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import optimize, special, stats

log = logging.getLogger(__name__)

MIN_POINTS = 5
MAX_ITER = 2000
REL_TOL = 1e-15
# Simplex fallback tolerance.
NM_TOL = 1e-12


class TransformError(ValueError):
    pass


class ConstantPredictor(TransformError):
    pass


class MisalignedVariants(TransformError):
    pass


@dataclass(frozen=True)
class LogisticParams:
    b1: float
    b2: float
    b3: float
    b4: float
    fit_rmse: float = 0.0
    converged: bool = True
    # Value substituted for +inf scores before fitting, if any were present.
    sentinel_clamp: float | None = None

    def __post_init__(self):
        if self.b4 == 0:
            raise TransformError("B4 must be non-zero")

    def __call__(self, s_obj):
        return apply_logistic(self, s_obj)

    def to_json(self, metric: str | None = None, variant: str | None = None) -> dict:
        d = {"metric": metric, "variant": variant}
        d.update({"B1": self.b1, "B2": self.b2, "B3": self.b3, "B4": self.b4})
        d.update(fit_rmse=self.fit_rmse, converged=self.converged, sentinel_clamp=self.sentinel_clamp)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "LogisticParams":
        return cls(d["B1"], d["B2"], d["B3"], d["B4"], d.get("fit_rmse", 0.0),
                   d.get("converged", True), d.get("sentinel_clamp"))


def _logistic(b, s):
    b1, b2, b3, b4 = b
    return b2 + (b1 - b2) * special.expit((s - b3) / b4)


def _logistic_jac(b, s):
    b1, b2, b3, b4 = b
    u = (s - b3) / b4
    e = special.expit(u)
    slope = (b1 - b2) * e * (1.0 - e)
    return np.column_stack([e, 1.0 - e, -slope / b4, -slope * u / b4])


def apply_logistic(p: LogisticParams, s_obj):
    """Evaluate the mapping; +/-inf inputs land on the matching asymptote."""
    out = _logistic((p.b1, p.b2, p.b3, p.b4), np.asarray(s_obj, dtype=np.float64))
    return float(out) if np.ndim(out) == 0 else out


def clamp_sentinels(s_obj: Sequence[float]) -> tuple[np.ndarray, float | None]:
    """Replace +inf (and -inf) by the finite extreme +/- one interquartile range."""
    s = np.asarray(s_obj, dtype=np.float64).copy()
    if np.isnan(s).any():
        raise TransformError("objective scores contain NaN")
    finite = s[np.isfinite(s)]
    if finite.size == len(s):
        return s, None
    if finite.size == 0:
        raise ConstantPredictor("no finite objective scores")
    q25, q75 = np.percentile(finite, [25, 75])
    spread = q75 - q25
    if spread <= 0:
        spread = max(float(np.ptp(finite)), 1.0)
    hi = float(finite.max() + spread)
    s[s == np.inf] = hi
    s[s == -np.inf] = finite.min() - spread
    return s, hi


def initial_guess(s_obj: np.ndarray, s_subj: np.ndarray) -> np.ndarray:
    rho = stats.spearmanr(s_obj, s_subj)[0] if np.ptp(s_subj) > 0 else 1.0
    sign = -1.0 if rho < 0 else 1.0
    width = np.ptp(s_obj) / 8.0
    return np.array([s_subj.max(), s_subj.min(), np.median(s_obj), sign * width])


def _fit(s: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, bool]:
    # Work on standardized scores; B3/B4 are mapped back afterwards.
    center = float(np.median(s))
    scale = float(np.ptp(s))
    z = (s - center) / scale
    b0 = initial_guess(z, y)

    def resid(b):
        return _logistic(b, z) - y

    # Analytic Jacobian: MINPACK's relative finite-difference step is ~0 for a
    # parameter that starts at 0 (B3 on centered scores), which freezes it.
    res = optimize.least_squares(
        resid, b0, jac=lambda b: _logistic_jac(b, z), method="lm",
        ftol=REL_TOL, xtol=REL_TOL, gtol=REL_TOL, max_nfev=MAX_ITER * 9,
    )
    b, converged = res.x, bool(res.status > 0 and np.all(np.isfinite(res.x)))
    if not converged or b[3] == 0:
        log.debug("least squares did not converge (%s); simplex polish", res.message)
        start = b if np.all(np.isfinite(b)) and b[3] != 0 else b0
        nm = optimize.minimize(
            lambda v: float(np.sum(resid(v) ** 2)), start, method="Nelder-Mead",
            options={"xatol": NM_TOL, "fatol": NM_TOL, "maxiter": MAX_ITER * 4},
        )
        if np.sum(resid(nm.x) ** 2) <= np.sum(resid(b) ** 2) or not np.all(np.isfinite(b)):
            b = nm.x
        converged = bool(nm.success)
    b = np.array([b[0], b[1], center + scale * b[2], scale * b[3]])
    return b, converged


def fit_logistic(s_obj: Sequence[float], s_subj: Sequence[float]) -> LogisticParams:
    """Least-squares fit of the logistic map to subjective targets."""
    s, clamp = clamp_sentinels(s_obj)
    y = np.asarray(s_subj, dtype=np.float64)
    if s.shape != y.shape:
        raise TransformError(f"length mismatch: {len(s)} scores vs {len(y)} targets")
    if len(s) < MIN_POINTS:
        raise TransformError(f"need at least {MIN_POINTS} points, got {len(s)}")
    if np.ptp(s) == 0:
        raise ConstantPredictor("all objective scores are equal")
    if np.ptp(y) == 0:
        c = float(y[0])
        b3, b4 = float(np.median(s)), float(np.ptp(s) / 8.0)
        return LogisticParams(c, c, b3, b4, 0.0, True, clamp)
    b, converged = _fit(s, y)
    rmse = float(np.sqrt(np.mean((_logistic(b, s) - y) ** 2)))
    if b[3] == 0:
        raise TransformError("fit collapsed to a step function (B4 = 0)")
    return LogisticParams(*map(float, b), rmse, converged, clamp)


def fit_logistic_joint(
    full: Sequence[float],
    crop: Sequence[float],
    s_subj: Sequence[float],
    full_ids: Sequence[str] | None = None,
    crop_ids: Sequence[str] | None = None,
) -> LogisticParams:
    """One parameter set for both variants, fitted on their concatenation.

    With ids, ``crop`` is reordered to ``full``'s order; the two id sets must match.
    """
    full = np.asarray(full, dtype=np.float64)
    crop = np.asarray(crop, dtype=np.float64)
    y = np.asarray(s_subj, dtype=np.float64)
    if full_ids is not None or crop_ids is not None:
        if full_ids is None or crop_ids is None:
            raise MisalignedVariants("ids must be given for both variants")
        if len(set(full_ids)) != len(full_ids) or set(full_ids) != set(crop_ids):
            raise MisalignedVariants("full and crop variants cover different stimuli")
        pos = {sid: i for i, sid in enumerate(crop_ids)}
        crop = crop[[pos[sid] for sid in full_ids]]
    if not (len(full) == len(crop) == len(y)):
        raise MisalignedVariants(
            f"variant lengths differ: full={len(full)}, crop={len(crop)}, targets={len(y)}"
        )
    return fit_logistic(np.concatenate([full, crop]), np.concatenate([y, y]))


def transformed(p: LogisticParams, s_obj: Sequence[float]) -> np.ndarray:
    """Map raw scores, substituting the fit's sentinel clamp for +inf."""
    s = np.asarray(s_obj, dtype=np.float64)
    if p.sentinel_clamp is not None:
        s = np.where(s == np.inf, p.sentinel_clamp, s)
    return np.asarray(apply_logistic(p, s), dtype=np.float64).reshape(s.shape)


def is_monotone_increasing(p: LogisticParams) -> bool:
    return math.copysign(1.0, p.b4) * math.copysign(1.0, p.b1 - p.b2) > 0
