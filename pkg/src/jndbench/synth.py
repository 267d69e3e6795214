"""Synthetic JND datasets with known ground truth.

Per (source, codec) the perceived distortion follows an exponential
rate-distortion curve d(r) = alpha * exp(-beta * r); boosted stimuli follow
t(d) = gamma1 * d + gamma2 * d**2. Synthetic metrics are monotone maps of the
JND mean plus Gaussian noise in JND units, so their quality ordering is known.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from jndbench.dataset import (
    MetricScoreTable,
    Polarity,
    StimulusRecord,
    SubjectiveDataset,
)

# Probit slope putting a 1 JND gap at 75% correct: Phi^-1(0.75).
PROBIT_SCALE = float(stats.norm.ppf(0.75))

CODEC_NAMES = ("avif", "jpeg", "jpeg2000", "jpegxl", "vvc", "jpegai")


class SynthConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RateDistortionModel:
    alpha: float
    beta: float
    gamma1: float = 1.0
    gamma2: float = 0.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise SynthConfigError("alpha and beta must be > 0")


def rd_curve(model: RateDistortionModel, rates) -> np.ndarray:
    r = np.asarray(rates, dtype=np.float64)
    if np.any(r < 0):
        raise SynthConfigError("rates must be >= 0")
    return model.alpha * np.exp(-model.beta * r)


def boost_map(model: RateDistortionModel, d):
    d = np.asarray(d, dtype=np.float64)
    out = model.gamma1 * d + model.gamma2 * d * d
    return float(out) if out.ndim == 0 else out


def choice_probability(d_i: float, d_j: float) -> float:
    """Probability that stimulus i is picked as the more distorted one."""
    return float(stats.norm.cdf(PROBIT_SCALE * (d_i - d_j)))


def sample_pair_choice(d_i: float, d_j: float, rng: np.random.Generator) -> str:
    """Simulated two-alternative forced choice; returns ``"i"`` or ``"j"``."""
    if d_i < 0 or d_j < 0:
        raise SynthConfigError("distortions must be >= 0")
    return "i" if rng.random() < choice_probability(d_i, d_j) else "j"


@dataclass(frozen=True)
class PredictorSpec:
    name: str
    noise: float = 0.0
    polarity: str = "higher"
    shape: str = "logit"
    crop_noise: float | None = None
    # Noise std grows as noise + noise_slope * jnd (heteroscedastic residuals).
    noise_slope: float = 0.0

    def __post_init__(self):
        if self.noise_slope < 0:
            raise SynthConfigError(f"{self.name}: noise_slope must be >= 0")
        if self.noise < 0 or (self.crop_noise is not None and self.crop_noise < 0):
            raise SynthConfigError(f"{self.name}: noise must be >= 0")
        if self.polarity not in ("higher", "lower"):
            raise SynthConfigError(f"{self.name}: polarity must be 'higher' or 'lower'")
        if self.shape not in ("logit", "linear"):
            raise SynthConfigError(f"{self.name}: shape must be 'logit' or 'linear'")


def _default_predictors():
    return (
        PredictorSpec("perfect", 0.0),
        PredictorSpec("quiet", 0.05, "higher"),
        PredictorSpec("noisy", 0.5, "lower"),
    )


@dataclass(frozen=True)
class SynthConfig:
    sources: int = 5
    codecs: int = 6
    levels: int = 10
    alpha_range: tuple[float, float] = (3.0, 4.0)
    beta_range: tuple[float, float] = (0.4, 0.8)
    rate_max: float = 4.0
    gamma1: float = 1.0
    gamma2: float = 0.1
    # sigma(d) = sigma_base + sigma_slope * d
    sigma_base: float = 0.05
    sigma_slope: float = 0.08
    predictors: tuple[PredictorSpec, ...] = field(default_factory=_default_predictors)
    seed: int = 0
    name: str = "synthetic"

    def __post_init__(self):
        if min(self.sources, self.codecs) < 1 or self.levels < 2:
            raise SynthConfigError("need sources >= 1, codecs >= 1, levels >= 2")
        lo, hi = self.alpha_range
        if not 0 < lo <= hi:
            raise SynthConfigError("alpha_range must satisfy 0 < lo <= hi")
        lo, hi = self.beta_range
        if not 0 < lo <= hi:
            raise SynthConfigError("beta_range must satisfy 0 < lo <= hi")
        if not self.rate_max > 0:
            raise SynthConfigError("rate_max must be > 0")
        if not (self.sigma_base > 0 and self.sigma_slope >= 0):
            raise SynthConfigError("sigma profile must be strictly positive")
        names = [p.name for p in self.predictors]
        if not names or len(set(names)) != len(names):
            raise SynthConfigError("predictor names must be non-empty and unique")

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise SynthConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            if "predictors" in d:
                d["predictors"] = tuple(PredictorSpec(**p) for p in d["predictors"])
            for key in ("alpha_range", "beta_range"):
                if key in d:
                    d[key] = tuple(float(v) for v in d[key])
            return cls(**d)
        except TypeError as exc:
            raise SynthConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path: str | os.PathLike) -> "SynthConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                return cls.from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise SynthConfigError(f"{path}: {exc}") from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["alpha_range"] = list(self.alpha_range)
        d["beta_range"] = list(self.beta_range)
        return d

    def sigma(self, d):
        return self.sigma_base + self.sigma_slope * np.asarray(d, dtype=np.float64)


def _predictor_scores(spec: PredictorSpec, jnd: np.ndarray, noise: float,
                      rng: np.random.Generator, lo: float, hi: float) -> np.ndarray:
    scale = noise + spec.noise_slope * jnd
    v = jnd + scale * rng.standard_normal(len(jnd)) if np.any(scale > 0) else jnd.copy()
    if spec.shape == "logit":
        # Inverse of a logistic with asymptotes lo/hi, so the perfect predictor
        # is reproduced exactly by the 4-parameter transform.
        eps = 1e-9 * (hi - lo)
        v = np.clip(v, lo + eps, hi - eps)
        s = 10.0 * np.log((v - lo) / (hi - v))
    else:
        s = 10.0 * v
    return 30.0 - s if spec.polarity == "higher" else 30.0 + s


def gen_dataset(config: SynthConfig | None = None) -> tuple[SubjectiveDataset, MetricScoreTable]:
    cfg = config or SynthConfig()
    rng = np.random.default_rng(cfg.seed)
    levels = np.arange(1, cfg.levels + 1)
    rates = cfg.rate_max * (cfg.levels - levels) / (cfg.levels - 1)
    records = []
    for s in range(cfg.sources):
        for c in range(cfg.codecs):
            model = RateDistortionModel(
                rng.uniform(*cfg.alpha_range), rng.uniform(*cfg.beta_range), cfg.gamma1, cfg.gamma2
            )
            codec = CODEC_NAMES[c % len(CODEC_NAMES)] + ("" if c < len(CODEC_NAMES) else str(c))
            for lvl, d in zip(levels, rd_curve(model, rates)):
                sid = f"src{s + 1:02d}_{codec}_l{lvl:02d}"
                records.append(
                    StimulusRecord(sid, f"src{s + 1:02d}", codec, int(lvl), float(d),
                                   float(cfg.sigma(d)))
                )
    ds = SubjectiveDataset(tuple(records), cfg.name)
    jnd = ds.jnd_mean
    lo, hi = -3.0, cfg.alpha_range[1] + 3.0
    entries: dict[tuple[str, str, str], float] = {}
    polarity: dict[str, Polarity] = {}
    ids = ds.ids
    for spec in cfg.predictors:
        polarity[spec.name] = Polarity(spec.polarity)
        variants = [("full", spec.noise)]
        if spec.crop_noise is not None:
            variants.append(("crop", spec.crop_noise))
        for variant, noise in variants:
            scores = _predictor_scores(spec, jnd, noise, rng, lo, hi)
            for sid, v in zip(ids, scores):
                entries[(spec.name, variant, sid)] = float(v)
    return ds, MetricScoreTable(entries, polarity)


def polarity_config(table: MetricScoreTable) -> dict[str, str]:
    return {m: table.polarity[m].value for m in table.metrics}

