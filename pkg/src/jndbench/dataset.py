"""Subjective datasets, metric score tables, fidelity slicing and joins.

CSV schemas
-----------
subjective: ``stimulus_id,source_id,codec_id,distortion_level,jnd_mean,jnd_std``
scores:     ``metric,variant,stimulus_id,score``

Polarity configs are JSON objects mapping a metric name to ``"higher"`` or
``"lower"``.
"""

from __future__ import annotations

import csv
import enum
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from jndbench._io import atomic_write_text

SUBJECTIVE_HEADER = (
    "stimulus_id",
    "source_id",
    "codec_id",
    "distortion_level",
    "jnd_mean",
    "jnd_std",
)
SCORES_HEADER = ("metric", "variant", "stimulus_id", "score")
VARIANTS = ("full", "crop")
HF_BOUNDARY = 1.0


class DatasetError(ValueError):
    """Base class for schema and validation failures."""


class MissingColumn(DatasetError):
    def __init__(self, column: str, path: str | None = None):
        self.column = column
        super().__init__(f"missing column {column!r}" + (f" in {path}" if path else ""))


class ParseError(DatasetError):
    def __init__(self, row: int, column: str, value: str, reason: str = "not a number"):
        self.row, self.column, self.value = row, column, value
        super().__init__(f"row {row}: column {column!r} value {value!r}: {reason}")


class DuplicateStimulus(DatasetError):
    def __init__(self, stimulus_id: str, row: int | None = None):
        self.stimulus_id, self.row = stimulus_id, row
        where = f" (row {row})" if row is not None else ""
        super().__init__(f"duplicate stimulus_id {stimulus_id!r}{where}")


class NonPositiveStd(DatasetError):
    def __init__(self, stimulus_id: str, value: float, row: int | None = None):
        self.stimulus_id, self.value, self.row = stimulus_id, value, row
        where = f"row {row}: " if row is not None else ""
        super().__init__(f"{where}jnd_std must be > 0 for {stimulus_id!r}, got {value!r}")


class EmptyTable(DatasetError):
    pass


class EmptySlice(DatasetError):
    pass


class NonFiniteScore(DatasetError):
    def __init__(self, metric: str, stimulus_id: str, value: str, row: int | None = None):
        self.metric, self.stimulus_id, self.row = metric, stimulus_id, row
        super().__init__(
            f"row {row}: non-finite score {value!r} for metric {metric!r}, stimulus {stimulus_id!r}"
        )


class MissingPolarity(DatasetError):
    def __init__(self, metrics: Iterable[str]):
        self.metrics = sorted(metrics)
        super().__init__(f"no polarity declared for metric(s): {', '.join(self.metrics)}")


class MissingScore(DatasetError):
    def __init__(self, metric: str, stimulus_id: str, variant: str = "full"):
        self.metric, self.stimulus_id, self.variant = metric, stimulus_id, variant
        super().__init__(f"no {variant!r} score for metric {metric!r}, stimulus {stimulus_id!r}")


class Polarity(enum.Enum):
    HIGHER_IS_BETTER = "higher"
    LOWER_IS_BETTER = "lower"


class FidelityRange(enum.Enum):
    """Fidelity slices of the JND scale, split at 1 JND."""

    ALL = "all"
    HF = "hf"
    MF = "mf"

    @property
    def label(self) -> str:
        return "All" if self is FidelityRange.ALL else self.name

    def contains(self, jnd_mean: float, boundary: float = HF_BOUNDARY) -> bool:
        if self is FidelityRange.ALL:
            return True
        if self is FidelityRange.HF:
            return jnd_mean <= boundary
        return jnd_mean > boundary

    @classmethod
    def parse(cls, value: "str | FidelityRange") -> "FidelityRange":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown fidelity range {value!r}; expected all, hf or mf") from None


# Native metrics and common external metrics. Anything else must be
# declared in a polarity config.
DEFAULT_POLARITY: dict[str, Polarity] = {
    name: Polarity.HIGHER_IS_BETTER
    for name in (
        "psnr_y", "ssim", "ms_ssim", "uqi", "haar_psi",
        "PSNRY", "PSNR-HVS", "SSIM", "MS-SSIM", "IW-SSIM", "UQI", "Haar-PSI",
        "FSIM", "FSIMc", "VSI", "VIF", "CVVDP", "HDR-VDP-2", "HDR-VDP-3",
        "SSIMULACRA2", "VMAF", "VMAF-NEG", "TOPIQ",
    )
}
DEFAULT_POLARITY.update(
    {
        name: Polarity.LOWER_IS_BETTER
        for name in (
            "gmsd", "nlpd", "GMSD", "NLPD", "FLIP", "LPIPS", "DISTS", "A-DISTS",
            "PieAPP", "SSIMULACRA1", "BUTTERAUGLI",
        )
    }
)


@dataclass(frozen=True)
class StimulusRecord:
    stimulus_id: str
    source_id: str
    codec_id: str
    distortion_level: int
    jnd_mean: float
    jnd_std: float

    def __post_init__(self):
        if not self.jnd_std > 0:
            raise NonPositiveStd(self.stimulus_id, self.jnd_std)
        if not self.jnd_mean >= 0 or not math.isfinite(self.jnd_mean):
            raise DatasetError(f"jnd_mean must be finite and >= 0 for {self.stimulus_id!r}")
        if self.distortion_level < 1:
            raise DatasetError(f"distortion_level must be >= 1 for {self.stimulus_id!r}")


@dataclass(frozen=True)
class SubjectiveDataset:
    records: tuple[StimulusRecord, ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if not self.records:
            raise EmptySlice(f"dataset {self.name!r} has no records")
        seen: set[str] = set()
        for rec in self.records:
            if rec.stimulus_id in seen:
                raise DuplicateStimulus(rec.stimulus_id)
            seen.add(rec.stimulus_id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def ids(self) -> list[str]:
        return [r.stimulus_id for r in self.records]

    @property
    def jnd_mean(self) -> np.ndarray:
        return np.array([r.jnd_mean for r in self.records], dtype=np.float64)

    @property
    def jnd_std(self) -> np.ndarray:
        return np.array([r.jnd_std for r in self.records], dtype=np.float64)


@dataclass(frozen=True)
class MetricScoreTable:
    """Raw objective scores keyed by ``(metric, variant, stimulus_id)``."""

    entries: Mapping[tuple[str, str, str], float]
    polarity: Mapping[str, Polarity] = field(default_factory=dict)

    def __post_init__(self):
        missing = {m for m, _, _ in self.entries} - set(self.polarity)
        if missing:
            raise MissingPolarity(missing)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def metrics(self) -> list[str]:
        """Metric names in first-appearance order."""
        return list(dict.fromkeys(m for m, _, _ in self.entries))

    def variants(self, metric: str) -> list[str]:
        return list(dict.fromkeys(v for m, v, _ in self.entries if m == metric))

    def score(self, metric: str, variant: str, stimulus_id: str) -> float:
        try:
            return self.entries[(metric, variant, stimulus_id)]
        except KeyError:
            raise MissingScore(metric, stimulus_id, variant) from None

    def merge(self, other: "MetricScoreTable") -> "MetricScoreTable":
        entries = dict(self.entries)
        entries.update(other.entries)
        return MetricScoreTable(entries, {**self.polarity, **other.polarity})


@dataclass(frozen=True)
class JoinedSeries:
    """Scores aligned with the dataset order."""

    stimulus_ids: list[str]
    scores: np.ndarray
    jnd_mean: np.ndarray
    jnd_std: np.ndarray

    def __len__(self) -> int:
        return len(self.stimulus_ids)


def is_psnr_like(metric: str) -> bool:
    return "psnr" in metric.lower()


def _parse_float(text: str, row: int, column: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(row, column, text) from None


def _check_header(header: list[str] | None, expected: tuple[str, ...], path: str):
    if header is None:
        raise EmptyTable(f"{path} is empty")
    header = [h.strip() for h in header]
    for col in expected:
        if col not in header:
            raise MissingColumn(col, path)
    return header


def load_subjective_csv(path: str | os.PathLike, name: str | None = None) -> SubjectiveDataset:
    """Read a subjective CSV; rows keep file order.

    Row numbers in errors count the header as row 1.
    """
    path = str(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = _check_header(next(reader, None), SUBJECTIVE_HEADER, path)
        col = {h: i for i, h in enumerate(header)}
        records = []
        seen: dict[str, int] = {}
        for rowno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(header):
                raise ParseError(rowno, header[len(row)], "", "missing field")
            get = lambda c: row[col[c]].strip()  # noqa: E731
            sid = get("stimulus_id")
            if sid in seen:
                raise DuplicateStimulus(sid, rowno)
            seen[sid] = rowno
            level_text = get("distortion_level")
            try:
                level = int(level_text)
            except ValueError:
                raise ParseError(rowno, "distortion_level", level_text, "not an integer") from None
            mean = _parse_float(get("jnd_mean"), rowno, "jnd_mean")
            std = _parse_float(get("jnd_std"), rowno, "jnd_std")
            if not std > 0 or not math.isfinite(std):
                raise NonPositiveStd(sid, std, rowno)
            if not mean >= 0 or not math.isfinite(mean):
                raise ParseError(rowno, "jnd_mean", get("jnd_mean"), "must be finite and >= 0")
            if level < 1:
                raise ParseError(rowno, "distortion_level", level_text, "must be >= 1")
            records.append(
                StimulusRecord(sid, get("source_id"), get("codec_id"), level, mean, std)
            )
    if not records:
        raise EmptyTable(f"{path} has no data rows")
    return SubjectiveDataset(tuple(records), name or Path(path).stem)


def _fmt(x: float) -> str:
    return repr(float(x))


def save_subjective_csv(ds: SubjectiveDataset, path: str | os.PathLike) -> None:
    lines = [",".join(SUBJECTIVE_HEADER)]
    for r in ds.records:
        lines.append(
            ",".join(
                [r.stimulus_id, r.source_id, r.codec_id, str(r.distortion_level),
                 _fmt(r.jnd_mean), _fmt(r.jnd_std)]
            )
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


def parse_polarity(config: Mapping[str, str] | str | os.PathLike | None) -> dict[str, Polarity]:
    """Polarity map from a dict, a JSON file path, or None (built-in defaults only)."""
    out = dict(DEFAULT_POLARITY)
    if config is None:
        return out
    if not isinstance(config, Mapping):
        with open(config, encoding="utf-8") as fh:
            config = json.load(fh)
    for metric, value in config.items():
        if isinstance(value, Polarity):
            out[metric] = value
            continue
        try:
            out[metric] = Polarity(str(value).lower())
        except ValueError:
            raise DatasetError(
                f"polarity for {metric!r} must be 'higher' or 'lower', got {value!r}"
            ) from None
    return out


def load_metric_scores_csv(
    path: str | os.PathLike,
    polarity_config: Mapping[str, str] | str | os.PathLike | None = None,
) -> MetricScoreTable:
    """Read a metric-score CSV.

    ``+inf`` is accepted only for PSNR-type metrics (identical images).
    """
    path = str(path)
    polarity = parse_polarity(polarity_config)
    entries: dict[tuple[str, str, str], float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = _check_header(next(reader, None), SCORES_HEADER, path)
        col = {h: i for i, h in enumerate(header)}
        for rowno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(header):
                raise ParseError(rowno, header[len(row)], "", "missing field")
            metric = row[col["metric"]].strip()
            variant = row[col["variant"]].strip()
            sid = row[col["stimulus_id"]].strip()
            text = row[col["score"]].strip()
            if variant not in VARIANTS:
                raise ParseError(rowno, "variant", variant, "expected 'full' or 'crop'")
            value = _parse_float(text, rowno, "score")
            if not math.isfinite(value) and not (value == math.inf and is_psnr_like(metric)):
                raise NonFiniteScore(metric, sid, text, rowno)
            key = (metric, variant, sid)
            if key in entries:
                raise DatasetError(f"row {rowno}: duplicate score for {key}")
            entries[key] = value
    if not entries:
        raise EmptyTable(f"{path} has no score rows")
    present = {m for m, _, _ in entries}
    missing = present - set(polarity)
    if missing:
        raise MissingPolarity(missing)
    return MetricScoreTable(entries, {m: polarity[m] for m in sorted(present)})


def save_metric_scores_csv(table: MetricScoreTable, path: str | os.PathLike) -> None:
    lines = [",".join(SCORES_HEADER)]
    for (metric, variant, sid), value in table.entries.items():
        lines.append(f"{metric},{variant},{sid},{_fmt(value)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def filter_by_fidelity(
    ds: SubjectiveDataset, fidelity: FidelityRange | str, boundary: float = HF_BOUNDARY
) -> SubjectiveDataset:
    fidelity = FidelityRange.parse(fidelity)
    if fidelity is FidelityRange.ALL:
        return ds
    kept = tuple(r for r in ds.records if fidelity.contains(r.jnd_mean, boundary))
    if not kept:
        raise EmptySlice(f"{fidelity.label} slice of {ds.name!r} is empty")
    return SubjectiveDataset(kept, ds.name)


def join(
    ds: SubjectiveDataset, table: MetricScoreTable, metric: str, variant: str = "full"
) -> JoinedSeries:
    scores = np.empty(len(ds), dtype=np.float64)
    for i, rec in enumerate(ds.records):
        key = (metric, variant, rec.stimulus_id)
        if key not in table.entries:
            raise MissingScore(metric, rec.stimulus_id, variant)
        scores[i] = table.entries[key]
    return JoinedSeries(ds.ids, scores, ds.jnd_mean, ds.jnd_std)
