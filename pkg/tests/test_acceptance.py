"""Acceptance criteria 1-9.

Run with ``pytest tests/test_acceptance.py`` (or ``python tests/test_acceptance.py``);
a per-criterion PASS/FAIL/SKIP summary is printed at the end.

Criteria 7 and 8 need the released AIC-3 data. Point JNDBENCH_AIC3_DIR at a
directory holding:

    dataset.csv     subjective scores (stimulus_id,source_id,codec_id,distortion_level,jnd_mean,jnd_std)
    scores.csv      released metric scores (metric,variant,stimulus_id,score), incl. PSNRY, CVVDP, IW-SSIM
    polarity.json   optional, for metric names without a built-in polarity
    manifest.csv    optional, stimulus_id,ref,dist,variant for native PSNR-Y (paths relative to the dir)
"""

from __future__ import annotations

import math
import os
import sys
import time
from pathlib import Path

import numpy as np
import pytest

import images
import oracles
from jndbench.criteria import criteria_report, kendall_tau, llr, srocc, z_rmse
from jndbench.dataset import (
    FidelityRange,
    MetricScoreTable,
    Polarity,
    filter_by_fidelity,
    join,
    load_metric_scores_csv,
    load_subjective_csv,
)
from jndbench.imgmetrics import (
    NATIVE_METRICS,
    PERFECT_VALUES,
    RgbImage,
    compute_images,
    decode_png,
    gmsd,
    haar_psi,
    ms_ssim,
    nlpd,
    psnr_y,
    ssim,
    to_luma_bt709,
    uqi,
)
from jndbench.kernelreg import linear_trend, residual_curves
from jndbench.stattests import (
    mrr_from_correlations,
    mrr_test,
    signed_rank_z,
    significance_matrix,
    two_sided_p,
    wilcoxon_test,
)
from jndbench.synth import PredictorSpec, SynthConfig, gen_dataset
from jndbench.transform import LogisticParams, fit_logistic, transformed

AIC3_ENV = "JNDBENCH_AIC3_DIR"


def aic3_dir() -> Path:
    d = os.environ.get(AIC3_ENV)
    if not d or not (Path(d) / "dataset.csv").is_file() or not (Path(d) / "scores.csv").is_file():
        pytest.skip(f"released AIC-3 data not available (set {AIC3_ENV})")
    return Path(d)


def load_aic3():
    d = aic3_dir()
    pol = d / "polarity.json"
    ds = load_subjective_csv(d / "dataset.csv")
    table = load_metric_scores_csv(d / "scores.csv", pol if pol.is_file() else None)
    return d, ds, table


@pytest.mark.acceptance(1, "LLR identity")
def test_criterion_1_llr_identity(record_property):
    rng = np.random.default_rng(2024)
    cases = []
    for _ in range(1000):
        n = int(rng.integers(1, 501))
        scale = 10 ** rng.uniform(-3, 3)
        cases.append((rng.normal(0, scale, n), rng.normal(0, scale, n), 10 ** rng.uniform(-3, 1, n)))
    start = time.perf_counter()
    worst = 0.0
    for pred, target, sigma in cases:
        a = llr(pred, target, sigma)
        b = len(pred) / 2 * z_rmse(pred, target, sigma) ** 2
        worst = max(worst, abs(a - b) / max(a, 1e-30))
    elapsed = time.perf_counter() - start
    record_property("detail", f"max rel err {worst:.2e}, {elapsed:.3f}s")
    assert worst < 1e-12
    assert elapsed < 1.0


@pytest.mark.acceptance(2, "rank-criteria oracles")
def test_criterion_2_rank_oracles(record_property):
    rng = np.random.default_rng(7)
    worst_s = worst_k = 0.0
    for _ in range(200):
        n = int(rng.integers(3, 120))
        x = rng.permutation(n) + rng.uniform(0, 0.5, n)  # tie-free
        y = x + rng.normal(0, n / 4, n)
        expect = oracles.pearson(oracles.ranks_tie_free(list(x)), oracles.ranks_tie_free(list(y)))
        worst_s = max(worst_s, abs(srocc(x, y) - expect))
    for _ in range(60):
        n = int(rng.integers(3, 201))
        x = rng.integers(0, 12, n)  # ties on purpose: tau-b
        y = x + rng.integers(-4, 5, n)
        if np.ptp(x) == 0 or np.ptp(y) == 0:
            continue
        worst_k = max(worst_k, abs(kendall_tau(x, y) - oracles.kendall_tau_b(list(x), list(y))))
    record_property("detail", f"SROCC max err {worst_s:.1e}, KT max err {worst_k:.1e}")
    assert worst_s < 1e-12
    assert worst_k < 1e-12


@pytest.mark.acceptance(3, "Wilcoxon exactness")
def test_criterion_3_wilcoxon(record_property):
    worst = 0.0
    for n in range(15, 31):
        for w in range(n * (n + 1) // 2 + 1):
            _, _, z = signed_rank_z(w, n)
            worst = max(worst, abs(two_sided_p(z) - oracles.signed_rank_exact_p(w, n)))
    rng = np.random.default_rng(3)
    worst_anti = 0.0
    for _ in range(200):
        n = int(rng.integers(15, 31))
        a, b = np.abs(rng.normal(0, 1, n)), np.abs(rng.normal(0.1, 1, n))
        ab, ba = wilcoxon_test(a, b), wilcoxon_test(b, a)
        worst_anti = max(worst_anti, abs(ab.z_stat + ba.z_stat), abs(ab.p_value - ba.p_value))
        assert ab.decision == -ba.decision
    record_property("detail", f"max |p - exact| {worst:.4f}, antisymmetry err {worst_anti:.1e}")
    assert worst < 0.02
    assert worst_anti < 1e-12


@pytest.mark.acceptance(4, "MRR correctness")
def test_criterion_4_mrr(record_property):
    rng = np.random.default_rng(4)
    s = rng.normal(size=50)
    a = s + rng.normal(size=50)
    same = mrr_test(a, a.copy(), s)
    assert same.z_stat == 0.0 and same.p_value == 1.0
    r = mrr_from_correlations(0.9, 0.6, 0.5, 30)
    hand = oracles.mrr_z(0.9, 0.6, 0.5, 30)
    p_hand = math.erfc(abs(hand) / math.sqrt(2))
    assert abs(r.z_stat - hand) < 1e-9 and abs(r.p_value - p_hand) < 1e-9
    b = s + 2 * rng.normal(size=50)
    base = mrr_test(a, b, s)
    for fa, fb in ((np.exp, np.cbrt), (lambda v: v**3, lambda v: 5 * v - 2)):
        other = mrr_test(fa(a), fb(b), s)
        assert other.decision == base.decision and other.z_stat == base.z_stat
    record_property("detail", f"Z={r.z_stat:.10f} (hand {hand:.10f}), p={r.p_value:.3e}")


@pytest.mark.acceptance(5, "logistic fit recovery")
def test_criterion_5_logistic(record_property):
    truth = LogisticParams(0.0, 4.0, 0.5, 0.1)
    s = np.linspace(0.0, 1.0, 50)
    y = truth(s)
    p1, p2 = fit_logistic(s, y), fit_logistic(s, y)
    err = float(np.max(np.abs(p1(s) - y)))
    record_property("detail", f"max pointwise err {err:.1e}")
    assert err < 1e-3
    assert p1 == p2


@pytest.mark.acceptance(6, "native metric sanity")
def test_criterion_6_native_metrics(record_property):
    ref = images.textured_rgb(176, 176, 11)
    got = dict(compute_images(RgbImage(ref), RgbImage(ref.copy())))
    assert list(got) == list(NATIVE_METRICS)
    assert got == PERFECT_VALUES
    worst = {}
    for _, r, d in images.pairs(64, 64):
        ly, dy = to_luma_bt709(RgbImage(r)), to_luma_bt709(RgbImage(d))
        x, y = oracles.luma(r), oracles.luma(d)
        checks = {
            "psnr_y": (psnr_y(ly, dy), oracles.psnr(x, y)),
            "ssim": (ssim(ly, dy), oracles.ssim(x, y)),
            "uqi": (uqi(ly, dy), oracles.uqi(x, y)),
            "nlpd": (nlpd(ly, dy), oracles.nlpd(x, y)),
            "gmsd": (gmsd(ly, dy), oracles.gmsd(x, y)),
            "haar_psi": (haar_psi(RgbImage(r), RgbImage(d)), oracles.haar_psi(r, d)),
        }
        for k, (a, b) in checks.items():
            worst[k] = max(worst.get(k, 0.0), abs(a - b))
    # MS-SSIM needs 5 scales of an 11-tap window: 176 px minimum.
    r = images.textured_rgb(176, 176, 1)
    d = images.distorted(r, "noise", 2)
    ly, dy = to_luma_bt709(RgbImage(r)), to_luma_bt709(RgbImage(d))
    worst["ms_ssim"] = abs(ms_ssim(ly, dy) - oracles.ms_ssim(oracles.luma(r), oracles.luma(d)))
    record_property("detail", "max err " + ", ".join(f"{k} {v:.0e}" for k, v in worst.items()))
    for k, v in worst.items():
        assert v < (1e-9 if k in ("haar_psi", "gmsd") else 1e-12), k


@pytest.mark.acceptance(7, "end-to-end with published data")
def test_criterion_7_published(record_property):
    start = time.perf_counter()
    d, ds, table = load_aic3()
    assert len(filter_by_fidelity(ds, "hf")) == 115
    assert len(filter_by_fidelity(ds, "mf")) == 185
    psnr = criteria_report(ds, table, "PSNRY")
    for name, got, want in (("plcc", psnr.plcc, 0.804), ("srocc", psnr.srocc, 0.812),
                            ("rmse", psnr.rmse, 0.554), ("kt", psnr.kt, 0.626)):
        assert abs(got - want) <= 0.01, f"PSNRY {name} {got:.3f} vs {want}"
    cv = criteria_report(ds, table, "CVVDP")
    assert abs(cv.outlier_ratio - 0.593) <= 0.01
    detail = f"PSNRY plcc {psnr.plcc:.3f} srocc {psnr.srocc:.3f} rmse {psnr.rmse:.3f} kt {psnr.kt:.3f}; CVVDP OR {cv.outlier_ratio:.3f}"
    manifest = d / "manifest.csv"
    if manifest.is_file():
        import csv

        entries, pol = {}, {"psnr_native": Polarity.HIGHER_IS_BETTER}
        with open(manifest, newline="") as fh:
            for row in csv.DictReader(fh):
                if row.get("variant", "full") != "full":
                    continue
                ref, dist = decode_png(d / row["ref"]), decode_png(d / row["dist"])
                psnr = psnr_y(to_luma_bt709(ref), to_luma_bt709(dist))
                entries[("psnr_native", "full", row["stimulus_id"])] = psnr
        native = criteria_report(ds, MetricScoreTable(entries, pol), "psnr_native")
        for got, want in ((native.plcc, 0.804), (native.srocc, 0.812), (native.rmse, 0.554), (native.kt, 0.626)):
            assert abs(got - want) <= 0.02
        detail += f"; native PSNRY srocc {native.srocc:.3f}"
    elapsed = time.perf_counter() - start
    record_property("detail", detail + f"; {elapsed:.1f}s")
    assert elapsed < 120


@pytest.mark.acceptance(8, "significance matrix with published scores")
def test_criterion_8_matrix(record_property):
    _, ds, table = load_aic3()
    metrics = table.metrics
    m = significance_matrix(ds, table, metrics, "mrr")
    cells, names = m.cells, m.metrics
    assert np.all(np.diag(cells) == 0) and np.all(cells == -cells.T)
    cv, iw = names.index("CVVDP"), names.index("IW-SSIM")
    # Column j beats row i when cells[i, j] == +1.
    assert all(cells[i, cv] == 1 for i in range(len(names)) if i != cv)
    assert all(cells[i, iw] == 1 for i in range(len(names)) if i not in (iw, cv))
    w = significance_matrix(ds, table, metrics, "wilcoxon")
    assert np.all(w.cells == -w.cells.T)
    record_property("detail", f"{len(names)} metrics; CVVDP and IW-SSIM rows as expected")


@pytest.mark.acceptance(9, "synthetic pipeline oracle")
def test_criterion_9_synthetic(record_property):
    cfg = SynthConfig(
        sources=5, codecs=4, levels=10, seed=2024,
        predictors=(PredictorSpec("perfect", 0.0), PredictorSpec("quiet", 0.05),
                    PredictorSpec("noisy", 0.5, "lower")),
    )
    ds, table = gen_dataset(cfg)
    assert len(ds) == 200
    decisions = {}
    for test in ("mrr", "wilcoxon"):
        m = significance_matrix(ds, table, ["noisy", "quiet"], test)
        assert m.metrics == ["quiet", "noisy"]
        decisions[test] = int(m.cells[1, 0])  # quiet column vs noisy row
    assert decisions == {"mrr": 1, "wilcoxon": 1}
    perfect = criteria_report(ds, table, "perfect")
    assert perfect.srocc == 1.0
    assert perfect.z_rmse < 1e-9

    het = gen_dataset(SynthConfig(
        sources=5, codecs=4, levels=10, seed=2024,
        predictors=(PredictorSpec("hetero", 0.1, noise_slope=0.03),),
    ))
    ds2, t2 = het
    series = join(ds2, t2, "hetero")
    pred = transformed(fit_logistic(series.scores, series.jnd_mean), series.scores)
    curves = residual_curves(series.jnd_mean, pred, series.jnd_std)
    up, down = linear_trend(curves["rmse"]), linear_trend(curves["z_rmse"])
    record_property("detail", f"quiet wins under MRR and Wilcoxon; perfect z_rmse {perfect.z_rmse:.1e}; "
                              f"RMSE trend {up:+.3f}, Z-RMSE trend {down:+.3f}")
    assert up > 0 and down < 0


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
