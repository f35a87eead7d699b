"""Acceptance gate: one test per shipping criterion, one printed verdict each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the verdict
lines; each test hard-fails if its criterion is not met. The statistical
criteria run on the synthetic feature generator, so every number below
is reproducible bit-for-bit on any platform.
"""

import time

import numpy as np
import pytest

import oracles
from cropshot.boxes import BoundingBox, full_image_box, interpolate_context, mask_to_box, pad_box
from cropshot.cli import main
from cropshot.fusion import FusionConfig
from cropshot.probe import LinearHead, TrainConfig, predict_proba, train_head
from cropshot.runner import (
    FusionRunConfig,
    RunnerConfig,
    paired_sign_test,
    run_analysis,
    run_benchmark,
    run_fusion,
)
from cropshot.transduction import SoftKMeansConfig, run_soft_kmeans, soft_assign


def verdict(name: str, ok: bool, detail: str) -> None:
    print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


def random_box(rng, width, height):
    x0 = int(rng.integers(0, width - 1))
    y0 = int(rng.integers(0, height - 1))
    x1 = int(rng.integers(x0 + 1, width + 1))
    y1 = int(rng.integers(y0 + 1, height + 1))
    return BoundingBox(x0, y0, x1, y1)


def test_a1_geometry():
    rng = np.random.default_rng(101)
    started = time.perf_counter()
    failures = 0

    for _ in range(10_000):
        width = int(rng.integers(20, 400))
        height = int(rng.integers(20, 400))
        box = random_box(rng, width, height)
        lam1, lam2 = sorted(rng.uniform(0.0, 1.0, size=2))
        inner = interpolate_context(box, lam1, width, height)
        outer = interpolate_context(box, lam2, width, height)
        ok = (
            interpolate_context(box, 0.0, width, height) == box
            and interpolate_context(box, 1.0, width, height) == full_image_box(width, height)
            and outer.contains(inner)
            and inner.contains(box)
            and full_image_box(width, height).contains(outer)
            and full_image_box(width, height).contains(pad_box(box, rng.uniform(0, 50), width, height))
            and pad_box(box, rng.uniform(0, 50), width, height).contains(box)
        )
        failures += not ok

    for _ in range(200):
        mask = rng.random((24, 31)) < 0.1
        if not mask.any():
            mask[int(rng.integers(24)), int(rng.integers(31))] = True
        got = mask_to_box(mask)
        ys, xs = np.nonzero(mask)
        minimal = BoundingBox(xs.min(), ys.min(), xs.max() + 1, ys.max() + 1)
        failures += got != minimal

    elapsed = time.perf_counter() - started
    verdict(
        "A1 geometry",
        failures == 0 and elapsed < 5.0,
        f"10000 nesting cases + 200 mask minimality cases, "
        f"{failures} failures, {elapsed:.2f}s (< 5s)",
    )


def test_a2_probe():
    rng = np.random.default_rng(202)

    worst_rel = 0.0
    for _ in range(100):
        n, d, classes = 12, 5, 4
        X = rng.normal(size=(n, d))
        y = rng.integers(0, classes, size=n)
        y[:classes] = np.arange(classes)
        w = rng.uniform(0.5, 2.0, size=n)
        cfg = TrainConfig(learning_rate=0.1, epochs=1, l2_weight=1e-3,
                          normalize_features=False)
        result = train_head(X, y, classes, weights=w, config=cfg)
        dW = -np.asarray(result.head.W) / cfg.learning_rate
        db = -np.asarray(result.head.b) / cfg.learning_rate
        fW, fb = oracles.fd_grads(np.zeros((classes, d)), np.zeros(classes), X, y, w, 1e-3)
        scale = max(np.abs(fW).max(), np.abs(fb).max(), 1e-12)
        worst_rel = max(worst_rel, np.abs(dW - fW).max() / scale,
                        np.abs(db - fb).max() / scale)

    monotone_violations = 0
    for _ in range(50):
        X = rng.normal(size=(15, 6))
        y = rng.integers(0, 3, size=15)
        y[:3] = np.arange(3)
        w = rng.uniform(0.5, 2.0, size=15)
        result = train_head(
            X, y, 3, weights=w,
            config=TrainConfig(learning_rate=0.1, epochs=60),
        )
        monotone_violations += int((np.diff(result.losses) > 1e-12).any())

    uniform_err = np.abs(
        predict_proba(LinearHead(W=np.zeros((5, 7)), b=np.zeros(5)), np.ones(7)) - 0.2
    ).max()

    verdict(
        "A2 probe",
        worst_rel < 1e-5 and monotone_violations == 0 and uniform_err < 1e-12,
        f"max FD relative error {worst_rel:.2e} (< 1e-5) over 100 instances, "
        f"{monotone_violations} monotonicity violations over 50 instances at lr=0.1, "
        f"zero-head uniform error {uniform_err:.2e} (< 1e-12)",
    )


def test_a3_transduction():
    rng = np.random.default_rng(303)

    worst_row_sum = 0.0
    for _ in range(50):
        r = soft_assign(rng.normal(size=(9, 4)), rng.normal(size=(3, 4)),
                        beta=float(rng.uniform(0.1, 50)))
        worst_row_sum = max(worst_row_sum, np.abs(r.sum(axis=1) - 1.0).max())

    # fixed point: query mass sitting exactly on the anchored centroids
    support = np.array([[0.0, 0.0], [4.0, 0.0]])
    fixed = run_soft_kmeans(support, np.array([0, 1]), support.copy(), 2)
    fixed_ok = (
        fixed.converged
        and fixed.iterations == 1
        and np.abs(fixed.state.centroids - support).max() < 1e-12
    )

    agree = 0
    total = 0
    for _ in range(20):
        centers = rng.normal(size=(3, 2))
        centers = centers / np.linalg.norm(centers, axis=1, keepdims=True) * 4.0
        centers += np.arange(3)[:, None] * 4.0
        support_by_class = {
            c: centers[c] + rng.normal(scale=0.05, size=(3, 2)) for c in range(3)
        }
        labels = rng.integers(0, 3, size=30)
        query = centers[labels] + rng.normal(scale=0.05, size=(30, 2))
        feats = np.vstack([support_by_class[c] for c in range(3)])
        flat_labels = np.repeat(np.arange(3), 3)
        result = run_soft_kmeans(feats, flat_labels, query, 3,
                                 config=SoftKMeansConfig(beta=1e3))
        hard, _ = oracles.lloyd_oracle(support_by_class, query)
        agree += int((result.pseudolabels == hard).sum())
        total += len(hard)

    one_d = run_soft_kmeans(
        np.array([[-1.0], [1.0]]), np.array([0, 1]), np.array([[-0.6], [0.2], [0.9]]), 2
    )
    one_d_err = np.abs(
        one_d.state.centroids.ravel() - [-0.7868665787553001, 0.7043776997067567]
    ).max()

    verdict(
        "A3 transduction",
        worst_row_sum < 1e-9 and fixed_ok and agree == total and one_d_err < 1e-6,
        f"worst row-sum error {worst_row_sum:.2e} (< 1e-9), fixed point "
        f"{'held' if fixed_ok else 'broken'}, Lloyd agreement {agree}/{total}, "
        f"1-D frozen-oracle error {one_d_err:.2e} (< 1e-6)",
    )


def test_a4_synthetic_end_to_end(default_dataset):
    started = time.perf_counter()
    config = RunnerConfig(
        methods=("baseline", "gt-default"),
        sweep=(5,),
        runs=200,
        ways=5,
        n_test=100,
    )
    report = run_benchmark(default_dataset.manifest, default_dataset.store, config)
    elapsed = time.perf_counter() - started

    base = report.accuracies("baseline", 5)
    crop = report.accuracies("gt-default", 5)
    test = paired_sign_test(crop, base)
    base_mean = sum(base) / len(base)
    crop_mean = sum(crop) / len(crop)

    verdict(
        "A4 synthetic end-to-end",
        crop_mean > base_mean and test.p_value < 0.01 and elapsed < 120.0,
        f"5-way 5-shot, 200 episodes: baseline {base_mean:.4f} vs gt-default "
        f"{crop_mean:.4f}, sign test {test.wins}W/{test.losses}L/{test.ties}T "
        f"p={test.p_value:.2e} (< 0.01), {elapsed:.1f}s (< 120s)",
    )


def test_a5_mode_ordering(context_dataset):
    # class evidence carried largely by context: discarding originals
    # must cost accuracy relative to keeping the multi-crop set
    config = RunnerConfig(
        methods=("gt:replace", "gt:multiple"),
        sweep=(5,),
        runs=200,
        ways=5,
        n_test=100,
    )
    report = run_benchmark(context_dataset.manifest, context_dataset.store, config)
    replace = report.accuracies("gt:replace", 5)
    multiple = report.accuracies("gt:multiple", 5)
    test = paired_sign_test(multiple, replace)
    replace_mean = sum(replace) / len(replace)
    multiple_mean = sum(multiple) / len(multiple)

    verdict(
        "A5 mode ordering",
        replace_mean < multiple_mean and test.p_value < 0.01,
        f"200 episodes: replace {replace_mean:.4f} < multiple {multiple_mean:.4f}, "
        f"sign test {test.wins}W/{test.losses}L/{test.ties}T p={test.p_value:.2e} (< 0.01)",
    )


def test_a6_fusion(default_dataset, background_dataset):
    shared = dict(runs=40, ways=5, n_support=25, n_test=50)
    off = FusionRunConfig(fusion=FusionConfig(threshold=0.0), **shared)
    report_off, audit_off = run_fusion(
        default_dataset.manifest, default_dataset.store, off
    )
    base_off = [r.accuracy for r in report_off.per_run_rows() if r.method == "baseline"]
    fused_off = [r.accuracy for r in report_off.per_run_rows() if r.method == "fused"]
    reduction_ok = fused_off == base_off and all(
        row[2] == "original" for row in audit_off
    )

    config = FusionRunConfig(runs=1000, ways=5, n_support=25, n_test=100)
    report, _ = run_fusion(background_dataset.manifest, background_dataset.store, config)
    base_mean = report.mean_accuracy("baseline")
    fused_mean = report.mean_accuracy("fused")
    test = paired_sign_test(
        report.accuracies("fused"), report.accuracies("baseline")
    )

    verdict(
        "A6 fusion",
        reduction_ok and fused_mean >= base_mean - 0.005 and fused_mean > base_mean,
        f"tau=0 reduction {'bitwise-equal' if reduction_ok else 'DIVERGED'}; "
        f"default-tau over 1000 episodes: baseline {base_mean:.4f} -> fused "
        f"{fused_mean:.4f} (>= baseline - 0.005 and strictly greater; sign test "
        f"p={test.p_value:.2e})",
    )


def test_a7_analysis(default_dataset):
    result = run_analysis(default_dataset.manifest, default_dataset.store)
    increasing = all(b > a for a, b in zip(result.variances, result.variances[1:]))
    exact_zero = result.distances[-1] == 0.0

    # oracle: the class centroid at fraction t sits (1 - t) * ||m + h_c + g_bar||
    # from the full-image centroid, where g_bar is the realized mean
    # background of that class's images; only fresh noise remains random
    model = default_dataset.model()
    config = default_dataset.config
    per_class = len(default_dataset.ids) // config.classes
    norms = []
    for c in range(config.classes):
        g_bar = np.mean(
            [model.image_background(c, i) for i in range(per_class)], axis=0
        )
        norms.append(np.linalg.norm(model.context_direction(c) + g_bar))
    expected_slope = float(np.mean(norms))

    three_se = 3.0 * np.sqrt(2.0 / per_class) * config.noise_scale
    worst = max(
        abs(dist - (1.0 - lam) * expected_slope)
        for lam, dist in zip(result.fractions, result.distances)
    )

    verdict(
        "A7 analysis",
        increasing and exact_zero and worst < three_se,
        f"variance strictly increasing over {len(result.fractions)} grid points: "
        f"{increasing}; centroid distance vs (1-lambda)*slope oracle, worst "
        f"deviation {worst:.4f} (< 3 SE = {three_se:.4f}); distance at lambda=1 "
        f"exactly {result.distances[-1]}",
    )


def test_a8_cli_determinism(tmp_path):
    synth_a = tmp_path / "data_a"
    synth_b = tmp_path / "data_b"
    for out_dir in (synth_a, synth_b):
        assert main([
            "synth", "--out-dir", str(out_dir),
            "--classes", "5", "--dim", "8", "--per-class", "12", "--seed", "9",
        ]) == 0

    outputs = []
    for tag, data in (("a", synth_a), ("b", synth_b)):
        run_csv = tmp_path / f"run_{tag}.csv"
        fuse_csv = tmp_path / f"fuse_{tag}.csv"
        audit_csv = tmp_path / f"audit_{tag}.csv"
        curve_csv = tmp_path / f"curve_{tag}.csv"
        scatter_csv = tmp_path / f"scatter_{tag}.csv"
        common = ["--manifest", str(data / "manifest.json"),
                  "--store", str(data / "features.fscache")]
        assert main([
            "run", *common, "--out", str(run_csv),
            "--methods", "baseline", "gt-default", "--sweep", "5",
            "--runs", "2", "--n-test", "10", "--epochs", "60",
        ]) == 0
        assert main([
            "fuse", *common, "--out", str(fuse_csv), "--audit", str(audit_csv),
            "--runs", "2", "--n-support", "25", "--n-test", "10", "--epochs", "60",
        ]) == 0
        assert main([
            "analyze", *common, "--curve-out", str(curve_csv),
            "--scatter-out", str(scatter_csv),
        ]) == 0
        outputs.append([
            p.read_bytes()
            for p in (run_csv, fuse_csv, audit_csv, curve_csv, scatter_csv)
        ])

    identical = outputs[0] == outputs[1]
    caches_identical = (synth_a / "features.fscache").read_bytes() == (
        synth_b / "features.fscache"
    ).read_bytes() and (synth_a / "manifest.json").read_bytes() == (
        synth_b / "manifest.json"
    ).read_bytes()

    verdict(
        "A8 CLI determinism",
        identical and caches_identical,
        "synth + run + fuse + analyze invoked twice with the same seeds: "
        f"5 CSVs byte-identical: {identical}; feature caches byte-identical: "
        f"{caches_identical}",
    )
