"""Command-line entry point.

Subcommands: synth, plan-crops, import-features, run, fuse, analyze.
Options come from defaults, then an optional JSON config file (sections
named after subcommands, nested keys like {"run": {"probe": {...}}}),
then explicit flags; later layers win. Paths are flags only.

Exit codes: 0 success, 1 validation/usage error, 2 missing data,
3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from cropshot import kernels
from cropshot.errors import (
    CodecError,
    CropshotError,
    MissingDataError,
    ValidationError,
)
from cropshot.featurestore import (
    FULL,
    FeatureStore,
    canonical_key,
    key_for_crop,
    read_crop_manifest,
    read_store,
    write_crop_manifest,
    write_store,
)
from cropshot.fusion import FusionConfig
from cropshot.manifest import load_manifest, save_manifest
from cropshot.probe import TrainConfig
from cropshot.report import (
    RunReport,
    write_fusion_audit,
    write_run_report,
    write_scatter,
    write_variance_curve,
)
from cropshot.runner import (
    FusionRunConfig,
    RunnerConfig,
    plan_crops,
    run_analysis,
    run_benchmark,
    run_fusion,
)
from cropshot.synth import DEFAULT_FRACTIONS, DEFAULT_PADS, make_dataset, preset_config
from cropshot.transduction import SoftKMeansConfig

logger = logging.getLogger("cropshot")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_MISSING_DATA = 2
EXIT_INTERNAL = 3


class _UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage errors; the exit-code contract
    # reserves 2 for missing data, so route usage errors through our own
    # validation path instead.
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _nest(flat: dict) -> dict:
    out: dict = {}
    for key, value in flat.items():
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return out


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def _load_config_section(path: str | None, section: str) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            document = json.load(fh)
    except FileNotFoundError:
        raise MissingDataError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ValidationError(f"config file {path} is not valid JSON: {e}")
    if not isinstance(document, dict):
        raise ValidationError(f"config file {path} must hold a JSON object")
    section_value = document.get(section, {})
    if not isinstance(section_value, dict):
        raise ValidationError(f"config section {section!r} must be an object")
    return section_value


def _options(args: argparse.Namespace, section: str) -> dict:
    """Config-file section overridden by explicitly supplied flags."""
    supplied = {
        key: value
        for key, value in vars(args).items()
        if key not in {"func", "config", "section", "command"}
        and not key.startswith("path_")
    }
    return _deep_merge(_load_config_section(args.config, section), _nest(supplied))


def _build(cls, options: dict, context: str):
    try:
        return cls(**options)
    except TypeError as e:
        raise ValidationError(f"bad {context} options: {e}")


def _pop_probe(options: dict) -> TrainConfig:
    return _build(TrainConfig, options.pop("probe", {}), "probe")


def _tupled(options: dict, *keys: str) -> dict:
    for key in keys:
        if key in options:
            options[key] = tuple(options[key])
    return options


# -- subcommands ---------------------------------------------------------


def _cmd_synth(args) -> int:
    options = _options(args, "synth")
    out_dir = Path(args.path_out_dir)
    preset = options.pop("preset", "default")
    per_class = options.pop("per_class", 100)
    name = options.pop("name", "synth")
    fractions = tuple(options.pop("fractions", DEFAULT_FRACTIONS))
    pads = tuple(options.pop("pads", DEFAULT_PADS))
    try:
        config = preset_config(preset, **options)
    except TypeError as e:
        raise ValidationError(f"bad synth options: {e}")
    dataset = make_dataset(
        config, per_class=per_class, name=name, fractions=fractions, pads=pads
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    save_manifest(dataset.manifest, out_dir / "manifest.json")
    write_store(dataset.store, out_dir / "features.fscache")
    print(
        f"wrote {len(dataset.manifest.images)} images and "
        f"{len(dataset.store)} feature records (dim {config.dim}) to {out_dir}"
    )
    return EXIT_OK


def _cmd_plan_crops(args) -> int:
    options = _options(args, "plan-crops")
    manifest = load_manifest(args.path_manifest)
    manifest.validate()
    fusion = _build(FusionConfig, _tupled(options.pop("fusion", {}), "crop_ladder"),
                    "fusion")
    requests = plan_crops(
        manifest,
        methods=options.pop("methods", ["gt-default"]),
        include_fusion_ladder=options.pop("fusion_ladder", False),
        fusion_config=fusion,
        strict=not options.pop("allow_missing_boxes", False),
    )
    count = write_crop_manifest(requests, args.path_out)
    print(f"wrote {count} crop requests to {args.path_out}")
    return EXIT_OK


def _cmd_import_features(args) -> int:
    manifest = load_manifest(args.path_manifest)
    manifest.validate()
    merged: FeatureStore | None = None
    total = 0
    for cache_path in args.path_caches:
        cache = read_store(cache_path)
        if merged is None:
            merged = FeatureStore(cache.dimension)
        elif cache.dimension != merged.dimension:
            raise ValidationError(
                f"cache {cache_path} has dim {cache.dimension}, expected {merged.dimension}"
            )
        for key in cache.keys():
            record = manifest.by_id(key.image_id)  # unknown id -> error
            if key.crop is not None:
                key.crop.validate_within(
                    record.width, record.height, context=f"crop for {key.image_id}"
                )
            canonical = key_for_crop(key.image_id, key.crop, record.width, record.height)
            vector = cache.get(key)
            if canonical in merged:
                existing = merged.get(canonical)
                if not (existing == vector).all():
                    raise ValidationError(
                        f"conflicting vectors for {canonical} across caches"
                    )
                continue
            merged.put(canonical, vector)
            total += 1
    if merged is None:
        raise ValidationError("no caches given")
    if args.path_crops is not None:
        requested = [r.key() for r in read_crop_manifest(args.path_crops)]
        missing = merged.missing(requested)
        if missing:
            raise MissingDataError(
                f"{len(missing)} requested features absent, first few: "
                + ", ".join(str(k) for k in missing[:5])
            )
    write_store(merged, args.path_out)
    print(
        f"imported {total} records (dim {merged.dimension}) from "
        f"{len(args.path_caches)} caches to {args.path_out}"
    )
    return EXIT_OK


def _cmd_run(args) -> int:
    options = _tupled(_options(args, "run"), "methods", "sweep")
    probe = _pop_probe(options)
    soft_kmeans = _build(SoftKMeansConfig, options.pop("soft_kmeans", {}), "soft_kmeans")
    config = _build(
        RunnerConfig,
        {**options, "probe": probe, "soft_kmeans": soft_kmeans},
        "run",
    )
    manifest = load_manifest(args.path_manifest)
    manifest.validate()
    store = read_store(args.path_store)
    report = run_benchmark(manifest, store, config)
    write_run_report(report, args.path_out)
    for row in report.aggregate_rows():
        if row.seed == "mean":
            print(f"{row.method} n={row.n_labeled}: mean accuracy {row.accuracy:.4f}")
    print(f"wrote {len(report.rows)} rows to {args.path_out}")
    return EXIT_OK


def _cmd_fuse(args) -> int:
    options = _options(args, "fuse")
    probe = _pop_probe(options)
    fusion = _build(FusionConfig, _tupled(options.pop("fusion", {}), "crop_ladder"),
                    "fusion")
    config = _build(
        FusionRunConfig, {**options, "probe": probe, "fusion": fusion}, "fuse"
    )
    manifest = load_manifest(args.path_manifest)
    manifest.validate()
    store = read_store(args.path_store)
    report, audit = run_fusion(manifest, store, config)
    write_run_report(report, args.path_out)
    write_fusion_audit(audit, report.metadata, args.path_audit)
    baseline = report.mean_accuracy("baseline")
    fused = report.mean_accuracy("fused")
    print(
        f"baseline {baseline:.4f} -> fused {fused:.4f} "
        f"(gap {fused - baseline:+.4f}) over {config.runs} runs"
    )
    print(f"wrote {len(report.rows)} rows to {args.path_out}, audit to {args.path_audit}")
    return EXIT_OK


def _cmd_analyze(args) -> int:
    options = _options(args, "analyze")
    manifest = load_manifest(args.path_manifest)
    manifest.validate()
    store = read_store(args.path_store)
    fractions = tuple(options.pop("grid", [i / 10 for i in range(11)]))
    scatter_fraction = options.pop("scatter_fraction", 0.0)
    if options:
        raise ValidationError(f"unknown analyze options: {sorted(options)}")
    result = run_analysis(
        manifest, store, fractions=fractions, scatter_fraction=scatter_fraction
    )
    metadata = {
        "report": "analyze",
        "dataset": manifest.name,
        "grid": list(result.fractions),
        "scatter_fraction": scatter_fraction,
        "backend": kernels.BACKEND,
    }
    write_variance_curve(
        result.fractions, result.variances, result.distances, metadata, args.path_curve
    )
    write_scatter(result.scatter, metadata, args.path_scatter)
    print(
        f"wrote variance curve ({len(result.fractions)} rows) to {args.path_curve} "
        f"and scatter ({len(result.scatter)} rows) to {args.path_scatter}"
    )
    return EXIT_OK


# -- parser --------------------------------------------------------------


def _add_common(p: _Parser) -> None:
    p.add_argument("--config", default=None, help="JSON config file")


def build_parser() -> _Parser:
    parser = _Parser(prog="cropshot", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    p = sub.add_parser("synth", help="generate a synthetic manifest + feature cache")
    _add_common(p)
    p.add_argument("--out-dir", dest="path_out_dir", required=True)
    p.add_argument("--preset", default=S,
                   choices=["default", "background-heavy", "context-heavy"])
    p.add_argument("--per-class", dest="per_class", type=int, default=S)
    p.add_argument("--name", default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--classes", type=int, default=S)
    p.add_argument("--dim", type=int, default=S)
    p.add_argument("--foreground-scale", dest="foreground_scale", type=float, default=S)
    p.add_argument("--background-mean-scale", dest="background_mean_scale",
                   type=float, default=S)
    p.add_argument("--background-spread", dest="background_spread", type=float, default=S)
    p.add_argument("--class-context-scale", dest="class_context_scale",
                   type=float, default=S)
    p.add_argument("--noise-scale", dest="noise_scale", type=float, default=S)
    p.add_argument("--fractions", nargs="+", type=float, default=S)
    p.add_argument("--pads", nargs="+", type=float, default=S)
    p.set_defaults(func=_cmd_synth, section="synth")

    p = sub.add_parser("plan-crops", help="emit the crop-request manifest")
    _add_common(p)
    p.add_argument("--manifest", dest="path_manifest", required=True)
    p.add_argument("--out", dest="path_out", required=True)
    p.add_argument("--methods", nargs="+", default=S)
    p.add_argument("--fusion-ladder", dest="fusion_ladder", action="store_true",
                   default=S, help="also request test-time ladder crops")
    p.add_argument("--tau-ladder", dest="fusion.crop_ladder", nargs="+", type=float,
                   default=S)
    p.add_argument("--allow-missing-boxes", dest="allow_missing_boxes",
                   action="store_true", default=S)
    p.set_defaults(func=_cmd_plan_crops, section="plan-crops")

    p = sub.add_parser("import-features", help="validate and merge feature caches")
    _add_common(p)
    p.add_argument("--manifest", dest="path_manifest", required=True)
    p.add_argument("--out", dest="path_out", required=True)
    p.add_argument("--crops", dest="path_crops", default=None,
                   help="crop manifest whose coverage must be complete")
    p.add_argument("path_caches", nargs="+", metavar="CACHE")
    p.set_defaults(func=_cmd_import_features, section="import-features")

    p = sub.add_parser("run", help="benchmark methods over a support-size sweep")
    _add_common(p)
    p.add_argument("--manifest", dest="path_manifest", required=True)
    p.add_argument("--store", dest="path_store", required=True)
    p.add_argument("--out", dest="path_out", required=True)
    p.add_argument("--methods", nargs="+", default=S)
    p.add_argument("--sweep", nargs="+", type=int, default=S)
    p.add_argument("--runs", type=int, default=S)
    p.add_argument("--seed", dest="base_seed", type=int, default=S)
    p.add_argument("--setting", choices=["inductive", "transductive"], default=S)
    p.add_argument("--ways", type=int, default=S)
    p.add_argument("--n-test", dest="n_test", type=int, default=S)
    p.add_argument("--query-budget", dest="query_budget", type=int, default=S)
    p.add_argument("--lr", dest="probe.learning_rate", type=float, default=S)
    p.add_argument("--epochs", dest="probe.epochs", type=int, default=S)
    p.add_argument("--l2", dest="probe.l2_weight", type=float, default=S)
    p.add_argument("--no-normalize", dest="probe.normalize_features",
                   action="store_false", default=S)
    p.add_argument("--beta", dest="soft_kmeans.beta", type=float, default=S)
    p.add_argument("--kmeans-max-iters", dest="soft_kmeans.max_iters", type=int,
                   default=S)
    p.add_argument("--kmeans-tol", dest="soft_kmeans.tol", type=float, default=S)
    p.set_defaults(func=_cmd_run, section="run")

    p = sub.add_parser("fuse", help="confidence-gated crop fusion at inference")
    _add_common(p)
    p.add_argument("--manifest", dest="path_manifest", required=True)
    p.add_argument("--store", dest="path_store", required=True)
    p.add_argument("--out", dest="path_out", required=True)
    p.add_argument("--audit", dest="path_audit", required=True)
    p.add_argument("--runs", type=int, default=S)
    p.add_argument("--seed", dest="base_seed", type=int, default=S)
    p.add_argument("--ways", type=int, default=S)
    p.add_argument("--n-support", dest="n_support", type=int, default=S)
    p.add_argument("--n-test", dest="n_test", type=int, default=S)
    p.add_argument("--crop-source", dest="crop_source", default=S)
    p.add_argument("--tau", dest="fusion.threshold", type=float, default=S)
    p.add_argument("--ladder", dest="fusion.crop_ladder", nargs="+", type=float,
                   default=S)
    p.add_argument("--no-include-original", dest="fusion.include_original",
                   action="store_false", default=S)
    p.add_argument("--lr", dest="probe.learning_rate", type=float, default=S)
    p.add_argument("--epochs", dest="probe.epochs", type=int, default=S)
    p.add_argument("--l2", dest="probe.l2_weight", type=float, default=S)
    p.add_argument("--no-normalize", dest="probe.normalize_features",
                   action="store_false", default=S)
    p.set_defaults(func=_cmd_fuse, section="fuse")

    p = sub.add_parser("analyze", help="variance curve and 2-D projection CSVs")
    _add_common(p)
    p.add_argument("--manifest", dest="path_manifest", required=True)
    p.add_argument("--store", dest="path_store", required=True)
    p.add_argument("--curve-out", dest="path_curve", required=True)
    p.add_argument("--scatter-out", dest="path_scatter", required=True)
    p.add_argument("--grid", nargs="+", type=float, default=S)
    p.add_argument("--scatter-fraction", dest="scatter_fraction", type=float, default=S)
    p.set_defaults(func=_cmd_analyze, section="analyze")

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=logging.INFO, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as e:
        print(f"missing file: {e}", file=sys.stderr)
        return EXIT_MISSING_DATA
    except MissingDataError as e:
        print(f"missing data: {e}", file=sys.stderr)
        return EXIT_MISSING_DATA
    except (ValidationError, CodecError) as e:
        print(f"invalid input: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except CropshotError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception:
        logger.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
