"""Command-line entry point.

Exit codes: 0 success, 1 usage or validation error, 2 missing file,
3 internal error.
"""

from __future__ import annotations

import argparse
import sys

from cropfeat.errors import ExtractError
from cropfeat.jobs import BOX_MODES, ExtractJob, derive_boxes, embed_crops


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_model_flags(sub):
    sub.add_argument("--device", default="cpu")
    sub.add_argument("--weights", default=None, help="model weight file")
    sub.add_argument("--weights-sha256", default=None, help="pinned content hash")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cropfeat", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True)

    embed = subs.add_parser("embed", help="encode crop requests into a feature cache")
    embed.add_argument("--root", required=True, help="directory holding the images")
    embed.add_argument("--manifest", required=True, help="dataset manifest JSON")
    embed.add_argument("--crops", required=True, help="crop-request manifest (NDJSON)")
    embed.add_argument("--out", required=True, help="output cache path")
    embed.add_argument("--encoder", default="pooled-patch")
    embed.add_argument("--batch-size", type=int, default=32)
    _add_model_flags(embed)

    boxes = subs.add_parser("boxes", help="derive object boxes into the manifest")
    boxes.add_argument("--root", required=True, help="directory holding the images")
    boxes.add_argument("--manifest", required=True, help="dataset manifest JSON")
    boxes.add_argument("--mode", required=True, choices=BOX_MODES)
    boxes.add_argument("--out", required=True, help="output manifest path")
    boxes.add_argument("--model", default=None,
                       help="segmenter id (defaults per mode)")
    _add_model_flags(boxes)

    return parser


def _job_from_args(args) -> ExtractJob:
    job = ExtractJob(
        dataset_root=args.root,
        crop_manifest=getattr(args, "crops", "-"),
        output_cache=args.out,
        device=args.device,
        batch_size=getattr(args, "batch_size", 1),
        weights=args.weights,
        weights_sha256=args.weights_sha256,
    )
    if getattr(args, "encoder", None):
        job.encoder_id = args.encoder
    model = getattr(args, "model", None)
    if model:
        job.segmenter_id = model
        job.saliency_id = model
    return job


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "embed":
            job = _job_from_args(args)
            count = embed_crops(job, args.manifest)
            print(f"wrote {count} records to {job.output_cache}")
        else:
            job = _job_from_args(args)
            written, skipped = derive_boxes(job, args.manifest, args.mode, args.out)
            print(
                f"derived {written} {args.mode} boxes ({skipped} empty) -> {args.out}"
            )
        return 0
    except SystemExit:
        raise
    except FileNotFoundError as exc:
        print(f"cropfeat: {exc}", file=sys.stderr)
        return 2
    except ExtractError as exc:
        print(f"cropfeat: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(f"cropfeat: internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
