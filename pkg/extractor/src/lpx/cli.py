"""``lpx``: extract next-token log-probability streams from local models."""

from __future__ import annotations

import argparse
import sys

from corrdim.lpstream import ContextMode

from .extract import ExtractionJob, extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lpx",
        description="Teacher-forced log-probability extraction into LPRS files.",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("extract", help="score a text file through a model")
    p.add_argument("--model", required=True,
                   help="model id or local path loadable by transformers")
    p.add_argument("--text", required=True, help="UTF-8 input text file")
    p.add_argument("--context", default="unbounded",
                   help='"unbounded" or "window:C"')
    p.add_argument("--reduce", type=int, default=None,
                   help="modulo reduction width applied before serialization")
    p.add_argument("--fp32", action="store_true",
                   help="store FP32 payload instead of FP16")
    p.add_argument("--stride", type=int, default=1,
                   help="window-mode positions scored per forward pass "
                   "(1 = exact per-position recomputation)")
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--device", default="cpu")
    p.add_argument("--out", required=True, help="output .lprs path")
    p.set_defaults(func=cmd_extract)
    return parser


def cmd_extract(args) -> int:
    job = ExtractionJob(
        model=args.model,
        text_path=args.text,
        out_path=args.out,
        context=ContextMode.parse(args.context),
        fp32=args.fp32,
        reduce_width=args.reduce,
        stride=args.stride,
        batch_size=args.batch,
        device=args.device,
    )
    out = extract(job)
    print(out)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"lpx: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
