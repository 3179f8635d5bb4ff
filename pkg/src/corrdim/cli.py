"""Command-line surface: reproducible analysis runs with JSON/CSV artifacts.

Exit codes: 0 success, 2 unfittable dimension window, 1 error.  Diagnostics
go to stderr; data goes to stdout or files.  Every JSON artifact embeds a
run manifest (canonical resolved invocation, config snapshot, input
digests, library version, seed, timestamp), so identical inputs and flags
produce identical outputs except for the timestamp field.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import dimension, geometry, lpstream, synth, textstats
from .dimension import CorrelationIntegral, FitConfig
from .geometry import ThresholdGrid

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNFITTABLE = 2


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _manifest(command: str, config: dict, inputs: list[str], seed=None) -> dict:
    canonical = command + "".join(
        f" --{k.replace('_', '-')} {v}" for k, v in sorted(config.items()) if v is not None
    )
    return {
        "command": canonical,
        "config": config,
        "inputs": {p: _sha256(p) for p in inputs},
        "version": __version__,
        "seed": seed,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }


def _emit_json(payload: dict, out_path):
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out_path:
        Path(out_path).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("CORRDIM_THREADS")
    return max(1, int(env)) if env else 1


def _fit_config(args) -> FitConfig:
    return FitConfig(
        eta=args.eta,
        min_count=args.min_count,
        eps_floor=args.eps_floor,
        min_points=args.min_points,
    )


def _add_fit_flags(p: argparse.ArgumentParser):
    p.add_argument("--eta", type=float, default=1.0, help="upper-clip coefficient")
    p.add_argument(
        "--min-count", type=int, default=dimension.DEFAULT_MIN_COUNT,
        help="lower-clip pair count",
    )
    p.add_argument(
        "--eps-floor", type=float, default=None,
        help="minimum threshold admitted to the fit window (use for exactly "
        "repetitive inputs whose small distances are numerical noise)",
    )
    p.add_argument(
        "--min-points", type=int, default=dimension.DEFAULT_MIN_POINTS,
        help="minimum grid points in the fit window",
    )


def cmd_analyze(args) -> int:
    stream = lpstream.read_stream(args.stream)
    cfg = _fit_config(args)
    report = dimension.analyze(
        stream,
        cfg=cfg,
        tau=args.tau,
        reduce_v=args.reduce,
        reduce_space=args.reduce_space,
        k_per_decade=args.grid_per_decade,
        sample=args.grid_sample,
        grid_seed=args.grid_seed,
        tile=args.tile,
        threads=_threads(args),
    )
    config = {
        "eta": cfg.eta,
        "min_count": cfg.min_count,
        "eps_floor": cfg.eps_floor,
        "min_points": cfg.min_points,
        "tau": args.tau,
        "reduce": args.reduce,
        "reduce_space": args.reduce_space if args.reduce is not None else None,
        "tile": args.tile,
        "grid_per_decade": args.grid_per_decade,
        "grid_sample": args.grid_sample,
        "grid_seed": args.grid_seed,
    }
    manifest = _manifest("analyze", config, [args.stream], seed=args.grid_seed)
    payload = report.to_dict()
    payload["manifest"] = manifest
    _emit_json(payload, args.json)
    if args.csv:
        report.write_csv(
            args.csv, comment="manifest: " + json.dumps(manifest, sort_keys=True)
        )
    return EXIT_OK if report.fit.fittable else EXIT_UNFITTABLE


def _read_ci_csv(path: str, n_steps_flag) -> CorrelationIntegral:
    eps, s, n_steps = [], [], n_steps_flag
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line[1:].strip().startswith("n_steps:") and n_steps_flag is None:
                    n_steps = int(line.split(":", 1)[1])
                continue
            first = line.split(",", 1)[0].strip()
            try:
                e = float(first)
            except ValueError:
                continue  # header row
            parts = line.split(",")
            eps.append(e)
            s.append(float(parts[1]))
    if n_steps is None:
        raise ValueError(
            "n_steps is required to apply the fit window; pass --n-steps or "
            "use a CSV with an '# n_steps:' header"
        )
    order = np.argsort(eps)
    eps_arr = np.asarray(eps, dtype=np.float64)[order]
    s_arr = np.asarray(s, dtype=np.float64)[order]
    return CorrelationIntegral(
        grid=ThresholdGrid(eps=eps_arr), s_values=s_arr, n_steps=n_steps
    )


def cmd_fit(args) -> int:
    cfg = _fit_config(args)
    ci = _read_ci_csv(args.csv, args.n_steps)
    fit = dimension.fit_dimension(ci, cfg)
    config = {
        "eta": cfg.eta,
        "min_count": cfg.min_count,
        "eps_floor": cfg.eps_floor,
        "min_points": cfg.min_points,
        "n_steps": ci.n_steps,
    }
    payload = {
        "n_steps": ci.n_steps,
        "d": fit.d,
        "window": list(fit.window) if fit.window else None,
        "n_points": fit.n_points,
        "r2": fit.r2,
        "eta_used": fit.eta_used,
        "s_bounds": list(fit.s_bounds),
        "fit_method": "ols-loglog",
        "manifest": _manifest("fit", config, [args.csv]),
    }
    _emit_json(payload, args.json)
    return EXIT_OK if fit.fittable else EXIT_UNFITTABLE


def cmd_recplot(args) -> int:
    stream = lpstream.read_stream(args.stream)
    rm = geometry.recurrence_matrix(stream, args.eps)
    manifest = _manifest("recplot", {"eps": args.eps}, [args.stream])
    comment = "manifest: " + json.dumps(manifest, sort_keys=True)
    wrote = False
    for out in args.out:
        suffix = Path(out).suffix.lower()
        if suffix == ".pgm":
            geometry.write_recurrence_pgm(rm, out, comment=comment)
        elif suffix == ".csv":
            geometry.write_recurrence_csv(rm, out, comment=comment)
        else:
            raise ValueError(f"unsupported recurrence output extension {suffix!r}")
        wrote = True
    if not wrote:
        raise ValueError("recplot requires at least one --out path")
    return EXIT_OK


def _write_text(text: str, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_synth(args) -> int:
    kind = args.kind
    if kind == "lin-tegmark":
        spec = synth.LinTegmarkSpec(
            q=args.q, depth=args.depth, branching=args.branching,
            root=args.root, seed=args.seed,
        )
        leaves = synth.gen_lin_tegmark(spec)
        _write_text("".join(str(int(v)) for v in leaves) + "\n", args.out)
        return EXIT_OK
    if kind == "repeat":
        _write_text(
            synth.gen_repetition_text(
                synth.RepetitionSpec(pattern=args.pattern, total_len=args.length)
            )
            + "\n",
            args.out,
        )
        return EXIT_OK
    if kind == "names":
        name_list = None
        if args.names_file:
            name_list = Path(args.names_file).read_text(encoding="utf-8").split()
        _write_text(
            synth.gen_random_names(args.tokens, name_list, seed=args.seed) + "\n",
            args.out,
        )
        return EXIT_OK

    if not args.out:
        raise ValueError(f"synth {kind} emits a binary stream; --out is required")
    if kind == "markov":
        if args.table:
            table = np.asarray(json.loads(Path(args.table).read_text()), dtype=np.float64)
        elif args.preset == "cycle":
            table = synth.cycle_transition(args.alphabet, noise=args.noise)
        else:
            table = synth.random_transition(
                args.order, args.alphabet, seed=args.seed,
                concentration=args.concentration,
            )
        spec = synth.MarkovSpec(
            order=args.order, alphabet=args.alphabet, transition=table, seed=args.seed
        )
        stream = synth.gen_markov_stream(spec, args.n_steps)
    elif kind == "polya":
        counts = tuple(float(c) for c in args.counts.split(","))
        spec = synth.PolyaSpec(
            initial_counts=counts, reinforcement=args.reinforcement, seed=args.seed
        )
        stream = synth.gen_polya_stream(spec, args.n_steps)
    elif kind == "gaussian":
        stream = synth.gen_gaussian_stream(args.dim, args.n_steps, seed=args.seed)
    elif kind == "walk":
        stream = synth.gen_random_walk_stream(
            args.dim, args.n_steps, step_sigma=args.step_sigma, seed=args.seed
        )
    else:  # pragma: no cover - argparse restricts choices
        raise ValueError(f"unknown synth kind {kind}")
    lpstream.write_stream(stream, args.out)
    return EXIT_OK


def _tokenize(text: str, tokenizer: str) -> list[str]:
    if tokenizer == "whitespace":
        return text.split()
    if tokenizer == "char":
        return [c for c in text if not c.isspace()]
    raise ValueError(f"unknown tokenizer {tokenizer!r}")


def cmd_textstats(args) -> int:
    text = Path(args.text).read_text(encoding="utf-8")
    tokens = _tokenize(text, args.tokenizer)
    metrics = {}
    wanted = args.metric
    if wanted in ("rep", "all"):
        metrics[f"rep_{args.n}"] = textstats.rep_n(tokens, args.n)
    if wanted in ("distinct", "all"):
        metrics[f"distinct_{args.n}"] = textstats.distinct_n(tokens, args.n)
    if wanted in ("zipf", "all"):
        metrics["zipf"] = textstats.zipf_coefficient(tokens, top_k=args.top_k)
    if wanted in ("heaps", "all"):
        metrics["heaps"] = textstats.heaps_coefficient(tokens)
    config = {
        "metric": wanted, "n": args.n, "top_k": args.top_k,
        "tokenizer": args.tokenizer,
    }
    payload = {
        "metrics": metrics,
        "n_tokens": len(tokens),
        "tokenizer": args.tokenizer,
        "manifest": _manifest("textstats", config, [args.text]),
    }
    _emit_json(payload, args.json)
    return EXIT_OK


def cmd_streamstats(args) -> int:
    stream = lpstream.read_stream(args.stream)
    norm = lpstream.validate_normalization(stream)
    payload = {
        "n_steps": stream.n_steps,
        "dim": stream.dim,
        "normalized_flag": stream.normalized,
        "max_abs_logsumexp": norm.max_abs,
        "conditional_entropy": (
            textstats.conditional_entropy(stream) if stream.normalized else None
        ),
        "perplexity": (
            textstats.perplexity(stream)
            if stream.normalized and stream.token_ids is not None
            else None
        ),
        "meta": stream.meta,
        "manifest": _manifest("streamstats", {}, [args.stream]),
    }
    _emit_json(payload, args.json)
    return EXIT_OK


def cmd_validate(args) -> int:
    stream = lpstream.read_stream(args.stream)
    norm = lpstream.validate_normalization(stream)
    payload = {
        "n_steps": stream.n_steps,
        "dim": stream.dim,
        "payload": str(stream.vectors.dtype),
        "has_token_ids": stream.token_ids is not None,
        "normalized_flag": stream.normalized,
        "max_abs_logsumexp": norm.max_abs,
        "valid": True,
    }
    _emit_json(payload, args.json)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corrdim",
        description="Correlation dimension of log-probability streams.",
    )
    parser.add_argument("--threads", type=int, default=None,
                        help="worker cap (fallback: CORRDIM_THREADS)")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("analyze", help="correlation-dimension report for a stream")
    p.add_argument("stream")
    _add_fit_flags(p)
    p.add_argument("--tau", type=int, default=1, help="delay-embedding width")
    p.add_argument("--reduce", type=int, default=None, help="modulo reduction width")
    p.add_argument("--reduce-space", choices=["prob", "log"], default="prob")
    p.add_argument("--tile", type=int, default=geometry.DEFAULT_TILE)
    p.add_argument("--grid-per-decade", type=int,
                   default=dimension.DEFAULT_POINTS_PER_DECADE)
    p.add_argument("--grid-sample", type=int, default=None)
    p.add_argument("--grid-seed", type=int, default=0)
    p.add_argument("--json", default=None, help="write JSON report here (default stdout)")
    p.add_argument("--csv", default=None, help="also write the (eps, S) table here")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fit", help="fit a dimension to an (eps, S) CSV")
    p.add_argument("csv")
    _add_fit_flags(p)
    p.add_argument("--n-steps", type=int, default=None,
                   help="stream length behind the CSV (overrides the header)")
    p.add_argument("--json", default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("recplot", help="recurrence matrix exports")
    p.add_argument("stream")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--out", action="append", default=[],
                   help=".pgm or .csv path (repeatable)")
    p.set_defaults(func=cmd_recplot)

    p = sub.add_parser("synth", help="synthetic corpora and oracle streams")
    p.add_argument("kind", choices=[
        "lin-tegmark", "markov", "polya", "gaussian", "walk", "repeat", "names",
    ])
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--q", type=float, default=0.5)
    p.add_argument("--depth", type=int, default=10)
    p.add_argument("--branching", type=int, default=2)
    p.add_argument("--root", type=int, default=0)
    p.add_argument("--order", type=int, default=1)
    p.add_argument("--alphabet", type=int, default=3)
    p.add_argument("--table", default=None, help="JSON file with the transition table")
    p.add_argument("--preset", choices=["random", "cycle"], default="random")
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--concentration", type=float, default=1.0)
    p.add_argument("--counts", default="1,1", help="comma-separated urn counts")
    p.add_argument("--reinforcement", type=float, default=1.0)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--n-steps", type=int, default=10000)
    p.add_argument("--step-sigma", type=float, default=1.0)
    p.add_argument("--pattern", default="01")
    p.add_argument("--length", type=int, default=1000)
    p.add_argument("--tokens", type=int, default=1024)
    p.add_argument("--names-file", default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("textstats", help="n-gram metrics for a text file")
    p.add_argument("text")
    p.add_argument("--metric", choices=["rep", "distinct", "zipf", "heaps", "all"],
                   default="all")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--top-k", type=int, default=1000)
    p.add_argument("--tokenizer", choices=["whitespace", "char"], default="whitespace")
    p.add_argument("--json", default=None)
    p.set_defaults(func=cmd_textstats)

    p = sub.add_parser("streamstats", help="perplexity / entropy of a stream")
    p.add_argument("stream")
    p.add_argument("--json", default=None)
    p.set_defaults(func=cmd_streamstats)

    p = sub.add_parser("validate", help="stream invariant check")
    p.add_argument("stream")
    p.add_argument("--json", default=None)
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return EXIT_ERROR
    except Exception as exc:  # all diagnostics on stderr, data on stdout
        print(f"corrdim: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
