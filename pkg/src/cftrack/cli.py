"""Command-line interface.

Subcommands: `track` runs the tracker over a sequence directory, `eval`
scores a results file, `ablate` sweeps kept-proposal fractions, `synth`
writes a synthetic sequence, `bench` reports per-stage timings.

Exit codes: 0 on success, 2 on malformed input data, 3 on invalid
configuration.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import load_tracker_config
from .errors import ConfigError, FormatError
from .harness import (
    ablate_percentages,
    evaluate,
    load_otb_sequence,
    read_boxes,
    run_on_sequence,
    write_boxes,
)
from .synth import load_synth_spec, write_sequence
from .tracker import FrameTiming

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cftrack", description="correlation-filter tracker with proposal-based scale estimation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="track a sequence, one x,y,w,h line per frame")
    p.add_argument("seq_dir", help="directory with img/ and groundtruth_rect.txt")
    p.add_argument("--config", help="tracker configuration file")
    p.add_argument("--out", help="results file (stdout when omitted)")

    p = sub.add_parser("eval", help="score a results file against ground truth")
    p.add_argument("seq_dir")
    p.add_argument("results", help="results file from `track`")
    p.add_argument("--json", dest="json_path", help="also write a JSON report")

    p = sub.add_parser("ablate", help="sweep kept-proposal fractions")
    p.add_argument("seq_dir")
    p.add_argument("--config", help="tracker configuration file")
    p.add_argument("--fractions", default="0.3,0.5,0.7,1.0")
    p.add_argument("--instance", choices=("init", "prev", "both"), default="both")

    p = sub.add_parser("synth", help="write a synthetic sequence")
    p.add_argument("--spec", required=True, help="scene description file")
    p.add_argument("--out", required=True, help="output sequence directory")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("bench", help="per-stage timing table for a sequence")
    p.add_argument("seq_dir")
    p.add_argument("--config", help="tracker configuration file")
    return parser


def _cmd_track(args) -> int:
    cfg = load_tracker_config(args.config)
    seq = load_otb_sequence(args.seq_dir)
    result = run_on_sequence(seq, cfg)
    if args.out:
        write_boxes(args.out, result.states, one_based=True)
        report = evaluate(result.states, seq.groundtruth, result.timings)
        print(f"tracked {len(result.states)} frames at {report.fps:.1f} fps -> {args.out}")
    else:
        for state in result.states:
            b = state.box
            sys.stdout.write(f"{b.x + 1.0:.2f},{b.y + 1.0:.2f},{b.w:.2f},{b.h:.2f}\n")
    return 0


def _attribute_reports(seq, preds) -> dict:
    out = {}
    for tag in sorted(seq.attributes):
        sub = evaluate(preds, seq.groundtruth)
        out[tag] = {"dp20": sub.dp20, "auc": sub.auc}
    return out


def _cmd_eval(args) -> int:
    seq = load_otb_sequence(args.seq_dir)
    preds = read_boxes(args.results, one_based=True)
    if len(preds) != len(seq.groundtruth):
        raise FormatError(
            f"{len(preds)} result lines for {len(seq.groundtruth)} ground-truth boxes",
            path=args.results,
        )
    report = evaluate(preds, seq.groundtruth)
    print(f"sequence   {seq.name}")
    print(f"frames     {len(preds)}")
    print(f"dp20       {report.dp20:.4f}")
    print(f"auc        {report.auc:.4f}")
    if args.json_path:
        doc = report.to_dict()
        if seq.attributes:
            doc["attributes"] = _attribute_reports(seq, preds)
        with open(args.json_path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    return 0


def _cmd_ablate(args) -> int:
    cfg = load_tracker_config(args.config)
    try:
        fractions = tuple(float(p) for p in args.fractions.split(",") if p.strip())
    except ValueError:
        raise ConfigError(f"--fractions: expected numbers, got {args.fractions!r}") from None
    if not fractions:
        raise ConfigError("--fractions: at least one value required")
    seq = load_otb_sequence(args.seq_dir)
    try:
        rows = ablate_percentages(seq, cfg, fractions, instance_modes=(args.instance,))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    print(f"{'fraction':>8}  {'mode':>4}  {'dp20':>6}  {'auc':>6}  {'fps':>7}")
    for row in rows:
        print(f"{row.fraction:8.2f}  {row.instance_mode:>4}  {row.dp20:6.4f}  {row.auc:6.4f}  {row.fps:7.1f}")
    return 0


def _cmd_synth(args) -> int:
    spec = load_synth_spec(args.spec)
    try:
        paths = write_sequence(spec, args.seed, args.out)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    print(f"wrote {len(paths)} frames to {args.out}")
    return 0


def _cmd_bench(args) -> int:
    cfg = load_tracker_config(args.config)
    seq = load_otb_sequence(args.seq_dir)
    result = run_on_sequence(seq, cfg)
    report = evaluate(result.states, seq.groundtruth, result.timings)
    stages = [f.name for f in FrameTiming.__dataclass_fields__.values() if f.name != "total"]
    n = len(result.timings)
    print(f"{'stage':<14}{'mean ms':>10}{'share':>8}")
    total = sum(t.total for t in result.timings)
    for name in stages:
        spent = sum(getattr(t, name) for t in result.timings)
        share = spent / total if total > 0 else 0.0
        print(f"{name:<14}{1000.0 * spent / n:>10.3f}{100.0 * share:>7.1f}%")
    print(f"{'total':<14}{1000.0 * total / n:>10.3f}{'':>8}")
    print(f"fps        {report.fps:.1f}")
    print(f"dp20       {report.dp20:.4f}")
    print(f"auc        {report.auc:.4f}")
    return 0


_COMMANDS = {
    "track": _cmd_track,
    "eval": _cmd_eval,
    "ablate": _cmd_ablate,
    "synth": _cmd_synth,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
