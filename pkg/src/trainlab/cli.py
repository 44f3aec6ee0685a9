"""``trainlab``: one binary exposing the toolkit as subcommands.

Conventions: data goes to stdout, diagnostics to stderr; exit code 0 on
success, 1 on domain errors, 2 on usage errors.  Output is TSV (header plus
rows) or JSON, selected by --format or the TRAINLAB_FORMAT environment
variable; numbers are printed with 9 significant digits so identical inputs
give byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import batching, bleu, checkpoints, curves, schedule, subword


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        return f"{x:.9g}"
    return str(x)


def _round9(x: float) -> float:
    return float(f"{x:.9g}")


def _print_table(header: list[str], rows: list[list], fmt: str) -> None:
    if fmt == "json":
        doc = [
            {k: _round9(v) if isinstance(v, float) else v for k, v in zip(header, row)}
            for row in rows
        ]
        print(json.dumps(doc, ensure_ascii=False))
    else:
        print("\t".join(header))
        for row in rows:
            print("\t".join(_fmt(v) for v in row))


def _parse_steps(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s != ""]
    except ValueError:
        raise ValueError(f"bad step list {text!r}; expected comma-separated integers")


def _cmd_schedule(args) -> int:
    config = schedule.ScheduleConfig(
        learning_rate=args.lr, warmup_steps=args.warmup, scale_constant=args.scale_constant
    )
    if args.schedule_cmd == "eval":
        steps = _parse_steps(args.steps)
    else:
        steps = list(range(0, args.max_step + 1, args.stride))
    rows = [[s, schedule.actual_lr(config, s)] for s in steps]
    _print_table(["step", "rate"], rows, args.format)
    return 0


def _read_lengths_tsv(path: Path) -> list[batching.SentencePair]:
    pairs = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ValueError(f"{path}:{lineno}: expected id<TAB>src_len<TAB>tgt_len")
            try:
                pairs.append(batching.SentencePair(fields[0], int(fields[1]), int(fields[2])))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}")
    return pairs


def _cmd_pack(args) -> int:
    pairs = _read_lengths_tsv(Path(args.lengths))
    plan = batching.plan_batches(pairs, args.budget, args.max_length)
    for i, b in enumerate(plan.batches):
        print(json.dumps({
            "batch_index": i,
            "ids": list(b.ids),
            "bucket_max_len": b.bucket_max_len,
            "padded": b.padded_token_cost,
            "payload": b.payload_token_cost,
        }, ensure_ascii=False))
    padded = sum(b.padded_token_cost for b in plan.batches)
    payload = sum(b.payload_token_cost for b in plan.batches)
    print(json.dumps({"summary": {
        "batches": len(plan.batches),
        "padding_efficiency": _round9(payload / padded) if padded else 1.0,
        "excluded": len(plan.excluded),
        "exclusion_pct": _round9(100.0 * len(plan.excluded) / len(pairs)) if pairs else 0.0,
    }}, ensure_ascii=False))
    return 0


def _cmd_epochs(args) -> int:
    eff = schedule.effective_batch_size(args.batch, args.gpus)
    stats = batching.CorpusStats(total_subwords=args.subwords, pair_count=0)
    per_epoch = batching.steps_per_epoch(stats, eff)
    epochs = batching.epochs_from_steps(args.steps, eff, stats)
    _print_table(
        ["effective_batch", "steps_per_epoch", "epochs"],
        [[eff, per_epoch, epochs]],
        args.format,
    )
    return 0


def _cmd_bleu(args) -> int:
    config = bleu.BleuConfig(case_insensitive=not args.case_sensitive)
    result = bleu.score_translation_file(args.translation, args.reference, config)
    if args.format == "json":
        print(json.dumps({
            "score": _round9(result.score),
            "precisions": [_round9(p) for p in result.per_order_precisions],
            "brevity_penalty": _round9(result.brevity_penalty),
            "hyp_length": result.hyp_length,
            "ref_length": result.ref_length,
            "signature": result.signature,
        }))
    else:
        print(f"BLEU = {_fmt(result.score)}")
        print(result.signature)
    return 0


def _select_curves(args) -> list[curves.Curve]:
    all_curves = curves.ingest_events(args.events)
    matching = [c for c in all_curves if c.metric_name == args.metric]
    if not matching:
        known = sorted({c.metric_name for c in all_curves})
        raise ValueError(f"no curves for metric {args.metric!r}; metrics present: {known}")
    if getattr(args, "run", None) is not None:
        matching = [c for c in matching if c.source_run == args.run]
        if not matching:
            raise ValueError(f"no curves for run {args.run!r}")
    return matching


def _cmd_curves_tts(args) -> int:
    rows = []
    any_missed = False
    for curve in _select_curves(args):
        tts = curves.time_till_score(curve, args.threshold, args.smooth_window)
        achieved = tts is not None
        any_missed |= not achieved
        rows.append([
            curve.source_run, curve.metric_name, args.threshold,
            tts / curves.SECONDS_PER_HOUR if achieved else None,
            achieved,
        ])
    _print_table(["run", "metric", "threshold", "tts_hours", "achieved"], rows, args.format)
    return 1 if args.strict and any_missed else 0


def _single_curve(args) -> curves.Curve:
    matching = _select_curves(args)
    if len(matching) > 1:
        runs = sorted(c.source_run for c in matching)
        raise ValueError(f"metric {args.metric!r} present in several runs {runs}; use --run")
    return matching[0]


def _cmd_curves_plot(args) -> int:
    effective_batch = None
    if args.x == "examples":
        if args.batch is None:
            raise ValueError("--x examples requires --batch (and optionally --gpus)")
        effective_batch = schedule.effective_batch_size(args.batch, args.gpus)
    sys.stdout.write(curves.emit_plot_data(_single_curve(args), args.x, effective_batch))
    return 0


def _cmd_curves_speed(args) -> int:
    series = curves.convergence_speed(_single_curve(args), args.window)
    rows = [[t / curves.SECONDS_PER_HOUR, slope] for t, slope in series]
    _print_table(["hours", "value_per_hour"], rows, args.format)
    return 0


def _cmd_ckpt_avg(args) -> int:
    ckpts = [checkpoints.read_checkpoint(p) for p in args.inputs]
    avg = checkpoints.average_checkpoints(ckpts)
    checkpoints.write_checkpoint(avg, args.out)
    print(f"wrote {args.out} (step {avg.step}, {len(avg.tensors)} tensors)", file=sys.stderr)
    return 0


def _cmd_ckpt_watch(args) -> int:
    window = checkpoints.AveragingWindow(window_size=args.n, min_interval=args.min_interval)
    emitted = checkpoints.watch_and_average(
        args.dir, window, poll_interval=args.poll, patience=args.patience,
        out_dir=args.out_dir,
    )
    for path in emitted:
        print(path, flush=True)
    return 0


def _cmd_vocab_train(args) -> int:
    sample = subword.sample_corpus(args.inputs, args.budget)
    vocab = subword.train_vocab(sample, args.size)
    subword.save_vocab(vocab, args.out)
    print(
        f"wrote {args.out}: {len(vocab)} units, min_count={vocab.min_count}, "
        f"sample={vocab.sample_bytes} bytes", file=sys.stderr,
    )
    return 0


def _cmd_vocab_segment(args) -> int:
    vocab = subword.load_vocab(args.vocab)
    for line in sys.stdin:
        print(" ".join(subword.segment(line, vocab)))
    return 0


def _cmd_vocab_count(args) -> int:
    vocab = subword.load_vocab(args.vocab)
    pairs = []
    with open(args.pairs, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise ValueError(f"{args.pairs}:{lineno}: expected src<TAB>tgt")
            pairs.append((fields[0], fields[1]))
    stats = subword.count_corpus_subwords(pairs, vocab)
    _print_table(
        ["total_subwords", "pair_count"],
        [[int(stats.total_subwords), stats.pair_count]],
        args.format,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trainlab",
        description="Training-dynamics toolkit: schedules, batching, curves, "
        "checkpoints, subwords and BLEU.",
    )
    parser.add_argument(
        "--format", choices=["tsv", "json"],
        default=os.environ.get("TRAINLAB_FORMAT", "tsv"),
        help="output format (default tsv; env TRAINLAB_FORMAT)",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="increase log verbosity")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("schedule", help="evaluate the warmup/decay rate schedule")
    ssub = p.add_subparsers(dest="schedule_cmd", required=True)
    for name in ("eval", "plot"):
        sp = ssub.add_parser(name)
        sp.add_argument("--lr", type=float, default=0.20)
        sp.add_argument("--warmup", type=int, default=16000)
        sp.add_argument("--scale-constant", type=float, default=1.0)
        if name == "eval":
            sp.add_argument("--steps", required=True, help="comma-separated step list")
        else:
            sp.add_argument("--max-step", type=int, required=True)
            sp.add_argument("--stride", type=int, default=1)
        sp.set_defaults(func=_cmd_schedule)

    p = sub.add_parser("pack", help="plan token-budget batches from a lengths TSV")
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--max-length", type=int, default=None)
    p.add_argument("--lengths", required=True, help="TSV: id<TAB>src_len<TAB>tgt_len")
    p.set_defaults(func=_cmd_pack)

    p = sub.add_parser("epochs", help="steps/epoch and epochs for a corpus and batch setup")
    p.add_argument("--subwords", type=float, required=True)
    p.add_argument("--batch", type=int, required=True)
    p.add_argument("--gpus", type=int, default=1)
    p.add_argument("--steps", type=float, required=True)
    p.set_defaults(func=_cmd_epochs)

    p = sub.add_parser("bleu", help="score a translation file against a reference")
    p.add_argument("--translation", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--case-sensitive", action="store_true")
    p.set_defaults(func=_cmd_bleu)

    p = sub.add_parser("curves", help="learning-curve analytics over event logs")
    csub = p.add_subparsers(dest="curves_cmd", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--events", required=True)
    common.add_argument("--metric", required=True)
    common.add_argument("--run", default=None)
    sp = csub.add_parser("tts", parents=[common])
    sp.add_argument("--threshold", type=float, required=True)
    sp.add_argument("--smooth-window", type=int, default=None,
                    help="optional odd point count for moving-average pre-smoothing")
    sp.add_argument("--strict", action="store_true",
                    help="exit 1 when the threshold is never durably reached")
    sp.set_defaults(func=_cmd_curves_tts)
    sp = csub.add_parser("plot", parents=[common])
    sp.add_argument("--x", choices=["hours", "steps", "examples"], required=True)
    sp.add_argument("--batch", type=int, default=None)
    sp.add_argument("--gpus", type=int, default=1)
    sp.set_defaults(func=_cmd_curves_plot)
    sp = csub.add_parser("speed", parents=[common])
    sp.add_argument("--window", type=float, required=True, help="window in seconds")
    sp.set_defaults(func=_cmd_curves_speed)

    p = sub.add_parser("ckpt", help="checkpoint averaging")
    ksub = p.add_subparsers(dest="ckpt_cmd", required=True)
    sp = ksub.add_parser("avg")
    sp.add_argument("--inputs", nargs="+", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_ckpt_avg)
    sp = ksub.add_parser("watch")
    sp.add_argument("--dir", required=True)
    sp.add_argument("--n", type=int, default=8)
    sp.add_argument("--min-interval", type=float, default=3600.0)
    sp.add_argument("--poll", type=float, default=60.0)
    sp.add_argument("--patience", type=float, default=7200.0)
    sp.add_argument("--out-dir", default=None)
    sp.set_defaults(func=_cmd_ckpt_watch)

    p = sub.add_parser("vocab", help="subword vocabulary training and use")
    vsub = p.add_subparsers(dest="vocab_cmd", required=True)
    sp = vsub.add_parser("train")
    sp.add_argument("--inputs", nargs="+", required=True)
    sp.add_argument("--budget", type=int, required=True, help="byte budget per input file")
    sp.add_argument("--size", type=int, default=subword.DEFAULT_TARGET_SIZE)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_vocab_train)
    sp = vsub.add_parser("segment")
    sp.add_argument("--vocab", required=True)
    sp.set_defaults(func=_cmd_vocab_segment)
    sp = vsub.add_parser("count")
    sp.add_argument("--vocab", required=True)
    sp.add_argument("--pairs", required=True, help="TSV: src<TAB>tgt")
    sp.set_defaults(func=_cmd_vocab_count)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format not in ("tsv", "json"):
        # only reachable through the TRAINLAB_FORMAT default; flags are validated
        parser.error(f"invalid output format {args.format!r} (from TRAINLAB_FORMAT)")
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"trainlab: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
