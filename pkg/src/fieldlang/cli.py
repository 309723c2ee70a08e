"""Command-line entry point wiring the whole pipeline.

Subcommands: synth (generate cases or the full suite), analyze, compress,
train-codebook, describe, dataset, eval. Exit codes: 0 success, 1 data
error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import bench, codec, langgen, synth, viz
from .core import FieldLangError, load_case
from .features import DetectionParams, analyze

_SYNTH_CASES = ("uniform", "channel", "taylor-green", "cavity", "lamb-oseen", "suite")

DEFAULT_N = 256
DEFAULT_ALPHA = 0.05
DEFAULT_MIN_AREA = 16
DEFAULT_K = 512
DEFAULT_PATCH_SIZE = 16
DEFAULT_SEED = 42


def _add_detector_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--alpha", type=float, default=DEFAULT_ALPHA,
        help="vortex threshold as a fraction of max |vorticity| (default %(default)s)",
    )
    parser.add_argument(
        "--min-area", type=int, default=DEFAULT_MIN_AREA,
        help="minimum vortex component area in cells (default %(default)s)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fieldlang",
        description="Flow-field analysis, token compression, description generation, and scoring.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate analytic cases (FLD1 + sidecar)")
    p_synth.add_argument("case", choices=_SYNTH_CASES)
    p_synth.add_argument("--n", type=int, default=DEFAULT_N, help="grid side (default %(default)s)")
    p_synth.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p_synth.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_synth.add_argument("--png", action="store_true", help="also export the RGB mapping as PNG")

    p_analyze = sub.add_parser("analyze", help="print the analysis report for a field as JSON")
    p_analyze.add_argument("field", type=Path)
    _add_detector_args(p_analyze)

    p_compress = sub.add_parser("compress", help="tokenize a field with a trained codebook")
    p_compress.add_argument("field", type=Path)
    p_compress.add_argument("--codebook", type=Path, required=True)
    p_compress.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p_compress.add_argument(
        "--png", action="store_true",
        help="also export original/reconstructed RGB mappings and a comparison figure",
    )

    p_train = sub.add_parser("train-codebook", help="train a VQ codebook from a suite manifest")
    p_train.add_argument("manifest", type=Path)
    p_train.add_argument("--out", type=Path, required=True, help="codebook file to write")
    p_train.add_argument("--entries", type=int, default=DEFAULT_K, help="codebook size K")
    p_train.add_argument("--patch-size", type=int, default=DEFAULT_PATCH_SIZE)
    p_train.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_train.add_argument(
        "--max-fields", type=int, default=40,
        help="train on at most this many manifest fields (default %(default)s)",
    )

    p_describe = sub.add_parser("describe", help="render the textual answer for one task")
    p_describe.add_argument("field", type=Path)
    p_describe.add_argument("--task", choices=langgen.TASKS, default="field-analysis")
    p_describe.add_argument(
        "--record", action="store_true",
        help="emit a full training-record line instead of the bare answer",
    )
    p_describe.add_argument(
        "--codebook", type=Path, default=None,
        help="tokenize the field for the record's field reference",
    )
    p_describe.add_argument(
        "--polisher", default=None,
        help="polisher endpoint URL (default: FIELDLANG_POLISHER_URL)",
    )
    _add_detector_args(p_describe)

    p_dataset = sub.add_parser("dataset", help="build a training-record dataset from a manifest")
    p_dataset.add_argument("manifest", type=Path)
    p_dataset.add_argument("--codebook", type=Path, required=True)
    p_dataset.add_argument("--out", type=Path, required=True, help="records file to write")
    p_dataset.add_argument(
        "--tasks", nargs="+", choices=langgen.TASKS, default=list(langgen.TASKS)
    )
    _add_detector_args(p_dataset)

    p_eval = sub.add_parser("eval", help="score a manifest and write benchmark reports")
    p_eval.add_argument("manifest", type=Path)
    p_eval.add_argument(
        "--predictions", type=Path, default=None,
        help="external predictions file (default: run the builtin pipeline)",
    )
    p_eval.add_argument("--out", type=Path, default=Path("."), help="report output directory")
    p_eval.add_argument(
        "--figures", action="store_true", help="render an accuracy chart next to the reports"
    )
    _add_detector_args(p_eval)

    return parser


def _detection(args: argparse.Namespace) -> DetectionParams:
    return DetectionParams(alpha=args.alpha, min_area=args.min_area)


def _cmd_synth(args: argparse.Namespace) -> int:
    out: Path = args.out
    if args.case == "suite":
        manifest = synth.write_suite(out, n=args.n, seed=args.seed)
        count = sum(1 for _ in open(manifest, "r", encoding="utf-8"))
        print(f"wrote suite manifest {manifest} with {count} cases")
        if args.png:
            for case in synth.iter_suite(n=args.n, seed=args.seed):
                codec.save_png(codec.to_rgb(case.snapshot), out / f"{case.name}.png")
        return 0
    if args.case == "taylor-green":
        case = synth.gen_taylor_green(args.n)
    elif args.case == "channel":
        case = synth.gen_channel(args.n, 1.0)
    elif args.case == "uniform":
        case = synth.gen_uniform(args.n, 1.0, 0.0)
    elif args.case == "cavity":
        case = synth.gen_cavity_proxy(args.n, 100.0)
    else:
        case = synth.gen_lamb_oseen(
            args.n, [synth.LambOseenSpec(center=(0.5, 0.5), circulation=1.0, core_radius=0.05)]
        )
    entry = synth.write_case(case, out)
    print(f"wrote {out / entry['field']} and {out / entry['sidecar']}")
    if args.png:
        codec.save_png(codec.to_rgb(case.snapshot), out / f"{case.name}.png")
    return 0


def _cmd_analyze(args: argparse.Namespace) -> int:
    snapshot, props, _truth = load_case(args.field)
    report = analyze(snapshot, props, _detection(args))
    print(report.to_json())
    return 0


def _cmd_compress(args: argparse.Namespace) -> int:
    snapshot, _props, _truth = load_case(args.field)
    codebook = codec.load_codebook(args.codebook)
    image = codec.to_rgb(snapshot)
    tokens = codec.encode(image, codebook)
    stats = codec.compression_stats(snapshot, tokens, codebook)
    args.out.mkdir(parents=True, exist_ok=True)
    stem = args.field.stem
    tokens_path = args.out / f"{stem}.tokens.json"
    tokens_path.write_text(tokens.to_json() + "\n", encoding="utf-8")
    stats_path = args.out / f"{stem}.stats.json"
    stats_path.write_text(json.dumps(stats.to_dict(), indent=2) + "\n", encoding="utf-8")
    print(f"tokens: {len(tokens)}")
    print(f"reduction: {stats.reduction * 100.0:.3f}%")
    if args.png:
        recon = codec.decode(tokens, codebook, meta=image.meta)
        codec.save_png(image, args.out / f"{stem}.png")
        codec.save_png(recon, args.out / f"{stem}.recon.png")
        viz.save_comparison_figure(image, recon, args.out / f"{stem}.comparison.png")
    return 0


def _cmd_train_codebook(args: argparse.Namespace) -> int:
    entries = bench.load_manifest(args.manifest)
    if not entries:
        print("error: manifest lists no fields", file=sys.stderr)
        return 1
    # Stride through the manifest so the training pool spans all case families.
    step = max(1, len(entries) // args.max_fields)
    selected = entries[::step][: args.max_fields]
    patch_batches = []
    for entry in selected:
        snapshot, _props, _truth = load_case(entry.field_path)
        image = codec.to_rgb(snapshot)
        patch_batches.append(codec.extract_patches(image, args.patch_size))
    patches = np.concatenate(patch_batches, axis=0)
    codebook = codec.train_codebook(patches, args.entries, args.seed)
    codec.save_codebook(codebook, args.out)
    print(
        f"trained codebook: K={codebook.entry_count}, s={codebook.patch_size}, "
        f"{len(codebook.inertia_history)} iterations, "
        f"final inertia {codebook.inertia_history[-1]:.6g}"
    )
    return 0


def _field_reference(args: argparse.Namespace, snapshot) -> str:
    if args.codebook is not None:
        codebook = codec.load_codebook(args.codebook)
        tokens = codec.encode(codec.to_rgb(snapshot), codebook)
        return langgen.tokens_field_ref(tokens.tokens)
    return args.field.name


def _cmd_describe(args: argparse.Namespace) -> int:
    snapshot, props, _truth = load_case(args.field)
    report = analyze(snapshot, props, _detection(args))
    answer = langgen.render_answer(report, args.task)
    endpoint = args.polisher or os.environ.get("FIELDLANG_POLISHER_URL")
    if endpoint:
        client = langgen.PolisherClient(endpoint=endpoint)
        polished = langgen.polish(client, answer, report)
        if polished == answer:
            print("warning: polisher unavailable or rejected; using template text", file=sys.stderr)
        answer = polished
    if args.record:
        question = langgen.question_bank(args.task)[0]
        print(langgen.emit_training_record(_field_reference(args, snapshot), question, answer))
    else:
        print(answer)
    return 0


def _cmd_dataset(args: argparse.Namespace) -> int:
    entries = bench.load_manifest(args.manifest)
    codebook = codec.load_codebook(args.codebook)
    detection = _detection(args)
    count = 0
    with open(args.out, "w", encoding="utf-8") as fh:
        for entry in entries:
            snapshot, props, _truth = load_case(entry.field_path)
            report = analyze(snapshot, props, detection)
            tokens = codec.encode(codec.to_rgb(snapshot), codebook)
            ref = langgen.tokens_field_ref(tokens.tokens)
            for task in args.tasks:
                question = langgen.question_bank(task)[0]
                answer = langgen.render_answer(report, task)
                fh.write(langgen.emit_training_record(ref, question, answer) + "\n")
                count += 1
    print(f"wrote {count} training records to {args.out}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    if args.predictions is not None:
        report = bench.run_benchmark(
            args.manifest, mode="predictions", predictions_path=args.predictions
        )
    else:
        report = bench.run_benchmark(args.manifest, mode="builtin", detection=_detection(args))
    args.out.mkdir(parents=True, exist_ok=True)
    bench.emit_report(report, "json", args.out / "report.json")
    bench.emit_report(report, "csv", args.out / "report.csv")
    bench.emit_report(report, "markdown", args.out / "report.md")
    if args.figures:
        viz.save_accuracy_figure(report, args.out / "accuracy.png")
    if report.samples == 0:
        print("0 samples")
        return 0
    for name, score in (
        ("categorize", report.categorize),
        ("reynolds", report.reynolds),
        ("vortex", report.vortex),
        ("field_analysis", report.field_analysis),
    ):
        acc = score.accuracy
        print(f"{name}: {'NA' if acc is None else f'{acc:.2f}%'}")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "analyze": _cmd_analyze,
    "compress": _cmd_compress,
    "train-codebook": _cmd_train_codebook,
    "describe": _cmd_describe,
    "dataset": _cmd_dataset,
    "eval": _cmd_eval,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (FieldLangError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
