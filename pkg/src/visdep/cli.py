"""Command-line pipeline: synth, train, analyze, filter, eval, sweep, plot.

Every run writes its resolved configuration to ``run.json`` in the output
directory; re-invoking any stage with the same inputs and seed reproduces
its artifacts byte for byte.  Exit codes: 0 success, 2 usage error,
3 data or invariant error, 4 numerical divergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import synth
from .dependence import profile_trace
from .diffusion import DEFAULT_NOISE_STEP, corrupt, make_schedule
from .filtering import (
    FilterStrategy,
    apply_filter,
    load_manifest,
    save_manifest,
    score_corpus,
)
from .halleval import ObjectLexicon, class_object_counts, co_occurrence, evaluate
from .plots import score_histogram_svg, trace_bars_svg, write_text
from .reweight import LossMode, ReweightConfig
from .seeding import derive_seed
from .toymodel import (
    TrainConfig,
    TrainingDiverged,
    generate_batch,
    load_params,
    save_params,
    teacher_forced_probs,
    train,
    write_train_log,
)
from .trace import TokenTrace, TraceError, TraceFile, read_traces, write_traces

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4

CORPUS_FILE = "corpus.jsonl"
CKPT_FILE = "ckpt.json"
TRAINLOG_FILE = "trainlog.csv"
REPORT_FILE = "report.json"
MANIFEST_FILE = "manifest.json"
SWEEP_FILE = "sweep.csv"
RUN_FILE = "run.json"
TRACES_FILE = "traces.jsonl"
ANALYSIS_FILE = "analysis.csv"
CLASS_COUNTS_FILE = "class_counts.csv"
COOCCUR_FILE = "cooccurrence.csv"
SCORE_HIST_SVG = "score_hist.svg"
SCORE_HIST_CSV = "score_hist.csv"


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_run(out: Path, command: str, config: dict) -> None:
    payload = {"command": command, "config": config}
    with open(out / RUN_FILE, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=42, help="root seed for every RNG stream")
    p.add_argument(
        "--out-dir",
        default=os.environ.get("VISDEP_OUT", "."),
        help="artifact directory (default: $VISDEP_OUT or cwd)",
    )


def _add_split_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--test-frac", type=float, default=0.2)
    p.add_argument(
        "--split-seed",
        type=int,
        default=42,
        help="seed for the train/test split; keep identical across stages "
        "so they agree on the held-out set even when --seed differs",
    )


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--loss", choices=[m.value for m in LossMode], default="mle")
    p.add_argument("--tau", type=float, default=0.5, help="softmax temperature for the weights")
    p.add_argument("--start-frac", type=float, default=0.5, help="fraction of training before re-weighting starts")
    p.add_argument("--no-eos-floor", action="store_true", help="disable the EOS weight floor")
    p.add_argument("--noise-step", type=int, default=DEFAULT_NOISE_STEP)
    p.add_argument("--epochs", type=int, default=2)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--lr", type=float, default=3e-3)
    p.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    _add_split_flags(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="visdep",
        description="Visual-dependence measurement, re-weighted training and hallucination evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    _add_common(p)
    p.add_argument("--scenes", type=int, required=True)
    p.add_argument("--objects", type=int, default=40)
    p.add_argument("--halluc-rate", type=float, default=0.6)
    p.add_argument("--jitter", type=float, default=0.05)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the toy model on a corpus")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--manifest", default=None, help="filter manifest restricting the training set")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("analyze", help="per-token CSV from a trace file")
    _add_common(p)
    p.add_argument("--traces", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("filter", help="score training samples and build a filter manifest")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--strategy", choices=[s.value for s in FilterStrategy], required=True)
    p.add_argument("--frac", type=float, required=True)
    p.add_argument("--test-frac", type=float, default=0.2)
    p.add_argument("--noise-step", type=int, default=DEFAULT_NOISE_STEP)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("eval", help="decode the test split and report hallucination metrics")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--test-frac", type=float, default=0.2)
    p.add_argument("--noise-step", type=int, default=DEFAULT_NOISE_STEP)
    p.add_argument("--max-len", type=int, default=40)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="train+eval across one hyperparameter axis")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--axis", choices=["tau", "start-frac", "noise-step"], required=True)
    p.add_argument("--values", type=float, nargs="+", required=True)
    _add_train_flags(p)
    p.add_argument("--max-len", type=int, default=40)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="SVG charts from traces and/or a score manifest")
    _add_common(p)
    p.add_argument("--traces", default=None)
    p.add_argument("--manifest", default=None)
    p.set_defaults(func=cmd_plot)

    return parser


def cmd_synth(args) -> int:
    out = _out_dir(args)
    cfg = synth.CorpusConfig(
        num_scenes=args.scenes,
        vocab_objects=args.objects,
        hallucination_rate=args.halluc_rate,
        sigma_jitter=args.jitter,
        seed=args.seed,
    )
    scenes = synth.generate_corpus(cfg)
    synth.write_corpus(scenes, out / CORPUS_FILE)
    _write_run(
        out,
        "synth",
        {
            "scenes": args.scenes,
            "objects": args.objects,
            "halluc_rate": args.halluc_rate,
            "jitter": args.jitter,
            "seed": args.seed,
        },
    )
    print(f"wrote {out / CORPUS_FILE} ({len(scenes)} scenes)")
    return EXIT_OK


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        optimizer=args.optimizer,
        seed=args.seed,
        reweight=ReweightConfig(
            mode=LossMode(args.loss),
            tau=args.tau,
            start_fraction=args.start_frac,
            eos_floor=not args.no_eos_floor,
        ),
        noise_step=args.noise_step,
    )


def _train_run_config(args) -> dict:
    return {
        "corpus": os.fspath(args.corpus),
        "manifest": os.fspath(args.manifest) if getattr(args, "manifest", None) else None,
        "loss": args.loss,
        "tau": args.tau,
        "start_frac": args.start_frac,
        "eos_floor": not args.no_eos_floor,
        "noise_step": args.noise_step,
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "lr": args.lr,
        "optimizer": args.optimizer,
        "test_frac": args.test_frac,
        "seed": args.seed,
    }


def cmd_train(args) -> int:
    out = _out_dir(args)
    scenes = synth.read_corpus(args.corpus)
    train_scenes, _ = synth.train_test_split(scenes, args.test_frac, args.seed)
    if args.manifest:
        manifest = load_manifest(args.manifest)
        kept = set(manifest.kept)
        train_scenes = [s for s in train_scenes if s.scene_id in kept]
    params, log = train(train_scenes, _train_config(args))
    save_params(params, out / CKPT_FILE)
    write_train_log(log, out / TRAINLOG_FILE)
    _write_run(out, "train", _train_run_config(args))
    print(f"wrote {out / CKPT_FILE} ({len(train_scenes)} training scenes, {len(log)} steps)")
    return EXIT_OK


def cmd_analyze(args) -> int:
    out = _out_dir(args)
    tf = read_traces(args.traces)
    lines = ["sample_id,t,surface,p_clean,p_noisy,d,class"]
    for tr in tf.traces:
        prof = profile_trace(tr)
        for t in range(len(tr)):
            surf = tr.surfaces[t].replace('"', '""')
            lines.append(
                f'{tr.sample_id},{t},"{surf}",{tr.p_clean[t]!r},{tr.p_noisy[t]!r},'
                f"{prof.d[t]!r},{prof.classes[t].value}"
            )
    write_text(out / ANALYSIS_FILE, "\n".join(lines) + "\n")
    _write_run(out, "analyze", {"traces": os.fspath(args.traces), "seed": args.seed})
    print(f"wrote {out / ANALYSIS_FILE} ({len(tf)} traces)")
    return EXIT_OK


def cmd_filter(args) -> int:
    out = _out_dir(args)
    scenes = synth.read_corpus(args.corpus)
    train_scenes, _ = synth.train_test_split(scenes, args.test_frac, args.seed)
    params = load_params(args.ckpt)
    scores = score_corpus(train_scenes, params, noise_step=args.noise_step, seed=args.seed)
    manifest = apply_filter(scores, FilterStrategy(args.strategy), args.frac, seed=args.seed)
    save_manifest(manifest, out / MANIFEST_FILE)
    _write_run(
        out,
        "filter",
        {
            "corpus": os.fspath(args.corpus),
            "ckpt": os.fspath(args.ckpt),
            "strategy": args.strategy,
            "frac": args.frac,
            "test_frac": args.test_frac,
            "noise_step": args.noise_step,
            "seed": args.seed,
        },
    )
    print(f"wrote {out / MANIFEST_FILE} (removed {len(manifest.removed)} of {len(scores)})")
    return EXIT_OK


def _eval_split(args):
    scenes = synth.read_corpus(args.corpus)
    _, test_scenes = synth.train_test_split(scenes, args.test_frac, args.seed)
    return test_scenes


def run_eval(params, test_scenes, noise_step: int, seed: int, max_len: int):
    """Decode test scenes, trace them against a noised condition, and score.

    Returns (trace_file, report, counts, histogram).
    """
    schedule = make_schedule()
    v_obj = params.v_obj
    features = np.array([s.feature for s in test_scenes])
    generated = generate_batch(params, features, max_len=max_len)
    responses = [g[1:] for g in generated]  # drop BOS; probabilities exist from there on
    targets = [list(r) for r in responses]
    clean_p = teacher_forced_probs(params, features, targets)
    noisy = np.stack(
        [
            corrupt(np.array(s.feature), noise_step, schedule, derive_seed(seed, "evalnoise", s.scene_id))
            for s in test_scenes
        ]
    )
    noisy_p = teacher_forced_probs(params, noisy, targets)
    traces = []
    for i, s in enumerate(test_scenes):
        resp = responses[i]
        traces.append(
            TokenTrace(
                sample_id=s.scene_id,
                tokens=resp,
                surfaces=synth.surfaces_for(resp, v_obj),
                p_clean=tuple(float(x) for x in clean_p[i]),
                p_noisy=tuple(float(x) for x in noisy_p[i]),
                eos_index=len(resp) - 1 if resp[-1] == synth.EOS_ID else None,
            )
        )
    tf = TraceFile(noise_step=noise_step, traces=tuple(traces), generator={"source": "toymodel-eval"})
    profiles = [profile_trace(tr) for tr in tf.traces]
    lexicon = ObjectLexicon.for_token_vocab(v_obj)
    truths = [set(s.true_objects) for s in test_scenes]
    report = evaluate(responses, truths, lexicon)
    counts = class_object_counts(profiles, responses, truths, lexicon)
    hist = co_occurrence(profiles, responses, truths, lexicon, window=3)
    return tf, report, counts, hist


def _write_eval_artifacts(out: Path, tf, report, counts, hist) -> None:
    write_traces(tf, out / TRACES_FILE)
    with open(out / REPORT_FILE, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    lines = ["class,grounded,hallucinated"]
    for cls in counts.grounded:
        lines.append(f"{cls.value},{counts.grounded[cls]},{counts.hallucinated[cls]}")
    write_text(out / CLASS_COUNTS_FILE, "\n".join(lines) + "\n")
    lines = ["class,bucket,count"]
    for cls, stats in hist.per_class.items():
        for d, c in enumerate(stats.counts):
            lines.append(f"{cls.value},{d},{c}")
        lines.append(f"{cls.value},beyond,{stats.beyond}")
        lines.append(f"{cls.value},absent,{stats.absent}")
        frac = stats.fraction_within
        lines.append(f"{cls.value},fraction_within,{'' if frac is None else repr(frac)}")
    write_text(out / COOCCUR_FILE, "\n".join(lines) + "\n")


def cmd_eval(args) -> int:
    out = _out_dir(args)
    test_scenes = _eval_split(args)
    params = load_params(args.ckpt)
    tf, report, counts, hist = run_eval(params, test_scenes, args.noise_step, args.seed, args.max_len)
    _write_eval_artifacts(out, tf, report, counts, hist)
    _write_run(
        out,
        "eval",
        {
            "corpus": os.fspath(args.corpus),
            "ckpt": os.fspath(args.ckpt),
            "test_frac": args.test_frac,
            "noise_step": args.noise_step,
            "max_len": args.max_len,
            "seed": args.seed,
        },
    )
    print(
        f"wrote {out / REPORT_FILE} "
        f"(chair_s={report.chair_s:.4f} chair_i={report.chair_i:.4f} recall={report.recall:.4f})"
    )
    return EXIT_OK


def cmd_sweep(args) -> int:
    out = _out_dir(args)
    scenes = synth.read_corpus(args.corpus)
    train_scenes, test_scenes = synth.train_test_split(scenes, args.test_frac, args.seed)
    rows = ["value,chair_s,chair_i,recall,mean_len"]
    for value in args.values:
        sub_args = argparse.Namespace(**vars(args))
        if args.axis == "tau":
            sub_args.tau = value
        elif args.axis == "start-frac":
            sub_args.start_frac = value
        else:
            sub_args.noise_step = int(value)
        cfg = _train_config(sub_args)
        params, _ = train(train_scenes, cfg)
        sub_out = out / f"{args.axis}-{value:g}"
        sub_out.mkdir(parents=True, exist_ok=True)
        save_params(params, sub_out / CKPT_FILE)
        tf, report, counts, hist = run_eval(
            params, test_scenes, sub_args.noise_step, args.seed, args.max_len
        )
        _write_eval_artifacts(sub_out, tf, report, counts, hist)
        rows.append(
            f"{value:g},{report.chair_s!r},{report.chair_i!r},{report.recall!r},{report.mean_len!r}"
        )
    write_text(out / SWEEP_FILE, "\n".join(rows) + "\n")
    _write_run(
        out,
        "sweep",
        {
            "corpus": os.fspath(args.corpus),
            "axis": args.axis,
            "values": list(args.values),
            "loss": args.loss,
            "tau": args.tau,
            "start_frac": args.start_frac,
            "eos_floor": not args.no_eos_floor,
            "noise_step": args.noise_step,
            "epochs": args.epochs,
            "batch_size": args.batch_size,
            "lr": args.lr,
            "optimizer": args.optimizer,
            "test_frac": args.test_frac,
            "max_len": args.max_len,
            "seed": args.seed,
        },
    )
    print(f"wrote {out / SWEEP_FILE} ({len(args.values)} rows)")
    return EXIT_OK


def cmd_plot(args) -> int:
    if not args.traces and not args.manifest:
        print("error: plot requires --traces and/or --manifest", file=sys.stderr)
        return EXIT_USAGE
    out = _out_dir(args)
    wrote = []
    if args.traces:
        tf = read_traces(args.traces)
        if len(tf) == 0:
            raise ValueError(f"{args.traces}: no traces to plot")
        for tr in tf.traces:
            prof = profile_trace(tr)
            path = out / f"trace_{tr.sample_id}.svg"
            write_text(path, trace_bars_svg(tr, prof))
            wrote.append(path.name)
    if args.manifest:
        manifest = load_manifest(args.manifest)
        svg, counts, edges = score_histogram_svg(list(manifest.scores.values()))
        write_text(out / SCORE_HIST_SVG, svg)
        lines = ["bin_lo,bin_hi,count"]
        for i, c in enumerate(counts):
            lines.append(f"{float(edges[i])!r},{float(edges[i + 1])!r},{int(c)}")
        write_text(out / SCORE_HIST_CSV, "\n".join(lines) + "\n")
        wrote.extend([SCORE_HIST_SVG, SCORE_HIST_CSV])
    _write_run(
        out,
        "plot",
        {
            "traces": os.fspath(args.traces) if args.traces else None,
            "manifest": os.fspath(args.manifest) if args.manifest else None,
            "seed": args.seed,
        },
    )
    print(f"wrote {len(wrote)} plot artifacts to {out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except TrainingDiverged as exc:
        print(f"error: diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (TraceError, ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
