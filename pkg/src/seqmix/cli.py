"""Command-line front end for the full pipeline.

Subcommands: ingest, select-k, train, evaluate, experiment, synth-gen.
Every command is reproducible from its inputs plus the master seed and
writes a run manifest listing all emitted artifacts with content digests.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import SeqmixError
from .evaluation import compute_metrics, predict_trace
from .harness import (
    ExperimentConfig,
    assign_folds,
    generate_synthetic,
    planted_spec,
    run_experiment,
    write_bundle,
)
from .kmeans import suggest_k, wcss_curve
from .markov import chain_to_dot
from .mixture import (
    fit_mixture,
    mixture_from_json,
    mixture_to_json,
    select_k_by_ic,
)
from .traces import (
    build_traces,
    dataset_features,
    read_raw_log,
    read_traces_jsonl,
    write_traces_jsonl,
)

SEED_ENV_VAR = "SEQMIX_SEED"


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(outdir: Path, command: str, args: argparse.Namespace,
                    inputs: list, outputs: list, started: float) -> Path:
    manifest = {
        "tool_version": __version__,
        "command": command,
        "config": {
            k: v for k, v in sorted(vars(args).items()) if k != "func" and not callable(v)
        },
        "seed": args.seed,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": {str(p): _sha256(p) for p in outputs},
        "wall_seconds": round(time.time() - started, 3),
    }
    path = outdir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    return path


def _parse_k_range(text: str) -> list[int]:
    if ":" in text:
        lo, hi = text.split(":")
        return list(range(int(lo), int(hi) + 1))
    return [int(x) for x in text.split(",")]


# --- subcommands --------------------------------------------------------------


def cmd_ingest(args) -> int:
    started = time.time()
    actions = read_raw_log(args.raw_log)
    data, dropped = build_traces(actions, args.min_feedback_seconds)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_traces_jsonl(data, out)
    counts = np.zeros(data.alphabet.size)
    for t in data.traces:
        counts += np.bincount(np.asarray(t.events), minlength=data.alphabet.size)
    total = counts.sum()
    print(f"traces written: {data.n_traces}")
    print(f"traces dropped (length < 2): {dropped}")
    if data.n_traces == 0:
        print("warning: no usable traces", file=sys.stderr)
    else:
        print("symbol distribution:")
        for s, c in zip(data.alphabet.symbols, counts):
            print(f"  {s}: {int(c)} ({100 * c / total:.1f}%)")
    _write_manifest(out.parent, "ingest", args, [args.raw_log], [out], started)
    return 0


def cmd_select_k(args) -> int:
    started = time.time()
    data = read_traces_jsonl(args.traces)
    k_range = _parse_k_range(args.k_range)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)

    if args.method == "wcss":
        curve = wcss_curve(dataset_features(data), k_range, seed=args.seed)
        report = {"method": "wcss", "curve": [{"k": k, "wcss": w} for k, w in curve]}
        best = min(curve, key=lambda kw: kw[1])[0]
        print(f"wcss curve over k={k_range}; minimum at k={best} (inspect the elbow)")
    elif args.method == "indices":
        k_best, votes = suggest_k(dataset_features(data), k_range, seed=args.seed)
        report = {"method": "indices", "k_best": k_best, "votes": votes}
        print(f"index voting suggests k={k_best} (votes: {votes})")
    elif args.method == "ic":
        result = select_k_by_ic(
            data, k_range, strategy=args.strategy, seed=args.seed,
            alpha=args.alpha, tol=args.tol, max_iters=args.max_iters,
            score_initial=args.score_initial,
        )
        report = {
            "method": "ic",
            "k_bic": result.k_bic,
            "k_aic": result.k_aic,
            "table": [
                {"k": k, "bic": b, "aic": a, "loglik": ll, "iterations": it}
                for k, b, a, ll, it in result.table
            ],
        }
        lo, hi = result.k_range_suggestion
        if lo == hi:
            print(f"BIC and AIC agree: k={lo}")
        else:
            print(f"BIC prefers k={result.k_bic}, AIC prefers k={result.k_aic}; "
                  f"any k in [{lo},{hi}] is defensible")
    else:
        raise SeqmixError(f"unknown method {args.method!r}")

    out.write_text(json.dumps(report, indent=2) + "\n")
    _write_manifest(out.parent, "select-k", args, [args.traces], [out], started)
    return 0


def cmd_train(args) -> int:
    started = time.time()
    data = read_traces_jsonl(args.traces)
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    if args.strategy == "baseline":
        from .harness import baseline_as_mixture

        model = baseline_as_mixture(list(data.traces), data.alphabet, args.alpha, args.score_initial)
    else:
        model = fit_mixture(
            data, args.k, strategy=args.strategy, seed=args.seed,
            alpha=args.alpha, tol=args.tol, max_iters=args.max_iters,
            score_initial=args.score_initial,
        )
    outputs = []
    model_path = outdir / "model.json"
    model_path.write_text(mixture_to_json(model) + "\n")
    outputs.append(model_path)
    for j, chain in enumerate(model.components):
        dot_path = outdir / f"component{j}.dot"
        dot_path.write_text(chain_to_dot(chain, args.edge_threshold, title=f"component {j}"))
        outputs.append(dot_path)
    if not model.converged:
        print("WARNING: EM did not converge within the iteration budget (converged=false)")
    print(f"strategy={model.init_strategy} k={model.k} iterations={model.iterations} "
          f"loglik={model.train_log_likelihood:.4f} converged={model.converged}")
    _write_manifest(outdir, "train", args, [args.traces], outputs, started)
    return 0


def cmd_evaluate(args) -> int:
    started = time.time()
    model = mixture_from_json(Path(args.model).read_text())
    data = read_traces_jsonl(args.traces, alphabet=None)
    if set(data.alphabet.symbols) - set(model.alphabet.symbols):
        print("error: test traces use symbols outside the model alphabet", file=sys.stderr)
        return 2
    data = read_traces_jsonl(args.traces, alphabet=model.alphabet)
    if data.n_traces == 0:
        print("error: empty test trace file", file=sys.stderr)
        return 2
    records = [predict_trace(model, t) for t in data.traces]
    report = compute_metrics(records, model.alphabet, args.eq4_denominator)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_json() + "\n")
    print(f"micro accuracy: {report.micro_acc:.2f}%  macro (trace) accuracy: {report.macro_acc_t:.2f}%")
    _write_manifest(out.parent, "evaluate", args, [args.model, args.traces], [out], started)
    return 0


def _read_config_file(path) -> dict:
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise SeqmixError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def _experiment_config(args) -> ExperimentConfig:
    raw = _read_config_file(args.config) if args.config else {}
    strategies = tuple(
        s.strip() for s in raw.get("strategies", "baseline,random,em_em,k_em").split(",")
    )
    k_per_strategy = {}
    for s in strategies:
        key = f"k.{s}"
        if key in raw:
            k_per_strategy[s] = int(raw[key])
    return ExperimentConfig(
        strategies=strategies,
        k_per_strategy=k_per_strategy,
        n_folds=int(raw.get("n_folds", 5)),
        alpha=args.alpha if args.alpha is not None else float(raw.get("alpha", 1e-3)),
        tol=args.tol if args.tol is not None else float(raw.get("tol", 1e-10)),
        max_iters=args.max_iters
        if args.max_iters is not None
        else int(raw.get("max_iters", 500)),
        seed=args.seed if args.seed is not None else int(raw.get("seed", 0)),
        score_initial=args.score_initial
        if args.score_initial is not None
        else raw.get("score_initial", "1") in ("1", "true", "yes", "on"),
        eq4_denominator=args.eq4_denominator or raw.get("eq4_denominator", "predictions"),
        ci_level=float(raw.get("ci_level", 0.95)),
        jobs=args.jobs if args.jobs is not None else int(raw.get("jobs", 1)),
    )


def cmd_experiment(args) -> int:
    started = time.time()
    data = read_traces_jsonl(args.traces)
    config = _experiment_config(args)
    # echo the effective (file + flag) values into the manifest
    for name in ("seed", "alpha", "tol", "max_iters", "jobs", "score_initial", "eq4_denominator"):
        setattr(args, name, getattr(config, name))
    folds = assign_folds(data, config.n_folds, config.seed)
    result = run_experiment(data, folds, config)
    outdir = Path(args.out_dir)
    outputs = write_bundle(result, outdir)
    failures = [r for r in result.runs if r.error is not None]
    for r in failures:
        print(f"fold {r.fold} strategy {r.strategy} failed: {r.error}", file=sys.stderr)
    print(f"wrote {len(outputs)} artifacts to {outdir}")
    for s in config.strategies:
        mean, sd = result.aggregates[s]["micro_acc"]
        print(f"  {s}: micro accuracy {mean:.2f}% (sd {sd:.2f})")
    inputs = [args.traces] + ([args.config] if args.config else [])
    _write_manifest(outdir, "experiment", args, inputs, outputs, started)
    return 0


def cmd_synth_gen(args) -> int:
    started = time.time()
    spec = planted_spec(
        m=args.m, k=args.k, n_traces=args.n_traces,
        min_length=args.min_len, max_length=args.max_len,
        seed=args.seed, separation=args.separation,
        traces_per_student=args.traces_per_student,
    )
    data, labels = generate_synthetic(spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_traces_jsonl(data, out)
    outputs = [out]
    if args.labels_out:
        labels_path = Path(args.labels_out)
        labels_path.write_text("\n".join(str(int(x)) for x in labels) + "\n")
        outputs.append(labels_path)
    if args.model_out:
        model_path = Path(args.model_out)
        model_path.write_text(mixture_to_json(spec.as_mixture()) + "\n")
        outputs.append(model_path)
    print(f"generated {data.n_traces} traces over {spec.alphabet.size} symbols "
          f"from {args.k} planted components")
    _write_manifest(out.parent, "synth-gen", args, [], outputs, started)
    return 0


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqmix",
        description="Cluster categorical event sequences with mixtures of "
        "first-order Markov chains and predict next events.",
    )
    parser.add_argument("--version", action="version", version=f"seqmix {__version__}")

    default_seed = os.environ.get(SEED_ENV_VAR)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int,
                        default=int(default_seed) if default_seed is not None else 0,
                        help=f"master RNG seed (default: ${SEED_ENV_VAR} or 0)")
    common.add_argument("--alpha", type=float, default=1e-3,
                        help="additive smoothing pseudocount (default 1e-3)")
    common.add_argument("--tol", type=float, default=1e-10,
                        help="EM convergence threshold on the log-likelihood delta")
    common.add_argument("--max-iters", type=int, default=500, help="EM iteration cap")
    common.add_argument("--jobs", type=int, default=1, help="concurrent harness jobs")
    common.add_argument("--score-initial", action=argparse.BooleanOptionalAction,
                        default=True, help="include the first symbol in likelihoods")
    common.add_argument("--eq4-denominator", choices=("predictions", "length"),
                        default="predictions",
                        help="denominator of per-trace accuracy")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common],
                       help="convert a raw assessment log into a trace file")
    p.add_argument("raw_log")
    p.add_argument("out")
    p.add_argument("--min-feedback-seconds", type=float, default=0.0,
                   help="discount feedback visits shorter than this")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("select-k", parents=[common],
                       help="suggest the number of mixture components")
    p.add_argument("traces")
    p.add_argument("--method", choices=("ic", "indices", "wcss"), default="ic")
    p.add_argument("--k-range", default="1:5", help="e.g. 1:5 or 2,3,4")
    p.add_argument("--strategy", choices=("random", "em_em", "k_em"), default="k_em")
    p.add_argument("--out", default="select_k.json")
    p.set_defaults(func=cmd_select_k)

    p = sub.add_parser("train", parents=[common], help="fit a mixture model")
    p.add_argument("traces")
    p.add_argument("--strategy", choices=("baseline", "random", "em_em", "k_em"),
                   default="k_em")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--edge-threshold", type=float, default=0.32,
                   help="minimum transition probability shown in DOT figures")
    p.add_argument("--out-dir", default="train_out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common],
                       help="label and predict test traces under a trained model")
    p.add_argument("model")
    p.add_argument("traces")
    p.add_argument("--out", default="metrics.json")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", parents=[common],
                       help="full cross-validated comparison of strategies")
    p.add_argument("traces")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--out-dir", default="experiment_out")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("synth-gen", parents=[common],
                       help="generate traces from a planted mixture")
    p.add_argument("--out", required=True)
    p.add_argument("--labels-out")
    p.add_argument("--model-out")
    p.add_argument("--m", type=int, default=6)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--n-traces", type=int, default=1000)
    p.add_argument("--min-len", type=int, default=2)
    p.add_argument("--max-len", type=int, default=39)
    p.add_argument("--separation", type=float, default=0.8)
    p.add_argument("--traces-per-student", type=int, default=1)
    p.set_defaults(func=cmd_synth_gen)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    # experiment merges file config with flags: distinguish "not given"
    args = parser.parse_args(argv)
    if args.command == "experiment":
        given = set()
        for raw in (argv if argv is not None else sys.argv[1:]):
            given.add(raw.split("=")[0])
        for name, flag in (("seed", "--seed"), ("alpha", "--alpha"), ("tol", "--tol"),
                           ("max_iters", "--max-iters"), ("jobs", "--jobs"),
                           ("eq4_denominator", "--eq4-denominator")):
            if flag not in given:
                setattr(args, name, None)
        if not ({"--score-initial", "--no-score-initial"} & given):
            args.score_initial = None
        if args.seed is None and SEED_ENV_VAR in os.environ:
            args.seed = int(os.environ[SEED_ENV_VAR])
    try:
        return args.func(args)
    except SeqmixError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
