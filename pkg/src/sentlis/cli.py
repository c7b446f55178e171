"""Command-line entry point.

Subcommands: ``preprocess`` (lexicon sentiment + activeness peeling),
``generate`` (synthetic cascades from planted parameters), ``train`` (the
latent model or any baseline), ``evaluate`` (cross-validated task metrics),
``export`` (norm and rate tables for external plotting).

Every run writes ``manifest.json`` into its output directory with the
resolved flags and seeds; artifacts are reproducible from the manifest.
Progress logs are JSON lines on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import analysis, pipeline
from .baselines import PairwiseRates
from .domain import (
    ConfigurationError,
    ContractViolation,
    Dataset,
    ParameterStore,
    load_dataset,
    read_parents_file,
    validate_dataset,
    write_cascades_file,
    write_parents_file,
)
from .runner import MODEL_NAMES, TASK_NAMES, TaskOptions, cross_validate, fit_model
from .evaluation import format_report_table
from .synthetic import GeneratorConfig, generate
from .training import TrainerConfig, train


def _write_manifest(out_dir: Path, command: str, args: argparse.Namespace) -> None:
    flags = {k: v for k, v in vars(args).items() if k not in ("func", "command")}
    manifest = {"command": command, "flags": flags}
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_dir(args: argparse.Namespace) -> Path:
    path = Path(args.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _add_training_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dim", type=int, default=8, help="representation size per class")
    p.add_argument("--classes", type=int, default=0,
                   help="sentiment classes (0 = infer from data)")
    p.add_argument("--batch", type=int, default=12, help="cascades per mini-batch")
    p.add_argument("--neg-samples", type=int, default=5,
                   help="negative users sampled per cascade per iteration")
    p.add_argument("--rho", type=float, default=0.95, help="Adadelta decay rate")
    p.add_argument("--eps", type=float, default=1e-6, help="Adadelta stabilizer")
    p.add_argument("--sigma", type=float, default=0.01,
                   help="sufficient-decrease constant")
    p.add_argument("--beta", type=float, default=0.5, help="backtracking shrink factor")
    p.add_argument("--max-epochs", type=int, default=50)
    p.add_argument("--max-backtracks", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--adjacency", default=None,
                   help="JSON-lines file of allowed (src, dst) influence pairs")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                   help="worker cap for internal parallelism")


def _trainer_config(args: argparse.Namespace) -> TrainerConfig:
    return TrainerConfig(
        batch_size=args.batch, rho=args.rho, epsilon=args.eps, sigma=args.sigma,
        beta=args.beta, negative_samples=args.neg_samples,
        max_epochs=args.max_epochs, max_backtracks=args.max_backtracks,
        seed=args.seed)


def _load(args: argparse.Namespace) -> Dataset:
    dataset = load_dataset(
        args.cascades,
        users=args.users or None,
        classes=args.classes or None,
        parents_path=getattr(args, "parents", None),
        adjacency_path=getattr(args, "adjacency", None))
    problems = validate_dataset(dataset)
    if problems:
        raise ConfigurationError("invalid dataset:\n  " + "\n  ".join(problems))
    return dataset


def cmd_preprocess(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    dataset = load_dataset(args.cascades, users=args.users or None,
                           parents_path=args.parents)
    dropped_unlabeled = 0
    if args.lexicon and args.messages:
        lexicon = pipeline.load_lexicon(args.lexicon)
        texts: dict[str, str] = {}
        with open(args.messages, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    obj = json.loads(line)
                    texts[str(obj["id"])] = str(obj["text"])
        labeled, dropped_unlabeled = pipeline.label_cascades(
            dataset.cascades, texts, lexicon)
        dataset = dataset.replace_cascades(labeled)
    elif args.lexicon or args.messages:
        raise ConfigurationError("--lexicon and --messages must be given together")

    cleaned, summary = pipeline.onion_peel(
        dataset, min_activeness=args.min_activeness,
        min_cascade_size=args.min_cascade_size)
    write_cascades_file(cleaned.cascades, str(out / "cascades.jsonl"))
    payload = summary.to_json_dict()
    payload["dropped_unlabeled"] = dropped_unlabeled
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(out, "preprocess", args)
    print(json.dumps(payload), file=sys.stderr)
    return 0


def cmd_generate(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    config = GeneratorConfig(
        n_users=args.users, n_classes=args.classes, dim=args.dim,
        cascades_per_class=args.cascades_per_class, horizon=args.horizon,
        n_scales=args.scales, influential_fraction=args.influential_fraction,
        base_scale=args.base_scale, influential_scale=args.influential_scale,
        seed=args.seed)
    dataset, planted, parents = generate(config)
    write_cascades_file(dataset.cascades, str(out / "cascades.jsonl"))
    write_parents_file(parents, str(out / "parents.jsonl"))
    planted.save(str(out / "planted.json"))
    _write_manifest(out, "generate", args)
    print(json.dumps({"cascades": len(dataset.cascades),
                      "records": sum(c.size for c in dataset.cascades)}),
          file=sys.stderr)
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    if args.model not in MODEL_NAMES:
        raise ConfigurationError(f"unknown model {args.model!r}; choose from {MODEL_NAMES}")
    dataset = _load(args)
    config = _trainer_config(args)
    if args.model in ("sent-lis", "ct-lis"):
        classes = 1 if args.model == "ct-lis" else (args.classes or dataset.K)
        result = train(dataset, config, dim=args.dim, classes=classes,
                       log_stream=sys.stderr)
        result.params.save(str(out / "checkpoint.json"))
    else:
        fitted = fit_model(args.model, dataset, config, dim=args.dim)
        fitted.artifact.save(str(out / "rates.jsonl"))
    _write_manifest(out, "train", args)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    if args.task not in TASK_NAMES:
        raise ConfigurationError(f"unknown task {args.task!r}; choose from {TASK_NAMES}")
    models = args.model or ["sent-lis"]
    for name in models:
        if name not in MODEL_NAMES:
            raise ConfigurationError(f"unknown model {name!r}; choose from {MODEL_NAMES}")
    dataset = _load(args)
    options = TaskOptions(
        pcd_epsilon=args.pcd_eps, pcd_pooled=args.pcd_pooled,
        csp_seed_count=args.csp_seeds, csp_sims=args.csp_sims,
        csp_scales=args.csp_scales)
    reports = cross_validate(dataset, args.task, models, _trainer_config(args),
                             dim=args.dim, folds=args.folds, seed=args.seed,
                             options=options)
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump([r.to_json_dict() for r in reports], fh, indent=2, sort_keys=True)
        fh.write("\n")
    table = format_report_table(reports)
    with open(out / "report.txt", "w", encoding="utf-8") as fh:
        fh.write(table)
        fh.write("\n")
    _write_manifest(out, "evaluate", args)
    print(table)
    return 0


def cmd_export(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    params = ParameterStore.load(args.checkpoint)
    if args.what == "norms":
        with open(out / "norms.csv", "w", encoding="utf-8", newline="") as fh:
            analysis.write_norms_csv(params, fh)
    else:
        baseline = PairwiseRates.load(args.baseline) if args.baseline else PairwiseRates()
        if args.sample:
            pairs = analysis.sample_pairs(params.M, args.sample, args.sample_seed)
        else:
            pairs = analysis.all_pairs(params.M)
        with open(out / "rates.csv", "w", encoding="utf-8", newline="") as fh:
            analysis.write_rates_csv(params, baseline, args.sentiment, pairs, fh)
    _write_manifest(out, "export", args)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sentlis",
        description="Learn and evaluate sentiment-specific influence and "
                    "susceptibility representations from infection cascades.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="label sentiments and peel low-activeness records")
    p.add_argument("--cascades", required=True)
    p.add_argument("--users", type=int, default=0, help="universe size (0 = infer)")
    p.add_argument("--parents", default=None)
    p.add_argument("--lexicon", default=None, help="token TAB polarity file")
    p.add_argument("--messages", default=None, help="JSON-lines {id, text} file")
    p.add_argument("--min-activeness", type=int, default=5)
    p.add_argument("--min-cascade-size", type=int, default=8)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("generate", help="synthesize cascades from planted parameters")
    p.add_argument("--users", type=int, required=True)
    p.add_argument("--classes", type=int, default=1)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--cascades-per-class", type=int, default=100)
    p.add_argument("--horizon", type=float, default=10.0)
    p.add_argument("--scales", type=int, default=20)
    p.add_argument("--influential-fraction", type=float, default=0.15)
    p.add_argument("--base-scale", type=float, default=0.25)
    p.add_argument("--influential-scale", type=float, default=1.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="fit a model and save its parameters")
    p.add_argument("--cascades", required=True)
    p.add_argument("--users", type=int, default=0, help="universe size (0 = infer)")
    p.add_argument("--model", default="sent-lis", choices=MODEL_NAMES)
    _add_training_flags(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="cross-validated task metrics")
    p.add_argument("--cascades", required=True)
    p.add_argument("--users", type=int, default=0, help="universe size (0 = infer)")
    p.add_argument("--parents", default=None, help="ground-truth parents (WBR)")
    p.add_argument("--task", required=True, choices=TASK_NAMES)
    p.add_argument("--model", action="append", choices=MODEL_NAMES,
                   help="repeatable; default sent-lis")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--pcd-eps", type=float, default=1e-6)
    p.add_argument("--pcd-pooled", action="store_true",
                   help="pool scores across cascades instead of averaging AUCs")
    p.add_argument("--csp-seeds", type=int, default=10,
                   help="observed prefix length for size prediction")
    p.add_argument("--csp-sims", type=int, default=100)
    p.add_argument("--csp-scales", type=int, default=50)
    _add_training_flags(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export", help="CSV tables of learned representations")
    p.add_argument("what", choices=("norms", "rates"))
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--baseline", default=None, help="pairwise rates for comparison")
    p.add_argument("--sentiment", type=int, default=0)
    p.add_argument("--sample", type=int, default=0,
                   help="sample this many ordered pairs (0 = all)")
    p.add_argument("--sample-seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_export)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, ContractViolation, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
