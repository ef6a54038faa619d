"""Command-line surface for the pipeline.

Subcommands: validate, train, predict, evaluate, al-select, al-apply,
cleanse. Exit codes: 0 success, 1 validation/configuration error,
2 degenerate-data runtime error (cleansing left nothing usable, or a
class could not be fitted).

A JSON config file may supply any flag value (keys named like the flag
dests, e.g. "max_epochs"); explicit flags win over the config file.
"""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from clda import active_learning, cleansing, kmeans, lda, metrics, trainer
from clda.exceptions import CleansingError, DegenerateFitError
from clda.feature_store import (
    FeatureDataset,
    read_answer_file,
    read_features_auto,
)
from clda.representation import fused_matrix

# config keys a --config file may set, per subcommand
_CONFIG_KEYS = {
    "features", "model", "out", "history_out", "clusters", "tau", "delta",
    "max_epochs", "seed", "seeds", "eps", "threads", "n_shot", "strategy",
    "answers", "posteriors", "confusion_out", "assignments_out",
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # report bad flags through the exit-code contract instead of sys.exit(2)
    def error(self, message):
        raise _UsageError(message)


@contextlib.contextmanager
def _thread_cap(threads):
    """Cap BLAS worker threads when requested; results are unaffected."""
    if threads is None:
        yield
        return
    if threads < 1:
        raise ValueError("threads must be at least 1")
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        yield
        return
    with threadpool_limits(limits=threads):
        yield


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _require(args, *names) -> None:
    for name in names:
        if getattr(args, name) is None:
            raise _UsageError(f"--{name.replace('_', '-')} is required")


def _apply_config(args) -> None:
    if getattr(args, "config", None) is None:
        return
    raw = json.loads(Path(args.config).read_text())
    if not isinstance(raw, dict):
        raise ValueError("config file must hold a JSON object")
    for key, value in raw.items():
        dest = key.replace("-", "_")
        if dest not in _CONFIG_KEYS:
            raise ValueError(f"unknown config key {key!r}")
        if getattr(args, dest, None) is None:
            setattr(args, dest, value)


def _train_config(args) -> trainer.TrainConfig:
    return trainer.TrainConfig(
        seed=13 if args.seed is None else int(args.seed),
        cluster_count=None if args.clusters is None else int(args.clusters),
        tau=None if args.tau is None else float(args.tau),
        delta=trainer.DEFAULT_DELTA if args.delta is None else float(args.delta),
        max_epochs=(
            trainer.DEFAULT_MAX_EPOCHS
            if args.max_epochs is None
            else int(args.max_epochs)
        ),
        eps=None if args.eps is None else float(args.eps),
    )


def _check_compatible(model: lda.LdaModel, dataset: FeatureDataset) -> None:
    fused_dim = dataset.hidden_dim + dataset.num_labels
    if model.dim != fused_dim or model.num_labels != dataset.num_labels:
        raise ValueError(
            f"dimension mismatch: features fuse to {fused_dim} dims "
            f"({dataset.num_labels} labels), model expects {model.dim} dims "
            f"({model.num_labels} labels)"
        )


def _print_history(history: trainer.TrainHistory, n: int) -> None:
    for e in history.epochs:
        print(
            f"epoch {e.epoch}: kept {e.clean_size}/{n} ({e.kept_fraction:.3f}), "
            f"clusters {e.selected_cluster_count}, change {e.label_change_ratio:.4f}"
        )
    if history.converged:
        print(f"converged in {history.num_epochs} epochs")
    else:
        print(f"stopped at max_epochs={history.num_epochs} without converging")


def _write_history_csv(history: trainer.TrainHistory, path: str) -> None:
    lines = ["epoch,clean_size,kept_fraction,selected_cluster_count,label_change_ratio"]
    for e in history.epochs:
        lines.append(
            f"{e.epoch},{e.clean_size},{_fmt(e.kept_fraction)},"
            f"{e.selected_cluster_count},{_fmt(e.label_change_ratio)}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_validate(args) -> int:
    dataset = read_features_auto(args.features)
    print(
        f"OK, {len(dataset)} records, {dataset.hidden_dim} dims, "
        f"{dataset.num_labels} labels"
    )
    return 0


def _parse_seeds(raw) -> list[int]:
    if isinstance(raw, (list, tuple)):
        return [int(s) for s in raw]
    return [int(part) for part in str(raw).split(",") if part.strip()]


def cmd_train(args) -> int:
    _require(args, "features", "out")
    if args.seed is not None and args.seeds is not None:
        raise ValueError("use --seed or --seeds, not both")
    dataset = read_features_auto(args.features)
    n = len(dataset)

    if args.seeds is None:
        config = _train_config(args)
        model, history = trainer.run(dataset, config)
        lda.write_model_file(model, args.out)
        _print_history(history, n)
        if args.history_out is not None:
            _write_history_csv(history, args.history_out)
        return 0

    seeds = _parse_seeds(args.seeds)
    if not seeds:
        raise ValueError("--seeds must name at least one seed")
    truths = dataset.true_labels()
    labeled = truths >= 0
    if not labeled.any():
        raise ValueError("multi-seed aggregation requires true labels in the feature file")

    base = _train_config(args)
    reports = []
    for seed in seeds:
        config = dataclasses.replace(base, seed=seed)
        model, history = trainer.run(dataset, config)
        lda.write_model_file(model, f"{args.out}.seed{seed}")
        report = metrics.evaluate(
            history.final_labels[labeled], truths[labeled], dataset.num_labels
        )
        reports.append(report)
        print(f"seed {seed}: accuracy {report.accuracy:.4f}")
    summary = metrics.aggregate_seeds(reports)
    print(
        f"mean accuracy {summary.mean:.4f} +/- {summary.std:.4f} "
        f"over {summary.count} seeds"
    )
    return 0


def cmd_predict(args) -> int:
    _require(args, "features", "model", "out")
    model = lda.read_model_file(args.model)
    dataset = read_features_auto(args.features)
    _check_compatible(model, dataset)

    points = fused_matrix(dataset)
    predictions = lda.predict_batch(points, model)
    ids = dataset.ids()
    lines = []
    if args.posteriors:
        lines.append(
            "id,predicted," + ",".join(f"p{c}" for c in range(model.num_labels))
        )
        post = lda.posterior_batch(points, model)
        for i in range(len(dataset)):
            probs = ",".join(_fmt(p) for p in post[i])
            lines.append(f"{ids[i]},{predictions[i]},{probs}")
    else:
        lines.append("id,predicted")
        for i in range(len(dataset)):
            lines.append(f"{ids[i]},{predictions[i]}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"wrote {len(dataset)} predictions to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    _require(args, "features", "model")
    model = lda.read_model_file(args.model)
    dataset = read_features_auto(args.features)
    _check_compatible(model, dataset)

    truths = dataset.true_labels()
    labeled = truths >= 0
    if not labeled.any():
        raise ValueError("no records carry a true label; nothing to evaluate")

    predictions = lda.predict_batch(fused_matrix(dataset), model)
    report = metrics.evaluate(
        predictions[labeled], truths[labeled], dataset.num_labels
    )
    print(f"accuracy {report.accuracy:.4f} on {report.count} records")

    if args.out is not None:
        payload = {
            "accuracy": report.accuracy,
            "count": report.count,
            "per_class_accuracy": [
                None if math.isnan(a) else float(a)
                for a in report.per_class_accuracy
            ],
            "confusion": report.confusion.tolist(),
        }
        Path(args.out).write_text(json.dumps(payload, indent=2) + "\n")
    if args.confusion_out is not None:
        header = "truth," + ",".join(
            f"pred_{c}" for c in range(dataset.num_labels)
        )
        rows = [header]
        for c in range(dataset.num_labels):
            rows.append(f"{c}," + ",".join(str(v) for v in report.confusion[c]))
        Path(args.confusion_out).write_text("\n".join(rows) + "\n")
    return 0


def cmd_al_select(args) -> int:
    _require(args, "features", "out", "n_shot")
    dataset = read_features_auto(args.features)
    n_shot = int(args.n_shot)
    if n_shot == 0:
        Path(args.out).write_text("id,cluster,distance\n")
        print("wrote 0 queries")
        return 0
    config = _train_config(args)
    queries, _ = active_learning.select_queries_for_config(
        dataset, config, n_shot, args.strategy
    )
    lines = ["id,cluster,distance"]
    for q in queries.entries:
        lines.append(f"{q.record_id},{q.cluster},{_fmt(q.distance)}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"wrote {len(queries)} queries")
    return 0


def cmd_al_apply(args) -> int:
    _require(args, "features", "answers", "out", "n_shot")
    dataset = read_features_auto(args.features)
    answers = read_answer_file(args.answers)
    config = _train_config(args)
    model, history = active_learning.al_retrain(
        dataset, config, answers, int(args.n_shot), args.strategy
    )
    lda.write_model_file(model, args.out)
    _print_history(history, len(dataset))
    if args.history_out is not None:
        _write_history_csv(history, args.history_out)
    return 0


def cmd_cleanse(args) -> int:
    _require(args, "features", "out")
    dataset = read_features_auto(args.features)
    config = _train_config(args)
    k = (
        config.cluster_count
        if config.cluster_count is not None
        else kmeans.default_cluster_count(dataset.num_labels, len(dataset))
    )
    tau = trainer.resolve_tau(config.tau, k)
    # mirrors the first training epoch's clustering stream
    seed = int(np.random.SeedSequence([config.seed, 1]).generate_state(1)[0])
    cluster_model = kmeans.kmeans_fit(
        fused_matrix(dataset), k, seed=seed, ids=dataset.ids()
    )
    stats = cleansing.compute_cluster_stats(
        cluster_model.assignments,
        dataset.pseudo_labels(),
        cluster_model.n_clusters,
        dataset.num_labels,
    )
    selected = set(cleansing.select_clean_clusters(stats.ew, tau).tolist())
    mask = cleansing.clean_record_mask(
        cluster_model.assignments,
        dataset.pseudo_labels(),
        np.array(sorted(selected), dtype=np.int64),
        stats,
    )

    lines = ["cluster,size,norm_ent,ew,majority,kept_count"]
    for c in range(cluster_model.n_clusters):
        members = cluster_model.assignments == c
        kept = int((mask & members).sum()) if c in selected else 0
        lines.append(
            f"{c},{int(members.sum())},{_fmt(stats.norm_ent[c])},"
            f"{_fmt(stats.ew[c])},{stats.majority[c]},{kept}"
        )
    Path(args.out).write_text("\n".join(lines) + "\n")

    if args.assignments_out is not None:
        rows = ["id,cluster"]
        ids = dataset.ids()
        for i in range(len(dataset)):
            rows.append(f"{ids[i]},{cluster_model.assignments[i]}")
        Path(args.assignments_out).write_text("\n".join(rows) + "\n")

    print(
        f"selected {len(selected)}/{cluster_model.n_clusters} clusters, "
        f"kept {int(mask.sum())}/{len(dataset)} records"
    )
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--features", help="feature file (.celda binary or .jsonl)")
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--threads", type=int, help="cap BLAS worker threads")


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--clusters", type=int, help="cluster count K (default: size-based)")
    p.add_argument("--tau", type=float, help="entropy-weight threshold (default: 1/(2K))")
    p.add_argument("--delta", type=float, help="label-change exit ratio (default: 0.005)")
    p.add_argument("--max-epochs", type=int, help="epoch cap (default: 20)")
    p.add_argument("--seed", type=int, help="PRNG seed (default: 13)")
    p.add_argument("--eps", type=float, help="covariance shrinkage (default: trace-scaled)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="clda", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a feature file against all invariants")
    _add_common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("train", help="run the recursive training loop")
    _add_common(p)
    _add_train_flags(p)
    p.add_argument("--out", help="model file to write")
    p.add_argument("--history-out", help="per-epoch history CSV")
    p.add_argument("--seeds", help="comma-separated seed list; aggregates accuracy")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="label records with a trained model")
    _add_common(p)
    p.add_argument("--model", help="model file")
    p.add_argument("--out", help="predictions CSV")
    p.add_argument("--posteriors", action="store_true", help="include class posteriors")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score a model against embedded true labels")
    _add_common(p)
    p.add_argument("--model", help="model file")
    p.add_argument("--out", help="JSON report path")
    p.add_argument("--confusion-out", help="confusion matrix CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("al-select", help="pick centroid-nearest records for labeling")
    _add_common(p)
    _add_train_flags(p)
    p.add_argument("--n-shot", type=int, help="queries per class")
    p.add_argument(
        "--strategy", choices=active_learning.STRATEGIES, default=None,
        help="cluster priority (default: largest)",
    )
    p.add_argument("--out", help="query CSV")
    p.set_defaults(func=cmd_al_select)

    p = sub.add_parser("al-apply", help="propagate answered labels and retrain")
    _add_common(p)
    _add_train_flags(p)
    p.add_argument("--answers", help="JSON map record id -> true label")
    p.add_argument("--n-shot", type=int, help="queries per class used at selection")
    p.add_argument(
        "--strategy", choices=active_learning.STRATEGIES, default=None,
        help="cluster priority (default: largest)",
    )
    p.add_argument("--out", help="model file to write")
    p.add_argument("--history-out", help="per-epoch history CSV")
    p.set_defaults(func=cmd_al_apply)

    p = sub.add_parser("cleanse", help="debug dump of one cleansing pass")
    _add_common(p)
    _add_train_flags(p)
    p.add_argument("--out", help="per-cluster stats CSV")
    p.add_argument("--assignments-out", help="record-to-cluster CSV")
    p.set_defaults(func=cmd_cleanse)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _apply_config(args)
        if getattr(args, "strategy", None) is None and hasattr(args, "strategy"):
            args.strategy = "largest"
        with _thread_cap(getattr(args, "threads", None)):
            return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (CleansingError, DegenerateFitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
