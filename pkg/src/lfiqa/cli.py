"""Command-line surface: synth, extract, train, predict, eval, report.

Exit codes: 0 success, 1 partial failure (some entries failed but the
run completed), 2 usage error (bad flags, unreadable inputs, schema
mismatches). The LFIQA_LOG environment variable sets the log level.
"""

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import lfio, regress, synth
from .pipeline import DEFAULT_MIN_STACK_LEN, FEATURE_COLUMNS, extract_orientation_features, select_columns
from .viewstack import ORIENTATIONS

log = logging.getLogger("lfiqa")


class UsageError(Exception):
    pass


def _parse_weights(text):
    parts = text.split(",")
    if len(parts) != 4:
        raise UsageError(f"--weights needs 4 comma-separated values, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise UsageError(f"--weights values must be numbers: {text!r}")


def _parse_subset(text, allowed, flag):
    parts = [p.strip() for p in text.split(",") if p.strip()]
    bad = [p for p in parts if p not in allowed]
    if bad:
        raise UsageError(f"{flag} accepts {sorted(allowed)}, got {bad}")
    return parts


def _column_subset(args, csv_path):
    channels = _parse_subset(args.channels, {"L", "a", "b"}, "--channels") if args.channels else None
    features = _parse_subset(args.features, {"pcsc", "tavi"}, "--features") if args.features else None
    if channels is None and features is None:
        return None
    sidecar = regress.read_feature_sidecar(csv_path)
    return select_columns(channels=channels, features=features, columns=sidecar)


def cmd_synth(args) -> int:
    manifest = synth.build_dataset(
        args.out,
        n_scenes=args.scenes,
        angular_size=(args.angular, args.angular),
        spatial_size=(args.spatial, args.spatial),
        disparity=args.disparity,
        include_pristine=not args.no_pristine,
        base_seed=args.seed,
    )
    print(manifest)
    return 0


def cmd_extract(args) -> int:
    manifest = lfio.load_manifest(args.manifest)
    weights = _parse_weights(args.weights)

    def work(entry):
        start = time.perf_counter()
        lf = lfio.load_lightfield(entry)
        orient = extract_orientation_features(lf, min_stack_len=args.min_stack_len)
        pooled = regress.pool(orient, weights)
        log.info("extracted %s in %.2fs", entry.id, time.perf_counter() - start)
        return orient, pooled

    results = {}
    failures = []
    with ThreadPoolExecutor(max_workers=args.threads) as pool_:
        futures = {e.id: pool_.submit(work, e) for e in manifest}
        for entry in manifest:
            try:
                results[entry.id] = futures[entry.id].result()
            except Exception as exc:
                log.error("entry %s failed: %s", entry.id, exc)
                failures.append(entry.id)

    ok_entries = [e for e in manifest if e.id in results]
    pooled_rows = np.array([results[e.id][1].f_final for e in ok_entries]).reshape(
        len(ok_entries), len(FEATURE_COLUMNS)
    )
    regress.write_features_csv(
        args.out,
        ids=[e.id for e in ok_entries],
        scenes=[e.scene for e in ok_entries],
        labels=[e.label for e in ok_entries],
        matrix=pooled_rows,
    )
    orient_rows, orient_ids, orient_scenes, orient_labels, orient_names = [], [], [], [], []
    for e in ok_entries:
        by_orientation = results[e.id][0].by_orientation()
        for d in ORIENTATIONS:
            vec = by_orientation[d]
            if vec is None:
                continue
            orient_rows.append(vec)
            orient_ids.append(e.id)
            orient_scenes.append(e.scene)
            orient_labels.append(e.label)
            orient_names.append(d)
    orient_path = Path(args.out).with_suffix(".orientations.csv")
    regress.write_features_csv(
        orient_path,
        ids=orient_ids,
        scenes=orient_scenes,
        labels=orient_labels,
        matrix=np.array(orient_rows).reshape(len(orient_rows), len(FEATURE_COLUMNS)),
        orientations=orient_names,
    )
    log.info("wrote %s and %s (%d entries, %d failed)",
             args.out, orient_path, len(ok_entries), len(failures))
    return 1 if failures else 0


def _read_labeled_features(path, column_subset):
    ids, scenes, labels, X = regress.read_features_csv(path)
    if column_subset is not None:
        if max(column_subset) >= X.shape[1]:
            raise UsageError(f"{path} has {X.shape[1]} feature columns; subset needs more")
        X = X[:, column_subset]
    return ids, scenes, labels, X


def cmd_train(args) -> int:
    subset = _column_subset(args, args.features_csv)
    ids, _, labels, X = _read_labeled_features(args.features_csv, subset)
    unlabeled = [i for i, v in zip(ids, labels) if not np.isfinite(v)]
    if unlabeled:
        raise UsageError(f"entries without labels cannot train: {unlabeled}")
    model = regress.svr_train(X, labels, seed=args.seed, column_indices=subset)
    regress.save_model(model, args.out)
    log.info("trained on %d rows (C=%g, gamma=%g); model at %s",
             len(ids), model.c, model.gamma, args.out)
    return 0


def _apply_model_columns(model, X, path):
    if model.column_indices is not None:
        if max(model.column_indices) >= X.shape[1]:
            raise UsageError(
                f"{path} has {X.shape[1]} feature columns; the model selects "
                f"column {max(model.column_indices) + 1}"
            )
        X = X[:, model.column_indices]
    if X.shape[1] != model.n_features:
        raise UsageError(
            f"feature count mismatch: model expects {model.n_features}, "
            f"{path} provides {X.shape[1]}"
        )
    return X


def cmd_predict(args) -> int:
    model = regress.load_model(args.model)
    ids, _, _, X = regress.read_features_csv(args.features_csv)
    X = _apply_model_columns(model, X, args.features_csv)
    scores = regress.svr_predict(model, X)
    regress.write_predictions_csv(args.out, ids, scores)
    log.info("wrote %d predictions to %s", len(ids), args.out)
    return 0


def cmd_eval(args) -> int:
    subset = _column_subset(args, args.features_csv)
    ids, scenes, labels, X = _read_labeled_features(args.features_csv, subset)
    unlabeled = [i for i, v in zip(ids, labels) if not np.isfinite(v)]
    if unlabeled:
        raise UsageError(f"entries without labels cannot be evaluated: {unlabeled}")
    split_mode = {"scene": "by-scene", "item": "by-item"}[args.split]
    summary = regress.cross_validate(
        X, labels, scenes,
        iterations=args.iterations,
        split_mode=split_mode,
        seed=args.seed,
        threads=args.threads,
    )
    payload = {
        "srcc": summary.srcc,
        "lcc": summary.lcc,
        "rmse": summary.rmse,
        "or_ratio": summary.or_ratio,
        "iterations": args.iterations,
        "split": split_mode,
        "seed": args.seed,
        "items": len(ids),
    }
    Path(args.out).write_text(json.dumps(payload, indent=1))
    iter_path = Path(args.out).with_suffix(".iterations.csv")
    with open(iter_path, "w", newline="") as fh:
        fh.write("iteration,srcc,lcc,rmse,or_ratio,train_size,test_size,resampled\n")
        for r in summary.records:
            fields = asdict(r)
            fh.write(",".join(repr(fields[k]) if isinstance(fields[k], float) else str(fields[k])
                              for k in ("index", "srcc", "lcc", "rmse", "or_ratio",
                                        "train_size", "test_size", "resampled")) + "\n")
    log.info("eval medians: SRCC=%.4f LCC=%.4f RMSE=%.4f OR=%.4f",
             summary.srcc, summary.lcc, summary.rmse, summary.or_ratio)
    return 0


def cmd_report(args) -> int:
    model = regress.load_model(args.model)
    ids, _, labels, X = regress.read_features_csv(args.features_csv)
    X = _apply_model_columns(model, X, args.features_csv)
    scores = regress.svr_predict(model, X)
    labeled = np.isfinite(labels)
    if model.logistic is not None:
        fitted = model.logistic
    elif labeled.sum() >= 5:
        fitted = regress.logistic_fit(scores[labeled], labels[labeled], seed=args.seed)
    else:
        raise UsageError("report needs a model with a stored mapping or >= 5 labeled rows")
    mapped = regress.logistic_apply(fitted, scores)
    with open(args.out, "w", newline="") as fh:
        fh.write("id,label,score,mapped_score\n")
        for i, item_id in enumerate(ids):
            label = repr(float(labels[i])) if labeled[i] else ""
            fh.write(f"{item_id},{label},{scores[i]!r},{mapped[i]!r}\n")
    log.info("wrote scatter data for %d items to %s", len(ids), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lfiqa",
        description="No-reference light field image quality assessment toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a labeled synthetic benchmark")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--scenes", type=int, default=12)
    p.add_argument("--angular", type=int, default=9, help="angular grid side S=T")
    p.add_argument("--spatial", type=int, default=64, help="spatial side X=Y")
    p.add_argument("--disparity", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-pristine", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="extract pooled features for a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="pooled features CSV path")
    p.add_argument("--weights", default="0.25,0.25,0.25,0.25",
                   help="orientation pooling weights w0,w45,w90,w135")
    p.add_argument("--min-stack-len", type=int, default=DEFAULT_MIN_STACK_LEN)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train a quality model from a features CSV")
    p.add_argument("--features-csv", required=True)
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--channels", help="comma-separated subset of L,a,b")
    p.add_argument("--features", help="comma-separated subset of pcsc,tavi")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score entries with a trained model")
    p.add_argument("--features-csv", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="predictions CSV path")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="cross-validated evaluation of a features CSV")
    p.add_argument("--features-csv", required=True)
    p.add_argument("--out", required=True, help="summary JSON path")
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--split", choices=("scene", "item"), default="scene")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--channels", help="comma-separated subset of L,a,b")
    p.add_argument("--features", help="comma-separated subset of pcsc,tavi")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="score-vs-label scatter data for plotting")
    p.add_argument("--features-csv", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="scatter CSV path")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("LFIQA_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, lfio.ManifestError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
