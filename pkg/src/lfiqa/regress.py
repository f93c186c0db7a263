"""Orientation pooling, quality regression, and the evaluation harness.

The four orientation vectors are pooled by a convex weighting (equal
quarters by default). A radial-basis epsilon-SVR maps pooled features to
quality scores; hyperparameters come from an internal cross-validated
grid search and the trained model is stored as plain arrays (support
vectors, dual coefficients, bias, normalization statistics) so prediction
is self-contained and deterministic. Evaluation follows the usual
protocol: a five-parameter logistic maps predictions onto the label
scale before computing LCC/RMSE/OR, SRCC is tie-corrected, and
``cross_validate`` repeats random train/test splits and reports medians.
"""

import csv
import json
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.optimize
import scipy.stats
from sklearn.exceptions import ConvergenceWarning
from sklearn.svm import SVR

from .pipeline import FEATURE_COLUMNS, OrientationFeatures

log = logging.getLogger(__name__)

DEFAULT_WEIGHTS = (0.25, 0.25, 0.25, 0.25)
DEFAULT_C_GRID = tuple(2.0 ** np.arange(-5, 16, 2))  # 2^-5 .. 2^15
DEFAULT_GAMMA_GRID = tuple(2.0 ** np.arange(-15, 4, 2))  # 2^-15 .. 2^3
DEFAULT_EPSILON = 0.1

MODEL_FORMAT = "lfiqa-model"
FEATURES_FORMAT = "lfiqa-features"


@dataclass(frozen=True)
class PooledFeatures:
    f_final: np.ndarray
    weights: tuple[float, float, float, float]


@dataclass(frozen=True)
class LogisticParams:
    beta: np.ndarray  # (5,)


@dataclass(frozen=True)
class QualityModel:
    feat_mean: np.ndarray
    feat_std: np.ndarray
    support_vectors: np.ndarray
    dual_coef: np.ndarray
    intercept: float
    c: float
    gamma: float
    epsilon: float
    constant_features: tuple[int, ...] = ()
    converged: bool = True
    column_indices: tuple[int, ...] | None = None
    logistic: LogisticParams | None = None

    @property
    def n_features(self) -> int:
        return self.feat_mean.size


@dataclass(frozen=True)
class IterationRecord:
    index: int
    srcc: float
    lcc: float
    rmse: float
    or_ratio: float
    train_size: int
    test_size: int
    resampled: int


@dataclass(frozen=True)
class EvalSummary:
    srcc: float
    lcc: float
    rmse: float
    or_ratio: float
    records: tuple[IterationRecord, ...] = ()


def pool(orient: OrientationFeatures, weights=DEFAULT_WEIGHTS, allow_missing=False) -> PooledFeatures:
    """Weighted sum of the orientation vectors.

    Weights must be nonnegative with a positive sum and are normalized to
    sum 1. A missing orientation raises unless ``allow_missing`` is set,
    in which case the weights renormalize over the present ones. Each
    output coordinate is an exactly rounded sum, so permuting the
    orientations together with their weights changes nothing.
    """
    w = np.asarray(weights, dtype=float)
    if w.shape != (4,):
        raise ValueError("expected four orientation weights")
    if (w < 0).any() or not w.sum() > 0:
        raise ValueError("weights must be nonnegative with a positive sum")
    vectors = [orient.f0, orient.f45, orient.f90, orient.f135]
    missing = [d for d, v in zip((0, 45, 90, 135), vectors) if v is None]
    if missing:
        if not allow_missing:
            raise ValueError(f"orientations without usable stacks: {missing}")
        w = np.array([0.0 if v is None else wi for wi, v in zip(w, vectors)])
        if not w.sum() > 0:
            raise ValueError("no weight left on present orientations")
    w = w / w.sum()
    arrays = [None if v is None else np.asarray(v, dtype=float) for v in vectors]
    sizes = {v.size for v in arrays if v is not None}
    if len(sizes) != 1:
        raise ValueError(f"orientation vectors differ in length: {sizes}")
    reference = next(v for v in arrays if v is not None)
    stacked = np.stack([np.zeros_like(reference) if v is None else v for v in arrays])
    products = w[:, None] * stacked
    f_final = np.array([math.fsum(products[:, j]) for j in range(stacked.shape[1])])
    return PooledFeatures(f_final=f_final, weights=tuple(w))


def midranks(values) -> np.ndarray:
    """Mid-ranks (ties get the average of their rank range)."""
    return scipy.stats.rankdata(values, method="average")


def _pearson(a, b) -> float:
    a0 = a - a.mean()
    b0 = b - b.mean()
    den = np.sqrt(np.sum(a0 * a0) * np.sum(b0 * b0))
    if den == 0.0:
        return float("nan")
    return float(np.sum(a0 * b0) / den)


def spearman(a, b) -> float:
    """Tie-corrected rank correlation: Pearson of mid-ranks."""
    return _pearson(midranks(np.asarray(a, dtype=float)), midranks(np.asarray(b, dtype=float)))


def logistic_apply(params: LogisticParams, q) -> np.ndarray:
    b1, b2, b3, b4, b5 = params.beta
    q = np.asarray(q, dtype=float)
    z = np.clip(b2 * (q - b3), -500.0, 500.0)
    return b1 * (0.5 - 1.0 / (1.0 + np.exp(z))) + b4 * q + b5


def _affine_params(q, mos) -> LogisticParams:
    design = np.column_stack([q, np.ones_like(q)])
    slope, offset = np.linalg.lstsq(design, mos, rcond=None)[0]
    return LogisticParams(beta=np.array([0.0, 1.0, 0.0, slope, offset]))


def logistic_fit(q, mos, seed=0, restarts=10) -> LogisticParams:
    """Least-squares fit of the five-parameter logistic mapping.

    Nelder-Mead simplex descent from a data-driven initialization, with
    jittered restarts; the closed-form affine submodel is always a
    candidate, so the fitted mapping never scores worse than a straight
    line.
    """
    q = np.asarray(q, dtype=float).ravel()
    mos = np.asarray(mos, dtype=float).ravel()
    if q.size != mos.size:
        raise ValueError("prediction/label length mismatch")
    if q.size < 5:
        raise ValueError(f"need at least 5 pairs, got {q.size}")

    def sse(beta):
        f = logistic_apply(LogisticParams(beta=beta), q)
        err = f - mos
        return float(np.dot(err, err))

    q_std = q.std()
    init = np.array(
        [mos.max() - mos.min(), 1.0 / q_std if q_std > 0 else 1.0, q.mean(), 0.0, mos.mean()]
    )
    rng = np.random.default_rng(seed)
    best_beta, best_sse = None, np.inf
    for restart in range(restarts):
        start = init if restart == 0 else init * (1.0 + 0.25 * rng.standard_normal(5)) + 0.05 * rng.standard_normal(5)
        res = scipy.optimize.minimize(
            sse, start, method="Nelder-Mead",
            options={"maxiter": 4000, "xatol": 1e-10, "fatol": 1e-12},
        )
        if res.fun < best_sse:
            best_beta, best_sse = res.x, res.fun
    affine = _affine_params(q, mos)
    if sse(affine.beta) < best_sse:
        return affine
    return LogisticParams(beta=np.asarray(best_beta, dtype=float))


def metrics(pred, mos, fitted: LogisticParams | None = None) -> EvalSummary:
    """SRCC, LCC, RMSE and outlier ratio of predictions against labels.

    LCC/RMSE/OR are computed on the logistic-mapped predictions when a
    fitted mapping is supplied, raw otherwise. The outlier threshold is
    twice the residual standard deviation (a surrogate: per-item
    subjective spreads are not part of the manifest format).
    """
    pred = np.asarray(pred, dtype=float).ravel()
    mos = np.asarray(mos, dtype=float).ravel()
    if pred.size != mos.size:
        raise ValueError("prediction/label length mismatch")
    if pred.size < 2:
        raise ValueError("need at least 2 pairs")
    if np.ptp(pred) == 0 or np.ptp(mos) == 0:
        raise ValueError("zero variance input")
    srcc = spearman(pred, mos)
    mapped = logistic_apply(fitted, pred) if fitted is not None else pred
    lcc = _pearson(mapped, mos)
    resid = mapped - mos
    rmse = float(np.sqrt(np.mean(resid * resid)))
    sigma = float(np.std(resid))
    or_ratio = float(np.mean(np.abs(resid) > 2.0 * sigma)) if sigma > 0 else 0.0
    return EvalSummary(srcc=srcc, lcc=lcc, rmse=rmse, or_ratio=or_ratio)


def _fit_svr(z, y, c, g, epsilon):
    est = SVR(kernel="rbf", C=c, gamma=g, epsilon=epsilon, tol=1e-3, cache_size=64,
              max_iter=1_000_000)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        est.fit(z, y)
    converged = not any(issubclass(w.category, ConvergenceWarning) for w in caught)
    return est, converged


def svr_train(
    X, y,
    c_grid=DEFAULT_C_GRID,
    gamma_grid=DEFAULT_GAMMA_GRID,
    epsilon=DEFAULT_EPSILON,
    folds=5,
    seed=0,
    column_indices=None,
) -> QualityModel:
    """Train a radial-basis epsilon-SVR on z-scored features.

    Hyperparameters maximize the mean rank correlation over an internal
    ``folds``-fold split (assignment seeded, ties resolved by grid
    order). Constant feature columns keep std 1 and are flagged. The
    returned model carries everything prediction needs as plain arrays.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError(f"bad training shapes {X.shape} vs {y.shape}")
    n = X.shape[0]
    if n < 8:
        raise ValueError(f"need at least 8 training rows, got {n}")
    if not np.all(np.isfinite(y)) or not np.all(np.isfinite(X)):
        raise ValueError("features and labels must be finite")
    if np.ptp(y) == 0:
        raise ValueError("labels are constant; nothing to regress")

    mean = X.mean(axis=0)
    std = X.std(axis=0)
    constant = np.flatnonzero(std == 0)
    if constant.size:
        log.warning("constant feature columns %s; std pinned to 1", constant.tolist())
        std = std.copy()
        std[constant] = 1.0
    z = (X - mean) / std

    combos = [(c, g) for c in c_grid for g in gamma_grid]
    if len(combos) > 1:
        rng = np.random.default_rng(seed)
        fold_of = np.zeros(n, dtype=int)
        for f, chunk in enumerate(np.array_split(rng.permutation(n), folds)):
            fold_of[chunk] = f
        best_combo, best_score = combos[0], -np.inf
        for combo in combos:
            scores = []
            for f in range(folds):
                test = fold_of == f
                if test.sum() < 2 or (~test).sum() < 1 or np.ptp(y[test]) == 0:
                    continue
                est, _ = _fit_svr(z[~test], y[~test], combo[0], combo[1], epsilon)
                pred = est.predict(z[test])
                if np.ptp(pred) == 0:
                    continue
                scores.append(spearman(pred, y[test]))
            score = float(np.mean(scores)) if scores else -np.inf
            if score > best_score + 1e-12:
                best_combo, best_score = combo, score
    else:
        best_combo = combos[0]

    est, converged = _fit_svr(z, y, best_combo[0], best_combo[1], epsilon)
    if not converged:
        log.warning("SVR solver hit its iteration cap; keeping best feasible dual")
    return QualityModel(
        feat_mean=mean,
        feat_std=std,
        support_vectors=np.array(est.support_vectors_),
        dual_coef=np.array(est.dual_coef_[0]),
        intercept=float(est.intercept_[0]),
        c=float(best_combo[0]),
        gamma=float(best_combo[1]),
        epsilon=float(epsilon),
        constant_features=tuple(int(i) for i in constant),
        converged=converged,
        column_indices=None if column_indices is None else tuple(column_indices),
    )


def svr_predict(model: QualityModel, x):
    """Kernel expansion over the stored support vectors.

    Accepts a single vector (returns a float) or a matrix of rows; the
    batch path applies the same per-pair arithmetic, so both agree
    bitwise.
    """
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != model.n_features:
        got = arr.shape[-1] if arr.ndim else 0
        raise ValueError(f"expected {model.n_features} features, got {got}")
    z = (arr - model.feat_mean) / model.feat_std
    diff = z[:, None, :] - model.support_vectors[None, :, :]
    dist_sq = np.sum(diff * diff, axis=2)
    # row-wise reduction instead of a BLAS matvec: the summation tree then
    # does not depend on the batch size, so batch == per-item bitwise
    pred = np.sum(np.exp(-model.gamma * dist_sq) * model.dual_coef, axis=1) + model.intercept
    return float(pred[0]) if single else pred


def _split_indices(rng, labels, scenes, train_frac, split_mode):
    n = labels.size
    if split_mode == "by-item":
        perm = rng.permutation(n)
        cut = min(max(int(round(train_frac * n)), 1), n - 1)
        return perm[:cut], perm[cut:]
    if split_mode == "by-scene":
        unique = np.unique(scenes)
        perm = rng.permutation(unique.size)
        cut = min(max(int(round(train_frac * unique.size)), 1), unique.size - 1)
        train_scenes = set(unique[perm[:cut]])
        mask = np.array([s in train_scenes for s in scenes])
        return np.flatnonzero(mask), np.flatnonzero(~mask)
    raise ValueError(f"split_mode must be 'by-scene' or 'by-item', got {split_mode!r}")


def cross_validate(
    features,
    labels,
    scenes,
    iterations=1000,
    train_frac=0.8,
    split_mode="by-scene",
    seed=0,
    c_grid=DEFAULT_C_GRID,
    gamma_grid=DEFAULT_GAMMA_GRID,
    epsilon=DEFAULT_EPSILON,
    threads=1,
    max_resample=20,
) -> EvalSummary:
    """Repeated random-split evaluation; reports medians over iterations.

    Each iteration draws its own seed from a spawned sequence, so results
    are reproducible from ``seed`` and independent of scheduling. Splits
    leaving a degenerate fold (too small, or constant labels) are
    resampled up to ``max_resample`` times and counted in the record; an
    iteration that still fails, or whose predictions collapse to a
    constant, contributes NaN metrics and is skipped by the median.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float).ravel()
    scenes = np.asarray(scenes)
    if X.shape[0] != y.size or scenes.size != y.size:
        raise ValueError("features, labels and scenes must align")
    if split_mode == "by-scene" and np.unique(scenes).size < 2:
        raise ValueError("by-scene splitting needs at least 2 scenes")
    if split_mode == "by-item" and y.size < 10:
        raise ValueError("by-item splitting needs at least 10 items")

    children = np.random.SeedSequence(seed).spawn(iterations)

    def run(i: int) -> IterationRecord:
        rng = np.random.default_rng(children[i])
        train_idx = test_idx = None
        resampled = 0
        for attempt in range(max_resample):
            tr, te = _split_indices(rng, y, scenes, train_frac, split_mode)
            if (
                te.size >= 2
                and tr.size >= 8
                and np.ptp(y[tr]) > 0
                and np.ptp(y[te]) > 0
            ):
                train_idx, test_idx = tr, te
                break
            resampled += 1
        if train_idx is None:
            log.warning("iteration %d: no usable split after %d draws", i, max_resample)
            return IterationRecord(i, np.nan, np.nan, np.nan, np.nan, 0, 0, resampled)
        model = svr_train(
            X[train_idx], y[train_idx],
            c_grid=c_grid, gamma_grid=gamma_grid, epsilon=epsilon,
            seed=int(rng.integers(2**31)),
        )
        pred = svr_predict(model, X[test_idx])
        try:
            fitted = logistic_fit(pred, y[test_idx], seed=int(rng.integers(2**31)))
            result = metrics(pred, y[test_idx], fitted)
        except ValueError:
            log.warning("iteration %d: degenerate predictions", i)
            return IterationRecord(
                i, np.nan, np.nan, np.nan, np.nan, train_idx.size, test_idx.size, resampled
            )
        return IterationRecord(
            i, result.srcc, result.lcc, result.rmse, result.or_ratio,
            train_idx.size, test_idx.size, resampled,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool_:
            records = list(pool_.map(run, range(iterations)))
    else:
        records = [run(i) for i in range(iterations)]

    def median_of(attr):
        values = np.array([getattr(r, attr) for r in records])
        return float(np.nanmedian(values)) if np.any(np.isfinite(values)) else float("nan")

    return EvalSummary(
        srcc=median_of("srcc"),
        lcc=median_of("lcc"),
        rmse=median_of("rmse"),
        or_ratio=median_of("or_ratio"),
        records=tuple(records),
    )


# ---------------------------------------------------------------------------
# exchange formats: features CSV + sidecar, model JSON, predictions CSV

def sidecar_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".sidecar.json")


def write_features_csv(path, ids, scenes, labels, matrix, orientations=None,
                       columns=FEATURE_COLUMNS) -> Path:
    """Write the feature exchange CSV (and its JSON sidecar).

    Columns are ``id,scene,label,f001..`` plus an ``orientation`` column
    when per-orientation rows are written. Floats are serialized with
    ``repr`` so repeated runs are byte-identical.
    """
    path = Path(path)
    matrix = np.asarray(matrix, dtype=float)
    names = [c["column"] for c in columns]
    if matrix.ndim != 2 or matrix.shape[1] != len(names):
        raise ValueError(f"feature matrix must have {len(names)} columns, got {matrix.shape}")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = ["id", "scene", "label"]
        if orientations is not None:
            header.append("orientation")
        writer.writerow(header + names)
        for i, row in enumerate(matrix):
            label = labels[i]
            rec = [ids[i], scenes[i], "" if label is None else repr(float(label))]
            if orientations is not None:
                rec.append(str(orientations[i]))
            writer.writerow(rec + [repr(float(v)) for v in row])
    meta = {
        "format": FEATURES_FORMAT,
        "version": 1,
        "orientation": "per-row" if orientations is not None else "pooled",
        "columns": [dict(c) for c in columns],
    }
    sidecar_path(path).write_text(json.dumps(meta, indent=1))
    return path


def read_features_csv(path):
    """Read the exchange CSV; returns (ids, scenes, labels, matrix).

    Missing labels come back as NaN.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:3] != ["id", "scene", "label"]:
            raise ValueError(f"{path}: expected header id,scene,label,f001..., got {header[:3]}")
        first_feat = 3
        if len(header) > 3 and header[3] == "orientation":
            first_feat = 4
        ids, scenes, labels, rows = [], [], [], []
        for rec in reader:
            ids.append(rec[0])
            scenes.append(rec[1])
            labels.append(float(rec[2]) if rec[2] else float("nan"))
            rows.append([float(v) for v in rec[first_feat:]])
    return ids, scenes, np.array(labels), np.array(rows)


def read_feature_sidecar(csv_path):
    meta = json.loads(sidecar_path(csv_path).read_text())
    if meta.get("format") != FEATURES_FORMAT:
        raise ValueError(f"{sidecar_path(csv_path)} is not a feature sidecar")
    return meta["columns"]


def save_model(model: QualityModel, path) -> Path:
    path = Path(path)
    payload = {
        "format": MODEL_FORMAT,
        "version": 1,
        "feat_mean": model.feat_mean.tolist(),
        "feat_std": model.feat_std.tolist(),
        "support_vectors": model.support_vectors.tolist(),
        "dual_coef": model.dual_coef.tolist(),
        "intercept": model.intercept,
        "c": model.c,
        "gamma": model.gamma,
        "epsilon": model.epsilon,
        "constant_features": list(model.constant_features),
        "converged": model.converged,
        "column_indices": None if model.column_indices is None else list(model.column_indices),
        "logistic": None if model.logistic is None else model.logistic.beta.tolist(),
    }
    path.write_text(json.dumps(payload))
    return path


def load_model(path) -> QualityModel:
    raw = json.loads(Path(path).read_text())
    if raw.get("format") != MODEL_FORMAT or raw.get("version") != 1:
        raise ValueError(f"{path} is not a version-1 model file")
    return QualityModel(
        feat_mean=np.array(raw["feat_mean"]),
        feat_std=np.array(raw["feat_std"]),
        support_vectors=np.array(raw["support_vectors"]),
        dual_coef=np.array(raw["dual_coef"]),
        intercept=float(raw["intercept"]),
        c=float(raw["c"]),
        gamma=float(raw["gamma"]),
        epsilon=float(raw["epsilon"]),
        constant_features=tuple(raw.get("constant_features", ())),
        converged=bool(raw.get("converged", True)),
        column_indices=(
            None if raw.get("column_indices") is None else tuple(raw["column_indices"])
        ),
        logistic=(
            None if raw.get("logistic") is None
            else LogisticParams(beta=np.array(raw["logistic"]))
        ),
    )


def write_predictions_csv(path, ids, scores) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "score"])
        for item_id, score in zip(ids, scores):
            writer.writerow([item_id, repr(float(score))])
    return path
