"""From-scratch classifiers and label smoothing.

* Random forest: CART trees on Gini impurity, bootstrap resampling, a
  random feature subset per split.  Split thresholds are observed values
  ("x <= v"), so routing depends only on value order and predictions are
  invariant under strictly increasing per-feature transforms.  All
  tie-breaks are canonical (earlier feature, smaller threshold, lower
  class index), making runs byte-for-byte reproducible under a seed.
* Weighted one-vs-rest logistic regression: per-class binary cross
  entropy with per-sample weights and L2 regularisation, plain gradient
  descent.  Duplicating a sample is exactly equivalent to doubling its
  weight.
* Soft-vote smoothing: per-window class probabilities averaged over a
  symmetric window-index neighbourhood before argmax.

Forest probabilities are vote fractions; logistic probabilities are
normalized per-class sigmoid scores.  Both sum to one per row.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DomainError, SchemaError, TrainingError
from .features import manifest_hash
from .ingest import atomic_write_text
from .rng import spawn_seeds

__all__ = [
    "ForestConfig",
    "LogRegConfig",
    "TrainedModel",
    "train_random_forest",
    "train_weighted_ovr_logistic",
    "predict_proba",
    "window_weight",
    "soft_vote_smooth",
    "grid_search_forest",
    "save_model",
    "load_model",
]

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ForestConfig:
    """``features_per_split=None`` means round(sqrt(n_features))."""

    n_trees: int = 20
    max_depth: int = 15
    features_per_split: int | None = None
    min_samples_split: int = 2
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise DomainError("n_trees must be >= 1")
        if self.max_depth < 1:
            raise DomainError("max_depth must be >= 1")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise DomainError("features_per_split must be >= 1 when given")
        if self.min_samples_split < 2:
            raise DomainError("min_samples_split must be >= 2")


@dataclass(frozen=True)
class LogRegConfig:
    learning_rate: float = 0.5
    max_iters: int = 3000
    l2_penalty: float = 1e-4
    tol: float = 1e-7

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise DomainError("learning_rate must be positive")
        if self.max_iters < 1:
            raise DomainError("max_iters must be >= 1")
        if self.l2_penalty < 0:
            raise DomainError("l2_penalty must be non-negative")
        if not self.tol > 0:
            raise DomainError("tol must be positive")


@dataclass
class TrainedModel:
    """A fitted classifier plus everything needed to reuse it safely.

    ``manifest_hash`` pins the feature composition the model was trained
    on; prediction refuses inputs declaring a different hash.
    """

    kind: str                       # "random_forest" | "ovr_logistic"
    classes: tuple[str, ...]
    params: dict
    config: dict
    feature_names: tuple[str, ...] | None = None
    manifest_hash: str | None = None
    training_meta: dict = field(default_factory=dict)

    def predict_proba(self, X: np.ndarray,
                      feature_names: Sequence[str] | None = None) -> np.ndarray:
        return predict_proba(self, X, feature_names=feature_names)

    def predict(self, X: np.ndarray,
                feature_names: Sequence[str] | None = None) -> list[str]:
        proba = self.predict_proba(X, feature_names=feature_names)
        return [self.classes[i] for i in np.argmax(proba, axis=1)]


def _check_training_input(X: np.ndarray, y: Sequence) -> tuple[np.ndarray, np.ndarray, list[str]]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DomainError("training needs a non-empty 2-D matrix")
    if y.shape != (X.shape[0],):
        raise DomainError("labels must be one per row")
    if not np.isfinite(X).all():
        raise DomainError("training features contain non-finite values")
    classes = sorted(set(y.tolist()))
    if len(classes) < 2:
        raise TrainingError(
            f"degenerate training set: single class {classes[0]!r}; need at least 2"
        )
    return X, y, classes


# ---------------------------------------------------------------------------
# random forest

def _best_split(X: np.ndarray, y_enc: np.ndarray, idx: np.ndarray,
                feats: np.ndarray, n_classes: int) -> tuple[float, int, float] | None:
    """Lowest weighted-Gini split over candidate features.

    Thresholds are observed values ("x <= v"); ties keep the earlier
    feature and the smaller threshold.
    """
    m = idx.size
    ysub = y_enc[idx]
    best_g = np.inf
    best: tuple[int, float] | None = None
    for j in feats:
        v = X[idx, j]
        order = np.argsort(v, kind="stable")
        sv = v[order]
        if sv[0] == sv[-1]:
            continue
        onehot = np.zeros((m, n_classes))
        onehot[np.arange(m), ysub[order]] = 1.0
        pre = np.cumsum(onehot, axis=0)
        cut = np.flatnonzero(sv[:-1] < sv[1:])
        nl = (cut + 1).astype(np.float64)
        nr = m - nl
        lc = pre[cut]
        rc = pre[-1] - lc
        gl = 1.0 - ((lc / nl[:, None]) ** 2).sum(axis=1)
        gr = 1.0 - ((rc / nr[:, None]) ** 2).sum(axis=1)
        g = (nl * gl + nr * gr) / m
        k = int(np.argmin(g))
        if g[k] < best_g:
            best_g = float(g[k])
            best = (int(j), float(sv[cut[k]]))
    if best is None:
        return None
    return best_g, best[0], best[1]


def _grow_tree(X: np.ndarray, y_enc: np.ndarray, idx: np.ndarray, depth: int,
               cfg: ForestConfig, k_feats: int, n_classes: int,
               rng: np.random.Generator) -> dict:
    counts = np.bincount(y_enc[idx], minlength=n_classes)
    if (
        depth >= cfg.max_depth
        or idx.size < cfg.min_samples_split
        or int(counts.max()) == idx.size
    ):
        return {"c": int(np.argmax(counts))}
    feats = np.sort(rng.choice(X.shape[1], size=k_feats, replace=False))
    found = _best_split(X, y_enc, idx, feats, n_classes)
    if found is None:
        return {"c": int(np.argmax(counts))}
    _, j, thr = found
    go_left = X[idx, j] <= thr
    left = _grow_tree(X, y_enc, idx[go_left], depth + 1, cfg, k_feats, n_classes, rng)
    right = _grow_tree(X, y_enc, idx[~go_left], depth + 1, cfg, k_feats, n_classes, rng)
    return {"f": j, "t": thr, "l": left, "r": right}


def train_random_forest(
    X: np.ndarray,
    y: Sequence,
    config: ForestConfig | None = None,
    feature_names: Sequence[str] | None = None,
) -> TrainedModel:
    """Fit a bootstrap ensemble of Gini CART trees."""
    config = config or ForestConfig()
    X, y, classes = _check_training_input(X, y)
    class_index = {c: i for i, c in enumerate(classes)}
    y_enc = np.array([class_index[v] for v in y.tolist()], dtype=np.intp)
    n, d = X.shape
    k_feats = config.features_per_split or max(1, int(round(np.sqrt(d))))
    k_feats = min(k_feats, d)

    trees = []
    for tree_seed in spawn_seeds(config.seed, "bootstrap", config.n_trees):
        rng = np.random.default_rng(tree_seed)
        idx = rng.integers(0, n, size=n) if config.bootstrap else np.arange(n)
        trees.append(_grow_tree(X, y_enc, np.asarray(idx), 0, config, k_feats,
                                len(classes), rng))

    names = tuple(feature_names) if feature_names is not None else None
    return TrainedModel(
        kind="random_forest",
        classes=tuple(classes),
        params={"trees": trees},
        config={
            "n_trees": config.n_trees,
            "max_depth": config.max_depth,
            "features_per_split": k_feats,
            "min_samples_split": config.min_samples_split,
            "bootstrap": config.bootstrap,
            "seed": config.seed,
        },
        feature_names=names,
        manifest_hash=manifest_hash(names) if names else None,
    )


def _tree_votes(node: dict, X: np.ndarray, idx: np.ndarray, out: np.ndarray) -> None:
    if "c" in node:
        out[idx] = node["c"]
        return
    mask = X[idx, node["f"]] <= node["t"]
    if mask.any():
        _tree_votes(node["l"], X, idx[mask], out)
    if (~mask).any():
        _tree_votes(node["r"], X, idx[~mask], out)


def _forest_proba(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    n = X.shape[0]
    n_classes = len(model.classes)
    counts = np.zeros((n, n_classes))
    votes = np.empty(n, dtype=np.intp)
    all_idx = np.arange(n)
    for tree in model.params["trees"]:
        _tree_votes(tree, X, all_idx, votes)
        counts[all_idx, votes] += 1.0
    return counts / len(model.params["trees"])


# ---------------------------------------------------------------------------
# weighted one-vs-rest logistic regression

def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def train_weighted_ovr_logistic(
    X: np.ndarray,
    y: Sequence,
    sample_weights: np.ndarray | None = None,
    config: LogRegConfig | None = None,
    feature_names: Sequence[str] | None = None,
) -> TrainedModel:
    """One binary weighted logistic model per class.

    Per class c the loss is sum_i s_i * CE(sigmoid(w.x_i + b), [y_i == c])
    normalized by sum_i s_i, plus (l2/2) * |w|^2 (bias unpenalized).
    With all weight concentrated on one class a classifier degenerates to
    the weighted prior (bounded by the regulariser); this is reported via
    ``training_meta`` rather than rejected.
    """
    config = config or LogRegConfig()
    X, y, classes = _check_training_input(X, y)
    n, d = X.shape
    if sample_weights is None:
        s = np.ones(n)
    else:
        s = np.asarray(sample_weights, dtype=np.float64)
        if s.shape != (n,):
            raise DomainError("sample_weights must be one per row")
        if (s < 0).any() or not np.isfinite(s).all():
            raise DomainError("sample_weights must be finite and non-negative")
        if s.sum() <= 0:
            raise DomainError("sample_weights sum to zero")

    S = float(s.sum())
    W = np.zeros((len(classes), d))
    B = np.zeros(len(classes))
    meta = {"converged": [], "iterations": []}

    for ci, cls in enumerate(classes):
        t = (y == cls).astype(np.float64)
        w = np.zeros(d)
        b = 0.0
        converged = False
        it = 0
        for it in range(1, config.max_iters + 1):
            p = _sigmoid(X @ w + b)
            resid = s * (p - t)
            gw = X.T @ resid / S + config.l2_penalty * w
            gb = float(resid.sum() / S)
            if not (np.isfinite(gw).all() and np.isfinite(gb)):
                raise TrainingError(f"logistic fit diverged for class {cls!r}")
            w -= config.learning_rate * gw
            b -= config.learning_rate * gb
            if max(float(np.abs(gw).max()), abs(gb)) < config.tol:
                converged = True
                break
        W[ci] = w
        B[ci] = b
        meta["converged"].append(converged)
        meta["iterations"].append(it)

    names = tuple(feature_names) if feature_names is not None else None
    return TrainedModel(
        kind="ovr_logistic",
        classes=tuple(classes),
        params={"weights": W.tolist(), "biases": B.tolist()},
        config={
            "learning_rate": config.learning_rate,
            "max_iters": config.max_iters,
            "l2_penalty": config.l2_penalty,
            "tol": config.tol,
        },
        feature_names=names,
        manifest_hash=manifest_hash(names) if names else None,
        training_meta=meta,
    )


def _logistic_proba(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    W = np.asarray(model.params["weights"], dtype=np.float64)
    B = np.asarray(model.params["biases"], dtype=np.float64)
    scores = _sigmoid(X @ W.T + B)
    return scores / scores.sum(axis=1, keepdims=True)


def predict_proba(model: TrainedModel, X: np.ndarray,
                  feature_names: Sequence[str] | None = None) -> np.ndarray:
    """Per-class probabilities, rows summing to one.

    When both the model and the caller declare a feature manifest, the
    hashes must agree.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DomainError("predict expects a 2-D matrix")
    if feature_names is not None and model.manifest_hash is not None:
        got = manifest_hash(tuple(feature_names))
        if got != model.manifest_hash:
            raise SchemaError(
                "feature manifest mismatch: model was trained on a different composition"
            )
    if model.feature_names is not None and X.shape[1] != len(model.feature_names):
        raise SchemaError(
            f"matrix has {X.shape[1]} features, model expects {len(model.feature_names)}"
        )
    if not np.isfinite(X).all():
        raise DomainError("prediction input contains non-finite values")
    if model.kind == "random_forest":
        return _forest_proba(model, X)
    if model.kind == "ovr_logistic":
        return _logistic_proba(model, X)
    raise SchemaError(f"unknown model kind {model.kind!r}")


# ---------------------------------------------------------------------------
# class-frequency window weighting and soft voting

def window_weight(window_labels: Sequence[str], class_frame_counts: Mapping[str, int]) -> float:
    """Sum over the window's frames of N / count(class of frame), where N
    is the total number of training timesteps and count() the per-class
    training timestep totals.

    Rare-class windows therefore weigh more.  Every label occurring in
    the window must have a positive count.
    """
    if len(window_labels) == 0:
        raise DomainError("window has no frames")
    n_total = float(sum(class_frame_counts.values()))
    if n_total <= 0:
        raise DomainError("class frame counts are empty")
    weight = 0.0
    for lab in window_labels:
        cnt = class_frame_counts.get(lab, 0)
        if cnt <= 0:
            raise DomainError(f"label {lab!r} has no positive frame count")
        weight += n_total / cnt
    return weight


def soft_vote_smooth(proba: np.ndarray, radius: int = 3) -> np.ndarray:
    """Argmax over neighbourhood-averaged probability rows.

    Row i averages rows [i - radius, i + radius] clipped to the sequence;
    radius 0 reduces to plain per-row argmax.  Returns class indices.
    """
    P = np.asarray(proba, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] == 0:
        raise DomainError("soft_vote_smooth expects a non-empty 2-D matrix")
    if radius < 0:
        raise DomainError("radius must be non-negative")
    n = P.shape[0]
    if radius == 0:
        return np.argmax(P, axis=1)
    csum = np.vstack([np.zeros((1, P.shape[1])), np.cumsum(P, axis=0)])
    out = np.empty(n, dtype=np.intp)
    for i in range(n):
        lo = max(0, i - radius)
        hi = min(n - 1, i + radius)
        mean = (csum[hi + 1] - csum[lo]) / (hi - lo + 1)
        out[i] = int(np.argmax(mean))
    return out


def grid_search_forest(
    X_train: np.ndarray,
    y_train: Sequence,
    X_val: np.ndarray,
    y_val: Sequence,
    n_trees_grid: Sequence[int],
    max_depth_grid: Sequence[int],
    seed: int = 0,
    feature_names: Sequence[str] | None = None,
) -> dict:
    """Exhaustive (n_trees, max_depth) search scored by hamming loss."""
    from .evaluation import hamming_loss

    y_val_list = list(y_val)
    results = []
    best = None
    for nt in n_trees_grid:
        for md in max_depth_grid:
            cfg = ForestConfig(n_trees=int(nt), max_depth=int(md), seed=seed)
            model = train_random_forest(X_train, y_train, cfg, feature_names=feature_names)
            pred = model.predict(X_val)
            loss = hamming_loss(y_val_list, pred)
            results.append({"n_trees": int(nt), "max_depth": int(md), "hamming_loss": loss})
            if best is None or loss < best["hamming_loss"]:
                best = results[-1]
    return {"results": results, "best": best}


# ---------------------------------------------------------------------------
# serialization

def save_model(model: TrainedModel, path: str | Path) -> None:
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": model.kind,
        "classes": list(model.classes),
        "params": model.params,
        "config": model.config,
        "feature_names": list(model.feature_names) if model.feature_names else None,
        "manifest_hash": model.manifest_hash,
        "training_meta": model.training_meta,
    }
    atomic_write_text(Path(path), json.dumps(doc, sort_keys=True) + "\n")


def load_model(path: str | Path) -> TrainedModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise SchemaError(f"cannot read model file {path}: {e}") from None
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise SchemaError(
            f"unsupported model format version {doc.get('format_version')!r}"
        )
    return TrainedModel(
        kind=doc["kind"],
        classes=tuple(doc["classes"]),
        params=doc["params"],
        config=doc.get("config", {}),
        feature_names=tuple(doc["feature_names"]) if doc.get("feature_names") else None,
        manifest_hash=doc.get("manifest_hash"),
        training_meta=doc.get("training_meta", {}),
    )
