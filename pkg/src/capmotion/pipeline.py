"""End-to-end runners: fold evaluation, repetition counting, pair evaluation.

Leakage discipline is enforced structurally:

* train/test session id sets are asserted disjoint in every fold;
* the feature normalizer is fitted on training windows only;
* oversampling (SMOTE) runs on the training matrix only, after the
  normalizer, and never sees test rows;
* class-frequency window weights use training frame counts only.

Windows and raw feature vectors are fold-independent, so they are
computed once per session and reused across folds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .balance import SmoteConfig, smote
from .counting import (
    count_source,
    counting_accuracy,
    fuse_counts,
    peak_config_for_class,
)
from .errors import ConfigError, DataError, DomainError
from .evaluation import (
    EvalReport,
    Fold,
    confusion_matrix,
    hamming_loss,
    macro_f_score,
    make_random_folds,
    make_session_folds,
    precision_recall,
)
from .features import (
    FeatureNormalizer,
    WindowingConfig,
    extract_features_gym,
    extract_features_leg,
    feature_subset_indices,
    slide_windows,
)
from .ingest import PreprocessConfig, detrend, normalize_session_hbc
from .models import (
    ForestConfig,
    LogRegConfig,
    TrainedModel,
    predict_proba,
    soft_vote_smooth,
    train_random_forest,
    train_weighted_ovr_logistic,
    window_weight,
)
from .pairwise import align_sessions, derive_pair_labels, pair_features
from .types import DISCARD, Session, Window

__all__ = [
    "RunConfig",
    "run_fold_evaluation",
    "run_random_split_evaluation",
    "train_on_sessions",
    "SegmentCount",
    "count_session_segments",
    "count_sessions",
    "run_pair_evaluation",
]


@dataclass(frozen=True)
class RunConfig:
    """Everything one classification run depends on.

    ``target`` chooses what the classifier learns: ``"activity"`` uses
    the window's activity label, ``"user"`` relabels every window with
    its wearer's id (wearer recognition).  ``use_window_weights`` and
    ``smote`` are mutually exclusive balancing strategies.
    """

    pipeline: str = "leg"                   # "leg" | "gym"
    subset: str = "all"                     # "all" | "hbc" | "imu"
    model_kind: str = "random_forest"       # "random_forest" | "ovr_logistic"
    target: str = "activity"                # "activity" | "user"
    windowing: WindowingConfig = field(default_factory=WindowingConfig)
    forest: ForestConfig = field(default_factory=ForestConfig)
    logreg: LogRegConfig = field(default_factory=LogRegConfig)
    smote: SmoteConfig | None = None
    use_window_weights: bool = False
    soft_vote_radius: int = 0
    normalize: bool = True
    preprocess: PreprocessConfig | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.pipeline not in ("leg", "gym"):
            raise ConfigError(f"unknown feature pipeline {self.pipeline!r}", key="pipeline")
        if self.subset not in ("all", "hbc", "imu"):
            raise ConfigError(f"unknown feature subset {self.subset!r}", key="subset")
        if self.model_kind not in ("random_forest", "ovr_logistic"):
            raise ConfigError(f"unknown model kind {self.model_kind!r}", key="model_kind")
        if self.target not in ("activity", "user"):
            raise ConfigError(f"unknown target {self.target!r}", key="target")
        if self.smote is not None and self.use_window_weights:
            raise ConfigError(
                "smote and use_window_weights are alternative balancing "
                "strategies; enable at most one", key="smote")
        if self.soft_vote_radius < 0:
            raise ConfigError("soft_vote_radius must be >= 0", key="soft_vote_radius")

    def describe(self) -> dict:
        doc = {
            "pipeline": self.pipeline,
            "subset": self.subset,
            "model_kind": self.model_kind,
            "target": self.target,
            "window_s": self.windowing.window_s,
            "step_s": self.windowing.step_s,
            "soft_vote_radius": self.soft_vote_radius,
            "use_window_weights": self.use_window_weights,
            "normalize": self.normalize,
            "seed": self.seed,
        }
        if self.model_kind == "random_forest":
            doc["forest"] = {"n_trees": self.forest.n_trees,
                             "max_depth": self.forest.max_depth,
                             "bootstrap": self.forest.bootstrap}
        else:
            doc["logreg"] = {"learning_rate": self.logreg.learning_rate,
                             "max_iters": self.logreg.max_iters,
                             "l2_penalty": self.logreg.l2_penalty}
        if self.smote is not None:
            doc["smote"] = {"k_neighbors": self.smote.k_neighbors}
        return doc


def _preprocessed(session: Session, config: PreprocessConfig | None) -> Session:
    if config is None:
        return session
    out = session
    if config.hbc_anchor_class is not None:
        out = normalize_session_hbc(out, config)
    if config.detrend_mode != "none":
        import dataclasses

        cap = detrend(out.cap_uv, config.detrend_mode)
        out = dataclasses.replace(out, cap_uv=cap)
    return out


@dataclass
class _SessionCache:
    session: Session
    windows: list[Window]
    vectors: list  # FeatureVector per window, same order


def _build_cache(sessions: Sequence[Session], cfg: RunConfig) -> dict[str, _SessionCache]:
    extract = extract_features_leg if cfg.pipeline == "leg" else extract_features_gym
    cache: dict[str, _SessionCache] = {}
    for raw in sessions:
        if raw.id in cache:
            raise DomainError(f"duplicate session id {raw.id!r}")
        s = _preprocessed(raw, cfg.preprocess)
        wins = slide_windows(s, cfg.windowing)
        cache[raw.id] = _SessionCache(session=s, windows=wins,
                                      vectors=[extract(w) for w in wins])
    return cache


def _frame_counts(sessions: Sequence[Session], target: str) -> dict[str, int]:
    counts: dict[str, int] = {}
    for s in sessions:
        if target == "user":
            counts[s.user_id] = counts.get(s.user_id, 0) + s.n_frames
        else:
            for lab in s.labels.tolist():
                if lab != DISCARD:
                    counts[lab] = counts.get(lab, 0) + 1
    return counts


def _window_target(cache: _SessionCache, w_index: int, target: str) -> str:
    if target == "user":
        return cache.session.user_id
    return cache.windows[w_index].label


def _window_frame_labels(cache: _SessionCache, w_index: int, target: str) -> list[str]:
    w = cache.windows[w_index]
    if target == "user":
        return [cache.session.user_id] * w.length
    s = cache.session
    return s.labels[w.start_index:w.start_index + w.length].tolist()


def _fold_matrices(cache: Mapping[str, _SessionCache], ids: Sequence[str],
                   cfg: RunConfig, idx_cols: np.ndarray):
    """Stacked feature rows for the given sessions, plus per-row metadata."""
    rows, labels, meta = [], [], []
    for sid in ids:
        c = cache[sid]
        for wi, vec in enumerate(c.vectors):
            rows.append(vec.values[idx_cols])
            labels.append(_window_target(c, wi, cfg.target))
            meta.append((sid, wi))
    if not rows:
        raise DomainError("fold has no windows")
    return np.stack(rows), labels, meta


def _train_model(X: np.ndarray, y: Sequence[str], weights: np.ndarray | None,
                 cfg: RunConfig, names: tuple[str, ...]) -> TrainedModel:
    if cfg.model_kind == "random_forest":
        import dataclasses

        forest = dataclasses.replace(cfg.forest, seed=cfg.seed)
        return train_random_forest(X, y, forest, feature_names=names)
    return train_weighted_ovr_logistic(X, y, weights, cfg.logreg, feature_names=names)


def _predict_fold(model: TrainedModel, X: np.ndarray, meta: list, cfg: RunConfig) -> list[str]:
    """Predict test windows, soft-voting within each session's window order."""
    proba = predict_proba(model, X)
    pred = [None] * len(meta)
    by_session: dict[str, list[int]] = {}
    for row, (sid, _) in enumerate(meta):
        by_session.setdefault(sid, []).append(row)
    for sid, row_ids in by_session.items():
        ordered = sorted(row_ids, key=lambda r: meta[r][1])
        votes = soft_vote_smooth(proba[ordered], cfg.soft_vote_radius)
        for r, v in zip(ordered, votes):
            pred[r] = model.classes[int(v)]
    return pred


def _evaluate_folds(cache: Mapping[str, _SessionCache], folds: Sequence[Fold],
                    cfg: RunConfig, names: tuple[str, ...],
                    idx_cols: np.ndarray, label_set_id: str,
                    scheme: str) -> EvalReport:
    all_true: list[str] = []
    all_pred: list[str] = []
    per_fold = []
    for fold in folds:
        overlap = set(fold.train_ids) & set(fold.test_ids)
        if overlap:
            raise DomainError(f"leakage: sessions {sorted(overlap)} in both sides")
        Xtr, ytr, mtr = _fold_matrices(cache, fold.train_ids, cfg, idx_cols)
        Xte, yte, mte = _fold_matrices(cache, fold.test_ids, cfg, idx_cols)

        if cfg.normalize:
            norm = FeatureNormalizer.fit(Xtr)
            Xtr = norm.transform(Xtr)
            Xte = norm.transform(Xte)

        weights = None
        if cfg.use_window_weights:
            counts = _frame_counts([cache[sid].session for sid in fold.train_ids],
                                   cfg.target)
            weights = np.array([
                window_weight(_window_frame_labels(cache[sid], wi, cfg.target), counts)
                for sid, wi in mtr
            ])
        if cfg.smote is not None:
            import dataclasses

            sm = dataclasses.replace(cfg.smote, seed=cfg.seed)
            Xtr, ytr = smote(Xtr, np.asarray(ytr), sm)

        model = _train_model(Xtr, ytr, weights, cfg, names)
        pred = _predict_fold(model, Xte, mte, cfg)

        all_true.extend(yte)
        all_pred.extend(pred)
        per_fold.append({
            "held_out": fold.held_out,
            "n_train_windows": int(Xtr.shape[0]),
            "n_test_windows": int(Xte.shape[0]),
            "macro_f": macro_f_score(yte, pred),
            "hamming": hamming_loss(yte, pred),
        })

    classes = tuple(sorted(set(all_true) | set(all_pred)))
    M, _ = confusion_matrix(all_true, all_pred, classes)
    return EvalReport(
        scheme=scheme,
        seed=cfg.seed,
        label_set_id=label_set_id,
        feature_subset=cfg.subset,
        model_kind=cfg.model_kind,
        config=cfg.describe(),
        classes=classes,
        confusion=M.tolist(),
        per_class=precision_recall(all_true, all_pred, classes),
        macro_f=macro_f_score(all_true, all_pred, classes),
        hamming=hamming_loss(all_true, all_pred),
        per_fold=per_fold,
    )


def run_fold_evaluation(sessions: Sequence[Session], scheme: str,
                        cfg: RunConfig | None = None) -> EvalReport:
    """Session-grouped cross-validation of one classification setup."""
    cfg = cfg or RunConfig()
    if not sessions:
        raise DomainError("no sessions")
    if cfg.target == "user" and scheme == "louo":
        raise ConfigError(
            "wearer recognition cannot hold out a whole wearer: the held-out "
            "class would be absent from training; use loso", key="target")
    label_set_id = sessions[0].label_set_id
    cache = _build_cache(sessions, cfg)
    some_vec = next(iter(cache.values())).vectors
    if not some_vec:
        raise DomainError("first session produced no windows")
    names_full = some_vec[0].names
    idx_cols = feature_subset_indices(names_full, cfg.subset)
    names = tuple(names_full[i] for i in idx_cols)
    folds = make_session_folds(sessions, scheme)
    return _evaluate_folds(cache, folds, cfg, names, idx_cols, label_set_id, scheme)


def train_on_sessions(
    sessions: Sequence[Session],
    cfg: RunConfig | None = None,
) -> tuple[TrainedModel, FeatureNormalizer | None]:
    """Fit one model on every window of the given sessions.

    Returns the model plus the fitted feature normalizer (None when
    normalization is disabled); prediction-time inputs must pass through
    the same normalizer.
    """
    cfg = cfg or RunConfig()
    if not sessions:
        raise DomainError("no sessions")
    cache = _build_cache(sessions, cfg)
    names_full = next(iter(cache.values())).vectors[0].names
    idx = feature_subset_indices(names_full, cfg.subset)
    names = tuple(names_full[i] for i in idx)
    X, y, meta = _fold_matrices(cache, [s.id for s in sessions], cfg, idx)
    norm = None
    if cfg.normalize:
        norm = FeatureNormalizer.fit(X)
        X = norm.transform(X)
    weights = None
    if cfg.use_window_weights:
        counts = _frame_counts(sessions, cfg.target)
        weights = np.array([
            window_weight(_window_frame_labels(cache[sid], wi, cfg.target), counts)
            for sid, wi in meta])
    if cfg.smote is not None:
        import dataclasses

        X, y = smote(X, np.asarray(y),
                     dataclasses.replace(cfg.smote, seed=cfg.seed))
    return _train_model(X, y, weights, cfg, names), norm


def run_random_split_evaluation(sessions: Sequence[Session],
                                cfg: RunConfig | None = None) -> EvalReport:
    """Instance-level random-split evaluation (optimistic; for comparison).

    All windows are pooled, then split 30/30/30 with 10% discarded; each
    30% block serves once as the test side.  Soft voting is disabled here
    because shuffled instances have no temporal neighbourhood.
    """
    cfg = cfg or RunConfig()
    if not sessions:
        raise DomainError("no sessions")
    label_set_id = sessions[0].label_set_id
    cache = _build_cache(sessions, cfg)
    ids = [s.id for s in sessions]
    names_full = next(iter(cache.values())).vectors[0].names
    idx_cols = feature_subset_indices(names_full, cfg.subset)
    names = tuple(names_full[i] for i in idx_cols)
    X, y, meta = _fold_matrices(cache, ids, cfg, idx_cols)

    all_true: list[str] = []
    all_pred: list[str] = []
    per_fold = []
    for fold in make_random_folds(X.shape[0], cfg.seed):
        tr, te = fold["train_idx"], fold["test_idx"]
        Xtr, Xte = X[tr], X[te]
        ytr = [y[i] for i in tr]
        yte = [y[i] for i in te]
        if cfg.normalize:
            norm = FeatureNormalizer.fit(Xtr)
            Xtr, Xte = norm.transform(Xtr), norm.transform(Xte)
        weights = None
        if cfg.use_window_weights:
            counts = _frame_counts([c.session for c in cache.values()], cfg.target)
            weights = np.array([
                window_weight(_window_frame_labels(cache[meta[i][0]], meta[i][1],
                                                   cfg.target), counts)
                for i in tr
            ])
        if cfg.smote is not None:
            import dataclasses

            Xtr, ytr = smote(Xtr, np.asarray(ytr),
                             dataclasses.replace(cfg.smote, seed=cfg.seed))
        model = _train_model(Xtr, ytr, weights, cfg, names)
        proba = predict_proba(model, Xte)
        pred = [model.classes[i] for i in np.argmax(proba, axis=1)]
        all_true.extend(yte)
        all_pred.extend(pred)
        per_fold.append({"held_out": f"random-{fold['fold']}",
                         "n_train_windows": int(Xtr.shape[0]),
                         "n_test_windows": int(Xte.shape[0]),
                         "macro_f": macro_f_score(yte, pred),
                         "hamming": hamming_loss(yte, pred),
                         "note": fold["note"]})

    classes = tuple(sorted(set(all_true) | set(all_pred)))
    M, _ = confusion_matrix(all_true, all_pred, classes)
    return EvalReport(
        scheme="random_split", seed=cfg.seed, label_set_id=label_set_id,
        feature_subset=cfg.subset, model_kind=cfg.model_kind,
        config=cfg.describe(), classes=classes, confusion=M.tolist(),
        per_class=precision_recall(all_true, all_pred, classes),
        macro_f=macro_f_score(all_true, all_pred, classes),
        hamming=hamming_loss(all_true, all_pred), per_fold=per_fold,
        notes=("instance-level random split is optimistic: temporally "
               "overlapping windows cross the train/test boundary",),
    )


# ---------------------------------------------------------------------------
# repetition counting

@dataclass(frozen=True)
class SegmentCount:
    """Counting outcome for one single-activity segment."""

    session_id: str
    class_label: str
    start_index: int
    end_index: int
    true_repetitions: int
    counts: dict
    fused: int
    accuracy: float
    source: str


def _segment_table(session: Session) -> list[dict]:
    table = session.extras.get("segments")
    if not table:
        raise DataError(
            f"session {session.id!r} carries no ground-truth segment table; "
            "cannot score counting"
        )
    return list(table)


def count_session_segments(
    session: Session,
    source: str = "cap_raw",
    fuse: str | None = None,
) -> list[SegmentCount]:
    """Count repetitions per annotated segment of one session.

    ``source`` picks the single counting channel.  With ``fuse`` set
    ("imu_mean" or "closest_two_mean"), counts from acc magnitude, gyro
    magnitude and the capacitive channel are combined instead and the
    fused value is scored.
    """
    results = []
    channels = session.channels()
    fs = session.sample_rate_hz
    for seg in _segment_table(session):
        cls = seg["class"]
        a, b = int(seg["start_index"]), int(seg["end_index"])
        true_reps = int(seg["repetitions"])
        sliced = {k: v[a:b] for k, v in channels.items()}
        counts: dict[str, int] = {}
        if fuse is None:
            cfg = peak_config_for_class(cls, source)
            got = count_source(sliced, source, cfg, fs)
            counts[source] = got
            fused = got
        else:
            triple = {
                "acc": count_source(sliced, "acc_mag",
                                    peak_config_for_class(cls, "acc_mag"), fs),
                "gyro": count_source(sliced, "gyro_mag",
                                     peak_config_for_class(cls, "gyro_mag"), fs),
                "cap": count_source(sliced, "cap_raw",
                                    peak_config_for_class(cls, "cap_raw"), fs),
            }
            counts.update(triple)
            fused = fuse_counts(triple, fuse)
        results.append(SegmentCount(
            session_id=session.id, class_label=cls, start_index=a,
            end_index=b, true_repetitions=true_reps, counts=counts,
            fused=fused, accuracy=counting_accuracy(fused, true_reps),
            source=source if fuse is None else f"fuse:{fuse}",
        ))
    return results


def count_sessions(sessions: Sequence[Session], source: str = "cap_raw",
                   fuse: str | None = None) -> dict:
    """Counting summary over many sessions: per-class and overall accuracy."""
    segments: list[SegmentCount] = []
    for s in sessions:
        segments.extend(count_session_segments(s, source=source, fuse=fuse))
    if not segments:
        raise DataError("no segments to count")
    per_class: dict[str, list[float]] = {}
    for seg in segments:
        per_class.setdefault(seg.class_label, []).append(seg.accuracy)
    doc = {
        "source": source if fuse is None else f"fuse:{fuse}",
        "n_segments": len(segments),
        "mean_accuracy": float(np.mean([s.accuracy for s in segments])),
        "per_class": {c: {"mean_accuracy": float(np.mean(v)), "n": len(v)}
                      for c, v in sorted(per_class.items())},
        "segments": [
            {"session_id": s.session_id, "class": s.class_label,
             "true": s.true_repetitions, "fused": s.fused,
             "counts": s.counts, "accuracy": s.accuracy}
            for s in segments
        ],
    }
    if fuse is not None:
        doc["per_source_mean_accuracy"] = {
            src: float(np.mean([
                counting_accuracy(seg.counts[src], seg.true_repetitions)
                for seg in segments
            ]))
            for src in ("acc", "gyro", "cap")
        }
    return doc


# ---------------------------------------------------------------------------
# pair evaluation

def run_pair_evaluation(
    pairs: Sequence[tuple[Session, Session]],
    cfg: RunConfig | None = None,
    hard_lift_drop: bool = True,
) -> EvalReport:
    """Joint-activity recognition over two-wearer session pairs.

    Each pair is aligned, joint labels are derived on the first wearer's
    timeline, both sessions are windowed identically, and per-window
    feature vectors are combined order-invariantly.  Folds leave one
    pair group out.
    """
    import dataclasses

    cfg = cfg or RunConfig()
    if not pairs:
        raise DomainError("no session pairs")
    extract = extract_features_leg if cfg.pipeline == "leg" else extract_features_gym

    joint_sessions: list[Session] = []
    vectors_by_pair: dict[str, list] = {}
    for a, b in pairs:
        if a.group_id is None or a.group_id != b.group_id:
            raise DomainError(
                f"pair ({a.id!r}, {b.id!r}) must share a group_id")
        timeline = align_sessions(a, b)
        joint = derive_pair_labels(timeline, a.labels.tolist(), b.labels.tolist(),
                                   hard_lift_drop=hard_lift_drop)
        # Window on the joint timeline by attaching the joint labels to a.
        a_joint = dataclasses.replace(a, labels=joint,
                                      label_set_id="COLLAB_PAIR")
        wins_a = slide_windows(a_joint, cfg.windowing)
        vecs = []
        for w in wins_a:
            # matching window of b via the alignment at the window start
            j0 = int(timeline.b_index_for_a[w.start_index])
            if j0 < 0 or j0 + w.length > b.n_frames:
                continue
            chan_b = {k: v[j0:j0 + w.length] for k, v in b.channels().items()}
            w_b = Window(channels=chan_b, label=w.label, session_id=b.id,
                         start_index=j0, sample_rate_hz=b.sample_rate_hz)
            va = extract(w)
            vb = extract(w_b)
            vecs.append(pair_features(a.user_id, va, b.user_id, vb, label=w.label))
        if vecs:
            vectors_by_pair[a.group_id] = vectors_by_pair.get(a.group_id, []) + vecs
            joint_sessions.append(a_joint)

    if not vectors_by_pair:
        raise DomainError("no pair windows produced")
    groups = sorted(vectors_by_pair)
    if len(groups) < 2:
        raise DomainError("pair evaluation needs at least 2 groups for folds")

    names = vectors_by_pair[groups[0]][0].names
    all_true: list[str] = []
    all_pred: list[str] = []
    per_fold = []
    for held in groups:
        train_vecs = [v for g in groups if g != held for v in vectors_by_pair[g]]
        test_vecs = vectors_by_pair[held]
        Xtr = np.stack([v.values for v in train_vecs])
        ytr = [v.label for v in train_vecs]
        Xte = np.stack([v.values for v in test_vecs])
        yte = [v.label for v in test_vecs]
        if cfg.normalize:
            norm = FeatureNormalizer.fit(Xtr)
            Xtr, Xte = norm.transform(Xtr), norm.transform(Xte)
        if cfg.smote is not None:
            Xtr, ytr = smote(Xtr, np.asarray(ytr),
                             dataclasses.replace(cfg.smote, seed=cfg.seed))
        model = _train_model(Xtr, ytr, None, cfg, names)
        proba = predict_proba(model, Xte)
        votes = soft_vote_smooth(proba, cfg.soft_vote_radius)
        pred = [model.classes[int(v)] for v in votes]
        all_true.extend(yte)
        all_pred.extend(pred)
        per_fold.append({"held_out": held,
                         "n_train_windows": len(ytr),
                         "n_test_windows": len(yte),
                         "macro_f": macro_f_score(yte, pred),
                         "hamming": hamming_loss(yte, pred)})

    classes = tuple(sorted(set(all_true) | set(all_pred)))
    M, _ = confusion_matrix(all_true, all_pred, classes)
    return EvalReport(
        scheme="leave_one_group_out", seed=cfg.seed, label_set_id="COLLAB_PAIR",
        feature_subset=cfg.subset, model_kind=cfg.model_kind,
        config=cfg.describe(), classes=classes, confusion=M.tolist(),
        per_class=precision_recall(all_true, all_pred, classes),
        macro_f=macro_f_score(all_true, all_pred, classes),
        hamming=hamming_loss(all_true, all_pred), per_fold=per_fold,
        notes=("hard_lift_drop=on" if hard_lift_drop else "hard_lift_drop=off",),
    )
