"""Cross-validation folds and classification metrics.

Session-grouped folds keep every window of a held-out user / session /
group out of training, which is the honest protocol for wearable data.
The random instance-level split is also provided but flagged optimistic:
neighbouring windows from one recording overlap in time, so shuffling
them across train and test leaks.

Macro F-score averages per-class F1 over the classes that actually occur
(as truth or as prediction) in the evaluated pairs; a class with zero
precision+recall contributes 0.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DomainError, SchemaError
from .rng import substream
from .types import Session

__all__ = [
    "Fold",
    "make_session_folds",
    "make_random_folds",
    "confusion_matrix",
    "precision_recall",
    "macro_f_score",
    "hamming_loss",
    "EvalReport",
]

FOLD_SCHEMES = ("louo", "loso", "leave_one_group_out")
RANDOM_SPLIT_FRACTIONS = (0.3, 0.3, 0.3, 0.1)  # three folds + discard


@dataclass(frozen=True)
class Fold:
    """One train/test partition.  ``held_out`` names the entity whose data
    forms the test side (user id, session id, or group id)."""

    scheme: str
    held_out: str
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]


def _group_key(session: Session, scheme: str) -> str:
    if scheme == "louo":
        return session.user_id
    if scheme == "loso":
        return session.id
    if scheme == "leave_one_group_out":
        if session.group_id is None:
            raise SchemaError(
                f"session {session.id!r} has no group_id; cannot group folds by it"
            )
        return session.group_id
    raise DomainError(f"unknown fold scheme {scheme!r}; expected one of {FOLD_SCHEMES}")


def make_session_folds(sessions: Sequence[Session], scheme: str) -> list[Fold]:
    """One fold per distinct key: that key's sessions test, the rest train."""
    if len(sessions) == 0:
        raise DomainError("no sessions to fold")
    by_key: dict[str, list[str]] = {}
    for s in sessions:
        by_key.setdefault(_group_key(s, scheme), []).append(s.id)
    if len(by_key) < 2:
        raise DomainError(
            f"scheme {scheme!r} needs at least 2 distinct keys, found {len(by_key)}"
        )
    folds = []
    for key in sorted(by_key):
        test = tuple(sorted(by_key[key]))
        train = tuple(sorted(sid for k, ids in by_key.items() if k != key for sid in ids))
        folds.append(Fold(scheme=scheme, held_out=key, train_ids=train, test_ids=test))
    return folds


def make_random_folds(n_instances: int, seed: int) -> list[dict]:
    """Instance-level random split: three folds of 30% each, 10% discarded.

    Returns dicts with ``train_idx`` / ``test_idx`` index arrays and an
    explicit optimism note: time-adjacent windows get separated across
    the boundary, so scores read higher than grouped protocols.
    """
    if n_instances < 10:
        raise DomainError("random folds need at least 10 instances")
    rng = substream(seed, "random_folds")
    perm = rng.permutation(n_instances)
    cuts = np.floor(np.cumsum(np.array(RANDOM_SPLIT_FRACTIONS) * n_instances)).astype(int)
    parts = [perm[:cuts[0]], perm[cuts[0]:cuts[1]], perm[cuts[1]:cuts[2]]]
    folds = []
    for i in range(3):
        test = np.sort(parts[i])
        train = np.sort(np.concatenate([parts[j] for j in range(3) if j != i]))
        folds.append({
            "fold": i,
            "train_idx": train,
            "test_idx": test,
            "note": "optimistic: instance-level split separates overlapping windows",
        })
    return folds


# ---------------------------------------------------------------------------
# metrics

def _check_pairs(y_true: Sequence[str], y_pred: Sequence[str]) -> None:
    if len(y_true) != len(y_pred):
        raise DomainError("y_true and y_pred lengths differ")
    if len(y_true) == 0:
        raise DomainError("no predictions to score")


def confusion_matrix(y_true: Sequence[str], y_pred: Sequence[str],
                     classes: Sequence[str] | None = None) -> tuple[np.ndarray, tuple[str, ...]]:
    """Counts matrix M[i, j] = pairs with truth classes[i], prediction
    classes[j].  Default class order: sorted union of observed labels."""
    _check_pairs(y_true, y_pred)
    if classes is None:
        classes = sorted(set(y_true) | set(y_pred))
    classes = tuple(classes)
    index = {c: i for i, c in enumerate(classes)}
    for v in list(y_true) + list(y_pred):
        if v not in index:
            raise DomainError(f"label {v!r} missing from class list")
    M = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        M[index[t], index[p]] += 1
    return M, classes


def precision_recall(y_true: Sequence[str], y_pred: Sequence[str],
                     classes: Sequence[str] | None = None) -> dict[str, dict[str, float]]:
    """Per-class precision, recall and F1 (0 where undefined)."""
    M, cls = confusion_matrix(y_true, y_pred, classes)
    out = {}
    for i, c in enumerate(cls):
        tp = float(M[i, i])
        pred_c = float(M[:, i].sum())
        true_c = float(M[i, :].sum())
        prec = tp / pred_c if pred_c > 0 else 0.0
        rec = tp / true_c if true_c > 0 else 0.0
        f1 = 2 * prec * rec / (prec + rec) if (prec + rec) > 0 else 0.0
        out[c] = {"precision": prec, "recall": rec, "f1": f1,
                  "support": int(true_c)}
    return out


def macro_f_score(y_true: Sequence[str], y_pred: Sequence[str],
                  classes: Sequence[str] | None = None) -> float:
    """Mean per-class F1 over classes present as truth or prediction.

    Classes from an explicit class list that never occur on either side
    are excluded from the average instead of dragging it down with
    structural zeros.
    """
    scores = precision_recall(y_true, y_pred, classes)
    observed = set(y_true) | set(y_pred)
    f1s = [v["f1"] for c, v in scores.items() if c in observed]
    if not f1s:
        raise DomainError("no observed classes to average")
    return float(np.mean(f1s))


def hamming_loss(y_true: Sequence[str], y_pred: Sequence[str]) -> float:
    """Fraction of mismatched predictions."""
    _check_pairs(y_true, y_pred)
    wrong = sum(1 for t, p in zip(y_true, y_pred) if t != p)
    return wrong / len(y_true)


# ---------------------------------------------------------------------------
# structured result

@dataclass
class EvalReport:
    """Deterministic, JSON-serializable summary of one evaluation run.

    Identical inputs produce byte-identical JSON: keys are sorted and no
    timestamps are embedded (provenance lives in a separate file).
    """

    scheme: str
    seed: int
    label_set_id: str
    feature_subset: str
    model_kind: str
    config: dict
    classes: tuple[str, ...]
    confusion: list[list[int]]
    per_class: dict[str, dict[str, float]]
    macro_f: float
    hamming: float
    per_fold: list[dict]
    notes: tuple[str, ...] = ()

    def config_hash(self) -> str:
        blob = json.dumps(
            {"scheme": self.scheme, "seed": self.seed,
             "label_set_id": self.label_set_id,
             "feature_subset": self.feature_subset,
             "model_kind": self.model_kind, "config": self.config},
            sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def to_json(self) -> str:
        doc = {
            "format_version": 1,
            "scheme": self.scheme,
            "seed": self.seed,
            "label_set_id": self.label_set_id,
            "feature_subset": self.feature_subset,
            "model_kind": self.model_kind,
            "config": self.config,
            "config_hash": self.config_hash(),
            "classes": list(self.classes),
            "confusion": self.confusion,
            "per_class": self.per_class,
            "macro_f": self.macro_f,
            "hamming": self.hamming,
            "per_fold": self.per_fold,
            "notes": list(self.notes),
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    @staticmethod
    def from_json(text: str) -> "EvalReport":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise SchemaError(f"bad report JSON: {e}") from None
        return EvalReport(
            scheme=doc["scheme"], seed=doc["seed"],
            label_set_id=doc["label_set_id"],
            feature_subset=doc["feature_subset"],
            model_kind=doc["model_kind"], config=doc["config"],
            classes=tuple(doc["classes"]), confusion=doc["confusion"],
            per_class=doc["per_class"], macro_f=doc["macro_f"],
            hamming=doc["hamming"], per_fold=doc["per_fold"],
            notes=tuple(doc.get("notes", ())),
        )
