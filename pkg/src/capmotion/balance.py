"""Minority-class oversampling by synthetic interpolation.

Every minority class is topped up to the majority count.  A synthetic
sample interpolates between a real sample and one of its k nearest
same-class neighbours: x_new = x + u * (x_nn - x) with u ~ U[0, 1], so
synthetics always lie on segments between real same-class points.
Balancing must only ever see training folds.
"""

from __future__ import annotations

import warnings
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .rng import substream

__all__ = ["SmoteConfig", "smote"]


@dataclass(frozen=True)
class SmoteConfig:
    """``k_neighbors`` is clamped per class to (class size - 1)."""

    k_neighbors: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k_neighbors < 1:
            raise DomainError("k_neighbors must be >= 1")


def smote(
    X: np.ndarray,
    y: np.ndarray | list[str],
    config: SmoteConfig | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Equalize class counts by appending synthetic samples.

    Returns (X_out, y_out): the originals, unmodified and in their input
    order, followed by synthetics grouped per class.  Classes with a
    single sample cannot interpolate and fall back to duplication (with a
    warning).  Deterministic for a given config seed.
    """
    config = config or SmoteConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DomainError("smote needs a non-empty 2-D matrix")
    if y.shape != (X.shape[0],):
        raise DomainError("labels must be one per row")
    if not np.isfinite(X).all():
        raise DomainError("smote input contains non-finite values")

    counts = Counter(y.tolist())
    target = max(counts.values())
    rng = substream(config.seed, "smote")

    new_rows: list[np.ndarray] = []
    new_labels: list = []
    for cls in sorted(counts):
        need = target - counts[cls]
        if need == 0:
            continue
        members = np.flatnonzero(y == cls)
        Xc = X[members]
        if members.size == 1:
            warnings.warn(
                f"class {cls!r} has a single sample; duplicating instead of interpolating",
                stacklevel=2,
            )
            new_rows.append(np.repeat(Xc, need, axis=0))
            new_labels.extend([cls] * need)
            continue
        k = min(config.k_neighbors, members.size - 1)
        # pairwise distances within the class; self excluded via the diagonal
        d2 = ((Xc[:, None, :] - Xc[None, :, :]) ** 2).sum(axis=2)
        np.fill_diagonal(d2, np.inf)
        nn = np.argsort(d2, axis=1, kind="stable")[:, :k]

        base = rng.integers(0, members.size, size=need)
        pick = rng.integers(0, k, size=need)
        u = rng.uniform(0.0, 1.0, size=need)
        for b, p, uu in zip(base, pick, u):
            xb = Xc[b]
            xn = Xc[nn[b, p]]
            new_rows.append((xb + uu * (xn - xb))[None, :])
            new_labels.extend([cls])

    if not new_rows:
        return X.copy(), y.copy()
    X_out = np.vstack([X] + new_rows)
    y_out = np.concatenate([y, np.asarray(new_labels, dtype=y.dtype)])
    return X_out, y_out
