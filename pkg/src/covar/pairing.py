"""Paired measurement datasets, negative mixing and train/test splits."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

from .numeric import DimensionError

POSITIVE = "positive"
NEGATIVE = "negative"

_ROW_FIELDS = ("s1", "s2", "hidden_x", "hidden_x2", "hidden_y", "hidden_z", "index", "mix_index")


@dataclass
class PairedDataset:
    """``n`` measurement pairs plus optional hidden ground truth.

    ``hidden_x`` is the common variable behind sensor 1 and ``hidden_x2`` the
    one behind sensor 2 when they differ (negative pairs).  Hidden fields are
    for evaluation only; nothing in training or pairing reads them.
    ``index`` records original row numbers after a split and ``mix_index``
    marks negatives built by :func:`make_negatives` (source rows per side).
    """

    s1: np.ndarray
    s2: np.ndarray
    hidden_x: np.ndarray | None = None
    hidden_y: np.ndarray | None = None
    hidden_z: np.ndarray | None = None
    hidden_x2: np.ndarray | None = None
    label: str = POSITIVE
    index: np.ndarray | None = None
    mix_index: np.ndarray | None = None

    def __post_init__(self):
        if self.s1.ndim != 2 or self.s2.ndim != 2:
            raise DimensionError("s1 and s2 must be 2-D")
        n = self.s1.shape[0]
        for name in _ROW_FIELDS:
            value = getattr(self, name)
            if value is not None and len(value) != n:
                raise DimensionError(f"{name} has {len(value)} rows, expected {n}")
        if self.label not in (POSITIVE, NEGATIVE):
            raise ValueError(f"label must be positive or negative, got {self.label!r}")

    @property
    def n(self):
        return self.s1.shape[0]

    @property
    def d1(self):
        return self.s1.shape[1]

    @property
    def d2(self):
        return self.s2.shape[1]

    @property
    def x_sensor2(self):
        return self.hidden_x2 if self.hidden_x2 is not None else self.hidden_x

    def subset(self, rows):
        rows = np.asarray(rows, dtype=np.int64)
        kw = {}
        for f in fields(self):
            value = getattr(self, f.name)
            kw[f.name] = value[rows] if f.name in _ROW_FIELDS and value is not None else value
        base = self.index if self.index is not None else np.arange(self.n)
        kw["index"] = base[rows]
        return PairedDataset(**kw)

    def without_hidden(self):
        return replace(self, hidden_x=None, hidden_y=None, hidden_z=None, hidden_x2=None)


def derangement(n, stream):
    """Uniform fixed-point-free permutation (rejection of Fisher-Yates draws)."""
    if n < 2:
        raise ValueError(f"no derangement of {n} element(s) exists")
    idx = np.arange(n)
    while True:
        perm = stream.permutation(n)
        if not np.any(perm == idx):
            return perm


def make_negatives(pos, stream):
    """Pair sensor-1 row i with sensor-2 row perm[i], perm a derangement."""
    if pos.label != POSITIVE:
        raise ValueError("negatives are mixed from a positive dataset")
    perm = derangement(pos.n, stream)

    def side2(a):
        return None if a is None else a[perm]

    return PairedDataset(
        s1=pos.s1,
        s2=pos.s2[perm],
        hidden_x=pos.hidden_x,
        hidden_y=pos.hidden_y,
        hidden_z=side2(pos.hidden_z),
        hidden_x2=side2(pos.x_sensor2),
        label=NEGATIVE,
        index=pos.index,
        mix_index=np.stack([np.arange(pos.n), perm], axis=1),
    )


def _partition(n, test_fraction, stream):
    n_test = int(round(n * test_fraction))
    if n_test < 1 or n_test >= n:
        raise ValueError(f"test_fraction {test_fraction} leaves an empty partition for n={n}")
    perm = stream.permutation(n)
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def split(pos, neg, test_fraction, stream):
    """Seeded disjoint split into ``(train_pos, train_neg, test_pos, test_neg)``.

    Negatives that were mixed from ``pos`` (or ``neg=None``) are re-mixed
    inside each partition so no test measurement reaches training.
    Independently generated negatives are split on their own rows.
    """
    if not 0 < test_fraction < 1:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    train_rows, test_rows = _partition(pos.n, test_fraction, stream)
    train_pos, test_pos = pos.subset(train_rows), pos.subset(test_rows)
    mixing = neg is None or neg.mix_index is not None
    if mixing and min(len(train_rows), len(test_rows)) < 2:
        raise ValueError(f"test_fraction {test_fraction} leaves a partition of n={pos.n} "
                         "too small to mix negatives (need 2 rows)")
    if mixing:
        train_neg = make_negatives(train_pos, stream)
        test_neg = make_negatives(test_pos, stream)
    else:
        train_rows, test_rows = _partition(neg.n, test_fraction, stream)
        train_neg, test_neg = neg.subset(train_rows), neg.subset(test_rows)
    return train_pos, train_neg, test_pos, test_neg
