"""Position sets, projections and the train/validation/test partition.

A position set is stored as a boolean array of the target matrix shape.
Functions accepting a position set also take an iterable of ``(row, col)``
pairs, converted with :func:`as_mask`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

VALIDATION_FRACTION = 0.25


def as_mask(omega, shape) -> np.ndarray:
    """Boolean mask of ``shape`` for ``omega``.

    ``omega`` is either a boolean array of that shape or an iterable of
    ``(row, col)`` index pairs. Out-of-range pairs raise ``ValueError``.
    """
    shape = tuple(int(x) for x in shape)
    if isinstance(omega, np.ndarray) and omega.dtype == bool:
        if omega.shape != shape:
            raise ValueError(f"mask shape {omega.shape} does not match {shape}")
        return omega
    pairs = np.asarray(list(omega), dtype=np.int64)
    mask = np.zeros(shape, dtype=bool)
    if pairs.size == 0:
        return mask
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise ValueError("positions must be (row, col) pairs")
    r, c = pairs[:, 0], pairs[:, 1]
    bad = (r < 0) | (r >= shape[0]) | (c < 0) | (c >= shape[1])
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise ValueError(f"position ({r[i]}, {c[i]}) out of range for shape {shape}")
    mask[r, c] = True
    return mask


def positions(mask: np.ndarray) -> set[tuple[int, int]]:
    return {(int(i), int(j)) for i, j in zip(*np.nonzero(mask))}


def project(m, omega) -> np.ndarray:
    """Keep the entries of ``m`` on ``omega``, zero elsewhere."""
    a = np.asarray(m, dtype=np.float64)
    mask = as_mask(omega, a.shape)
    return np.where(mask, a, 0.0)


def project_complement(m, omega) -> np.ndarray:
    """Keep the entries of ``m`` outside ``omega``, zero elsewhere."""
    a = np.asarray(m, dtype=np.float64)
    mask = as_mask(omega, a.shape)
    return np.where(mask, 0.0, a)


@dataclass(frozen=True)
class ObservationMask:
    """Disjoint train / validation / test position sets covering a matrix."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        for name in ("train", "val", "test"):
            a = np.array(getattr(self, name), dtype=bool)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        shapes = {self.train.shape, self.val.shape, self.test.shape}
        if len(shapes) != 1:
            raise ValueError("train/val/test masks must share one shape")
        counts = self.train.astype(np.int8) + self.val + self.test
        if np.any(counts != 1):
            raise ValueError("train/val/test masks must partition the matrix")

    @property
    def shape(self) -> tuple[int, int]:
        return self.train.shape

    @property
    def obscured(self) -> np.ndarray:
        return ~self.train

    def permuted(self, row_perm, col_perm) -> "ObservationMask":
        ix = np.ix_(row_perm, col_perm)
        return ObservationMask(self.train[ix], self.val[ix], self.test[ix])


def validation_size(n_obscured: int, fraction: float = VALIDATION_FRACTION) -> int:
    """Round-half-up of ``fraction * n_obscured``."""
    return int(math.floor(fraction * n_obscured + 0.5))


def mask_split(obscured, shape=None, rng_seed=None,
               fraction: float = VALIDATION_FRACTION) -> ObservationMask:
    """Randomly split obscured positions into validation and test sets.

    Parameters
    ----------
    obscured : bool array or iterable of (row, col)
        Hidden positions. Everything else becomes the training set.
    shape : tuple, optional
        Matrix shape; required when ``obscured`` is given as pairs.
    rng_seed : int or numpy Generator
        The split is a deterministic function of the seed.
    fraction : float
        Validation share, ``round(fraction * |obscured|)`` positions.
    """
    if shape is None:
        if not isinstance(obscured, np.ndarray):
            raise ValueError("shape is required when obscured is not a mask array")
        shape = obscured.shape
    hidden = as_mask(obscured, shape)
    rng = np.random.default_rng(rng_seed)
    flat = np.flatnonzero(hidden)
    n_val = validation_size(flat.size, fraction)
    chosen = rng.permutation(flat)[:n_val]
    val = np.zeros(hidden.size, dtype=bool)
    val[chosen] = True
    val = val.reshape(hidden.shape)
    return ObservationMask(train=~hidden, val=val, test=hidden & ~val)
