"""Soft Impute matrix completion with validation-based choice of lambda.

The completed matrix minimizes

    0.5 * ||P_train(M) - P_train(M_hat)||_F**2 + lam * ||M_hat||_*

and is found by the fixed-point iteration
``M_new = S_lam(P_train(M) + P_train_complement(M_old))`` started from zero,
where ``S_lam`` soft-thresholds singular values.
"""

from __future__ import annotations

import enum
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import SanitizationError, SelectionError
from .masks import (
    ObservationMask,
    as_mask,
    mask_split,
    project,
    project_complement,
)
from .metrics import rmse, smape

__all__ = [
    "CompletionConfig",
    "CompletionResult",
    "LambdaRecord",
    "ObservationMask",
    "SelectionMetric",
    "complete_panel",
    "completion_objective",
    "default_lambda_grid",
    "extended_lambda_grid",
    "mask_split",
    "postprocess_nonnegative",
    "project",
    "project_complement",
    "run_lambda_path",
    "soft_impute",
]

logger = logging.getLogger(__name__)


def default_lambda_grid() -> tuple[float, ...]:
    """``2**(k/2 - 10)`` for ``k = 1..40``."""
    return tuple(2.0 ** (k / 2 - 10) for k in range(1, 41))


def extended_lambda_grid() -> tuple[float, ...]:
    """``2**(k/2 - 20)`` for ``k = 1..80``, for panels mixing very different magnitudes."""
    return tuple(2.0 ** (k / 2 - 20) for k in range(1, 81))


LAMBDA_PRESETS = {"default": default_lambda_grid, "extended": extended_lambda_grid}


class SelectionMetric(str, enum.Enum):
    RMSE = "rmse"
    SMAPE = "smape"


@dataclass(frozen=True)
class CompletionConfig:
    lambda_grid: tuple[float, ...] = field(default_factory=default_lambda_grid)
    epsilon: float = 1e-9
    max_iterations: int = 500
    selection_metric: SelectionMetric = SelectionMetric.RMSE
    rng_seed: int = 0

    def __post_init__(self):
        grid = tuple(float(x) for x in self.lambda_grid)
        object.__setattr__(self, "lambda_grid", grid)
        object.__setattr__(self, "selection_metric", SelectionMetric(self.selection_metric))
        if not grid:
            raise ValueError("lambda_grid must not be empty")
        if any(x <= 0 or not np.isfinite(x) for x in grid):
            raise ValueError("lambda_grid values must be positive and finite")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("lambda_grid must be strictly increasing")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    @classmethod
    def preset(cls, name: str = "default", **kwargs) -> "CompletionConfig":
        return cls(lambda_grid=LAMBDA_PRESETS[name](), **kwargs)

    def to_dict(self) -> dict:
        return {
            "lambda_grid": list(self.lambda_grid),
            "epsilon": self.epsilon,
            "max_iterations": self.max_iterations,
            "selection_metric": self.selection_metric.value,
            "rng_seed": self.rng_seed,
        }


@dataclass(frozen=True)
class LambdaRecord:
    """Scalar outcome of one Soft Impute run on the grid.

    Metrics are computed on the post-processed (non-negative) output.
    """

    lam: float
    iterations: int
    converged: bool
    nuclear_norm: float
    rmse_train: float
    rmse_val: float
    rmse_test: float
    smape_train: float
    smape_val: float
    smape_test: float

    def metric(self, name: str, split: str) -> float:
        return getattr(self, f"{SelectionMetric(name).value}_{split}")


@dataclass(frozen=True)
class CompletionResult:
    best_lambda: float
    completed: np.ndarray
    path: tuple[LambdaRecord, ...]
    metrics: dict
    spectrum_original: np.ndarray
    spectrum_completed: np.ndarray
    selection_metric: SelectionMetric = SelectionMetric.RMSE
    # per-lambda objective values by iteration, when requested
    objective_traces: tuple | None = None

    @property
    def best_record(self) -> LambdaRecord:
        return next(r for r in self.path if r.lam == self.best_lambda)

    @property
    def baseline_record(self) -> LambdaRecord:
        """Record at the smallest lambda of the grid (the ``lambda ~ 0`` case)."""
        return self.path[0]

    def reduction(self, split: str = "val", metric: str | None = None) -> float:
        """Relative drop of ``metric`` on ``split`` from grid minimum to best lambda."""
        metric = SelectionMetric(metric or self.selection_metric).value
        base = self.baseline_record.metric(metric, split)
        best = self.best_record.metric(metric, split)
        if base == 0:
            return 0.0
        return (base - best) / base


def postprocess_nonnegative(m) -> np.ndarray:
    """Set negative entries to zero."""
    a = np.asarray(m, dtype=np.float64)
    return np.where(a < 0, 0.0, a)


def completion_objective(observed, train_mask, m_hat, lam: float) -> float:
    """Penalized least-squares objective minimized by :func:`soft_impute`."""
    m = np.asarray(observed, dtype=np.float64)
    mask = as_mask(train_mask, m.shape)
    resid = np.where(mask, m - m_hat, 0.0)
    return 0.5 * float(np.sum(resid**2)) + lam * linalg.nuclear_norm(m_hat)


def soft_impute(observed, train_mask, lam: float, epsilon: float = 1e-9,
                max_iterations: int = 500, trace: list | None = None):
    """Complete ``observed`` from its entries on ``train_mask``.

    Parameters
    ----------
    observed : array_like, shape (m, n)
        Matrix whose entries on ``train_mask`` are known. Other entries are
        ignored and may be NaN.
    train_mask : bool array or iterable of (row, col)
    lam : float
        Nuclear-norm weight, ``>= 0``.
    epsilon : float
        Stop when ``||new - old||_F**2 / ||old||_F**2 <= epsilon``. The test
        is skipped while ``old`` is the zero matrix, except that a zero
        iterate following a zero iterate is a fixed point and stops the loop.
    max_iterations : int
    trace : list, optional
        If given, the objective value of the starting point and of every
        iterate is appended to it.

    Returns
    -------
    (m_hat, iterations, converged)
        Raw (not post-processed) completion, number of thresholding steps
        performed, and whether the tolerance was met.
    """
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    m = np.asarray(observed, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("observed must be 2-D")
    mask = as_mask(train_mask, m.shape)
    known = np.where(mask, m, 0.0)
    if not np.all(np.isfinite(known)):
        raise SanitizationError("observed matrix has non-finite entries on the training set")

    def objective(x):
        resid = np.where(mask, known - x, 0.0)
        return 0.5 * float(np.sum(resid**2)) + lam * linalg.nuclear_norm(x)

    old = np.zeros_like(known)
    old_sq = 0.0
    if trace is not None:
        trace.append(objective(old))
    converged = False
    iterations = 0
    new = old
    for iterations in range(1, max_iterations + 1):
        new = linalg.soft_threshold_svd(np.where(mask, known, old), lam)
        if trace is not None:
            trace.append(objective(new))
        diff_sq = float(np.sum((new - old) ** 2))
        if old_sq > 0.0:
            if diff_sq / old_sq <= epsilon:
                converged = True
                break
        elif diff_sq == 0.0:
            converged = True
            break
        old = new
        old_sq = float(np.sum(old**2))
    return new, iterations, converged


def _evaluate(truth, mask: ObservationMask, m_hat) -> dict:
    out = {}
    for split in ("train", "val", "test"):
        omega = getattr(mask, split)
        if omega.any():
            out[split] = {"rmse": rmse(truth, m_hat, omega), "smape": smape(truth, m_hat, omega)}
        else:
            out[split] = {"rmse": float("nan"), "smape": float("nan")}
    return out


def run_lambda_path(observed, mask: ObservationMask, config: CompletionConfig | None = None,
                    threads: int = 1, record_objective: bool = False) -> CompletionResult:
    """Run Soft Impute over the lambda grid and keep the validation-optimal fit.

    ``observed`` holds the ground truth on every position: training entries
    drive the fit, validation entries pick lambda, test entries only score.
    Ties in the selection metric go to the smallest lambda. With
    ``record_objective`` the objective value of every iterate of every run is
    kept in ``objective_traces`` (costs one extra SVD per iteration).
    """
    config = config or CompletionConfig()
    truth = np.asarray(observed, dtype=np.float64)
    if truth.shape != mask.shape:
        raise ValueError(f"mask shape {mask.shape} does not match matrix {truth.shape}")
    if not mask.val.any():
        raise SelectionError("validation set is empty; cannot select lambda")
    if not np.all(np.isfinite(truth[mask.obscured])):
        raise SanitizationError("ground truth on validation/test positions must be finite")

    def one(lam):
        trace = [] if record_objective else None
        raw, its, conv = soft_impute(truth, mask.train, lam, config.epsilon,
                                     config.max_iterations, trace=trace)
        post = postprocess_nonnegative(raw)
        ev = _evaluate(truth, mask, post)
        rec = LambdaRecord(
            lam=lam, iterations=its, converged=conv,
            nuclear_norm=float(linalg.singular_values(raw).sum()),
            rmse_train=ev["train"]["rmse"], rmse_val=ev["val"]["rmse"],
            rmse_test=ev["test"]["rmse"], smape_train=ev["train"]["smape"],
            smape_val=ev["val"]["smape"], smape_test=ev["test"]["smape"],
        )
        logger.debug("lambda=%g iterations=%d converged=%s rmse_val=%g",
                     lam, its, conv, rec.rmse_val)
        return rec, (tuple(trace) if trace is not None else None)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(one, config.lambda_grid))
    else:
        runs = [one(lam) for lam in config.lambda_grid]
    path = tuple(r for r, _ in runs)

    key = config.selection_metric.value + "_val"
    scores = np.array([getattr(r, key) for r in path])
    best = path[int(np.argmin(scores))]

    raw, _, _ = soft_impute(truth, mask.train, best.lam, config.epsilon, config.max_iterations)
    completed = postprocess_nonnegative(raw)
    completed.setflags(write=False)
    return CompletionResult(
        best_lambda=best.lam,
        completed=completed,
        path=path,
        metrics=_evaluate(truth, mask, completed),
        spectrum_original=linalg.singular_values(truth),
        spectrum_completed=linalg.singular_values(completed),
        selection_metric=config.selection_metric,
        objective_traces=tuple(t for _, t in runs) if record_objective else None,
    )


def complete_panel(m, mask: ObservationMask, config: CompletionConfig | None = None,
                   threads: int = 1) -> CompletionResult:
    """Zero out missing/negative entries of ``m``, then run :func:`run_lambda_path`."""
    from .iomodel import sanitize

    clean, report = sanitize(m)
    if report["negatives"] or report["missing"]:
        logger.info("sanitized panel: %d negative, %d missing entries set to 0",
                    report["negatives"], report["missing"])
    return run_lambda_path(clean, mask, config, threads=threads)
