"""Synthetic I/O data and the replication harnesses built on it.

Two kinds of synthetic data live here:

* perturbations of real tables, ``base + N(0, sd)`` noise with a per
  replication ``sd ~ Gamma(alpha, beta)``, used to study how stable the
  selected number of clusters is;
* fully planted tables whose countries fall into known groups, used to
  check that clustering recovers the groups and that completion works
  better inside a group than across groups.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .clustering import (
    CountryBlockSeries,
    Direction,
    country_series,
    dissimilarity_matrix,
    hierarchical_cluster,
    select_num_clusters,
)
from .completion import CompletionConfig, CompletionResult, complete_panel
from .iomodel import BlockRef, IOIndex, IOTable, assemble_panel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SyntheticConfig:
    """Noise model for perturbed tables.

    ``beta`` is the Gamma *scale* (numpy convention). With the default
    ``alpha = beta = 1`` shape/scale and shape/rate coincide.
    """

    alpha: float = 1.0
    beta: float = 1.0
    replications: int = 1000
    rng_seed: int = 0

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("alpha and beta must be positive")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")

    def rng(self, replication_index: int) -> np.random.Generator:
        """Independent stream for one replication."""
        return np.random.default_rng(np.random.SeedSequence([self.rng_seed, replication_index]))


def draw_noise_sd(config: SyntheticConfig, replication_index: int) -> float:
    """Noise standard deviation used by replication ``replication_index``."""
    return float(config.rng(replication_index).gamma(config.alpha, config.beta))


def generate_synthetic(base, config: SyntheticConfig, replication_index: int,
                       sd: float | None = None) -> np.ndarray:
    """``base`` plus i.i.d. ``N(0, sd)`` noise, ``sd ~ Gamma(alpha, beta)``.

    Passing ``sd`` overrides the Gamma draw (``sd=0`` returns ``base``).
    The result is not clipped, so entries may turn negative.
    """
    a = np.asarray(base, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise ValueError("base matrix must be finite")
    rng = config.rng(replication_index)
    drawn = rng.gamma(config.alpha, config.beta)
    if sd is None:
        sd = drawn
    if sd < 0:
        raise ValueError("sd must be non-negative")
    if sd == 0:
        return a.copy()
    return a + rng.normal(0.0, sd, size=a.shape)


@dataclass(frozen=True)
class SimulationSummary:
    direction: Direction
    counts: np.ndarray = field(repr=False)

    @property
    def stats(self) -> dict[str, float]:
        c = np.asarray(self.counts, dtype=float)
        q1, med, q3 = np.quantile(c, [0.25, 0.5, 0.75])
        return {"min": float(c.min()), "q1": float(q1), "median": float(med),
                "mean": float(c.mean()), "q3": float(q3), "max": float(c.max())}

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["replication", "direction", "selected_k"])
            for i, k in enumerate(self.counts):
                w.writerow([i, self.direction.value, int(k)])
            stats = self.stats
            fh.write("# summary," + ",".join(stats) + "\n")
            fh.write(f"# {self.direction.value}," + ",".join(repr(v) for v in stats.values()) + "\n")
        return path


def _stacked(series: Sequence[CountryBlockSeries]) -> np.ndarray:
    return np.hstack([s.columns for s in series])


def _split(stacked: np.ndarray, like: Sequence[CountryBlockSeries]) -> list[CountryBlockSeries]:
    out, start = [], 0
    for s in like:
        w = s.columns.shape[1]
        out.append(CountryBlockSeries(s.country, stacked[:, start:start + w]))
        start += w
    return out


def run_cluster_count_simulation(base_tables: Sequence[IOTable], reference_country: str,
                                 direction, config: SyntheticConfig | None = None,
                                 cutoff: float = 0.5, linkage: str = "complete",
                                 threads: int = 1) -> SimulationSummary:
    """Cluster-count selection repeated over perturbed copies of the data.

    Each replication perturbs the reference country's stacked blocks (all
    given years) with :func:`generate_synthetic`, recomputes AACD, runs
    agglomerative clustering and records the selected number of clusters.
    """
    config = config or SyntheticConfig()
    direction = Direction(direction)
    base_series = country_series(base_tables, reference_country, direction)
    base = _stacked(base_series)

    def one(rep: int) -> int:
        noisy = generate_synthetic(base, config, rep)
        d = dissimilarity_matrix(_split(noisy, base_series))
        return select_num_clusters(d, hierarchical_cluster(d, linkage), cutoff)

    reps = range(config.replications)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            counts = list(pool.map(one, reps))
    else:
        counts = [one(r) for r in reps]
    return SimulationSummary(direction, np.array(counts, dtype=int))


def experiment_pairs(reference: str, group: Sequence[str], direction) -> list[tuple[str, str]]:
    direction = Direction(direction)
    if direction is Direction.INPUT:
        return [(reference, c) for c in group]
    return [(c, reference) for c in group]


def run_similarity_experiment(tables: Sequence[IOTable], reference_country: str,
                              group: Sequence[str], obscured: BlockRef, direction,
                              config: CompletionConfig | None = None,
                              threads: int = 1) -> CompletionResult:
    """Complete one hidden last-year block inside a reference/group panel.

    The panel has one block-row per year and one block-column per group
    country, the reference country fixed on the input side (``direction``
    ``input``) or the output side (``output``).
    """
    config = config or CompletionConfig()
    group = list(group)
    if len(set(group)) != len(group) or reference_country in group:
        raise ValueError("group countries must be distinct and differ from the reference")
    pairs = experiment_pairs(reference_country, group, direction)
    if (obscured.input_country, obscured.output_country) not in pairs:
        raise ValueError(f"obscured block {obscured} is not part of the panel")
    panel, mask = assemble_panel(tables, pairs, {obscured}, rng_seed=config.rng_seed)
    return complete_panel(panel.m, mask, config, threads=threads)


# ---------------------------------------------------------------------------
# Planted structures


def planted_group_series(group_sizes: Sequence[int], rows: int = 200, cols: int = 8,
                         noise: float = 0.02, seed=None) -> list[CountryBlockSeries]:
    """Series whose columns are nearly proportional within a group.

    For every column, the group signals are centred and orthogonalized, so
    their correlation across groups is exactly zero before noise. Member
    series are ``scale * signal + offset + noise * N(0, 1)``.
    Country codes are ``G{g}C{i}``.
    """
    rng = np.random.default_rng(seed)
    g = len(group_sizes)
    if rows <= g:
        raise ValueError("need more rows than groups")
    signals = np.empty((g, rows, cols))
    for j in range(cols):
        raw = rng.normal(size=(rows, g))
        raw -= raw.mean(axis=0)
        q, _ = np.linalg.qr(raw)
        signals[:, :, j] = q.T * np.sqrt(rows)
    out = []
    for gi, size in enumerate(group_sizes):
        for ci in range(size):
            scale = rng.uniform(0.5, 2.0, size=cols)
            offset = rng.uniform(0.0, 5.0, size=cols)
            x = scale * signals[gi] + offset + noise * rng.normal(size=(rows, cols))
            out.append(CountryBlockSeries(f"G{gi + 1}C{ci + 1}", x))
    return out


def planted_tables(group_sizes: Sequence[int] = (4, 4, 4, 4), reference: str = "REF",
                   n: int = 6, l: int = 2, years: Sequence[int] = range(2010, 2015),
                   innovation: float = 0.3, noise: float = 0.02, level: float = 3.0,
                   seed=None) -> list[IOTable]:
    """Tables where the blocks traded with ``reference`` follow group patterns.

    Each group owns a positive ``n x (n+l)`` pattern per direction that
    drifts from year to year by a multiplicative log-normal step of size
    ``innovation``. A member country's block is ``scale * pattern`` times
    ``1 + noise * N(0, 1)``. Blocks not involving ``reference`` are
    unstructured log-normal draws. Countries are named ``G{g}C{i}``.
    """
    rng = np.random.default_rng(seed)
    years = list(years)
    countries = [reference] + [f"G{g + 1}C{i + 1}" for g, s in enumerate(group_sizes)
                               for i in range(s)]
    member_of = {c: int(c[1:c.index("C")]) - 1 for c in countries[1:]}
    index = IOIndex(countries, [f"S{i + 1}" for i in range(n)], [f"F{i + 1}" for i in range(l)])
    w = n + l
    shape = (n, w)

    def walk():
        p = np.exp(level + rng.normal(size=shape))
        steps = [p]
        for _ in years[1:]:
            p = p * np.exp(innovation * rng.normal(size=shape))
            steps.append(p)
        return steps

    patterns = {d: [walk() for _ in group_sizes] for d in ("in", "out")}
    scales = {d: {c: rng.uniform(0.5, 2.0) for c in countries[1:]} for d in ("in", "out")}
    m = len(countries)
    tables = []
    for yi, year in enumerate(years):
        t = np.exp(level - 1.0 + rng.normal(size=(m * n, m * w)))
        for c in range(m):
            t[c * n:(c + 1) * n, c * w:(c + 1) * w] *= 20.0
        for c in countries[1:]:
            k = countries.index(c)
            g = member_of[c]
            jitter = 1.0 + noise * rng.normal(size=shape)
            t[0:n, k * w:(k + 1) * w] = scales["in"][c] * patterns["in"][g][yi] * jitter
            jitter = 1.0 + noise * rng.normal(size=shape)
            t[k * n:(k + 1) * n, 0:w] = scales["out"][c] * patterns["out"][g][yi] * jitter
        tables.append(IOTable(year, index, t))
    return tables
