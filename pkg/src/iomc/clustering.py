"""Country clustering on the Average Absolute Correlation Distance (AACD).

Two countries are compared through the blocks they exchange with a fixed
reference country, stacked over several years. Column ``i`` of a country's
series is the flow into (or out of) intermediate/final item ``i``; AACD is
one minus the mean absolute Pearson correlation of matching columns.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .iomodel import IOTable, extract_block


class Direction(str, enum.Enum):
    """Which side of the blocks the reference country sits on.

    ``INPUT``: the reference supplies, countries are compared as users
    (blocks ``T^{ref,c}``). ``OUTPUT``: the reference uses, countries are
    compared as suppliers (blocks ``T^{c,ref}``).
    """

    INPUT = "input"
    OUTPUT = "output"


class Linkage(str, enum.Enum):
    COMPLETE = "complete"
    WARD = "ward"


@dataclass(frozen=True)
class CountryBlockSeries:
    country: str
    columns: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.asarray(self.columns, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError("series columns must be a 2-D array")
        object.__setattr__(self, "columns", a)


def country_series(tables: Iterable[IOTable], reference: str, direction,
                   countries: Sequence[str] | None = None) -> list[CountryBlockSeries]:
    """Blocks exchanged with ``reference``, stacked over years (ascending).

    Each series has ``years * n`` rows and ``n + l`` columns.
    """
    direction = Direction(direction)
    tables = sorted(tables, key=lambda t: t.year)
    if not tables:
        raise ValueError("no tables given")
    ix = tables[0].index
    ix.position(reference)
    if countries is None:
        countries = [c for c in ix.countries if c != reference]
    out = []
    for c in countries:
        if direction is Direction.INPUT:
            blocks = [extract_block(t, reference, c) for t in tables]
        else:
            blocks = [extract_block(t, c, reference) for t in tables]
        out.append(CountryBlockSeries(c, np.vstack(blocks)))
    return out


def _column_abs_corr(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Absolute Pearson correlation per column; zero where either is constant."""
    ac = a - a.mean(axis=0)
    bc = b - b.mean(axis=0)
    sa = np.sqrt(np.sum(ac**2, axis=0))
    sb = np.sqrt(np.sum(bc**2, axis=0))
    degenerate = (np.ptp(a, axis=0) == 0) | (np.ptp(b, axis=0) == 0)
    den = sa * sb
    ok = ~degenerate & (den > 0)
    r = np.zeros(a.shape[1])
    r[ok] = np.sum(ac[:, ok] * bc[:, ok], axis=0) / den[ok]
    return np.minimum(np.abs(r), 1.0), degenerate | ~ok


def _check_pair(a, b):
    a = a.columns if isinstance(a, CountryBlockSeries) else np.asarray(a, dtype=np.float64)
    b = b.columns if isinstance(b, CountryBlockSeries) else np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2 or a.shape[1] == 0:
        raise ValueError(f"series shapes differ or are empty: {a.shape} vs {b.shape}")
    return a, b


def aacd(a, b) -> float:
    """Average Absolute Correlation Distance between two block series.

    ``1 - mean_i |corr(a[:, i], b[:, i])|``. A column pair where either
    series is constant has undefined correlation and contributes 0 to the
    mean (the denominator stays the full column count).
    """
    a, b = _check_pair(a, b)
    r, _ = _column_abs_corr(a, b)
    return float(1.0 - r.sum() / a.shape[1])


@dataclass(frozen=True)
class DissimilarityMatrix:
    labels: tuple[str, ...]
    d: np.ndarray = field(repr=False)
    # number of zero-variance column pairs behind each entry (AACD only)
    degenerate: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        d = np.array(self.d, dtype=np.float64)
        object.__setattr__(self, "labels", tuple(self.labels))
        if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] != len(self.labels):
            raise ValueError("dissimilarity matrix must be square and match labels")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise ValueError("dissimilarities must be finite and non-negative")
        if not np.allclose(d, d.T, rtol=0, atol=1e-12) or np.any(np.diag(d) != 0):
            raise ValueError("dissimilarity matrix must be symmetric with zero diagonal")
        d.setflags(write=False)
        object.__setattr__(self, "d", d)

    @property
    def size(self) -> int:
        return len(self.labels)


def dissimilarity_matrix(series: Sequence[CountryBlockSeries]) -> DissimilarityMatrix:
    if len(series) < 2:
        raise ValueError("need at least two series")
    m = len(series)
    d = np.zeros((m, m))
    flags = np.zeros((m, m), dtype=int)
    for i in range(m):
        for j in range(i + 1, m):
            a, b = _check_pair(series[i], series[j])
            r, bad = _column_abs_corr(a, b)
            d[i, j] = d[j, i] = max(0.0, 1.0 - r.sum() / a.shape[1])
            flags[i, j] = flags[j, i] = int(bad.sum())
    return DissimilarityMatrix(tuple(s.country for s in series), d, flags)


# ---------------------------------------------------------------------------
# Agglomeration


@dataclass(frozen=True)
class Merge:
    a: int
    b: int
    height: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    """Merge tree over ``leaves``.

    Node ids follow the usual convention: leaves are ``0..m-1`` and the
    cluster created by merge ``s`` gets id ``m + s``.
    """

    leaves: tuple[str, ...]
    merges: tuple[Merge, ...]
    linkage: Linkage = Linkage.COMPLETE

    @property
    def heights(self) -> np.ndarray:
        return np.array([mg.height for mg in self.merges])

    def as_linkage_matrix(self) -> np.ndarray:
        """``(m-1) x 4`` array in the layout used by ``scipy.cluster.hierarchy``."""
        return np.array([[mg.a, mg.b, mg.height, mg.size] for mg in self.merges], dtype=float)

    def to_text(self) -> str:
        lines = ["# leaves " + " ".join(self.leaves), f"# linkage {self.linkage.value}"]
        lines += [f"{mg.a} {mg.b} {mg.height!r}" for mg in self.merges]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Dendrogram":
        leaves: tuple[str, ...] = ()
        linkage = Linkage.COMPLETE
        rows = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("# leaves"):
                leaves = tuple(line[len("# leaves"):].split())
            elif line.startswith("# linkage"):
                linkage = Linkage(line.split()[-1])
            elif not line.startswith("#"):
                a, b, h = line.split()
                rows.append((int(a), int(b), float(h)))
        m = len(leaves)
        sizes = [1] * m
        merges = []
        for a, b, h in rows:
            s = sizes[a] + sizes[b]
            sizes.append(s)
            merges.append(Merge(a, b, h, s))
        return cls(leaves, tuple(merges), linkage)


def hierarchical_cluster(d: DissimilarityMatrix, linkage="complete") -> Dendrogram:
    """Agglomerative clustering with Lance-Williams distance updates.

    ``complete``: ``d(k, i+j) = max(d(k, i), d(k, j))``.
    ``ward``: the Lance-Williams Ward update applied to squared
    dissimilarities, heights reported on the unsquared scale.

    Among equally close pairs the one with the lowest ``(i, j)`` slot
    indices merges first.
    """
    linkage = Linkage(linkage)
    m = d.size
    if m < 2:
        raise ValueError("need at least two leaves")
    work = np.array(d.d, dtype=np.float64)
    if linkage is Linkage.WARD:
        work = work**2
    np.fill_diagonal(work, np.inf)
    active = np.ones(m, dtype=bool)
    node = list(range(m))
    size = [1] * m
    upper = np.triu(np.ones((m, m), dtype=bool), k=1)
    merges = []
    for step in range(m - 1):
        masked = np.where(upper & active[:, None] & active[None, :], work, np.inf)
        flat = int(np.argmin(masked))
        i, j = divmod(flat, m)
        dij = work[i, j]
        height = float(np.sqrt(dij)) if linkage is Linkage.WARD else float(dij)
        others = active.copy()
        others[[i, j]] = False
        if linkage is Linkage.COMPLETE:
            upd = np.maximum(work[i, others], work[j, others])
        else:
            sk = np.array(size)[others]
            si, sj = size[i], size[j]
            upd = ((si + sk) * work[i, others] + (sj + sk) * work[j, others]
                   - sk * dij) / (si + sj + sk)
        work[i, others] = upd
        work[others, i] = upd
        active[j] = False
        a, b = sorted((node[i], node[j]))
        size[i] += size[j]
        merges.append(Merge(a, b, height, size[i]))
        node[i] = m + step
    return Dendrogram(d.labels, tuple(merges), linkage)


@dataclass(frozen=True)
class ClusterAssignment:
    labels: dict

    @property
    def k(self) -> int:
        return len(set(self.labels.values()))

    def groups(self) -> dict[int, list[str]]:
        out: dict[int, list[str]] = {}
        for country, cid in self.labels.items():
            out.setdefault(cid, []).append(country)
        return out

    def same_cluster(self, countries: Iterable[str]) -> bool:
        return len({self.labels[c] for c in countries}) == 1


def cut(dendrogram: Dendrogram, k: int) -> ClusterAssignment:
    """Partition into ``k`` clusters by undoing the last ``k - 1`` merges.

    Cluster ids ``1..k`` are assigned in order of first appearance along
    the leaf order.
    """
    m = len(dendrogram.leaves)
    if not 1 <= k <= m:
        raise ValueError(f"k must lie in [1, {m}], got {k}")
    parent = list(range(2 * m - 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for s, mg in enumerate(dendrogram.merges[: m - k]):
        parent[find(mg.a)] = m + s
        parent[find(mg.b)] = m + s
    ids: dict[int, int] = {}
    labels = {}
    for leaf, country in enumerate(dendrogram.leaves):
        root = find(leaf)
        labels[country] = ids.setdefault(root, len(ids) + 1)
    return ClusterAssignment(labels)


def _leaf_groups(dendrogram: Dendrogram, k: int) -> list[np.ndarray]:
    assign = cut(dendrogram, k)
    pos = {c: i for i, c in enumerate(dendrogram.leaves)}
    return [np.array([pos[c] for c in members]) for members in assign.groups().values()]


def wss_tss_ratio(d: DissimilarityMatrix, dendrogram: Dendrogram, k: int) -> float:
    """Within- over total sum of squares for the ``k``-cluster cut.

    With only dissimilarities available, a cluster's sum of squares is
    ``sum_{pairs in C} d**2 / |C|``, which equals the squared-distance-to-
    centroid sum when ``d`` is Euclidean.
    """
    d2 = np.asarray(d.d) ** 2
    if tuple(dendrogram.leaves) != tuple(d.labels):
        order = [d.labels.index(c) for c in dendrogram.leaves]
        d2 = d2[np.ix_(order, order)]
    m = d2.shape[0]
    tss = np.triu(d2, 1).sum() / m
    if tss == 0:
        return 0.0
    wss = 0.0
    for members in _leaf_groups(dendrogram, k):
        sub = d2[np.ix_(members, members)]
        wss += np.triu(sub, 1).sum() / members.size
    return float(wss / tss)


def wss_tss_trace(d: DissimilarityMatrix, dendrogram: Dendrogram) -> list[tuple[int, float]]:
    return [(k, wss_tss_ratio(d, dendrogram, k)) for k in range(1, d.size + 1)]


def select_num_clusters(d: DissimilarityMatrix, dendrogram: Dendrogram,
                        cutoff: float = 0.5) -> int:
    """Smallest ``k`` whose cut has ``WSS / TSS < cutoff``.

    Returns 1 when all dissimilarities are zero.
    """
    if not 0 < cutoff < 1:
        raise ValueError(f"cutoff must lie in (0, 1), got {cutoff}")
    for k in range(1, d.size + 1):
        if wss_tss_ratio(d, dendrogram, k) < cutoff:
            return k
    return d.size
