"""Multi-country input-output tables, block access and panel assembly.

Layout of the transition matrix ``T = [Z | F]`` (``mn`` rows, ``m(n+l)``
columns): rows are ordered country-major, sector-minor. Columns are grouped
by consuming country, and inside each country the ``n`` intermediate
sectors come first, then the ``l`` final-demand categories. Block
``T^{h,k}`` is therefore a contiguous ``n x (n+l)`` tile.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import CountryLookupError, IllPosedLayoutError, LayoutError
from .masks import ObservationMask, mask_split


@dataclass(frozen=True)
class IOIndex:
    countries: tuple[str, ...]
    sectors: tuple[str, ...]
    finals: tuple[str, ...] = ()

    def __post_init__(self):
        for name in ("countries", "sectors", "finals"):
            object.__setattr__(self, name, tuple(str(x) for x in getattr(self, name)))
        if len(set(self.countries)) != len(self.countries):
            raise LayoutError("country codes must be unique")
        if len(self.countries) < 1 or len(self.sectors) < 1:
            raise LayoutError("an index needs at least one country and one sector")

    @property
    def m(self) -> int:
        return len(self.countries)

    @property
    def n(self) -> int:
        return len(self.sectors)

    @property
    def l(self) -> int:  # noqa: E743
        return len(self.finals)

    @property
    def width(self) -> int:
        """Columns per country block, ``n + l``."""
        return self.n + self.l

    @property
    def shape(self) -> tuple[int, int]:
        return self.m * self.n, self.m * self.width

    def position(self, country: str) -> int:
        try:
            return self.countries.index(country)
        except ValueError:
            raise CountryLookupError(f"unknown country code {country!r}") from None

    def row_slice(self, country: str) -> slice:
        i = self.position(country)
        return slice(i * self.n, (i + 1) * self.n)

    def col_slice(self, country: str) -> slice:
        k = self.position(country)
        return slice(k * self.width, (k + 1) * self.width)

    def row_labels(self) -> list[tuple[str, str]]:
        return [(c, s) for c in self.countries for s in self.sectors]

    def col_labels(self) -> list[tuple[str, str]]:
        return [(c, s) for c in self.countries for s in self.sectors + self.finals]


@dataclass(frozen=True)
class IOTable:
    year: int
    index: IOIndex
    t: np.ndarray = field(repr=False)

    def __post_init__(self):
        t = np.array(self.t, dtype=np.float64)
        if t.shape != self.index.shape:
            raise LayoutError(
                f"transition matrix shape {t.shape} does not match index {self.index.shape}")
        t.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "year", int(self.year))

    @property
    def z(self) -> np.ndarray:
        """Intermediate flows, ``mn x mn``."""
        w, n = self.index.width, self.index.n
        cols = np.concatenate([np.arange(k * w, k * w + n) for k in range(self.index.m)])
        return self.t[:, cols]

    @property
    def f(self) -> np.ndarray:
        """Final-demand flows, ``mn x ml``."""
        w, n = self.index.width, self.index.n
        cols = np.concatenate(
            [np.arange(k * w + n, (k + 1) * w) for k in range(self.index.m)])
        return self.t[:, cols]

    def gross_output(self) -> np.ndarray:
        """``x = Z i + F i``: total sales of every country-sector."""
        return self.t.sum(axis=1)


@dataclass(frozen=True, order=True)
class BlockRef:
    """Block ``T^{h,k}`` of a given year: ``h`` supplies, ``k`` uses."""

    input_country: str
    output_country: str
    year: int

    def __str__(self) -> str:
        return f"{self.input_country}/{self.output_country},{self.year}"

    @classmethod
    def parse(cls, text: str) -> "BlockRef":
        """Parse ``"ITA/FRA,2014"`` (also accepts ``:`` or ``@`` before the year)."""
        for sep in (",", ":", "@"):
            if sep in text:
                pair, year = text.rsplit(sep, 1)
                break
        else:
            raise ValueError(f"cannot parse block reference {text!r}")
        h, k = pair.split("/")
        return cls(h.strip(), k.strip(), int(year))


def build_transition(z, f, index: IOIndex, year: int) -> IOTable:
    """Interleave ``Z`` (``mn x mn``) and ``F`` (``mn x ml``) into ``T``."""
    z = np.asarray(z, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    m, n, l = index.m, index.n, index.l
    if z.shape != (m * n, m * n):
        raise LayoutError(f"Z has shape {z.shape}, expected {(m * n, m * n)}")
    if f.shape != (m * n, m * l):
        raise LayoutError(f"F has shape {f.shape}, expected {(m * n, m * l)}")
    parts = []
    for k in range(m):
        parts.append(z[:, k * n:(k + 1) * n])
        parts.append(f[:, k * l:(k + 1) * l])
    return IOTable(year, index, np.hstack(parts))


def extract_block(table: IOTable, h: str, k: str) -> np.ndarray:
    ix = table.index
    return table.t[ix.row_slice(h), ix.col_slice(k)]


def row_submatrix(table: IOTable, h: str) -> np.ndarray:
    """``T^{h,.}``: blocks ``T^{h,j}`` for every ``j != h``, side by side."""
    ix = table.index
    others = [c for c in ix.countries if c != ix.countries[ix.position(h)]]
    if not others:
        raise LayoutError("row submatrix needs at least two countries")
    return np.hstack([extract_block(table, h, c) for c in others])


def col_submatrix(table: IOTable, k: str) -> np.ndarray:
    """``T^{.,k}``: blocks ``T^{i,k}`` for every ``i != k``, stacked."""
    ix = table.index
    others = [c for c in ix.countries if c != ix.countries[ix.position(k)]]
    if not others:
        raise LayoutError("column submatrix needs at least two countries")
    return np.vstack([extract_block(table, c, k) for c in others])


def sanitize(m) -> tuple[np.ndarray, dict]:
    """Replace missing (NaN/inf) and negative entries by zero.

    Returns the cleaned copy and a report ``{"negatives": int, "missing": int}``.
    Negative zero is normalized to ``0.0``.
    """
    a = np.array(m, dtype=np.float64)
    missing = ~np.isfinite(a) & ~(a == -np.inf)
    negative = a < 0
    out = np.where(missing | negative, 0.0, a) + 0.0
    return out, {"negatives": int(negative.sum()), "missing": int(missing.sum())}


# ---------------------------------------------------------------------------
# Panels


@dataclass(frozen=True)
class PanelLayout:
    """Grid of blocks forming a panel matrix, plus the set of hidden blocks.

    ``grid[r][c]`` is the block placed at block-row ``r``, block-column ``c``.
    """

    grid: tuple[tuple[BlockRef, ...], ...]
    obscured: frozenset = frozenset()

    def __post_init__(self):
        grid = tuple(tuple(row) for row in self.grid)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "obscured", frozenset(self.obscured))
        if not grid or not grid[0]:
            raise LayoutError("panel grid is empty")
        if len({len(row) for row in grid}) != 1:
            raise LayoutError("panel grid rows must have equal length")
        years = [row[0].year for row in grid]
        for row in grid:
            if len({b.year for b in row}) != 1:
                raise LayoutError("each grid row must hold blocks of a single year")
        if any(b < a for a, b in zip(years, years[1:])):
            raise LayoutError("grid rows must be ordered by year")
        cells = [b for row in grid for b in row]
        if len(set(cells)) != len(cells):
            raise LayoutError("a block appears twice in the grid")
        missing = self.obscured - set(cells)
        if missing:
            raise LayoutError(f"obscured blocks not in grid: {sorted(map(str, missing))}")

    @classmethod
    def horizontal(cls, years: Iterable[int], pairs: Sequence[tuple[str, str]],
                   obscured=()) -> "PanelLayout":
        """One block-row per year, one block-column per country pair."""
        years = [int(y) for y in years]
        if any(b <= a for a, b in zip(years, years[1:])):
            raise LayoutError("years must be strictly increasing")
        grid = [[BlockRef(h, k, y) for h, k in pairs] for y in years]
        return cls(grid, frozenset(obscured))

    @classmethod
    def vertical(cls, years: Iterable[int], pairs: Sequence[tuple[str, str]],
                 obscured=()) -> "PanelLayout":
        """Single block-column; for each year the pairs are stacked in order."""
        grid = [[BlockRef(h, k, int(y))] for y in years for h, k in pairs]
        return cls(grid, frozenset(obscured))

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.grid), len(self.grid[0])

    def block_obscured(self) -> np.ndarray:
        return np.array([[b in self.obscured for b in row] for row in self.grid], dtype=bool)

    def check_well_posed(self) -> None:
        """Raise if an entire block-row or block-column is hidden."""
        hidden = self.block_obscured()
        bad_rows = np.flatnonzero(hidden.all(axis=1))
        bad_cols = np.flatnonzero(hidden.all(axis=0))
        if bad_rows.size or bad_cols.size:
            what = []
            if bad_rows.size:
                what.append(f"block rows {bad_rows.tolist()}")
            if bad_cols.size:
                what.append(f"block columns {bad_cols.tolist()}")
            raise IllPosedLayoutError(
                "ill-posed layout: " + " and ".join(what) + " have no observed entry; "
                "Soft Impute would reconstruct them as all zeros",
                rows=bad_rows, cols=bad_cols)


@dataclass(frozen=True)
class PanelMatrix:
    layout: PanelLayout
    m: np.ndarray = field(repr=False)
    block_shape: tuple[int, int]

    def __post_init__(self):
        br, bc = self.block_shape
        gr, gc = self.layout.shape
        if self.m.shape != (gr * br, gc * bc):
            raise LayoutError("panel matrix dimensions inconsistent with layout")

    def block_slices(self, ref: BlockRef) -> tuple[slice, slice]:
        br, bc = self.block_shape
        for r, row in enumerate(self.layout.grid):
            for c, b in enumerate(row):
                if b == ref:
                    return slice(r * br, (r + 1) * br), slice(c * bc, (c + 1) * bc)
        raise KeyError(str(ref))

    def obscured_mask(self) -> np.ndarray:
        br, bc = self.block_shape
        return np.kron(self.layout.block_obscured(), np.ones((br, bc), dtype=bool)).astype(bool)


def _tables_by_year(tables: Iterable[IOTable]) -> dict[int, IOTable]:
    by_year: dict[int, IOTable] = {}
    index = None
    for t in tables:
        if index is None:
            index = t.index
        elif t.index != index:
            raise LayoutError("all tables must share one index")
        if t.year in by_year:
            raise LayoutError(f"duplicate table for year {t.year}")
        by_year[t.year] = t
    if not by_year:
        raise LayoutError("no tables given")
    return by_year


def assemble_layout(tables: Iterable[IOTable], layout: PanelLayout, rng_seed=None,
                    check: bool = True) -> tuple[PanelMatrix, ObservationMask]:
    """Fill ``layout`` with blocks from ``tables`` and split the hidden entries.

    With ``check`` (the default) an ill-posed layout raises
    :class:`IllPosedLayoutError` before anything is assembled.
    """
    by_year = _tables_by_year(tables)
    if check:
        layout.check_well_posed()
    rows = []
    for grid_row in layout.grid:
        blocks = []
        for b in grid_row:
            if b.year not in by_year:
                raise LayoutError(f"no table for year {b.year}")
            blocks.append(extract_block(by_year[b.year], b.input_country, b.output_country))
        rows.append(np.hstack(blocks))
    m = np.vstack(rows)
    m.setflags(write=False)
    ix = next(iter(by_year.values())).index
    panel = PanelMatrix(layout, m, (ix.n, ix.width))
    mask = mask_split(panel.obscured_mask(), rng_seed=rng_seed)
    return panel, mask


def assemble_panel(tables: Iterable[IOTable], pairs: Sequence[tuple[str, str]],
                   obscured=(), rng_seed=None, stacking: str = "horizontal",
                   ) -> tuple[PanelMatrix, ObservationMask]:
    """Stack the blocks of ``pairs`` over the years of ``tables``.

    ``stacking="horizontal"`` puts one year per block-row and the pairs side
    by side in the given order. ``"vertical"`` stacks every block in a single
    column, which hides whole rows as soon as one block is obscured and is
    rejected as ill-posed.
    """
    tables = list(tables)
    by_year = _tables_by_year(tables)
    years = sorted(by_year)
    ix = by_year[years[0]].index
    for h, k in pairs:
        ix.position(h)
        ix.position(k)
    builder = {"horizontal": PanelLayout.horizontal, "vertical": PanelLayout.vertical}[stacking]
    layout = builder(years, pairs, obscured)
    return assemble_layout(tables, layout, rng_seed=rng_seed)
