"""CSV readers/writers for I/O tables and export of plotting artifacts.

Two table layouts are understood.

Long format, one flow per line, with header::

    year,input_country,input_sector,output_country,output_item,value

Wide format, the matrix itself. The first header cell is ignored, the other
header cells are column codes ``COUNTRY_ITEM``; every data line starts with
a row code ``COUNTRY_SECTOR``. Codes split at the first ``code_sep``
(default ``_``), so ``ITA_CONS_h`` is country ``ITA``, item ``CONS_h``.

In both layouts, output items that never occur as input sectors are final
demand categories. The rest-of-world country and configured value-added /
tax rows are dropped while reading.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import linalg
from .errors import ParseError
from .iomodel import IOIndex, IOTable

LONG_HEADER = ("year", "input_country", "input_sector", "output_country", "output_item", "value")


@dataclass(frozen=True)
class LongFormatRecord:
    year: int
    input_country: str
    input_sector: str
    output_country: str
    output_item: str
    value: float


@dataclass(frozen=True)
class SchemaOptions:
    """How to read a table file.

    Parameters
    ----------
    layout : {"auto", "long", "wide"}
        ``auto`` picks ``long`` when the header matches the long columns.
    row_code : str or None
        Rest-of-world country code removed from rows and columns.
    drop_row_labels : labels of value-added / tax rows; matched against the
        full row code, its country part and its sector part.
    drop_col_labels : labels of columns to drop (e.g. a total output column).
    final_labels : explicit final-demand labels, in order. Inferred when empty.
    year : year to keep from a multi-year long file; for wide files, the
        table year (otherwise the first 4-digit number in the file name).
    fill_absent : value for cells missing from a long file; ``None`` makes
        absent cells a parse error.
    """

    layout: str = "auto"
    delimiter: str = ","
    decimal: str = "."
    code_sep: str = "_"
    row_code: str | None = "ROW"
    drop_row_labels: frozenset = frozenset()
    drop_col_labels: frozenset = frozenset()
    final_labels: tuple = ()
    year: int | None = None
    missing_tokens: frozenset = frozenset({"", "NA", "NaN", "nan", "..", "..."})
    fill_absent: float | None = 0.0

    def __post_init__(self):
        object.__setattr__(self, "drop_row_labels", frozenset(self.drop_row_labels))
        object.__setattr__(self, "drop_col_labels", frozenset(self.drop_col_labels))
        object.__setattr__(self, "final_labels", tuple(self.final_labels))
        if self.layout not in ("auto", "long", "wide"):
            raise ValueError(f"unknown layout {self.layout!r}")


def _number(text: str, opts: SchemaOptions, line: int, path) -> float:
    s = text.strip()
    if s in opts.missing_tokens:
        return math.nan
    if opts.decimal != ".":
        s = s.replace(".", "").replace(opts.decimal, ".")
    try:
        return float(s)
    except ValueError:
        raise ParseError(f"not a number: {text!r}", line, path) from None


def _ordered_unique(items: Iterable[str]) -> list[str]:
    return list(dict.fromkeys(items))


def _build_index(countries, sectors, items, opts: SchemaOptions, path) -> IOIndex:
    if opts.final_labels:
        finals = list(opts.final_labels)
        unknown = [i for i in items if i not in sectors and i not in finals]
        if unknown:
            raise ParseError(f"output items neither sectors nor finals: {unknown[:5]}", path=path)
    else:
        finals = [i for i in items if i not in set(sectors)]
    if len(countries) < 1 or not sectors:
        raise ParseError("table has no countries or sectors after filtering", path=path)
    return IOIndex(countries, sectors, finals)


def _dropped_row(country: str, sector: str, opts: SchemaOptions, sep: str = "_") -> bool:
    if opts.row_code is not None and country == opts.row_code:
        return True
    labels = opts.drop_row_labels
    return country in labels or sector in labels or f"{country}{sep}{sector}" in labels


def _dropped_col(country: str, item: str, opts: SchemaOptions, sep: str = "_") -> bool:
    if opts.row_code is not None and country == opts.row_code:
        return True
    labels = opts.drop_col_labels
    return country in labels or item in labels or f"{country}{sep}{item}" in labels


def iter_long_records(path, opts: SchemaOptions | None = None):
    """Yield ``(line_number, LongFormatRecord)`` from a long-format file."""
    opts = opts or SchemaOptions(layout="long")
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh, delimiter=opts.delimiter)
        header = next(reader, None)
        if header is None:
            raise ParseError("empty file", 1, path)
        header = [h.strip().lower() for h in header]
        try:
            cols = [header.index(h) for h in LONG_HEADER]
        except ValueError:
            raise ParseError(f"long-format header must contain {', '.join(LONG_HEADER)}",
                             1, path) from None
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", line, path)
            y, ic, isec, oc, oit, val = (row[c].strip() for c in cols)
            if not all((ic, isec, oc, oit)):
                raise ParseError("empty country/sector label", line, path)
            try:
                year = int(y)
            except ValueError:
                raise ParseError(f"bad year {y!r}", line, path) from None
            yield line, LongFormatRecord(year, ic, isec, oc, oit, _number(val, opts, line, path))


def _parse_long(path: Path, opts: SchemaOptions) -> dict[int, IOTable]:
    cells: dict[int, dict[tuple, tuple[float, int]]] = {}
    for line, rec in iter_long_records(path, opts):
        if opts.year is not None and rec.year != opts.year:
            continue
        if _dropped_row(rec.input_country, rec.input_sector, opts) or \
                _dropped_col(rec.output_country, rec.output_item, opts):
            continue
        year_cells = cells.setdefault(rec.year, {})
        key = (rec.input_country, rec.input_sector, rec.output_country, rec.output_item)
        if key in year_cells:
            raise ParseError(f"duplicate cell {rec.year} {key} "
                             f"(first seen on line {year_cells[key][1]})", line, path)
        year_cells[key] = (rec.value, line)
    if not cells:
        raise ParseError("no data rows", path=path)
    return {year: _dense_from_cells(year, c, path, opts) for year, c in sorted(cells.items())}


def _dense_from_cells(year: int, cells: dict, path: Path, opts: SchemaOptions) -> IOTable:
    keys = list(cells)
    countries = _ordered_unique([c for k in keys for c in (k[0], k[2])])
    sectors = _ordered_unique(k[1] for k in keys)
    items = _ordered_unique(k[3] for k in keys)
    index = _build_index(countries, sectors, items, opts, path)
    rpos = {rc: i for i, rc in enumerate(index.row_labels())}
    cpos = {cc: j for j, cc in enumerate(index.col_labels())}
    t = np.full(index.shape, np.nan)
    seen = np.zeros(index.shape, dtype=bool)
    for (ic, isec, oc, oit), (value, line) in cells.items():
        try:
            i, j = rpos[(ic, isec)], cpos[(oc, oit)]
        except KeyError:
            raise ParseError(f"cell outside the table layout: {(ic, isec, oc, oit)}",
                             line, path) from None
        t[i, j] = value
        seen[i, j] = True
    if not seen.all():
        if opts.fill_absent is None:
            i, j = np.argwhere(~seen)[0]
            raise ParseError(f"{year}: {int((~seen).sum())} cells absent, e.g. "
                             f"{index.row_labels()[i]} -> {index.col_labels()[j]}", path=path)
        t[~seen] = opts.fill_absent
    return IOTable(year, index, t)


def _split_code(code: str, sep: str, line: int, path) -> tuple[str, str]:
    code = code.strip()
    if sep not in code:
        raise ParseError(f"code {code!r} lacks separator {sep!r}", line, path)
    country, label = code.split(sep, 1)
    if not country or not label:
        raise ParseError(f"malformed code {code!r}", line, path)
    return country, label


def _parse_wide(path: Path, opts: SchemaOptions) -> IOTable:
    sep = opts.code_sep
    with path.open(newline="") as fh:
        reader = csv.reader(fh, delimiter=opts.delimiter)
        header = next(reader, None)
        if header is None:
            raise ParseError("empty file", 1, path)
        col_codes = [_split_code(c, sep, 1, path) for c in header[1:]]
        if len(set(col_codes)) != len(col_codes):
            raise ParseError("duplicate column code in header", 1, path)
        keep_cols = [j for j, (c, it) in enumerate(col_codes) if not _dropped_col(c, it, opts, sep)]
        rows: dict[tuple[str, str], np.ndarray] = {}
        row_lines: dict[tuple[str, str], int] = {}
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", line, path)
            rc = _split_code(row[0], sep, line, path)
            if _dropped_row(*rc, opts, sep):
                continue
            if rc in rows:
                raise ParseError(f"duplicate row code {sep.join(rc)} "
                                 f"(first on line {row_lines[rc]})", line, path)
            values = row[1:]
            rows[rc] = np.array([_number(values[j], opts, line, path) for j in keep_cols])
            row_lines[rc] = line
    if not rows:
        raise ParseError("no data rows", path=path)
    kept = [col_codes[j] for j in keep_cols]
    countries = _ordered_unique([c for c, _ in rows] + [c for c, _ in kept])
    sectors = _ordered_unique(s for _, s in rows)
    items = _ordered_unique(it for _, it in kept)
    index = _build_index(countries, sectors, items, opts, path)
    if set(rows) != set(index.row_labels()):
        missing = sorted(set(index.row_labels()) - set(rows))[:5]
        raise ParseError(f"row codes do not form a full country x sector grid; missing {missing}",
                         path=path)
    if set(kept) != set(index.col_labels()):
        missing = sorted(set(index.col_labels()) - set(kept))[:5]
        raise ParseError(f"column codes do not form a full country x item grid; missing {missing}",
                         path=path)
    cpos = {cc: j for j, cc in enumerate(kept)}
    order = [cpos[cc] for cc in index.col_labels()]
    t = np.vstack([rows[rc][order] for rc in index.row_labels()])
    year = opts.year
    if year is None:
        found = re.search(r"(19|20)\d\d", path.name)
        if not found:
            raise ParseError("wide file name carries no year; pass one in the options", path=path)
        year = int(found.group(0))
    return IOTable(year, index, t)


def detect_layout(path, opts: SchemaOptions) -> str:
    with Path(path).open(newline="") as fh:
        header = next(csv.reader(fh, delimiter=opts.delimiter), [])
    cols = {h.strip().lower() for h in header}
    return "long" if set(LONG_HEADER) <= cols else "wide"


def read_tables(path, opts: SchemaOptions | None = None) -> list[IOTable]:
    """Read every year held by ``path`` (a wide file holds exactly one)."""
    opts = opts or SchemaOptions()
    path = Path(path)
    layout = opts.layout if opts.layout != "auto" else detect_layout(path, opts)
    if layout == "long":
        return list(_parse_long(path, opts).values())
    return [_parse_wide(path, opts)]


def parse_table(path, opts: SchemaOptions | None = None) -> IOTable:
    """Read one year's table into canonical order.

    Missing values stay NaN; run :func:`iomc.iomodel.sanitize` before
    completion. A long file holding several years needs ``opts.year``.
    """
    tables = read_tables(path, opts)
    if len(tables) > 1:
        raise ParseError(f"file holds several years {[t.year for t in tables]}; choose one",
                         path=path)
    return tables[0]


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def write_long(table: IOTable, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LONG_HEADER)
        rows, cols = table.index.row_labels(), table.index.col_labels()
        for i, (ic, isec) in enumerate(rows):
            for j, (oc, oit) in enumerate(cols):
                w.writerow([table.year, ic, isec, oc, oit, _fmt(table.t[i, j])])
    return path


def write_wide(table: IOTable, path, code_sep: str = "_") -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["code"] + [f"{c}{code_sep}{s}" for c, s in table.index.col_labels()])
        for i, (c, s) in enumerate(table.index.row_labels()):
            w.writerow([f"{c}{code_sep}{s}"] + [_fmt(x) for x in table.t[i]])
    return path


def sparsity_stats(table) -> float:
    """Percentage of entries exactly equal to zero (raw values, before sanitizing)."""
    t = table.t if isinstance(table, IOTable) else np.asarray(table, dtype=np.float64)
    return 100.0 * float(np.count_nonzero(t == 0.0)) / t.size


# ---------------------------------------------------------------------------
# Plot artifacts


def log_scale(m) -> np.ndarray:
    """``log2`` of positive entries; zeros and negatives get ``min - 1``."""
    a = linalg.as_matrix(m)
    pos = a > 0
    logs = np.zeros_like(a)
    logs[pos] = np.log2(a[pos])
    floor = (logs[pos].min() - 1.0) if pos.any() else 0.0
    logs[~pos] = floor
    return logs


def write_pixmap(rgb: np.ndarray, path) -> Path:
    """Write an ``(h, w, 3)`` uint8 array as binary PPM (P6)."""
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    h, w, _ = rgb.shape
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes())
    return path


def read_pixmap(path) -> np.ndarray:
    """Read a binary PPM written by :func:`write_pixmap`."""
    data = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end].decode("ascii"))
        pos = end
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic != "P6" or maxval != 255:
        raise ValueError("only 8-bit binary PPM is supported")
    pixels = np.frombuffer(data[pos + 1:pos + 1 + w * h * 3], dtype=np.uint8)
    return pixels.reshape(h, w, 3)


def export_heatmap(m, path, csv_path=None) -> Path:
    """Grey-level heatmap of ``log2(m)``.

    Intensity grows with the value; the floor (zeros/negatives) is black.
    The log values are written alongside as CSV (``path`` with ``.csv``
    suffix unless ``csv_path`` is given).
    """
    logs = log_scale(m)
    lo, hi = logs.min(), logs.max()
    if hi > lo:
        level = np.rint(255.0 * (logs - lo) / (hi - lo))
    else:
        level = np.full(logs.shape, 255.0 if np.any(np.asarray(m) > 0) else 0.0)
    grey = level.astype(np.uint8)
    path = Path(path)
    write_pixmap(np.repeat(grey[:, :, None], 3, axis=2), path)
    csv_path = Path(csv_path) if csv_path is not None else path.with_suffix(".csv")
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        for row in logs:
            w.writerow([repr(float(x)) for x in row])
    return path


def export_mask(mask, path) -> Path:
    """Observed positions white, hidden positions red."""
    hidden = ~np.asarray(mask, dtype=bool)
    rgb = np.full(hidden.shape + (3,), 255, dtype=np.uint8)
    rgb[hidden] = (255, 0, 0)
    return write_pixmap(rgb, path)


def export_spectrum(original, completed, path) -> Path:
    a = linalg.as_matrix(original, name="original")
    b = linalg.as_matrix(completed, name="completed")
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    sa, sb = linalg.singular_values(a), linalg.singular_values(b)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "sigma_original", "sigma_completed"])
        for i, (x, y) in enumerate(zip(sa, sb), start=1):
            w.writerow([i, repr(float(x)), repr(float(y))])
    return path


def export_lambda_path(result, path) -> Path:
    """One line per lambda with iteration counts and all split metrics."""
    path = Path(path)
    fields = ["lam", "iterations", "converged", "nuclear_norm", "rmse_train", "rmse_val",
              "rmse_test", "smape_train", "smape_val", "smape_test"]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda"] + fields[1:])
        for rec in result.path:
            w.writerow([repr(getattr(rec, f)) if isinstance(getattr(rec, f), float)
                        else getattr(rec, f) for f in fields])
    return path


def export_assignment(assignment, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["country", "cluster"])
        for country, cid in assignment.labels.items():
            w.writerow([country, cid])
    return path


def export_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in r])
    return path
