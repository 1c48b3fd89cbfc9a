"""Ingestion and export: TSV expression matrices, GMT gene sets, response
tables, and the audit/QC writers.

Formats
-------
expression matrix : first row ``<corner>\\t<array ids...>``, then one row per
    gene: ``<gene id>\\t<values...>``. UTF-8, tab-delimited, '.'-decimal.
GMT               : ``name TAB description TAB gene [TAB gene ...]`` per line.
response          : ``array_id TAB label`` (group kinds) or
                    ``array_id TAB time TAB event`` (survival). No header.

Line endings are normalized, so CRLF and LF files parse identically.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import (
    CategoryCollection,
    CategoryEntry,
    ExpressionMatrix,
    InputError,
    Response,
    ResponseKind,
)


@dataclass(frozen=True)
class RawGeneSet:
    name: str
    description: str
    genes: tuple[str, ...]
    duplicate_count: int = 0


@dataclass(frozen=True)
class AlignmentReport:
    """What align_and_filter dropped, for the run log."""

    unresolved_symbols: int
    dropped_small: int
    dropped_large: int
    kept: int


def _read_lines(path) -> list[str]:
    text = Path(path).read_text(encoding="utf-8")
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    return text.split("\n")


def parse_expression_matrix(path, delimiter: str = "\t", header: bool = True) -> ExpressionMatrix:
    """Parse a genes-by-arrays TSV into an ExpressionMatrix.

    Errors name the offending row/column (1-based, header included) so a bad
    cell in a large file can be located directly.
    """
    lines = [ln for ln in _read_lines(path) if ln != ""]
    if not lines:
        raise InputError(f"{path}: empty expression matrix file")
    if not header:
        raise InputError("expression matrices require a header row of array ids")
    head = lines[0].split(delimiter)
    if len(head) < 2:
        raise InputError(f"{path}: header row has no array ids")
    array_ids = [c.strip() for c in head[1:]]
    n = len(array_ids)
    gene_ids: list[str] = []
    rows: list[np.ndarray] = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(delimiter)
        if len(cells) != n + 1:
            raise InputError(
                f"{path}: ragged row {lineno}: expected {n + 1} fields, got {len(cells)}"
            )
        gene_ids.append(cells[0].strip())
        try:
            row = np.array([float(c) for c in cells[1:]], dtype=np.float64)
        except ValueError:
            bad_col = next(i for i, c in enumerate(cells[1:]) if not _is_float(c))
            raise InputError(
                f"{path}: non-numeric cell at row {lineno}, column {bad_col + 2}: "
                f"{cells[1 + bad_col]!r}"
            ) from None
        if not np.all(np.isfinite(row)):
            bad_col = int(np.argwhere(~np.isfinite(row))[0][0])
            raise InputError(f"{path}: non-finite value at row {lineno}, column {bad_col + 2}")
        rows.append(row)
    dup = _duplicate_name(gene_ids)
    if dup is not None:
        raise InputError(f"{path}: duplicate gene id {dup!r}")
    if len(rows) < 2:
        raise InputError(f"{path}: need at least 2 gene rows, got {len(rows)}")
    return ExpressionMatrix(tuple(gene_ids), tuple(array_ids), np.vstack(rows))


def _is_float(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def _duplicate_name(names) -> str | None:
    seen = set()
    for x in names:
        if x in seen:
            return x
        seen.add(x)
    return None


def write_expression_matrix(matrix: ExpressionMatrix, path, corner: str = "gene_id") -> None:
    """Write a matrix back to TSV; round-trips bit-exactly through repr."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(corner + "\t" + "\t".join(matrix.array_ids) + "\n")
        for gene, row in zip(matrix.gene_ids, matrix.values):
            fh.write(gene + "\t" + "\t".join(repr(float(v)) for v in row) + "\n")


def parse_gmt(path) -> list[RawGeneSet]:
    """Parse a GMT file into raw gene sets (symbols unresolved).

    Duplicate symbols within a line are dropped, keeping first occurrence;
    the per-set duplicate count is recorded.
    """
    sets: list[RawGeneSet] = []
    names = set()
    for lineno, line in enumerate(_read_lines(path), start=1):
        if line == "":
            continue
        fields = line.split("\t")
        if len(fields) < 3:
            raise InputError(f"{path}: line {lineno}: GMT lines need name, description, genes")
        name, description = fields[0].strip(), fields[1].strip()
        if name in names:
            raise InputError(f"{path}: line {lineno}: duplicate set name {name!r}")
        names.add(name)
        genes: list[str] = []
        seen = set()
        dups = 0
        for g in (f.strip() for f in fields[2:]):
            if g == "":
                continue
            if g in seen:
                dups += 1
                continue
            seen.add(g)
            genes.append(g)
        if not genes:
            raise InputError(f"{path}: line {lineno}: set {name!r} has no genes")
        sets.append(RawGeneSet(name, description, tuple(genes), dups))
    if not sets:
        raise InputError(f"{path}: no gene sets found")
    return sets


def parse_response(path, kind: ResponseKind, array_ids) -> Response:
    """Parse a response TSV and reorder rows to the given array ordering.

    Every array id in `array_ids` must be covered exactly once.
    """
    array_ids = list(array_ids)
    want = {a: i for i, a in enumerate(array_ids)}
    seen: dict[str, tuple] = {}
    n_fields = 3 if kind is ResponseKind.SURVIVAL else 2
    for lineno, line in enumerate(_read_lines(path), start=1):
        if line == "" or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split("\t")]
        if len(fields) != n_fields:
            raise InputError(
                f"{path}: line {lineno}: expected {n_fields} tab-separated fields, "
                f"got {len(fields)}"
            )
        aid = fields[0]
        if aid in seen:
            raise InputError(f"{path}: line {lineno}: duplicate array id {aid!r}")
        if aid not in want:
            raise InputError(f"{path}: line {lineno}: array id {aid!r} not in the matrix")
        if kind is ResponseKind.SURVIVAL:
            try:
                time = float(fields[1])
            except ValueError:
                raise InputError(f"{path}: line {lineno}: bad time {fields[1]!r}") from None
            if time <= 0:
                raise InputError(f"{path}: line {lineno}: non-positive time {time}")
            if fields[2] not in ("0", "1"):
                raise InputError(f"{path}: line {lineno}: event must be 0 or 1, got {fields[2]!r}")
            seen[aid] = (time, int(fields[2]))
        else:
            try:
                label = int(fields[1])
            except ValueError:
                raise InputError(f"{path}: line {lineno}: bad label {fields[1]!r}") from None
            if kind is ResponseKind.TWO_GROUP and label not in (1, 2):
                raise InputError(f"{path}: line {lineno}: unknown label {label} (want 1 or 2)")
            seen[aid] = (label,)
    missing = [a for a in array_ids if a not in seen]
    if missing:
        raise InputError(f"{path}: missing response for array id {missing[0]!r}")
    ordered = [seen[a] for a in array_ids]
    if kind is ResponseKind.SURVIVAL:
        times = np.array([r[0] for r in ordered])
        events = np.array([r[1] for r in ordered])
        return Response.survival(times, events)
    labels = np.array([r[0] for r in ordered])
    if kind is ResponseKind.TWO_GROUP:
        return Response.two_group(labels)
    return Response.multi_group(labels)


def align_and_filter(
    raw_sets,
    matrix: ExpressionMatrix,
    min_size: int = 5,
) -> tuple[CategoryCollection, AlignmentReport]:
    """Resolve gene symbols to row indices and filter by size.

    Symbols absent from the matrix are dropped with a summary count (platform
    annotation always carries off-array genes). Entries keep only sizes in
    [min_size, m - min_size] so both the category and its complement can
    support a comparison.
    """
    if min_size < 1:
        raise InputError("min_size must be >= 1")
    index = matrix.row_index()
    m = matrix.m
    unresolved = 0
    dropped_small = 0
    dropped_large = 0
    entries: list[CategoryEntry] = []
    for s in raw_sets:
        resolved = [index[g] for g in s.genes if g in index]
        unresolved += len(s.genes) - len(resolved)
        size = len(set(resolved))
        if size < min_size:
            dropped_small += 1
            continue
        if size > m - min_size:
            dropped_large += 1
            continue
        entries.append(CategoryEntry(s.name, s.description, np.array(resolved, dtype=np.intp)))
    if not entries:
        raise InputError("no categories left after alignment and size filtering")
    report = AlignmentReport(unresolved, dropped_small, dropped_large, len(entries))
    return CategoryCollection(tuple(entries), m), report


def collection_to_raw(collection: CategoryCollection, matrix: ExpressionMatrix) -> list[RawGeneSet]:
    """Map a resolved collection back to symbol sets (for round-trip checks)."""
    return [
        RawGeneSet(e.name, e.description, tuple(matrix.gene_ids[i] for i in e.member_indices))
        for e in collection
    ]


def write_local_stats(gene_ids, values, path) -> None:
    """Two-column TSV (gene_id, value) for audit."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for g, v in zip(gene_ids, values):
            fh.write(f"{g}\t{float(v)!r}\n")


def write_null_distribution(u_star, path) -> None:
    """Single-column TSV of resampled global statistics for external QC."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for u in np.asarray(u_star, dtype=float):
            fh.write(f"{float(u)!r}\n")
