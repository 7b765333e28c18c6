"""Spreadsheet document model: grids, snapshots, diffing, and event classification.

A sheet is a plain in-memory rectangular grid of cells plus per-column
widths. Monitoring works by capturing immutable snapshots of a sheet and
diffing consecutive captures; the resulting change set is classified into
one of five modification classes that the reporting layer aggregates.

Alignment rule for dimension changes: grids are compared by index prefix.
Rows or columns beyond the shorter dimension are reported as inserted or
deleted at the tail, and any content in an inserted region shows up as
cell changes against an empty cell. Applying a change set to the older
snapshot therefore reconstructs the newer one exactly, which is the
contract the round-trip tests enforce.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from datetime import datetime, timedelta
from typing import Iterable

from ._util import canonical_dumps, format_ts, parse_ts
from .errors import BadIndex, EmptyChangeSet, SheetMismatch

RGB = tuple[int, int, int]

DEFAULT_FONT_SIZE = 10
BLACK: RGB = (0, 0, 0)
WHITE: RGB = (255, 255, 255)
DEFAULT_COLUMN_WIDTH = 100
DEFAULT_SNAPSHOT_INTERVAL = timedelta(hours=2)

MODIFICATION_CLASSES = ("content", "formatting_only", "layout_only", "structural", "mixed")
STRUCTURAL_KINDS = ("row_inserted", "row_deleted", "col_inserted", "col_deleted")


@dataclass(frozen=True)
class CellFormat:
    font_size: int = DEFAULT_FONT_SIZE
    text_color: RGB = BLACK
    background_color: RGB = WHITE

    def __post_init__(self) -> None:
        if self.font_size < 1:
            raise ValueError(f"font_size must be >= 1, got {self.font_size}")

    def to_dict(self) -> dict:
        return {
            "font_size": self.font_size,
            "text_color": list(self.text_color),
            "background_color": list(self.background_color),
        }

    @classmethod
    def from_dict(cls, data: dict) -> CellFormat:
        return cls(
            font_size=data["font_size"],
            text_color=tuple(data["text_color"]),
            background_color=tuple(data["background_color"]),
        )


DEFAULT_FORMAT = CellFormat()


@dataclass(frozen=True)
class Cell:
    value: str = ""
    format: CellFormat = DEFAULT_FORMAT

    def to_dict(self) -> dict:
        return {"value": self.value, "format": self.format.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> Cell:
        return cls(value=data["value"], format=CellFormat.from_dict(data["format"]))


EMPTY_CELL = Cell()


def _check_rectangular(grid: list[list[Cell]], column_widths: list[int]) -> None:
    for width in column_widths:
        if width < 1:
            raise ValueError(f"column width must be positive, got {width}")
    for row in grid:
        if len(row) != len(column_widths):
            raise ValueError(
                f"ragged grid: row of length {len(row)} vs {len(column_widths)} columns"
            )


@dataclass
class HoneySheet:
    """A mutable decoy document; one writer at a time."""

    sheet_id: str
    grid: list[list[Cell]]
    column_widths: list[int]
    share_link: str

    def __post_init__(self) -> None:
        _check_rectangular(self.grid, self.column_widths)

    @property
    def n_rows(self) -> int:
        return len(self.grid)

    @property
    def n_cols(self) -> int:
        return len(self.column_widths)

    def cell(self, row: int, col: int) -> Cell:
        return self.grid[row][col]

    def to_dict(self) -> dict:
        return {
            "sheet_id": self.sheet_id,
            "grid": [[cell.to_dict() for cell in row] for row in self.grid],
            "column_widths": list(self.column_widths),
            "share_link": self.share_link,
        }

    @classmethod
    def from_dict(cls, data: dict) -> HoneySheet:
        return cls(
            sheet_id=data["sheet_id"],
            grid=[[Cell.from_dict(c) for c in row] for row in data["grid"]],
            column_widths=list(data["column_widths"]),
            share_link=data["share_link"],
        )

    def to_json(self) -> str:
        return canonical_dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> HoneySheet:
        return cls.from_dict(json.loads(text))


def sheets_to_json(sheets: Iterable[HoneySheet]) -> str:
    return canonical_dumps([sheet.to_dict() for sheet in sheets])


def sheets_from_json(text: str) -> list[HoneySheet]:
    """Load a sheet collection; accepts a JSON array or a single sheet object."""
    data = json.loads(text)
    if isinstance(data, dict):
        data = [data]
    return [HoneySheet.from_dict(item) for item in data]


@dataclass(frozen=True)
class Snapshot:
    """Frozen copy of one sheet's state at a point in time."""

    sheet_id: str
    taken_at: datetime
    grid: tuple[tuple[Cell, ...], ...]
    column_widths: tuple[int, ...]

    @property
    def n_rows(self) -> int:
        return len(self.grid)

    @property
    def n_cols(self) -> int:
        return len(self.column_widths)

    def to_dict(self) -> dict:
        return {
            "sheet_id": self.sheet_id,
            "taken_at": format_ts(self.taken_at),
            "grid": [[cell.to_dict() for cell in row] for row in self.grid],
            "column_widths": list(self.column_widths),
        }

    @classmethod
    def from_dict(cls, data: dict) -> Snapshot:
        return cls(
            sheet_id=data["sheet_id"],
            taken_at=parse_ts(data["taken_at"]),
            grid=tuple(tuple(Cell.from_dict(c) for c in row) for row in data["grid"]),
            column_widths=tuple(data["column_widths"]),
        )

    def to_json(self) -> str:
        return canonical_dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> Snapshot:
        return cls.from_dict(json.loads(text))


def take_snapshot(sheet: HoneySheet, at: datetime) -> Snapshot:
    """Capture the sheet as of `at`; later edits to the sheet never leak in.

    Cells are immutable, so freezing the row structure is a full deep copy.
    """
    return Snapshot(
        sheet_id=sheet.sheet_id,
        taken_at=at,
        grid=tuple(tuple(row) for row in sheet.grid),
        column_widths=tuple(sheet.column_widths),
    )


@dataclass(frozen=True)
class CellChange:
    row: int
    col: int
    old: Cell
    new: Cell

    def to_dict(self) -> dict:
        return {
            "row": self.row,
            "col": self.col,
            "old": self.old.to_dict(),
            "new": self.new.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> CellChange:
        return cls(
            row=data["row"],
            col=data["col"],
            old=Cell.from_dict(data["old"]),
            new=Cell.from_dict(data["new"]),
        )


@dataclass(frozen=True)
class StructuralChange:
    kind: str
    index: int

    def __post_init__(self) -> None:
        if self.kind not in STRUCTURAL_KINDS:
            raise ValueError(f"unknown structural change kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "index": self.index}

    @classmethod
    def from_dict(cls, data: dict) -> StructuralChange:
        return cls(kind=data["kind"], index=data["index"])


@dataclass(frozen=True)
class LayoutChange:
    col: int
    old_width: int
    new_width: int

    def to_dict(self) -> dict:
        return {"col": self.col, "old_width": self.old_width, "new_width": self.new_width}

    @classmethod
    def from_dict(cls, data: dict) -> LayoutChange:
        return cls(col=data["col"], old_width=data["old_width"], new_width=data["new_width"])


@dataclass(frozen=True)
class ChangeSet:
    cell_changes: tuple[CellChange, ...] = ()
    structural_changes: tuple[StructuralChange, ...] = ()
    layout_changes: tuple[LayoutChange, ...] = ()

    def is_empty(self) -> bool:
        return not (self.cell_changes or self.structural_changes or self.layout_changes)

    def to_dict(self) -> dict:
        return {
            "cell_changes": [c.to_dict() for c in self.cell_changes],
            "structural_changes": [c.to_dict() for c in self.structural_changes],
            "layout_changes": [c.to_dict() for c in self.layout_changes],
        }

    @classmethod
    def from_dict(cls, data: dict) -> ChangeSet:
        return cls(
            cell_changes=tuple(CellChange.from_dict(c) for c in data["cell_changes"]),
            structural_changes=tuple(
                StructuralChange.from_dict(c) for c in data["structural_changes"]
            ),
            layout_changes=tuple(LayoutChange.from_dict(c) for c in data["layout_changes"]),
        )

    def to_json(self) -> str:
        return canonical_dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> ChangeSet:
        return cls.from_dict(json.loads(text))

    def body_hash(self) -> str:
        """Stable digest of the change content, used as a deduplication key."""
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()


def diff(before: Snapshot, after: Snapshot) -> ChangeSet:
    """Compute the classified difference between two snapshots of one sheet.

    Applying the result to `before` with apply_changeset reproduces `after`
    cell-for-cell and width-for-width.
    """
    if before.sheet_id != after.sheet_id:
        raise SheetMismatch(
            f"cannot diff snapshots of different sheets: {before.sheet_id} vs {after.sheet_id}"
        )

    structural: list[StructuralChange] = []
    if after.n_rows < before.n_rows:
        structural.extend(
            StructuralChange("row_deleted", i) for i in range(after.n_rows, before.n_rows)
        )
    elif after.n_rows > before.n_rows:
        structural.extend(
            StructuralChange("row_inserted", i) for i in range(before.n_rows, after.n_rows)
        )
    if after.n_cols < before.n_cols:
        structural.extend(
            StructuralChange("col_deleted", i) for i in range(after.n_cols, before.n_cols)
        )
    elif after.n_cols > before.n_cols:
        structural.extend(
            StructuralChange("col_inserted", i) for i in range(before.n_cols, after.n_cols)
        )

    cells: list[CellChange] = []
    for r in range(after.n_rows):
        for c in range(after.n_cols):
            if r < before.n_rows and c < before.n_cols:
                old = before.grid[r][c]
            else:
                old = EMPTY_CELL
            new = after.grid[r][c]
            if old != new:
                cells.append(CellChange(r, c, old, new))

    layout: list[LayoutChange] = []
    for c in range(after.n_cols):
        old_width = before.column_widths[c] if c < before.n_cols else DEFAULT_COLUMN_WIDTH
        new_width = after.column_widths[c]
        if old_width != new_width:
            layout.append(LayoutChange(c, old_width, new_width))

    return ChangeSet(
        cell_changes=tuple(cells),
        structural_changes=tuple(structural),
        layout_changes=tuple(layout),
    )


def apply_changeset(before: Snapshot, changes: ChangeSet, at: datetime | None = None) -> Snapshot:
    """Replay a change set on top of a snapshot, yielding the newer state."""
    grid = [list(row) for row in before.grid]
    widths = list(before.column_widths)

    deletions = [s for s in changes.structural_changes if s.kind.endswith("_deleted")]
    insertions = [s for s in changes.structural_changes if s.kind.endswith("_inserted")]
    # Deletions first (highest index first), then insertions, so the
    # tail-aligned indices reported by diff stay valid throughout.
    for s in sorted(deletions, key=lambda s: -s.index):
        if s.kind == "row_deleted":
            del grid[s.index]
        else:
            del widths[s.index]
            for row in grid:
                del row[s.index]
    for s in sorted(insertions, key=lambda s: s.index):
        if s.kind == "row_inserted":
            grid.insert(s.index, [EMPTY_CELL] * len(widths))
        else:
            widths.insert(s.index, DEFAULT_COLUMN_WIDTH)
            for row in grid:
                row.insert(s.index, EMPTY_CELL)

    for change in changes.cell_changes:
        grid[change.row][change.col] = change.new
    for change in changes.layout_changes:
        widths[change.col] = change.new_width

    return Snapshot(
        sheet_id=before.sheet_id,
        taken_at=at if at is not None else before.taken_at,
        grid=tuple(tuple(row) for row in grid),
        column_widths=tuple(widths),
    )


def classify(changes: ChangeSet) -> str:
    """Assign a non-empty change set to exactly one modification class.

    layout_only: only column widths changed. structural: only rows or
    columns appeared or vanished. formatting_only: every cell change kept
    its value and altered its format. content: every cell change kept its
    format and altered its value. Anything else is mixed.
    """
    if changes.is_empty():
        raise EmptyChangeSet("cannot classify an empty change set")

    has_cells = bool(changes.cell_changes)
    has_structural = bool(changes.structural_changes)
    has_layout = bool(changes.layout_changes)

    if has_layout and not has_cells and not has_structural:
        return "layout_only"
    if has_structural and not has_cells and not has_layout:
        return "structural"
    if has_cells and not has_structural and not has_layout:
        value_only = all(
            c.old.value != c.new.value and c.old.format == c.new.format
            for c in changes.cell_changes
        )
        if value_only:
            return "content"
        format_only = all(
            c.old.value == c.new.value and c.old.format != c.new.format
            for c in changes.cell_changes
        )
        if format_only:
            return "formatting_only"
    return "mixed"


@dataclass(frozen=True)
class SheetEvent:
    """An observed open or modification of one sheet."""

    sheet_id: str
    kind: str
    occurred_at: datetime
    modification_class: str | None = None
    changeset: ChangeSet | None = None
    snapshot_at: datetime | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("open", "modification"):
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.kind == "modification":
            if self.changeset is None or self.changeset.is_empty():
                raise ValueError("modification events need a non-empty changeset")
            if self.modification_class not in MODIFICATION_CLASSES:
                raise ValueError(f"bad modification class {self.modification_class!r}")
        else:
            if self.changeset is not None or self.modification_class is not None:
                raise ValueError("open events carry no changeset or class")


def open_event(sheet_id: str, at: datetime, snapshot_at: datetime | None = None) -> SheetEvent:
    return SheetEvent(sheet_id=sheet_id, kind="open", occurred_at=at, snapshot_at=snapshot_at)


def modification_event(
    sheet_id: str,
    at: datetime,
    changeset: ChangeSet,
    snapshot_at: datetime | None = None,
) -> SheetEvent:
    """Build a modification event; the class is always derived from the changes."""
    return SheetEvent(
        sheet_id=sheet_id,
        kind="modification",
        occurred_at=at,
        modification_class=classify(changeset),
        changeset=changeset,
        snapshot_at=snapshot_at,
    )


@dataclass(frozen=True)
class EditCommand:
    """One grid edit; see the set_*/insert_*/delete_* constructors."""

    kind: str
    row: int | None = None
    col: int | None = None
    value: str | None = None
    format: CellFormat | None = None
    width: int | None = None
    index: int | None = None

    def to_dict(self) -> dict:
        data: dict = {"kind": self.kind}
        if self.row is not None:
            data["row"] = self.row
        if self.col is not None:
            data["col"] = self.col
        if self.value is not None:
            data["value"] = self.value
        if self.format is not None:
            data["format"] = self.format.to_dict()
        if self.width is not None:
            data["width"] = self.width
        if self.index is not None:
            data["index"] = self.index
        return data

    @classmethod
    def from_dict(cls, data: dict) -> EditCommand:
        fmt = data.get("format")
        return cls(
            kind=data["kind"],
            row=data.get("row"),
            col=data.get("col"),
            value=data.get("value"),
            format=CellFormat.from_dict(fmt) if fmt is not None else None,
            width=data.get("width"),
            index=data.get("index"),
        )


def set_value(row: int, col: int, value: str) -> EditCommand:
    return EditCommand(kind="set_value", row=row, col=col, value=value)


def set_format(row: int, col: int, fmt: CellFormat) -> EditCommand:
    return EditCommand(kind="set_format", row=row, col=col, format=fmt)


def set_column_width(col: int, width: int) -> EditCommand:
    return EditCommand(kind="set_column_width", col=col, width=width)


def insert_row(index: int) -> EditCommand:
    return EditCommand(kind="insert_row", index=index)


def delete_row(index: int) -> EditCommand:
    return EditCommand(kind="delete_row", index=index)


def insert_col(index: int) -> EditCommand:
    return EditCommand(kind="insert_col", index=index)


def delete_col(index: int) -> EditCommand:
    return EditCommand(kind="delete_col", index=index)


def _check_cell_index(sheet: HoneySheet, row: int | None, col: int | None) -> None:
    if row is None or not 0 <= row < sheet.n_rows:
        raise BadIndex(f"row {row} out of range for {sheet.n_rows} rows")
    if col is None or not 0 <= col < sheet.n_cols:
        raise BadIndex(f"col {col} out of range for {sheet.n_cols} columns")


def apply_edit(sheet: HoneySheet, command: EditCommand) -> HoneySheet:
    """Apply one edit command in place and return the sheet.

    Grid rectangularity is preserved by every command; indices outside the
    grid raise BadIndex before anything is touched.
    """
    kind = command.kind
    if kind == "set_value":
        _check_cell_index(sheet, command.row, command.col)
        if command.value is None:
            raise ValueError("set_value needs a value")
        old = sheet.grid[command.row][command.col]
        sheet.grid[command.row][command.col] = replace(old, value=command.value)
    elif kind == "set_format":
        _check_cell_index(sheet, command.row, command.col)
        if command.format is None:
            raise ValueError("set_format needs a format")
        old = sheet.grid[command.row][command.col]
        sheet.grid[command.row][command.col] = replace(old, format=command.format)
    elif kind == "set_column_width":
        if command.col is None or not 0 <= command.col < sheet.n_cols:
            raise BadIndex(f"col {command.col} out of range for {sheet.n_cols} columns")
        if command.width is None or command.width < 1:
            raise ValueError(f"column width must be positive, got {command.width}")
        sheet.column_widths[command.col] = command.width
    elif kind == "insert_row":
        if command.index is None or not 0 <= command.index <= sheet.n_rows:
            raise BadIndex(f"insert_row index {command.index} out of range")
        sheet.grid.insert(command.index, [EMPTY_CELL] * sheet.n_cols)
    elif kind == "delete_row":
        if command.index is None or not 0 <= command.index < sheet.n_rows:
            raise BadIndex(f"delete_row index {command.index} out of range")
        del sheet.grid[command.index]
    elif kind == "insert_col":
        if command.index is None or not 0 <= command.index <= sheet.n_cols:
            raise BadIndex(f"insert_col index {command.index} out of range")
        sheet.column_widths.insert(command.index, DEFAULT_COLUMN_WIDTH)
        for row in sheet.grid:
            row.insert(command.index, EMPTY_CELL)
    elif kind == "delete_col":
        if command.index is None or not 0 <= command.index < sheet.n_cols:
            raise BadIndex(f"delete_col index {command.index} out of range")
        del sheet.column_widths[command.index]
        for row in sheet.grid:
            del row[command.index]
    else:
        raise ValueError(f"unknown edit command {kind!r}")
    return sheet


class SnapshotMonitor:
    """Periodic snapshot comparison for one sheet.

    observe() is called with the current virtual time; once per interval it
    captures a snapshot, diffs it against the previous capture, and returns
    a modification event when anything changed.
    """

    def __init__(self, sheet: HoneySheet, interval: timedelta = DEFAULT_SNAPSHOT_INTERVAL):
        self.sheet = sheet
        self.interval = interval
        self.last: Snapshot | None = None

    def observe(self, at: datetime) -> SheetEvent | None:
        if self.last is not None and at - self.last.taken_at < self.interval:
            return None
        current = take_snapshot(self.sheet, at)
        previous, self.last = self.last, current
        if previous is None:
            return None
        changes = diff(previous, current)
        if changes.is_empty():
            return None
        return modification_event(self.sheet.sheet_id, at, changes, snapshot_at=at)
