"""Long-format annual panel: loading, validation, slicing and canonical output.

The on-disk format is a UTF-8 CSV with header ``unit,time,variable,value``.
Cells may be missing; completeness is checked per study with
:func:`check_coverage`.
"""

from __future__ import annotations

import io
import os
import re
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Iterator

import numpy as np

from .errors import (
    DuplicateKey,
    EmptyInput,
    MalformedRow,
    UnknownUnit,
    UnknownVariable,
    WindowOutOfRange,
)

HEADER = "unit,time,variable,value"

_INT_RE = re.compile(r"^[+-]?\d+$")
_DEC_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


@dataclass(frozen=True, eq=False)
class Panel:
    """Immutable (unit, time, variable) -> value cube.

    ``values`` has shape ``(len(units), len(times), len(variables))`` and
    holds NaN where a cell is absent. Units and variables are kept in
    lexicographic order, times ascending.
    """

    units: tuple[str, ...]
    times: tuple[int, ...]
    variables: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        _check_names(self.units, "unit")
        _check_names(self.variables, "variable")
        if any(not isinstance(t, (int, np.integer)) for t in self.times):
            raise ValueError("times must be integers")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("times must be strictly increasing")
        shape = (len(self.units), len(self.times), len(self.variables))
        if self.values.shape != shape:
            raise ValueError(f"values shape {self.values.shape} != {shape}")
        vals = np.array(self.values, dtype=float)
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "_uidx", {u: i for i, u in enumerate(self.units)})
        object.__setattr__(self, "_tidx", {t: i for i, t in enumerate(self.times)})
        object.__setattr__(self, "_vidx", {v: i for i, v in enumerate(self.variables)})

    @classmethod
    def from_cells(cls, cells: Iterable[tuple[str, int, str, float]]) -> "Panel":
        """Build a panel from ``(unit, time, variable, value)`` tuples.

        Raises DuplicateKey when a key repeats.
        """
        seen: dict[tuple[str, int, str], float] = {}
        for unit, time, var, value in cells:
            key = (unit, int(time), var)
            if key in seen:
                raise DuplicateKey(*key)
            seen[key] = float(value)
        units = tuple(sorted({k[0] for k in seen}))
        times = tuple(sorted({k[1] for k in seen}))
        variables = tuple(sorted({k[2] for k in seen}))
        ui = {u: i for i, u in enumerate(units)}
        ti = {t: i for i, t in enumerate(times)}
        vi = {v: i for i, v in enumerate(variables)}
        cube = np.full((len(units), len(times), len(variables)), np.nan)
        for (u, t, v), x in seen.items():
            cube[ui[u], ti[t], vi[v]] = x
        return cls(units, times, variables, cube)

    def __eq__(self, other):
        if not isinstance(other, Panel):
            return NotImplemented
        return (
            self.units == other.units
            and self.times == other.times
            and self.variables == other.variables
            and np.array_equal(self.values, other.values, equal_nan=True)
        )

    __hash__ = None

    def __len__(self) -> int:
        return int(np.count_nonzero(~np.isnan(self.values)))

    def cells(self) -> Iterator[tuple[str, int, str, float]]:
        """Present cells in canonical order (unit, time, variable)."""
        for i, u in enumerate(self.units):
            for j, t in enumerate(self.times):
                for k, v in enumerate(self.variables):
                    x = self.values[i, j, k]
                    if not np.isnan(x):
                        yield u, t, v, float(x)

    def unit_index(self, unit: str) -> int:
        try:
            return self._uidx[unit]
        except KeyError:
            raise UnknownUnit(unit) from None

    def variable_index(self, variable: str) -> int:
        try:
            return self._vidx[variable]
        except KeyError:
            raise UnknownVariable(variable) from None

    def get(self, unit: str, time: int, variable: str) -> float | None:
        i, k = self.unit_index(unit), self.variable_index(variable)
        j = self._tidx.get(time)
        if j is None:
            return None
        x = self.values[i, j, k]
        return None if np.isnan(x) else float(x)

    def check_window(self, window) -> None:
        a, b = int(window[0]), int(window[1])
        if not self.times or a > b or a < self.times[0] or b > self.times[-1]:
            lo_hi = (self.times[0], self.times[-1]) if self.times else (None, None)
            raise WindowOutOfRange((a, b), lo_hi)

    def block(self, units, variable: str, window) -> np.ndarray:
        """Values for ``units`` x years in ``window`` (inclusive); NaN if absent.

        Years inside the window that the panel has no column for come back
        as NaN rows too.
        """
        self.check_window(window)
        k = self.variable_index(variable)
        rows = [self.unit_index(u) for u in units]
        years = range(int(window[0]), int(window[1]) + 1)
        out = np.full((len(rows), len(years)), np.nan)
        for c, t in enumerate(years):
            j = self._tidx.get(t)
            if j is not None:
                out[:, c] = self.values[rows, j, k]
        return out

    def scaled(self, factor: float) -> "Panel":
        return Panel(self.units, self.times, self.variables, self.values * factor)

    def with_cells(self, cells: Iterable[tuple[str, int, str, float]]) -> "Panel":
        """Copy with extra cells added (new keys only)."""
        return Panel.from_cells(list(self.cells()) + list(cells))

    def without_cell(self, unit: str, time: int, variable: str) -> "Panel":
        key = (unit, time, variable)
        return Panel.from_cells(c for c in self.cells() if c[:3] != key)


def _check_names(names, kind: str) -> None:
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate {kind} names")
    for n in names:
        if not isinstance(n, str) or not n:
            raise ValueError(f"{kind} names must be non-empty strings")
        if "," in n or "\n" in n or "\r" in n:
            raise ValueError(f"{kind} name {n!r} contains a separator")


def check_coverage(panel: Panel, units, variable: str, window) -> bool:
    """True iff every (unit, year, variable) in the inclusive window is present."""
    block = panel.block(units, variable, window)
    return not np.isnan(block).any()


def missing_cells(panel: Panel, units, variable: str, window) -> list[tuple[str, int]]:
    block = panel.block(units, variable, window)
    years = range(int(window[0]), int(window[1]) + 1)
    return [(units[i], years[j]) for i, j in zip(*np.nonzero(np.isnan(block)))]


def _read_text(source) -> str:
    if isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    elif isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            data = fh.read()
    else:
        data = source.read()
        if isinstance(data, str):
            return data
    return data.decode("utf-8")


def load_panel(source: BinaryIO | bytes | str | os.PathLike) -> Panel:
    """Parse a long-format CSV into a :class:`Panel`.

    ``source`` may be a binary stream, raw bytes, or a path. LF and CRLF line
    endings are accepted; fields are never quoted.
    """
    text = _read_text(source)
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise EmptyInput()
    if lines[0].rstrip("\r") != HEADER:
        raise MalformedRow(1, f"header must be {HEADER!r}")

    def rows():
        for n, raw in enumerate(lines[1:], start=2):
            parts = raw.rstrip("\r").split(",")
            if len(parts) != 4:
                raise MalformedRow(n, f"expected 4 fields, got {len(parts)}")
            unit, t, var, val = parts
            if not unit or not var:
                raise MalformedRow(n, "empty unit or variable")
            if not _INT_RE.match(t):
                raise MalformedRow(n, f"time {t!r} is not an integer")
            if not _DEC_RE.match(val):
                raise MalformedRow(n, f"value {val!r} is not a decimal number")
            x = float(val)
            if not np.isfinite(x):
                raise MalformedRow(n, f"value {val!r} is not finite")
            yield unit, int(t), var, x

    cells = list(rows())
    if not cells:
        raise EmptyInput()
    return Panel.from_cells(cells)


def dumps_panel(panel: Panel) -> bytes:
    out = io.StringIO()
    out.write(HEADER + "\n")
    for u, t, v, x in panel.cells():
        out.write(f"{u},{t},{v},{x!r}\n")
    return out.getvalue().encode("utf-8")


def write_panel(panel: Panel, dest: BinaryIO | str | os.PathLike) -> None:
    """Write the canonical CSV: rows ordered by unit, time, variable; LF endings."""
    data = dumps_panel(panel)
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "wb") as fh:
            fh.write(data)
    else:
        dest.write(data)
