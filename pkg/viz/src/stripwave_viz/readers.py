"""Parsers for the stripwave file formats.

All formats carry '#' comment headers with `key = value` metadata (config
entries are prefixed `config:`), then plain delimited data.  Parse failures
report the file and line.
"""

import numpy as np


class ReaderError(ValueError):
    """Malformed input file; the message carries file and line context."""


def _fail(path, lineno, message):
    raise ReaderError(f"{path}:{lineno}: {message}")


def _split_header(line):
    body = line[1:].strip()
    if body.startswith("config:"):
        key, _, raw = body[len("config:"):].partition("=")
        return "config", key.strip(), raw.strip()
    if "=" in body:
        key, _, raw = body.partition("=")
        return "meta", key.strip(), raw.strip()
    return "comment", body, None


class BranchTable:
    """One parsed branch file."""

    def __init__(self, path):
        self.path = str(path)
        self.meta = {}
        self.config = {}
        self.columns = None
        self.stability = []
        rows = []
        with open(path, "r", encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                if line.startswith("#"):
                    kind, key, raw = _split_header(line)
                    if kind == "config":
                        self.config[key] = raw
                    elif kind == "meta":
                        self.meta[key] = raw
                    continue
                if self.columns is None:
                    self.columns = line.split(",")
                    if "lambda" not in self.columns:
                        _fail(path, lineno, "missing 'lambda' column")
                    self._stability_index = self.columns.index("stability")
                    continue
                parts = line.split(",")
                if len(parts) != len(self.columns):
                    _fail(path, lineno,
                          f"expected {len(self.columns)} fields, got {len(parts)}")
                self.stability.append(parts[self._stability_index])
                try:
                    rows.append([0.0 if i == self._stability_index else float(p)
                                 for i, p in enumerate(parts)])
                except ValueError as exc:
                    _fail(path, lineno, f"bad number: {exc}")
        if self.columns is None:
            _fail(path, 0, "header-only file: no column header found")
        self.table = (np.array(rows) if rows
                      else np.empty((0, len(self.columns))))
        if not rows:
            _fail(path, 0, "header-only file: no data rows")

    def column(self, name):
        try:
            return self.table[:, self.columns.index(name)]
        except ValueError:
            raise ReaderError(f"{self.path}: no column {name!r}") from None

    @property
    def coefficients(self):
        first = self.columns.index("a_1")
        return self.table[:, first:]

    @property
    def kind(self):
        return self.meta.get("kind", "")

    @property
    def n_rows(self):
        return self.table.shape[0]


class FieldGrid:
    """One parsed strip-field file with reconstructed coordinates."""

    def __init__(self, path):
        self.path = str(path)
        self.meta = {}
        rows = []
        with open(path, "r", encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                if line.startswith("#"):
                    kind, key, raw = _split_header(line)
                    if kind == "meta":
                        self.meta[key] = raw
                    continue
                try:
                    rows.append([float(v) for v in line.split()])
                except ValueError as exc:
                    _fail(path, lineno, f"bad number: {exc}")
        for key in ("M", "L", "h"):
            if key not in self.meta:
                _fail(path, 0, f"missing '{key}' in header")
        self.grid_size = int(self.meta["M"])
        self.levels = int(self.meta["L"])
        self.h = float(self.meta["h"])
        self.name = self.meta.get("field", "?")
        self.values = np.array(rows)
        if self.values.shape != (self.levels, self.grid_size):
            _fail(path, 0,
                  f"value grid {self.values.shape} does not match header "
                  f"(L={self.levels}, M={self.grid_size})")

    @property
    def x(self):
        return 2.0 * np.pi * np.arange(self.grid_size) / self.grid_size

    @property
    def y(self):
        return np.linspace(-self.h, 0.0, self.levels)


def read_stagnation(path):
    """Rows of a stagnation file as dicts."""
    rows = []
    header = None
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if header is None:
                header = parts
                continue
            if len(parts) != len(header):
                _fail(path, lineno, "field count mismatch")
            row = {}
            for key, value in zip(header, parts):
                if key == "kind":
                    row[key] = value
                elif key == "refined":
                    row[key] = bool(int(value))
                else:
                    try:
                        row[key] = float(value)
                    except ValueError as exc:
                        _fail(path, lineno, f"bad number: {exc}")
            rows.append(row)
    if header is None:
        _fail(path, 0, "header-only file: no column header found")
    return rows


def read_critical_layers(path):
    """List of layers: dicts with 'level' and 'components' [(closed, array)]."""
    layers = []
    current = None
    points = []
    closed = False

    def flush_component():
        nonlocal points
        if current is not None and points:
            current["components"].append((closed, np.array(points)))
        points = []

    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line:
                flush_component()
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("layer"):
                    flush_component()
                    try:
                        level = float(body.split("level =")[1].split(",")[0])
                    except (IndexError, ValueError):
                        _fail(path, lineno, "malformed layer header")
                    current = {"level": level, "components": []}
                    layers.append(current)
                elif body.startswith("component"):
                    flush_component()
                    closed = "closed = 1" in body
                continue
            try:
                points.append([float(v) for v in line.split(",")])
            except ValueError as exc:
                _fail(path, lineno, f"bad number: {exc}")
    flush_component()
    return layers
