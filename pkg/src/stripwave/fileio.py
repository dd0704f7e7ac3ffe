"""Run configuration and the serialized file formats.

Config files are flat ``key = value`` text with ``#`` comments; unknown keys
are errors so tolerance typos cannot silently corrupt a run.  Every output
file embeds the effective config and the code version in its comment header,
and all floats are written as shortest round-trip decimals, so re-running a
command with the same config reproduces files byte for byte.
"""

import math
import warnings
from dataclasses import dataclass, fields, replace

import numpy as np

from . import __version__
from .continuation import SolverOptions
from .errors import ConfigError, ParameterError
from .residual import PhysicalParams

_SIGNS = {"+": 1, "-": -1, "+1": 1, "-1": -1, "1": 1}


@dataclass
class RunConfig:
    # physical parameters and head offset
    g: float = 9.8
    A: float = 0.0
    B: float = 1.0
    sigma: float = 0.1
    h: float = 1.0
    beta: float = 0.0
    # discretization
    N: int = 64
    M: int = 512
    L: int = 129
    # tolerances
    newton_tol: float = 1e-11
    kernel_tol: float = 1e-8
    stagnation_tol: float = 1e-6
    fd_step: float = 1e-7
    # mode selection
    n: int = 1
    m: int = 2
    sign: int = 1
    a: float = math.sqrt(0.5)
    b: float = math.sqrt(0.5)
    # continuation controls
    s0: float = 1e-3
    ds: float = 1e-3
    K: int = 20
    # detection window and trace kind
    n_max: int = 8
    lambda_min: float = 0.0
    lambda_max: float = 10.0
    kind: str = "one-mode"
    window: float = 0.5
    out_dir: str = "out"

    def params(self):
        try:
            return PhysicalParams(self.g, self.A, self.B, self.sigma, self.h)
        except ParameterError as exc:
            raise ConfigError(str(exc)) from exc

    def options(self):
        return SolverOptions(n_modes=self.N, grid_size=self.M,
                             newton_tol=self.newton_tol,
                             fd_step=self.fd_step, kernel_tol=self.kernel_tol)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key, raw):
    kind = _FIELD_TYPES[key]
    if key == "sign":
        if raw not in _SIGNS:
            raise ConfigError(f"sign must be '+' or '-', got {raw!r}")
        return _SIGNS[raw]
    if kind in (int, "int"):
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"key {key!r} needs an integer, got {raw!r}") from exc
    if kind in (float, "float"):
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"key {key!r} needs a number, got {raw!r}") from exc
    return raw


def parse_config_text(text):
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _convert(key, raw)
    return validate_config(RunConfig(**values))


def parse_config(path):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text)


def validate_config(cfg):
    cfg.params()  # physical validation
    for key in ("newton_tol", "kernel_tol", "stagnation_tol", "fd_step"):
        if getattr(cfg, key) <= 0:
            raise ConfigError(f"{key} must be positive")
    if cfg.M < 4 or cfg.M & (cfg.M - 1):
        raise ConfigError(f"M must be a power of two >= 4, got {cfg.M}")
    if cfg.N < 1 or 2 * cfg.N > cfg.M:
        raise ConfigError(f"need N <= M/2, got N={cfg.N}, M={cfg.M}")
    if cfg.L < 2:
        raise ConfigError(f"need at least 2 vertical levels, got L={cfg.L}")
    if cfg.n < 1 or cfg.m < 1:
        raise ConfigError("mode indices must be >= 1")
    if cfg.K < 0:
        raise ConfigError("continuation count K must be >= 0")
    for key in ("s0", "ds", "window"):
        if getattr(cfg, key) <= 0:
            raise ConfigError(f"{key} must be positive")
    if cfg.n_max < 0:
        raise ConfigError("n_max must be >= 0")
    if not cfg.lambda_min < cfg.lambda_max:
        raise ConfigError("need lambda_min < lambda_max")
    if cfg.kind not in ("one-mode", "trivial"):
        raise ConfigError(f"kind must be 'one-mode' or 'trivial', got {cfg.kind!r}")
    norm = cfg.a * cfg.a + cfg.b * cfg.b
    if abs(norm - 1.0) >= 1e-6:
        raise ConfigError(
            f"two-mode direction must satisfy a^2 + b^2 = 1, got {norm!r}")
    if abs(norm - 1.0) > 1e-12:
        warnings.warn("normalizing two-mode direction (a, b)", stacklevel=2)
        scale = math.sqrt(norm)
        cfg = replace(cfg, a=cfg.a / scale, b=cfg.b / scale)
    return cfg


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def config_lines(cfg):
    return [f"{f.name} = {_fmt(getattr(cfg, f.name))}" for f in fields(RunConfig)]


def _header(file_kind, cfg, extra=()):
    lines = [f"# stripwave {file_kind} file", f"# version = {__version__}"]
    lines += [f"# {item}" for item in extra]
    lines += [f"# config: {item}" for item in config_lines(cfg)]
    return lines


# branch files -------------------------------------------------------------

S_PARAM_NOTE = ("s-parameter = pinned cosine amplitude a_n (one-mode), "
                "kernel scale (two-mode), lambda offset (trivial)")


def write_branch(path, branch, cfg, n_modes):
    columns = ["index", "s", "lambda", "beta", "mu", "Q", "m", "amp_inf",
               "residual_inf", "leading_eig", "stability"]
    columns += [f"a_{k}" for k in range(1, n_modes + 1)]
    lines = _header("branch", cfg,
                    extra=[f"kind = {branch.kind.label()}", S_PARAM_NOTE,
                           f"n_modes = {n_modes}"])
    lines.append(",".join(columns))
    from .residual import to_coefficients
    for idx, pt in enumerate(branch.points):
        st = pt.state
        eig = pt.leading_eig if pt.leading_eig is not None else float("nan")
        row = [str(idx), repr(float(pt.s)), repr(st.lam), repr(st.beta),
               repr(st.mu), repr(pt.derived.Q), repr(pt.derived.m),
               repr(float(pt.amp_inf)), repr(float(pt.residual_inf)),
               repr(float(eig)), pt.stability]
        row += [repr(float(c)) for c in to_coefficients(st.w, n_modes)]
        lines.append(",".join(row))
    if branch.failure:
        lines.append(f"# failure after index {len(branch.points) - 1}: "
                     f"{branch.failure}")
    _write_lines(path, lines)


class BranchFile:
    """Parsed branch file: header metadata plus column arrays."""

    __slots__ = ("meta", "config", "columns", "data", "coeffs", "failure")

    def __init__(self, meta, config, columns, data, coeffs, failure):
        self.meta = meta
        self.config = config
        self.columns = columns
        self.data = data
        self.coeffs = coeffs
        self.failure = failure

    @property
    def n_rows(self):
        return self.coeffs.shape[0]

    def column(self, name):
        return self.data[name]


def read_branch(path):
    meta, config, rows, failure, columns = {}, {}, [], None, None
    stability = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("config:"):
                    key, _, raw = body[len("config:"):].partition("=")
                    config[key.strip()] = raw.strip()
                elif body.startswith("failure"):
                    failure = body
                elif "=" in body:
                    key, _, raw = body.partition("=")
                    meta[key.strip()] = raw.strip()
                continue
            if columns is None:
                columns = line.split(",")
                continue
            parts = line.split(",")
            stability.append(parts[columns.index("stability")])
            rows.append([float(p) if i != columns.index("stability") else np.nan
                         for i, p in enumerate(parts)])
    if columns is None:
        raise ConfigError(f"branch file {path} has no column header")
    table = np.array(rows, dtype=float) if rows else np.empty((0, len(columns)))
    first_coeff = columns.index("a_1")
    data = {name: table[:, i] for i, name in enumerate(columns[:first_coeff])}
    data["stability"] = stability
    return BranchFile(meta, config, columns, data, table[:, first_coeff:],
                      failure)


# field files ---------------------------------------------------------------

def write_field(path, field, name, cfg):
    lines = _header("field", cfg,
                    extra=[f"field = {name}", f"M = {field.grid_size}",
                           f"L = {field.levels}", f"h = {field.h!r}"])
    for row in field.values:
        lines.append(" ".join(repr(float(v)) for v in row))
    _write_lines(path, lines)


def read_field(path):
    meta, rows = {}, []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body and not body.startswith("config:"):
                    key, _, raw = body.partition("=")
                    meta[key.strip()] = raw.strip()
                continue
            rows.append([float(v) for v in line.split()])
    values = np.array(rows, dtype=float)
    if values.ndim != 2 or values.shape[0] != int(meta.get("L", -1)) \
            or values.shape[1] != int(meta.get("M", -1)):
        raise ConfigError(f"field file {path} is inconsistent with its header")
    return meta, values


# stagnation and critical-layer files ---------------------------------------

def write_stagnation(path, points, cfg):
    lines = _header("stagnation", cfg)
    lines.append("x,y,X,Y,grad_norm,psi,refined,kind")
    for pt in points:
        lines.append(",".join([repr(float(pt.x)), repr(float(pt.y)),
                               repr(float(pt.X)), repr(float(pt.Y)),
                               repr(float(pt.grad_norm)), repr(float(pt.psi)),
                               str(int(pt.refined)), pt.kind]))
    _write_lines(path, lines)


def read_stagnation(path):
    rows = []
    with open(path, "r", encoding="utf-8") as handle:
        header = None
        for line in handle:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
                continue
            parts = line.split(",")
            rows.append({
                "x": float(parts[0]), "y": float(parts[1]),
                "X": float(parts[2]), "Y": float(parts[3]),
                "grad_norm": float(parts[4]), "psi": float(parts[5]),
                "refined": bool(int(parts[6])), "kind": parts[7]})
    return rows


def write_critical_layers(path, layers, cfg):
    lines = _header("critical-layer", cfg)
    for i, layer in enumerate(layers):
        lines.append(f"# layer {i}: level = {layer.level!r}, "
                     f"components = {len(layer.curves)}, "
                     f"closed_cells = {int(layer.has_closed_cells)}")
        for j, (curve, phys, closed) in enumerate(
                zip(layer.curves, layer.physical, layer.closed)):
            lines.append(f"# component {j}: closed = {int(closed)}, "
                         f"points = {curve.shape[0]}")
            for (sx, sy), (px, py) in zip(curve, phys):
                lines.append(f"{sx!r},{sy!r},{px!r},{py!r}")
            lines.append("")
    _write_lines(path, lines)


def _write_lines(path, lines):
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines))
        handle.write("\n")
