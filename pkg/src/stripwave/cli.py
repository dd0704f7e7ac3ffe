"""Command-line entry points.

Subcommands: dispersion, resonance, trace, two-mode, flow.  Exit codes:
0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from .continuation import (BranchKind, continue_branch, detect_bifurcations,
                           switch_branch, track_eigenvalue, trivial_branch,
                           two_mode_branch)
from .dispersion import (bifurcation_points, lambda_second_derivative,
                         resonance_beta, transversality)
from .errors import ConfigError, StripwaveError
from .fileio import (RunConfig, parse_config, read_branch, write_branch,
                     write_critical_layers, write_field, write_stagnation)
from .flowfield import FlowField, critical_layer, find_stagnation
from .residual import WaveState
from .spectral import CosineSpectrum, from_spectrum
from . import __version__


def _ensure_out(path):
    os.makedirs(path, exist_ok=True)
    return path


def _write_table(path, header_lines, columns, rows):
    lines = list(header_lines)
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(repr(float(v)) if isinstance(v, float) else str(v)
                              for v in row))
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines))
        handle.write("\n")


def _table_header(name, cfg):
    from .fileio import config_lines
    lines = [f"# stripwave {name} file", f"# version = {__version__}"]
    lines += [f"# config: {item}" for item in config_lines(cfg)]
    return lines


def cmd_dispersion(cfg, out_dir):
    params = cfg.params()
    rows = []
    for n in range(1, cfg.n_max + 1):
        point = bifurcation_points(n, cfg.beta, params)
        rows.append([
            n, point.t_n, point.lambda_plus, point.lambda_minus,
            transversality(n, +1, cfg.beta, params),
            transversality(n, -1, cfg.beta, params),
            lambda_second_derivative(n, +1, cfg.beta, params),
            lambda_second_derivative(n, -1, cfg.beta, params),
        ])
    path = os.path.join(out_dir, "dispersion.csv")
    _write_table(path, _table_header("dispersion", cfg),
                 ["n", "T_n", "lambda_plus", "lambda_minus",
                  "kappa_prime_plus", "kappa_prime_minus",
                  "lambda_second_plus", "lambda_second_minus"], rows)
    return [path]


def cmd_resonance(cfg, out_dir):
    if cfg.sigma <= 0:
        raise ConfigError(
            "resonance requires sigma > 0: the resonance value divides by "
            "sigma (capillary effects produce the root collision)")
    params = cfg.params()
    rows = []
    for n in range(1, cfg.n_max + 1):
        for m in range(1, cfg.n_max + 1):
            if n == m:
                continue
            res = resonance_beta(n, m, params)
            rows.append([n, m, res.beta_nm, res.beta_star_plus,
                         res.beta_star_minus, res.lambda_at_plus,
                         res.lambda_at_minus])
    path = os.path.join(out_dir, "resonance.csv")
    _write_table(path, _table_header("resonance", cfg),
                 ["n", "m", "beta_nm", "beta_star_plus", "beta_star_minus",
                  "lambda_at_plus", "lambda_at_minus"], rows)
    return [path]


def cmd_trace(cfg, out_dir):
    params = cfg.params()
    opts = cfg.options()
    if cfg.kind == "trivial":
        branch = trivial_branch(cfg.n, cfg.sign, cfg.beta, cfg.window, cfg.K,
                                params, opts)
    else:
        detected = detect_bifurcations(max(cfg.n, cfg.n_max), cfg.beta,
                                       (cfg.lambda_min, cfg.lambda_max), params)
        wanted = [item for item in detected
                  if item[0] == cfg.n and item[2] == cfg.sign]
        if not wanted:
            raise ConfigError(
                f"no mode-{cfg.n} bifurcation with sign {cfg.sign:+d} in "
                f"lambda range ({cfg.lambda_min}, {cfg.lambda_max})")
        start = switch_branch(cfg.n, cfg.sign, cfg.beta, cfg.s0, params, opts)
        kind = BranchKind.one_mode(cfg.n, cfg.sign)
        branch = continue_branch(start, params, kind, cfg.ds, cfg.K, opts)
    branch = track_eigenvalue(branch, params, opts)
    path = os.path.join(out_dir, "trace.csv")
    write_branch(path, branch, cfg, opts.n_modes)
    return [path]


def cmd_two_mode(cfg, out_dir):
    if cfg.sigma <= 0:
        raise ConfigError("two-mode branches require sigma > 0")
    if cfg.a * cfg.b == 0:
        raise ConfigError("two-mode direction needs nontrivial a and b")
    if cfg.n == cfg.m:
        raise ConfigError("two-mode branch needs distinct modes n != m")
    params = cfg.params()
    opts = cfg.options()
    start = two_mode_branch(cfg.n, cfg.m, cfg.sign, cfg.a, cfg.b, cfg.s0,
                            params, opts)
    kind = BranchKind.two_mode(cfg.n, cfg.m, cfg.sign, cfg.a, cfg.b)
    branch = continue_branch(start, params, kind, cfg.ds, cfg.K, opts)
    branch = track_eigenvalue(branch, params, opts)
    path = os.path.join(out_dir, "two_mode.csv")
    write_branch(path, branch, cfg, opts.n_modes)
    return [path]


def cmd_flow(cfg, out_dir, branch_path, index):
    if branch_path is None:
        raise ConfigError("flow needs --branch <branch file>")
    if index is None:
        raise ConfigError("flow needs --index <row index>")
    branch = read_branch(branch_path)
    if index < 0 or index >= branch.n_rows:
        raise ConfigError(
            f"index {index} out of range: branch has {branch.n_rows} rows")
    merged = _merge_branch_config(cfg, branch)
    params = merged.params()
    coeffs = branch.coeffs[index]
    w = from_spectrum(CosineSpectrum(0.0, coeffs), merged.M)
    state = WaveState(branch.column("lambda")[index],
                      branch.column("beta")[index],
                      branch.column("mu")[index], w)
    flow = FlowField(state, params)
    fields = flow.sample(merged.L)
    paths = []
    for name in ("U", "V", "psi", "psiX", "psiY"):
        path = os.path.join(out_dir, f"flow_{name}.csv")
        write_field(path, fields[name], name, merged)
        paths.append(path)
    stagnation = find_stagnation(state, params, merged.L,
                                 merged.stagnation_tol)
    path = os.path.join(out_dir, "stagnation.csv")
    write_stagnation(path, stagnation, merged)
    paths.append(path)
    layers = critical_layer(state, params, stagnation, merged.L)
    path = os.path.join(out_dir, "critical_layers.csv")
    write_critical_layers(path, layers, merged)
    paths.append(path)
    return paths


def _merge_branch_config(cfg, branch):
    """Physical parameters, M and N come from the branch file; sampling and
    tolerance knobs from the command's own config."""
    updates = {}
    for key in ("g", "A", "B", "sigma", "h", "beta"):
        if key in branch.config:
            updates[key] = float(branch.config[key])
    for key in ("N", "M"):
        if key in branch.config:
            updates[key] = int(branch.config[key])
    return replace(cfg, **updates)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="stripwave",
        description="Steady stratified capillary-gravity waves in the "
                    "conformal strip: dispersion tables, branch continuation "
                    "and flow reconstruction.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
            ("dispersion", "tabulate bifurcation points and branch curvature"),
            ("resonance", "tabulate two-mode resonance values"),
            ("trace", "continue a one-mode branch (or sweep the trivial one)"),
            ("two-mode", "continue a two-mode branch from a resonance"),
            ("flow", "reconstruct flow fields for a stored branch point")]:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", help="path to a key = value config file")
        cmd.add_argument("--out", help="output directory (default from config)")
        if name == "flow":
            cmd.add_argument("--branch", help="branch file to read")
            cmd.add_argument("--index", type=int, help="row index to expand")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config) if args.config else RunConfig()
        out_dir = _ensure_out(args.out if args.out else cfg.out_dir)
        if args.command == "dispersion":
            paths = cmd_dispersion(cfg, out_dir)
        elif args.command == "resonance":
            paths = cmd_resonance(cfg, out_dir)
        elif args.command == "trace":
            paths = cmd_trace(cfg, out_dir)
        elif args.command == "two-mode":
            paths = cmd_two_mode(cfg, out_dir)
        else:
            paths = cmd_flow(cfg, out_dir, args.branch, args.index)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except StripwaveError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
