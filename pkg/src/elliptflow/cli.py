"""Config-driven command line: solve | sweep | field | streamlines.

Runs are described by a flat ``key = value`` text file (complex values as
``re,im``); a handful of flags override config entries. Exit codes: 0 on
success, 1 on a config error (stderr names the offending key), 2 on a
numerical failure such as a degenerate lattice or a failed solve.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from .elliptic import make_context, make_lattice
from .errors import ElliptFlowError, InsufficientData
from .fieldio import (
    sample_grid,
    trace_streamlines,
    write_convergence_csv,
    write_field_csv,
    write_solution,
    write_streamline_csv,
)
from .harness import fit_decay_rate, sweep_N
from .mfs import Circle, ProblemSpec, boundary_residual, solve


class ConfigError(Exception):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"key '{key}': {message}")


@dataclass
class RunConfig:
    """Effective run parameters; omega and window are in units of r."""

    omega1: complex = 4 + 0j
    omega2: complex = 4j
    r: float = 1.0
    U: float = 1.0
    q: float = 0.7
    N: tuple[int, ...] = (64,)
    output_dir: str = "."
    grid_nx: int = 161
    grid_ny: int = 161
    window: tuple[float, float, float, float] = (-4.0, 4.0, -4.0, 4.0)
    streamlines: int = 18


def _parse_complex(key, text):
    parts = [p.strip() for p in str(text).split(",")]
    if len(parts) != 2:
        raise ConfigError(key, f"expected 're,im', got {text!r}")
    try:
        return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        raise ConfigError(key, f"expected 're,im', got {text!r}") from None


def _parse_float(key, text):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(key, f"expected a number, got {text!r}") from None


def _parse_int(key, text):
    try:
        return int(str(text).strip())
    except ValueError:
        raise ConfigError(key, f"expected an integer, got {text!r}") from None


def _parse_n_list(key, text):
    values = tuple(_parse_int(key, p) for p in str(text).split(","))
    if any(n < 4 for n in values):
        raise ConfigError(key, "every N must be at least 4")
    return tuple(sorted(set(values)))


def _parse_window(key, text):
    parts = str(text).split(",")
    if len(parts) != 4:
        raise ConfigError(key, f"expected 'x0,x1,y0,y1', got {text!r}")
    x0, x1, y0, y1 = (_parse_float(key, p) for p in parts)
    if not (x0 < x1 and y0 < y1):
        raise ConfigError(key, "window must satisfy x0 < x1 and y0 < y1")
    return (x0, x1, y0, y1)


_PARSERS = {
    "omega1": _parse_complex,
    "omega2": _parse_complex,
    "r": _parse_float,
    "U": _parse_float,
    "q": _parse_float,
    "N": _parse_n_list,
    "output_dir": lambda key, text: str(text).strip(),
    "grid_nx": _parse_int,
    "grid_ny": _parse_int,
    "window": _parse_window,
    "streamlines": _parse_int,
}


def load_config(path: str) -> dict:
    """Parse a ``key = value`` config file into typed entries."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc}") from exc
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(key or f"line {lineno}", f"expected 'key = value', got {raw!r}")
        if key not in _PARSERS:
            raise ConfigError(key, "unknown key")
        entries[key] = _PARSERS[key](key, value.strip())
    return entries


def _validate(cfg: RunConfig) -> None:
    if not cfg.r > 0:
        raise ConfigError("r", f"must be positive, got {cfg.r}")
    if not cfg.U > 0:
        raise ConfigError("U", f"must be positive, got {cfg.U}")
    if not 0.0 < cfg.q < 1.0:
        raise ConfigError("q", f"must be in (0, 1), got {cfg.q}")
    if cfg.grid_nx < 2 or cfg.grid_ny < 2:
        raise ConfigError("grid_nx", "grid must be at least 2x2")
    if cfg.streamlines < 1:
        raise ConfigError("streamlines", "must be at least 1")


def effective_config(args) -> RunConfig:
    """Merge defaults, config file, and flag overrides (flags win)."""
    entries = load_config(args.config) if args.config else {}
    if args.N is not None:
        entries["N"] = _parse_n_list("N", args.N)
    if args.q is not None:
        entries["q"] = _parse_float("q", args.q)
    if args.omega1 is not None:
        entries["omega1"] = _parse_complex("omega1", args.omega1)
    if args.omega2 is not None:
        entries["omega2"] = _parse_complex("omega2", args.omega2)
    if args.out is not None:
        entries["output_dir"] = args.out
    cfg = RunConfig(**entries)
    _validate(cfg)
    return cfg


def _echo(cfg: RunConfig) -> None:
    print("# effective configuration")
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if isinstance(value, complex):
            text = f"{value.real:g},{value.imag:g}"
        elif isinstance(value, tuple):
            text = ",".join(f"{v:g}" if isinstance(v, float) else str(v) for v in value)
        else:
            text = str(value)
        print(f"# {f.name} = {text}")


def _single_n(cfg: RunConfig) -> int:
    if len(cfg.N) != 1:
        raise ConfigError("N", "this subcommand expects a single value")
    return cfg.N[0]


def _problem(cfg: RunConfig, n: int) -> ProblemSpec:
    lattice = make_lattice(cfg.omega1 * cfg.r, cfg.omega2 * cfg.r)
    return ProblemSpec(
        lattice=lattice,
        obstacle=Circle(cfg.r),
        flow_speed=cfg.U,
        n_charges=n,
        placement_ratio=cfg.q,
    )


def _window_units(cfg: RunConfig):
    return tuple(v * cfg.r for v in cfg.window)


def _cmd_solve(cfg: RunConfig, out: Path) -> None:
    spec = _problem(cfg, _single_n(cfg))
    sol = solve(spec)
    eps = boundary_residual(sol, 4 * spec.n_charges)
    write_solution(sol, out / "solution.txt")
    print(f"epsilon = {eps!r}")
    print(f"cond = {sol.condition_estimate!r}")


def _cmd_sweep(cfg: RunConfig, out: Path) -> None:
    from . import plots

    spec = _problem(cfg, cfg.N[0])
    records = sweep_N(spec, list(cfg.N))
    write_convergence_csv(records, out / "convergence.csv")
    try:
        fit = fit_decay_rate(records)
        print(f"rate = {fit.rate!r}")
    except InsufficientData:
        fit = None
        print("rate = nan")
    plots.render_convergence(records, fit, out / "convergence.png")


def _cmd_field(cfg: RunConfig, out: Path) -> None:
    from . import plots

    sol = solve(_problem(cfg, _single_n(cfg)))
    window = _window_units(cfg)
    samples = sample_grid(sol, window, cfg.grid_nx, cfg.grid_ny)
    write_field_csv(samples, out / "field.csv")
    plots.render_field(
        samples, cfg.grid_nx, cfg.grid_ny, window, sol.context.lattice, cfg.r, out / "field.png"
    )


def _cmd_streamlines(cfg: RunConfig, out: Path) -> None:
    from . import plots

    sol = solve(_problem(cfg, _single_n(cfg)))
    window = _window_units(cfg)
    lines = trace_streamlines(sol, window, cfg.streamlines)
    index_rows = []
    for i, line in enumerate(lines):
        name = f"streamline_{i:03d}.csv"
        write_streamline_csv(line, out / name)
        index_rows.append(
            f"{name},{line.psi_level!r},{len(line.points)},"
            f"{line.seed.real!r},{line.seed.imag!r}"
        )
    with open(out / "streamlines_index.csv", "w", newline="\n") as fh:
        fh.write("file,psi_level,points,seed_x,seed_y\n")
        for row in index_rows:
            fh.write(row + "\n")
    plots.render_streamlines(lines, window, sol.context.lattice, cfg.r, out / "streamlines.png")


_COMMANDS = {
    "solve": _cmd_solve,
    "sweep": _cmd_sweep,
    "field": _cmd_field,
    "streamlines": _cmd_streamlines,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="elliptflow",
        description="Potential flow past a doubly-periodic obstacle array.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="path to a 'key = value' run description")
        p.add_argument("--N", help="charge count, or comma list for sweeps")
        p.add_argument("--q", help="charge placement ratio in (0, 1)")
        p.add_argument("--omega1", help="first period as 're,im' in units of r")
        p.add_argument("--omega2", help="second period as 're,im' in units of r")
        p.add_argument("--out", help="output directory")
    return parser


def run(argv) -> int:
    """Entry point used by tests; returns the process exit code."""
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = effective_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    _echo(cfg)
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        _COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except ElliptFlowError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"IoFailure: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
