"""Grid sampling, streamline extraction, and the on-disk artifact formats.

All files are plain text: CSV for field and convergence data, and a small
self-describing format for solved problems. Plot rendering stays out of this
module; the CSVs feed external tools (and the CLI's report step).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .elliptic import Lattice, make_context, make_lattice
from .errors import FormatError, IoFailure, SingularPoint, StagnationStall
from .mfs import (
    ChargeLayout,
    Circle,
    MfsSolution,
    ProblemSpec,
    complex_velocity,
    stream_function,
)

FIELD_HEADER = "x,y,u,v,psi,inside"
CONVERGENCE_HEADER = "N,epsilon,cond,seconds"
SOLUTION_MAGIC = "ellipt-flow-solution v1"

_NEIGHBOR_SHIFTS = [(m, n) for m in (-1, 0, 1) for n in (-1, 0, 1)]


@dataclass(frozen=True)
class FieldSample:
    """One grid point; u, v, psi are NaN when the point is inside an obstacle."""

    x: float
    y: float
    u: float
    v: float
    psi: float
    inside_obstacle: bool


@dataclass(frozen=True)
class Streamline:
    """An advected path along one stream-function level."""

    seed: complex
    points: np.ndarray
    psi_level: float


def fold_to_cell(z, lattice: Lattice):
    """Translate z by lattice vectors into the cell spanned by (omega1, omega2).

    Solves z = alpha*omega1 + beta*omega2 and keeps the fractional parts, so
    the result has cell coordinates in [0, 1); folding twice is the identity.
    """
    zz = np.asarray(z, dtype=complex)
    w1, w2 = lattice.omega1, lattice.omega2
    alpha = (np.conj(w2) * zz).imag / (np.conj(w2) * w1).imag
    beta = (np.conj(w1) * zz).imag / (np.conj(w1) * w2).imag
    folded = (alpha - np.floor(alpha)) * w1 + (beta - np.floor(beta)) * w2
    return folded.item() if zz.ndim == 0 else folded


def inside_any_obstacle(z, lattice: Lattice, obstacle):
    """Whether z lies in a lattice translate of the obstacle interior.

    The folded point is tested against the obstacle at the origin and its
    9-translate neighbourhood; that covers every case because the obstacle
    fits strictly inside one cell.
    """
    folded = np.asarray(fold_to_cell(z, lattice), dtype=complex)
    inside = np.zeros(folded.shape, dtype=bool)
    for m, n in _NEIGHBOR_SHIFTS:
        inside |= obstacle.contains(folded - (m * lattice.omega1 + n * lattice.omega2))
    return bool(inside) if np.ndim(z) == 0 else inside


def obstacle_distance(z, lattice: Lattice, obstacle):
    """Signed distance from z to the nearest obstacle translate."""
    folded = np.asarray(fold_to_cell(z, lattice), dtype=complex)
    dist = np.full(folded.shape, np.inf)
    for m, n in _NEIGHBOR_SHIFTS:
        dist = np.minimum(
            dist, obstacle.signed_distance(folded - (m * lattice.omega1 + n * lattice.omega2))
        )
    return float(dist) if np.ndim(z) == 0 else dist


def sample_grid(sol: MfsSolution, window, nx: int, ny: int) -> list[FieldSample]:
    """Row-major field samples over ``window`` = (x0, x1, y0, y1).

    Rows run along x at fixed y, starting from y0. Points folding into an
    obstacle translate (or within the singular radius of a charge translate)
    carry inside_obstacle=True with NaN field values.
    """
    if nx < 2 or ny < 2:
        raise ValueError("nx and ny must both be at least 2")
    x0, x1, y0, y1 = map(float, window)
    xs = np.linspace(x0, x1, nx)
    ys = np.linspace(y0, y1, ny)
    zz = (xs[None, :] + 1j * ys[:, None]).ravel()
    lattice = sol.context.lattice
    inside = inside_any_obstacle(zz, lattice, sol.problem.obstacle)
    psi = np.full(zz.shape, math.nan)
    uu = np.full(zz.shape, math.nan)
    vv = np.full(zz.shape, math.nan)
    outside = ~inside
    if outside.any():
        try:
            psi[outside] = stream_function(sol, zz[outside])
            fp = complex_velocity(sol, zz[outside])
            uu[outside] = fp.real
            vv[outside] = -fp.imag
        except SingularPoint:
            # a point skims a charge translate without being inside the
            # obstacle; reclassify those individually
            for i in np.flatnonzero(outside):
                try:
                    psi[i] = stream_function(sol, zz[i])
                    fp = complex_velocity(sol, zz[i])
                    uu[i], vv[i] = fp.real, -fp.imag
                except SingularPoint:
                    inside[i] = True
                    psi[i] = uu[i] = vv[i] = math.nan
    return [
        FieldSample(
            x=float(z.real),
            y=float(z.imag),
            u=float(u),
            v=float(v),
            psi=float(p),
            inside_obstacle=bool(flag),
        )
        for z, u, v, p, flag in zip(zz, uu, vv, psi, inside)
    ]


def trace_streamlines(
    sol: MfsSolution, window, n_lines: int, max_steps: int = 100_000
) -> list[Streamline]:
    """Advect streamlines seeded on the window's left edge.

    Seeds sit at equal stream-function increments between the edge extremes.
    Each path follows the normalised velocity with RK4, halving the step
    whenever the per-step psi drift exceeds 1e-8*U*r and re-projecting onto
    the level set, so |psi - level| stays within 1e-6*U*r at every recorded
    point. A path ends at the window boundary, after ``max_steps`` steps, or
    within 1e-3*r of an obstacle; a stalled seed yields an empty path.
    """
    if n_lines < 1:
        raise ValueError("n_lines must be at least 1")
    x0, x1, y0, y1 = map(float, window)
    lattice = sol.context.lattice
    obstacle = sol.problem.obstacle

    n_edge = max(512, 16 * n_lines)
    edge = x0 + 1j * np.linspace(y0, y1, n_edge)
    valid = ~inside_any_obstacle(edge, lattice, obstacle)
    if not valid.any():
        raise ValueError("the window's left edge lies entirely inside obstacles")
    psi_edge = np.full(n_edge, math.nan)
    psi_edge[valid] = stream_function(sol, edge[valid])
    lo = np.nanmin(psi_edge)
    hi = np.nanmax(psi_edge)
    levels = lo + (np.arange(n_lines) + 0.5) * (hi - lo) / n_lines

    lines = []
    for level in levels:
        seed = _seed_on_edge(sol, edge, psi_edge, valid, float(level))
        if seed is None:
            continue
        try:
            pts = _advect(sol, seed, float(level), (x0, x1, y0, y1), max_steps)
        except StagnationStall:
            pts = np.empty(0, dtype=complex)
        lines.append(Streamline(seed=seed, points=pts, psi_level=float(level)))
    return lines


def _seed_on_edge(sol, edge, psi_edge, valid, level):
    """First crossing of the level along the edge, refined by bisection."""
    for k in range(len(edge) - 1):
        if not (valid[k] and valid[k + 1]):
            continue
        fa, fb = psi_edge[k] - level, psi_edge[k + 1] - level
        if fa == 0.0:
            return complex(edge[k])
        if fa * fb < 0.0:
            a, b = edge[k], edge[k + 1]
            for _ in range(90):
                mid = 0.5 * (a + b)
                fm = stream_function(sol, mid) - level
                if fa * fm <= 0.0:
                    b = mid
                else:
                    a, fa = mid, fm
            return complex(0.5 * (a + b))
    return None


def _advect(sol, seed, level, window, max_steps):
    x0, x1, y0, y1 = window
    u_scale = sol.problem.flow_speed
    r = sol.problem.obstacle.max_radius
    lattice = sol.context.lattice
    obstacle = sol.problem.obstacle
    drift_tol = 1e-8 * u_scale * r
    stall_speed = 1e-12 * u_scale
    h = 0.05 * r
    h_min = 1e-7 * r
    h_max = 0.25 * min(r, abs(lattice.omega1), abs(lattice.omega2))

    def direction(z):
        fp = complex_velocity(sol, z)
        speed = abs(fp)
        if speed < stall_speed:
            raise StagnationStall(f"velocity magnitude {speed:.2e} below stall threshold")
        return fp.conjugate() / speed  # flow direction u + i v, normalised

    def project(z):
        # one Newton step toward psi = level along grad psi = i*(u+iv)
        fp = complex_velocity(sol, z)
        speed2 = fp.real**2 + fp.imag**2
        if speed2 < stall_speed**2:
            return z
        return z - (stream_function(sol, z) - level) * (1j * fp.conjugate()) / speed2

    direction(seed)  # raises StagnationStall for a dead seed
    pts = [seed]
    z = seed
    for _ in range(max_steps):
        try:
            k1 = direction(z)
            k2 = direction(z + 0.5 * h * k1)
            k3 = direction(z + 0.5 * h * k2)
            k4 = direction(z + h * k3)
        except StagnationStall:
            break
        z_new = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        drift = abs(stream_function(sol, z_new) - level)
        if drift > drift_tol and h > h_min:
            h = 0.5 * h
            continue
        z_new = project(z_new)
        if not (x0 <= z_new.real <= x1 and y0 <= z_new.imag <= y1):
            pts.append(project(_clip_to_window(z, z_new, window)))
            break
        pts.append(z_new)
        z = z_new
        if obstacle_distance(z, lattice, obstacle) <= 1e-3 * r:
            break
        if drift < 0.1 * drift_tol:
            h = min(1.3 * h, h_max)
    return np.array(pts, dtype=complex)


def _clip_to_window(z_in, z_out, window):
    """Point where the segment z_in -> z_out meets the window boundary."""
    x0, x1, y0, y1 = window
    t = 1.0
    dx, dy = z_out.real - z_in.real, z_out.imag - z_in.imag
    for lo, hi, p, d in ((x0, x1, z_in.real, dx), (y0, y1, z_in.imag, dy)):
        if d > 0 and p + d > hi:
            t = min(t, (hi - p) / d)
        elif d < 0 and p + d < lo:
            t = min(t, (lo - p) / d)
    return z_in + t * complex(dx, dy)


def _num(value) -> str:
    """Shortest decimal that round-trips the float exactly."""
    return repr(float(value))


def write_field_csv(samples: list[FieldSample], path) -> None:
    """Field CSV with header ``x,y,u,v,psi,inside`` (inside as 0/1)."""
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(FIELD_HEADER + "\n")
            for s in samples:
                fh.write(
                    f"{_num(s.x)},{_num(s.y)},{_num(s.u)},{_num(s.v)},"
                    f"{_num(s.psi)},{1 if s.inside_obstacle else 0}\n"
                )
    except OSError as exc:
        raise IoFailure(f"cannot write field CSV {path}: {exc}") from exc


def write_convergence_csv(records, path) -> None:
    """Convergence CSV with header ``N,epsilon,cond,seconds``."""
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(CONVERGENCE_HEADER + "\n")
            for rec in records:
                fh.write(
                    f"{rec.n_charges},{_num(rec.epsilon)},"
                    f"{_num(rec.condition_estimate)},{_num(rec.wall_time)}\n"
                )
    except OSError as exc:
        raise IoFailure(f"cannot write convergence CSV {path}: {exc}") from exc


def write_streamline_csv(line: Streamline, path) -> None:
    """Single streamline polyline as an ``x,y`` CSV."""
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write("x,y\n")
            for p in line.points:
                fh.write(f"{_num(p.real)},{_num(p.imag)}\n")
    except OSError as exc:
        raise IoFailure(f"cannot write streamline CSV {path}: {exc}") from exc


def _g17(value) -> str:
    return format(float(value), ".17g")


def write_solution(sol: MfsSolution, path) -> None:
    """Self-describing text dump of a solved circular-obstacle problem.

    Numbers carry 17 significant digits, so read_solution() reproduces the
    solution to the last bit.
    """
    obstacle = sol.problem.obstacle
    if not isinstance(obstacle, Circle):
        raise ValueError("only circular obstacles serialise in format v1")
    lat = sol.context.lattice
    n = len(sol.layout)
    lines = [
        SOLUTION_MAGIC,
        f"omega1 = {_g17(lat.omega1.real)} {_g17(lat.omega1.imag)}",
        f"omega2 = {_g17(lat.omega2.real)} {_g17(lat.omega2.imag)}",
        f"U = {_g17(sol.problem.flow_speed)}",
        f"r = {_g17(obstacle.radius)}",
        f"q = {_g17(sol.problem.placement_ratio)}",
        f"N = {n}",
        f"C = {_g17(sol.stream_constant)}",
        f"cond = {_g17(sol.condition_estimate)}",
        "charge_points",
        *(f"{_g17(z.real)} {_g17(z.imag)}" for z in sol.layout.charge_points),
        "collocation_points",
        *(f"{_g17(z.real)} {_g17(z.imag)}" for z in sol.layout.collocation_points),
        "charges",
        *(f"{_g17(q)}" for q in sol.charges),
    ]
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write solution file {path}: {exc}") from exc


class _LineReader:
    def __init__(self, lines):
        self.lines = lines
        self.index = 0

    def next(self) -> str:
        if self.index >= len(self.lines):
            raise FormatError("unexpected end of file", line=self.index + 1)
        self.index += 1
        return self.lines[self.index - 1]

    def scalar(self, key: str) -> float:
        raw = self.next()
        name, _, value = raw.partition("=")
        if name.strip() != key:
            raise FormatError(f"expected '{key} = ...', got {raw!r}", line=self.index)
        try:
            return float(value.strip())
        except ValueError as exc:
            raise FormatError(f"bad number for {key}: {value.strip()!r}", line=self.index) from exc

    def pair(self, key: str) -> complex:
        raw = self.next()
        name, _, value = raw.partition("=")
        if name.strip() != key:
            raise FormatError(f"expected '{key} = ...', got {raw!r}", line=self.index)
        return self._two_floats(value, raw)

    def marker(self, key: str) -> None:
        raw = self.next()
        if raw.strip() != key:
            raise FormatError(f"expected section '{key}', got {raw!r}", line=self.index)

    def point(self) -> complex:
        raw = self.next()
        return self._two_floats(raw, raw)

    def _two_floats(self, text, raw) -> complex:
        parts = text.split()
        if len(parts) != 2:
            raise FormatError(f"expected two numbers, got {raw!r}", line=self.index)
        try:
            return complex(float(parts[0]), float(parts[1]))
        except ValueError as exc:
            raise FormatError(f"bad number in {raw!r}", line=self.index) from exc


def read_solution(path) -> MfsSolution:
    """Inverse of write_solution(); rebuilds the lattice context on load."""
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read solution file {path}: {exc}") from exc
    reader = _LineReader(text.splitlines())
    if reader.next().strip() != SOLUTION_MAGIC:
        raise FormatError(f"missing '{SOLUTION_MAGIC}' header", line=1)
    omega1 = reader.pair("omega1")
    omega2 = reader.pair("omega2")
    flow_speed = reader.scalar("U")
    radius = reader.scalar("r")
    ratio = reader.scalar("q")
    n = reader.scalar("N")
    if n != int(n) or int(n) < 1:
        raise FormatError(f"N must be a positive integer, got {n}", line=reader.index)
    n = int(n)
    c_value = reader.scalar("C")
    cond = reader.scalar("cond")
    reader.marker("charge_points")
    zeta = np.array([reader.point() for _ in range(n)], dtype=complex)
    reader.marker("collocation_points")
    zcol = np.array([reader.point() for _ in range(n)], dtype=complex)
    reader.marker("charges")
    charges = np.empty(n)
    for i in range(n):
        raw = reader.next()
        try:
            charges[i] = float(raw.strip())
        except ValueError as exc:
            raise FormatError(f"bad charge value {raw!r}", line=reader.index) from exc

    lattice = make_lattice(omega1, omega2)
    ctx = make_context(lattice)
    spec = ProblemSpec(
        lattice=lattice,
        obstacle=Circle(radius),
        flow_speed=flow_speed,
        n_charges=max(n, 4),
        placement_ratio=ratio,
    )
    layout = ChargeLayout(charge_points=zeta, collocation_points=zcol)
    moment = complex(np.sum(charges * zeta))
    coef = flow_speed - 1j * ctx.eta1 * moment / (2.0 * math.pi * lattice.omega1)
    return MfsSolution(
        charges=charges,
        stream_constant=c_value,
        linear_coefficient=coef,
        charge_moment=moment,
        condition_estimate=cond,
        layout=layout,
        context=ctx,
        problem=spec,
    )
