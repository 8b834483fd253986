"""Convergence sweeps, decay-rate fitting, and oracle comparisons."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .elliptic import EllipticContext, make_context, make_lattice
from .errors import ElliptFlowError, InsufficientData
from .mfs import (
    Circle,
    ProblemSpec,
    analytic_isolated_cylinder,
    assemble_system,
    boundary_residual,
    build_layout,
    complex_velocity,
    solve_system,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConvergenceRecord:
    """One sweep row: charge count, boundary error, conditioning, timing."""

    n_charges: int
    epsilon: float
    condition_estimate: float
    wall_time: float

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon >= 0.0):
            raise InsufficientData(f"epsilon must be finite and >= 0, got {self.epsilon}")


@dataclass(frozen=True)
class DecayFit:
    """Least-squares exponential fit epsilon ~ prefactor * rate**N."""

    rate: float
    prefactor: float
    fit_range: tuple[int, int]
    rms_log_residual: float


def sweep_N(
    spec_template: ProblemSpec,
    n_values: list[int],
    context: EllipticContext | None = None,
    samples_per_charge: int = 4,
) -> list[ConvergenceRecord]:
    """Solve the template problem for each N and record the boundary error.

    Per-N failures are logged and left out of the result rather than
    aborting the sweep. Records come back in input order.
    """
    if any(b <= a for a, b in zip(n_values, n_values[1:])):
        raise ValueError("n_values must be strictly increasing")
    if any(n < 4 for n in n_values):
        raise ValueError("every N must be at least 4")
    ctx = context if context is not None else make_context(spec_template.lattice)
    records = []
    for n in n_values:
        start = time.perf_counter()
        try:
            spec = replace(spec_template, n_charges=int(n))
            layout = build_layout(spec)
            matrix, rhs = assemble_system(layout, ctx, spec)
            sol = solve_system(matrix, rhs, layout, ctx, spec)
            eps = boundary_residual(sol, samples_per_charge * int(n))
        except ElliptFlowError as exc:
            log.warning("sweep entry N=%d failed and was skipped: %s", n, exc)
            continue
        records.append(
            ConvergenceRecord(
                n_charges=int(n),
                epsilon=float(eps),
                condition_estimate=sol.condition_estimate,
                wall_time=time.perf_counter() - start,
            )
        )
    return records


def fit_decay_rate(records: list[ConvergenceRecord], floor: float = 1e-12) -> DecayFit:
    """Fit a line through (N, log epsilon) and report rate = exp(slope).

    Records at or below ``floor`` sit in the rounding plateau and would bias
    the rate upward, so they are excluded; at least 4 usable records are
    required. The fit is permutation-invariant (records are sorted first).
    """
    usable = sorted(
        (r for r in records if r.epsilon > floor), key=lambda r: (r.n_charges, r.epsilon)
    )
    if len(usable) < 4:
        raise InsufficientData(
            f"need at least 4 records above the floor {floor:g}, got {len(usable)}"
        )
    n = np.array([r.n_charges for r in usable], dtype=float)
    y = np.log([r.epsilon for r in usable])
    slope, intercept = np.polyfit(n, y, 1)
    if not slope < 0.0:
        raise InsufficientData("records do not exhibit decay; cannot fit a rate")
    resid = y - (slope * n + intercept)
    return DecayFit(
        rate=float(np.exp(slope)),
        prefactor=float(np.exp(intercept)),
        fit_range=(int(n.min()), int(n.max())),
        rms_log_residual=float(np.sqrt(np.mean(resid**2))),
    )


def dilute_limit_check(
    r: float, scale: float, flow_speed: float, n_charges: int, placement_ratio: float = 0.7
) -> float:
    """Max relative deviation from the isolated-cylinder velocity on |z| = 2r.

    With periods (scale*r, i*scale*r) the lattice interaction is an
    O(1/scale^2) perturbation, so this decays quadratically in scale.
    """
    if scale < 10:
        raise ValueError(f"scale must be >= 10 for a meaningful dilute limit, got {scale}")
    lattice = make_lattice(scale * r, 1j * scale * r)
    spec = ProblemSpec(
        lattice=lattice,
        obstacle=Circle(r),
        flow_speed=flow_speed,
        n_charges=n_charges,
        placement_ratio=placement_ratio,
    )
    ctx = make_context(lattice)
    layout = build_layout(spec)
    sol = solve_system(*assemble_system(layout, ctx, spec), layout, ctx, spec)
    pts = 2.0 * r * np.exp(2j * math.pi * np.arange(64) / 64)
    deviation = complex_velocity(sol, pts) - analytic_isolated_cylinder(pts, flow_speed, r)
    return float(np.max(np.abs(deviation)) / flow_speed)
