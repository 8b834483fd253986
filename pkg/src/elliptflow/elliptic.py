"""Doubly-periodic special functions on a two-dimensional period lattice.

The lattice is the point set {m*omega1 + n*omega2}. All series evaluation
runs through the Jacobi theta-1 q-series on a Lagrange-reduced basis, which
keeps |q| bounded away from 1 for arbitrarily skewed period pairs, and every
evaluation point is first translated into the centred fundamental cell so
the series converges in a handful of terms uniformly over the plane.

Conventions (full periods, not half periods):

    sigma(z) = (b1/pi) * exp(eta_b1 * z**2 / (2*b1)) * theta1(pi*z/b1) / theta1'(0)
    eta_b1   = -(pi**2 / (3*b1)) * theta1'''(0) / theta1'(0)
    eta_b2   = (eta_b1*b2 - 2*pi*i) / b1                    (Legendre relation)

with (b1, b2) the reduced basis. The quasi-period constants are defined by

    sigma(z + omega_k) = -exp(eta_k * (z + omega_k/2)) * sigma(z),  k = 1, 2

which fixes eta_k = 2*zeta_w(omega_k/2); they transform linearly under a
unimodular change of basis.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLattice, Overflow, SingularPoint

# log(DBL_MAX) with a little headroom for the O(1) prefactors
_LOG_HUGE = 709.0

_DEFAULT_TOLERANCE = 1e-14
_DEFAULT_SERIES_TERMS = 64

# deterministic cell points (alpha, beta coefficients) for construction self-checks
_SELFCHECK_COEFFS = ((0.23, 0.31), (0.71, 0.13), (0.39, 0.77))


@dataclass(frozen=True)
class Lattice:
    """A period pair together with the reduced basis used for series work.

    ``reduced_basis`` spans the same point set as (omega1, omega2); the
    integer ``basis_map`` rows (a, b), (c, d) satisfy
    ``b1 = a*omega1 + b*omega2``, ``b2 = c*omega1 + d*omega2`` with
    determinant +1, so orientation is preserved.
    """

    omega1: complex
    omega2: complex
    tau: complex
    nome: complex
    reduced_basis: tuple[complex, complex]
    basis_map: tuple[tuple[int, int], tuple[int, int]]

    @property
    def reduced_tau(self) -> complex:
        b1, b2 = self.reduced_basis
        return b2 / b1

    @property
    def reduced_nome(self) -> complex:
        return cmath.exp(1j * math.pi * self.reduced_tau)

    @property
    def min_spacing(self) -> float:
        """Distance between nearest distinct lattice points."""
        return abs(self.reduced_basis[0])


@dataclass(frozen=True)
class EllipticContext:
    """Immutable evaluation context: quasi-period constants plus series data.

    Safe to share across threads; all evaluation functions are pure.
    """

    lattice: Lattice
    eta1: complex
    eta2: complex
    series_terms: int
    tolerance: float
    eta_reduced: tuple[complex, complex]
    theta1_prime_zero: complex
    theta1_triple_prime_zero: complex

    @property
    def series_nome(self) -> complex:
        """Nome actually used by the theta series (reduced basis)."""
        return self.lattice.reduced_nome

    @property
    def singular_radius(self) -> float:
        """Exclusion radius around lattice translates of poles/zeros."""
        return self.tolerance * abs(self.lattice.omega1)


def make_lattice(omega1: complex, omega2: complex) -> Lattice:
    """Build a Lattice from a period pair with Im(omega2/omega1) > 0.

    The returned reduced basis maximises Im(tau) among unimodular images,
    so the internal nome satisfies |q| <= exp(-pi*sqrt(3)/2).
    """
    w1, w2 = complex(omega1), complex(omega2)
    if not (cmath.isfinite(w1) and cmath.isfinite(w2)) or w1 == 0 or w2 == 0:
        raise DegenerateLattice(f"periods must be finite and nonzero, got ({w1}, {w2})")
    tau = w2 / w1
    if not tau.imag > 0:
        raise DegenerateLattice(f"Im(omega2/omega1) must be positive, got {tau.imag}")
    b1, b2, basis_map = _lagrange_reduce(w1, w2)
    nome = cmath.exp(1j * math.pi * tau)
    return Lattice(w1, w2, tau, nome, (b1, b2), basis_map)


def _lagrange_reduce(w1: complex, w2: complex):
    """Gauss/Lagrange reduction tracking the det(+1) integer basis map."""
    a, b, c, d = 1, 0, 0, 1
    b1, b2 = w1, w2
    if abs(b2) < abs(b1):
        b1, b2, (a, b, c, d) = b2, -b1, (c, d, -a, -b)
    for _ in range(128):
        mu = int(round((b2 * b1.conjugate()).real / abs(b1) ** 2))
        if mu:
            b2 = b2 - mu * b1
            c, d = c - mu * a, d - mu * b
        if abs(b2) < abs(b1):
            b1, b2, (a, b, c, d) = b2, -b1, (c, d, -a, -b)
        else:
            break
    else:
        raise DegenerateLattice("basis reduction did not terminate; lattice nearly degenerate")
    return b1, b2, ((a, b), (c, d))


def _eta_for_reduced(b1: complex, b2: complex, terms: int = _DEFAULT_SERIES_TERMS):
    """Quasi-period constants and theta derivatives for a reduced basis."""
    tau = b2 / b1
    n = np.arange(terms)
    odd = 2 * n + 1
    coeff = 2.0 * (-1.0) ** n * np.exp(1j * np.pi * tau * (n + 0.5) ** 2)
    t1p0 = complex(np.sum(coeff * odd))
    t1ppp0 = complex(-np.sum(coeff * odd**3))
    eta_b1 = -(math.pi**2 / (3.0 * b1)) * (t1ppp0 / t1p0)
    eta_b2 = (eta_b1 * b2 - 2j * math.pi) / b1
    return eta_b1, eta_b2, t1p0, t1ppp0


def quasi_period_constants(lattice: Lattice) -> tuple[complex, complex]:
    """Constants (eta1, eta2) of the sigma quasi-periodicity relation.

    Computed from theta1'''(0)/theta1'(0) on the reduced basis and carried
    back to the caller basis with the unimodular map; the pair satisfies the
    Legendre relation eta1*omega2 - eta2*omega1 = 2*pi*i.
    """
    b1, b2 = lattice.reduced_basis
    eta_b1, eta_b2, _, _ = _eta_for_reduced(b1, b2)
    (a, b), (c, d) = lattice.basis_map
    eta1 = d * eta_b1 - b * eta_b2
    eta2 = -c * eta_b1 + a * eta_b2
    return eta1, eta2


def make_context(
    lattice: Lattice,
    tolerance: float = _DEFAULT_TOLERANCE,
    series_terms: int = _DEFAULT_SERIES_TERMS,
) -> EllipticContext:
    """Build an EllipticContext and run its construction self-checks."""
    if not 0 < tolerance < 1e-2:
        raise ValueError(f"tolerance must be in (0, 1e-2), got {tolerance}")
    if series_terms < 1:
        raise ValueError("series_terms must be positive")
    b1, b2 = lattice.reduced_basis
    eta_b1, eta_b2, t1p0, t1ppp0 = _eta_for_reduced(b1, b2, series_terms)
    (a, b), (c, d) = lattice.basis_map
    ctx = EllipticContext(
        lattice=lattice,
        eta1=d * eta_b1 - b * eta_b2,
        eta2=-c * eta_b1 + a * eta_b2,
        series_terms=int(series_terms),
        tolerance=float(tolerance),
        eta_reduced=(eta_b1, eta_b2),
        theta1_prime_zero=t1p0,
        theta1_triple_prime_zero=t1ppp0,
    )
    _self_check(ctx)
    return ctx


def _self_check(ctx: EllipticContext) -> None:
    lat = ctx.lattice
    legendre = ctx.eta1 * lat.omega2 - ctx.eta2 * lat.omega1 - 2j * math.pi
    scale = abs(ctx.eta1 * lat.omega2) + abs(ctx.eta2 * lat.omega1) + 2 * math.pi
    if abs(legendre) > 1e-12 * scale:
        raise DegenerateLattice(f"Legendre relation residual {abs(legendre) / scale:.2e} too large")
    pts = np.array([al * lat.omega1 + be * lat.omega2 for al, be in _SELFCHECK_COEFFS])
    for omega_k, eta_k in ((lat.omega1, ctx.eta1), (lat.omega2, ctx.eta2)):
        lhs = sigma(pts + omega_k, ctx)
        rhs = -np.exp(eta_k * (pts + omega_k / 2)) * sigma(pts, ctx)
        if np.max(np.abs(lhs - rhs) / np.abs(lhs)) > 1e-11:
            raise DegenerateLattice("sigma quasi-periodicity self-check failed")


def _as_points(z):
    arr = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(arr)):
        raise ValueError("evaluation points must be finite")
    return arr, arr.ndim == 0


def _ret(value, scalar):
    return value.item() if scalar else value


def _theta_sums(u, tau, terms, tol, want_prime):
    """theta1(u) and optionally theta1'(u) by the q-series.

    Each term is formed as a difference/sum of two plain exponentials so the
    quadratic decay in n and the sin/cos growth in Im(u) combine in a single
    exponent; no 0*inf intermediates arise for cell-reduced arguments. A term
    is dropped once its magnitude envelope falls below ``tol`` times the
    running partial sum, with ``terms`` as the hard cap.
    """
    s = np.zeros(u.shape, dtype=complex)
    sp = np.zeros(u.shape, dtype=complex) if want_prime else None
    done = np.zeros(u.shape, dtype=bool)
    for n in range(terms):
        base = 1j * math.pi * tau * (n + 0.5) ** 2
        w = 1j * (2 * n + 1) * u
        ep = np.exp(base + w)
        em = np.exp(base - w)
        sign = -1.0 if n % 2 else 1.0
        term = (sign * -1j) * (ep - em)
        np.add(s, term, out=s, where=~done)
        if want_prime:
            np.add(sp, (sign * (2 * n + 1)) * (ep + em), out=sp, where=~done)
        bound = np.abs(ep) + np.abs(em)
        done |= bound <= tol * (np.abs(s) + bound)
        if done.all():
            break
    return s, sp


def theta1(v: complex, ctx: EllipticContext) -> complex:
    """Jacobi theta-1 at v for the context's series nome (reduced basis).

    theta1(v) = 2 * sum_{n>=0} (-1)^n q^{(n+1/2)^2} sin((2n+1) v), truncated
    per the context tolerance with a hard cap of ``ctx.series_terms`` terms.
    """
    u, scalar = _as_points(v)
    s, _ = _theta_sums(u, ctx.lattice.reduced_tau, ctx.series_terms, ctx.tolerance, False)
    return _ret(s, scalar)


def theta1_prime(v: complex, ctx: EllipticContext) -> complex:
    """Derivative of theta1 at v (same nome and truncation as theta1)."""
    u, scalar = _as_points(v)
    _, sp = _theta_sums(u, ctx.lattice.reduced_tau, ctx.series_terms, ctx.tolerance, True)
    return _ret(sp, scalar)


def theta1_derivatives_at_zero(ctx: EllipticContext) -> tuple[complex, complex]:
    """(theta1'(0), theta1'''(0)) for the context's series nome."""
    return ctx.theta1_prime_zero, ctx.theta1_triple_prime_zero


def _split(z, ctx):
    """Write z = z0 + m*b1 + n*b2 with z0 in the centred reduced cell."""
    b1, b2 = ctx.lattice.reduced_basis
    alpha = (np.conj(b2) * z).imag / (np.conj(b2) * b1).imag
    beta = (np.conj(b1) * z).imag / (np.conj(b1) * b2).imag
    m = np.rint(alpha)
    n = np.rint(beta)
    return z - (m * b1 + n * b2), m, n


def _translate_exponent(z0, m, n, ctx):
    """Exponent E and sign s with sigma(z) = s * exp(E) * sigma_cell(z0) / gauss."""
    b1, b2 = ctx.lattice.reduced_basis
    eta_b1, eta_b2 = ctx.eta_reduced
    lam = m * b1 + n * b2
    eta_mn = m * eta_b1 + n * eta_b2
    exponent = eta_b1 * z0 * z0 / (2.0 * b1) + eta_mn * (z0 + 0.5 * lam)
    mi = m.astype(np.int64)
    ni = n.astype(np.int64)
    sign = np.where((mi + ni + mi * ni) % 2 == 0, 1.0, -1.0)
    return exponent, sign


def sigma(z: complex, ctx: EllipticContext) -> complex:
    """Weierstrass sigma: entire, odd, simple zeros exactly on the lattice.

    Raises Overflow when the quasi-periodicity growth factor exceeds the
    double range; log_abs_sigma is immune to that.
    """
    zz, scalar = _as_points(z)
    z0, m, n = _split(zz, ctx)
    exponent, sign = _translate_exponent(z0, m, n, ctx)
    b1 = ctx.lattice.reduced_basis[0]
    th, _ = _theta_sums(
        math.pi * z0 / b1, ctx.lattice.reduced_tau, ctx.series_terms, ctx.tolerance, False
    )
    ratio = th / ctx.theta1_prime_zero
    log_mag = exponent.real + np.log(np.abs(ratio) * abs(b1 / math.pi) + np.finfo(float).tiny)
    if np.any(log_mag > _LOG_HUGE):
        raise Overflow("sigma magnitude exceeds double range; use log_abs_sigma")
    return _ret(sign * (b1 / math.pi) * ratio * np.exp(exponent), scalar)


def log_abs_sigma(z: complex, ctx: EllipticContext) -> float:
    """log|sigma(z)|, assembled additively in log space (overflow-free).

    Raises SingularPoint when z lies within ``ctx.singular_radius`` of a
    lattice point, where log|sigma| diverges to -inf.
    """
    zz, scalar = _as_points(z)
    z0, m, n = _split(zz, ctx)
    if np.any(np.abs(z0) <= ctx.singular_radius):
        raise SingularPoint("point within the singular radius of a lattice point")
    exponent, _ = _translate_exponent(z0, m, n, ctx)
    b1 = ctx.lattice.reduced_basis[0]
    th, _ = _theta_sums(
        math.pi * z0 / b1, ctx.lattice.reduced_tau, ctx.series_terms, ctx.tolerance, False
    )
    out = (
        math.log(abs(b1) / math.pi)
        + np.log(np.abs(th))
        - math.log(abs(ctx.theta1_prime_zero))
        + exponent.real
    )
    return _ret(out, scalar)


def weier_zeta(z: complex, ctx: EllipticContext) -> complex:
    """Weierstrass zeta sigma'(z)/sigma(z): odd, simple poles on the lattice,
    quasi-periodic with increments eta1, eta2."""
    zz, scalar = _as_points(z)
    z0, m, n = _split(zz, ctx)
    if np.any(np.abs(z0) <= ctx.singular_radius):
        raise SingularPoint("point within the singular radius of a lattice pole")
    b1 = ctx.lattice.reduced_basis[0]
    eta_b1, eta_b2 = ctx.eta_reduced
    th, thp = _theta_sums(
        math.pi * z0 / b1, ctx.lattice.reduced_tau, ctx.series_terms, ctx.tolerance, True
    )
    out = eta_b1 * z0 / b1 + (math.pi / b1) * (thp / th) + (m * eta_b1 + n * eta_b2)
    return _ret(out, scalar)
