"""
spectral_energy.py - Spectral measure, exponential energy and trapping constants

The spectral measure of u puts weight |<phi_j, u_+>|^2 at every eigenvalue
nu_j of the Lax matrix. The exponential spectral energy integrates
e^{rho nu}(1 + nu^2/4) against it. The geometric constants c1, c2 and the
bounding function f turn a bound on that energy into a bound on the
analytic norm of u_+.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import LinAlgError, eigh
from scipy.optimize import bisect

from bolax.errors import (
    ConstantsError,
    EigenError,
    ExponentCapError,
    ResolventError,
    TrappingError,
)
from bolax.field_core import EXPONENT_CAP, Field, analytic_norm, project
from bolax.lax_gauge import lax_matrix
from bolax.log import get_logger
from bolax.series import bracketed_sum

logger = get_logger(__name__)

EIGEN_RESIDUAL = 1e-10
ROOT_XTOL = 1e-14
SERIES_TERMS = 10**6


# =============================================================================
# Spectral measure
# =============================================================================


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Ascending eigenvalues, unitary eigenbasis (columns) and measure weights."""

    eigenvalues: np.ndarray
    weights: np.ndarray
    basis: np.ndarray

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))


def spectral_data(u: Field, n: int) -> SpectralData:
    if n > u.n_max:
        u = u.resized(n)
    lax = lax_matrix(u, n)
    try:
        values, vectors = eigh(lax.entries)
    except LinAlgError as exc:
        raise EigenError(f"eigensolver failed at N={n}: {exc}") from exc

    scale = max(float(np.max(np.abs(values))), 1.0)
    residual = float(np.max(np.linalg.norm(lax.entries @ vectors - vectors * values, axis=0)))
    if residual > EIGEN_RESIDUAL * scale:
        raise EigenError(f"eigen-residual {residual:.3e} exceeds {EIGEN_RESIDUAL:g} * ||L||")
    unitarity = float(np.max(np.abs(vectors.conj().T @ vectors - np.eye(n))))
    if unitarity > EIGEN_RESIDUAL:
        raise EigenError(f"eigenbasis not unitary: deviation {unitarity:.3e}")

    plus = u.coeffs[u.n_max + 1 : u.n_max + 1 + n]
    weights = np.abs(vectors.conj().T @ plus) ** 2
    mass = float(np.sum(np.abs(plus) ** 2))
    if abs(float(np.sum(weights)) - mass) > EIGEN_RESIDUAL * max(mass, 1.0):
        raise EigenError("spectral weights violate Parseval")
    logger.debug("spectral data N=%d: residual %.2e, nu_1=%.6f", n, residual, values[0])
    return SpectralData(eigenvalues=values, weights=weights, basis=vectors)


def beta_via_measure(data: SpectralData, lam: float) -> float:
    """sum_j w_j / (nu_j + lam)."""
    shifted = data.eigenvalues + lam
    if np.min(shifted) <= 0:
        raise ResolventError(f"lam = {lam:g} hits or crosses the pole at -nu_1")
    return float(np.sum(data.weights / shifted))


def measure_energy(data: SpectralData, rho: float) -> float:
    """Integrate e^{rho nu}(1 + nu^2/4) against the spectral measure."""
    top = float(np.max(np.abs(data.eigenvalues)))
    if rho * top > EXPONENT_CAP:
        raise ExponentCapError(f"rho*nu_max = {rho * top:.1f} exceeds the exponent cap")
    nu = data.eigenvalues
    return float(np.sum(data.weights * np.exp(rho * nu) * (1.0 + nu**2 / 4.0)))


def exp_energy(u: Field, rho: float, n: int | None = None) -> float:
    return measure_energy(spectral_data(u, n or u.n_max), rho)


@dataclass(frozen=True)
class SelfConvergence:
    value: float
    delta: float


def exp_energy_self_convergence(u: Field, rho: float, n: int | None = None) -> SelfConvergence:
    """Energy at radius N and the change when the lattice is doubled."""
    n = n or u.n_max
    padded = u.resized(max(u.n_max, 2 * n))
    coarse = exp_energy(padded, rho, n)
    fine = exp_energy(padded, rho, 2 * n)
    return SelfConvergence(value=coarse, delta=abs(fine - coarse))


# =============================================================================
# Geometric constants and the bounding function
# =============================================================================


@dataclass(frozen=True)
class GeometricConstants:
    c1: float
    c2: float
    x_max: float
    a_max: float
    c1_err: float = 0.0
    c2_err: float = 0.0

    @property
    def b(self) -> float:
        return math.sqrt(2.0) / 2.0 * self.c2

    def as_dict(self) -> dict:
        return {
            "c1": self.c1,
            "c2": self.c2,
            "x_max": self.x_max,
            "A_max": self.a_max,
            "series_check": {"c1_err": self.c1_err, "c2_err": self.c2_err},
        }


@lru_cache(maxsize=8)
def geometric_constants(tol: float = 1e-8) -> GeometricConstants:
    """
    c2 = (pi coth pi - 1)^{1/2} and c1 = (1/2)(pi^2/6 - (pi coth pi - 1)/2)^{1/2},
    each cross-checked against partial sums with an integral tail bracket.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    pi_coth = math.pi / math.tanh(math.pi)
    c2_squared = pi_coth - 1.0
    four_c1_squared = math.pi**2 / 6.0 - c2_squared / 2.0

    c2_series = 2.0 * bracketed_sum(lambda k: 1.0 / (1.0 + k * k), terms=SERIES_TERMS).value
    c1_series = bracketed_sum(lambda k: 1.0 / (k * k * (1.0 + k * k)), terms=SERIES_TERMS).value
    c2_err = abs(c2_series - c2_squared)
    c1_err = abs(c1_series - four_c1_squared)
    if c2_err > tol or c1_err > tol:
        raise ConstantsError(
            f"closed forms and series disagree: c1 err {c1_err:.3e}, c2 err {c2_err:.3e}"
        )

    c1 = 0.5 * math.sqrt(four_c1_squared)
    c2 = math.sqrt(c2_squared)
    b = math.sqrt(2.0) / 2.0 * c2

    # f'(x) is e^{-c1 x}/sqrt(2) times this quadratic; it is +1 at 0 and -1 at 1/b
    def slope(x: float) -> float:
        return 1.0 - 2.0 * b * x - c1 * x + c1 * b * x * x

    x_max = bisect(slope, 0.0, 1.0 / b, xtol=ROOT_XTOL)
    partial = GeometricConstants(c1=c1, c2=c2, x_max=x_max, a_max=0.0)
    return GeometricConstants(
        c1=c1,
        c2=c2,
        x_max=x_max,
        a_max=float(bounding_f(x_max, partial)),
        c1_err=c1_err,
        c2_err=c2_err,
    )


def bounding_f(x: float | np.ndarray, consts: GeometricConstants) -> float | np.ndarray:
    """f(x) = e^{-c1 x}(x - b x^2)/sqrt(2)."""
    return np.exp(-consts.c1 * x) * (x - consts.b * x**2) / math.sqrt(2.0)


def bounding_slope(x: float | np.ndarray, consts: GeometricConstants) -> float | np.ndarray:
    """Analytic f'(x)."""
    c1, b = consts.c1, consts.b
    return np.exp(-c1 * x) * (1.0 - 2.0 * b * x - c1 * x + c1 * b * x**2) / math.sqrt(2.0)


@dataclass(frozen=True)
class BoundingShape:
    min_increment: float
    critical_points: int
    min_interior: float

    @property
    def ok(self) -> bool:
        return self.min_increment > 0 and self.critical_points == 1 and self.min_interior > 0


def bounding_shape(consts: GeometricConstants, points: int = 10_000) -> BoundingShape:
    """
    Sample f on [0, x_max] for monotonicity, and f, f' on the open
    interval (0, 1/b) for positivity and sign changes of the slope.
    """
    rising = bounding_f(np.linspace(0.0, consts.x_max, points), consts)
    interior = np.linspace(0.0, 1.0 / consts.b, points + 2)[1:-1]
    signs = np.sign(bounding_slope(interior, consts))
    return BoundingShape(
        min_increment=float(np.min(np.diff(rising))),
        critical_points=int(np.count_nonzero(signs[1:] != signs[:-1])),
        min_interior=float(np.min(bounding_f(interior, consts))),
    )


def stable_root(a: float, consts: GeometricConstants) -> float:
    """The root of f(X) = a on [0, x_max], where f is strictly increasing."""
    if a < 0:
        raise ValueError("energy level must be nonnegative")
    if a == 0:
        return 0.0
    if a >= consts.a_max:
        raise TrappingError(f"level {a:.6g} is not below A_max = {consts.a_max:.6g}")
    return float(bisect(lambda x: bounding_f(x, consts) - a, 0.0, consts.x_max, xtol=ROOT_XTOL))


@dataclass(frozen=True)
class TranscendentalBounds:
    norm_plus: float
    energy_sqrt: float
    lower: float
    upper: float

    @property
    def lower_ok(self) -> bool:
        return self.lower <= self.energy_sqrt

    @property
    def upper_ok(self) -> bool:
        return self.energy_sqrt <= self.upper

    @property
    def slack(self) -> tuple[float, float]:
        return self.energy_sqrt - self.lower, self.upper - self.energy_sqrt


def transcendental_bounds_report(
    u: Field, rho: float, consts: GeometricConstants | None = None, n: int | None = None
) -> TranscendentalBounds:
    """
    Two-sided bound of E^{1/2} by x = ||u_+||_{rho,1}:
    e^{-c1 x}(x - b x^2)/sqrt(2) <= E^{1/2} <= e^{c1 x}(sqrt(2) x + b x^2).
    """
    consts = consts or geometric_constants()
    x = analytic_norm(project(u, "plus"), rho, 1.0)
    energy = exp_energy(u, rho, n)
    return TranscendentalBounds(
        norm_plus=x,
        energy_sqrt=math.sqrt(energy),
        lower=float(bounding_f(x, consts)),
        upper=math.exp(consts.c1 * x) * (math.sqrt(2.0) * x + consts.b * x**2),
    )
