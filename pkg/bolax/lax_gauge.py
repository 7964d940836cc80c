"""
lax_gauge.py - Lax matrix, resolvent and the resolvent gauge

The Lax operator L_u = -2i d/dx + C_+(u .) restricted to modes 1..N is the
Hermitian matrix 2j delta_jk + u(j-k). Its resolvent is applied either by a
dense Cholesky solve or by the Neumann series around the free resolvent
R_0(kappa) = 1/(2n + kappa). The gauge m = (L_u + kappa)^{-1} u_+ and the
generating functional beta = <u_+, m> are built on top.
"""

from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from bolax.errors import CheckFailure, LatticeError, NeumannDivergence, ResolventError
from bolax.field_core import (
    Field,
    PositiveField,
    algebra_constant,
    analytic_norm,
    inner_l2,
    multiply,
    project,
)
from bolax.log import get_logger

logger = get_logger(__name__)


# =============================================================================
# Lax matrix
# =============================================================================


@dataclass(frozen=True, eq=False)
class LaxMatrix:
    """Hermitian N x N matrix of L_u on positive frequencies 1..N."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.entries, dtype=np.complex128)
        arr.flags.writeable = False
        object.__setattr__(self, "entries", arr)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def free_diagonal(self) -> np.ndarray:
        return 2.0 * np.arange(1, self.size + 1)

    @property
    def toeplitz_part(self) -> np.ndarray:
        return self.entries - np.diag(self.free_diagonal)


def toeplitz_symbol(coeffs: np.ndarray, n_max: int, size: int) -> np.ndarray:
    """Matrix with entries c(j - k) for j, k = 1..size from a {-n_max..n_max} array."""
    if size - 1 > n_max:
        raise LatticeError(f"lattice radius {n_max} cannot fill a {size}x{size} Toeplitz block")
    j = np.arange(size)
    return coeffs[j[:, None] - j[None, :] + n_max]


def lax_matrix(u: Field, n: int) -> LaxMatrix:
    if not (u.real_valued and u.zero_mean):
        raise LatticeError("the Lax matrix needs a real_valued, zero_mean field")
    entries = toeplitz_symbol(u.coeffs, u.n_max, n) + np.diag(2.0 * np.arange(1, n + 1))
    if not np.array_equal(entries, entries.conj().T):
        raise LatticeError("Lax matrix is not exactly Hermitian")
    return LaxMatrix(entries)


# =============================================================================
# Resolvent
# =============================================================================


@dataclass(frozen=True)
class ResolventMethod:
    """How (L_u + kappa)^{-1} is applied; rho and s set the Neumann stopping norm."""

    kind: Literal["direct", "neumann"] = "direct"
    max_terms: int = 500
    tol: float = 1e-12
    rho: float = 0.5
    s: float = 1.0

    def __post_init__(self) -> None:
        if self.max_terms < 1:
            raise ValueError("max_terms must be at least 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")

    @classmethod
    def neumann(
        cls, max_terms: int = 500, tol: float = 1e-12, rho: float = 0.5, s: float = 1.0
    ) -> "ResolventMethod":
        return cls(kind="neumann", max_terms=max_terms, tol=tol, rho=rho, s=s)


DIRECT = ResolventMethod()


def _cholesky_solve(lax: LaxMatrix, shift: float, rhs: np.ndarray) -> np.ndarray:
    shifted = lax.entries + shift * np.eye(lax.size)
    try:
        factor = cho_factor(shifted)
    except LinAlgError as exc:
        raise ResolventError(
            f"shift {shift:g} is outside the resolvent set: L + shift is not positive definite"
        ) from exc
    return cho_solve(factor, rhs)


def neumann_solve(
    u: Field, kappa: float, rhs: PositiveField, method: ResolventMethod
) -> tuple[PositiveField, int]:
    """Partial sums of R_0 sum_j (-T_u R_0)^j; returns the solution and the term count."""
    bound = algebra_constant(method.s) * analytic_norm(u, method.rho, method.s)
    if kappa <= bound:
        raise ResolventError(
            f"Neumann series needs kappa > C_s ||u|| = {bound:.6g}, got kappa = {kappa:g}"
        )
    lax = lax_matrix(u, rhs.n_max)
    free = 1.0 / (lax.free_diagonal + kappa)
    toeplitz = lax.toeplitz_part
    n = lax.free_diagonal / 2.0
    weight = np.sqrt((1.0 + n**2) ** method.s * np.exp(2.0 * method.rho * n))

    term = free * rhs.coeffs
    total = term.copy()
    count = 1
    while np.linalg.norm(weight * term) >= method.tol:
        if count >= method.max_terms:
            raise NeumannDivergence(
                f"Neumann series not below tol {method.tol:g} after {count} terms"
            )
        term = -free * (toeplitz @ term)
        total += term
        count += 1
    logger.debug("Neumann series at kappa=%g converged in %d terms", kappa, count)
    return PositiveField(total), count


def resolvent_apply(
    u: Field, kappa: float, rhs: PositiveField, method: ResolventMethod = DIRECT
) -> PositiveField:
    """Solve (L_u + kappa) x = rhs."""
    if kappa <= 0:
        raise ResolventError(f"kappa must be positive, got {kappa:g}")
    if method.kind == "neumann":
        solution, _ = neumann_solve(u, kappa, rhs, method)
        return solution
    return PositiveField(_cholesky_solve(lax_matrix(u, rhs.n_max), kappa, rhs.coeffs))


# =============================================================================
# Gauge and generating functional
# =============================================================================


def gauge_m(u: Field, kappa: float, method: ResolventMethod = DIRECT) -> PositiveField:
    """m(kappa, u) = (L_u + kappa)^{-1} u_+."""
    return resolvent_apply(u, kappa, project(u, "plus"), method)


def default_kappa(u0: Field, n_max: int, rho: float = 0.5) -> float:
    return max(100.0 * algebra_constant(1.0) * analytic_norm(u0, rho, 1.0), 8.0 * n_max)


@dataclass(frozen=True)
class GaugeResidual:
    norm_rho1: float
    max_abs: float


def gauge_identity_residual(
    u: Field, kappa: float, rho: float = 0.5, method: ResolventMethod = DIRECT
) -> GaugeResidual:
    """
    Residual of d/dx m = -(i/2)(kappa m + C_+(u (m - 1))) on modes 1..N-1.
    """
    n_max = u.n_max
    m = gauge_m(u, kappa, method).to_field(n_max)
    one = np.zeros(2 * n_max + 1, dtype=np.complex128)
    one[n_max] = 1.0
    product = multiply(u, m - Field(one))

    n = np.arange(1, n_max)
    interior = m.coeffs[n_max + 1 : 2 * n_max]
    residual = 1j * n * interior + 0.5j * (kappa * interior + product.coeffs[n_max + 1 : 2 * n_max])
    if residual.size == 0:
        return GaugeResidual(norm_rho1=0.0, max_abs=0.0)
    return GaugeResidual(
        norm_rho1=analytic_norm(PositiveField(residual), rho, 1.0),
        max_abs=float(np.max(np.abs(residual))),
    )


def beta(
    u: Field, lam: float, method: ResolventMethod = DIRECT, imag_tol: float = 1e-12
) -> float:
    """beta(lam; u) = <u_+, (L_u + lam)^{-1} u_+>; lam may be negative inside the resolvent set."""
    plus = project(u, "plus")
    if method.kind == "neumann":
        x = resolvent_apply(u, lam, plus, method)
    else:
        x = PositiveField(_cholesky_solve(lax_matrix(u, plus.n_max), lam, plus.coeffs))
    value = inner_l2(plus, x)
    if abs(value.imag) > imag_tol * max(1.0, abs(value.real)):
        raise CheckFailure(
            "beta self-adjointness", f"imaginary part {value.imag:.3e} at lam={lam:g}"
        )
    return value.real


def beta_gradient(u: Field, kappa: float, method: ResolventMethod = DIRECT) -> Field:
    """m + conj(m) - |m|^2; the zero mode of |m|^2 is kept."""
    m = gauge_m(u, kappa, method).to_field(u.n_max)
    m_bar = m.conjugate()
    gradient = m + m_bar - multiply(m, m_bar)
    drift = gradient.symmetry_drift()
    if drift > 1e-12 * max(1.0, float(np.max(np.abs(gradient.coeffs)))):
        raise CheckFailure("beta gradient reality", f"Hermitian drift {drift:.3e}")
    return gradient.real_part()


@dataclass(frozen=True)
class GaugeLipschitz:
    lhs: float
    bound: float
    ball_lhs: float
    ball_bound: float


def gauge_lipschitz(u: Field, v: Field, kappa: float, rho: float = 0.5) -> GaugeLipschitz:
    """
    ||m(u) - m(v)||_{rho,1} <= L_m ||u - v||_{rho,1} with
    L_m = 1/(kappa - C_1 R) + C_1 R/(kappa - C_1 R)^2 and R the larger norm.
    """
    c1 = algebra_constant(1.0)
    radius = max(analytic_norm(u, rho, 1.0), analytic_norm(v, rho, 1.0))
    gap = kappa - c1 * radius
    if gap <= 0:
        raise ResolventError(f"kappa = {kappa:g} does not exceed C_1 R = {c1 * radius:.6g}")
    m_u = gauge_m(u, kappa)
    m_v = gauge_m(v, kappa)
    lipschitz = 1.0 / gap + c1 * radius / gap**2
    return GaugeLipschitz(
        lhs=analytic_norm(m_u - m_v, rho, 1.0),
        bound=lipschitz * analytic_norm(u - v, rho, 1.0),
        ball_lhs=max(analytic_norm(m_u, rho, 1.0), analytic_norm(m_v, rho, 1.0)),
        ball_bound=radius / gap,
    )
