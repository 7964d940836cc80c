"""
intertwine.py - The intertwining operator between free and perturbed semigroups

W(tau) solves W' = -Q(tau) W, W(0) = I, where Q(tau) is the Toeplitz matrix
of the weighted symbol v(n) e^{2 tau n}. Then e^{-tau L_0} W(tau) equals
e^{-tau L_v}, which is checked here against the eigendecomposition of L_v.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from bolax.errors import ExponentCapError, StepSizeError
from bolax.field_core import EXPONENT_CAP, Field, analytic_norm, project
from bolax.lax_gauge import lax_matrix
from bolax.log import get_logger
from bolax.spectral_energy import geometric_constants, spectral_data

logger = get_logger(__name__)

MIN_STEPS = 16
RICHARDSON_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class WeightedToeplitz:
    tau: float
    entries: np.ndarray


def q_matrix(v: Field, tau: float, n: int) -> WeightedToeplitz:
    """Q_jk = v(j - k) e^{2 tau (j - k)} for j, k = 1..n."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if 2.0 * tau * (n - 1) > EXPONENT_CAP:
        raise ExponentCapError(f"2*tau*(N-1) = {2.0 * tau * (n - 1):.1f} exceeds the cap")
    toeplitz = lax_matrix(v, n).toeplitz_part
    j = np.arange(n)
    shift = j[:, None] - j[None, :]
    return WeightedToeplitz(tau=tau, entries=toeplitz * np.exp(2.0 * tau * shift))


@dataclass(frozen=True, eq=False)
class IntertwinerSolution:
    grid: np.ndarray
    w: np.ndarray  # (steps + 1, N, N)
    w_inv: np.ndarray
    op_norms: np.ndarray  # (steps + 1, 2): ||W||, ||W^{-1}||

    @property
    def max_norm(self) -> float:
        return float(np.max(self.op_norms))

    @property
    def inverse_defect(self) -> float:
        """Largest ||W W^{-1} - I|| over the grid."""
        eye = np.eye(self.w.shape[1])
        return max(float(np.linalg.norm(a @ b - eye, 2)) for a, b in zip(self.w, self.w_inv))


def _integrate(v: Field, rho: float, n: int, steps: int) -> IntertwinerSolution:
    h = (rho / 2.0) / steps
    half_grid = np.linspace(0.0, rho / 2.0, 2 * steps + 1)
    q = [q_matrix(v, tau, n).entries for tau in half_grid]

    w = np.empty((steps + 1, n, n), dtype=np.complex128)
    w_inv = np.empty_like(w)
    w[0] = np.eye(n)
    w_inv[0] = np.eye(n)
    for i in range(steps):
        q0, qh, q1 = q[2 * i], q[2 * i + 1], q[2 * i + 2]
        a = w[i]
        k1 = -q0 @ a
        k2 = -qh @ (a + 0.5 * h * k1)
        k3 = -qh @ (a + 0.5 * h * k2)
        k4 = -q1 @ (a + h * k3)
        w[i + 1] = a + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

        b = w_inv[i]
        l1 = b @ q0
        l2 = (b + 0.5 * h * l1) @ qh
        l3 = (b + 0.5 * h * l2) @ qh
        l4 = (b + h * l3) @ q1
        w_inv[i + 1] = b + h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4)

    norms = np.array(
        [[np.linalg.norm(a, 2), np.linalg.norm(b, 2)] for a, b in zip(w, w_inv)]
    )
    return IntertwinerSolution(grid=half_grid[::2], w=w, w_inv=w_inv, op_norms=norms)


def solve_intertwiner(
    v: Field, rho: float, n: int, steps: int, check: bool = True
) -> IntertwinerSolution:
    """
    RK4 on a uniform grid over [0, rho/2]. With ``check`` the run is repeated
    with twice the steps and W(rho/2) must move by less than 1e-8.
    """
    if steps < MIN_STEPS:
        raise StepSizeError(f"intertwiner needs at least {MIN_STEPS} steps, got {steps}")
    solution = _integrate(v, rho, n, steps)
    if check:
        finer = _integrate(v, rho, n, 2 * steps)
        change = float(np.linalg.norm(finer.w[-1] - solution.w[-1], 2))
        logger.debug("intertwiner step doubling: change %.3e at %d steps", change, steps)
        if change >= RICHARDSON_TOL:
            raise StepSizeError(
                f"doubling {steps} steps moved W(rho/2) by {change:.3e} >= {RICHARDSON_TOL:g}"
            )
    return solution


def norm_bound(v: Field, rho: float) -> float:
    """exp(c1 ||v_+||_{rho,1}), the bound on ||W^{+-1}||."""
    return math.exp(geometric_constants().c1 * analytic_norm(project(v, "plus"), rho, 1.0))


def _semigroup(v: Field, tau: float, n: int, sign: float) -> np.ndarray:
    data = spectral_data(v, n)
    return (data.basis * np.exp(sign * tau * data.eigenvalues)) @ data.basis.conj().T


def intertwine_residual(
    v: Field,
    rho: float,
    n: int,
    steps: int,
    solution: IntertwinerSolution | None = None,
) -> float:
    """||e^{-(rho/2) L_0} W(rho/2) - e^{-(rho/2) L_v}|| in the spectral norm."""
    solution = solution or solve_intertwiner(v, rho, n, steps, check=False)
    tau = rho / 2.0
    free = np.exp(-tau * 2.0 * np.arange(1, n + 1))
    lhs = free[:, None] * solution.w[-1]
    return float(np.linalg.norm(lhs - _semigroup(v, tau, n, -1.0), 2))


@dataclass(frozen=True)
class VectorIdentity:
    lhs_minus_rhs_norm: float
    energy_via_psi: float


def vector_identity_check(
    v: Field, rho: float, n: int, steps: int = 512, solution: IntertwinerSolution | None = None
) -> VectorIdentity:
    """
    With psi_0 = e^{(rho/2) L_0} v_+ and psi_v = W^{-1} psi_0, compare
    L_0 psi_0 with -Q psi_0 + W L_v psi_v on modes 1..N-1.
    """
    solution = solution or solve_intertwiner(v, rho, n, steps, check=False)
    tau = rho / 2.0
    lax = lax_matrix(v, n)
    plus = project(v.resized(max(v.n_max, n)), "plus").coeffs[:n]
    psi_0 = np.exp(tau * lax.free_diagonal) * plus
    psi_v = solution.w_inv[-1] @ psi_0

    lhs = lax.free_diagonal * psi_0
    rhs = -q_matrix(v, tau, n).entries @ psi_0 + solution.w[-1] @ (lax.entries @ psi_v)
    generator = 0.5 * (lax.entries @ psi_v)
    energy = float(np.vdot(psi_v, psi_v).real + np.vdot(generator, generator).real)
    return VectorIdentity(
        lhs_minus_rhs_norm=float(np.linalg.norm((lhs - rhs)[: n - 1])),
        energy_via_psi=energy,
    )


@dataclass(frozen=True)
class IntegratedQ:
    value: float
    bound: float


def integrated_q_norm(v: Field, rho: float, n: int, points: int = 257) -> IntegratedQ:
    """Simpson value of the integral of ||Q(tau)|| over [0, rho/2] against c1 ||v_+||_{rho,1}."""
    taus = np.linspace(0.0, rho / 2.0, points)
    norms = [np.linalg.norm(q_matrix(v, tau, n).entries, 2) for tau in taus]
    bound = geometric_constants().c1 * analytic_norm(project(v, "plus"), rho, 1.0)
    return IntegratedQ(value=float(simpson(norms, x=taus)), bound=bound)


@dataclass(frozen=True)
class IntertwineConvergence:
    steps: tuple[int, ...]
    residuals: tuple[float, ...]

    @property
    def ratios(self) -> tuple[float, ...]:
        return tuple(
            a / b if b > 0 else math.inf for a, b in zip(self.residuals, self.residuals[1:])
        )


def intertwine_convergence(
    v: Field, rho: float, n: int, steps_list: list[int]
) -> IntertwineConvergence:
    residuals = [
        intertwine_residual(v, rho, n, steps, solve_intertwiner(v, rho, n, steps, check=False))
        for steps in steps_list
    ]
    return IntertwineConvergence(steps=tuple(steps_list), residuals=tuple(residuals))
