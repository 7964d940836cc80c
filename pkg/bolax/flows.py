"""
flows.py - BO and regularized H_kappa flows with invariant tracking

Both flows are integrated with classic fixed-step RK4 on the truncated
lattice. The H_kappa vector field

    V_kappa(u) = -(kappa/2) u_x + (kappa^2/2) d/dx (m + conj(m) - |m|^2)

is the Hamiltonian vector field of H_kappa = -(kappa P - kappa^2 beta(kappa))/2
and tends to V_BO(u) = -H u_xx - (u^2)_x / 2 at rate 1/kappa. Trajectories
record P, H_BO, the exponential spectral energy, beta probes and the lowest
Lax eigenvalues.
"""

import asyncio
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import pandas as pd

from bolax.config import FlowConfig
from bolax.errors import LatticeError, NormExplosion, SmallnessError, StepSizeError
from bolax.field_core import (
    Field,
    analytic_norm,
    classic_invariants,
    derivative,
    hilbert,
    multiply,
    project,
)
from bolax.lax_gauge import beta, beta_gradient
from bolax.log import get_logger
from bolax.spectral_energy import (
    geometric_constants,
    measure_energy,
    spectral_data,
    stable_root,
    transcendental_bounds_report,
)

logger = get_logger(__name__)

# Terminal states under dt and dt/2 may differ by this multiple of the claimed tolerance
HALVING_FACTOR = 20.0


@dataclass(frozen=True)
class FlowKind:
    kind: Literal["bo", "h_kappa"] = "bo"
    kappa: float | None = None

    def __post_init__(self) -> None:
        if self.kind == "h_kappa" and (self.kappa is None or self.kappa <= 0):
            raise ValueError("h_kappa flow needs kappa > 0")

    @classmethod
    def bo(cls) -> "FlowKind":
        return cls("bo")

    @classmethod
    def h_kappa(cls, kappa: float) -> "FlowKind":
        return cls("h_kappa", kappa)

    @property
    def label(self) -> str:
        return "bo" if self.kind == "bo" else f"h_kappa({self.kappa:g})"


# =============================================================================
# Vector fields
# =============================================================================


def _require_state(u: Field) -> None:
    if not (u.real_valued and u.zero_mean):
        raise LatticeError("flow states must be real_valued and zero_mean")


def vector_field(u: Field, kind: FlowKind) -> Field:
    _require_state(u)
    if kind.kind == "bo":
        dispersion = -hilbert(derivative(derivative(u)))
        return dispersion - 0.5 * derivative(multiply(u, u))
    kappa = float(kind.kappa)  # type: ignore[arg-type]
    transport = -0.5 * kappa * derivative(u)
    return transport + 0.5 * kappa**2 * derivative(beta_gradient(u, kappa))


def residual_field(u: Field, kappa: float) -> Field:
    """V_kappa(u) - V_BO(u), by subtraction."""
    return vector_field(u, FlowKind.h_kappa(kappa)) - vector_field(u, FlowKind.bo())


def h_kappa_hamiltonian(u: Field, kappa: float) -> float:
    momentum = classic_invariants(u).momentum
    return -0.5 * (kappa * momentum - kappa**2 * beta(u, kappa))


@dataclass(frozen=True)
class DtSuggestion:
    stability: float
    conservative: float | None


def suggested_dt(kind: FlowKind, n_max: int) -> DtSuggestion:
    """
    Both linear multipliers are bounded by N^2, so RK4 is stable for
    dt ~ 1/N^2; the transport-based rule 1/(kappa N) is reported for h_kappa.
    """
    conservative = None if kind.kind == "bo" else 1.0 / (float(kind.kappa) * n_max)
    return DtSuggestion(stability=1.0 / n_max**2, conservative=conservative)


def rk4_step(u: Field, dt: float, kind: FlowKind) -> Field:
    k1 = vector_field(u, kind)
    k2 = vector_field(u + 0.5 * dt * k1, kind)
    k3 = vector_field(u + 0.5 * dt * k2, kind)
    k4 = vector_field(u + dt * k3, kind)
    return u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# =============================================================================
# Evolution
# =============================================================================


@dataclass
class InvariantReport:
    """Invariants sampled along a trajectory; one row per recorded step."""

    lambda_probes: tuple[float, ...]
    kind: FlowKind
    times: list[float] = field(default_factory=list)
    momentum: list[float] = field(default_factory=list)
    energy: list[float] = field(default_factory=list)
    exp_energy: list[float] = field(default_factory=list)
    norm_rho1: list[float] = field(default_factory=list)
    norm_plus: list[float] = field(default_factory=list)
    beta_probes: list[list[float]] = field(default_factory=list)
    eigenvalues: list[list[float]] = field(default_factory=list)
    h_kappa: list[float] = field(default_factory=list)
    sup_norm_plus: float = 0.0

    def to_frame(self) -> pd.DataFrame:
        columns: dict[str, list[float]] = {
            "t": self.times,
            "P": self.momentum,
            "H_BO": self.energy,
            "E_rho": self.exp_energy,
            "norm_rho1": self.norm_rho1,
        }
        probes = np.array(self.beta_probes).reshape(len(self.times), len(self.lambda_probes))
        for k in range(len(self.lambda_probes)):
            columns[f"beta_l{k + 1}"] = list(probes[:, k])
        eigen = np.array(self.eigenvalues).reshape(len(self.times), -1)
        for k in range(eigen.shape[1]):
            columns[f"eig_{k + 1}"] = list(eigen[:, k])
        if self.kind.kind == "h_kappa":
            columns["H_kappa"] = self.h_kappa
        return pd.DataFrame(columns)

    def relative_drift(self, column: str) -> float:
        """max_t |q(t) - q(0)| / |q(0)|, zero for an identically zero column."""
        values = np.asarray(self.to_frame()[column], dtype=np.float64)
        return _relative_drift(values)

    def eigenvalue_drift(self) -> float:
        eigen = np.array(self.eigenvalues)
        return max(_relative_drift(eigen[:, k]) for k in range(eigen.shape[1]))

    def beta_drift(self) -> float:
        probes = np.array(self.beta_probes)
        return max(_relative_drift(probes[:, k]) for k in range(probes.shape[1]))


def _relative_drift(values: np.ndarray) -> float:
    scale = abs(float(values[0]))
    spread = float(np.max(np.abs(values - values[0])))
    if scale == 0.0:
        return spread
    return spread / scale


def _check_symmetry(u: Field, tol: float) -> Field:
    """Re-assert Hermitian symmetry of a recorded state, correcting roundoff drift."""
    drift = u.symmetry_drift()
    if drift > tol:
        raise LatticeError(f"Hermitian drift {drift:.3e} exceeds {tol:g}")
    if drift > 0.0:
        logger.warning("correcting Hermitian drift %.3e", drift)
        return u.real_part()
    return u


def _record(report: InvariantReport, u: Field, t: float, cfg: FlowConfig) -> None:
    rho, n_max = cfg.lattice.rho, cfg.lattice.n_max
    invariants = classic_invariants(u)
    data = spectral_data(u, n_max)
    report.times.append(t)
    report.momentum.append(invariants.momentum)
    report.energy.append(invariants.energy)
    report.exp_energy.append(measure_energy(data, rho))
    report.norm_rho1.append(analytic_norm(u, rho, 1.0))
    report.norm_plus.append(analytic_norm(project(u, "plus"), rho, 1.0))
    report.beta_probes.append([beta(u, lam) for lam in cfg.lambda_probes])
    report.eigenvalues.append(list(data.eigenvalues[: min(cfg.n_eigs, n_max)]))
    if report.kind.kind == "h_kappa":
        report.h_kappa.append(h_kappa_hamiltonian(u, float(report.kind.kappa)))


def _integrate(
    u0: Field, kind: FlowKind, cfg: FlowConfig, report: InvariantReport | None
) -> tuple[list[Field], Field]:
    steps = int(round(cfg.t_end / cfg.dt))
    dt = cfg.t_end / steps if steps else cfg.dt
    if steps and abs(dt - cfg.dt) > 1e-12 * cfg.dt:
        logger.info("adjusted dt from %g to %g to land on t_end", cfg.dt, dt)
    limit = cfg.explosion_factor * geometric_constants().x_max
    rho = cfg.lattice.rho

    u = u0
    trajectory = [u0]
    if report is not None:
        _record(report, u0, 0.0, cfg)
        report.sup_norm_plus = report.norm_plus[0]
    for step in range(1, steps + 1):
        u = rk4_step(u, dt, kind)
        norm = analytic_norm(u, rho, 1.0)
        if not math.isfinite(norm) or norm > limit:
            raise NormExplosion(
                f"||u||_(rho,1) = {norm:.4g} left the admissible region (limit {limit:.4g}) "
                f"at t = {step * dt:.6g}"
            )
        if report is None:
            continue
        report.sup_norm_plus = max(
            report.sup_norm_plus, analytic_norm(project(u, "plus"), rho, 1.0)
        )
        if step % cfg.record_every == 0 or step == steps:
            u = _check_symmetry(u, cfg.symmetry_tol)
            trajectory.append(u)
            _record(report, u, step * dt, cfg)
    return trajectory, u


def evolve(u0: Field, kind: FlowKind, cfg: FlowConfig) -> tuple[list[Field], InvariantReport]:
    """
    Fixed-step RK4 for u_t = vector_field(u). Recorded snapshots start at
    t = 0 and follow every ``record_every`` steps plus the final step.
    """
    _require_state(u0)
    if u0.n_max != cfg.lattice.n_max:
        raise LatticeError(f"initial data on radius {u0.n_max}, config says {cfg.lattice.n_max}")
    logger.info("evolving %s on N=%d to t=%g", kind.label, cfg.lattice.n_max, cfg.t_end)

    report = InvariantReport(lambda_probes=tuple(cfg.lambda_probes), kind=kind)
    trajectory, terminal = _integrate(u0, kind, cfg, report)

    if cfg.halving_check and cfg.t_end > 0:
        halved = cfg.model_copy(update={"dt": cfg.dt / 2.0})
        _, reference = _integrate(u0, kind, halved, None)
        scale = max(analytic_norm(reference, 0.0, 0.0), np.finfo(float).tiny)
        change = analytic_norm(terminal - reference, 0.0, 0.0) / scale
        logger.debug("step halving changed the terminal state by %.3e", change)
        if change > HALVING_FACTOR * cfg.halving_tol:
            raise StepSizeError(
                f"halving dt moved the terminal state by {change:.3e} "
                f"(allowed {HALVING_FACTOR * cfg.halving_tol:.1e})"
            )
    return trajectory, report


# =============================================================================
# Experiments
# =============================================================================


def l2_distance(u: Field, v: Field) -> float:
    return analytic_norm(u - v, 0.0, 0.0)


@dataclass(frozen=True)
class ConvergenceRow:
    kappa: float
    kappa_next: float
    sup_l2: float
    sup_analytic: float


@dataclass(frozen=True)
class ConvergenceTable:
    rows: tuple[ConvergenceRow, ...]
    bo_distance: float
    kappa_max: float
    eps: float

    @property
    def rate_constant(self) -> float:
        """C in d(kappa, kappa') ~ C (1/kappa - 1/kappa'), read off the last pair."""
        last = self.rows[-1]
        gap = 1.0 / last.kappa - 1.0 / last.kappa_next
        return last.sup_l2 / gap if gap > 0 else math.inf

    @property
    def halving_ratios(self) -> tuple[float, ...]:
        return tuple(
            b.sup_l2 / a.sup_l2 if a.sup_l2 > 0 else 0.0 for a, b in zip(self.rows, self.rows[1:])
        )

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(
            {
                "kappa": [row.kappa for row in self.rows],
                "kappa_next": [row.kappa_next for row in self.rows],
                "sup_l2": [row.sup_l2 for row in self.rows],
                "sup_analytic": [row.sup_analytic for row in self.rows],
            }
        )
        return frame


def _sup_distances(a: list[Field], b: list[Field], rho: float, eps: float) -> tuple[float, float]:
    l2 = max(l2_distance(x, y) for x, y in zip(a, b))
    analytic = max(analytic_norm(x - y, rho - eps, 1.0) for x, y in zip(a, b))
    return l2, analytic


async def _run_all(
    u0: Field, kinds: list[FlowKind], cfg: FlowConfig, max_workers: int
) -> list[list[Field]]:
    gate = asyncio.Semaphore(max_workers)

    async def run(kind: FlowKind) -> list[Field]:
        async with gate:
            trajectory, _ = await asyncio.to_thread(evolve, u0, kind, cfg)
            return trajectory

    # gather keeps the order of ``kinds`` whatever the completion order
    return await asyncio.gather(*(run(kind) for kind in kinds))


def kappa_convergence(
    u0: Field, kappas: list[float], t_end: float, cfg: FlowConfig, max_workers: int = 4
) -> ConvergenceTable:
    """
    Sup-in-time distances between consecutive kappa trajectories, in L^2 and
    in H^{rho - eps, 1} with eps = rho/6, plus the distance of the largest
    kappa trajectory to the BO trajectory.
    """
    if len(kappas) < 2 or any(b <= a for a, b in zip(kappas, kappas[1:])):
        raise ValueError("kappas must hold at least two ascending values")
    cfg = cfg.model_copy(update={"t_end": t_end})
    kinds = [FlowKind.h_kappa(kappa) for kappa in kappas] + [FlowKind.bo()]
    trajectories = asyncio.run(_run_all(u0, kinds, cfg, max_workers))

    rho = cfg.lattice.rho
    eps = rho / 6.0
    rows = []
    for (kappa, a), (kappa_next, b) in zip(
        zip(kappas, trajectories), zip(kappas[1:], trajectories[1:])
    ):
        l2, analytic = _sup_distances(a, b, rho, eps)
        rows.append(ConvergenceRow(kappa, kappa_next, l2, analytic))
    bo_distance, _ = _sup_distances(trajectories[-2], trajectories[-1], rho, eps)
    return ConvergenceTable(
        rows=tuple(rows), bo_distance=bo_distance, kappa_max=kappas[-1], eps=eps
    )


@dataclass(frozen=True)
class TrapResult:
    a: float
    x_root: float
    sup_norm: float
    trapped: bool
    x_max: float
    energy_drift: float
    bounds_ok: bool
    bounds_slack: float

    def as_dict(self) -> dict:
        return {
            "A": self.a,
            "X_max": self.x_root,
            "sup_norm": self.sup_norm,
            "trapped": self.trapped,
            "x_max": self.x_max,
            "energy_drift": self.energy_drift,
            "bounds_ok": self.bounds_ok,
            "bounds_slack": self.bounds_slack,
        }


def trap_experiment(
    u0: Field, rho: float, kind: FlowKind, cfg: FlowConfig, tolerance: float = 1e-4
) -> TrapResult:
    """
    Check that sup_t ||u_+(t)||_{rho,1} stays below the stable root X of
    f(X) = E(u0)^{1/2}, given both smallness conditions on u0.
    """
    consts = geometric_constants()
    cfg = cfg.model_copy(update={"lattice": cfg.lattice.model_copy(update={"rho": rho})})
    level = math.sqrt(measure_energy(spectral_data(u0, cfg.lattice.n_max), rho))
    norm_plus = analytic_norm(project(u0, "plus"), rho, 1.0)

    failed = []
    if level >= consts.a_max:
        failed.append(f"energy condition E^(1/2) = {level:.6g} >= A_max = {consts.a_max:.6g}")
    if norm_plus > consts.x_max:
        failed.append(f"norm condition ||u0_+|| = {norm_plus:.6g} > x_max = {consts.x_max:.6g}")
    if failed:
        raise SmallnessError(failed)

    root = stable_root(level, consts)
    trajectory, report = evolve(u0, kind, cfg)
    bounds = [transcendental_bounds_report(u, rho, consts) for u in trajectory]
    return TrapResult(
        a=level,
        x_root=root,
        sup_norm=report.sup_norm_plus,
        trapped=report.sup_norm_plus <= root * (1.0 + tolerance),
        x_max=consts.x_max,
        energy_drift=report.relative_drift("E_rho"),
        bounds_ok=all(b.lower_ok and b.upper_ok for b in bounds),
        bounds_slack=min(min(b.slack) for b in bounds),
    )


@dataclass(frozen=True)
class ContinuousDependence:
    initial_distance: float
    sup_l2: float
    sup_analytic: float


def continuous_dependence(
    u0: Field, v0: Field, kind: FlowKind, cfg: FlowConfig
) -> ContinuousDependence:
    """Distance between two trajectories against the distance of their data."""
    first, _ = evolve(u0, kind, cfg)
    second, _ = evolve(v0, kind, cfg)
    rho = cfg.lattice.rho
    eps = rho / 6.0
    sup_l2, sup_analytic = _sup_distances(first, second, rho, eps)
    return ContinuousDependence(
        initial_distance=l2_distance(u0, v0), sup_l2=sup_l2, sup_analytic=sup_analytic
    )
