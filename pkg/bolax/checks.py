"""
checks.py - The ``verify`` suite

Each check returns a CheckResult with a signed slack: the distance between
the observed quantity and its threshold, positive when the check passes.
Checks run in a fixed order; a BolaxError raised inside a check is recorded
as a failure of that check rather than aborting the suite.
"""

import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from bolax.config import ExperimentConfig, LatticeSpec
from bolax.errors import BolaxError
from bolax.field_core import (
    Field,
    PositiveField,
    algebra_constant,
    analytic_norm,
    derivative,
    grid_values,
    hilbert,
    inner_l2,
    make_field,
    multiply,
    project,
    random_analytic_field,
)
from bolax.flows import FlowKind, evolve, kappa_convergence, residual_field, trap_experiment
from bolax.intertwine import (
    integrated_q_norm,
    intertwine_convergence,
    intertwine_residual,
    norm_bound,
    solve_intertwiner,
    vector_identity_check,
)
from bolax.lax_gauge import (
    DIRECT,
    ResolventMethod,
    beta,
    beta_gradient,
    default_kappa,
    gauge_identity_residual,
    lax_matrix,
    resolvent_apply,
)
from bolax.log import get_logger
from bolax.spectral_energy import (
    beta_via_measure,
    bounding_shape,
    exp_energy,
    geometric_constants,
    spectral_data,
    transcendental_bounds_report,
)

logger = get_logger(__name__)

STANDARD_AMPLITUDE = 0.05
# Residuals below this are at the roundoff floor and no longer shrink with the step
ROUNDOFF_FLOOR = 1e-12


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    slack: float | None  # None when the check raised
    detail: str

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "slack": self.slack,
            "detail": self.detail,
        }


@dataclass
class SuiteReport:
    results: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(result.passed for result in self.results)

    @property
    def failures(self) -> list[CheckResult]:
        return [result for result in self.results if not result.passed]


class Context:
    """Shared inputs of the suite: config, constants and a seeded sample stream."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.spec = cfg.lattice
        self.rho = cfg.lattice.rho
        self.tol = cfg.tolerances
        self.sizes = cfg.verify
        self.consts = geometric_constants(cfg.tolerances.constants)
        self.rng = np.random.default_rng(cfg.seed)

    def random_fields(self, count: int, low: float = 0.01, high: float = 0.5) -> list[Field]:
        seeds = self.rng.integers(0, 2**31, size=count)
        amplitudes = self.rng.uniform(low, high, size=count)
        return [
            random_analytic_field(int(seed), self.spec, float(amp), 0.5)
            for seed, amp in zip(seeds, amplitudes)
        ]

    def flow_spec(self) -> LatticeSpec:
        return self.spec.model_copy(update={"n_max": self.sizes.flow_n_max})


def cosine_state(amplitude: float, spec: LatticeSpec) -> Field:
    """u = 2a cos x."""
    return make_field([(1, amplitude)], spec, symmetrize=True)


def trap_amplitude(fraction: float, rho: float, x_max: float) -> float:
    """Amplitude a with ||(2a cos x)_+||_{rho,1} = fraction * x_max."""
    return fraction * x_max / (math.sqrt(2.0) * math.exp(rho))


def _result(name: str, slack: float, detail: str) -> CheckResult:
    return CheckResult(name=name, passed=bool(slack >= 0.0), slack=float(slack), detail=detail)


# =============================================================================
# Field and constant checks
# =============================================================================


def check_constants(ctx: Context) -> CheckResult:
    consts = ctx.consts
    closed = 4.0 * math.sqrt(math.pi / math.tanh(math.pi))
    c1_alg_err = abs(algebra_constant(1.0) - closed)
    worst = max(consts.c1_err, consts.c2_err, c1_alg_err)
    shape = bounding_shape(consts)
    return _result(
        "zeta constants",
        ctx.tol.constants - worst if shape.ok else -1.0,
        f"c1={consts.c1:.10f} c2={consts.c2:.10f} x_max={consts.x_max:.8f} "
        f"A_max={consts.a_max:.8f} worst err {worst:.2e}, f critical points "
        f"{shape.critical_points}, min step {shape.min_increment:.2e}",
    )


def check_algebra_bound(ctx: Context) -> CheckResult:
    worst = 0.0
    fields = ctx.random_fields(2 * ctx.sizes.samples)
    for f, g in zip(fields[::2], fields[1::2]):
        full = multiply(f, g, truncate=False)
        for s in (1.0, 2.0):
            norms = analytic_norm(f, ctx.rho, s) * analytic_norm(g, ctx.rho, s)
            bound = algebra_constant(s) * norms
            worst = max(worst, analytic_norm(full, ctx.rho, s) / bound)
    return _result("algebra bound", 1.0 - worst, f"max ||fg||/(C_s||f||||g||) = {worst:.4f}")


def check_cauchy(ctx: Context) -> CheckResult:
    worst = 0.0
    for f in ctx.random_fields(ctx.sizes.samples):
        df = derivative(f)
        for eps in (0.05, 0.1, 0.2):
            ratio = analytic_norm(df, ctx.rho - eps, 1.0) * eps * math.e
            worst = max(worst, ratio / analytic_norm(f, ctx.rho, 1.0))
    return _result("cauchy estimate", 1.0 - worst, f"max eps*e*||f_x||/||f|| = {worst:.4f}")


def check_projections(ctx: Context) -> CheckResult:
    worst = 0.0
    for f in ctx.random_fields(ctx.sizes.samples):
        rebuilt = project(f, "plus").to_field() + project(f, "minus") + project(f, "zero")
        if not np.array_equal(rebuilt.coeffs, f.coeffs):
            return _result("projection algebra", -1.0, "C_+ + C_- + P_0 is not the identity")
        twice = hilbert(hilbert(f))
        worst = max(worst, float(np.max(np.abs(twice.coeffs + f.coeffs))))
    return _result("projection algebra", 1e-15 - worst, f"max |H^2 f + f| = {worst:.2e}")


def check_plancherel(ctx: Context) -> CheckResult:
    worst = 0.0
    for u in ctx.random_fields(ctx.sizes.samples):
        values = grid_values(u, 4 * u.n_max)
        exact = inner_l2(u, u).real
        quadrature = float(np.mean(np.abs(values) ** 2))
        worst = max(worst, abs(exact - quadrature) / exact)
    return _result("plancherel", 1e-10 - worst, f"max relative gap {worst:.2e}")


# =============================================================================
# Resolvent and gauge checks
# =============================================================================


def check_resolvent(ctx: Context) -> CheckResult:
    c1 = algebra_constant(1.0)
    neumann = ResolventMethod.neumann(tol=ctx.tol.neumann, rho=ctx.rho)
    agreement = exactness = bound_ratio = 0.0
    for u in ctx.random_fields(ctx.sizes.resolvent_samples, high=1.0):
        norm = analytic_norm(u, ctx.rho, 1.0)
        kappa = max(2.0 * c1 * norm * (1.0 + ctx.rng.uniform(0.1, 2.0)), 1.0)
        rhs = project(u, "plus")
        direct = resolvent_apply(u, kappa, rhs, DIRECT)
        series = resolvent_apply(u, kappa, rhs, neumann)
        agreement = max(agreement, float(np.max(np.abs(direct.coeffs - series.coeffs))))
        lax = lax_matrix(u, u.n_max)
        defect = (lax.entries + kappa * np.eye(u.n_max)) @ direct.coeffs - rhs.coeffs
        exactness = max(exactness, float(np.max(np.abs(defect))))
        limit = analytic_norm(rhs, ctx.rho, 1.0) / (kappa - c1 * norm)
        bound_ratio = max(bound_ratio, analytic_norm(direct, ctx.rho, 1.0) / limit)

    # free multiplier bound and self-adjointness of the dense resolvent
    free_ratio = 0.0
    zero = Field.zeros(ctx.spec.n_max)
    for g in ctx.random_fields(ctx.sizes.bound_samples):
        kappa = float(ctx.rng.uniform(1.0, 100.0))
        applied = resolvent_apply(zero, kappa, project(g, "plus"))
        norm_g = analytic_norm(project(g, "plus"), ctx.rho, 1.0)
        free_ratio = max(free_ratio, kappa * analytic_norm(applied, ctx.rho, 1.0) / norm_g)
    sample = ctx.random_fields(1)[0]
    columns = [
        resolvent_apply(sample, 50.0, PositiveField(unit)).coeffs for unit in np.eye(sample.n_max)
    ]
    resolvent = np.column_stack(columns)
    asymmetry = float(np.max(np.abs(resolvent - resolvent.conj().T)))

    slack = min(
        ctx.tol.resolvent - agreement,
        1e-12 - exactness,
        1.0 - bound_ratio,
        1.0 - free_ratio,
        1e-12 - asymmetry,
    )
    return _result(
        "resolvent equivalence",
        slack,
        f"direct/neumann {agreement:.2e}, defect {exactness:.2e}, "
        f"bound ratio {bound_ratio:.4f}, free ratio {free_ratio:.4f}",
    )


def check_gauge_identity(ctx: Context) -> CheckResult:
    worst = weighted = 0.0
    for u in ctx.random_fields(ctx.sizes.resolvent_samples):
        kappa = default_kappa(u, u.n_max, ctx.rho)
        residual = gauge_identity_residual(u, kappa, ctx.rho)
        worst = max(worst, residual.max_abs)
        weighted = max(weighted, residual.norm_rho1)
    return _result(
        "gauge identity",
        ctx.tol.gauge - worst,
        f"max |residual| {worst:.2e}, max rho-weighted norm {weighted:.2e}",
    )


def check_gradient(ctx: Context) -> CheckResult:
    h = 1e-6
    worst = 0.0
    for u in ctx.random_fields(ctx.sizes.gradient_states):
        kappa = default_kappa(u, u.n_max, ctx.rho)
        gradient = beta_gradient(u, kappa)
        for direction in ctx.random_fields(ctx.sizes.gradient_directions):
            delta = direction * (1.0 / math.sqrt(inner_l2(direction, direction).real))
            exact = inner_l2(gradient, delta).real
            fd = (beta(u + h * delta, kappa) - beta(u - h * delta, kappa)) / (2.0 * h)
            worst = max(worst, abs(fd - exact) / max(abs(exact), 1e-300))
    return _result("gradient law", ctx.tol.gradient - worst, f"max relative FD gap {worst:.2e}")


def check_beta_consistency(ctx: Context) -> CheckResult:
    worst = 0.0
    for u in ctx.random_fields(ctx.sizes.resolvent_samples, high=1.0):
        data = spectral_data(u, u.n_max)
        lam = -data.eigenvalues[0] + 1.0 + float(ctx.rng.uniform(0.0, 50.0))
        gap = abs(beta(u, lam) - beta_via_measure(data, lam))
        worst = max(worst, gap / max(1.0, abs(beta_via_measure(data, lam))))
    return _result("beta consistency", ctx.tol.beta - worst, f"max gap {worst:.2e}")


# =============================================================================
# Spectral energy and intertwining
# =============================================================================


def check_intertwining(ctx: Context) -> CheckResult:
    v = cosine_state(STANDARD_AMPLITUDE, ctx.spec)
    n, steps = ctx.spec.n_max, ctx.sizes.intertwine_steps
    solution = solve_intertwiner(v, ctx.rho, n, steps)
    residual = intertwine_residual(v, ctx.rho, n, steps, solution)
    study = intertwine_convergence(v, ctx.rho, n, [steps // 4, steps // 2, steps])
    shrinking = all(
        ratio >= 8.0 or finer <= ROUNDOFF_FLOOR
        for ratio, finer in zip(study.ratios, study.residuals[1:])
    )
    norm_excess = solution.max_norm - norm_bound(v, ctx.rho) * (1.0 + 1e-6)
    identity = vector_identity_check(v, ctx.rho, n, solution=solution)
    energy = exp_energy(v, ctx.rho, n)
    energy_gap = abs(identity.energy_via_psi - energy) / energy
    q = integrated_q_norm(v, ctx.rho, n)
    slack = min(
        ctx.tol.intertwine - residual,
        ctx.tol.intertwine - solution.inverse_defect,
        ctx.tol.intertwine - identity.lhs_minus_rhs_norm,
        ctx.tol.intertwine - energy_gap,
        -norm_excess,
        q.bound + 1e-8 - q.value,
        0.0 if shrinking else -1.0,
    )
    return _result(
        "intertwining",
        slack,
        f"residual {residual:.2e}, vector identity {identity.lhs_minus_rhs_norm:.2e}, "
        f"||W||max {solution.max_norm:.6f}, int||Q|| {q.value:.4e} <= {q.bound:.4e}",
    )


def check_transcendental(ctx: Context) -> CheckResult:
    worst = math.inf
    for u in ctx.random_fields(ctx.sizes.bound_samples, low=0.005, high=0.3):
        report = transcendental_bounds_report(u, ctx.rho, ctx.consts)
        if report.norm_plus > ctx.consts.x_max:
            continue
        worst = min(worst, *report.slack)

    sweep = [0.08, 0.04, 0.02, 0.01, 0.005]
    slacks = [
        transcendental_bounds_report(cosine_state(a, ctx.spec), ctx.rho, ctx.consts).slack
        for a in sweep
    ]
    monotone = all(b[0] < a[0] and b[1] < a[1] for a, b in zip(slacks, slacks[1:]))
    worst = min(worst, *(min(pair) for pair in slacks))
    return _result(
        "transcendental bounds",
        worst if monotone else -1.0,
        f"min slack {worst:.3e}, sweep slack shrinks monotonically: {monotone}",
    )


# =============================================================================
# Flow checks
# =============================================================================


def check_hk_conservation(ctx: Context) -> CheckResult:
    spec = ctx.flow_spec()
    u0 = cosine_state(STANDARD_AMPLITUDE, spec)
    kappa = default_kappa(u0, spec.n_max, ctx.rho)
    dt = 1.0 / (kappa * spec.n_max)
    cfg = ctx.cfg.flow_config(dt=dt, t_end=1.0, lattice=spec, record_every=16)
    _, report = evolve(u0, FlowKind.h_kappa(kappa), cfg)
    drifts = {
        "beta": report.beta_drift(),
        "P": report.relative_drift("P"),
        "E_rho": report.relative_drift("E_rho"),
        "eig": report.eigenvalue_drift(),
        "H_kappa": report.relative_drift("H_kappa"),
    }
    worst = max(drifts.values())
    detail = ", ".join(f"{key} {value:.1e}" for key, value in drifts.items())
    return _result(
        "h_kappa conservation", ctx.tol.conservation - worst, f"kappa={kappa:g}: {detail}"
    )


def check_residual_decay(ctx: Context) -> CheckResult:
    u = cosine_state(STANDARD_AMPLITUDE, ctx.spec)
    eps = ctx.rho / 6.0
    kappas = np.array(ctx.cfg.converge.kappas)
    norms = [analytic_norm(residual_field(u, k), ctx.rho - eps, 1.0) for k in kappas]
    l2 = [analytic_norm(residual_field(u, k), 0.0, 0.0) for k in kappas]
    slope = float(np.polyfit(np.log(kappas), np.log(norms), 1)[0])
    slope_l2 = float(np.polyfit(np.log(kappas), np.log(l2), 1)[0])
    slack = min(slope + 1.25, -0.8 - slope, slope_l2 + 1.25, -0.8 - slope_l2)
    return _result(
        "residual decay", slack, f"log-log slope {slope:.4f} (analytic), {slope_l2:.4f} (L2)"
    )


def check_kappa_convergence(ctx: Context) -> CheckResult:
    spec = ctx.flow_spec()
    u0 = cosine_state(STANDARD_AMPLITUDE, spec)
    converge = ctx.cfg.converge
    cfg = ctx.cfg.flow_config(lattice=spec, t_end=converge.t_end)
    table = kappa_convergence(u0, converge.kappas, converge.t_end, cfg, converge.max_workers)
    ratio_slack = min((0.3 - abs(2.0 * r - 1.0) for r in table.halving_ratios), default=0.0)
    bo_limit = 1.5 * table.rate_constant / table.kappa_max
    slack = min(ratio_slack, (bo_limit - table.bo_distance) / bo_limit if bo_limit > 0 else 0.0)
    ratios = ", ".join(f"{r:.3f}" for r in table.halving_ratios)
    return _result(
        "kappa convergence",
        slack,
        f"pair ratios [{ratios}], BO distance {table.bo_distance:.3e} vs C/kappa {bo_limit:.3e}",
    )


def check_trapping(ctx: Context) -> CheckResult:
    spec = ctx.flow_spec()
    a = trap_amplitude(0.3, ctx.rho, ctx.consts.x_max)
    u0 = cosine_state(a, spec)
    cfg = ctx.cfg.flow_config(lattice=spec, t_end=ctx.cfg.trap.t_end)
    result = trap_experiment(u0, ctx.rho, FlowKind.bo(), cfg, ctx.tol.trap)
    slack = min(
        result.x_root * (1.0 + ctx.tol.trap) - result.sup_norm,
        ctx.tol.conservation - result.energy_drift,
        result.bounds_slack,
    )
    return _result(
        "trapping",
        slack,
        f"A={result.a:.6f}, X={result.x_root:.6f}, sup||u+||={result.sup_norm:.6f}, "
        f"E drift {result.energy_drift:.1e}, bound slack {result.bounds_slack:.3e}",
    )


def check_bo_invariants(ctx: Context) -> CheckResult:
    drifts = {}
    for n_max, dt in ((ctx.spec.n_max, 1e-3), (2 * ctx.spec.n_max, 0.25e-3)):
        spec = ctx.spec.model_copy(update={"n_max": n_max})
        cfg = ctx.cfg.flow_config(dt=dt, t_end=1.0, lattice=spec, record_every=100)
        _, report = evolve(cosine_state(STANDARD_AMPLITUDE, spec), FlowKind.bo(), cfg)
        drifts[n_max] = (
            report.relative_drift("P"),
            report.relative_drift("H_BO"),
            report.eigenvalue_drift(),
        )
    coarse, fine = drifts[ctx.spec.n_max], drifts[2 * ctx.spec.n_max]
    improves = all(f <= max(c / 4.0, ROUNDOFF_FLOOR) for c, f in zip(coarse[1:], fine[1:]))
    slack = min(1e-8 - coarse[0], 1e-6 - coarse[1], 1e-5 - coarse[2], 0.0 if improves else -1.0)
    return _result(
        "bo invariants",
        slack,
        f"P {coarse[0]:.1e}, H_BO {coarse[1]:.1e} -> {fine[1]:.1e}, "
        f"eig {coarse[2]:.1e} -> {fine[2]:.1e}",
    )


CHECKS: list[tuple[str, Callable[[Context], CheckResult]]] = [
    ("zeta constants", check_constants),
    ("algebra bound", check_algebra_bound),
    ("cauchy estimate", check_cauchy),
    ("projection algebra", check_projections),
    ("plancherel", check_plancherel),
    ("resolvent equivalence", check_resolvent),
    ("gauge identity", check_gauge_identity),
    ("gradient law", check_gradient),
    ("beta consistency", check_beta_consistency),
    ("intertwining", check_intertwining),
    ("transcendental bounds", check_transcendental),
    ("h_kappa conservation", check_hk_conservation),
    ("residual decay", check_residual_decay),
    ("kappa convergence", check_kappa_convergence),
    ("trapping", check_trapping),
    ("bo invariants", check_bo_invariants),
]


def run_suite(cfg: ExperimentConfig, only: list[str] | None = None) -> SuiteReport:
    ctx = Context(cfg)
    report = SuiteReport()
    for name, check in CHECKS:
        if only is not None and name not in only:
            continue
        logger.info("check: %s", name)
        try:
            result = check(ctx)
        except BolaxError as exc:
            result = CheckResult(name=name, passed=False, slack=None, detail=str(exc))
        report.results.append(result)
    return report
