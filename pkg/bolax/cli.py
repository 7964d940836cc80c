"""
cli.py - Command-line front end

    bolax constants|verify|simulate|converge|trap --config <path> [flags]

Flags override the config file, which overrides model defaults. Artifacts go
to --out, then the file's output_dir, then BOLAX_OUTPUT_DIR. Exit codes:
0 all checks pass, 2 check failure, 3 configuration error, 4 numerical abort.
"""

import json
from pathlib import Path
from typing import Annotated, Literal, Optional

import typer
from dotenv import load_dotenv
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from bolax.artifacts import metadata, write_csv, write_json
from bolax.checks import run_suite
from bolax.config import BolaxSettings, ExperimentConfig, LatticeSpec, parse_config
from bolax.errors import BolaxError, CheckFailure
from bolax.field_core import Field, field_to_snapshot, make_field, random_analytic_field
from bolax.flows import FlowKind, evolve, kappa_convergence, trap_experiment
from bolax.lax_gauge import default_kappa
from bolax.log import configure, get_logger
from bolax.spectral_energy import geometric_constants

load_dotenv()

app = typer.Typer(
    help="Spectral laboratory for the periodic Benjamin-Ono equation.",
    no_args_is_help=True,
    add_completion=False,
)
console = Console()
logger = get_logger(__name__)

Command = Literal["constants", "verify", "simulate", "converge", "trap"]

ConfigOption = Annotated[Path, typer.Option("--config", "-c", help="Experiment JSON file.")]
OutOption = Annotated[Optional[Path], typer.Option("--out", help="Output directory.")]
SeedOption = Annotated[Optional[int], typer.Option("--seed")]
DtOption = Annotated[Optional[float], typer.Option("--dt")]
TEndOption = Annotated[Optional[float], typer.Option("--t-end")]
KappaOption = Annotated[Optional[float], typer.Option("--kappa")]
KindOption = Annotated[Optional[str], typer.Option("--kind", help="bo or h_kappa.")]
NMaxOption = Annotated[Optional[int], typer.Option("--n-max")]
RhoOption = Annotated[Optional[float], typer.Option("--rho")]


# =============================================================================
# Helpers
# =============================================================================


def initial_field(cfg: ExperimentConfig) -> Field:
    initial = cfg.initial
    if initial.kind == "random":
        return random_analytic_field(
            cfg.seed, cfg.lattice, initial.amplitude, initial.decay_margin
        )
    modes = [(mode.n, complex(mode.re, mode.im)) for mode in initial.modes]
    return make_field(modes, cfg.lattice, symmetrize=True)


def flow_kind(cfg: ExperimentConfig, u0: Field) -> FlowKind:
    if cfg.flow.kind == "bo":
        return FlowKind.bo()
    kappa = cfg.flow.kappa or default_kappa(u0, cfg.lattice.n_max, cfg.lattice.rho)
    return FlowKind.h_kappa(kappa)


def _output_dir(cfg: ExperimentConfig, settings: BolaxSettings) -> Path:
    return cfg.output_dir or settings.output_dir


def _summary(title: str, rows: dict[str, object]) -> None:
    table = Table(title=title)
    table.add_column("Quantity", style="cyan")
    table.add_column("Value", justify="right")
    for key, value in rows.items():
        table.add_row(key, f"{value:.10g}" if isinstance(value, float) else str(value))
    console.print(table)


# =============================================================================
# Dispatch
# =============================================================================


def _constants(cfg: ExperimentConfig, out: Path) -> int:
    consts = geometric_constants(cfg.tolerances.constants)
    path = write_json(out / "constants.json", consts.as_dict(), metadata(cfg, "constants"))
    _summary(
        "Geometric constants",
        {"c1": consts.c1, "c2": consts.c2, "x_max": consts.x_max, "A_max": consts.a_max},
    )
    console.print(f"[dim]wrote {path}[/dim]")
    return 0


def _verify(cfg: ExperimentConfig, out: Path) -> int:
    report = run_suite(cfg)
    table = Table(title="Verify suite")
    table.add_column("Check", style="cyan")
    table.add_column("Status", justify="center")
    table.add_column("Slack", justify="right")
    table.add_column("Details", style="dim")
    for result in report.results:
        table.add_row(
            result.name,
            "[green]PASS[/green]" if result.passed else "[red]FAIL[/red]",
            "-" if result.slack is None else f"{result.slack:.3e}",
            result.detail,
        )
    console.print(table)
    payload = {"passed": report.passed, "checks": [r.as_dict() for r in report.results]}
    path = write_json(out / "verify.json", payload, metadata(cfg, "verify"))
    console.print(f"[dim]wrote {path}[/dim]")
    if not report.passed:
        names = ", ".join(result.name for result in report.failures)
        raise CheckFailure("verify", f"failed checks: {names}")
    return 0


def _simulate(cfg: ExperimentConfig, out: Path) -> int:
    u0 = initial_field(cfg)
    kind = flow_kind(cfg, u0)
    trajectory, report = evolve(u0, kind, cfg.flow_config())
    meta = metadata(cfg, "simulate") | {"flow": kind.label}
    csv_path = write_csv(out / "simulate.csv", report.to_frame(), meta)
    snapshot = json.loads(field_to_snapshot(trajectory[-1], cfg.lattice))
    write_json(out / "final_state.json", snapshot, meta)
    _summary(
        f"Invariant drift ({kind.label})",
        {
            "P": report.relative_drift("P"),
            "H_BO": report.relative_drift("H_BO"),
            "E_rho": report.relative_drift("E_rho"),
            "eigenvalues": report.eigenvalue_drift(),
            "beta probes": report.beta_drift() if cfg.flow.lambda_probes else 0.0,
        },
    )
    console.print(f"[dim]wrote {csv_path}[/dim]")
    return 0


def _converge(cfg: ExperimentConfig, out: Path) -> int:
    u0 = initial_field(cfg)
    settings = cfg.converge
    table = kappa_convergence(
        u0, settings.kappas, settings.t_end, cfg.flow_config(), settings.max_workers
    )
    meta = metadata(cfg, "converge") | {
        "bo_distance": table.bo_distance,
        "rate_constant": table.rate_constant,
        "eps": table.eps,
    }
    path = write_csv(out / "converge.csv", table.to_frame(), meta)
    console.print(table.to_frame().to_string(index=False))
    _summary("Distance to BO", {"kappa_max": table.kappa_max, "sup L2": table.bo_distance})
    console.print(f"[dim]wrote {path}[/dim]")
    return 0


def _trap(cfg: ExperimentConfig, out: Path) -> int:
    u0 = initial_field(cfg)
    kind = flow_kind(cfg, u0)
    flow_cfg = cfg.flow_config(t_end=cfg.trap.t_end)
    result = trap_experiment(u0, cfg.lattice.rho, kind, flow_cfg, cfg.tolerances.trap)
    path = write_json(out / "trap.json", result.as_dict(), metadata(cfg, "trap"))
    _summary("Trapping", result.as_dict())
    console.print(f"[dim]wrote {path}[/dim]")
    if not (result.trapped and result.bounds_ok):
        raise CheckFailure(
            "trapping", f"sup norm {result.sup_norm:.6g} vs X_max {result.x_root:.6g}"
        )
    return 0


HANDLERS = {
    "constants": _constants,
    "verify": _verify,
    "simulate": _simulate,
    "converge": _converge,
    "trap": _trap,
}


def dispatch(cfg: ExperimentConfig, command: Command, settings: BolaxSettings | None = None) -> int:
    """Run ``command`` and return its exit code; errors map to their own codes."""
    settings = settings or BolaxSettings()
    out = _output_dir(cfg, settings)
    logger.info("running %s (config %s)", command, cfg.fingerprint()[:12])
    try:
        return HANDLERS[command](cfg, out)
    except BolaxError as exc:
        check = getattr(exc, "check", type(exc).__name__)
        console.print(Panel(str(exc), title=f"[bold]{check}[/bold]", border_style="red"))
        return exc.exit_code


def _run(command: Command, config: Optional[Path], **flags: object) -> None:
    settings = BolaxSettings()
    configure(settings.log_level)
    try:
        if config is None:
            cfg = ExperimentConfig(lattice=LatticeSpec(n_max=32), output_dir=flags.get("out"))
        else:
            cfg = parse_config(config, flags)
    except BolaxError as exc:
        console.print(Panel(str(exc), title="[bold]configuration[/bold]", border_style="red"))
        raise typer.Exit(exc.exit_code) from exc
    code = dispatch(cfg, command, settings)
    if code:
        raise typer.Exit(code)


# =============================================================================
# Commands
# =============================================================================


@app.command()
def constants(
    config: Annotated[Optional[Path], typer.Option("--config", "-c")] = None,
    out: OutOption = None,
) -> None:
    """Geometric constants c1, c2, x_max and A_max."""
    _run("constants", config, out=out)


@app.command()
def verify(
    config: ConfigOption,
    out: OutOption = None,
    seed: SeedOption = None,
    n_max: NMaxOption = None,
    rho: RhoOption = None,
) -> None:
    """Run the invariant and property suite."""
    _run("verify", config, out=out, seed=seed, n_max=n_max, rho=rho)


@app.command()
def simulate(
    config: ConfigOption,
    out: OutOption = None,
    seed: SeedOption = None,
    dt: DtOption = None,
    t_end: TEndOption = None,
    kappa: KappaOption = None,
    kind: KindOption = None,
    n_max: NMaxOption = None,
    rho: RhoOption = None,
) -> None:
    """Evolve one trajectory and write its invariant report."""
    _run(
        "simulate",
        config,
        out=out,
        seed=seed,
        dt=dt,
        t_end=t_end,
        kappa=kappa,
        kind=kind,
        n_max=n_max,
        rho=rho,
    )


@app.command()
def converge(
    config: ConfigOption,
    out: OutOption = None,
    seed: SeedOption = None,
    dt: DtOption = None,
    n_max: NMaxOption = None,
    rho: RhoOption = None,
) -> None:
    """Sweep kappa and measure convergence of H_kappa trajectories to BO."""
    _run("converge", config, out=out, seed=seed, dt=dt, n_max=n_max, rho=rho)


@app.command()
def trap(
    config: ConfigOption,
    out: OutOption = None,
    seed: SeedOption = None,
    dt: DtOption = None,
    kappa: KappaOption = None,
    kind: KindOption = None,
    n_max: NMaxOption = None,
    rho: RhoOption = None,
) -> None:
    """Check that the trajectory stays inside the trapping region."""
    _run(
        "trap",
        config,
        out=out,
        seed=seed,
        dt=dt,
        kappa=kappa,
        kind=kind,
        n_max=n_max,
        rho=rho,
    )


if __name__ == "__main__":
    app()
