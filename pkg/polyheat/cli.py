#!/usr/bin/env python3
"""
Command Line Interface for polyheat

One subcommand per experiment family. Every run writes a directory with
manifest.json, fixed-schema CSV files and a markdown summary.
"""

import logging
import math
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import click
import numpy as np
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.table import Table

from polyheat import __version__
from polyheat.core import decay, grid, kernel, orlicz, semigroup, solver, specfun
from polyheat.core.exceptions import CheckFailedError, HypothesisViolation, PolyheatError, RegimeViolation
from polyheat.utils.config import RunConfig, build_config
from polyheat.utils.report_generator import ReportGenerator

console = Console()
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_HYPOTHESIS = 2

SWEEP_TIMES = tuple(np.geomspace(1e-2, 1e2, 10))
CONTINUITY_TIMES = tuple(np.geomspace(1e-1, 1e-4, 7))
BETA_TOLERANCE = 1e-10
WEIGHT_STABILITY = 1e-6
LIPSCHITZ_Q = 4.0
LIPSCHITZ_PAIRS = 20

Results = Tuple[Dict[str, Any], Dict[str, Any]]


def _setup_logging(verbose: bool):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, rich_tracebacks=True, show_path=False)],
        force=True,
    )


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return "inf" if math.isinf(value) else f"{value:.6g}"
    return str(value)


def _spinner(description: str) -> Progress:
    progress = Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        console=console,
        transient=True,
    )
    progress.add_task(description, total=None)
    return progress


def _grid_spec(config: RunConfig) -> grid.GridSpec:
    g = config.grid
    return grid.GridSpec(g.dimension, g.points_per_axis, g.box_length)


def _nonlinearity(config: RunConfig) -> solver.NonlinearitySpec:
    n = config.nonlinearity
    return solver.NonlinearitySpec(m=n.m, lam=n.lam, sign=n.sign)


def _initial_field(config: RunConfig) -> grid.GridField:
    """The --input field when given, otherwise a Gaussian datum of exp L^2 size data.amplitude."""
    if config.data.input:
        field = grid.load_field(config.data.input)
        logger.info(f"Loaded field {config.data.input} on {field.spec.shape}")
        return field
    return solver.gaussian_datum(_grid_spec(config), config.data.amplitude, config.data.width)


# ---------------------------------------------------------------------------
# Subcommand bodies: each takes (config, report, jobs) and returns (results, diagnostics)
# ---------------------------------------------------------------------------


def _run_kernel_profile(config: RunConfig, report: ReportGenerator, jobs: int) -> Results:
    N, d = config.grid.dimension, config.operator.d
    with _spinner(f"Tabulating E_{d}(1, r) for N={N}..."):
        profile = kernel.tabulate_profile(N, d, n_radii=config.operator.profile_radii, workers=jobs)
    profile.export_csv(report.path("profile.csv"))
    console.print(f"[green]✓[/green] Tabulated {profile.radii.size} radii, "
                  f"{profile.sign_changes} sign change(s)")

    fit = kernel.fit_majorant(profile, exponent=config.operator.majorant_exponent)
    fit.save(report.path("majorant.json"))
    console.print(f"[green]✓[/green] Majorant K={fit.K:.6g}, mu={fit.mu:.6g}, exponent={fit.exponent:.6g}")

    results = {
        "value_at_zero": profile.value_at_zero,
        "sign_changes": profile.sign_changes,
        "r_max": float(profile.radii[-1]),
        "majorant": fit.to_dict(),
        "majorant_holds": fit.holds_on(profile),
    }
    return results, {"quad_error": float(profile.quad_error.max())}


def _run_verify_smoothing(config: RunConfig, report: ReportGenerator, jobs: int) -> Results:
    spec = _grid_spec(config)
    d = config.operator.d
    rng = np.random.default_rng(config.seed)
    fields = [grid.random_smooth_field(spec, rng) for _ in range(config.data.corpus_size)]

    with _spinner(f"Sweeping {len(fields)} fields x {len(SWEEP_TIMES)} times..."):
        constant = semigroup.smoothing_sweep(fields, SWEEP_TIMES, d, jobs=jobs)
    constant.export_csv(report.path("sweep.csv"))
    constant.save(report.path("smoothing_constant.json"))
    H = constant.value
    console.print(f"[green]✓[/green] Empirical smoothing constant H = {H:.6g}")

    rows: List[Tuple[Any, ...]] = []
    with _spinner("Checking the exp L^2 smoothing inequalities..."):
        for i, field in enumerate(fields):
            for t in SWEEP_TIMES:
                for p in (1.0, 2.0):
                    check = semigroup.orlicz_smoothing_check(field, t, p, d, H)
                    rows.append((i, float(t), "lp", p, check.lhs, check.rhs, check.holds))
                for q in (1.0, 2.0, 4.0):
                    check = semigroup.orlicz_smoothing_check_mixed(field, t, q, d, H)
                    rows.append((i, float(t), "mixed", q, check.lhs, check.rhs, check.holds))
    report.write_csv("checks.csv", ["field", "t", "form", "exponent", "lhs", "rhs", "holds"], rows)

    failures = sum(1 for row in rows if not row[-1])
    results = {"H": H, "p_equals_q": constant.p_equals_q, "checks": len(rows), "failures": failures}
    if failures:
        raise CheckFailedError(f"{failures} of {len(rows)} smoothing checks failed", results)
    console.print(f"[green]✓[/green] All {len(rows)} smoothing checks hold")
    return results, {"samples": len(constant.samples)}


def _run_norm(config: RunConfig, report: ReportGenerator, jobs: int) -> Results:
    field = _initial_field(config)
    phi = orlicz.YoungFunction.from_name(config.data.phi)
    value = orlicz.luxemburg_norm(field, phi)
    logger.info(f"Luxemburg norm ({phi.label}) = {value!r}")
    console.print(f"[green]✓[/green] ||u||_{phi.label} = {value:.15g}")

    results: Dict[str, Any] = {"phi": phi.label, "luxemburg_norm": value}
    results["lp_norms"] = {_fmt(p): grid.lp_norm(field, p) for p in config.norms.p}
    if config.data.alpha is not None:
        results["modular"] = orlicz.orlicz_integral(field, phi, config.data.alpha)
    return results, {"boundary_ratio": grid.boundary_ratio(field)}


def _source_field(config: RunConfig) -> grid.GridField:
    if config.data.witness and not config.data.input:
        return orlicz.witness_function(config.data.witness, _grid_spec(config), config.data.witness_r)
    return _initial_field(config)


def _run_rearrange(config: RunConfig, report: ReportGenerator, jobs: int) -> Results:
    field = _source_field(config)
    profile = orlicz.rearrange(field)
    profile.export_csv(report.path("rearrangement.csv"))

    equimeasurable = {}
    for p in (1.0, 2.0, 4.0):
        direct = grid.lp_norm(field, p)
        equimeasurable[_fmt(p)] = abs(profile.lp_norm(p) - direct) / direct if direct > 0 else 0.0
    bound = orlicz.sharp_norm_lower_bound(field)
    results: Dict[str, Any] = {
        "equimeasurability_error": equimeasurable,
        "sharp_bound": bound.to_dict(),
    }

    if config.data.witness == "discontinuity" and not config.data.input:
        upper = orlicz.discontinuity_window(field.spec.dimension)
        r = np.geomspace(0.01, 0.99 * upper, 200)
        expected = np.sqrt(np.log(math.e / r))
        deviation = float(np.max(np.abs(profile.sharpsharp_at(r) / expected - 1.0)))
        results["witness_profile_deviation"] = deviation
        console.print(f"[green]✓[/green] u## matches sqrt(log(e/r)) on (0.01, {upper:.4g}) "
                      f"within {deviation:.2%}")
    console.print(f"[green]✓[/green] Rearranged {profile.u_sharp.size} cells, "
                  f"sharp-norm ratio {bound.ratio:.6g}")
    return results, {}


def _run_witness(config: RunConfig, report: ReportGenerator, jobs: int) -> Results:
    which = config.data.witness or "orlleb_i"
    spec = _grid_spec(config)
    field = orlicz.witness_function(which, spec, config.data.witness_r)
    grid.save_field(field, report.path("field.bin"))
    if spec.dimension == 1:
        grid.export_csv(field, report.path("field.csv"))

    results: Dict[str, Any] = {"witness": which, "sup": field.sup, "exp_l2_norm": orlicz.exp_l2_norm(field)}
    if config.data.alpha is not None:
        n = spec.points_per_axis
        with _spinner(f"Refinement scan at alpha={config.data.alpha:g}..."):
            scan = orlicz.membership_scan(which, config.data.alpha, spec.dimension, spec.box_length,
                                          resolutions=(n // 4, n // 2, n), r=config.data.witness_r)
        results["membership"] = scan.to_dict()
        verdict = "[red]diverges[/red]" if scan.diverges else "[green]converges[/green]"
        console.print(f"Modular at alpha={config.data.alpha:g} {verdict} under refinement")
    if which == "discontinuity":
        d = config.operator.d
        coarse_spec = grid.GridSpec(spec.dimension, spec.points_per_axis // 2, spec.box_length)
        with _spinner("Measuring the distance to the datum as t -> 0..."):
            scan = semigroup.continuity_scan(field, CONTINUITY_TIMES, d)
            coarse_floor = semigroup.continuity_floor_under_refinement(
                lambda s: orlicz.witness_function(which, s), [coarse_spec], CONTINUITY_TIMES, d)[0]
        report.write_csv("continuity.csv", ["t", "distance"], zip(scan.times, scan.distances))
        results["continuity"] = {
            **scan.to_dict(),
            "coarse_floor": coarse_floor,
            "refines_upward": scan.floor >= coarse_floor,
        }
        console.print(f"Distance to the datum stays in [{scan.floor:.4g}, {max(scan.distances):.4g}] "
                      f"for t in [{min(scan.times):g}, {max(scan.times):g}]")
    return results, {"boundary_ratio": grid.boundary_ratio(field)}


def _picard_table(name: str, picard: solver.PicardReport) -> Table:
    table = Table(title=name, show_header=True, header_style="bold magenta")
    table.add_column("Quantity", style="cyan")
    table.add_column("Value", style="green")
    table.add_row("Iterations", str(picard.iterations))
    table.add_row("Converged", "✓" if picard.converged else "✗")
    table.add_row("Stop reason", picard.stop_reason)
    table.add_row("Metric", picard.metric)
    factors = picard.contraction_factors
    table.add_row("Largest contraction factor", _fmt(max(factors)) if factors else "-")
    return table


def _solve(config: RunConfig, u0: grid.GridField):
    s = config.solver
    with _spinner(f"Picard iteration on {s.steps} steps up to T={s.T:g}..."):
        return solver.duhamel_solve(u0, _nonlinearity(config), config.operator.d, s.T, s.steps,
                                    p_track=config.norms.p, tol=s.tol, max_iter=s.max_iter)


def _run_solve(config: RunConfig, report: ReportGenerator, jobs: int) -> Results:
    u0 = _initial_field(config)
    trajectory, picard = _solve(config, u0)
    trajectory.export_norms_csv(report.path("norms.csv"))
    console.print(_picard_table("Picard iteration", picard))
    if not picard.converged:
        console.print(f"[yellow]⚠️  Picard iteration did not converge ({picard.stop_reason})[/yellow]")
    results = {"picard": picard.to_dict(), "final_norms": _final_norms(trajectory)}
    return results, {"boundary_ratio": grid.boundary_ratio(trajectory.final)}


def _final_norms(trajectory: solver.Trajectory) -> Dict[str, float]:
    return {_fmt(p): float(trajectory.norm(p)[-1]) for p in trajectory.tracked}


def _run_split_solve(config: RunConfig, report: ReportGenerator, jobs: int) -> Results:
    s = config.solver
    u0 = _initial_field(config)
    with _spinner("Solving the smooth and the perturbed problems..."):
        split = solver.split_solve(u0, _nonlinearity(config), config.operator.d, s.T, s.steps, s.eps,
                                   tol=s.tol, max_iter=s.max_iter, p_track=config.norms.p,
                                   amplitude_cap=s.amplitude_cap)
    split.v.export_norms_csv(report.path("v_norms.csv"))
    split.w.export_norms_csv(report.path("w_norms.csv"))
    console.print(_picard_table("Smooth part v", split.v_report))
    console.print(_picard_table("Perturbation w", split.w_report))
    console.print(f"[green]✓[/green] sup_t ||v + w - u||_2 / sup_t ||u||_2 = {split.residual:.3e}")

    nonlinearity = _nonlinearity(config)
    size = s.eps if nonlinearity.lam == 0 else min(s.eps, 0.5 / math.sqrt(nonlinearity.lam * LIPSCHITZ_Q))
    pairs = solver.perturbation_pairs(u0.spec, np.random.default_rng(config.seed), LIPSCHITZ_PAIRS, size)
    lipschitz = solver.perturbation_lipschitz(nonlinearity, split.v.fields[0], pairs, LIPSCHITZ_Q)
    console.print(f"[green]✓[/green] Perturbation Lipschitz constant C_{LIPSCHITZ_Q:g} = {lipschitz.constant:.6g} "
                  f"on {len(lipschitz.ratios)} pairs")
    results = {
        "residual": split.residual,
        "v": split.v_report.to_dict(),
        "w": split.w_report.to_dict(),
        "direct": split.direct_report.to_dict(),
        "perturbation_lipschitz": lipschitz.to_dict(),
    }
    return results, {}


def _run_decay(config: RunConfig, report: ReportGenerator, jobs: int) -> Results:
    N, d = config.grid.dimension, config.operator.d
    admissible = decay.admissible_p_range(config.nonlinearity.m, N, d)
    ps = [p for p in config.norms.p if admissible.contains(p)]
    if not ps:
        raise RegimeViolation(
            f"none of p = {', '.join(_fmt(p) for p in config.norms.p)} is admissible; "
            f"need p in {admissible.description}"
        )

    u0 = _initial_field(config)
    trajectory, picard = _solve(config, u0)
    trajectory.export_norms_csv(report.path("norms.csv"))
    fits = [decay.fit_decay(trajectory, p) for p in ps]
    path = report.path("decay.csv")
    with open(path, "w") as f:
        f.write(decay.DecayFit.CSV_HEADER + "\n")
        for fit in fits:
            f.write(fit.csv_row() + "\n")

    table = Table(title="Decay Exponents", show_header=True, header_style="bold magenta")
    table.add_column("p", style="cyan")
    table.add_column("sigma (theory)", style="green")
    table.add_column("sigma (fitted)", style="green")
    table.add_column("r²", style="yellow")
    table.add_column("Passes", style="red")
    for fit in fits:
        table.add_row(_fmt(fit.p), _fmt(fit.sigma_theory), _fmt(fit.sigma_hat), _fmt(fit.r_squared),
                      "✓" if fit.passes() else "✗")
    console.print(table)

    results = {
        "admissible": admissible.to_dict(),
        "picard": picard.to_dict(),
        "fits": [fit.to_dict() for fit in fits],
        "all_pass": all(fit.passes() for fit in fits),
    }
    return results, {"boundary_ratio": grid.boundary_ratio(trajectory.final)}


def _weight_entry(integral: semigroup.WeightIntegral) -> Dict[str, float]:
    return {"value": integral.value, "refined": integral.refined, "stability": integral.stability}


def _run_certify_log(config: RunConfig, report: ReportGenerator, jobs: int) -> Results:
    N, d = config.grid.dimension, config.operator.d
    threshold = decay.log_root() ** (-2.0 * d / N)
    taus = threshold * np.geomspace(1.0, 1e6, config.data.samples)
    certificate = decay.log_inequality_certificate(N, d, taus)

    # kappa is only integrable above N = 4d; certify it on the nearest such dimension
    N_kappa = max(N, 4 * d + 1)
    q_kappa = N_kappa / d
    kappa_integral = semigroup.integrate_weight(lambda t: semigroup.kappa(t, N_kappa, q_kappa, d))
    zeta_integral = semigroup.integrate_weight(semigroup.zeta)

    results = {
        "a_root": certificate.a_root,
        "threshold": certificate.threshold,
        "samples": certificate.samples,
        "holds_all": certificate.holds_all,
        "worst_ratio": certificate.worst_ratio,
        "kappa": {"N": N_kappa, "q": q_kappa, **_weight_entry(kappa_integral)},
        "zeta": _weight_entry(zeta_integral),
    }
    console.print(f"[green]✓[/green] a = {certificate.a_root:.15g}, threshold a^(-2d/N) = {threshold:.6g}")
    if not certificate.holds_all:
        raise CheckFailedError(f"log inequality fails, worst ratio {certificate.worst_ratio:.6g}", results)
    for name, integral in (("kappa", kappa_integral), ("zeta", zeta_integral)):
        if integral.stability > WEIGHT_STABILITY:
            raise CheckFailedError(f"integral of {name} is unstable ({integral.stability:.2e})", results)
        console.print(f"[green]✓[/green] int {name} = {integral.value:.12g}")
    return results, {}


def _run_verify_gamma(config: RunConfig, report: ReportGenerator, jobs: int) -> Results:
    rng = np.random.default_rng(config.seed)
    bounds = specfun.check_gamma_bounds(np.geomspace(1.0, 150.0, 60))
    minimum, argmin = specfun.gamma_lower_bound(np.linspace(0.05, 10.0, 2000))

    rows = []
    for x, y in rng.uniform(0.5, 5.0, size=(config.data.corpus_size, 2)):
        closed = specfun.beta(x, y)
        quad = specfun.beta_by_quadrature(x, y)
        rows.append((float(x), float(y), closed, quad, abs(closed - quad) / quad))
    report.write_csv("beta.csv", ["x", "y", "beta", "quadrature", "rel_err"], rows)
    worst = max(row[-1] for row in rows)

    results = {
        "stirling_constant": bounds.constant,
        "stirling_monotone": bounds.monotone_trend,
        "gamma_min": minimum,
        "gamma_argmin": argmin,
        "beta_max_rel_err": worst,
    }
    if worst > BETA_TOLERANCE:
        raise CheckFailedError(f"beta disagrees with its integral by {worst:.2e}", results)
    console.print(f"[green]✓[/green] Beta matches quadrature on {len(rows)} points (max rel err {worst:.2e})")
    console.print(f"[green]✓[/green] min Gamma = {minimum:.10g} at x = {argmin:.6g}")
    return results, {}


RUNNERS: Dict[str, Callable[[RunConfig, ReportGenerator, int], Results]] = {
    "kernel-profile": _run_kernel_profile,
    "verify-smoothing": _run_verify_smoothing,
    "norm": _run_norm,
    "rearrange": _run_rearrange,
    "witness": _run_witness,
    "solve": _run_solve,
    "split-solve": _run_split_solve,
    "decay": _run_decay,
    "certify-log": _run_certify_log,
    "verify-gamma": _run_verify_gamma,
}


def run(config: RunConfig, jobs: int = 1) -> int:
    """
    Execute one configured run and persist it.

    Returns:
        0 on success, 2 on a hypothesis or regime violation, 1 on any other error
    """
    report = ReportGenerator(str(Path(config.output_dir) / config.command))
    report.prepare()
    started = time.perf_counter()
    results: Dict[str, Any] = {}
    diagnostics: Dict[str, Any] = {}
    status, code = "ok", EXIT_OK
    try:
        results, diagnostics = RUNNERS[config.command](config, report, max(jobs, 1))
        ratio = diagnostics.get("boundary_ratio", 0.0)
        if ratio > grid.BOUNDARY_TOLERANCE:
            console.print(f"[yellow]⚠️  Field reaches the box edge (ratio {ratio:.2e}); increase --L[/yellow]")
            logger.warning(f"{config.command}: boundary ratio {ratio:.3e} exceeds {grid.BOUNDARY_TOLERANCE:.0e}")
    except HypothesisViolation as e:
        status, code = "hypothesis_violation", EXIT_HYPOTHESIS
        results = {"error": str(e), "error_type": type(e).__name__}
        console.print(f"[red]✗[/red] Hypothesis violated: {e}")
        logger.error(f"{config.command}: {e}")
    except PolyheatError as e:
        status, code = "error", EXIT_ERROR
        results = {"error": str(e), "error_type": type(e).__name__}
        if isinstance(e, CheckFailedError):
            results["details"] = e.details
        console.print(f"[red]✗[/red] {config.command} failed: {e}")
        logger.error(f"{config.command}: {e}")
    except Exception as e:
        status, code = "error", EXIT_ERROR
        results = {"error": str(e), "error_type": type(e).__name__}
        console.print(f"[red]✗[/red] Unexpected error: {e}")
        logger.exception(f"{config.command} crashed")

    diagnostics["elapsed_seconds"] = round(time.perf_counter() - started, 3)
    report.write_manifest(config, results, diagnostics, status)
    report.generate_markdown_report(config, results, status)
    console.print(f"\n[green]Run saved to: {report.output_dir}[/green]")
    return code


# ---------------------------------------------------------------------------
# click surface
# ---------------------------------------------------------------------------

FLAG_KEYS = {
    "N": "grid.dimension",
    "n": "grid.points_per_axis",
    "L": "grid.box_length",
    "d": "operator.d",
    "exponent": "operator.majorant_exponent",
    "radii": "operator.profile_radii",
    "m": "nonlinearity.m",
    "lam": "nonlinearity.lam",
    "sign": "nonlinearity.sign",
    "T": "solver.T",
    "steps": "solver.steps",
    "tol": "solver.tol",
    "max_iter": "solver.max_iter",
    "eps": "solver.eps",
    "cap": "solver.amplitude_cap",
    "p": "norms.p",
    "amp": "data.amplitude",
    "width": "data.width",
    "input_path": "data.input",
    "witness": "data.witness",
    "r": "data.witness_r",
    "alpha": "data.alpha",
    "phi": "data.phi",
    "corpus": "data.corpus_size",
    "samples": "data.samples",
}


def _grid_options(f):
    f = click.option("--L", "L", type=float, help="Box side length")(f)
    f = click.option("--n", "n", type=int, help="Grid points per axis (power of two)")(f)
    f = click.option("--N", "N", type=int, help="Spatial dimension")(f)
    return f


def _operator_options(f):
    return click.option("--d", "d", type=int, help="Order d of (-Laplacian)^d")(f)


def _nonlinearity_options(f):
    f = click.option("--sign", type=click.Choice(["-1", "0", "1"]), help="Sign of f")(f)
    f = click.option("--lam", type=float, help="Exponential rate lambda")(f)
    f = click.option("--m", "m", type=float, help="Power m of |u|^(m-1) u")(f)
    return f


def _solver_options(f):
    f = click.option("--max-iter", "max_iter", type=int, help="Picard iteration cap")(f)
    f = click.option("--tol", type=float, help="Relative Picard tolerance")(f)
    f = click.option("--steps", type=int, help="Uniform time steps")(f)
    f = click.option("--T", "T", type=float, help="Final time")(f)
    return f


def _datum_options(f):
    f = click.option("--input", "input_path", type=click.Path(exists=True), help="Initial field file")(f)
    f = click.option("--width", type=float, help="Gaussian datum width")(f)
    f = click.option("--amp", type=float, help="exp L^2 size of the Gaussian datum")(f)
    f = click.option("--p", "p", type=str, multiple=True, help="Tracked Lebesgue exponent (repeatable, 'inf' allowed)")(f)
    return f


def _overrides(options: Dict[str, Any]) -> Dict[str, Any]:
    flat = {}
    for name, value in options.items():
        if value is None or value == ():
            continue
        if name == "p":
            value = list(value)
        flat[FLAG_KEYS[name]] = value
    return flat


def _invoke(ctx: click.Context, command: str, options: Dict[str, Any]):
    obj = ctx.obj
    overrides = _overrides(options)
    if obj.get("output_dir"):
        overrides["output_dir"] = obj["output_dir"]
    if obj.get("seed") is not None:
        overrides["seed"] = obj["seed"]
    try:
        config = build_config(command, obj.get("config"), overrides)
    except PolyheatError as e:
        console.print(f"[red]✗[/red] Invalid configuration: {e}")
        ctx.exit(EXIT_ERROR)

    console.print(Panel.fit(
        f"[bold cyan]{command}[/bold cyan]\n"
        f"Grid: N={config.grid.dimension}, n={config.grid.points_per_axis}, L={config.grid.box_length:g}\n"
        f"Operator order d={config.operator.d}\n"
        f"Output: {config.output_dir}",
        title="Run Configuration"
    ))
    ctx.exit(run(config, jobs=obj.get("jobs", 1)))


@click.group()
@click.version_option(version=__version__)
@click.option("--config", "config_file", type=click.Path(exists=True), help="YAML config file (dotted keys)")
@click.option("--output-dir", type=click.Path(), help="Directory receiving run folders")
@click.option("--jobs", type=int, default=1, show_default=True, help="Worker threads for sweeps and quadrature")
@click.option("--seed", type=int, help="Seed for random corpora")
@click.option("--verbose", "-v", is_flag=True, help="Debug logging")
@click.pass_context
def main(ctx: click.Context, config_file: Optional[str], output_dir: Optional[str], jobs: int,
         seed: Optional[int], verbose: bool):
    """
    🔥 polyheat

    Numerical laboratory for the polyharmonic heat equation
    u_t + (-Laplacian)^d u = f(u) with exponentially growing nonlinearities.
    """
    _setup_logging(verbose)
    ctx.obj = {"config": config_file, "output_dir": output_dir, "jobs": jobs, "seed": seed}


@main.command("kernel-profile")
@click.option("--N", "N", type=int, help="Spatial dimension")
@_operator_options
@click.option("--radii", type=int, help="Number of tabulated radii")
@click.option("--exponent", type=float, help="Majorant exponent (default 2d/(2d-1))")
@click.pass_context
def kernel_profile(ctx, **options):
    """
    Tabulate E_d(1, r) and fit the exponential majorant.

    Example: polyheat kernel-profile --d 2 --N 1
    """
    _invoke(ctx, "kernel-profile", options)


@main.command("verify-smoothing")
@_grid_options
@_operator_options
@click.option("--corpus", type=int, help="Number of random fields")
@click.pass_context
def verify_smoothing(ctx, **options):
    """Sweep L^p-L^q smoothing ratios and check the exp L^2 smoothing inequalities."""
    _invoke(ctx, "verify-smoothing", options)


@main.command()
@_grid_options
@click.option("--phi", type=str, help="Young function: expl2, phi8 or power:<p>")
@click.option("--alpha", type=float, help="Also report the modular at this scale")
@_datum_options
@click.pass_context
def norm(ctx, **options):
    """
    Luxemburg norm of a field.

    Example: polyheat norm --phi expl2 --input field.bin
    """
    _invoke(ctx, "norm", options)


@main.command()
@_grid_options
@click.option("--witness", type=click.Choice(list(orlicz.WITNESSES)), help="Rearrange a witness function")
@click.option("--r", "r", type=float, help="Exponent r for orlleb_iii")
@_datum_options
@click.pass_context
def rearrange(ctx, **options):
    """Decreasing rearrangement u# and its running average u##."""
    _invoke(ctx, "rearrange", options)


@main.command()
@_grid_options
@_operator_options
@click.option("--witness", type=click.Choice(list(orlicz.WITNESSES)), help="Witness function")
@click.option("--r", "r", type=float, help="Exponent r for orlleb_iii")
@click.option("--alpha", type=float, help="Scale for the refinement membership scan")
@click.pass_context
def witness(ctx, **options):
    """Sample a witness function; optionally scan its modular under refinement."""
    _invoke(ctx, "witness", options)


@main.command()
@_grid_options
@_operator_options
@_nonlinearity_options
@_solver_options
@_datum_options
@click.pass_context
def solve(ctx, **options):
    """Picard iteration on the Duhamel formulation."""
    _invoke(ctx, "solve", _sign_to_int(options))


@main.command("split-solve")
@_grid_options
@_operator_options
@_nonlinearity_options
@_solver_options
@click.option("--eps", type=float, help="exp L^2 size of the rough remainder")
@click.option("--cap", type=float, help="Clip the smooth part v0 to [-cap, cap]")
@_datum_options
@click.pass_context
def split_solve(ctx, **options):
    """Split u0 = v0 + w0, solve both problems and compare with the direct solve."""
    _invoke(ctx, "split-solve", _sign_to_int(options))


@main.command("decay")
@_grid_options
@_operator_options
@_nonlinearity_options
@_solver_options
@_datum_options
@click.pass_context
def decay_command(ctx, **options):
    """
    Fit the decay exponent of a small-data solution.

    Example: polyheat decay --m 9 --N 1 --d 2 --p 9 --amp 0.01
    """
    _invoke(ctx, "decay", _sign_to_int(options))


@main.command("certify-log")
@click.option("--N", "N", type=int, help="Spatial dimension")
@_operator_options
@click.option("--samples", type=int, help="Number of sampled tau")
@click.pass_context
def certify_log(ctx, **options):
    """Certify the logarithmic inequality and the finiteness of the weight integrals."""
    _invoke(ctx, "certify-log", options)


@main.command("verify-gamma")
@click.option("--corpus", type=int, help="Number of random Beta arguments")
@click.pass_context
def verify_gamma(ctx, **options):
    """Check Gamma bounds and Beta against its defining integral."""
    _invoke(ctx, "verify-gamma", options)


def _sign_to_int(options: Dict[str, Any]) -> Dict[str, Any]:
    if options.get("sign") is not None:
        options["sign"] = int(options["sign"])
    return options


if __name__ == "__main__":
    main()
