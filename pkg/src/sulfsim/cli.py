"""Command-line front end.

Exit codes: 0 success, 2 invalid config/usage, 3 numerical abort,
4 missing or mismatched data.  Every command is a pure function of
(config file, flags, seed); manifests record output checksums so
reruns can be verified byte-for-byte.
"""

from __future__ import annotations

import os
import sys
from dataclasses import replace
from functools import wraps
from pathlib import Path

import click
import numpy as np

from . import __version__
from .config import (
    ConfigError,
    Grid1D,
    InitialDensitySpec,
    KernelSpec,
    PhysicalParams,
    SimConfig,
    config_from_dict,
    load_config,
    validate_config,
)
from .fixedpoint import picard_solve
from .io import (
    RunManifest,
    read_archive,
    read_csv,
    snapshot_name,
    write_archive,
    write_csv,
)
from .metrics import compare_series, convergence_study, density_distance, total_mass
from .particles import NonFiniteStateError, run_simulation
from .pde import mollify_grid_function, solve_pde
from .plots import emit_plot_scripts, render_scripts

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_DATA = 4

_MODE_ALIASES = {"fk": "feynman-kac", "kill": "killed"}


class DataError(RuntimeError):
    pass


def _handle_errors(fn):
    @wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as err:
            click.echo("invalid config:", err=True)
            for v in err.violations:
                click.echo(f"  - {v}", err=True)
            sys.exit(EXIT_CONFIG)
        except NonFiniteStateError as err:
            click.echo(f"numerical abort: {err}", err=True)
            sys.exit(EXIT_NUMERICAL)
        except (DataError, FileNotFoundError) as err:
            click.echo(f"data error: {err}", err=True)
            sys.exit(EXIT_DATA)

    return wrapper


def _out_dir(out: str | None, default: str) -> Path:
    if out is None:
        out = os.environ.get("SULFSIM_OUTDIR") or default
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


_config_options = [
    click.option("--config", "config_path", type=click.Path(exists=True), default=None,
                 help="YAML config file; flags override its fields."),
    click.option("--lambda", "lam", type=float, default=None, help="reaction rate"),
    click.option("--c0", type=float, default=None, help="initial calcite density"),
    click.option("--phi0", type=float, default=None, help="porosity offset"),
    click.option("--phi1", type=float, default=None, help="porosity slope"),
    click.option("--phi-bar", type=float, default=None, help="porosity upper bound"),
    click.option("--s0", type=float, default=None, help="initial-density sup bound"),
    click.option("--bandwidth", type=float, default=None, help="kernel bandwidth"),
    click.option("--lower", type=float, default=None, help="grid lower bound"),
    click.option("--upper", type=float, default=None, help="grid upper bound"),
    click.option("--spacing", type=float, default=None, help="grid spacing"),
    click.option("--horizon", type=float, default=None, help="time horizon T"),
    click.option("--step", type=float, default=None, help="time step dt"),
    click.option("--particles", type=int, default=None, help="ensemble size N"),
    click.option("--field-mode", type=click.Choice(["grid-accumulator", "exact-history"]),
                 default=None),
    click.option("--initial-family",
                 type=click.Choice(["gaussian-bump", "truncated-cosine-bump", "tabulated"]),
                 default=None),
    click.option("--center", type=float, default=None, help="initial density center"),
    click.option("--width", type=float, default=None, help="initial density width"),
    click.option("--normalize/--no-normalize", "normalize", default=None,
                 help="rescale a tabulated initial density to unit mass"),
]


def _with_config_options(fn):
    for opt in reversed(_config_options):
        fn = opt(fn)
    return fn


def _build_config(config_path, lam, c0, phi0, phi1, phi_bar, s0, bandwidth,
                  lower, upper, spacing, horizon, step, particles, field_mode,
                  initial_family, center, width, normalize=None,
                  mode=None, seed=None) -> SimConfig:
    cfg = load_config(config_path) if config_path else SimConfig()
    phys = cfg.physical
    phys = PhysicalParams(
        lam=phys.lam if lam is None else lam,
        c0=phys.c0 if c0 is None else c0,
        phi0=phys.phi0 if phi0 is None else phi0,
        phi1=phys.phi1 if phi1 is None else phi1,
        phi_bar=phys.phi_bar if phi_bar is None else phi_bar,
        s0=phys.s0 if s0 is None else s0,
    )
    kern = cfg.kernel if bandwidth is None else KernelSpec(bandwidth=bandwidth)
    grid = cfg.grid
    if lower is not None or upper is not None or spacing is not None:
        base = cfg.resolved_grid()
        grid = Grid1D(
            lower=base.lower if lower is None else lower,
            upper=base.upper if upper is None else upper,
            spacing=base.spacing if spacing is None else spacing,
        )
    ini = cfg.initial
    if any(v is not None for v in (initial_family, center, width, normalize)):
        ini = InitialDensitySpec(
            family=ini.family if initial_family is None else initial_family,
            center=ini.center if center is None else center,
            width=ini.width if width is None else width,
            normalize=ini.normalize if normalize is None else normalize,
            table_x=ini.table_x,
            table_p=ini.table_p,
        )
    cfg = replace(
        cfg,
        physical=phys,
        kernel=kern,
        grid=grid,
        horizon=cfg.horizon if horizon is None else horizon,
        step=cfg.step if step is None else step,
        particles=cfg.particles if particles is None else particles,
        field_mode=cfg.field_mode if field_mode is None else field_mode,
        initial=ini,
    )
    if mode is not None:
        cfg = replace(cfg, mode=_MODE_ALIASES.get(mode, mode))
    if seed is not None:
        cfg = replace(cfg, seed=int(seed))
    return validate_config(cfg.with_grid())


def _write_run_outputs(out: Path, sim, manifest: RunManifest,
                       keep_archive: bool) -> None:
    grid = sim.config.grid
    nodes = grid.nodes()
    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    paths = []
    for step, u in zip(sim.steps_recorded, sim.densities):
        paths.append(write_csv(snap_dir / snapshot_name("u", int(step)), ["x", "u"], [nodes, u]))
    paths.append(
        write_csv(
            out / "run.csv",
            ["t", "mass", "alive_fraction_or_mean_weight", "escaped_mass"],
            [sim.times, sim.mass, sim.weight_or_alive, sim.escaped],
        )
    )
    if sim.field_snaps:
        fdir = out / "fields"
        fdir.mkdir(exist_ok=True)
        for step, a_vals, g_vals in sim.field_snaps:
            paths.append(
                write_csv(fdir / snapshot_name("af", int(step)), ["x", "A", "G"],
                          [nodes, a_vals, g_vals])
            )
    if keep_archive and sim.archive is not None:
        paths.append(write_archive(out / "archive.bin", sim.archive))
    for p in paths:
        manifest.add_output(out, p)


def _write_pde_outputs(out: Path, res, manifest: RunManifest) -> None:
    grid = res.config.grid
    nodes = grid.nodes()
    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    cal_dir = out / "calcite"
    cal_dir.mkdir(exist_ok=True)
    paths = []
    for step, v, c in zip(res.steps_recorded, res.densities, res.calcite):
        paths.append(write_csv(snap_dir / snapshot_name("u", int(step)), ["x", "u"], [nodes, v]))
        paths.append(write_csv(cal_dir / snapshot_name("c", int(step)), ["x", "c"], [nodes, c]))
    paths.append(
        write_csv(out / "run.csv", ["t", "mass"], [res.times, res.mass])
    )
    steps = np.arange(1, len(res.sink) + 1)
    paths.append(
        write_csv(
            out / "ledger.csv",
            ["step", "sink", "boundary_flux", "clamped", "residual"],
            [steps, res.sink, res.boundary_flux, res.clamped, res.residual],
        )
    )
    for p in paths:
        manifest.add_output(out, p)


@click.group()
@click.version_option(__version__)
def main():
    """Particle and finite-difference solvers for the sulphation model."""


@main.command()
@_with_config_options
@click.option("--mode", type=click.Choice(["fk", "kill", "feynman-kac", "killed"]),
              default="fk", show_default=True)
@click.option("--seed", type=int, required=True, help="master RNG seed (required)")
@click.option("--out", type=click.Path(), default=None, help="output directory")
@click.option("--snapshot-stride", type=int, default=None,
              help="record every k-th step (default: ~10 snapshots)")
@click.option("--fields-stride", type=int, default=0,
              help="also export accumulated fields every k-th step")
@click.option("--archive/--no-archive", "archive_flag", default=False,
              help="dump full trajectories for the fixedpoint command")
@click.option("--workers", type=int, default=1, show_default=True)
@_handle_errors
def simulate(mode, seed, out, snapshot_stride, fields_stride, archive_flag, workers, **cfg_kwargs):
    """Run the particle system and write snapshots, series, and manifest."""
    cfg = _build_config(mode=mode, seed=seed, **cfg_kwargs)
    out_dir = _out_dir(out, "sim-out")
    sim = run_simulation(
        cfg,
        snapshot_stride=snapshot_stride,
        keep_archive=archive_flag,
        fields_stride=fields_stride,
        workers=workers,
    )
    manifest = RunManifest(command="simulate", config=cfg.to_dict(),
                           diagnostics=sim.diagnostics)
    _write_run_outputs(out_dir, sim, manifest, keep_archive=archive_flag)
    manifest.write(out_dir)
    click.echo(f"simulate: wrote {len(manifest.outputs)} files to {out_dir}")


@main.command()
@_with_config_options
@click.option("--out", type=click.Path(), default=None)
@click.option("--snapshot-stride", type=int, default=None)
@click.option("--workers", type=int, default=1, show_default=True)
@_handle_errors
def pde(out, snapshot_stride, workers, **cfg_kwargs):
    """Solve the deterministic reference PDE on the configured grid."""
    cfg = _build_config(**cfg_kwargs)
    out_dir = _out_dir(out, "pde-out")
    res = solve_pde(cfg, snapshot_stride=snapshot_stride)
    manifest = RunManifest(
        command="pde",
        config=cfg.to_dict(),
        diagnostics={
            "clamped_mass": res.state.clamped_mass,
            "max_residual": float(np.max(np.abs(res.residual))) if len(res.residual) else 0.0,
        },
    )
    _write_pde_outputs(out_dir, res, manifest)
    manifest.write(out_dir)
    click.echo(f"pde: wrote {len(manifest.outputs)} files to {out_dir}")


def _load_snapshot_series(run_dir: Path):
    snap_dir = run_dir / "snapshots"
    files = sorted(snap_dir.glob("u_*.csv"))
    if not files:
        raise DataError(f"no snapshots under {run_dir}")
    xs, series, steps = None, [], []
    for f in files:
        cols = read_csv(f)
        if xs is None:
            xs = cols["x"]
        elif cols["x"].shape != xs.shape or not np.array_equal(cols["x"], xs):
            raise DataError(f"grid mismatch in {f}")
        series.append(cols["u"])
        steps.append(int(f.stem.split("_")[1]))
    run = read_csv(run_dir / "run.csv")
    times = run["t"][: len(series)]
    return xs, np.asarray(steps), times, series


def _grid_from_nodes(xs: np.ndarray) -> Grid1D:
    return Grid1D(lower=float(xs[0]), upper=float(xs[-1]),
                  spacing=float(xs[1] - xs[0]))


@main.command()
@_with_config_options
@click.option("--a", "dir_a", type=click.Path(exists=True), default=None,
              help="first snapshot directory")
@click.option("--b", "dir_b", type=click.Path(exists=True), default=None,
              help="second snapshot directory")
@click.option("--seed", type=int, default=None,
              help="seed (required when regenerating from --config)")
@click.option("--out", type=click.Path(), default=None)
@click.option("--snapshot-stride", type=int, default=None)
@click.option("--workers", type=int, default=1, show_default=True)
@_handle_errors
def compare(dir_a, dir_b, seed, out, snapshot_stride, workers, **cfg_kwargs):
    """Compare two snapshot directories, or regenerate both estimators and
    the PDE reference from a config and compare everything."""
    out_dir = _out_dir(out, "compare-out")
    manifest = RunManifest(command="compare", config={})
    if dir_a is not None and dir_b is not None:
        xa, sa, ta, ua = _load_snapshot_series(Path(dir_a))
        xb, sb, tb, ub = _load_snapshot_series(Path(dir_b))
        if xa.shape != xb.shape or not np.array_equal(xa, xb):
            raise DataError(f"grids of {dir_a} and {dir_b} do not match")
        if len(ua) != len(ub) or not np.array_equal(sa, sb):
            raise DataError(f"snapshot steps of {dir_a} and {dir_b} do not match")
        grid = _grid_from_nodes(xa)
        report = compare_series(ta, ua, ub, grid, {"a": str(dir_a), "b": str(dir_b)})
        path = write_csv(out_dir / "report.csv",
                         ["t", "l1", "l2", "sup", "mass_a", "mass_b"],
                         [report.times, report.l1, report.l2, report.sup,
                          report.mass_a, report.mass_b])
        manifest.add_output(out_dir, path)
        summary = report.summary()
    elif cfg_kwargs.get("config_path") or seed is not None:
        if seed is None:
            raise ConfigError(["--seed is required when regenerating from a config"])
        cfg = _build_config(seed=seed, **cfg_kwargs)
        manifest.config = cfg.to_dict()
        stride = snapshot_stride or max(1, cfg.n_steps // 10)
        fk = run_simulation(replace(cfg, mode="feynman-kac"), snapshot_stride=stride,
                            workers=workers)
        kl = run_simulation(replace(cfg, mode="killed"), snapshot_stride=stride,
                            workers=workers)
        ref = solve_pde(cfg, snapshot_stride=stride)
        grid = cfg.grid
        target = [mollify_grid_function(v, grid, cfg.kernel.bandwidth)
                  for v in ref.densities]
        reports = {
            "fk_vs_kill": compare_series(fk.times, fk.densities, kl.densities, grid,
                                         {"a": "feynman-kac", "b": "killed"}),
            "fk_vs_pde": compare_series(fk.times, fk.densities, target, grid,
                                        {"a": "feynman-kac", "b": "K*v"}),
            "kill_vs_pde": compare_series(kl.times, kl.densities, target, grid,
                                          {"a": "killed", "b": "K*v"}),
        }
        chunks = []
        for name, report in reports.items():
            path = write_csv(out_dir / f"report_{name}.csv",
                             ["t", "l1", "l2", "sup", "mass_a", "mass_b"],
                             [report.times, report.l1, report.l2, report.sup,
                              report.mass_a, report.mass_b])
            manifest.add_output(out_dir, path)
            chunks.append(report.summary())
        summary = "\n\n".join(chunks)
    else:
        raise DataError("compare needs either --a/--b directories or --config/--seed")
    (out_dir / "summary.txt").write_text(summary + "\n")
    manifest.add_output(out_dir, out_dir / "summary.txt")
    manifest.write(out_dir)
    click.echo(summary)


@main.command()
@_with_config_options
@click.option("--n", "n_list", default="250,1000,4000", show_default=True,
              help="comma-separated ensemble sizes")
@click.option("--seeds", "seeds_per_n", type=int, default=8, show_default=True)
@click.option("--seed", type=int, required=True, help="base seed (required)")
@click.option("--out", type=click.Path(), default=None)
@click.option("--workers", type=int, default=1, show_default=True)
@_handle_errors
def convergence(n_list, seeds_per_n, seed, out, workers, **cfg_kwargs):
    """Estimator-vs-reference error table across ensemble sizes."""
    cfg = _build_config(seed=seed, **cfg_kwargs)
    out_dir = _out_dir(out, "convergence-out")
    n_values = [int(v) for v in n_list.split(",") if v]
    table = convergence_study(cfg, n_values, seeds_per_n, base_seed=seed,
                              workers=workers)
    manifest = RunManifest(command="convergence", config=cfg.to_dict(),
                           diagnostics={"monotone_fk": table.monotone_fk,
                                        "monotone_kill": table.monotone_kill})
    path = write_csv(
        out_dir / "convergence.csv",
        ["n", "fk_mean_l1", "fk_stderr", "kill_mean_l1", "kill_stderr"],
        [np.array([r.n for r in table.rows]),
         np.array([r.fk_mean_l1 for r in table.rows]),
         np.array([r.fk_stderr for r in table.rows]),
         np.array([r.kill_mean_l1 for r in table.rows]),
         np.array([r.kill_stderr for r in table.rows])],
    )
    manifest.add_output(out_dir, path)
    (out_dir / "summary.txt").write_text(table.summary() + "\n")
    manifest.add_output(out_dir, out_dir / "summary.txt")
    manifest.write(out_dir)
    click.echo(table.summary())


@main.command()
@_with_config_options
@click.option("--archive", "archive_path", type=click.Path(exists=True), required=True,
              help="trajectory archive from simulate --archive")
@click.option("--tol", type=float, default=1e-10, show_default=True)
@click.option("--max-iters", type=int, default=50, show_default=True)
@click.option("--out", type=click.Path(), default=None)
@_handle_errors
def fixedpoint(archive_path, tol, max_iters, out, **cfg_kwargs):
    """Picard iteration of the discounted-kernel map on an archived run."""
    cfg = _build_config(**cfg_kwargs)
    out_dir = _out_dir(out, "fixedpoint-out")
    try:
        archive = read_archive(archive_path)
    except ValueError as err:
        raise DataError(str(err)) from err
    result = picard_solve(archive, cfg.grid, cfg.kernel.bandwidth, cfg.physical,
                          max_iters=max_iters, tol=tol)
    manifest = RunManifest(command="fixedpoint", config=cfg.to_dict(),
                           diagnostics={"converged": result.converged,
                                        "iterations": result.iterations})
    iters = np.arange(1, len(result.distances) + 1)
    path = write_csv(out_dir / "trace.csv", ["iteration", "sup_distance", "ratio"],
                     [iters, result.distances, result.ratios])
    manifest.add_output(out_dir, path)
    path = write_csv(out_dir / "fixedpoint_final.csv", ["x", "u"],
                     [cfg.grid.nodes(), result.fixed_point[-1]])
    manifest.add_output(out_dir, path)
    if result.converged:
        summary = (f"fixed point reached after iteration {result.iterations - 1} "
                   f"(confirming distance {result.distances[-1]:.3g} <= tol {tol:g})")
    else:
        summary = (f"no convergence within {result.iterations} iterations; "
                   f"last distance {result.distances[-1]:.3g}")
    (out_dir / "summary.txt").write_text(summary + "\n")
    manifest.add_output(out_dir, out_dir / "summary.txt")
    manifest.write(out_dir)
    click.echo(summary)


@main.command("emit-plots")
@click.option("--run", "run_dir", type=click.Path(exists=True), required=True,
              help="output directory of a previous command")
@click.option("--render/--no-render", default=True, show_default=True,
              help="execute the emitted scripts to produce PNGs")
@_handle_errors
def emit_plots(run_dir, render):
    """Emit self-contained plot scripts for a run directory and render them."""
    try:
        scripts = emit_plot_scripts(run_dir)
    except FileNotFoundError as err:
        raise DataError(str(err)) from err
    click.echo("emitted: " + ", ".join(s.name for s in scripts))
    if render:
        pngs = render_scripts(scripts)
        click.echo("rendered: " + ", ".join(p.name for p in pngs))


if __name__ == "__main__":
    main()
