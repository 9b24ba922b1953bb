"""Command line entry points tying the pipeline together.

Each verb is a thin client: it parses arguments, loads the YAML config, and
delegates to the package (or serves the operator API).  Exit status is 0 on
success, 2 on usage errors, and 1 with a one-line diagnostic otherwise.
"""

from __future__ import annotations

import functools
import os
from dataclasses import replace

import click

from .api import TwinController, create_app
from .config import (
    AppConfig,
    ConfigError,
    ENV_API_ENDPOINT,
    ENV_PLANT_ENDPOINT,
    load_config,
    parse_endpoint,
)
from .control import ControllerFault
from .emulator import PlantServer
from .engine import DataError, SimulationDiverged, simulate as run_simulation
from .matching import PRESETS, ga_optimize
from .physics import DomainError
from .runtime import SessionError, TwinSession, divergence_report
from .storage import (
    StorageError,
    read_ga_result,
    read_runlog,
    write_ga_result,
    write_runlog,
)

_FAILURES = (
    ConfigError, StorageError, DataError, DomainError,
    SimulationDiverged, ControllerFault, SessionError, OSError,
)


def _diagnose(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _FAILURES as exc:
            raise click.ClickException(str(exc)) from None

    return wrapper


@click.group()
@click.version_option(package_name="peltwin")
def main() -> None:
    """Digital twin toolkit for the Peltier thermal plant."""


@main.command("simulate")
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False),
              help="Destination run log (CSV).")
@click.option("--seed", type=int, default=None, help="Override the scenario seed.")
@_diagnose
def simulate_cmd(config_path: str, output: str, seed: int | None) -> None:
    """Run the closed-loop scenario from CONFIG_PATH and save the run log."""
    cfg = load_config(config_path)
    scenario = cfg.scenario if seed is None else replace(cfg.scenario, seed=seed)
    run = run_simulation(scenario)
    write_runlog(run, output)
    last = run.samples[-1]
    click.echo(
        f"simulated {len(run.samples)} samples over {last.t:.0f} s; "
        f"final y={last.y:.2f} degC at u={last.u:.3f} -> {output}"
    )


@main.command("match")
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--reference", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Recorded run log to match against.")
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False),
              help="Destination for the fitted parameters (JSON).")
@click.option("--seed", type=int, default=None, help="Override the GA seed.")
@click.option("--generations", type=int, default=None, help="Override generation count.")
@_diagnose
def match_cmd(config_path: str, reference: str, output: str,
              seed: int | None, generations: int | None) -> None:
    """Fit twin parameters to a recorded run with the genetic search."""
    cfg = load_config(config_path)
    ga = cfg.ga
    if seed is not None:
        ga = replace(ga, seed=seed)
    if generations is not None:
        ga = replace(ga, generations=generations)
    reference_run = read_runlog(reference)
    if reference_run.scenario is None:
        reference_run.scenario = cfg.scenario

    def on_generation(generation: int, best_cost: float) -> None:
        if generation % 10 == 0 or generation == 1:
            click.echo(f"generation {generation}: best cost {best_cost:.6g}", err=True)

    result = ga_optimize(
        reference_run, cfg.bounds, ga, cfg.scenario.convention, progress=on_generation
    )
    write_ga_result(result, output)
    p = result.best
    click.echo(
        f"matched in {result.evaluations} evaluations: cost {result.best_cost:.6g}, "
        f"alpha={p.alpha:.4g} r={p.r:.4g} k={p.k:.4g} c={p.c:.4g} -> {output}"
    )


@main.command("serve-plant")
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--listen", default=None, metavar="HOST:PORT",
              help=f"Bind address (default from config or ${ENV_PLANT_ENDPOINT}).")
@click.option("--seed", type=int, default=None, help="Override the plant noise seed.")
@click.option("--max-ticks", type=int, default=None, help="Stop after N control ticks.")
@click.option("--save", type=click.Path(dir_okay=False), default=None,
              help="Write the plant's ground-truth run log on exit.")
@_diagnose
def serve_plant_cmd(config_path: str, listen: str | None, seed: int | None,
                    max_ticks: int | None, save: str | None) -> None:
    """Run the emulated plant and serve telemetry over TCP."""
    cfg = load_config(config_path)
    host, port = parse_endpoint(listen) if listen else cfg.endpoints.plant
    truth = cfg.plant.truth if seed is None else replace(cfg.plant.truth, seed=seed)
    interval = cfg.scenario.dt_control if cfg.plant.clock == "wall" else 0.0
    server = PlantServer(
        truth, cfg.scenario, host=host, port=port,
        tick_interval=interval,
        max_ticks=max_ticks if max_ticks is not None else cfg.plant.max_ticks,
    )
    click.echo(
        f"plant listening on {server.host}:{server.port} "
        f"({cfg.plant.clock} clock, dt={cfg.scenario.dt_control} s)", err=True
    )
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
        if save and server.run_log.samples:
            write_runlog(server.run_log, save)
            click.echo(f"plant log -> {save}", err=True)


@main.command("run-twin")
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--connect", default=None, metavar="HOST:PORT",
              help=f"Plant endpoint (default from config or ${ENV_PLANT_ENDPOINT}).")
@click.option("--api", "api_addr", default=None, metavar="HOST:PORT",
              help=f"Operator API bind address (default from config or ${ENV_API_ENDPOINT}).")
@click.option("--params", "params_source", default=None,
              help="Twin parameters: a preset name or a matching-result JSON file.")
@click.option("--mode", type=click.Choice(["shadow", "mirror"]), default="shadow")
@click.option("--ui", "ui_dir", type=click.Path(exists=True, file_okay=False),
              default=None, help="Serve a built dashboard directory at /ui.")
@click.option("--save-plant", type=click.Path(dir_okay=False), default=None)
@click.option("--save-twin", type=click.Path(dir_okay=False), default=None)
@_diagnose
def run_twin_cmd(config_path: str, connect: str | None, api_addr: str | None,
                 params_source: str | None, mode: str, ui_dir: str | None,
                 save_plant: str | None, save_twin: str | None) -> None:
    """Shadow a plant endpoint and serve the operator API."""
    import uvicorn

    cfg = load_config(config_path)
    plant_endpoint = parse_endpoint(connect) if connect else cfg.endpoints.plant
    api_host, api_port = parse_endpoint(api_addr) if api_addr else cfg.endpoints.api

    params = cfg.scenario.params
    if params_source:
        if params_source in PRESETS:
            params = PRESETS[params_source]
        elif os.path.exists(params_source):
            params = read_ga_result(params_source).best
        else:
            raise click.ClickException(
                f"--params {params_source!r} is neither a preset "
                f"({', '.join(sorted(PRESETS))}) nor a file"
            )

    session = TwinSession(plant_endpoint, params, cfg.scenario, mode=mode).start()
    controller = TwinController(session, cfg.bounds, cfg.ga)
    app = create_app(controller, ui_dir=ui_dir)
    click.echo(
        f"twin shadowing {plant_endpoint[0]}:{plant_endpoint[1]}; "
        f"operator API on http://{api_host}:{api_port}"
        + (" (console at /ui)" if ui_dir else ""), err=True
    )
    try:
        uvicorn.run(app, host=api_host, port=api_port, log_level="warning")
    except KeyboardInterrupt:
        pass
    finally:
        try:
            report = session.stop()
            click.echo(
                f"final divergence: rmse_y={report.rmse_y:.4f} degC over "
                f"{report.samples} samples", err=True
            )
        except DataError:
            click.echo("session ended before any telemetry arrived", err=True)
        if save_plant and session.pair_count():
            write_runlog(session.plant_log(), save_plant)
        if save_twin and session.pair_count():
            write_runlog(session.twin_log(), save_twin)


@main.command("report")
@click.option("--plant", "plant_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--twin", "twin_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@_diagnose
def report_cmd(plant_path: str, twin_path: str) -> None:
    """Divergence metrics between two persisted run logs."""
    plant = read_runlog(plant_path)
    twin = read_runlog(twin_path)
    rep = divergence_report(plant, twin)
    click.echo(f"samples:   {rep.samples}")
    click.echo(f"horizon:   {rep.horizon!r} s")
    click.echo(f"rmse_y:    {rep.rmse_y!r} degC")
    click.echo(f"max_abs_y: {rep.max_abs_y!r} degC")
    click.echo(f"rmse_u:    {rep.rmse_u!r}")


@main.command("presets")
def presets_cmd() -> None:
    """Print the built-in Peltier parameter sets."""
    header = f"{'name':<12} {'alpha V/K':<18} {'r ohm':<8} {'k W/K':<8} {'c J/K':<9}"
    click.echo(header)
    click.echo("-" * len(header))
    for name, p in PRESETS.items():
        alpha = f"{p.alpha:g} ({p.alpha * 1000:g} mV)"
        click.echo(f"{name:<12} {alpha:<18} {p.r:<8g} {p.k:<8g} {p.c:<9g}")


if __name__ == "__main__":
    main()
