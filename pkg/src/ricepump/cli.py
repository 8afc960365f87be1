"""Command line interface for scenario runs, sweeps and band exports.

Failures are reported as a single JSON object on stderr and a nonzero
exit code so calling pipelines never have to parse tracebacks.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .scenarios import BANDS_SCENARIOS, SWEEP_SCENARIOS, ConfigError, \
    resolve_config, run_scenario, run_sweep

try:
    from importlib.metadata import version as _pkg_version
    _VERSION = _pkg_version("ricepump")
except Exception:  # pragma: no cover
    _VERSION = "unknown"


def _load(config_path: str) -> dict:
    try:
        return json.loads(Path(config_path).read_text())
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from err


def _fail(err: Exception) -> None:
    payload = {"error": {"type": type(err).__name__, "message": str(err)}}
    details = getattr(err, "details", None)
    if details is not None:
        payload["error"]["details"] = details
    click.echo(json.dumps(payload, sort_keys=True), err=True)
    sys.exit(1)


def _default_out(cfg: dict) -> Path:
    return Path("runs") / cfg["scenario"]


@click.group()
@click.version_option(_VERSION, prog_name="ricepump")
def main() -> None:
    """Topological pump simulations on a driven superconducting lattice."""


@main.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), default=None,
              help="Output directory (default runs/<scenario>).")
@click.option("--seed", type=int, default=None,
              help="Override the disorder seed.")
def run(config: str, out: str | None, seed: int | None) -> None:
    """Run a single dynamics or band scenario from a JSON config."""
    try:
        cfg = resolve_config(_load(config))
        if cfg["scenario"] in SWEEP_SCENARIOS:
            raise ConfigError(
                f"{cfg['scenario']} is a sweep; use the sweep command")
        out_dir = Path(out) if out else _default_out(cfg)
        manifest = run_scenario(cfg, out_dir, base_seed=seed)
    except Exception as err:  # noqa: BLE001 - single reporting funnel
        _fail(err)
        return
    click.echo(json.dumps({"status": manifest["status"],
                           "out": str(out_dir),
                           "wall_seconds": manifest["wall_seconds"]},
                          sort_keys=True))


@main.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), default=None,
              help="Output directory (default runs/<scenario>).")
@click.option("--workers", type=int, default=1, show_default=True,
              help="Parallel worker processes for the sweep points.")
@click.option("--seed", type=int, default=None,
              help="Override the sweep base seed.")
def sweep(config: str, out: str | None, workers: int,
          seed: int | None) -> None:
    """Run a parameter sweep from a JSON config."""
    try:
        cfg = resolve_config(_load(config))
        if cfg["scenario"] not in SWEEP_SCENARIOS:
            raise ConfigError(
                f"{cfg['scenario']} is not a sweep; use the run command")
        if workers < 1:
            raise ConfigError("--workers must be at least 1")
        out_dir = Path(out) if out else _default_out(cfg)
        manifest = run_sweep(cfg, out_dir, workers=workers, base_seed=seed)
    except Exception as err:  # noqa: BLE001
        _fail(err)
        return
    click.echo(json.dumps({"status": manifest["status"],
                           "out": str(out_dir),
                           "wall_seconds": manifest["wall_seconds"]},
                          sort_keys=True))


@main.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), default=None,
              help="Output directory (default runs/<scenario>).")
def bands(config: str, out: str | None) -> None:
    """Export a band structure (energies, curvature, invariants)."""
    try:
        cfg = resolve_config(_load(config))
        if cfg["scenario"] not in BANDS_SCENARIOS:
            raise ConfigError(
                f"{cfg['scenario']} is not a band export scenario")
        out_dir = Path(out) if out else _default_out(cfg)
        manifest = run_scenario(cfg, out_dir)
    except Exception as err:  # noqa: BLE001
        _fail(err)
        return
    click.echo(json.dumps({"status": manifest["status"],
                           "out": str(out_dir),
                           "wall_seconds": manifest["wall_seconds"]},
                          sort_keys=True))


@main.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
def validate(config: str) -> None:
    """Check a config against the schema and print the resolved form."""
    try:
        cfg = resolve_config(_load(config))
    except Exception as err:  # noqa: BLE001
        _fail(err)
        return
    click.echo(json.dumps(cfg, indent=2, sort_keys=True))


if __name__ == "__main__":  # pragma: no cover
    main()
