"""Solver settings commands for hdmpc CLI."""

from __future__ import annotations

import os
import sys

import click

from hdmpc import format_json, get_config, get_config_manager, print_error, print_success

from ..cli_utils import get_output_format, handle_cli_errors

ENV_VARS = (
    "HDMPC_SEED",
    "HDMPC_SINGLE_THREAD",
    "HDMPC_MAX_WORKERS",
    "HDMPC_EARLY_EXIT",
    "HDMPC_LOG_LEVEL",
)


@click.group()
def config() -> None:
    """Solver settings.

    View and validate the settings applied when no flag or instance
    document overrides them.
    """
    pass


@config.command()
@click.pass_context
@handle_cli_errors
def show(ctx: click.Context) -> None:
    """Show the effective solver settings.

    Example:
        hdmpc config show
    """
    cfg = get_config()
    if get_output_format(ctx) == "json":
        click.echo(format_json(cfg))
        return
    click.echo("Current Configuration:")
    click.echo("-" * 40)
    click.echo(f"  log_level: {cfg.get('log_level')}")
    for key, value in sorted(cfg.get("solver", {}).items()):
        click.echo(f"  solver.{key}: {value}")


@config.command()
@handle_cli_errors
def sources() -> None:
    """Show where settings come from, highest priority first.

    Example:
        hdmpc config sources
    """
    click.echo("Configuration Sources (highest priority first):")
    click.echo("-" * 50)

    sources_list = [
        (
            "Command-line flags",
            "--single-thread/--threads, --early-exit, --distributed, oracle --seed",
        ),
        ("Instance document", 'The "solver" section of the instance file'),
        ("Environment Variables", "HDMPC_* environment variables"),
        (".claude/settings.local.json", "Personal settings (gitignored)"),
        (".claude/settings.json", "Team/project settings"),
        ("Built-in defaults", "Library defaults"),
    ]

    for i, (source, description) in enumerate(sources_list, 1):
        if source.endswith(".json"):
            status = "exists" if os.path.exists(source) else "not found"
            click.echo(f"  {i}. {source} - {status}")
        else:
            click.echo(f"  {i}. {source}")
        click.echo(f"     {description}")

    click.echo()
    for var in ENV_VARS:
        click.echo(f"  {var}: {os.environ.get(var, '(not set)')}")


@config.command("validate")
@handle_cli_errors
def validate_settings() -> None:
    """Validate the solver settings.

    Example:
        hdmpc config validate
    """
    errors = get_config_manager().validate_config()
    if errors:
        for error in errors:
            print_error(error)
        click.echo("Configuration is INVALID")
        sys.exit(1)
    print_success("Configuration is valid")
