"""hdmpc CLI - Main entry point."""

import click

from hdmpc import __version__

from .cli_utils import configure_logging


@click.group(invoke_without_command=True)
@click.version_option(version=__version__, prog_name="hdmpc")
@click.option(
    "--output",
    "-o",
    type=click.Choice(["text", "json"]),
    default="text",
    help="Output format.",
)
@click.option("--verbose", "-v", is_flag=True, help="Log per-step progress.")
@click.option("--quiet", "-q", is_flag=True, help="Only log errors.")
@click.pass_context
def cli(ctx: click.Context, output: str, verbose: bool, quiet: bool) -> None:
    """Hierarchical MPC by dual decomposition with constraint tightening.

    Certifies an instance, solves single MPC steps with a-priori iteration
    counts, and simulates the closed loop.

    Configure via environment variables:
        HDMPC_SEED, HDMPC_SINGLE_THREAD, HDMPC_MAX_WORKERS,
        HDMPC_EARLY_EXIT, HDMPC_LOG_LEVEL

    Examples:

        hdmpc certify twin.json

        hdmpc solve twin.json --distributed

        hdmpc simulate twin.json --steps 10 --out trace.jsonl
    """
    ctx.ensure_object(dict)
    ctx.obj["output"] = output
    ctx.obj["verbose"] = verbose
    ctx.obj["quiet"] = quiet
    configure_logging(verbose, quiet)

    if ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())


def register_commands() -> None:
    """Register all command groups with the CLI."""
    from .commands.certify_cmds import certify, validate
    from .commands.config_cmds import config
    from .commands.simulate_cmds import simulate
    from .commands.solve_cmds import oracle, solve

    cli.add_command(validate)
    cli.add_command(certify)
    cli.add_command(solve)
    cli.add_command(simulate)
    cli.add_command(oracle)
    cli.add_command(config)


# Register commands when module is loaded
register_commands()


if __name__ == "__main__":
    cli()
