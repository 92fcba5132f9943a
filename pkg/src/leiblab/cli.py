"""Command line entry points.

Subcommands map one-to-one onto experiment kinds; every run reads a strict
JSON config, writes its artifact tree atomically under the resolved output
directory and emits a manifest of content hashes.  LEIBLAB_OUT overrides
--out, which overrides the config's own output directory.
"""

from __future__ import annotations

import json
import sys

import click

from .experiments import (ConfigError, json_bytes, load_config, resolve_out_dir,
                          run_experiment)


def _fail(exc: Exception) -> None:
    blob = json_bytes({"error": type(exc).__name__, "message": str(exc)})
    sys.stderr.write(blob.decode())
    sys.exit(1)


def _execute(kind: str, config_path: str, out: str | None, seed: int | None,
             jobs: int) -> None:
    try:
        config = load_config(config_path)
        if config.kind != kind:
            raise ConfigError(
                f"config kind {config.kind!r} does not match subcommand {kind!r}")
        out_dir = resolve_out_dir(out, config)
        manifest = run_experiment(config, out_dir, seed=seed, jobs=jobs)
    except Exception as exc:  # noqa: BLE001 - uniform machine-readable failure
        _fail(exc)
        return
    click.echo(f"wrote {len(manifest)} file(s) to {out_dir}")


def _make_command(name: str, kind: str, help_text: str):
    @click.command(name=name, help=help_text)
    @click.option("--config", "config_path", required=True,
                  type=click.Path(exists=False), help="JSON experiment config")
    @click.option("--out", default=None, help="output directory")
    @click.option("--seed", default=None, type=int, help="override config seed")
    @click.option("--jobs", default=1, type=int, help="concurrent sweep cases")
    def cmd(config_path, out, seed, jobs):
        _execute(kind, config_path, out, seed, jobs)

    return cmd


@click.group()
def main():
    """Numerical laboratory for doubly nonlinear radial diffusion."""


_COMMANDS = [
    ("simulate", "simulate", "Run the solver and dump trajectory + snapshots."),
    ("fit", "fit_decay", "Simulate and fit a norm decay exponent."),
    ("barenblatt", "barenblatt_table", "Emit a self-similar profile table and residuals."),
    ("verify", "verify_identities", "Check exponent identities over seeded random tuples."),
    ("verify-identities", "verify_identities", "Alias of verify."),
    ("constants", "moser_constants", "Assemble the iteration decay constant report."),
    ("moser-constants", "moser_constants", "Alias of constants."),
    ("sobolev", "sobolev_estimate", "Estimate the Sobolev constant from a test family."),
    ("sweep", "sweep", "Run a (p, q, n) case sweep into one aggregated CSV."),
]

for _name, _kind, _help in _COMMANDS:
    main.add_command(_make_command(_name, _kind, _help))


if __name__ == "__main__":
    main()
