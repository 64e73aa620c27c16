"""Command-line entry point: ``onebitlin <command>``."""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from . import __version__
from .design import DEFAULT_BMAX_GRID, DesignConfig, TrainingSet, design_baseline_branch, \
    design_hammerstein, design_proposed
from .harness import ExperimentConfig, run_example1, run_example2, verify_lut
from .io import load_linearizer, parse_kv, parse_list, read_signal, save_linearizer, \
    write_signal, write_spectrum
from .linearizers import BranchLinearizer, apply_linearizer, build_lut
from .metrics import periodogram

# CLI flag -> config-file key
EXPERIMENT_FLAGS = [
    ("--master-seed", "master_seed", int, "Master seed of all signal streams."),
    ("--R", "R", int, "Number of training signals."),
    ("--M", "M", int, "Number of evaluation signals (2500 for a full-scale run)."),
    ("--L", "L", int, "Signal length."),
    ("--n-sweep", "N_sweep", str, "Comma-separated branch counts."),
    ("--lambda", "lambda", float, "L2 regularization weight."),
    ("--signal-bits", "signal_bits", int, "Signal quantizer word length."),
    ("--coeff-bits", "coeff_bits", int, "Coefficient word length."),
    ("--distortion", "distortion", str, "'standard', 'identity' or coefficients a0,a1,a2,..."),
    ("--output-dir", "output_dir", str, "Directory for CSVs, linearizers and manifests."),
    ("--num-nulled", "num_nulled", int, "Null subcarriers per Example 2 signal."),
    ("--bmax-grid", "bmax_grid", str, "Comma-separated b_max values for the baseline sweep."),
    ("--spectrum-n", "spectrum_N", int, "Branch count of the representative spectra."),
]


def experiment_options(func):
    for flag, key, typ, help_text in reversed(EXPERIMENT_FLAGS):
        func = click.option(flag, key.lower(), type=typ, default=None, help=help_text)(func)
    return click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                        default=None, help="Key-value config file; flags take precedence.")(func)


def resolve_config(config_path, **flags) -> ExperimentConfig:
    config = ExperimentConfig()
    if config_path:
        config = ExperimentConfig.from_kv(parse_kv(Path(config_path).read_text()), config)
    overrides = {}
    for _, key, _, _ in EXPERIMENT_FLAGS:
        value = flags.get(key.lower())
        if value is not None:
            overrides[key] = str(value)
    return ExperimentConfig.from_kv(overrides, config)


@click.group()
@click.version_option(__version__, prog_name="onebitlin")
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def cli(verbose):
    """Design, apply and evaluate memoryless digital linearizers."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@cli.command()
@click.option("--method", type=click.Choice(["proposed", "relu", "modulus", "hammerstein"]),
              default="proposed", show_default=True)
@click.option("--N", "n", type=int, default=32, show_default=True,
              help="Branch count (Hammerstein order is N+1).")
@click.option("--reference", "references", multiple=True, required=True,
              type=click.Path(exists=True, dir_okay=False), help="Clean training signal CSV (repeatable).")
@click.option("--distorted", "distorted", multiple=True, required=True,
              type=click.Path(exists=True, dir_okay=False), help="Distorted training signal CSV (repeatable, same order).")
@click.option("--lambda", "lam", type=float, default=2e-4, show_default=True)
@click.option("--coeff-bits", type=int, default=12, show_default=True)
@click.option("--bmax-grid", type=str, default=None, help="Comma-separated b_max values (baselines).")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True,
              help="Linearizer file to write.")
@click.option("--report", "report_path", type=click.Path(dir_okay=False), default=None,
              help="Design report file (printed to stdout if omitted).")
def design(method, n, references, distorted, lam, coeff_bits, bmax_grid, out_path, report_path):
    """Fit a linearizer to training signal pairs."""
    if len(references) != len(distorted):
        raise click.UsageError("--reference and --distorted must be given the same number of times")
    training = TrainingSet(tuple((read_signal(x), read_signal(v))
                                 for x, v in zip(references, distorted)))
    if method == "hammerstein":
        result = design_hammerstein(training, n + 1, lam, coeff_bits)
    elif method == "proposed":
        result = design_proposed(training, DesignConfig(n, lam, "onebit", None, coeff_bits))
    else:
        grid = tuple(parse_list(bmax_grid)) if bmax_grid else DEFAULT_BMAX_GRID
        result = design_baseline_branch(training, DesignConfig(n, lam, method, grid, coeff_bits))
    save_linearizer(out_path, result.linearizer)
    if report_path:
        Path(report_path).write_text(result.report())
    else:
        click.echo(result.report(), nl=False)


@cli.command()
@click.option("--linearizer", "lin_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--input", "in_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--output", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--lut/--branch", "use_lut", default=True, show_default=True,
              help="Realize 1-bit branch linearizers through their look-up table.")
def apply(lin_path, in_path, out_path, use_lut):
    """Correct a distorted signal CSV."""
    lin = load_linearizer(lin_path)
    if use_lut and isinstance(lin, BranchLinearizer) and lin.activation.value == "onebit" \
            and lin.uses_proposed_biases:
        lin = build_lut(lin)
    y = apply_linearizer(lin, read_signal(in_path))
    write_signal(out_path, y)


@cli.command()
@experiment_options
def example1(config_path, **flags):
    """Design all methods over the N sweep and score them on the multi-tone ensemble."""
    config = resolve_config(config_path, **flags)
    manifest = run_example1(config)
    s = manifest.summary
    click.echo(f"uncorrected mean SNDR {s['uncorrected_mean_sndr_db']:.2f} dB, "
               f"undistorted SNR {s['undistorted_mean_snr_db']:.2f} dB")
    for c in manifest.cells:
        if c.ok:
            click.echo(f"{c.method:<12} N={c.N:<3} mean {c.stats.mean_db:6.2f} dB  "
                       f"var {c.stats.variance_db:5.2f}  mults {c.mults}")
        else:
            click.echo(f"{c.method:<12} N={c.N:<3} FAILED {c.error}")
    click.echo(f"results in {config.output_dir}")


@cli.command()
@experiment_options
@click.option("--linearizer", "lin_path", type=click.Path(dir_okay=False), default=None,
              help="Designed 1-bit linearizer (default: Example 1 output at the representative N).")
def example2(config_path, lin_path, **flags):
    """Score the Example 1 design on null-subcarrier and bandpass-noise ensembles."""
    config = resolve_config(config_path, **flags)
    manifest = run_example2(config, lin_path)
    for name, (stats, raw) in manifest.results.items():
        deg = manifest.summary[f"{name}_degradation_db"]
        click.echo(f"{name:<9} mean {stats.mean_db:6.2f} dB  var {stats.variance_db:5.2f}  "
                   f"uncorrected {raw.mean_db:6.2f} dB  degradation {deg:+.2f} dB")


@cli.command("verify-lut")
@experiment_options
def verify_lut_cmd(config_path, **flags):
    """Check branch and LUT realizations agree on every quantizer level."""
    config = resolve_config(config_path, **flags)
    for check in verify_lut(config):
        click.echo(f"N={check.N:<3} levels={check.levels} max discrepancy {check.max_discrepancy!r}")


@cli.command()
@click.option("--input", "in_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--output", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--window", type=click.Choice(["hann", "rectangular"]), default="hann", show_default=True)
def spectrum(in_path, out_path, window):
    """Peak-normalized periodogram of a signal CSV."""
    spec = periodogram(read_signal(in_path), window)
    write_spectrum(out_path, spec)
    if spec.empty:
        click.echo("warning: all-zero signal, empty spectrum", err=True)


def main(argv=None):
    """Run the CLI; failures print one JSON error line to stderr and exit 1."""
    try:
        cli.main(args=argv, prog_name="onebitlin", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        click.echo(json.dumps({"error": type(exc).__name__, "message": exc.format_message()}), err=True)
        return exc.exit_code
    except click.Abort:
        click.echo(json.dumps({"error": "Abort", "message": "aborted"}), err=True)
        return 1
    except Exception as exc:  # noqa: BLE001 - reported as a machine-readable line
        click.echo(json.dumps({"error": type(exc).__name__, "message": str(exc)}), err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
