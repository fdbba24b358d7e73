#!/usr/bin/python
# coding: utf8
"""
Command line front end::

    $ jointdiffusion --seed 7 --out run1 simulate
    $ jointdiffusion --config run.cfg --out run1 fit run1/panel.json
    $ jointdiffusion --out run1 forecast run1/panel.json run1/draws.ndjson
    $ jointdiffusion report run1
"""

import functools
import json
import logging
import os

import click
import numpy as np

from jointdiffusion.allocator import GRANULARITIES, GAConfig, compare_schedules, optimize
from jointdiffusion.archive import load_archive
from jointdiffusion.config import load_config
from jointdiffusion.diagnostics import (
    VARIANTS,
    build_variant,
    compare_variants,
    comparison_table,
    convergence_report,
    forecast_all,
    forecast_frame,
    forecast_table,
    random_walk_forecast,
)
from jointdiffusion.endogeneity import (
    LIVConfig,
    LIVData,
    correlation_table,
    liv_fit,
    liv_fit_releases,
    release_interval_table,
)
from jointdiffusion.exc import InsufficientDraws, JointDiffusionError, MissingArchive
from jointdiffusion.filters import FilterConfig, platform_pass
from jointdiffusion.manifest import RunManifest
from jointdiffusion.panel import load_panel
from jointdiffusion.preprocess import PreprocessConfig, assemble_panel, read_raw, write_transforms
from jointdiffusion.sampler import MCMCConfig, PriorConfig, run_chains
from jointdiffusion.simulator import SimulationConfig, simulate_panel, write_truth
from jointdiffusion.util import __version__, logger, to_jsonable


PANEL_NAME = "panel.json"
ARCHIVE_NAME = "draws.ndjson"


class Session(object):
    """
    Options shared by every subcommand.
    """

    def __init__(self, config, config_path=None, seed=None, out=".", threads=None):
        self.config = config
        self.config_path = config_path
        self.seed = seed
        self.out = out
        self.threads = threads

    def path(self, name):
        if not os.path.isdir(self.out):
            os.makedirs(self.out)
        return os.path.join(self.out, name)

    def manifest(self, command, inputs=()):
        manifest = RunManifest(command, seed=self.seed, config_hash=self.config.digest())
        if self.config_path:
            manifest.add_input(self.config_path)
        for path in inputs:
            manifest.add_input(path)
        return manifest

    def sampler_settings(self):
        priors = PriorConfig.from_config(self.config)
        mcmc = MCMCConfig.from_config(self.config, seed=self.seed, threads=self.threads)
        return priors, mcmc, FilterConfig.from_config(self.config)


def _fails_cleanly(command):
    """
    Turn library and I/O errors into a one-line message and exit status 1.
    """
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except (JointDiffusionError, OSError, ValueError) as error:
            logger.debug("%s failed", command.__name__, exc_info=True)
            raise click.ClickException(str(error))
    return wrapper


def _write_csv(frame, path, index=True):
    frame.to_csv(path, index=index, float_format="%.10g")
    return path


@click.group()
@click.version_option(__version__)
@click.option('--config', '-c', 'config_path', type=click.Path(exists=True, dir_okay=False),
              help='Key-value configuration file.')
@click.option('--seed', type=int, default=None, help='Master seed for every random stream.')
@click.option('--out', '-o', default='.', type=click.Path(file_okay=False),
              help='Output directory.')
@click.option('--threads', type=int, default=None, help='Worker threads for parallel sections.')
@click.option('--verbose', '-v', count=True, help='-v for progress, -vv for debugging.')
@click.pass_context
def cli(ctx, config_path, seed, out, threads, verbose):
    "Joint platform and complement diffusion toolkit."
    level = logging.WARNING if not verbose else (logging.INFO if verbose == 1 else logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(config_path)
    except JointDiffusionError as error:
        raise click.ClickException(str(error))
    ctx.obj = Session(config, config_path, seed, out, threads)


@cli.command()
@click.argument('platform_csv')
@click.argument('complements_csv')
@click.argument('meta_csv')
@click.pass_obj
@_fails_cleanly
def ingest(session, platform_csv, complements_csv, meta_csv):
    "Build a panel file from the three raw CSV inputs."
    manifest = session.manifest("ingest", (platform_csv, complements_csv, meta_csv))
    raw = read_raw(platform_csv, complements_csv, meta_csv)
    panel, transforms = assemble_panel(raw, PreprocessConfig.from_config(session.config))
    manifest.add_output(panel.save(session.path(PANEL_NAME)))
    manifest.add_output(write_transforms(transforms, session.path("transforms.json")))
    manifest.write(session.out)
    click.echo("%d days, %d complements" % (panel.T, len(panel.complements)))


@cli.command()
@click.pass_obj
@_fails_cleanly
def simulate(session):
    "Simulate a synthetic panel and its truth sidecar."
    manifest = session.manifest("simulate")
    result = simulate_panel(SimulationConfig.from_config(session.config, seed=session.seed))
    manifest.add_output(result.panel.save(session.path(PANEL_NAME)))
    manifest.add_output(write_truth(result, session.path("truth.json")))
    manifest.write(session.out)
    click.echo("%d days, %d complements" % (result.panel.T, len(result.panel.complements)))


@cli.command()
@click.argument('panel_path')
@click.option('--variant', default='proposed', type=click.Choice(sorted(VARIANTS)))
@click.pass_obj
@_fails_cleanly
def fit(session, panel_path, variant):
    "Run the sampler and write the draw archive."
    manifest = session.manifest("fit", (panel_path,))
    panel = load_panel(panel_path)
    priors, mcmc, filter_config = session.sampler_settings()
    archive = run_chains(
        panel, priors, mcmc, build_variant(variant),
        filter_config=filter_config, config_hash=session.config.digest(),
    )
    manifest.add_output(archive.save(session.path(ARCHIVE_NAME)))
    manifest.write(session.out)
    click.echo("%d draws kept" % len(archive))


@cli.command()
@click.argument('panel_path')
@click.argument('archive_path')
@click.pass_obj
@_fails_cleanly
def forecast(session, panel_path, archive_path):
    "One-step-ahead forecasts and their accuracy against a random walk."
    manifest = session.manifest("forecast", (panel_path, archive_path))
    panel = load_panel(panel_path)
    archive = load_archive(archive_path)
    filter_config = FilterConfig.from_config(session.config)
    results = forecast_all(archive, panel, build_variant(archive.variant), filter_config)
    baselines = {}
    for name, result in results.items():
        baselines["%s:random_walk" % name] = random_walk_forecast(
            result.observed, "%s:random_walk" % name, result.days,
        )
    manifest.add_output(_write_csv(forecast_frame(results), session.path("forecasts.csv"), False))
    accuracy = forecast_table(dict(results, **baselines))
    manifest.add_output(_write_csv(accuracy, session.path("forecast_accuracy.csv")))
    manifest.write(session.out)
    click.echo(accuracy.to_string())


@cli.command()
@click.argument('panel_path')
@click.option('--variants', default='no_churn,proposed',
              help='Comma-separated variant names.')
@click.option('--max-draws', type=int, default=None, help='Draws used for the DIC.')
@click.pass_obj
@_fails_cleanly
def compare(session, panel_path, variants, max_draws):
    "Fit several model variants and compare their DIC."
    manifest = session.manifest("compare", (panel_path,))
    panel = load_panel(panel_path)
    priors, mcmc, filter_config = session.sampler_settings()
    names = [name.strip() for name in variants.split(",") if name.strip()]

    def run(panel, spec):
        return run_chains(panel, priors, mcmc, spec, filter_config=filter_config,
                          config_hash=session.config.digest())

    table = comparison_table(compare_variants(panel, names, run, filter_config, max_draws))
    manifest.add_output(_write_csv(table, session.path("comparison.csv")))
    manifest.write(session.out)
    click.echo(table.to_string())


@cli.command(name='optimize')
@click.argument('panel_path')
@click.argument('archive_path')
@click.option('--budget', type=float, default=None, help='Total effort; default observed total.')
@click.option('--granularity', type=click.Choice(GRANULARITIES), default=None)
@click.option('--start', type=int, default=1, help='First day of the horizon.')
@click.option('--end', type=int, default=None, help='Last day of the horizon.')
@click.pass_obj
@_fails_cleanly
def optimize_command(session, panel_path, archive_path, budget, granularity, start, end):
    "Reallocate the editorial effort budget with the genetic algorithm."
    manifest = session.manifest("optimize", (panel_path, archive_path))
    panel = load_panel(panel_path)
    archive = load_archive(archive_path)
    platform, _ = archive.posterior_mean_params()
    ga = GAConfig.from_config(session.config, seed=session.seed, threads=session.threads,
                              granularity=granularity)
    spec = build_variant(archive.variant)
    filter_config = FilterConfig.from_config(session.config)
    result = optimize(platform, panel, budget, ga, spec, start, end,
                      filter_config=filter_config)
    comparison = compare_schedules(result.observed, result.best, platform, panel, spec,
                                   filter_config)
    manifest.add_output(_write_csv(comparison.table, session.path("schedule.csv"), False))
    summary = dict(comparison.summary(), history=result.history, evaluations=result.evaluations)
    with open(session.path("schedule_summary.json"), "w") as handle:
        json.dump(to_jsonable(summary), handle, sort_keys=True, indent=2)
        handle.write("\n")
    manifest.add_output(session.path("schedule_summary.json"))
    manifest.write(session.out)
    click.echo("objective %.6g (observed %.6g), sd %.4g (observed %.4g)" % (
        comparison.objective_b, comparison.objective_a, comparison.sd_b, comparison.sd_a))


@cli.command()
@click.argument('panel_path')
@click.argument('archive_path')
@click.option('--releases', is_flag=True, help='Also test the smoothed release signals.')
@click.pass_obj
@_fails_cleanly
def endogeneity(session, panel_path, archive_path, releases):
    "Latent-instrument endogeneity tests of the governance and release covariates."
    manifest = session.manifest("endogeneity", (panel_path, archive_path))
    panel = load_panel(panel_path)
    archive = load_archive(archive_path)
    platform, complements = archive.posterior_mean_params()
    filter_config = FilterConfig.from_config(session.config)
    data = LIVData.from_panel(panel, platform)
    results = {}
    for model in (1, 2):
        config = LIVConfig.from_config(session.config, seed=session.seed, model=model)
        results["Model %d" % model] = liv_fit(data, config, filter_config)
    table = correlation_table(results)
    manifest.add_output(_write_csv(table, session.path("endogeneity_governance.csv")))
    click.echo(table.to_string())
    if releases:
        _, output = platform_pass(panel, platform, None, build_variant(archive.variant),
                                  filter_config)
        config = LIVConfig.from_config(session.config, seed=session.seed)
        rows = liv_fit_releases(panel, complements, output.m, config, filter_config)
        manifest.add_output(_write_csv(release_interval_table(rows), session.path("endogeneity_releases.csv")))
    manifest.write(session.out)


@cli.command()
@click.argument('run_dir', type=click.Path(file_okay=False))
@click.pass_obj
@_fails_cleanly
def report(session, run_dir):
    "Posterior summary tables and plot-ready series of a fitted run."
    archive_path = os.path.join(run_dir, ARCHIVE_NAME)
    if not os.path.exists(archive_path):
        raise MissingArchive("No draw archive at %s" % archive_path)
    manifest = session.manifest("report", (archive_path,))
    archive = load_archive(archive_path)
    outputs = [
        _write_csv(archive.platform_table(), os.path.join(run_dir, "platform_summary.csv")),
        _write_csv(archive.complement_table(), os.path.join(run_dir, "complement_summary.csv")),
        _write_csv(archive.complement_estimates(),
                   os.path.join(run_dir, "complement_estimates.csv")),
    ]
    try:
        outputs.append(_write_csv(archive.heterogeneity_table(),
                                  os.path.join(run_dir, "heterogeneity_summary.csv")))
    except MissingArchive:
        logger.info("report: no hierarchy draws in %s", archive_path)
    try:
        names = [name for name in archive.names() if np.isfinite(archive.values(name)).all()]
        convergence = convergence_report(archive, names)
        outputs.append(_write_csv(convergence.table, os.path.join(run_dir, "convergence.csv")))
    except InsufficientDraws as error:
        logger.warning("report: %s", error)
    panel_path = os.path.join(run_dir, PANEL_NAME)
    if os.path.exists(panel_path):
        panel = load_panel(panel_path)
        results = forecast_all(archive, panel, build_variant(archive.variant),
                               FilterConfig.from_config(session.config))
        outputs.append(_write_csv(forecast_frame(results),
                                  os.path.join(run_dir, "forecast_series.csv"), False))
        outputs.append(_write_csv(panel.release_frame(),
                                  os.path.join(run_dir, "release_signals.csv"), False))
    for path in outputs:
        manifest.add_output(path)
    manifest.write(run_dir)
    click.echo(archive.platform_table().to_string())


if __name__ == '__main__':
    cli()
