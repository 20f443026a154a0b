"""molguide CLI entry point.

Usage:
    molguide train-diffusion --config run.json
    molguide train-classifier --config run.json --loss bce --checkpoint runs/denoiser.ckpt
    molguide sample --checkpoint runs/denoiser.ckpt [--classifier runs/classifier.ckpt --lambda 1000 --label 1] --count 100 --seed 0
    molguide screen --drugs drugs.csv --train train.smi --generated runs/samples.smi
    molguide analyze-degradation --drugs drugs.csv --sources A=a.smi,B=b.smi
    molguide fingerprint --in mols.smi --radius 2 --width 2048
    molguide dataset-stats --in train.smi

Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import logging
import sys

import click

from molguide import __app_name__, __version__
from molguide.utils.config import LOG_LEVEL, RunConfig, load_config
from molguide.utils.errors import EXIT_OK, EXIT_USAGE, MolGuideError
from molguide.utils.logger import set_console_level


class MolGuideGroup(click.Group):
    """Maps MolGuideError to ``error[<Class>]: <message>`` and its exit code."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(
                args=args, prog_name=prog_name, complete_var=complete_var, standalone_mode=False, **extra
            )
        except click.exceptions.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_USAGE)
        except click.ClickException as e:
            e.show()
            sys.exit(EXIT_USAGE)
        except MolGuideError as e:
            click.echo(f"error[{e.error_class}]: {e}", err=True)
            sys.exit(e.exit_code)
        sys.exit(rv if isinstance(rv, int) else EXIT_OK)


def _app(config_path: str | None, out_dir: str | None, **overrides):
    from molguide.app import MolGuideApp

    config: RunConfig = load_config(config_path).with_overrides(**overrides)
    return MolGuideApp(config, out_dir)


config_option = click.option(
    "--config", "config_path", type=click.Path(exists=True, dir_okay=False),
    help="JSON run configuration (defaults for every missing field).",
)
out_option = click.option(
    "--out-dir", type=click.Path(file_okay=False),
    help="Directory for artifacts (default: output_dir of the config).",
)
seed_option = click.option("--seed", type=int, default=None, help="Overrides the config seed.")


@click.group(cls=MolGuideGroup)
@click.version_option(version=__version__, prog_name=__app_name__)
@click.option("-v", "--verbose", is_flag=True, help="Debug logging on stderr.")
@click.option("-q", "--quiet", is_flag=True, help="Only warnings and errors on stderr.")
def main(verbose: bool, quiet: bool) -> None:
    """Classifier-guided discrete diffusion for molecular graphs."""
    set_console_level(logging.DEBUG if verbose else logging.WARNING if quiet else LOG_LEVEL)


@main.command("train-diffusion")
@config_option
@out_option
@seed_option
def train_diffusion_cmd(config_path, out_dir, seed) -> None:
    """Train the denoiser; writes denoiser.ckpt and the loss trace."""
    _app(config_path, out_dir, seed=seed).train_diffusion()


@main.command("train-classifier")
@config_option
@out_option
@seed_option
@click.option("--loss", type=click.Choice(["bce", "mse"]), default=None, help="Classifier objective.")
@click.option(
    "--checkpoint", type=click.Path(exists=True, dir_okay=False), default=None,
    help="Denoiser checkpoint whose diffusion process the classifier shares.",
)
def train_classifier_cmd(config_path, out_dir, seed, loss, checkpoint) -> None:
    """Train the noisy-graph property classifier; writes classifier.ckpt."""
    _app(config_path, out_dir, seed=seed, classifier_loss=loss).train_classifier(loss, checkpoint)


@main.command("sample")
@config_option
@out_option
@seed_option
@click.option("--checkpoint", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--classifier", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Classifier checkpoint; enables guidance.")
@click.option("--lambda", "lambda_guidance", type=float, default=None, help="Guidance strength.")
@click.option("--label", "target_label", type=click.IntRange(0, 1), default=None,
              help="Label to steer toward.")
@click.option("--count", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--nodes", type=click.IntRange(min=1), default=None,
              help="Fixed heavy-atom count (default: drawn from the training histogram).")
@click.option("--train", "train_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Training set for the novelty metric.")
def sample_cmd(config_path, out_dir, seed, checkpoint, classifier, lambda_guidance, target_label,
               count, nodes, train_path) -> None:
    """Sample molecules; writes samples.smi and a validity report."""
    app = _app(config_path, out_dir, seed=seed, lambda_guidance=lambda_guidance, target_label=target_label)
    app.sample(checkpoint, count, classifier=classifier, nodes=nodes, train_path=train_path)


@main.command("screen")
@config_option
@out_option
@click.option("--drugs", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--train", "train_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--generated", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--top-pairs", type=click.IntRange(min=0), default=0,
              help="Also list the K generated molecules most similar to a drug.")
@click.option("--radius", type=click.IntRange(min=0), default=None)
@click.option("--width", type=int, default=None)
def screen_cmd(config_path, out_dir, drugs, train_path, generated, top_pairs, radius, width) -> None:
    """DrugLike of generated and training sets, and their DrugIndex."""
    app = _app(config_path, out_dir, screen_radius=radius, screen_width=width)
    result = app.screen(drugs, train_path, generated, top_pairs)
    click.echo(f"DrugIndex: {result.summary['result'].drug_index:.2f}%")


@main.command("analyze-degradation")
@config_option
@out_option
@seed_option
@click.option("--drugs", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--sources", required=True, multiple=True, help="NAME=PATH[,NAME=PATH...]")
def analyze_degradation_cmd(config_path, out_dir, seed, drugs, sources) -> None:
    """Drug-cluster coverage and fused-ring proportions per molecule source."""
    from molguide.app import parse_sources

    _app(config_path, out_dir, seed=seed).analyze_degradation(drugs, parse_sources(sources))


@main.command("fingerprint")
@config_option
@out_option
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--radius", type=click.IntRange(min=0), default=None)
@click.option("--width", type=int, default=None)
def fingerprint_cmd(config_path, out_dir, in_path, radius, width) -> None:
    """Hex Morgan fingerprints of every valid molecule in a file."""
    app = _app(config_path, out_dir, screen_radius=radius, screen_width=width)
    app.fingerprint(in_path, app.config.screen_radius, app.config.screen_width)


@main.command("dataset-stats")
@config_option
@out_option
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False))
def dataset_stats_cmd(config_path, out_dir, in_path) -> None:
    """Marginals, node-count histogram and filter tally of a dataset."""
    _app(config_path, out_dir).dataset_stats(in_path)


if __name__ == "__main__":
    main()
