"""The augforge command line.

Exit codes: 0 success, 1 usage error, 2 validation failure, 3 run exceeded
the failure budget. AUGFORGE_BACKEND_URL provides the default --backend-url.
"""

from __future__ import annotations

import dataclasses
import json
import sys

import click

from augforge.dataset import DatasetError, validate_dataset
from augforge.baselines import BASELINE_MODES, PatchLibraryError, run_baseline
from augforge.backends import BackendDescriptor
from augforge.pipeline import (
    FailureBudgetExceeded,
    PipelineConfig,
    ValidationFailure,
    run_structured,
    run_video,
    stats,
)


@click.group()
def cli():
    """Deterministic semantic augmentation for robot demonstration datasets."""


def _load_config(config_path, num_augmentations, seed, backend, backend_url, workers,
                 include_originals=None) -> PipelineConfig:
    config = PipelineConfig.load(config_path)
    if num_augmentations is not None:
        config = dataclasses.replace(config, num_augmentations=num_augmentations)
    if seed is not None:
        config = dataclasses.replace(config, global_seed=seed)
    if workers is not None:
        config = dataclasses.replace(config, workers=workers)
    if include_originals is not None:
        config = dataclasses.replace(config, include_originals=include_originals)
    if backend is not None:
        if backend == "http":
            if not backend_url:
                raise click.UsageError(
                    "--backend http needs --backend-url or AUGFORGE_BACKEND_URL"
                )
            desc = BackendDescriptor(kind="http", endpoint=backend_url)
        else:
            desc = BackendDescriptor(kind="mock")
        config = dataclasses.replace(
            config, backends={role: desc for role in ("inpaint", "segment", "track")}
        )
    return config


_run_options = [
    click.option("--input", "input_dir", required=True, type=click.Path(exists=True, file_okay=False)),
    click.option("--output", "output_dir", required=True, type=click.Path(file_okay=False)),
    click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False)),
    click.option("--num-augmentations", type=click.IntRange(min=1), default=None),
    click.option("--seed", type=int, default=None),
    click.option("--backend", type=click.Choice(["mock", "http"]), default=None),
    click.option("--backend-url", envvar="AUGFORGE_BACKEND_URL", default=None),
    click.option("--workers", type=click.IntRange(min=1), default=None),
]


def _with_run_options(fn):
    for option in reversed(_run_options):
        fn = option(fn)
    return fn


@cli.command("augment-structured")
@_with_run_options
def augment_structured_cmd(input_dir, output_dir, config_path, num_augmentations,
                           seed, backend, backend_url, workers):
    """Structure-aware RGBD augmentation of an annotated dataset."""
    config = _load_config(config_path, num_augmentations, seed, backend, backend_url, workers)
    manifest = run_structured(config, input_dir, output_dir)
    click.echo(
        f"wrote {len(manifest.augmentations)} augmented episodes to {output_dir} "
        f"({len(manifest.failures)} failures)"
    )


@cli.command("augment-video")
@_with_run_options
@click.option("--include-originals", is_flag=True, default=None)
def augment_video_cmd(input_dir, output_dir, config_path, num_augmentations, seed,
                      backend, backend_url, workers, include_originals):
    """Automatic per-trajectory augmentation (no manual masks or meshes)."""
    config = _load_config(
        config_path, num_augmentations, seed, backend, backend_url, workers,
        include_originals=include_originals,
    )
    manifest = run_video(config, input_dir, output_dir)
    click.echo(
        f"wrote {len(manifest.episodes)} episodes to {output_dir} "
        f"({len(manifest.failures)} failures)"
    )


@cli.command("validate")
@click.option("--input", "input_dir", required=True, type=click.Path(exists=True, file_okay=False))
def validate_cmd(input_dir):
    """Check a dataset against the storage schema and type invariants."""
    problems = validate_dataset(input_dir)
    if problems:
        for problem in problems:
            click.echo(problem, err=True)
        raise ValidationFailure(problems)
    click.echo("dataset valid")


@cli.command("stats")
@click.option("--input", "input_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--json", "as_json", is_flag=True, default=False)
def stats_cmd(input_dir, as_json):
    """Summarize a dataset: counts, labels, component frequencies, warnings."""
    report = stats(input_dir)
    if as_json:
        click.echo(json.dumps(report.to_json(), indent=1, sort_keys=True))
        return
    click.echo(f"episodes:            {report.episodes}")
    click.echo(f"frames:              {report.frames}")
    click.echo(f"episodes with masks: {report.episodes_with_masks}")
    click.echo(f"object labels:       {', '.join(report.object_labels) or '-'}")
    click.echo(f"receptacle labels:   {', '.join(report.receptacle_labels) or '-'}")
    if report.component_frequencies:
        click.echo("component frequencies:")
        for comp, freq in report.component_frequencies.items():
            click.echo(f"  {comp}: {freq:.3f}")
    if report.warnings:
        click.echo(f"warnings ({len(report.warnings)}):")
        for warning in report.warnings:
            click.echo(f"  {warning}")


@cli.command("baseline")
@click.option("--input", "input_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--output", "output_dir", required=True, type=click.Path(file_okay=False))
@click.option("--mode", required=True, type=click.Choice(BASELINE_MODES))
@click.option("--patches", "patches_dir", type=click.Path(exists=True, file_okay=False), default=None)
@click.option("--seed", type=int, default=0)
def baseline_cmd(input_dir, output_dir, mode, patches_dir, seed):
    """Appendix-style baseline augmenters over a local patch library."""
    if mode != "spatial" and patches_dir is None:
        raise click.UsageError(f"--patches is required for mode {mode!r}")
    manifest = run_baseline(input_dir, output_dir, mode, patches_dir, seed)
    click.echo(f"wrote {len(manifest.episodes)} episodes to {output_dir}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except ValidationFailure as exc:
        for problem in exc.problems:
            click.echo(f"validation: {problem}", err=True)
        return 2
    except (DatasetError, PatchLibraryError) as exc:
        click.echo(f"validation: {exc}", err=True)
        return 2
    except FailureBudgetExceeded as exc:
        click.echo(str(exc), err=True)
        for failure in exc.failures:
            click.echo(
                f"  {failure['source_episode']} aug {failure['aug_index']}: {failure['error']}",
                err=True,
            )
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
