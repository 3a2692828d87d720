"""Command line interface: ``grainfuse synth|report|importance|train|predict``"""
from __future__ import annotations

import functools
import json
import logging
import pathlib
import sys
import typing as t

import click
import pandas as pd

from . import __version__
from .config import RunConfig, load_config_file, to_default_map
from .datamodel import (
    TARGET_COLUMN,
    TIMESTAMP_COLUMN,
    Dataset,
    FeatureTable,
    load_csv,
    load_features,
    train_test_split,
    write_csv,
)
from .exceptions import GrainFuseError
from .fusion import (
    FusionSpec,
    evaluate_models,
    fit_fusion,
    parse_members,
    select_models,
    tune_base,
    tune_fusion,
    tune_n_estimators,
)
from .helpers import DEFAULT_GRID_SPEC, parse_grid
from .importance import format_bar_chart, forest_importance
from .metrics import EvalReport, build_report, format_report, mse, r_squared
from .repository import default_repository
from .serialization import dump_model, load_model, params_to_dict
from .synth import SynthConfig, generate
from .types import BaseModelKind, ModelDescriptor

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"
LEAKAGE_CHOICES = ("in-sample", "oof")


class GridType(click.ParamType):
    name = "grid"

    def convert(self, value, param, ctx):
        try:
            return tuple(parse_grid(value))
        except (GrainFuseError, TypeError, ValueError) as e:
            self.fail(str(e), param, ctx)


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(format=LOG_FORMAT, stream=sys.stderr)
    logging.getLogger().setLevel(level)


def handle_errors(f):
    """Report library errors as a one-line diagnostic with exit code 1"""

    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except GrainFuseError as e:
            raise click.ClickException(str(e).splitlines()[0]) from e
        except OSError as e:
            raise click.ClickException(f"{e.filename}: {e.strerror}") from e

    return wrapper


def pipeline_options(f):
    decorators = [
        click.option(
            "--input",
            type=click.Path(exists=True, dir_okay=False, path_type=pathlib.Path),
            required=True,
            help="Grain telemetry CSV",
        ),
        click.option(
            "--seed", type=click.IntRange(min=0), default=0, show_default=True, help="Random seed"
        ),
        click.option(
            "--train-fraction",
            type=click.FloatRange(0, 1, min_open=True, max_open=True),
            default=0.7,
            show_default=True,
        ),
        click.option(
            "--grid",
            type=GridType(),
            default=DEFAULT_GRID_SPEC,
            show_default=True,
            help="n_estimators candidates, e.g. '1-30,35-300:5'",
        ),
        click.option("--jobs", type=int, default=1, show_default=True, help="Parallel workers"),
    ]
    for decorator in reversed(decorators):
        f = decorator(f)
    return f


def _load_split(config: RunConfig) -> t.Tuple[Dataset, Dataset, Dataset]:
    data = load_csv(config.input)
    train, test = train_test_split(data, config.split)
    return data, train, test


def _prediction_frame(
    data: t.Union[Dataset, FeatureTable], predictions: t.Mapping[str, t.Any]
) -> pd.DataFrame:
    frame = pd.DataFrame(index=pd.RangeIndex(len(data.features)))
    if data.targets is not None:
        frame[TARGET_COLUMN] = data.targets
    if data.timestamps is not None:
        frame.insert(0, TIMESTAMP_COLUMN, [stamp.isoformat() for stamp in data.timestamps])
    for name, values in predictions.items():
        frame[name] = values
    return frame


def _write_frame(frame: pd.DataFrame, path: pathlib.Path) -> None:
    frame.to_csv(path, index=False, encoding="utf-8", float_format="%.6f", lineterminator="\n")


def _write_json(data, path: pathlib.Path) -> None:
    path.write_text(json.dumps(data, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def write_report(report: EvalReport, bases: t.Mapping, test: Dataset, directory: pathlib.Path):
    """``report.txt``, ``report.json`` (with the parameters chosen per base model) and
    ``predictions.csv`` with the test-set predictions of every model
    """
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "report.txt").write_text(format_report(report), encoding="utf-8")
    structured = report.to_dict()
    structured["parameters"] = {
        kind.value: params_to_dict(base.params) for kind, base in bases.items()
    }
    _write_json(structured, directory / "report.json")
    _write_frame(_prediction_frame(test, report.predictions), directory / "predictions.csv")
    logger.info("Wrote report files to %s", directory)


@click.group()
@click.version_option(__version__, prog_name="grainfuse")
@click.option(
    "--config",
    "config_file",
    type=click.Path(exists=True, dir_okay=False),
    help="YAML file with option defaults",
)
@click.option("-v", "--verbose", is_flag=True, help="Log debug output")
@click.option("-q", "--quiet", is_flag=True, help="Only log warnings and errors")
@click.pass_context
def main(ctx, config_file, verbose, quiet):
    """Tree-ensemble fusion models for stored-grain temperature"""
    configure_logging(verbose, quiet)
    if config_file:
        try:
            ctx.default_map = to_default_map(load_config_file(config_file))
        except GrainFuseError as e:
            raise click.ClickException(str(e)) from e


@main.command()
@click.option("--days", type=click.IntRange(min=1), default=524, show_default=True)
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=pathlib.Path), required=True)
@handle_errors
def synth(days, seed, out):
    """Write a synthetic telemetry CSV"""
    dataset = generate(SynthConfig(n_days=days, seed=seed))
    write_csv(dataset, out)
    click.echo(f"Wrote {dataset.n} rows to {out}")


@main.command()
@pipeline_options
@click.option(
    "--out",
    type=click.Path(file_okay=False, path_type=pathlib.Path),
    default="report",
    show_default=True,
    help="Output directory",
)
@click.option(
    "--models",
    multiple=True,
    help="Restrict to a fusion such as 'adaboost+random_forest' and its members; repeatable",
)
@click.option(
    "--leakage", type=click.Choice(LEAKAGE_CHOICES), default="in-sample", show_default=True
)
@handle_errors
def report(**options):
    """Tune the base models and the fusions and compare them on the test split"""
    config = RunConfig.from_options(**options)
    _, train, test = _load_split(config)
    descriptors = select_models(config.models)
    evaluated, bases = evaluate_models(
        train, test, descriptors, config.grid, config.seed, config.leakage, n_jobs=config.jobs
    )
    split = {
        "train_fraction": config.train_fraction,
        "seed": config.seed,
        "n_train": train.n,
        "n_test": test.n,
    }
    result = build_report(evaluated, test, split, config.seed)
    write_report(result, bases, test, config.out)
    click.echo(f"Wrote {len(result)}-row report to {config.out}")


@main.command()
@pipeline_options
@click.option(
    "--out",
    type=click.Path(file_okay=False, path_type=pathlib.Path),
    default="importance",
    show_default=True,
    help="Output directory",
)
@handle_errors
def importance(**options):
    """Feature importance of the tuned random forest"""
    config = RunConfig.from_options(**options)
    data, train, test = _load_split(config)
    family = default_repository().family(
        BaseModelKind.RANDOM_FOREST, seed=config.seed, n_jobs=config.jobs
    )
    tuned = tune_n_estimators(family, config.grid, train, test)
    result = forest_importance(tuned.model, data.feature_names)

    config.out.mkdir(parents=True, exist_ok=True)
    chart = format_bar_chart(result)
    structured = {"n_estimators": tuned.chosen, **result.to_dict()}
    _write_json(structured, config.out / "importance.json")
    (config.out / "importance.txt").write_text(chart, encoding="utf-8")
    click.echo(chart, nl=False)


@main.command()
@pipeline_options
@click.option(
    "--model",
    "model_spec",
    required=True,
    help="A model kind, or fusion members joined by '+'",
)
@click.option(
    "--n-estimators",
    type=click.IntRange(min=1),
    default=None,
    help="Fixed n_estimators (meta forest for a fusion) instead of tuning over --grid",
)
@click.option(
    "--leakage", type=click.Choice(LEAKAGE_CHOICES), default="in-sample", show_default=True
)
@click.option("--out", type=click.Path(dir_okay=False, path_type=pathlib.Path), required=True)
@handle_errors
def train(model_spec, n_estimators, **options):
    """Fit one model on the train split and save it as JSON"""
    config = RunConfig.from_options(**options)
    members = parse_members(model_spec)
    _, train_set, test = _load_split(config)
    repository = default_repository()

    def tuned(kind):
        return tune_base(
            kind, train_set, test, config.grid, config.seed, repository, n_jobs=config.jobs
        )

    if len(members) == 1:
        kind = members[0]
        if n_estimators is None or not kind.has_n_estimators:
            model = tuned(kind).model
        else:
            model = repository.create(
                kind, train_set, n_estimators=n_estimators, seed=config.seed, n_jobs=config.jobs
            )
    else:
        spec = FusionSpec(members, n_estimators or 1, config.seed, config.leakage)
        bases = {kind: tuned(kind) for kind in spec.members}
        if n_estimators is None:
            model, _ = tune_fusion(
                train_set,
                test,
                spec.members,
                bases,
                config.grid,
                config.seed,
                config.leakage,
                repository,
                config.jobs,
            )
        else:
            model = fit_fusion(
                train_set, test, spec, bases, repository=repository, n_jobs=config.jobs
            )

    dump_model(model, config.out)
    predicted = model.predict(test.features)
    click.echo(
        f"Saved {ModelDescriptor(tuple(members)).name} to {config.out}: "
        f"test MSE {mse(test.targets, predicted):.4f}, "
        f"R² {r_squared(test.targets, predicted):.4f}"
    )


@main.command()
@click.option(
    "--model",
    "model_path",
    type=click.Path(exists=True, dir_okay=False, path_type=pathlib.Path),
    required=True,
    help="Model file written by 'train'",
)
@click.option(
    "--input",
    type=click.Path(exists=True, dir_okay=False, path_type=pathlib.Path),
    required=True,
)
@click.option("--out", type=click.Path(dir_okay=False, path_type=pathlib.Path), required=True)
@handle_errors
def predict(model_path, input, out):
    """Predict the grain temperature of every row of a CSV file; ``grain_temp`` is optional"""
    model = load_model(model_path)
    data = load_features(input)
    _write_frame(_prediction_frame(data, {"prediction": model.predict(data.features)}), out)
    click.echo(f"Wrote {data.n} predictions to {out}")


if __name__ == "__main__":
    main()
