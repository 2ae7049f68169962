"""Command-line client for the pipeline stages.

Each subcommand builds a stage request and either executes it in process or
posts it to a running service (``--server``). Exit codes: 0 success, 2
input error, 3 validation error.
"""

from __future__ import annotations

import json
import sys

import click

from . import __version__, pipeline
from .schemas import PipelineRequest

EXIT_INPUT = 2
EXIT_VALIDATION = 3


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _run_stage(server: str | None, stage: str, config_file: str | None, overrides: dict) -> dict:
    request = PipelineRequest(config_file=config_file, overrides=overrides)
    if server:
        import httpx

        try:
            resp = httpx.post(f"{server.rstrip('/')}/pipeline/{stage}",
                              json=request.model_dump(), timeout=None)
        except httpx.HTTPError as exc:
            _fail(EXIT_INPUT, f"cannot reach {server}: {exc}")
        if resp.status_code != 200:
            try:
                detail = resp.json().get("detail", resp.text)
            except ValueError:
                detail = resp.text
            _fail(EXIT_VALIDATION if resp.status_code == 409 else EXIT_INPUT, detail)
        return resp.json()["summary"]

    from .service import handle_pipeline

    try:
        return handle_pipeline(stage, request).summary
    except pipeline.ValidationError as exc:
        _fail(EXIT_VALIDATION, str(exc))
    except (pipeline.InputError, OSError, ValueError) as exc:
        _fail(EXIT_INPUT, str(exc))


def _collect_overrides(sets, **named) -> dict:
    overrides = {}
    for key, value in named.items():
        if value is not None:
            overrides[key] = value
    for item in sets:
        if "=" not in item:
            _fail(EXIT_INPUT, f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    return overrides


@click.group()
@click.version_option(__version__)
@click.option("--server", metavar="URL", envvar="PERINODULAR_SERVER", default=None,
              help="Base URL of a running service; by default stages run in process.")
@click.pass_context
def main(ctx, server):
    """Quantify pulmonary structures around lung nodules and analyze them."""
    ctx.obj = server


def _stage_options(fn):
    fn = click.option("--config", "config_file", type=click.Path(), default=None,
                      help="Flat key=value config file.")(fn)
    fn = click.option("--out", "output_dir", type=click.Path(), default=None,
                      help="Run output directory.")(fn)
    fn = click.option("--set", "sets", multiple=True, metavar="KEY=VALUE",
                      help="Override any config key.")(fn)
    return fn


@main.command()
@_stage_options
@click.option("--annotations", "annotations_dir", type=click.Path(), default=None,
              help="Directory of per-patient annotation XML files.")
@click.option("--masks", "masks_dir", type=click.Path(), default=None,
              help="Directory with per-class mask subdirectories.")
@click.pass_obj
def ingest(server, config_file, sets, **named):
    """Parse annotations and write the nodule manifest and fused masks."""
    summary = _run_stage(server, "ingest", config_file, _collect_overrides(sets, **named))
    click.echo(json.dumps(summary, indent=2, sort_keys=True))


@main.command()
@_stage_options
@click.option("--masks", "masks_dir", type=click.Path(), default=None,
              help="Directory with per-class mask subdirectories.")
@click.pass_obj
def quantify(server, config_file, sets, **named):
    """Compute the per-nodule structure feature table."""
    summary = _run_stage(server, "quantify", config_file, _collect_overrides(sets, **named))
    click.echo(json.dumps(summary, indent=2, sort_keys=True))


@main.command()
@_stage_options
@click.pass_obj
def analyze(server, config_file, sets, **named):
    """Run the statistical battery over the feature table."""
    summary = _run_stage(server, "analyze", config_file, _collect_overrides(sets, **named))
    click.echo(json.dumps(summary, indent=2, sort_keys=True))


@main.command()
@_stage_options
@click.pass_obj
def train(server, config_file, sets, **named):
    """Train per-structure malignancy classifiers on proxy labels."""
    summary = _run_stage(server, "train", config_file, _collect_overrides(sets, **named))
    click.echo(json.dumps(summary, indent=2, sort_keys=True))


@main.command()
@_stage_options
@click.option("--train-dir", "train_dir", type=click.Path(), default=None,
              help="Run directory whose models/ subdirectory holds the classifiers.")
@click.option("--diagnosis", "diagnosis_csv", type=click.Path(), default=None,
              help="Patient diagnosis CSV (patient_id, category, method).")
@click.pass_obj
def evaluate(server, config_file, sets, **named):
    """Evaluate trained models at patient level against diagnosis labels."""
    summary = _run_stage(server, "evaluate", config_file, _collect_overrides(sets, **named))
    click.echo(json.dumps(summary, indent=2, sort_keys=True))


@main.command()
@_stage_options
@click.pass_obj
def report(server, config_file, sets, **named):
    """Render a markdown summary of the analysis and evaluation reports."""
    summary = _run_stage(server, "report", config_file, _collect_overrides(sets, **named))
    click.echo(json.dumps(summary, indent=2, sort_keys=True))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("perinodular.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
