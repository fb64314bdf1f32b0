"""Command-line interface: serve, translate, models, bench."""

from __future__ import annotations

import os
import sys

# the engine owns parallelism at the batch level; keep BLAS pools single
# threaded (must happen before numpy initializes)
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import click
import psutil

from . import __version__
from .bench import run_bench
from .errors import (
    CatalogError,
    ChecksumMismatchError,
    EngineBusyError,
    InputValidationError,
    LocalMTError,
    ManifestError,
    ModelNotFoundError,
    ShortlistFormatError,
    StaleGenerationError,
)
from .pipeline import Engine, EngineConfig, auto_config
from .registry import ModelStore, download_install, fetch_catalog
from .service import DEFAULT_PORT, ServiceConfig, create_app

CATALOG_URL_ENV = "APP_CATALOG_URL"
PORT_ENV = "APP_PORT"

_VALIDATION_ERRORS = (
    InputValidationError,
    ManifestError,
    ModelNotFoundError,
    ShortlistFormatError,
    StaleGenerationError,
    EngineBusyError,
)
_IO_ERRORS = (CatalogError, ChecksumMismatchError, OSError)


def _physical_cores() -> int:
    return psutil.cpu_count(logical=False) or os.cpu_count() or 1


def _build_engine(data_dir, threads, max_batch_tokens) -> Engine:
    store = ModelStore(data_dir)
    base = auto_config(_physical_cores(), psutil.virtual_memory().available)
    config = EngineConfig(
        threads=threads or base.threads,
        max_batch_tokens=max_batch_tokens or base.max_batch_tokens,
        workspace_bytes=base.workspace_bytes,
    )
    return Engine(config, store)


@click.group()
@click.version_option(__version__)
def cli():
    """Local, private machine translation."""


@cli.command()
@click.option("--port", type=int, default=lambda: int(os.environ.get(PORT_ENV, DEFAULT_PORT)))
@click.option("--bind", default="127.0.0.1", show_default=True)
@click.option("--data-dir", default=None, help="Model store directory (APP_DATA_DIR).")
@click.option("--catalog-url", default=lambda: os.environ.get(CATALOG_URL_ENV))
@click.option("--threads", type=int, default=None)
@click.option("--max-batch-tokens", type=int, default=None)
@click.option("--ui-dir", default=None, help="Static frontend directory to serve at /.")
def serve(port, bind, data_dir, catalog_url, threads, max_batch_tokens, ui_dir):
    """Run the loopback translation service."""
    import uvicorn

    engine = _build_engine(data_dir, threads, max_batch_tokens)
    config = ServiceConfig(
        bind=bind,
        port=port,
        data_dir=data_dir,
        catalog_url=catalog_url,
        ui_dir=ui_dir,
    )
    app = create_app(engine, engine.store, config)
    click.echo(f"serving on http://{bind}:{port}", err=True)
    uvicorn.run(app, host=bind, port=port, log_level="warning", access_log=False)


@cli.command()
@click.option("-m", "--model", required=True)
@click.option("-i", "--input", "input_path", type=click.Path(), default=None)
@click.option("--stdin", "use_stdin", is_flag=True, help="Read the text from stdin.")
@click.option("--threads", type=int, default=None)
@click.option("--data-dir", default=None)
def translate(model, input_path, use_stdin, threads, data_dir):
    """Translate a file or stdin with an installed model."""
    if input_path is None and not use_stdin:
        use_stdin = True
    if input_path is not None and use_stdin:
        raise InputValidationError("pass either --input or --stdin, not both")
    text = sys.stdin.read() if use_stdin else _read_file(input_path)
    with _build_engine(data_dir, threads, None) as engine:
        click.echo(engine.translate_text(model, text), nl=False)


def _read_file(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


@cli.group()
def models():
    """Manage installed model packages."""


@models.command("list")
@click.option("--data-dir", default=None)
def models_list(data_dir):
    for m in ModelStore(data_dir).list_local():
        click.echo(f"{m.id}\t{m.version}\t{m.src_lang}->{m.trg_lang}\t{m.name}")


@models.command("catalog")
@click.option("--data-dir", default=None)
@click.option("--catalog-url", default=lambda: os.environ.get(CATALOG_URL_ENV))
def models_catalog(data_dir, catalog_url):
    if not catalog_url:
        raise InputValidationError(f"no catalog URL; pass --catalog-url or set {CATALOG_URL_ENV}")
    for e in fetch_catalog(catalog_url):
        click.echo(f"{e.id}\t{e.version}\t{e.src_lang}->{e.trg_lang}\t{e.size_bytes}\t{e.name}")


@models.command("download")
@click.argument("model_id")
@click.option("--data-dir", default=None)
@click.option("--catalog-url", default=lambda: os.environ.get(CATALOG_URL_ENV))
def models_download(model_id, data_dir, catalog_url):
    if not catalog_url:
        raise InputValidationError(f"no catalog URL; pass --catalog-url or set {CATALOG_URL_ENV}")
    store = ModelStore(data_dir)
    entries = [e for e in fetch_catalog(catalog_url) if e.id == model_id]
    if not entries:
        raise ModelNotFoundError(f"catalog has no model {model_id!r}")
    entry = sorted(entries, key=lambda e: e.version)[-1]

    def progress(done, total):
        if total:
            click.echo(f"\r{done * 100 // total:3d}% of {total} bytes", err=True, nl=False)

    installed = download_install(entry, store, progress=progress)
    click.echo("", err=True)
    click.echo(installed)


@models.command("import")
@click.argument("path", type=click.Path())
@click.option("--data-dir", default=None)
def models_import(path, data_dir):
    click.echo(ModelStore(data_dir).import_archive(path))


@models.command("delete")
@click.argument("model_id")
@click.option("--data-dir", default=None)
def models_delete(model_id, data_dir):
    ModelStore(data_dir).delete(model_id)
    click.echo(f"deleted {model_id}")


@cli.command()
@click.option("-m", "--model", required=True)
@click.option("-i", "--input", "input_path", type=click.Path(), required=True)
@click.option("--threads", type=int, default=None)
@click.option("--pre-split", is_flag=True, help="Input is one sentence per line.")
@click.option("--data-dir", default=None)
def bench(model, input_path, threads, pre_split, data_dir):
    """Benchmark words-per-second over a corpus file."""
    with _build_engine(data_dir, threads, None) as engine:
        report = run_bench(engine, model, input_path, pre_split=pre_split)
    click.echo(report.to_json_line())
    click.echo(report.format_text(), err=True)


def main(argv=None) -> int:
    try:
        cli(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        return 1
    except _VALIDATION_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except _IO_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except LocalMTError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
