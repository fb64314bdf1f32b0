"""Loopback HTTP service exposing translation, model management, and settings.

Privacy posture: binds to loopback by default, reaches the network only from
the catalog and download endpoints (explicit user actions), and never logs
request text bodies - log lines carry ids, counts, and durations only.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import __version__
from .errors import (
    CatalogError,
    CatalogNetworkError,
    ChecksumMismatchError,
    EngineBusyError,
    InputValidationError,
    InstallConflictError,
    LocalMTError,
    ManifestError,
    ModelNotFoundError,
    StaleGenerationError,
)
from .pipeline import Engine, TranslationRequest
from .registry import ModelStore, download_install, fetch_catalog

logger = logging.getLogger("localmt.service")

DEFAULT_PORT = 8787


@dataclass
class ServiceConfig:
    bind: str = "127.0.0.1"
    port: int = DEFAULT_PORT
    data_dir: str | None = None
    threads: int | None = None            # None -> auto from machine
    max_batch_tokens: int | None = None
    as_you_type_enabled: bool = True
    catalog_url: str | None = None
    ui_dir: str | None = None

    def __post_init__(self) -> None:
        if not 1024 <= self.port <= 65535:
            raise InputValidationError("port must be in [1024, 65535]")

    def view(self, engine: Engine) -> dict:
        return {
            "bind": self.bind,
            "port": self.port,
            "data_dir": self.data_dir,
            "threads": engine.config.threads,
            "max_batch_tokens": engine.config.max_batch_tokens,
            "as_you_type_enabled": self.as_you_type_enabled,
            "catalog_url": self.catalog_url,
        }


class TranslateBody(BaseModel):
    model: str
    text: str
    session: str | None = None
    generation: int | None = None


class DownloadBody(BaseModel):
    id: str


class ImportBody(BaseModel):
    path: str


class SettingsBody(BaseModel):
    threads: int | None = None
    max_batch_tokens: int | None = None
    as_you_type_enabled: bool | None = None
    catalog_url: str | None = None


_ERROR_STATUS = (
    (ModelNotFoundError, 404, "model_not_found"),
    (StaleGenerationError, 409, "stale_generation"),
    (InstallConflictError, 409, "install_in_progress"),
    (EngineBusyError, 409, "engine_busy"),
    (ChecksumMismatchError, 502, "checksum_mismatch"),
    (CatalogNetworkError, 502, "catalog_unreachable"),
    (CatalogError, 502, "catalog_invalid"),
    (ManifestError, 400, "package_invalid"),
    (InputValidationError, 400, "invalid_request"),
)


def _error_response(exc: LocalMTError) -> JSONResponse:
    for etype, status, code in _ERROR_STATUS:
        if isinstance(exc, etype):
            return JSONResponse(status_code=status, content={"code": code, "message": str(exc)})
    return JSONResponse(status_code=500, content={"code": "internal", "message": str(exc)})


def create_app(engine: Engine, store: ModelStore, config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="localmt", version=__version__)
    installing: set[str] = set()
    install_lock = threading.Lock()

    @app.exception_handler(LocalMTError)
    async def handle_domain_error(request: Request, exc: LocalMTError):
        return _error_response(exc)

    @app.get("/v1/health")
    def health():
        return {"version": __version__, "ready": True}

    @app.get("/v1/models")
    def list_models():
        return [m.to_dict() for m in store.list_local()]

    @app.get("/v1/catalog")
    def catalog():
        if not config.catalog_url:
            raise InputValidationError("no catalog_url configured")
        entries = fetch_catalog(config.catalog_url)
        logger.info("catalog fetched: %d entries", len(entries))
        return [e.to_dict() for e in entries]

    @app.post("/v1/models/download")
    def download(body: DownloadBody):
        if not config.catalog_url:
            raise InputValidationError("no catalog_url configured")
        with install_lock:
            if body.id in installing:
                raise InstallConflictError(f"{body.id} is already being installed")
            installing.add(body.id)
        try:
            entries = [e for e in fetch_catalog(config.catalog_url) if e.id == body.id]
            if not entries:
                raise ModelNotFoundError(f"catalog has no model {body.id!r}")
            entry = sorted(entries, key=lambda e: e.version)[-1]
            model_id = download_install(entry, store)
            logger.info("installed model %s (%d bytes)", model_id, entry.size_bytes)
            return {"id": model_id}
        finally:
            with install_lock:
                installing.discard(body.id)

    @app.post("/v1/models/import")
    def import_model(body: ImportBody):
        model_id = store.import_archive(body.path)
        engine.unload(model_id)  # a reinstall may have replaced the weights
        logger.info("imported model %s", model_id)
        return {"id": model_id}

    @app.delete("/v1/models/{model_id}")
    def delete_model(model_id: str):
        store.delete(model_id)
        engine.unload(model_id)
        logger.info("deleted model %s", model_id)
        return {"deleted": model_id}

    @app.post("/v1/translate")
    def translate(body: TranslateBody):
        logger.info(
            "translate request: model=%s chars=%d session=%s",
            body.model, len(body.text), body.session or "-",
        )
        if body.session is not None and body.generation is not None:
            result = engine.submit(
                TranslationRequest(
                    session_id=body.session,
                    generation=body.generation,
                    model_id=body.model,
                    text=body.text,
                )
            ).result()
            if not result.ok:
                return JSONResponse(
                    status_code=409,
                    content={"code": "superseded", "message": "newer generation superseded this request"},
                )
            return {"text": result.text}
        return {"text": engine.translate_text(body.model, body.text)}

    @app.get("/v1/settings")
    def get_settings():
        return config.view(engine)

    @app.put("/v1/settings")
    def put_settings(body: SettingsBody):
        if body.threads is not None and body.threads < 1:
            raise InputValidationError("threads must be >= 1")
        if body.max_batch_tokens is not None and body.max_batch_tokens < 1:
            raise InputValidationError("max_batch_tokens must be >= 1")
        if body.threads is not None or body.max_batch_tokens is not None:
            engine.update_config(threads=body.threads, max_batch_tokens=body.max_batch_tokens)
        if body.as_you_type_enabled is not None:
            config.as_you_type_enabled = body.as_you_type_enabled
        if body.catalog_url is not None:
            config.catalog_url = body.catalog_url
        return config.view(engine)

    if config.ui_dir and Path(config.ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=config.ui_dir, html=True), name="ui")

    return app
