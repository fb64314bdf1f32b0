"""Model package registry: archive format, remote catalog, checksum-verified
atomic installation, import, and deletion.

Networking happens in exactly two functions, fetch_catalog and
download_install, both invoked only from explicit user actions. The only
identifying request header is the User-Agent; no cookies are sent or stored.
The store directory is plain files and can be copied to another machine.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import re
import shutil
import tarfile
import tempfile
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path

from . import USER_AGENT
from .errors import (
    CatalogFormatError,
    CatalogNetworkError,
    CatalogSchemaError,
    ChecksumMismatchError,
    InputValidationError,
    LocalMTError,
    ManifestError,
    ModelNotFoundError,
)
from .model import Model, ModelConfig, load_model
from .shortlist import Shortlist, deserialize as deserialize_shortlist
from .textops import Vocabulary, load_vocabulary

CATALOG_SCHEMA = 1
DEFAULT_DATA_DIR = "~/.local/share/localmt"
DATA_DIR_ENV = "APP_DATA_DIR"

_ID_RE = re.compile(r"^[a-z0-9-]+$")
_SHA256_RE = re.compile(r"^[0-9a-f]{64}$")
_FILE_KEYS = ("weights", "vocab_src", "vocab_trg", "shortlist")

# catalog and archive downloads are static documents; cap the size we accept
_MAX_CATALOG_BYTES = 16 * 1024 * 1024


@dataclass(frozen=True)
class ModelManifest:
    id: str
    name: str
    src_lang: str
    trg_lang: str
    version: str
    architecture: ModelConfig
    files: dict[str, str]
    license: str

    def __post_init__(self) -> None:
        if not _ID_RE.match(self.id):
            raise ManifestError(f"model id {self.id!r} must match [a-z0-9-]+")
        missing = [k for k in _FILE_KEYS if k not in self.files]
        if missing:
            raise ManifestError(f"manifest files missing entries: {missing}")
        for key, rel in self.files.items():
            p = Path(rel)
            if p.is_absolute() or ".." in p.parts:
                raise ManifestError(f"file path {rel!r} must be relative and contained")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "src_lang": self.src_lang,
            "trg_lang": self.trg_lang,
            "version": self.version,
            "architecture": self.architecture.to_dict(),
            "files": dict(self.files),
            "license": self.license,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelManifest":
        try:
            return cls(
                id=d["id"],
                name=d["name"],
                src_lang=d["src_lang"],
                trg_lang=d["trg_lang"],
                version=d["version"],
                architecture=ModelConfig.from_dict(d["architecture"]),
                files={k: str(v) for k, v in d["files"].items()},
                license=d.get("license", ""),
            )
        except (KeyError, TypeError) as exc:
            raise ManifestError(f"manifest missing or malformed field: {exc}") from exc
        except InputValidationError as exc:
            raise ManifestError(f"manifest architecture invalid: {exc}") from exc


@dataclass(frozen=True)
class CatalogEntry:
    id: str
    name: str
    src_lang: str
    trg_lang: str
    version: str
    url: str
    sha256: str
    size_bytes: int

    def __post_init__(self) -> None:
        if not _SHA256_RE.match(self.sha256):
            raise CatalogFormatError(f"sha256 for {self.id!r} is not 64 hex chars")
        if self.size_bytes < 0:
            raise CatalogFormatError("size_bytes must be >= 0")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "src_lang": self.src_lang,
            "trg_lang": self.trg_lang,
            "version": self.version,
            "url": self.url,
            "sha256": self.sha256,
            "size_bytes": self.size_bytes,
        }


def _semver_key(version: str):
    parts = version.split(".")
    key = []
    for p in parts:
        key.append(int(p) if p.isdigit() else -1)
    return (key, version)


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class ModelStore:
    """Filesystem store: <data-dir>/models/<id>-<version>/ holds one complete
    package per directory. Mutations are serialized by one lock and land via
    atomic rename, so a directory is either absent or a complete package."""

    def __init__(self, data_dir: str | Path | None = None):
        if data_dir is None:
            data_dir = os.environ.get(DATA_DIR_ENV, DEFAULT_DATA_DIR)
        self.data_dir = Path(data_dir).expanduser()
        self.models_dir = self.data_dir / "models"
        self.tmp_dir = self.data_dir / "tmp"
        self.models_dir.mkdir(parents=True, exist_ok=True)
        self.tmp_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()

    # --- queries ---------------------------------------------------------

    def list_local(self) -> list[ModelManifest]:
        manifests = []
        for entry in sorted(self.models_dir.iterdir()) if self.models_dir.exists() else []:
            if not entry.is_dir() or entry.name.startswith("."):
                continue
            try:
                manifests.append(self._read_manifest(entry))
            except (ManifestError, OSError, json.JSONDecodeError):
                continue  # incomplete or foreign directory; never installed by us
        return manifests

    def _read_manifest(self, package_dir: Path) -> ModelManifest:
        raw = json.loads((package_dir / "manifest.json").read_text(encoding="utf-8"))
        return ModelManifest.from_dict(raw)

    def resolve(self, model_id: str) -> Path:
        """Directory of the highest-version install of model_id."""
        best: tuple | None = None
        best_dir: Path | None = None
        for m in self.list_local():
            if m.id != model_id:
                continue
            key = _semver_key(m.version)
            if best is None or key > best:
                best = key
                best_dir = self.models_dir / f"{m.id}-{m.version}"
        if best_dir is None:
            raise ModelNotFoundError(f"no installed model with id {model_id!r}")
        return best_dir

    def manifest(self, model_id: str) -> ModelManifest:
        return self._read_manifest(self.resolve(model_id))

    def load_parts(self, model_id: str) -> tuple[ModelManifest, Model, Vocabulary, Vocabulary, Shortlist]:
        """Load every component of an installed package."""
        pkg = self.resolve(model_id)
        manifest = self._read_manifest(pkg)
        model = load_model((pkg / manifest.files["weights"]).read_bytes(), manifest.architecture)
        vocab_src = load_vocabulary(pkg / manifest.files["vocab_src"])
        vocab_trg = load_vocabulary(pkg / manifest.files["vocab_trg"])
        sl = deserialize_shortlist((pkg / manifest.files["shortlist"]).read_bytes())
        return manifest, model, vocab_src, vocab_trg, sl

    def verify_install(self, model_id: str) -> bool:
        """Recorded per-file checksums still match the installed files."""
        pkg = self.resolve(model_id)
        record = json.loads((pkg / "install.json").read_text(encoding="utf-8"))
        for rel, digest in record["files"].items():
            if _sha256_file(pkg / rel) != digest:
                return False
        return True

    # --- mutations ---------------------------------------------------------

    def import_archive(self, archive_path: str | Path) -> str:
        """Install a local package archive; checksum computed and recorded."""
        archive_path = Path(archive_path)
        if not archive_path.is_file():
            raise InputValidationError(f"archive not found: {archive_path}")
        digest = _sha256_file(archive_path)
        return self._install_archive(archive_path, digest)

    def delete(self, model_id: str) -> None:
        """Remove every installed version of model_id (rename, then remove)."""
        with self._lock:
            victims = [
                self.models_dir / f"{m.id}-{m.version}"
                for m in self.list_local()
                if m.id == model_id
            ]
            if not victims:
                raise ModelNotFoundError(f"no installed model with id {model_id!r}")
            for path in victims:
                trash = self.tmp_dir / f"trash-{os.urandom(6).hex()}"
                os.rename(path, trash)
                shutil.rmtree(trash, ignore_errors=True)

    # --- install machinery ---------------------------------------------------

    def _install_archive(self, archive_path: Path, archive_sha256: str) -> str:
        staging = Path(tempfile.mkdtemp(prefix="stage-", dir=self.tmp_dir))
        try:
            self._unpack(archive_path, staging)
            manifest = self._validate_package(staging)
            self._write_install_record(staging, archive_sha256)
            target = self.models_dir / f"{manifest.id}-{manifest.version}"
            with self._lock:
                if target.exists():
                    return manifest.id  # same id+version already installed
                self._commit(staging, target)
            return manifest.id
        finally:
            shutil.rmtree(staging, ignore_errors=True)

    def _unpack(self, archive_path: Path, staging: Path) -> None:
        try:
            with tarfile.open(archive_path, "r:gz") as tar:
                extract_kwargs = {"set_attrs": False}
                if hasattr(tarfile, "data_filter"):
                    extract_kwargs["filter"] = "data"
                for member in tar.getmembers():
                    name = Path(member.name)
                    if name.is_absolute() or ".." in name.parts:
                        raise ManifestError(f"archive member escapes package: {member.name}")
                    if not (member.isreg() or member.isdir()):
                        raise ManifestError(f"archive member has unsupported type: {member.name}")
                for member in tar.getmembers():
                    tar.extract(member, staging, **extract_kwargs)
        except tarfile.TarError as exc:
            raise ManifestError(f"archive is not a valid gzip tar: {exc}") from exc

    def _validate_package(self, staging: Path) -> ModelManifest:
        manifest_path = staging / "manifest.json"
        if not manifest_path.is_file():
            raise ManifestError("package has no manifest.json")
        try:
            manifest = ModelManifest.from_dict(
                json.loads(manifest_path.read_text(encoding="utf-8"))
            )
        except json.JSONDecodeError as exc:
            raise ManifestError(f"manifest.json is not valid JSON: {exc}") from exc
        for key in _FILE_KEYS:
            if not (staging / manifest.files[key]).is_file():
                raise ManifestError(f"manifest references missing file {manifest.files[key]!r}")
        # shapes must line up before anything becomes visible
        try:
            model = load_model(
                (staging / manifest.files["weights"]).read_bytes(), manifest.architecture
            )
            vocab_src = load_vocabulary(staging / manifest.files["vocab_src"])
            vocab_trg = load_vocabulary(staging / manifest.files["vocab_trg"])
            sl = deserialize_shortlist((staging / manifest.files["shortlist"]).read_bytes())
        except LocalMTError as exc:
            raise ManifestError(f"package contents invalid: {exc}") from exc
        if sl.vocab_size != model.config.vocab_size:
            raise ManifestError(
                f"shortlist vocab {sl.vocab_size} != model vocab {model.config.vocab_size}"
            )
        for name, vocab in (("vocab_src", vocab_src), ("vocab_trg", vocab_trg)):
            if len(vocab) > model.config.vocab_size:
                raise ManifestError(f"{name} has more pieces than the embedding table")
        return manifest

    def _write_install_record(self, staging: Path, archive_sha256: str) -> None:
        files = {}
        for path in sorted(staging.rglob("*")):
            if path.is_file():
                files[path.relative_to(staging).as_posix()] = _sha256_file(path)
        record = {"archive_sha256": archive_sha256, "files": files}
        (staging / "install.json").write_text(json.dumps(record, indent=1), encoding="utf-8")

    def _commit(self, staging: Path, target: Path) -> None:
        os.rename(staging, target)


# --- remote catalog -----------------------------------------------------------


def _open_url(url: str, timeout: float):
    request = urllib.request.Request(url, headers={"User-Agent": USER_AGENT}, method="GET")
    opener = urllib.request.build_opener()  # no cookie processor, ever
    return opener.open(request, timeout=timeout)


def fetch_catalog(url: str, timeout: float = 30.0) -> list[CatalogEntry]:
    """GET the static catalog document. Called only from explicit user
    actions; failures are reported, never retried automatically."""
    try:
        with _open_url(url, timeout) as resp:
            raw = resp.read(_MAX_CATALOG_BYTES)
    except (urllib.error.URLError, OSError, TimeoutError) as exc:
        raise CatalogNetworkError(f"catalog fetch failed: {exc}") from exc
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CatalogFormatError(f"catalog is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "schema" not in doc:
        raise CatalogFormatError("catalog lacks a schema field")
    if doc["schema"] != CATALOG_SCHEMA:
        raise CatalogSchemaError(f"unsupported catalog schema {doc['schema']!r}")
    models = doc.get("models")
    if not isinstance(models, list):
        raise CatalogFormatError("catalog models must be a list")
    entries = []
    for item in models:
        try:
            entries.append(
                CatalogEntry(
                    id=item["id"],
                    name=item.get("name", item["id"]),
                    src_lang=item.get("src_lang", ""),
                    trg_lang=item.get("trg_lang", ""),
                    version=item.get("version", "0.0.0"),
                    url=item["url"],
                    sha256=item["sha256"],
                    size_bytes=int(item.get("size_bytes", 0)),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CatalogFormatError(f"catalog entry malformed: {exc}") from exc
    return entries


def download_install(
    entry: CatalogEntry,
    store: ModelStore,
    timeout: float = 60.0,
    progress=None,
) -> str:
    """Download entry.url to a temporary file, verify its sha256, and install
    atomically. On checksum mismatch nothing is installed and the temporary
    file is removed."""
    fd, tmp_name = tempfile.mkstemp(prefix="download-", dir=store.tmp_dir)
    tmp_path = Path(tmp_name)
    digest = hashlib.sha256()
    try:
        try:
            with _open_url(entry.url, timeout) as resp, open(fd, "wb") as out:
                total = entry.size_bytes or None
                done = 0
                while True:
                    chunk = resp.read(1 << 17)
                    if not chunk:
                        break
                    digest.update(chunk)
                    out.write(chunk)
                    done += len(chunk)
                    if progress is not None:
                        progress(done, total)
        except (urllib.error.URLError, OSError, TimeoutError) as exc:
            raise CatalogNetworkError(f"download failed: {exc}") from exc
        if digest.hexdigest() != entry.sha256:
            raise ChecksumMismatchError(
                f"archive sha256 {digest.hexdigest()} != cataloged {entry.sha256}"
            )
        return store._install_archive(tmp_path, entry.sha256)
    finally:
        tmp_path.unlink(missing_ok=True)


# --- package building (used by scripts and tests) ------------------------------


def build_package_archive(
    out_path: str | Path,
    manifest: ModelManifest,
    weights_blob: bytes,
    vocab_src_text: str,
    vocab_trg_text: str,
    shortlist_blob: bytes,
) -> str:
    """Write a gzip tar package archive; returns its sha256 hex digest."""
    out_path = Path(out_path)
    payload = {
        "manifest.json": json.dumps(manifest.to_dict(), indent=1).encode("utf-8"),
        manifest.files["weights"]: weights_blob,
        manifest.files["vocab_src"]: vocab_src_text.encode("utf-8"),
        manifest.files["vocab_trg"]: vocab_trg_text.encode("utf-8"),
        manifest.files["shortlist"]: shortlist_blob,
    }
    with tarfile.open(out_path, "w:gz") as tar:
        for name, data in payload.items():
            info = tarfile.TarInfo(name)
            info.size = len(data)
            tar.addfile(info, io.BytesIO(data))
    return _sha256_file(out_path)
