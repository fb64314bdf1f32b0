"""Exception hierarchy shared across the package."""


class LocalMTError(Exception):
    """Base class for every error this package raises on purpose."""


class InputValidationError(LocalMTError, ValueError):
    """An argument violates a documented precondition."""


# --- model / weight blob format ---

class ModelFormatError(LocalMTError):
    """Weight blob cannot be interpreted."""


class TruncatedBlobError(ModelFormatError):
    """Blob ended before the declared tensors were read."""


class ShapeMismatchError(ModelFormatError):
    """Tensor shape in the blob disagrees with the model configuration."""


class UnknownFormatVersionError(ModelFormatError):
    """Blob declares a format version this build does not understand."""


# --- shortlist binary format ---

class ShortlistFormatError(LocalMTError):
    """Shortlist blob cannot be interpreted."""


class BadMagicError(ShortlistFormatError):
    """Blob does not start with the shortlist magic."""


class UnknownVersionError(ShortlistFormatError):
    """Shortlist blob declares an unsupported version."""


class IdOutOfRangeError(ShortlistFormatError):
    """Shortlist blob contains a token id >= its declared vocab size."""


# --- registry / packages ---

class ManifestError(LocalMTError):
    """Package manifest is missing, malformed, or inconsistent."""


class ChecksumMismatchError(LocalMTError):
    """Downloaded archive does not match its recorded sha256."""


class ModelNotFoundError(LocalMTError):
    """No installed model has the requested id."""


class InstallConflictError(LocalMTError):
    """Another install of the same model id is already in progress."""


class CatalogError(LocalMTError):
    """Remote catalog could not be fetched or understood."""


class CatalogNetworkError(CatalogError):
    """Catalog fetch failed at the transport level."""


class CatalogFormatError(CatalogError):
    """Catalog document is not valid JSON of the expected shape."""


class CatalogSchemaError(CatalogError):
    """Catalog declares a schema version this build does not understand."""


# --- pipeline / service ---

class TranslationCancelled(LocalMTError):
    """Request was superseded or cancelled before completion."""


class StaleGenerationError(InputValidationError):
    """Session generation did not increase monotonically."""


class EngineBusyError(LocalMTError):
    """Exclusive operation refused while requests are in flight."""
