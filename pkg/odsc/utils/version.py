from importlib import metadata

SCHEMA_VERSION = "1.1"
SUPPORTED_SCHEMA_VERSIONS = (SCHEMA_VERSION,)


def is_supported_schema(version) -> bool:
    """Check if an interchange schema version can be imported."""
    return str(version) in SUPPORTED_SCHEMA_VERSIONS


def package_version() -> str:
    try:
        return metadata.version("odsc")
    except metadata.PackageNotFoundError:
        return "0+unknown"
