import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Mapping, Optional

OutputFormat = Literal["text", "machine"]
ExitPolicy = Literal["status_always_zero", "status_reflects_decision"]

OUTPUT_FORMATS = ("text", "machine")
EXIT_POLICIES = ("status_always_zero", "status_reflects_decision")

DEFAULT_STORE_DIR = ".odsc-store"
DEFAULT_DATA_DIR = ".odsc-data"


def addon_package() -> str:
    """Get the package name"""
    return __package__ or "odsc"


def _env_flag(value: Optional[str]) -> bool:
    return (value or "").strip().lower() in {"1", "true", "yes", "on"}


@dataclass
class CliConfig:
    store_dir: Path = field(default_factory=lambda: Path(DEFAULT_STORE_DIR))
    output_format: OutputFormat = "text"
    exit_policy: ExitPolicy = "status_reflects_decision"
    developer_mode: bool = False


@dataclass
class ServiceConfig:
    listen_port: int = 8080
    data_dir: Path = field(default_factory=lambda: Path(DEFAULT_DATA_DIR))
    request_body_limit: int = 1024 * 1024
    max_concurrent_checks: int = 64
    bearer_token: Optional[str] = None

    def __post_init__(self):
        if self.listen_port <= 0 or self.request_body_limit <= 0 or self.max_concurrent_checks <= 0:
            raise ValueError("Service limits must be strictly positive")
        self.data_dir = Path(self.data_dir)


_active = CliConfig()


def get_preferences(
    flags: Optional[Mapping[str, object]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> CliConfig:
    """Resolve the CLI configuration.

    Flags win over environment variables, which win over defaults. Flag values
    that are None count as not given.

    Args:
        flags: Parsed command-line values keyed by CliConfig field name.
        environ: Environment to read, defaults to os.environ.

    Returns:
        The resolved CliConfig. It also becomes the active preferences read by
        the logger.
    """
    global _active
    env = os.environ if environ is None else environ
    flags = {k: v for k, v in (flags or {}).items() if v is not None}

    store_dir = flags.get("store_dir") or env.get("ODS_STORE_DIR") or DEFAULT_STORE_DIR
    output_format = flags.get("output_format") or env.get("ODS_OUTPUT_FORMAT") or "text"
    exit_policy = flags.get("exit_policy") or env.get("ODS_EXIT_POLICY") or "status_reflects_decision"
    if output_format not in OUTPUT_FORMATS:
        raise ValueError(f"Unknown output format '{output_format}'")
    if exit_policy not in EXIT_POLICIES:
        raise ValueError(f"Unknown exit policy '{exit_policy}'")
    developer_mode = bool(flags.get("developer_mode")) or _env_flag(env.get("ODS_DEVELOPER_MODE"))

    _active = CliConfig(
        store_dir=Path(store_dir),
        output_format=output_format,
        exit_policy=exit_policy,
        developer_mode=developer_mode,
    )
    return _active


def get_service_preferences(
    flags: Optional[Mapping[str, object]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> ServiceConfig:
    env = os.environ if environ is None else environ
    flags = {k: v for k, v in (flags or {}).items() if v is not None}
    return ServiceConfig(
        listen_port=int(flags.get("listen_port") or env.get("ODS_PORT") or 8080),
        data_dir=Path(flags.get("data_dir") or env.get("ODS_DATA_DIR") or DEFAULT_DATA_DIR),
        request_body_limit=int(flags.get("request_body_limit") or 1024 * 1024),
        max_concurrent_checks=int(flags.get("max_concurrent_checks") or 64),
        bearer_token=flags.get("bearer_token") or env.get("ODS_SERVICE_TOKEN") or None,
    )


def active_preferences() -> CliConfig:
    """Return the preferences last resolved by get_preferences, or defaults."""
    return _active
