import logging
import sys

from ..preferences import addon_package

_logger_name = addon_package() or "odsc"


def get_logger(name=None):
    """
    Get a configured logger for the package.
    It automatically respects the 'developer_mode' preference to toggle DEBUG/INFO levels.
    """
    if name and name.startswith(f"{_logger_name}."):
        name = name[len(_logger_name) + 1:]
    logger_name = f"{_logger_name}.{name}" if name and name != _logger_name else _logger_name
    logger = logging.getLogger(logger_name)

    # Handlers live on the package logger only; children propagate to it
    root = logging.getLogger(_logger_name)
    if not root.handlers:
        handler = logging.StreamHandler(sys.stderr)
        formatter = logging.Formatter(f'[{_logger_name}] %(levelname)s: %(message)s')
        handler.setFormatter(formatter)
        root.addHandler(handler)

    refresh_level()
    return logger


def refresh_level() -> None:
    """Re-read developer_mode and apply it to the package logger."""
    from ..preferences import active_preferences
    try:
        prefs = active_preferences()
        level = logging.DEBUG if prefs and prefs.developer_mode else logging.INFO
    except Exception:
        level = logging.INFO
    logging.getLogger(_logger_name).setLevel(level)
