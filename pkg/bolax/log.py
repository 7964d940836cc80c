"""Rich-backed logging for the bolax namespace."""

import logging

from rich.logging import RichHandler

_ROOT = "bolax"
_configured = False


def configure(level: str = "INFO") -> None:
    """Attach a single RichHandler to the package logger."""
    global _configured
    root = logging.getLogger(_ROOT)
    if not _configured:
        handler = RichHandler(rich_tracebacks=True, show_path=False)
        handler.setFormatter(logging.Formatter("%(message)s"))
        root.addHandler(handler)
        root.propagate = False
        _configured = True
    root.setLevel(level.upper())


def get_logger(name: str) -> logging.Logger:
    """Return a child of the package logger (``bolax.<name>``)."""
    if name.startswith(_ROOT):
        return logging.getLogger(name)
    return logging.getLogger(f"{_ROOT}.{name}")
