"""rowrunner: isolated per-row snippet execution over JSON Lines (protocol v1)."""

from .session import (
    ALLOWED_MODULES,
    PROTOCOL_VERSION,
    ProtocolViolation,
    SnippetLoadError,
    build_namespace,
    coerce_value,
    load_transform,
    run_session,
)

__version__ = "0.1.0"

__all__ = [
    "ALLOWED_MODULES",
    "PROTOCOL_VERSION",
    "ProtocolViolation",
    "SnippetLoadError",
    "build_namespace",
    "coerce_value",
    "load_transform",
    "run_session",
]
