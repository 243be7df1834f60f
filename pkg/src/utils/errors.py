"""Base error type shared by all gazekit modules."""

from typing import Any, Dict, Optional


class GazeKitError(Exception):
    """
    Base class for errors raised by gazekit.

    Each subclass carries a stable ``code`` so the CLI can emit a
    machine-readable error document.
    """

    code = "gazekit_error"

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        """Serialise the error for the CLI's error JSON."""
        return {
            "error": self.code,
            "message": self.message,
            "details": self.details,
        }
