#!/usr/bin/env python3

from typing import Any, Dict, Optional


class HandsOffError(Exception):
    """Base error. `code` is a stable identifier used in CLI diagnostics."""

    def __init__(self, code: str, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.details = dict(details or {})

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"error": self.code, "message": self.message}
        data.update(self.details)
        return data

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


class ModelError(HandsOffError):
    pass


class RegionError(HandsOffError):
    pass


class GraphError(HandsOffError):
    pass


class WalkError(HandsOffError):
    pass


class ControlError(HandsOffError):
    pass


class OracleError(HandsOffError):
    pass


class ConfigError(HandsOffError):
    def __init__(self, code: str, message: str, path: str = "$"):
        super().__init__(code, message, {"path": path})
        self.path = path


class UsageError(HandsOffError):
    pass
