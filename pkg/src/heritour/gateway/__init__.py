"""Service boundary: configuration, wiring, REST + socket endpoints."""

from .config import ServiceConfig, load_config
from .service import VisitorService

__all__ = ["ServiceConfig", "VisitorService", "load_config"]
