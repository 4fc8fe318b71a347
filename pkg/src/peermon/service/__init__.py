"""HTTP service wrapping the monitoring core and experiment harness."""

from .app import app, create_app

__all__ = ["app", "create_app"]
