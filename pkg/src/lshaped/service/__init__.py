"""HTTP service exposing the solver; see app.py for endpoints."""

from .app import app

__all__ = ["app"]
