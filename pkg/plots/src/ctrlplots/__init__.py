"""Renderer for torusctrl run artifacts (CSV/JSON -> figures + captions)."""

__version__ = "0.1.0"


class SchemaMismatch(Exception):
    """Artifact tables do not match the documented column schemas."""
