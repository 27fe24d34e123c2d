"""Standalone preprocessor producing annotated-document interchange JSON."""

from .adapter import AdapterConfig, ModelLoadError, build_document, self_check, serialize

__version__ = "0.1.0"
