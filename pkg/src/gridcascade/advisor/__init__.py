"""Operator-facing advisory layer: artifact store, CLI, and HTTP service."""

from .store import ArtifactStore

__all__ = ["ArtifactStore"]
