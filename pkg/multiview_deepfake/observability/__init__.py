# Copyright 2025 Multiview DeepFake

"""Observabilité : journalisation structurée et traçage Langfuse (optionnel).

Si LANGFUSE_PUBLIC_KEY et LANGFUSE_SECRET_KEY sont absents, le traçage devient
un no-op transparent : les entraînements tournent sans erreur.
"""

from .log import configure_logging, get_logger
from .tracing import RunTracer, get_tracer

__all__ = ["RunTracer", "configure_logging", "get_logger", "get_tracer"]
