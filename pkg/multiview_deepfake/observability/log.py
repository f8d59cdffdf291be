# Copyright 2025 Multiview DeepFake

"""Journalisation structurée.

Chaque enregistrement peut porter un contexte via ``extra={"context": {...}}``.
Format texte : ``[horodatage] NIVEAU logger: message | context: {json}``,
ou une ligne JSON par enregistrement avec ``json_lines=True``.
"""

from __future__ import annotations

import json
import logging
import sys
from datetime import datetime, timezone
from typing import Any

ROOT_LOGGER = "multiview_deepfake"


class ContextFormatter(logging.Formatter):
    """Formatter qui sérialise le contexte structuré attaché au record."""

    def __init__(self, json_lines: bool = False):
        super().__init__()
        self.json_lines = json_lines

    def format(self, record: logging.LogRecord) -> str:
        timestamp = datetime.fromtimestamp(record.created, tz=timezone.utc).isoformat()
        context: dict[str, Any] | None = getattr(record, "context", None)
        message = record.getMessage()
        if self.json_lines:
            payload: dict[str, Any] = {
                "timestamp": timestamp,
                "level": record.levelname,
                "logger": record.name,
                "message": message,
            }
            if context:
                payload["context"] = context
            if record.exc_info:
                payload["exception"] = self.formatException(record.exc_info)
            return json.dumps(payload, ensure_ascii=False, default=str)

        line = f"[{timestamp}] {record.levelname} {record.name}: {message}"
        if context:
            line += f" | context: {json.dumps(context, ensure_ascii=False, default=str)}"
        if record.exc_info:
            line += "\n" + self.formatException(record.exc_info)
        return line


def configure_logging(level: str | int = "INFO", json_lines: bool = False) -> logging.Logger:
    """Installe (une seule fois) le handler du logger racine du projet."""
    logger = logging.getLogger(ROOT_LOGGER)
    logger.setLevel(level if isinstance(level, int) else level.upper())
    for handler in list(logger.handlers):
        if getattr(handler, "_mvdf", False):
            logger.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(ContextFormatter(json_lines=json_lines))
    handler._mvdf = True  # type: ignore[attr-defined]
    logger.addHandler(handler)
    return logger


def get_logger(name: str) -> logging.Logger:
    if not name.startswith(ROOT_LOGGER):
        name = f"{ROOT_LOGGER}.{name}"
    return logging.getLogger(name)
