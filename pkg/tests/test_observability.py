# Copyright 2025 Multiview DeepFake
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.

"""Tests de la journalisation structurée et du traçage."""

import json
import logging

from multiview_deepfake.observability import RunTracer, configure_logging, get_logger
from multiview_deepfake.observability.log import ROOT_LOGGER, ContextFormatter


def make_record(context=None) -> logging.LogRecord:
    record = logging.LogRecord(
        name="multiview_deepfake.training", level=logging.INFO, pathname=__file__,
        lineno=1, msg="Epoch terminée", args=(), exc_info=None,
    )
    if context is not None:
        record.context = context
    return record


class TestFormatter:
    """Tests du formatter à contexte."""

    def test_text_line(self):
        line = ContextFormatter().format(make_record({"epoch": 3, "f1": 0.5}))
        assert "INFO multiview_deepfake.training: Epoch terminée" in line
        assert line.endswith('| context: {"epoch": 3, "f1": 0.5}')

    def test_text_without_context(self):
        assert "context" not in ContextFormatter().format(make_record())

    def test_json_line(self):
        payload = json.loads(ContextFormatter(json_lines=True).format(make_record({"epoch": 3})))
        assert payload["level"] == "INFO"
        assert payload["message"] == "Epoch terminée"
        assert payload["context"] == {"epoch": 3}


class TestLoggers:
    """Tests de la hiérarchie des loggers."""

    def test_prefix(self):
        assert get_logger("trainer").name == f"{ROOT_LOGGER}.trainer"
        assert get_logger("multiview_deepfake.cli").name == "multiview_deepfake.cli"

    def test_configure_is_idempotent(self):
        """Test qu'une reconfiguration remplace le handler au lieu de l'empiler."""
        previous = logging.getLogger(ROOT_LOGGER).level
        configure_logging("DEBUG")
        logger = configure_logging("WARNING", json_lines=True)
        ours = [h for h in logger.handlers if getattr(h, "_mvdf", False)]
        try:
            assert len(ours) == 1
            assert logger.level == logging.WARNING
        finally:
            logger.setLevel(previous)

    def test_context_reaches_caplog(self, caplog):
        with caplog.at_level(logging.INFO, logger=ROOT_LOGGER):
            get_logger("test").info("Message", extra={"context": {"k": 1}})
        assert caplog.records[-1].context == {"k": 1}


class TestTracer:
    """Tests du traçage sans clés Langfuse."""

    def test_disabled_is_noop(self):
        tracer = RunTracer()
        assert not tracer.enabled
        tracer.start_run("run-1", "train", {"epochs": 1})
        tracer.start_span("run-1", "epoch:1", {"lr": 1e-4})
        tracer.end_span("run-1", "epoch:1", {"loss": 0.3})
        tracer.end_span("run-1", "absent", {})
        tracer.end_run("run-1", {"best_f1": 1.0})
        tracer.flush()
