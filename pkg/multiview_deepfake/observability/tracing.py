# Copyright 2025 Multiview DeepFake

"""Traçage Langfuse des exécutions (entraînement, pré-entraînement de pose, évaluation).

Architecture de traçage:
    Exécution `train` → Trace Langfuse (id = run_id)
      ├── epoch 1 → Span "epoch:1" (pertes, métriques de validation)
      ├── epoch 2 → Span "epoch:2"
      └── ...
    Exécution `eval` → Trace Langfuse
      └── Span "evaluate:test" (précision, rappel, F1, AUC)

Les spans ouverts sont indexés par (run_id, nom). Tout est enveloppé dans
try/except : une erreur Langfuse ne casse jamais une exécution.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from functools import lru_cache
from typing import Any


@dataclass
class SpanState:
    span: Any
    start_time: float


class _NoopClient:
    """Client sans-op quand Langfuse n'est pas configuré."""

    def trace(self, **_: Any) -> _NoopTrace:
        return _NoopTrace()

    def flush(self) -> None:
        pass


class _NoopTrace:
    def span(self, **_: Any) -> _NoopSpan:
        return _NoopSpan()

    def update(self, **_: Any) -> None:
        pass


class _NoopSpan:
    def end(self, **_: Any) -> None:
        pass

    def update(self, **_: Any) -> None:
        pass


class RunTracer:
    """Tracer Langfuse pour les exécutions avec fallback no-op."""

    def __init__(self) -> None:
        self._client: Any = None
        self._enabled = False
        self._active_traces: dict[str, Any] = {}
        self._active_spans: dict[str, SpanState] = {}
        self._init()

    def _init(self) -> None:
        pk = os.getenv("LANGFUSE_PUBLIC_KEY")
        sk = os.getenv("LANGFUSE_SECRET_KEY")
        host = os.getenv("LANGFUSE_HOST", "https://cloud.langfuse.com")
        if not pk or not sk:
            self._client = _NoopClient()
            return
        try:
            from langfuse import Langfuse  # type: ignore[import]

            self._client = Langfuse(public_key=pk, secret_key=sk, host=host)
            self._enabled = True
        except Exception:
            self._client = _NoopClient()

    @property
    def enabled(self) -> bool:
        return self._enabled

    # ── Cycle de vie ───────────────────────────────────────────────────────

    def start_run(self, run_id: str, kind: str, config: dict[str, Any]) -> None:
        try:
            trace = self._client.trace(
                id=run_id,
                name=f"multiview-{kind}",
                input={"config": config},
                tags=["multiview-deepfake", kind],
                metadata={"timestamp": datetime.now(timezone.utc).isoformat()},
            )
            self._active_traces[run_id] = trace
        except Exception:
            self._active_traces[run_id] = _NoopTrace()

    def end_run(self, run_id: str, summary: dict[str, Any]) -> None:
        try:
            trace = self._active_traces.pop(run_id, None)
            if trace:
                trace.update(output=summary)
        except Exception:
            pass

    # ── Spans ──────────────────────────────────────────────────────────────

    def start_span(self, run_id: str, name: str, inputs: dict[str, Any] | None = None) -> None:
        try:
            parent = self._active_traces.get(run_id) or _NoopTrace()
            span = parent.span(name=name, input=inputs or {})
            self._active_spans[f"{run_id}:{name}"] = SpanState(
                span=span, start_time=time.perf_counter()
            )
        except Exception:
            pass

    def end_span(self, run_id: str, name: str, output: dict[str, Any]) -> None:
        try:
            state = self._active_spans.pop(f"{run_id}:{name}", None)
            if state:
                latency = time.perf_counter() - state.start_time
                state.span.end(
                    output=output,
                    metadata={"latency_seconds": round(latency, 3)},
                )
        except Exception:
            pass

    def flush(self) -> None:
        try:
            self._client.flush()
        except Exception:
            pass


@lru_cache(maxsize=1)
def get_tracer() -> RunTracer:
    return RunTracer()
