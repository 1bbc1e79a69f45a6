"""HTTP service: GET /{api_key}/{place} returns the figure JSON.

The API key rides in the URL path and is forwarded only to the
elevation provider. Responses carry permissive CORS headers so a
separately hosted browser viewer can call the service directly.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Response

from cenergy import scene
from cenergy.pipeline import FigureCache, PipelineConfig, PipelineError, generate
from cenergy.providers import (
    BadRequest,
    InvalidKey,
    NotFound,
    ParseError,
    ProviderError,
    Transport,
    Upstream,
)

MAX_CONCURRENT_RUNS = 4
REQUEST_TIMEOUT = 120.0


def _error_response(status: int, stage: str, message: str) -> Response:
    body = json.dumps(
        {"status": status, "stage": stage, "message": message}, sort_keys=True
    )
    return Response(
        content=body,
        status_code=status,
        media_type="application/json",
        headers={"Access-Control-Allow-Origin": "*"},
    )


def _status_for(exc: Exception) -> int:
    cause = exc.cause if isinstance(exc, PipelineError) else exc
    if isinstance(cause, NotFound):
        return 404
    if isinstance(cause, (ParseError, Upstream, InvalidKey)):
        # upstream 401 surfaces as 502 with stage "dem": the key is
        # passed through, not validated locally
        return 502
    if isinstance(cause, TimeoutError):
        return 504
    if isinstance(cause, BadRequest):
        return 502
    if isinstance(cause, ValueError):
        # local validation: malformed place or oversized bbox
        if isinstance(exc, PipelineError) and exc.stage == "bbox":
            return 422
        return 400
    if isinstance(exc, PipelineError) and exc.stage == "bbox":
        return 422
    return 502


def create_app(config: Optional[PipelineConfig] = None,
               transport: Optional[Transport] = None) -> FastAPI:
    """Build the service app around one pipeline config and shared cache."""
    config = config or PipelineConfig()
    cache = FigureCache(ttl=config.cache_ttl)
    run_slots = threading.Semaphore(MAX_CONCURRENT_RUNS)
    shared_transport = transport
    if shared_transport is None and config.transport_mode() != "live":
        shared_transport = Transport(
            mode=config.transport_mode(),
            fixture_dir=Path(config.fixture_dir) if config.fixture_dir else None,
            timeout=REQUEST_TIMEOUT,
        )

    app = FastAPI(title="cenergy", version="0.1.0")
    app.state.cache = cache
    app.state.transport = shared_transport

    @app.get("/health")
    def health() -> Response:
        body = json.dumps({"status": "ok", "cache_entries": len(cache)}, sort_keys=True)
        return Response(
            content=body,
            media_type="application/json",
            headers={"Access-Control-Allow-Origin": "*"},
        )

    @app.get("/{api_key}/{place}")
    def get_model(api_key: str, place: str) -> Response:
        if not place.strip() or not api_key.strip():
            return _error_response(400, "request", "empty api key or place")
        key = FigureCache.key(place, config)
        cached = cache.lookup(key)
        if cached is not None:
            payload, stats = cached
        else:
            with run_slots:
                try:
                    fig, stats = generate(place, api_key, config,
                                          transport=shared_transport)
                    payload = scene.serialize(fig)
                except PipelineError as e:
                    return _error_response(_status_for(e), e.stage, e.message)
                except ProviderError as e:
                    return _error_response(_status_for(e), "pipeline", str(e))
            cache.store(key, payload, stats)
        return Response(
            content=payload,
            media_type="application/json",
            headers={
                "Access-Control-Allow-Origin": "*",
                "X-Model-Stats": stats.log_line(),
            },
        )

    return app
