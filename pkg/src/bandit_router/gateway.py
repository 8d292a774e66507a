"""HTTP serving path: embed (externally), rank arms, call a provider, parse.

The gateway holds an immutable policy model (hot-swappable via /v1/reload),
renders the task prompt for the chosen provider, and falls back down the
predicted-reward ranking when a provider times out or fails. Credentials are
only ever read from the environment inside the provider client; neither
responses nor logs carry secret material.

Endpoints:
    POST /v1/route   {"text": ..., "embedding": [..]?} -> routing result
    GET  /v1/health
    GET  /v1/spend   per-arm dollar ledger
    POST /v1/reload  {"model_path": ...}
"""

from __future__ import annotations

import asyncio
import json
import math
import os
import threading
import time
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path
from typing import Protocol

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .core import Arm, build_roster, roster_fingerprint, token_cost
from .errors import CompatibilityError, ConfigError, DataError, FormatError, InputError
from .policy import PolicyModel, load_model, predict_q

PROMPT_TEMPLATES: dict[str, str] = {
    "openai_sst2": (
        "For the sentence: {sentence}, is the sentiment in this sentence "
        "positive or negative?"
    ),
    "bedrock_imdb": (
        "For the paragraph: '{sentence}', is the sentiment in this paragraph "
        "positive or negative? Answer in one word."
    ),
}

LABEL_POSITIVE = "positive"
LABEL_NEGATIVE = "negative"
LABEL_ABSTAIN = "abstain"


def render_prompt(template_id: str, sentence: str) -> str:
    """Substitute the sentence into a registered prompt template, verbatim."""
    if template_id not in PROMPT_TEMPLATES:
        raise ConfigError(f"unknown prompt template {template_id!r}")
    if not sentence:
        raise InputError("cannot render a prompt for an empty sentence")
    return PROMPT_TEMPLATES[template_id].format(sentence=sentence)


def parse_label(raw_text: str) -> str:
    """Label from a raw completion: whichever of positive/negative appears
    first (case-insensitive); abstain when neither does.

    Abstain counts as incorrect downstream.
    """
    low = raw_text.lower()
    pos = low.find(LABEL_POSITIVE)
    neg = low.find(LABEL_NEGATIVE)
    if pos < 0 and neg < 0:
        return LABEL_ABSTAIN
    if pos < 0:
        return LABEL_NEGATIVE
    if neg < 0:
        return LABEL_POSITIVE
    return LABEL_POSITIVE if pos < neg else LABEL_NEGATIVE


@dataclass(frozen=True)
class ProviderEndpoint:
    """Where and how to reach one arm's LLM service."""

    arm_id: int
    name: str
    base_url: str
    auth_env: str  # name of the env var holding the credential, never the secret
    prompt_template_id: str
    timeout_ms: int
    price_per_1k_tokens: Decimal

    def __post_init__(self) -> None:
        if self.timeout_ms <= 0:
            raise ConfigError(f"endpoint {self.name!r}: timeout must be positive")
        if self.prompt_template_id not in PROMPT_TEMPLATES:
            raise ConfigError(
                f"endpoint {self.name!r}: unknown prompt template {self.prompt_template_id!r}"
            )


@dataclass(frozen=True)
class EmbeddingEndpoint:
    base_url: str
    timeout_ms: int = 10_000


@dataclass
class GatewayConfig:
    endpoints: list[ProviderEndpoint]
    embedding: EmbeddingEndpoint | None = None

    def __post_init__(self) -> None:
        if not self.endpoints:
            raise ConfigError("gateway config declares no provider endpoints")
        ids = [e.arm_id for e in self.endpoints]
        if ids != list(range(len(self.endpoints))):
            raise ConfigError("endpoint arm_ids must be 0..k-1 in order")

    def roster(self) -> list[Arm]:
        return build_roster((e.name, e.price_per_1k_tokens) for e in self.endpoints)


def load_gateway_config(path: str | Path) -> GatewayConfig:
    try:
        payload = json.loads(Path(path).read_text())
    except OSError as exc:
        raise FormatError(f"cannot read gateway config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    try:
        endpoints = [
            ProviderEndpoint(
                arm_id=i,
                name=e["name"],
                base_url=e["base_url"],
                auth_env=e["auth_env"],
                prompt_template_id=e["prompt_template_id"],
                timeout_ms=e.get("timeout_ms", 30_000),
                price_per_1k_tokens=Decimal(e["price_per_1k_tokens"]),
            )
            for i, e in enumerate(payload["arms"])
        ]
        emb = payload.get("embedding_endpoint")
        embedding = (
            EmbeddingEndpoint(
                base_url=emb["base_url"], timeout_ms=emb.get("timeout_ms", 10_000)
            )
            if emb
            else None
        )
    except (KeyError, TypeError) as exc:
        raise DataError(f"{path}: malformed gateway config: {exc}") from exc
    return GatewayConfig(endpoints=endpoints, embedding=embedding)


class ProviderTimeout(Exception):
    """The provider did not answer within its deadline."""


class ProviderAuthError(Exception):
    """The provider rejected our credentials."""


class ProviderError(Exception):
    """Any other provider-side failure."""


@dataclass
class ProviderResult:
    text: str
    tokens: int | None = None  # usage metadata when the provider reports it


class ProviderClient(Protocol):
    async def complete(self, endpoint: ProviderEndpoint, prompt: str) -> ProviderResult: ...


class EmbedClient(Protocol):
    async def embed(self, text: str) -> list[float]: ...


class HttpProviderClient:
    """Minimal JSON-over-HTTP provider transport: {"prompt"} in, {"text"} out."""

    def __init__(self) -> None:
        import httpx

        self._client = httpx.AsyncClient()

    async def complete(self, endpoint: ProviderEndpoint, prompt: str) -> ProviderResult:
        import httpx

        headers = {}
        secret = os.environ.get(endpoint.auth_env)
        if secret:
            headers["Authorization"] = f"Bearer {secret}"
        try:
            resp = await self._client.post(
                endpoint.base_url,
                json={"prompt": prompt},
                headers=headers,
                timeout=endpoint.timeout_ms / 1000.0,
            )
        except httpx.TimeoutException as exc:
            raise ProviderTimeout(str(exc)) from exc
        except httpx.HTTPError as exc:
            raise ProviderError(str(exc)) from exc
        if resp.status_code in (401, 403):
            raise ProviderAuthError(f"status {resp.status_code}")
        if resp.status_code >= 400:
            raise ProviderError(f"status {resp.status_code}")
        body = resp.json()
        return ProviderResult(text=body["text"], tokens=body.get("tokens"))


class HttpEmbedClient:
    """Text in, float vector out."""

    def __init__(self, endpoint: EmbeddingEndpoint) -> None:
        import httpx

        self._endpoint = endpoint
        self._client = httpx.AsyncClient()

    async def embed(self, text: str) -> list[float]:
        resp = await self._client.post(
            self._endpoint.base_url,
            json={"text": text},
            timeout=self._endpoint.timeout_ms / 1000.0,
        )
        resp.raise_for_status()
        return resp.json()["embedding"]


class SpendLedger:
    """Per-arm dollar totals; exact under concurrent increments."""

    def __init__(self, arms: list[Arm]) -> None:
        self._totals = {a.arm_id: Decimal(0) for a in arms}
        self._names = {a.arm_id: a.name for a in arms}
        self._lock = threading.Lock()

    def add(self, arm_id: int, cost: Decimal) -> None:
        with self._lock:
            self._totals[arm_id] += cost

    def snapshot(self) -> dict[str, str]:
        with self._lock:
            return {self._names[i]: str(v) for i, v in self._totals.items()}

    def total(self) -> Decimal:
        with self._lock:
            return sum(self._totals.values(), Decimal(0))


class RouteRequest(BaseModel):
    text: str = Field(min_length=1)
    embedding: list[float] | None = None


class ReloadRequest(BaseModel):
    model_path: str


def check_model_against_config(model: PolicyModel, config: GatewayConfig) -> None:
    if model.roster_fingerprint != roster_fingerprint(config.roster()):
        raise CompatibilityError("policy model roster does not match gateway endpoints")


def create_app(
    config: GatewayConfig,
    model: PolicyModel,
    provider_client: ProviderClient | None = None,
    embed_client: EmbedClient | None = None,
) -> FastAPI:
    check_model_against_config(model, config)
    if provider_client is None:
        provider_client = HttpProviderClient()
    if embed_client is None and config.embedding is not None:
        embed_client = HttpEmbedClient(config.embedding)

    app = FastAPI(title="bandit-router gateway")
    app.state.model = model
    app.state.config = config
    app.state.ledger = SpendLedger(config.roster())
    app.state.provider_client = provider_client
    app.state.embed_client = embed_client

    @app.get("/v1/health")
    async def health() -> dict:
        m: PolicyModel = app.state.model
        return {
            "status": "ok",
            "arms": m.n_arms,
            "embedding_dim": m.embedding_dim,
        }

    @app.get("/v1/spend")
    async def spend() -> dict:
        ledger: SpendLedger = app.state.ledger
        return {"per_arm": ledger.snapshot(), "total": str(ledger.total())}

    @app.post("/v1/reload")
    async def reload(req: ReloadRequest) -> dict:
        try:
            new_model = load_model(req.model_path)
            check_model_against_config(new_model, app.state.config)
        except FormatError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except CompatibilityError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        app.state.model = new_model  # atomic reference swap
        return {"status": "reloaded", "roster_fingerprint": new_model.roster_fingerprint}

    @app.post("/v1/route")
    async def route(req: RouteRequest) -> dict:
        return await _route_query(app, req)

    return app


async def _route_query(app: FastAPI, req: RouteRequest) -> dict:
    started = time.perf_counter()
    model: PolicyModel = app.state.model
    config: GatewayConfig = app.state.config
    ledger: SpendLedger = app.state.ledger

    if req.embedding is not None:
        embedding = np.asarray(req.embedding, dtype=np.float64)
    elif app.state.embed_client is not None:
        embedding = np.asarray(await app.state.embed_client.embed(req.text), dtype=np.float64)
    else:
        raise HTTPException(
            status_code=400,
            detail="request carries no embedding and no embedding endpoint is configured",
        )
    if embedding.shape != (model.embedding_dim,):
        raise HTTPException(
            status_code=400,
            detail=f"embedding length {embedding.shape} does not match model dim "
            f"{model.embedding_dim}",
        )
    if not np.all(np.isfinite(embedding)):
        raise HTTPException(status_code=400, detail="embedding contains non-finite values")

    q = predict_q(model, embedding)
    ranking = sorted(
        range(model.n_arms),
        key=lambda j: (-q[j], model.arms[j].normalized_cost, j),
    )
    attempted: list[str] = []
    for j in ranking:
        endpoint = config.endpoints[j]
        prompt = render_prompt(endpoint.prompt_template_id, req.text)
        attempted.append(endpoint.name)
        for _attempt in range(2):  # one retry before falling back
            try:
                result = await app.state.provider_client.complete(endpoint, prompt)
            except ProviderAuthError as exc:
                raise HTTPException(
                    status_code=502,
                    detail={"error": "provider auth failure", "arm": endpoint.name},
                ) from exc
            except (ProviderTimeout, ProviderError):
                continue
            tokens_estimated = result.tokens is None
            tokens = (
                result.tokens
                if result.tokens is not None
                else math.ceil((len(prompt) + len(result.text)) / 4)
            )
            cost = token_cost(endpoint.price_per_1k_tokens, tokens)
            ledger.add(j, cost)
            return {
                "arm_id": j,
                "arm_name": endpoint.name,
                "predicted_rewards": {
                    model.arms[i].name: float(q[i]) for i in range(model.n_arms)
                },
                "raw_text": result.text,
                "label": parse_label(result.text),
                "tokens": tokens,
                "tokens_estimated": tokens_estimated,
                "cost": str(cost),
                "latency_ms": (time.perf_counter() - started) * 1000.0,
                "fallback_used": j != ranking[0],
                "attempted_arms": attempted,
            }
    raise HTTPException(
        status_code=503,
        detail={"error": "routing failed: every provider failed", "attempted": attempted},
    )
