"""OpenAI-compatible chat-completions client with bounded retries.

Transient failures (HTTP 408/429/5xx and transport errors) are retried with
capped exponential backoff; auth and other 4xx errors fail immediately.
``provider_attempts`` on the response counts attempts that actually reached
the provider, so callers can account every billable attempt.
"""

from __future__ import annotations

import base64
import logging
import os
import threading
import time
from dataclasses import dataclass

import httpx

from .requests import BackendError, GenerationBackend, GenerationRequest, GenerationResponse, estimate_tokens
from .requests import TemplateStore

logger = logging.getLogger(__name__)

RETRYABLE_STATUSES = {408, 429, 500, 502, 503, 504}


@dataclass(frozen=True)
class HttpBackendConfig:
    base_url: str = "http://localhost:8000/v1"
    model: str = "default"
    api_key_env: str = "PIPESCALE_API_KEY"
    max_retries: int = 3
    backoff_base_s: float = 0.5
    backoff_cap_s: float = 8.0
    timeout_s: float = 120.0
    # token-bucket rate limit; rate <= 0 disables limiting
    rate_per_s: float = 0.0
    burst: int = 1


class TokenBucket:
    def __init__(self, rate_per_s: float, burst: int):
        self.rate = rate_per_s
        self.capacity = max(1, burst)
        self._tokens = float(self.capacity)
        self._updated = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        if self.rate <= 0:
            return
        while True:
            with self._lock:
                now = time.monotonic()
                self._tokens = min(self.capacity, self._tokens + (now - self._updated) * self.rate)
                self._updated = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            time.sleep(wait)


class HttpBackend(GenerationBackend):
    def __init__(
        self,
        config: HttpBackendConfig | None = None,
        templates: TemplateStore | None = None,
        client: httpx.Client | None = None,
        sleep=time.sleep,
    ):
        self.config = config or HttpBackendConfig()
        self.templates = templates or TemplateStore()
        self._client = client or httpx.Client(timeout=self.config.timeout_s)
        self._bucket = TokenBucket(self.config.rate_per_s, self.config.burst)
        self._sleep = sleep

    def _payload(self, request: GenerationRequest) -> dict:
        system_prompt = self.templates.render(request.template_id, request.fills)
        if request.attachments:
            content: list[dict] = [{"type": "text", "text": request.user_content}]
            for image in request.attachments:
                encoded = base64.b64encode(image).decode("ascii")
                content.append(
                    {"type": "image_url", "image_url": {"url": f"data:image/png;base64,{encoded}"}}
                )
            user_message = {"role": "user", "content": content}
        else:
            user_message = {"role": "user", "content": request.user_content}
        return {
            "model": self.config.model,
            "messages": [{"role": "system", "content": system_prompt}, user_message],
            "temperature": request.decoding.temperature,
            "top_p": request.decoding.top_p,
            "max_tokens": request.decoding.max_tokens,
        }

    def complete(self, request: GenerationRequest) -> GenerationResponse:
        payload = self._payload(request)
        headers = {}
        api_key = os.environ.get(self.config.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        attempts_reaching_provider = 0
        last_error: str = "no attempt made"
        last_status: int | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                delay = min(self.config.backoff_cap_s, self.config.backoff_base_s * 2 ** (attempt - 1))
                logger.warning("retrying %s after %s (attempt %d, sleeping %.1fs)",
                               request.template_id, last_error, attempt + 1, delay)
                self._sleep(delay)
            self._bucket.acquire()
            started = time.monotonic()
            try:
                response = self._client.post(
                    f"{self.config.base_url.rstrip('/')}/chat/completions",
                    json=payload,
                    headers=headers,
                )
            except httpx.HTTPError as exc:
                last_error = f"transport error: {exc}"
                last_status = None
                continue
            attempts_reaching_provider += 1
            latency_ms = int((time.monotonic() - started) * 1000)
            if response.status_code == 200:
                body = response.json()
                text = body["choices"][0]["message"]["content"]
                usage = body.get("usage") or {}
                tokens = usage.get("completion_tokens")
                return GenerationResponse(
                    text=text,
                    output_tokens=tokens if tokens is not None else estimate_tokens(text),
                    latency_ms=latency_ms,
                    provider_attempts=attempts_reaching_provider,
                    tokens_estimated=tokens is None,
                )
            last_status = response.status_code
            last_error = f"HTTP {response.status_code}"
            if response.status_code not in RETRYABLE_STATUSES:
                raise BackendError(
                    f"non-retryable backend failure on {request.template_id}: {last_error}",
                    status=last_status,
                )
        raise BackendError(
            f"backend failure on {request.template_id} after {self.config.max_retries + 1} attempts: {last_error}",
            status=last_status,
            retryable=True,
        )
