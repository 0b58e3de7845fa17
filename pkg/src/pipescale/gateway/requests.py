"""Generation requests, responses, and the prompt-template registry.

Templates are plain-text assets with ``{placeholder}`` slots, shipped with
the package and overridable per run via a template directory.  Prompts are
data, not code: the registry only checks that every declared placeholder
is filled.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from ..artifacts import DecodingParams

TEMPLATE_IDS = (
    "profiling",
    "direction",
    "codegen",
    "rectify",
    "chart_filter",
    "insight",
    "judge_easy",
    "judge_moderate",
    "judge_harsh",
    "eval_meta",
    "eval_direction",
    "eval_insight",
)

_PLACEHOLDER_RE = re.compile(r"\{([a-z_][a-z0-9_]*)\}")


class TemplateError(ValueError):
    pass


class TemplateStore:
    """Loads prompt templates from the package, with optional overrides."""

    def __init__(self, override_dir: str | Path | None = None):
        self._override_dir = Path(override_dir) if override_dir else None
        self._cache: dict[str, str] = {}

    def raw(self, template_id: str) -> str:
        if template_id not in TEMPLATE_IDS:
            raise TemplateError(f"unknown template {template_id!r}")
        if template_id not in self._cache:
            if self._override_dir is not None:
                candidate = self._override_dir / f"{template_id}.txt"
                if candidate.exists():
                    self._cache[template_id] = candidate.read_text()
                    return self._cache[template_id]
            ref = resources.files("pipescale.gateway").joinpath(f"templates/{template_id}.txt")
            self._cache[template_id] = ref.read_text()
        return self._cache[template_id]

    def placeholders(self, template_id: str) -> set[str]:
        return set(_PLACEHOLDER_RE.findall(self.raw(template_id)))

    def render(self, template_id: str, fills: dict[str, Any]) -> str:
        text = self.raw(template_id)
        needed = self.placeholders(template_id)
        missing = needed - fills.keys()
        if missing:
            raise TemplateError(f"template {template_id!r} missing fills: {sorted(missing)}")

        def substitute(match: re.Match) -> str:
            name = match.group(1)
            return str(fills[name]) if name in fills else match.group(0)

        rendered = _PLACEHOLDER_RE.sub(substitute, text)
        leftover = set(_PLACEHOLDER_RE.findall(rendered)) & needed
        if leftover:
            raise TemplateError(f"template {template_id!r} placeholders left unfilled: {sorted(leftover)}")
        return rendered


@dataclass(frozen=True)
class GenerationRequest:
    template_id: str
    fills: dict[str, Any] = field(default_factory=dict)
    user_content: str = ""
    decoding: DecodingParams = field(default_factory=DecodingParams)
    attachments: tuple[bytes, ...] = ()
    # candidate-addressing context consumed only by the simulated backend
    sim: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.template_id not in TEMPLATE_IDS:
            raise TemplateError(f"unknown template {self.template_id!r}")


@dataclass(frozen=True)
class GenerationResponse:
    text: str
    output_tokens: int
    latency_ms: int = 0
    # attempts that reached the provider; >1 only after transient retries
    provider_attempts: int = 1
    tokens_estimated: bool = False


def estimate_tokens(text: str) -> int:
    """Deterministic output-token proxy used when a provider count is absent."""
    return math.ceil(len(text) / 4)


class BackendError(RuntimeError):
    """Generation failed after the retry policy was exhausted."""

    def __init__(self, message: str, status: int | None = None, retryable: bool = False):
        self.status = status
        self.retryable = retryable
        super().__init__(message)


class GenerationBackend:
    """Interface both the HTTP client and the simulator implement."""

    def complete(self, request: GenerationRequest) -> GenerationResponse:
        raise NotImplementedError
