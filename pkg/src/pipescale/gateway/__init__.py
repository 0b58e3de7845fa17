from .parsing import ParseError, extract_fenced_code, extract_fenced_json
from .requests import (
    BackendError,
    GenerationBackend,
    GenerationRequest,
    GenerationResponse,
    TemplateError,
    TemplateStore,
    estimate_tokens,
)
from .simulator import SimFaults, SimulatedBackend
from .http import HttpBackend, HttpBackendConfig

__all__ = [
    "BackendError",
    "GenerationBackend",
    "GenerationRequest",
    "GenerationResponse",
    "HttpBackend",
    "HttpBackendConfig",
    "ParseError",
    "SimFaults",
    "SimulatedBackend",
    "TemplateError",
    "TemplateStore",
    "estimate_tokens",
    "extract_fenced_code",
    "extract_fenced_json",
]
