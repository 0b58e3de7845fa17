"""Fenced-block extraction for model completions.

Completions are required to wrap their payload in a Markdown code fence;
leading and trailing prose is tolerated, and the first fence whose body
parses wins.
"""

from __future__ import annotations

import json
import re

_FENCE_RE = re.compile(r"```([a-zA-Z0-9_+-]*)[ \t]*\r?\n(.*?)```", re.DOTALL)


class ParseError(ValueError):
    def __init__(self, message: str, context: str | None = None):
        self.context = context
        super().__init__(f"{message} (while parsing {context})" if context else message)


def iter_fenced_blocks(text: str) -> list[tuple[str, str]]:
    """All (language tag, body) fenced blocks in order of appearance."""
    return [(m.group(1).lower(), m.group(2)) for m in _FENCE_RE.finditer(text)]


def extract_fenced_json(text: str, context: str | None = None):
    """Parse the first well-formed fenced JSON block in ``text``."""
    saw_fence = False
    for tag, body in iter_fenced_blocks(text):
        if tag not in ("", "json"):
            continue
        saw_fence = True
        try:
            return json.loads(body)
        except json.JSONDecodeError:
            continue
    if saw_fence:
        raise ParseError("fenced block is not valid JSON", context)
    raise ParseError("no fenced JSON block found", context)


def extract_fenced_code(text: str, language: str = "python", context: str | None = None) -> str:
    """Source text of the first fenced code block with the given language tag."""
    for tag, body in iter_fenced_blocks(text):
        if tag in (language, ""):
            stripped = body.strip("\n")
            if stripped:
                return stripped
    raise ParseError(f"no fenced {language} block found", context)
