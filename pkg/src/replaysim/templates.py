"""Prompt template assets and byte-exact placeholder substitution."""

from __future__ import annotations

import re
from pathlib import Path

from . import errors

_ASSET_DIR = Path(__file__).parent / "assets" / "templates"

TEMPLATES = {
    "native": "native.txt",
    "custom_harness": "custom_harness.txt",
    "multi_agent": "multi_agent.txt",
    "matcher_equivalence": "matcher_equivalence.txt",
    "matcher_cluster": "matcher_cluster.txt",
}

_PLACEHOLDER_RE = re.compile(r"<([a-z][a-z0-9_]*)>")


def load_template(template_id: str) -> str:
    if template_id not in TEMPLATES:
        raise errors.UnknownTemplate(template_id)
    return (_ASSET_DIR / TEMPLATES[template_id]).read_text(encoding="utf-8")


def render_prompt(template_id: str, runtime_fields: dict[str, object]) -> str:
    """Substitute every <placeholder> in the template. An unresolved
    placeholder is an error, never silently left in the output."""
    text = load_template(template_id)
    for key, value in runtime_fields.items():
        text = text.replace(f"<{key}>", str(value))
    leftover = _PLACEHOLDER_RE.search(text)
    if leftover:
        raise errors.MissingField(leftover.group(1))
    return text
