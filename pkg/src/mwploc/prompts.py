"""Prompt templates shipped with the package.

Templates are plain text files in mwploc/prompts/ with `{name}` placeholders.
Rendering substitutes only the placeholders that are passed in, so literal
braces elsewhere in a template (for example JSON examples) survive as-is.
"""

from __future__ import annotations

from importlib import resources


def load_prompt(name: str) -> str:
    return resources.files("mwploc").joinpath(f"prompts/{name}").read_text("utf-8")


def render_prompt(template: str, **values: str) -> str:
    out = template
    for key, value in values.items():
        token = "{" + key + "}"
        if token not in out:
            raise ValueError(f"template has no placeholder {token}")
        out = out.replace(token, value)
    return out
