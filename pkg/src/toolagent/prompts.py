"""Prompt asset loading and slot rendering.

Prompts ship as plain text files inside the package (``toolagent/prompts/``)
and can be overridden per-file by pointing a library at a directory: a file
there with the same name wins, anything else falls back to the packaged copy.

Rendering is plain token replacement (``{slot}`` -> value), not str.format:
several prompts contain literal JSON braces that format() would choke on.
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources
from pathlib import Path


class MissingAsset(Exception):
    """A requested prompt asset file does not exist."""


@lru_cache(maxsize=None)
def _packaged_text(name: str) -> str | None:
    ref = resources.files(__package__) / "prompts" / f"{name}.txt"
    try:
        return ref.read_text(encoding="utf-8")
    except (FileNotFoundError, NotADirectoryError):
        return None


class PromptLibrary:
    def __init__(self, override_dir: str | Path | None = None):
        self.override_dir = Path(override_dir) if override_dir else None
        self._cache: dict[str, str] = {}

    def load(self, name: str) -> str:
        if name in self._cache:
            return self._cache[name]
        text: str | None = None
        if self.override_dir is not None:
            path = self.override_dir / f"{name}.txt"
            if path.is_file():
                text = path.read_text(encoding="utf-8")
        if text is None:
            text = _packaged_text(name)
        if text is None:
            raise MissingAsset(f"no prompt asset named {name!r}")
        self._cache[name] = text
        return text

    def render(self, name: str, **slots: str) -> str:
        text = self.load(name)
        for key, value in slots.items():
            text = text.replace("{" + key + "}", value)
        return text
