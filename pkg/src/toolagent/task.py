"""Task inputs: one multimodal question instance."""

from __future__ import annotations

import string
from dataclasses import dataclass, field


def option_labels(n: int) -> list[str]:
    """Positional labels A, B, C, ... for an option list."""
    if n > 26:
        raise ValueError(f"too many options: {n}")
    return list(string.ascii_uppercase[:n])


@dataclass(frozen=True)
class TaskInput:
    """One question: an optional image reference, the question text, and
    optional answer options (values only; labels are positional)."""

    question: str
    image: str | None = None
    options: tuple[str, ...] = ()
    task_id: str = ""

    def render_question(self) -> str:
        """Question text plus a labeled Options block when options exist."""
        if not self.options:
            return self.question
        labels = option_labels(len(self.options))
        lines = [self.question, "Options:"]
        lines += [f"{lab}. {opt}" for lab, opt in zip(labels, self.options)]
        return "\n".join(lines)
