"""Small text utilities: tokenization and overlap scoring."""

from __future__ import annotations

import re

_TOKEN_RE = re.compile(r"[a-z0-9]+(?:[._\-][a-z0-9]+)*")


def tokenize(text: str) -> list[str]:
    """Lowercase and split into alphanumeric tokens (dots/dashes/underscores kept inside tokens)."""
    return _TOKEN_RE.findall(text.lower())


def token_overlap(a: str, b: str) -> float:
    """Symmetric token-set overlap: |A ∩ B| / |A ∪ B|.  Empty-vs-empty is 1.0."""
    ta, tb = set(tokenize(a)), set(tokenize(b))
    if not ta and not tb:
        return 1.0
    if not ta or not tb:
        return 0.0
    return len(ta & tb) / len(ta | tb)
