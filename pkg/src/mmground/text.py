"""Minimal text tokenization shared by the model vocabulary and validators."""

from __future__ import annotations

import re
from typing import List

_TOKEN_RE = re.compile(r"[a-z0-9]+(?:\.[0-9]+)?")


def tokenize(text: str) -> List[str]:
    """Lowercase word/number tokens; decimals like 129.99 stay single tokens."""
    return _TOKEN_RE.findall(text.lower())
