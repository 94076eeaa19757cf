"""Lenient extraction of JSON objects from model output."""

from __future__ import annotations

import json
from typing import Any, Optional


def first_json_object(raw: str, require_key: Optional[str] = None) -> Optional[dict[str, Any]]:
    """Return the first decodable JSON object in raw text, or None.

    Tolerates surrounding prose and code fences. When require_key is given,
    objects lacking that key are skipped.
    """
    decoder = json.JSONDecoder()
    search = 0
    while True:
        start = raw.find("{", search)
        if start < 0:
            return None
        try:
            candidate, _ = decoder.raw_decode(raw, start)
        except json.JSONDecodeError:
            search = start + 1
            continue
        if isinstance(candidate, dict) and (require_key is None or require_key in candidate):
            return candidate
        search = start + 1
