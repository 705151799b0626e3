"""Pull the first JSON value out of free-form model output."""

from __future__ import annotations

import json
from typing import Any

from netintent.errors import NoJsonFound

_decoder = json.JSONDecoder()


def extract_json(text: str) -> Any:
    """First object or array decodable from ``text``.

    Code fences need no special handling: decoding starts at each opening
    bracket in turn, so fence markers and surrounding prose are skipped.
    Scanning the raw text also keeps backticks inside JSON strings intact.
    """
    for i, ch in enumerate(text):
        if ch not in "{[":
            continue
        try:
            value, _ = _decoder.raw_decode(text, i)
        except json.JSONDecodeError:
            continue
        return value
    raise NoJsonFound(f"no JSON object or array in model output ({len(text)} chars)")
