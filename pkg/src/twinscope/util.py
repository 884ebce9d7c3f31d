"""Small shared helpers."""

from __future__ import annotations

import hashlib
import json


def stable_seed(*parts) -> int:
    """Deterministic 32-bit seed derived from the given parts.

    Stable across processes and platforms (unlike hash()), so the CLI and
    the service derive identical seeds from identical inputs.
    """
    text = json.dumps([str(p) for p in parts], separators=(",", ":"))
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big")


def canonical_json(obj) -> str:
    """JSON text with sorted keys and no incidental whitespace variance."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def content_hash(obj) -> str:
    """Short stable hash of a JSON-serializable object."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()[:12]
