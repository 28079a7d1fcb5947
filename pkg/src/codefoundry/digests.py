#!/usr/bin/env python3
"""
CodeFoundry - Digest Helpers
SHA-256 content digests over canonical JSON, shared by prompts, artifacts,
audit payloads and run outputs.
"""

import json
from typing import Any, Union

from cryptography.hazmat.primitives import hashes


def sha256_hex(data: Union[str, bytes]) -> str:
    """Hex SHA-256 of text (UTF-8) or bytes"""
    if isinstance(data, str):
        data = data.encode("utf-8")
    digest = hashes.Hash(hashes.SHA256())
    digest.update(data)
    return digest.finalize().hex()


def canonical_json(obj: Any) -> str:
    """Stable serialization: sorted keys, no insignificant whitespace"""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def digest_of(obj: Any) -> str:
    return sha256_hex(canonical_json(obj))
