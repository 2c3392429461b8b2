"""
integrity.py
----------------
SHA-256 fingerprints for checkpoint bundles and configs.
Requires 'cryptography' library.
"""

import json
from cryptography.hazmat.primitives import hashes

from utils.errors import IntegrityError


def digest_bytes(data: bytes) -> str:
    """Hex SHA-256 digest of raw bytes."""
    hasher = hashes.Hash(hashes.SHA256())
    hasher.update(data)
    return hasher.finalize().hex()


def digest_file(path: str) -> str:
    with open(path, "rb") as f:
        return digest_bytes(f.read())


def fingerprint_config(config: dict) -> str:
    """Order-independent digest of a JSON-serialisable config."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return digest_bytes(canonical.encode("utf-8"))


def verify_file(path: str, expected: str) -> None:
    """Raise IntegrityError when the file no longer matches its recorded digest."""
    actual = digest_file(path)
    if actual != expected:
        raise IntegrityError(
            f"Checkpoint file '{path}' is corrupted or was modified "
            f"(expected sha256 {expected[:12]}..., got {actual[:12]}...)"
        )
