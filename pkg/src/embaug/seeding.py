"""Deterministic seed fan-out.

``derive_seed(root, *parts)`` hashes the root seed together with stage names
or indices (BLAKE2b, 8-byte digest, top bit cleared) so every stage gets an
independent 63-bit seed that does not shift when other stages change.
"""

import hashlib


def derive_seed(root: int, *parts) -> int:
    key = ":".join([str(int(root))] + [str(p) for p in parts]).encode()
    digest = hashlib.blake2b(key, digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1
