import hashlib


def hash64(*parts: int) -> int:
    """
    Derive a 64-bit seed from integer parts.

    The derivation is sha256 over the '|'-joined decimal parts, truncated to the
    first 8 bytes (big endian). It is stable across platforms and Python versions,
    so trial k of base seed s always gets hash64(s, k) (or hash64(s, k, n)).
    """
    text = "|".join(str(int(p)) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def trial_seeds(base: int, trial: int, n: int) -> tuple[int, int]:
    """Seeds of (U, V) for one trial of size n."""
    return hash64(base, trial, n, 0), hash64(base, trial, n, 1)
