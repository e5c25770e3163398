"""Self-delimiting bit encodings used by label wire formats.

Labels are measured in bits, so every encoder here has a matching
``*_len`` function that returns the exact bit count without building
the string.  Wire strings are plain ``str`` of '0'/'1' characters;
decoding works on a (string, position) cursor.
"""

from __future__ import annotations


class BitsError(ValueError):
    """Malformed bit string handed to a decoder."""


def gamma(n: int) -> str:
    """Elias gamma code for n >= 1."""
    if n < 1:
        raise BitsError(f"gamma undefined for {n}")
    body = bin(n)[2:]
    return "0" * (len(body) - 1) + body


def gamma_len(n: int) -> int:
    if n < 1:
        raise BitsError(f"gamma undefined for {n}")
    return 2 * (n.bit_length() - 1) + 1


def read_gamma(bits: str, pos: int) -> tuple[int, int]:
    zeros = 0
    while pos + zeros < len(bits) and bits[pos + zeros] == "0":
        zeros += 1
    end = pos + 2 * zeros + 1
    if end > len(bits):
        raise BitsError("truncated gamma code")
    return int(bits[pos + zeros : end], 2), end


def uint(n: int) -> str:
    """Nonnegative integer, gamma-shifted by one."""
    return gamma(n + 1)


def uint_len(n: int) -> int:
    return gamma_len(n + 1)


def read_uint(bits: str, pos: int) -> tuple[int, int]:
    value, pos = read_gamma(bits, pos)
    return value - 1, pos


def sint(n: int) -> str:
    """Signed integer via zigzag mapping."""
    return uint(n * 2 if n >= 0 else -n * 2 - 1)


def read_sint(bits: str, pos: int) -> tuple[int, int]:
    z, pos = read_uint(bits, pos)
    return (z // 2 if z % 2 == 0 else -(z + 1) // 2), pos


def block(payload: str) -> str:
    """Length-prefixed bit block, the nesting primitive of wire labels."""
    return uint(len(payload)) + payload


def block_len(payload_len: int) -> int:
    return uint_len(payload_len) + payload_len


def read_block(bits: str, pos: int) -> tuple[str, int]:
    n, pos = read_uint(bits, pos)
    if pos + n > len(bits):
        raise BitsError("truncated block")
    return bits[pos : pos + n], pos + n
