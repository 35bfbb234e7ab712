"""32-bit two's-complement fixed-point arithmetic for the simulated datapath.

Raw values are plain Python ints. Multiplication truncates toward negative
infinity (arithmetic right shift of the exact 64-bit product); addition
saturates. The reference model and the pipeline simulator both implement
exactly these semantics, which is what makes their comparison a bit-exact
contract whenever nothing saturates.
"""

from __future__ import annotations

import math

I32_MIN = -(1 << 31)
I32_MAX = (1 << 31) - 1


def fx_from_real(x: float, frac_bits: int = 16):
    """Quantize a real number: round half away from zero, then saturate.

    Returns (raw, saturated).
    """
    scaled = x * float(1 << frac_bits)
    if scaled >= 0:
        raw = math.floor(scaled + 0.5)
    else:
        raw = math.ceil(scaled - 0.5)
    if raw > I32_MAX:
        return I32_MAX, True
    if raw < I32_MIN:
        return I32_MIN, True
    return raw, False


def fx_to_real(raw: int, frac_bits: int = 16) -> float:
    return raw / float(1 << frac_bits)


def fx_mul(a: int, b: int, frac_bits: int = 16):
    """Exact product, arithmetic shift right by frac_bits, saturate to 32 bits."""
    p = (a * b) >> frac_bits
    if p > I32_MAX:
        return I32_MAX, True
    if p < I32_MIN:
        return I32_MIN, True
    return p, False


def fx_add_sat(a: int, b: int):
    s = a + b
    if s > I32_MAX:
        return I32_MAX, True
    if s < I32_MIN:
        return I32_MIN, True
    return s, False


def fx_relu(a: int) -> int:
    return a if a > 0 else 0
