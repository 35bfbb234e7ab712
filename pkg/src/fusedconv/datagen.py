"""Deterministic test-data generation.

SplitMix64 drives everything: identical seeds give identical raw fixed-point
values on every platform. Activations land in [-1.0, +1.0) and weights are
additionally scaled by 1/(w*w*d), so a full accumulation is bounded by 1.0
and no generated workload can saturate the 32-bit datapath.
"""

from __future__ import annotations

import numpy as np

from .config import ConvSpec, Dims, NetworkSpec
from .golden import FilterBank, Tensor3D

_MASK = (1 << 64) - 1


class SeededGenerator:
    """SplitMix64: state += 0x9E3779B97F4A7C15, output mixed by two
    xor-shift-multiply rounds."""

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def next_raw(self) -> int:
        """Top 17 bits as a signed fraction: a raw Q16.16 value in [-1.0, +1.0)."""
        v = self.next_u64() >> 47
        return v - (1 << 17) if v >= (1 << 16) else v


def _scale_raw(raw: int, divisor: int) -> int:
    """round-half-away-from-zero(raw / divisor) in pure integers."""
    if raw >= 0:
        return (2 * raw + divisor) // (2 * divisor)
    return -((2 * -raw + divisor) // (2 * divisor))


def generate_tensor(dims: Dims, seed: int) -> Tensor3D:
    gen = SeededGenerator(seed)
    n = dims.volume
    arr = np.fromiter((gen.next_raw() for _ in range(n)), dtype=np.int32, count=n)
    return Tensor3D(dims, arr.reshape(dims.height, dims.width, dims.depth))


def generate_weights(net: NetworkSpec, seed: int) -> list:
    """One FilterBank per conv layer, drawn from the same stream in network
    order, weight magnitudes scaled down by the layer's tap count."""
    gen = SeededGenerator(seed)
    banks = []
    in_dims = net.layer_input_dims()
    for li in net.conv_indices():
        layer: ConvSpec = net.layers[li]
        w, d, k = layer.kernel, in_dims[li].depth, layer.filters
        divisor = w * w * d
        n = k * w * w * d
        arr = np.fromiter((_scale_raw(gen.next_raw(), divisor) for _ in range(n)),
                          dtype=np.int32, count=n)
        banks.append(FilterBank(arr.reshape(k, w, w, d)))
    return banks
