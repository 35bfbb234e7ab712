import random

import numpy as np
import pytest

from fusedconv.config import ConvSpec, Dims, FusionPlan, NetworkSpec, PoolSpec, \
    output_dims, validate_plan
from fusedconv.datagen import generate_tensor, generate_weights
from fusedconv.golden import FilterBank, Tensor3D
from fusedconv.networks import small_test_network, reduced_vgg_prefix_7, vgg_prefix_7


@pytest.fixture
def small_net():
    return small_test_network()


@pytest.fixture
def small_data(small_net):
    return (generate_tensor(small_net.input_dims, 1),
            generate_weights(small_net, 2))


@pytest.fixture(scope="session")
def vgg7():
    return vgg_prefix_7()


@pytest.fixture(scope="session")
def reduced7():
    return reduced_vgg_prefix_7()


def random_network(seed: int) -> NetworkSpec:
    """Small random conv/pool stack in the oracle-equivalence geometry range."""
    rng = random.Random(seed)
    dims = Dims(rng.randint(3, 12), rng.randint(3, 12), rng.choice([1, 2, 3, 4]))
    input_dims = dims
    layers = []
    for _ in range(rng.randint(1, 3)):
        if rng.random() < 0.75 or dims.height < 2 or dims.width < 2:
            kern = rng.choice([1, 3])
            if kern > min(dims.height, dims.width):
                kern = 1
            spec = ConvSpec(kernel=kern, filters=rng.randint(1, 4),
                            stride=rng.choice([1, 1, 2]),
                            pad=rng.randint(0, kern - 1),
                            relu=rng.random() < 0.5)
        else:
            wnd = rng.choice([2, 2, 3])
            if dims.height < wnd or dims.width < wnd:
                continue
            spec = PoolSpec(window=wnd, stride=wnd)
        try:
            dims = output_dims(dims, spec)
        except Exception:
            continue
        layers.append(spec)
    if not layers:
        layers = [ConvSpec(1, 2)]
    return NetworkSpec(input_dims, tuple(layers))


def random_plan(net: NetworkSpec, seed: int) -> FusionPlan:
    rng = random.Random(seed ^ 0x5F5F)
    n = len(net.layers)
    cuts = rng.randint(0, (1 << (n - 1)) - 1) if n > 1 else 0
    groups, start = [], 0
    for i in range(n - 1):
        if cuts >> i & 1:
            groups.append((start, i))
            start = i + 1
    groups.append((start, n - 1))
    dpar = []
    din = net.layer_input_dims()
    for li in net.conv_indices():
        depth = din[li].depth
        dpar.append(rng.choice([x for x in range(1, depth + 1) if depth % x == 0]))
    return validate_plan(FusionPlan(tuple(groups), tuple(dpar)), net)


def identity_bank(depth: int, kernel: int = 3, frac_bits: int = 16) -> FilterBank:
    """One filter per input channel passing that channel's center tap through."""
    arr = np.zeros((depth, kernel, kernel, depth), dtype=np.int32)
    mid = kernel // 2
    for f in range(depth):
        arr[f, mid, mid, f] = 1 << frac_bits
    return FilterBank(arr)


def tensor_from_reals(values, frac_bits: int = 16) -> Tensor3D:
    arr = np.asarray(values, dtype=np.float64)
    raw = np.round(arr * (1 << frac_bits)).astype(np.int64)
    return Tensor3D(Dims(*arr.shape), raw.astype(np.int32))
