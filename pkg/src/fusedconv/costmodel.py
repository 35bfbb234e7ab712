"""Closed-form latency, cycle, DSP, buffer-bit, and off-chip traffic estimates.

These mirror the accelerator's structure without running the simulator:
multipliers map to DSP slices (w^2 per channel processed in parallel), adders
to logic fabric, and on-chip storage to 18,432-bit block granularity. The
end-to-end estimate charges every stage's fill latency serially, which makes
it a conservative ceiling for the simulator's better-overlapped schedule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .config import ConvSpec, Dims, FusionPlan, NetworkSpec, ValidationError, \
    serial_groups, validate_plan

BRAM_BLOCK_BITS = 18_432
DEFAULT_FREQUENCY_MHZ = 120.0
VIRTEX7_DSP = 3600
VIRTEX7_BRAM_BITS = 54_190_080  # 6.46 MB of on-chip block RAM


@dataclass(frozen=True)
class ResourceBudget:
    dsp_max: int = VIRTEX7_DSP
    bram_bits_max: int = VIRTEX7_BRAM_BITS

    def __post_init__(self):
        if self.dsp_max < 1 or self.bram_bits_max < 1:
            raise ValidationError("resource budget must be positive")


def _ceil_log2(n: int) -> int:
    return (n - 1).bit_length()


def conv3d_latency(w: int, d_par: int) -> int:
    """Pipeline depth of the 3-D conv unit: 9 * (1 + ceil(2 log2 w) + ceil(log2 d_par)).

    The 9-cycle unit latency covers one multiplier/adder stage; the tree over
    the w*w products adds ceil(2 log2 w) stages and the cross-channel tree
    ceil(log2 d_par) more. ceil(2 log2 w) is computed exactly as
    ceil(log2 w^2).
    """
    if w < 1 or d_par < 1:
        raise ValidationError("conv3d_latency arguments must be >= 1")
    return 9 * (1 + _ceil_log2(w * w) + _ceil_log2(d_par))


def steady_cycles(layer: ConvSpec, out_dims: Dims, g: int) -> int:
    """Throughput-limited cycles: output positions x filters x serial groups."""
    if g < 1:
        raise ValidationError("serial group count must be >= 1")
    return out_dims.height * out_dims.width * layer.filters * g


def _group_conv_dsp(net: NetworkSpec, plan: FusionPlan, group) -> int:
    conv_idx = net.conv_indices()
    dsp = 0
    a, b = group
    for li in range(a, b + 1):
        layer = net.layers[li]
        if isinstance(layer, ConvSpec):
            dp = plan.depth_parallel[conv_idx.index(li)]
            dsp += layer.kernel * layer.kernel * dp
    return dsp


def dsp_count(plan: FusionPlan, net: NetworkSpec) -> int:
    """Multipliers only: w^2 * d_par per conv layer, summed per group, max over groups.

    Hardware is rebuilt (reused) between groups, so the plan needs only the
    widest group's multiplier complement.
    """
    validate_plan(plan, net)
    return max(_group_conv_dsp(net, plan, grp) for grp in plan.groups)


def _layer_buffers(net: NetworkSpec, li: int):
    """Buffer list [(name, bits)] backing one layer."""
    layer = net.layers[li]
    in_dims = net.layer_input_dims()[li]
    out_dims = net.layer_dims()[li]
    if isinstance(layer, ConvSpec):
        w = layer.kernel
        line = w * (in_dims.width + 2 * layer.pad) * in_dims.depth * 32
        bufs = [("line", line)]
        bank_bits = layer.filters * in_dims.depth * 32
        for b in range(w * w):
            bufs.append((f"filter{b}", bank_bits))
        bufs.append(("assembly", out_dims.width * layer.filters * 32))
        return bufs
    return [("poolrow", out_dims.width * in_dims.depth * 32)]


def buffer_bits(plan: FusionPlan, net: NetworkSpec):
    """On-chip storage model. Returns (bits, blocks): max over groups of the
    summed line buffers, filter banks (one bank per filter tap position),
    output-assembly rows, and pool rows; blocks use a per-buffer ceiling at
    18,432-bit granularity."""
    validate_plan(plan, net)
    best_bits = 0
    best_blocks = 0
    for a, b in plan.groups:
        bits = 0
        blocks = 0
        for li in range(a, b + 1):
            for _, sz in _layer_buffers(net, li):
                bits += sz
                blocks += -(-sz // BRAM_BLOCK_BITS)
        if bits > best_bits:
            best_bits, best_blocks = bits, blocks
    return best_bits, best_blocks


def weight_values(net: NetworkSpec) -> int:
    total = 0
    in_dims = net.layer_input_dims()
    for li in net.conv_indices():
        layer = net.layers[li]
        total += layer.filters * layer.kernel * layer.kernel * in_dims[li].depth
    return total


def traffic_bytes(plan: FusionPlan, net: NetworkSpec, bytes_per_value: int = 4,
                  reread_weights_per_depth_group: bool = False):
    """Off-chip transfer accounting. Returns a dict itemized as
    {inputs, outputs, weights, total} in bytes.

    Every group streams its input volume in and its output volume out;
    weights are loaded once per group execution (they stay in on-chip banks
    across the streamed input). With the re-read flag, a conv whose depth is
    decomposed into g serial groups fetches its weights g times.
    """
    if bytes_per_value not in (1, 2, 4):
        raise ValidationError("bytes_per_value must be 1, 2, or 4")
    validate_plan(plan, net)
    dims_in = net.layer_input_dims()
    dims_out = net.layer_dims()
    g_of = serial_groups(plan, net)

    inputs = 0
    outputs = 0
    for a, b in plan.groups:
        inputs += dims_in[a].volume
        outputs += dims_out[b].volume

    weights = 0
    for li in net.conv_indices():
        layer = net.layers[li]
        vals = layer.filters * layer.kernel * layer.kernel * dims_in[li].depth
        if reread_weights_per_depth_group:
            vals *= g_of[li]
        weights += vals

    return {"inputs": inputs * bytes_per_value,
            "outputs": outputs * bytes_per_value,
            "weights": weights * bytes_per_value,
            "total": (inputs + outputs + weights) * bytes_per_value}


def steady_bottleneck(plan: FusionPlan, net: NetworkSpec) -> int:
    """Throughput floor of a plan: per group, the slowest conv's steady cycles
    (at least the cycles to stream the group input), summed over groups."""
    validate_plan(plan, net)
    dims_in = net.layer_input_dims()
    dims_out = net.layer_dims()
    g_of = serial_groups(plan, net)
    total = 0
    for a, b in plan.groups:
        worst = dims_in[a].height * dims_in[a].width
        for li in range(a, b + 1):
            layer = net.layers[li]
            if isinstance(layer, ConvSpec):
                s = steady_cycles(layer, dims_out[li], g_of[li])
                if s > worst:
                    worst = s
        total += worst
    return total


def end_to_end_estimate(plan: FusionPlan, net: NetworkSpec) -> int:
    """Analytical cycle estimate: per group, the bottleneck conv's steady
    cycles (floored by the cycles needed just to stream the group input)
    plus every stage's fill latency, charged at the per-element period of
    whatever feeds it (k*g of the producing conv, 1 at the group input,
    unchanged through a pool)."""
    validate_plan(plan, net)
    dims_in = net.layer_input_dims()
    g_of = serial_groups(plan, net)
    conv_idx = net.conv_indices()

    fills = 0
    for a, b in plan.groups:
        period = 1
        for li in range(a, b + 1):
            layer = net.layers[li]
            w_in = dims_in[li].width
            if isinstance(layer, ConvSpec):
                dp = plan.depth_parallel[conv_idx.index(li)]
                fills += (layer.kernel - 1) * (w_in + 2 * layer.pad) * period \
                    + layer.kernel + conv3d_latency(layer.kernel, dp)
                period = layer.filters * g_of[li]
            else:
                fills += layer.window * w_in * period
    return steady_bottleneck(plan, net) + fills


def time_ms(cycles: int, frequency_mhz: float = DEFAULT_FREQUENCY_MHZ) -> float:
    return cycles / (frequency_mhz * 1000.0)


@dataclass
class CostReport:
    per_layer: list = field(default_factory=list)
    total_estimated_cycles: int = 0
    milliseconds: float = 0.0
    frequency_mhz: float = DEFAULT_FREQUENCY_MHZ
    dsp: int = 0
    buffer_bits: int = 0
    buffer_blocks: int = 0
    traffic: dict = field(default_factory=dict)
    bytes_per_value: int = 4

    def to_dict(self) -> dict:
        return {"per_layer": self.per_layer,
                "total_estimated_cycles": self.total_estimated_cycles,
                "milliseconds": self.milliseconds,
                "frequency_mhz": self.frequency_mhz,
                "dsp": self.dsp,
                "buffer_bits": self.buffer_bits,
                "buffer_blocks": self.buffer_blocks,
                "traffic_bytes": self.traffic,
                "bytes_per_value": self.bytes_per_value}


def analyze(plan: FusionPlan, net: NetworkSpec, bytes_per_value: int = 4,
            frequency_mhz: float = DEFAULT_FREQUENCY_MHZ,
            reread_weights_per_depth_group: bool = False) -> CostReport:
    """Assemble the full analytical report for one plan."""
    validate_plan(plan, net)
    g_of = serial_groups(plan, net)
    dims_in = net.layer_input_dims()
    dims_out = net.layer_dims()
    conv_idx = net.conv_indices()

    per_layer = []
    for li, layer in enumerate(net.layers):
        bufs = _layer_buffers(net, li)
        bits = sum(sz for _, sz in bufs)
        blocks = sum(-(-sz // BRAM_BLOCK_BITS) for _, sz in bufs)
        if isinstance(layer, ConvSpec):
            dp = plan.depth_parallel[conv_idx.index(li)]
            per_layer.append({
                "layer": li, "type": "conv",
                "depth_parallel": dp, "serial_groups": g_of[li],
                "latency_cycles": conv3d_latency(layer.kernel, dp),
                "steady_cycles": steady_cycles(layer, dims_out[li], g_of[li]),
                "dsp": layer.kernel * layer.kernel * dp,
                "buffer_bits": bits, "buffer_blocks": blocks})
        else:
            per_layer.append({
                "layer": li, "type": "maxpool",
                "latency_cycles": 0,
                "steady_cycles": dims_in[li].height * dims_in[li].width,
                "dsp": 0, "buffer_bits": bits, "buffer_blocks": blocks})

    est = end_to_end_estimate(plan, net)
    bits, blocks = buffer_bits(plan, net)
    return CostReport(
        per_layer=per_layer,
        total_estimated_cycles=est,
        milliseconds=time_ms(est, frequency_mhz),
        frequency_mhz=frequency_mhz,
        dsp=dsp_count(plan, net),
        buffer_bits=bits,
        buffer_blocks=blocks,
        traffic=traffic_bytes(plan, net, bytes_per_value,
                              reread_weights_per_depth_group),
        bytes_per_value=bytes_per_value)
