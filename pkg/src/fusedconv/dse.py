"""Fusion-plan enumeration, depth-parallelism assignment, and the
traffic-vs-DSP trade-off curve."""

from __future__ import annotations

from dataclasses import dataclass

from . import costmodel
from .config import ConvSpec, FusionPlan, NetworkSpec, ValidationError, \
    full_depth_parallel, plan_to_text, serial_groups, validate_plan
from .costmodel import ResourceBudget

ENUMERATION_LIMIT = 20


@dataclass(frozen=True)
class PlanPoint:
    plan: FusionPlan
    dsp: int
    traffic_bytes: int
    est_cycles: int
    buffer_bits: int

    def dominates(self, other: "PlanPoint") -> bool:
        return (self.dsp <= other.dsp and self.traffic_bytes <= other.traffic_bytes
                and (self.dsp < other.dsp or self.traffic_bytes < other.traffic_bytes))


def enumerate_plans(n_layers: int) -> list:
    """All 2^(n_layers-1) contiguous partitions, as tuples of (start, end)."""
    if n_layers < 1:
        raise ValidationError("n_layers must be >= 1")
    if n_layers > ENUMERATION_LIMIT:
        raise ValidationError(
            f"n_layers {n_layers} exceeds enumeration bound {ENUMERATION_LIMIT}")
    out = []
    for cuts in range(1 << (n_layers - 1)):
        groups = []
        start = 0
        for i in range(n_layers - 1):
            if cuts & (1 << i):
                groups.append((start, i))
                start = i + 1
        groups.append((start, n_layers - 1))
        out.append(tuple(groups))
    return out


def _group_bottleneck(net: NetworkSpec, plan: FusionPlan, group) -> int:
    g_of = serial_groups(plan, net)
    dims_out = net.layer_dims()
    worst = 0
    for li in range(group[0], group[1] + 1):
        layer = net.layers[li]
        if isinstance(layer, ConvSpec):
            s = costmodel.steady_cycles(layer, dims_out[li], g_of[li])
            if s > worst:
                worst = s
    return worst


def assign_depth_parallelism(groups, net: NetworkSpec,
                             budget: ResourceBudget) -> FusionPlan:
    """Iterative decomposition: start from full depth parallelism and, while
    the widest group exceeds the DSP budget, halve the d_par of the layer in
    that group whose halving least increases the group's bottleneck steady
    cycles (ties to the deepest layer). Odd depths (3 at the network input)
    are never split."""
    conv_idx = net.conv_indices()
    dpar = list(full_depth_parallel(net))
    plan = validate_plan(FusionPlan(tuple(groups), tuple(dpar)), net)

    while True:
        worst_gi = max(range(len(plan.groups)),
                       key=lambda gi: costmodel._group_conv_dsp(net, plan, plan.groups[gi]))
        worst = costmodel._group_conv_dsp(net, plan, plan.groups[worst_gi])
        if worst <= budget.dsp_max:
            return plan
        group = plan.groups[worst_gi]
        base = _group_bottleneck(net, plan, group)
        best = None  # (increase, -layer_index, conv_pos)
        for pos, li in enumerate(conv_idx):
            if not (group[0] <= li <= group[1]) or dpar[pos] % 2 != 0:
                continue
            trial = list(dpar)
            trial[pos] //= 2
            trial_plan = FusionPlan(plan.groups, tuple(trial))
            increase = _group_bottleneck(net, trial_plan, group) - base
            key = (increase, -li)
            if best is None or key < best[0]:
                best = (key, pos)
        if best is None:
            raise ValidationError(
                f"infeasible budget: group {group} needs {worst} DSP with no "
                f"layer left to decompose (budget {budget.dsp_max})")
        dpar[best[1]] //= 2
        plan = FusionPlan(plan.groups, tuple(dpar))


def evaluate_plan(plan: FusionPlan, net: NetworkSpec, bytes_per_value: int = 4,
                  reread_weights_per_depth_group: bool = False) -> PlanPoint:
    bits, _ = costmodel.buffer_bits(plan, net)
    return PlanPoint(
        plan=plan,
        dsp=costmodel.dsp_count(plan, net),
        traffic_bytes=costmodel.traffic_bytes(
            plan, net, bytes_per_value, reread_weights_per_depth_group)["total"],
        est_cycles=costmodel.end_to_end_estimate(plan, net),
        buffer_bits=bits)


def pareto_front(points) -> list:
    """Non-dominated points in the (dsp, traffic) objective pair, ordered by
    ascending dsp (ties by traffic, then plan expression)."""
    if not points:
        raise ValidationError("pareto_front requires at least one point")
    front = [p for p in points
             if not any(q.dominates(p) for q in points)]
    front.sort(key=lambda p: (p.dsp, p.traffic_bytes, plan_to_text(p.plan)))
    return front


def nested_chain(n_layers: int) -> list:
    """The front-to-back merge sequence: all singletons, then the first two
    layers merged, and so on until one fused group."""
    chain = [tuple((i, i) for i in range(n_layers))]
    for merged in range(2, n_layers + 1):
        groups = [(0, merged - 1)] + [(i, i) for i in range(merged, n_layers)]
        chain.append(tuple(groups))
    return chain


def sweep(net: NetworkSpec, budget: ResourceBudget, bytes_per_value: int = 4,
          reread_weights_per_depth_group: bool = False):
    """Evaluate every contiguous partition under the budget.

    Returns (points, infeasible) where points is a list of PlanPoint in
    enumeration order and infeasible a list of (groups, reason) for
    partitions the budget cannot accommodate.
    """
    points = []
    infeasible = []
    for groups in enumerate_plans(len(net.layers)):
        try:
            plan = assign_depth_parallelism(groups, net, budget)
        except ValidationError as e:
            infeasible.append((groups, str(e)))
            continue
        points.append(evaluate_plan(plan, net, bytes_per_value,
                                    reread_weights_per_depth_group))
    return points, infeasible
