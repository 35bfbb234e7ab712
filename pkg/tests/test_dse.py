import pytest

from fusedconv.config import ConvSpec, Dims, FusionPlan, NetworkSpec, ValidationError, \
    full_depth_parallel, validate_plan
from fusedconv.costmodel import ResourceBudget, dsp_count, end_to_end_estimate
from fusedconv.dse import (PlanPoint, assign_depth_parallelism, enumerate_plans,
                           evaluate_plan, nested_chain, pareto_front, sweep)
from fusedconv.networks import vgg_prefix_7


@pytest.fixture(scope="module")
def net():
    return vgg_prefix_7()


def test_enumerate_counts():
    assert len(enumerate_plans(7)) == 64
    assert enumerate_plans(1) == [((0, 0),)]
    assert sorted(enumerate_plans(3)) == sorted([
        (((0, 2),)), ((0, 0), (1, 2)), ((0, 1), (2, 2)),
        ((0, 0), (1, 1), (2, 2))])
    with pytest.raises(ValidationError, match="enumeration bound"):
        enumerate_plans(21)


def test_enumerated_partitions_are_valid(net):
    for groups in enumerate_plans(7):
        plan = FusionPlan(groups, full_depth_parallel(net))
        validate_plan(plan, net)


def test_assignment_reproduces_reference_dpar(net):
    plan = assign_depth_parallelism([(0, 6)], net, ResourceBudget(dsp_max=2907))
    assert plan.depth_parallel == (3, 64, 64, 128, 64)
    assert dsp_count(plan, net) == 2907


def test_assignment_keeps_full_depth_when_budget_allows(net):
    plan = assign_depth_parallelism([(0, 6)], net, ResourceBudget(dsp_max=3600))
    assert plan.depth_parallel == (3, 64, 64, 128, 128)


def test_assignment_halves_single_conv():
    net = NetworkSpec(Dims(56, 56, 64), (ConvSpec(3, 8, 1, 1),))
    plan = assign_depth_parallelism([(0, 0)], net, ResourceBudget(dsp_max=288))
    assert plan.depth_parallel == (32,)


def test_assignment_infeasible_budget(net):
    # depth 3 cannot be halved, so conv1_1 alone needs 27 DSP
    with pytest.raises(ValidationError, match="infeasible"):
        assign_depth_parallelism([(0, 6)], net, ResourceBudget(dsp_max=20))


def test_assignment_cycles_monotone_in_budget(net):
    # shrinking the budget can only deepen the serial decomposition, so the
    # throughput floor never improves. (The full estimate tracks it to within
    # the fill term: a halved d_par slightly shortens the channel adder tree,
    # so the estimate itself may dip by a few pipeline-depth cycles.)
    from fusedconv.costmodel import steady_bottleneck
    prev = None
    prev_est = None
    for dsp_max in (3600, 2907, 2000, 1500, 1200, 800, 400, 200, 100, 50):
        try:
            plan = assign_depth_parallelism([(0, 6)], net, ResourceBudget(dsp_max=dsp_max))
        except ValidationError:
            break
        floor = steady_bottleneck(plan, net)
        est = end_to_end_estimate(plan, net)
        assert dsp_count(plan, net) <= dsp_max
        assert est >= floor
        if prev is not None:
            assert floor >= prev
            assert est >= prev_est - 9 * 7 * len(net.conv_indices())
        prev = floor
        prev_est = est


def test_pareto_front_single_and_pair():
    one = NetworkSpec(Dims(4, 4, 1), (ConvSpec(1, 1),))
    plan = validate_plan(FusionPlan(((0, 0),), (1,)), one)
    a = PlanPoint(plan, dsp=10, traffic_bytes=100, est_cycles=1, buffer_bits=1)
    assert pareto_front([a]) == [a]
    b = PlanPoint(plan, dsp=20, traffic_bytes=50, est_cycles=1, buffer_bits=1)
    assert pareto_front([a, b]) == [a, b]  # mutually non-dominating
    c = PlanPoint(plan, dsp=25, traffic_bytes=60, est_cycles=1, buffer_bits=1)
    assert pareto_front([a, b, c]) == [a, b]  # c dominated by b


def test_pareto_front_idempotent(net):
    points, _ = sweep(net, ResourceBudget(dsp_max=3600))
    front = pareto_front(points)
    assert pareto_front(front) == front


def test_sweep_extreme_directions(net):
    points, infeasible = sweep(net, ResourceBudget(dsp_max=3600))
    assert len(points) == 64 and not infeasible
    by_groups = {p.plan.groups: p for p in points}
    singles = by_groups[tuple((i, i) for i in range(7))]
    fused = by_groups[((0, 6),)]
    front = pareto_front(points)
    # all-fused: maximum dsp, minimum traffic; it anchors the front
    assert fused.dsp == max(p.dsp for p in points)
    assert fused.traffic_bytes == min(p.traffic_bytes for p in points)
    assert front[-1].plan.groups == ((0, 6),)
    # all-singleton: minimum dsp, maximum traffic direction
    assert singles.dsp == min(p.dsp for p in points) == front[0].dsp
    assert singles.traffic_bytes == max(p.traffic_bytes for p in points)


def test_nested_chain_monotone(net):
    chain = nested_chain(7)
    assert chain[0] == tuple((i, i) for i in range(7))
    assert chain[-1] == ((0, 6),)
    pts = [evaluate_plan(validate_plan(
        FusionPlan(groups, full_depth_parallel(net)), net), net)
        for groups in chain]
    for a, b in zip(pts, pts[1:]):
        assert b.dsp >= a.dsp
        assert b.traffic_bytes <= a.traffic_bytes


def test_evaluate_plan_matches_costmodel(net):
    from fusedconv.costmodel import buffer_bits, traffic_bytes
    plan = validate_plan(FusionPlan(((0, 2), (3, 6)), full_depth_parallel(net)), net)
    p = evaluate_plan(plan, net)
    assert p.dsp == dsp_count(plan, net)
    assert p.traffic_bytes == traffic_bytes(plan, net, 4)["total"]
    assert p.est_cycles == end_to_end_estimate(plan, net)
    assert p.buffer_bits == buffer_bits(plan, net)[0]


def test_dpar_stays_power_of_two_times_odd_part(net):
    for dsp_max in (2907, 2000, 1000, 500):
        plan = assign_depth_parallelism([(0, 6)], net, ResourceBudget(dsp_max=dsp_max))
        din = net.layer_input_dims()
        for dp, li in zip(plan.depth_parallel, net.conv_indices()):
            depth = din[li].depth
            assert depth % dp == 0
            # halving-only: dp = depth / 2^j
            ratio = depth // dp
            assert ratio & (ratio - 1) == 0
