"""Sweep all 64 contiguous fusion partitions of the 7-layer stack and chart
the DSP-vs-traffic trade-off: no fusion reuses one layer's multipliers but
round-trips every intermediate tensor; full fusion needs every group member's
multipliers at once but only touches DRAM at the ends.

Run: python demos/03_fusion_tradeoff.py [out.csv]
"""

import sys

from fusedconv import pareto_front, plan_to_text, sweep
from fusedconv.costmodel import ResourceBudget
from fusedconv.dse import nested_chain
from fusedconv.networks import vgg_prefix_7

MB = 1_000_000


def main():
    net = vgg_prefix_7()
    points, infeasible = sweep(net, ResourceBudget(dsp_max=3600))
    front = pareto_front(points)
    front_keys = {plan_to_text(p.plan) for p in front}
    print(f"{len(points)} partitions evaluated under a 3600-DSP budget "
          f"({len(infeasible)} infeasible)")
    print()

    print("front-to-back merge chain (all singletons down to one group):")
    by_groups = {p.plan.groups: p for p in points}
    for groups in nested_chain(7):
        p = by_groups[groups]
        tag = "pareto" if plan_to_text(p.plan) in front_keys else "      "
        print(f"  {len(groups)} groups  {plan_to_text(p.plan):17s} "
              f"dsp {p.dsp:4d}  traffic {p.traffic_bytes / MB:6.2f} MB  "
              f"est {p.est_cycles / 1e6:5.2f}M cycles  {tag}")
    print()

    print("pareto front (ascending DSP):")
    for p in front:
        print(f"  {plan_to_text(p.plan):17s} dsp {p.dsp:4d}  "
              f"traffic {p.traffic_bytes / MB:6.2f} MB")
    print()
    print("merging only ever trades traffic for multipliers: along the chain",
          "DSP never falls and traffic never rises.")

    if len(sys.argv) > 1:
        with open(sys.argv[1], "w") as fh:
            fh.write("plan,groups,dsp,traffic_bytes,est_cycles,buffer_bits,pareto\n")
            for p in points:
                expr = plan_to_text(p.plan)
                fh.write(f"{expr},{p.plan.n_groups()},{p.dsp},{p.traffic_bytes},"
                         f"{p.est_cycles},{p.buffer_bits},"
                         f"{1 if expr in front_keys else 0}\n")
        print(f"\nwrote {sys.argv[1]}")


if __name__ == "__main__":
    main()
