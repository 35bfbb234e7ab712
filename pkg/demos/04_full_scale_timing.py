"""Cycle-accurate timing of the first VGG-16 convolution at full scale:
224x224x3 input, 64 filters, 3 channels in parallel. The line buffer turns
the serial stream into one window per cycle, the engine holds each window for
the 64-filter sweep, so the layer is pinned at 224*224*64 steady cycles plus
a small fill. Takes a few seconds of wall time for the ~3.2M simulated cycles.

Run: python demos/04_full_scale_timing.py [--seven-layer]
"""

import sys
import time

from fusedconv import parse_plan, simulate_plan, time_ms
from fusedconv.costmodel import end_to_end_estimate
from fusedconv.datagen import generate_tensor, generate_weights
from fusedconv.networks import VGG7_DEFAULT_DPAR, consecutive_convs, vgg_prefix_7


def run(net, plan, label, reference_ms):
    tensor = generate_tensor(net.input_dims, seed=1)
    banks = generate_weights(net, seed=2)
    t0 = time.monotonic()
    sim = simulate_plan(net, tensor, banks, plan)
    wall = time.monotonic() - t0
    est = end_to_end_estimate(plan, net)
    print(f"{label}:")
    print(f"  simulated: {sim.end_to_end_cycles:,} cycles "
          f"= {time_ms(sim.end_to_end_cycles):.3f} ms at 120 MHz "
          f"(reference {reference_ms} ms)")
    print(f"  estimate:  {est:,} cycles = {time_ms(est):.3f} ms")
    print(f"  stage completion stamps:")
    for s in sim.stamps_per_group[0]:
        print(f"    {s.name:10s} last output at cycle {s.last_out:,}")
    print(f"  ({wall:.1f}s wall, {sim.saturation_events} saturation events)")
    print()


def main():
    net = consecutive_convs(1)
    run(net, parse_plan("0", net, "3"), "conv1_1 alone", "26.764")

    if "--seven-layer" in sys.argv:
        net = vgg_prefix_7()
        dpar = ",".join(str(x) for x in VGG7_DEFAULT_DPAR)
        run(net, parse_plan("0-6", net, dpar),
            "seven layers fully fused (about a minute of wall time)", "41.95")
    else:
        print("pass --seven-layer to also run the fully fused 7-layer stack")


if __name__ == "__main__":
    main()
