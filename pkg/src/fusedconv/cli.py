"""Command-line front end.

Subcommands: gen (seeded tensors/weights), golden (layer-by-layer reference
run), simulate (cycle-driven pipeline run), analyze (closed-form costs), dse
(fusion trade-off sweep). All outputs are deterministic for fixed inputs and
flags; wall-clock timing goes to stderr only.

Exit codes: 0 success, 1 usage/parse error, 2 validation error, 3 internal
invariant breach.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

from . import __version__, costmodel, dse
from .config import (InternalError, NetworkSpec, ParseError, ValidationError,
                     dpar_to_text, parse_network, parse_plan, plan_to_text)
from .dataflow import TraceWriter, simulate_plan
from .datagen import generate_tensor, generate_weights
from .fileio import (canonical_json, network_digest, read_tensor, read_weights,
                     tensor_digest, write_tensor, write_weights)
from .golden import run_network


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ParseError(message)


def _load_network(path: str) -> NetworkSpec:
    with open(path) as fh:
        return parse_network(fh.read())


def _plan_from_args(args, net: NetworkSpec):
    expr = args.plan if args.plan else f"0-{len(net.layers) - 1}"
    return parse_plan(expr, net, args.dpar)


def _ensure_out(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _write_report(out_dir, name, report: dict):
    path = os.path.join(out_dir, name)
    with open(path, "w") as fh:
        fh.write(canonical_json(report))
    return path


def _dims_list(net: NetworkSpec):
    return [[d.height, d.width, d.depth] for d in net.layer_dims()]


def cmd_gen(args) -> int:
    out = _ensure_out(args.out)
    if args.network:
        net = _load_network(args.network)
        tensor = generate_tensor(net.input_dims, args.seed)
        banks = generate_weights(net, args.seed + 1)
        tpath = os.path.join(out, "input.dclf")
        wpath = os.path.join(out, "weights.bin")
        write_tensor(tpath, tensor)
        write_weights(wpath, banks)
        print(f"wrote {tpath} ({tensor.dims.height}x{tensor.dims.width}"
              f"x{tensor.dims.depth}) and {wpath}")
    elif args.dims:
        try:
            h, w, d = (int(x) for x in args.dims.lower().split("x"))
        except ValueError:
            raise ParseError(f"--dims must be HxWxD, got {args.dims!r}") from None
        from .config import Dims
        tensor = generate_tensor(Dims(h, w, d), args.seed)
        tpath = os.path.join(out, "input.dclf")
        write_tensor(tpath, tensor)
        print(f"wrote {tpath} ({h}x{w}x{d})")
    else:
        raise ParseError("gen requires --network or --dims")
    return 0


def cmd_golden(args) -> int:
    net = _load_network(args.network)
    tensor = read_tensor(args.input)
    banks = read_weights(args.weights, net)
    outputs, saturation = run_network(net, tensor, banks)
    out = _ensure_out(args.out)
    digests = []
    for i, t in enumerate(outputs):
        path = os.path.join(out, f"layer{i:02d}.dclf")
        write_tensor(path, t)
        digests.append(tensor_digest(t))
    report = {
        "tool": {"name": "fusedconv", "version": __version__},
        "command": "golden",
        "network_digest": network_digest(net),
        "layer_dims": _dims_list(net),
        "layer_digests": digests,
        "saturation_events": saturation,
    }
    _write_report(out, "report.json", report)
    print(f"golden: {len(outputs)} layer tensors -> {out} "
          f"(saturation events: {saturation})")
    return 0


def _stamps_dict(sim):
    return [[{"stage": s.name, "first_out": s.first_out,
              "last_out": s.last_out, "emitted": s.emitted}
             for s in stamps]
            for stamps in sim.stamps_per_group]


def cmd_simulate(args) -> int:
    t0 = time.monotonic()
    net = _load_network(args.network)
    tensor = read_tensor(args.input)
    banks = read_weights(args.weights, net)
    plan = _plan_from_args(args, net)

    trace = None
    trace_fh = None
    if args.trace:
        trace_fh = open(args.trace, "w")
        trace = TraceWriter(trace_fh)
    try:
        sim = simulate_plan(net, tensor, banks, plan, trace=trace)
    finally:
        if trace_fh:
            trace_fh.close()

    golden_outputs, golden_sat = run_network(net, tensor, banks)
    golden_match = sim.output.equals(golden_outputs[-1])
    if sim.saturation_events == 0 and not golden_match:
        raise InternalError("zero saturation events but simulator output "
                            "differs from the layer-by-layer reference")

    ms = costmodel.time_ms(sim.end_to_end_cycles, args.freq_mhz)
    cost = costmodel.analyze(plan, net, args.bytes_per_value, args.freq_mhz,
                             args.reread_weights_per_depth_group)
    report = {
        "tool": {"name": "fusedconv", "version": __version__},
        "command": "simulate",
        "network_digest": network_digest(net),
        "plan": plan_to_text(plan),
        "depth_parallel": list(plan.depth_parallel),
        "layer_dims": _dims_list(net),
        "simulation": {
            "cycles_per_group": sim.cycles_per_group,
            "end_to_end_cycles": sim.end_to_end_cycles,
            "milliseconds": ms,
            "frequency_mhz": args.freq_mhz,
            "saturation_events": sim.saturation_events,
            "golden_match": golden_match,
            "stage_stamps": _stamps_dict(sim),
            "stall_cycles": sim.stall_cycles,
            "output_digest": tensor_digest(sim.output),
            "layer_output_digests": [tensor_digest(t) for t in sim.layer_outputs],
        },
        "cost": cost.to_dict(),
    }
    if args.out:
        out = _ensure_out(args.out)
        write_tensor(os.path.join(out, "final.dclf"), sim.output)
        _write_report(out, "report.json", report)
    print(f"simulate: plan {plan_to_text(plan)} dpar {dpar_to_text(plan)}")
    print(f"  end-to-end cycles: {sim.end_to_end_cycles} "
          f"({ms:.3f} ms at {args.freq_mhz:g} MHz)")
    print(f"  golden match: {golden_match}  saturation events: {sim.saturation_events}")
    print(f"  output digest: {report['simulation']['output_digest']}")
    print(f"elapsed: {time.monotonic() - t0:.2f}s", file=sys.stderr)
    return 0


def cmd_analyze(args) -> int:
    net = _load_network(args.network)
    plan = _plan_from_args(args, net)
    cost = costmodel.analyze(plan, net, args.bytes_per_value, args.freq_mhz,
                             args.reread_weights_per_depth_group)
    report = {
        "tool": {"name": "fusedconv", "version": __version__},
        "command": "analyze",
        "network_digest": network_digest(net),
        "plan": plan_to_text(plan),
        "depth_parallel": list(plan.depth_parallel),
        "layer_dims": _dims_list(net),
        "cost": cost.to_dict(),
    }
    text = canonical_json(report)
    if args.out:
        out = _ensure_out(args.out)
        _write_report(out, "report.json", report)
    sys.stdout.write(text)
    return 0


def cmd_dse(args) -> int:
    net = _load_network(args.network)
    budget = costmodel.ResourceBudget(dsp_max=args.dsp_max)
    points, infeasible = dse.sweep(net, budget, args.bytes_per_value,
                                   args.reread_weights_per_depth_group)
    if not points:
        raise ValidationError("no feasible plan under the DSP budget")
    front = dse.pareto_front(points)
    front_keys = {plan_to_text(p.plan) for p in front}

    lines = ["plan,groups,dsp,traffic_bytes,est_cycles,buffer_bits,pareto"]
    for p in points:
        expr = plan_to_text(p.plan)
        lines.append(f"{expr},{p.plan.n_groups()},{p.dsp},{p.traffic_bytes},"
                     f"{p.est_cycles},{p.buffer_bits},"
                     f"{1 if expr in front_keys else 0}")
    csv_text = "\n".join(lines) + "\n"

    by_groups = {}
    for groups in dse.nested_chain(len(net.layers)):
        match = [p for p in points if p.plan.groups == groups]
        if match:
            by_groups[len(groups)] = match[0]
    chain = [{"groups": n, "plan": plan_to_text(p.plan), "dsp": p.dsp,
              "traffic_bytes": p.traffic_bytes, "est_cycles": p.est_cycles}
             for n, p in sorted(by_groups.items(), reverse=True)]

    report = {
        "tool": {"name": "fusedconv", "version": __version__},
        "command": "dse",
        "network_digest": network_digest(net),
        "dsp_max": args.dsp_max,
        "bytes_per_value": args.bytes_per_value,
        "plans_evaluated": len(points),
        "infeasible": [{"plan": "|".join(f"{a}-{b}" for a, b in groups),
                        "reason": reason} for groups, reason in infeasible],
        "pareto_front": [{"plan": plan_to_text(p.plan),
                          "depth_parallel": list(p.plan.depth_parallel),
                          "dsp": p.dsp, "traffic_bytes": p.traffic_bytes,
                          "est_cycles": p.est_cycles,
                          "buffer_bits": p.buffer_bits} for p in front],
        "merge_chain": chain,
    }
    if args.out:
        out = _ensure_out(args.out)
        with open(os.path.join(out, "dse.csv"), "w") as fh:
            fh.write(csv_text)
        _write_report(out, "report.json", report)
    else:
        sys.stdout.write(csv_text)
    print(f"dse: {len(points)} plans, {len(infeasible)} infeasible, "
          f"front of {len(front)} "
          f"(dsp {front[0].dsp}..{front[-1].dsp}, "
          f"traffic {front[-1].traffic_bytes}..{front[0].traffic_bytes} bytes)")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="fusedconv",
                     description="Fused line-buffer CNN accelerator model")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common_cost_flags(p):
        p.add_argument("--bytes-per-value", type=int, default=4, choices=(1, 2, 4))
        p.add_argument("--freq-mhz", type=float, default=120.0)
        p.add_argument("--reread-weights-per-depth-group", action="store_true")

    p = sub.add_parser("gen", help="generate seeded tensor/weight files")
    p.add_argument("--network")
    p.add_argument("--dims", help="HxWxD for a bare tensor")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("golden", help="layer-by-layer reference run")
    p.add_argument("--network", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_golden)

    p = sub.add_parser("simulate", help="cycle-driven pipeline run")
    p.add_argument("--network", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--plan", help="fusion plan, default: all layers fused")
    p.add_argument("--dpar", help="comma-separated d_par per conv layer")
    p.add_argument("--trace", help="write a cycle event trace to this path")
    p.add_argument("--out")
    common_cost_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="closed-form cost report, no simulation")
    p.add_argument("--network", required=True)
    p.add_argument("--plan")
    p.add_argument("--dpar")
    p.add_argument("--out")
    common_cost_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("dse", help="sweep all fusion partitions")
    p.add_argument("--network", required=True)
    p.add_argument("--dsp-max", type=int, default=costmodel.VIRTEX7_DSP)
    p.add_argument("--out")
    common_cost_flags(p)
    p.set_defaults(func=cmd_dse)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except InternalError as e:
        print(f"internal error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
