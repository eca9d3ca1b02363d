"""Command-line entry point: simulate, glued-trees, bqp, blockenc, estimate."""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import bqpred, gluedtrees
from .blockenc import QuantizationConfig, block_encode_B, block_encode_H
from .dynamics import evolve_exact, format_csv, trajectory
from .errors import InvalidInput, ResourceLimit, SpringsimError
from .estimate import SubsetOracle, sample_estimate
from .netcore import ClassicalState, encode_primary, load_network, network_to_dict


def _clean(obj):
    """Make ``obj`` JSON-ready: numpy scalars to Python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


def dump_json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _vector(text: str | None, n: int, default_index: int | None) -> np.ndarray:
    if text is None:
        v = np.zeros(n)
        if default_index is not None:
            v[default_index] = 1.0
        return v
    try:
        values = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise InvalidInput(f"cannot parse vector {text!r}") from None
    if len(values) != n:
        raise InvalidInput(f"vector has {len(values)} entries, network has {n} masses")
    return np.array(values)


def _initial_state(args, n: int) -> ClassicalState:
    return ClassicalState(_vector(args.x0, n, 0), _vector(args.v0, n, None))


def _sample_times(t: float, samples: int) -> list:
    if t < 0:
        raise InvalidInput("--t must be nonnegative")
    if samples < 1:
        raise InvalidInput("--samples must be at least 1")
    return [t * i / samples for i in range(1, samples + 1)]


# ---------------------------------------------------------------- handlers

def cmd_simulate(args) -> int:
    net = load_network(args.network)
    state0 = _initial_state(args, net.n_masses)
    times = _sample_times(args.t, args.samples)
    states = trajectory(net, state0, times, backend=args.backend, dt=args.dt, eps_pe=args.eps_pe)
    _emit(format_csv(net, states), args.out)
    return 0


def cmd_glued_trees(args) -> int:
    n = args.n
    if n < 2:
        raise InvalidInput("--n must be at least 2")
    if args.mode == "solve":
        instance = gluedtrees.generate(n, args.seed)
        report = gluedtrees.solve_instance(instance, args.seed)
        payload = asdict(report)
        payload["n"] = n
        payload["seed"] = args.seed
        payload["exit_label_truth"] = instance.labels[instance.exit_id]
        payload["correct"] = report.exit_label == instance.labels[instance.exit_id]
        _emit(dump_json(payload), args.out)
        return 0
    tmax = args.tmax if args.tmax is not None else 4.0 * n
    if tmax <= 0 or args.dt <= 0:
        raise InvalidInput("--tmax and --dt must be positive")
    times = np.arange(int(math.floor(tmax / args.dt + 1e-9)) + 1) * args.dt
    if args.mode == "reduced":
        values = gluedtrees.exit_velocity(gluedtrees.reduce_to_chain(n), times) ** 2
    else:
        if n > gluedtrees.SOLVE_MAX_N:
            raise ResourceLimit(f"full mode is limited to n <= {gluedtrees.SOLVE_MAX_N}")
        values = gluedtrees.full_exit_series(gluedtrees.generate(n, args.seed), times)
    lines = ["t,exit_velocity_sq"]
    lines += [f"{t:.17g},{v:.17g}" for t, v in zip(times, values)]
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_bqp(args) -> int:
    if args.bqp_cmd == "perfect-chain":
        if args.L > 500:
            raise ResourceLimit("--L is limited to 500")
        _emit(dump_json(asdict(bqpred.perfect_chain(args.L))), args.out)
        return 0
    circuit = bqpred.load_circuit(args.circuit)
    inst = bqpred.compile_circuit(circuit)
    if args.bqp_cmd == "compile":
        payload = {
            "circuit": bqpred.circuit_to_dict(circuit),
            "network": network_to_dict(inst.network),
            "output_oscillator": inst.output_index + 1,
            "initial_v": inst.initial_v,
            "checks": bqpred.instance_checks(inst),
        }
        _emit(dump_json(payload), args.out)
        return 0
    if args.bqp_cmd == "run":
        report = bqpred.run_instance(inst, args.t)
        payload = {
            "t": args.t,
            "kinetic_fraction_output": report.kinetic_fraction_output,
            "kinetic_fraction_register": report.kinetic_fraction_register,
            "alpha_L1": bqpred.chain_alpha(circuit.L, args.t),
            "identity_residual": report.identity_residual,
        }
        _emit(dump_json(payload), args.out)
        return 0
    times = [float(s) for s in args.times.split(",") if s.strip()]
    verdict = bqpred.decide(inst, times, args.yes_threshold, args.no_threshold)
    _emit(dump_json({"decision": verdict}), args.out)
    return 0


def cmd_blockenc(args) -> int:
    net = load_network(args.network)
    r_m = args.r_m if args.r_m is not None else 2 * args.r + 8
    r_kappa = args.r_kappa if args.r_kappa is not None else 2 * args.r + 8
    be = block_encode_B(net, QuantizationConfig(args.r, r_m, r_kappa), mode=args.mode)
    be_h = block_encode_H(be)
    payload = {
        "r": args.r, "r_m": r_m, "r_kappa": r_kappa,
        "lambda": be.lam,
        "error_B": be.error,
        "error_H": be_h.error,
        "predicted_eps": be.predicted_eps,
        "within_4x": be.error <= 4 * be.predicted_eps,
        "block_shape": list(be.block.shape),
    }
    _emit(dump_json(payload), args.out)
    return 0


def _parse_subset(kind: str, text: str):
    items = [s.strip() for s in text.split(",") if s.strip()]
    try:
        if kind == "kinetic":
            return SubsetOracle("vertices", [int(s) - 1 for s in items])
        pairs = []
        for s in items:
            j, k = s.split("-")
            pairs.append((int(j) - 1, int(k) - 1))
        return SubsetOracle("edges", pairs)
    except ValueError:
        raise InvalidInput(f"cannot parse subset {text!r}") from None


def cmd_estimate(args) -> int:
    net = load_network(args.network)
    V = _parse_subset(args.estimate_cmd, args.subset)
    state0 = _initial_state(args, net.n_masses)
    if args.t < 0:
        raise InvalidInput("--t must be nonnegative")
    psi = encode_primary(net, evolve_exact(net, state0, args.t))
    report = sample_estimate(psi, V, args.epsilon, args.delta, args.seed, net.springs)
    payload = report.to_dict()
    payload["quantity"] = "K_V/E" if args.estimate_cmd == "kinetic" else "U_V/E"
    _emit(dump_json(payload), args.out)
    return 0


# ---------------------------------------------------------------- parser

def _state_flags(p):
    p.add_argument("--x0", help="comma-separated initial positions (default e_1)")
    p.add_argument("--v0", help="comma-separated initial velocities (default 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="springsim",
                                     description="Coupled-oscillator simulation workflows.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--out", help="write output here instead of stdout")

    p = sub.add_parser("simulate", parents=[common], help="evolve a network, CSV output")
    p.add_argument("--network", required=True, help="network JSON file")
    p.add_argument("--t", type=float, required=True, help="final time")
    p.add_argument("--backend", choices=["exact", "verlet", "hamiltonian", "qpe"], default="exact")
    p.add_argument("--samples", type=int, default=1, help="number of equally spaced output times")
    p.add_argument("--dt", type=float, help="Verlet step")
    p.add_argument("--eps-pe", type=float, help="phase-estimation precision for the qpe backend")
    _state_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("glued-trees", parents=[common], help="glued-trees exit dynamics")
    p.add_argument("--n", type=int, required=True, help="tree depth")
    p.add_argument("--mode", choices=["reduced", "full", "solve"], default="reduced")
    p.add_argument("--tmax", type=float, help="end of the time grid (default 4n)")
    p.add_argument("--dt", type=float, default=0.05, help="time grid step")
    p.set_defaults(func=cmd_glued_trees)

    p = sub.add_parser("bqp", help="circuit compilation and clock-chain tools")
    bsub = p.add_subparsers(dest="bqp_cmd", required=True)
    q = bsub.add_parser("compile", parents=[common], help="compile a circuit to a network")
    q.add_argument("--circuit", required=True, help="circuit JSON file")
    q = bsub.add_parser("run", parents=[common], help="output kinetic fraction at time t")
    q.add_argument("--circuit", required=True)
    q.add_argument("--t", type=float, required=True)
    q = bsub.add_parser("decide", parents=[common], help="yes/no decision from the output fraction")
    q.add_argument("--circuit", required=True)
    q.add_argument("--times", required=True, help="comma-separated times")
    q.add_argument("--yes-threshold", type=float, required=True)
    q.add_argument("--no-threshold", type=float, required=True)
    q = bsub.add_parser("perfect-chain", parents=[common], help="engineered perfect-transfer chain")
    q.add_argument("--L", type=int, required=True)
    p.set_defaults(func=cmd_bqp)

    p = sub.add_parser("blockenc", help="block-encoding checks")
    esub = p.add_subparsers(dest="blockenc_cmd", required=True)
    q = esub.add_parser("verify", parents=[common], help="measured vs predicted block error")
    q.add_argument("--network", required=True)
    q.add_argument("--r", type=int, required=True, help="bits for the inequality test")
    q.add_argument("--r-m", type=int, help="mass bits (default 2r+8)")
    q.add_argument("--r-kappa", type=int, help="spring-constant bits (default 2r+8)")
    q.add_argument("--mode", choices=["auto", "statevector", "formula", "unitary"], default="auto")
    p.set_defaults(func=cmd_blockenc)

    p = sub.add_parser("estimate", help="sampled energy fractions")
    ssub = p.add_subparsers(dest="estimate_cmd", required=True)
    for name, help_text, subset_help in (
            ("kinetic", "kinetic energy of a set of masses", "masses, e.g. 1,3"),
            ("potential", "potential energy of a set of springs", "springs, e.g. 1-2,2-2")):
        q = ssub.add_parser(name, parents=[common], help=help_text)
        q.add_argument("--network", required=True)
        q.add_argument("--subset", required=True, help=subset_help)
        q.add_argument("--t", type=float, default=0.0)
        q.add_argument("--epsilon", type=float, default=0.05)
        q.add_argument("--delta", type=float, default=0.05)
        _state_flags(q)
    p.set_defaults(func=cmd_estimate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SpringsimError as exc:
        print(f"springsim: {exc}", file=sys.stderr)
        return exc.exit_code
