"""Command-line entry point (``htr``).

Exit codes: 0 accept / pass, 1 reject / refuted / violation found, 2 error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile

from . import causal, circuit, infoflow, instance, sequential
from .causal import CapacityMode, ConstraintViolation
from .instance import Family, InstanceError

EXIT_OK, EXIT_REJECT, EXIT_ERROR = 0, 1, 2

SWEEP_FIELDS = ["d", "N", "family", "T_sequential", "T_min_causal", "H_M", "cutset_T_lower", "depth_canonical"]
SWEEP_MAX_N_EXHAUSTIVE = 4


class UsageError(Exception):
    pass


def write_atomic(path: str, text: str) -> None:
    """Write via a temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".htr-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(args, text: str) -> None:
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _read_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


def _mode(args) -> CapacityMode:
    return CapacityMode.parse(args.capacity_mode)


# ------------------------------------------------------------------ commands

def cmd_gen(args) -> int:
    inst = instance.random_instance(args.d, args.N, args.family, args.seed)
    _emit(args, instance.dumps_instance(inst))
    return EXIT_OK


def cmd_encode(args) -> int:
    inst = instance.instance_from_dict(_read_json(args.instance))
    _emit(args, _dump(instance.payload_to_dict(instance.encode(inst))))
    return EXIT_OK


def cmd_decode(args) -> int:
    payload = instance.payload_from_dict(_read_json(args.payload))
    inst = instance.decode(payload, args.d, args.N, args.family, args.target)
    _emit(args, instance.dumps_instance(inst))
    return EXIT_OK


def cmd_run(args) -> int:
    inst = instance.instance_from_dict(_read_json(args.instance))
    if args.mode == "sequential":
        trace = sequential.run_sequential(inst)
        _emit(args, _dump(trace.to_dict()))
        return EXIT_OK if trace.accepted else EXIT_REJECT
    if args.schedule:
        schedule = causal.parse_schedule(_read_json(args.schedule))
    else:
        schedule = causal.canonical_schedule(inst.N)
    try:
        trace = causal.run_schedule(inst, schedule, _mode(args), unsafe=args.unsafe)
    except ConstraintViolation as exc:
        _emit(args, _dump({"violation": exc.to_dict(), "outcome": None}))
        return EXIT_ERROR
    _emit(args, _dump(trace.to_dict()))
    if trace.violation is not None:
        return EXIT_ERROR
    return EXIT_OK if trace.outcome == sequential.ACCEPT else EXIT_REJECT


def sweep_row(d: int, N: int, family, seed: int, mode=CapacityMode.ROUTING_ONLY) -> dict:
    """One row of the scaling table for a seeded accepting instance."""
    inst = sequential.with_accepting_target(instance.random_instance(d, N, family, seed))
    t_min = ""
    if N <= SWEEP_MAX_N_EXHAUSTIVE:
        found = causal.min_causal_time(inst, N + 2, mode)
        t_min = "" if found is None else found
    depth = ""
    if d & (d - 1) == 0:
        depth = circuit.build_canonical_circuit(d, N, family, inst.target).depth
    return {
        "d": d,
        "N": N,
        "family": Family(family).value,
        "T_sequential": sequential.run_sequential(inst).handoff_count,
        "T_min_causal": t_min,
        "H_M": f"{infoflow.message_entropy(d, N):.12g}",
        "cutset_T_lower": infoflow.time_lower_bound(d, N, 0.0, mode),
        "depth_canonical": depth,
    }


def sweep_csv(d_list, N_list, family, seed: int, mode=CapacityMode.ROUTING_ONLY) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_FIELDS, lineterminator="\n")
    writer.writeheader()
    for d in d_list:
        for N in N_list:
            writer.writerow(sweep_row(d, N, family, seed, mode))
    return buf.getvalue()


def cmd_sweep(args) -> int:
    _emit(args, sweep_csv(args.d, args.N, args.family, args.seed, _mode(args)))
    return EXIT_OK


def cmd_audit(args) -> int:
    obj = _read_json(args.trace)
    try:
        report = infoflow.audit_trace_dict(obj, d=args.d, mode=args.capacity_mode if args.mode_given else None,
                                           I_exact=args.i_exact, P_e=args.p_e)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"malformed trace: {exc}") from None
    _emit(args, _dump(report.to_dict()))
    return EXIT_OK if report.ok else EXIT_REJECT


def _circuit_params(args, circ) -> tuple:
    meta = circ.meta if circ is not None else {}
    d = args.d if args.d is not None else meta.get("d")
    N = args.N if args.N is not None else meta.get("N")
    family = args.family if args.family is not None else meta.get("family", "CHECKSUM")
    target = args.target if args.target is not None else meta.get("target", 0)
    if d is None or N is None:
        raise UsageError("need --d and --N (or a circuit file with meta)")
    return int(d), int(N), Family(family), int(target)


def cmd_circuit(args) -> int:
    if args.action == "build":
        d, N, family, target = _circuit_params(args, None)
        build = circuit.build_flat_circuit if args.flat else circuit.build_canonical_circuit
        _emit(args, build(d, N, family, target).dumps())
        return EXIT_OK
    if not args.file:
        raise UsageError(f"circuit {args.action} needs a circuit file")
    circ = circuit.LayeredCircuit.from_dict(_read_json(args.file))
    if args.action == "check":
        d, N, family, target = _circuit_params(args, circ)
        result = circuit.check_implements_htr(circ, d, N, family, target, _mode(args), seed=args.seed)
        _emit(args, _dump(result.to_dict()))
        return EXIT_OK if isinstance(result, circuit.CausalCertificate) else EXIT_REJECT
    # eval
    if args.bits is not None:
        bits = [int(c) for c in args.bits.strip()]
        if any(b not in (0, 1) for b in bits):
            raise UsageError("--bits must be a string of 0/1")
    elif args.payload:
        bits = list(instance.payload_from_dict(_read_json(args.payload)).bits)
    elif args.instance:
        bits = list(instance.encode(instance.instance_from_dict(_read_json(args.instance))).bits)
    else:
        raise UsageError("circuit eval needs --bits, --payload or --instance")
    outputs = circuit.evaluate_circuit(circ, bits)
    _emit(args, _dump({"outputs": outputs, "accept": int(all(outputs))}))
    return EXIT_OK


def cmd_mi(args) -> int:
    if args.schedule:
        schedule = causal.parse_schedule(_read_json(args.schedule))
    else:
        schedule = causal.canonical_schedule(args.N)
    T = len(schedule) if args.T is None else args.T
    level = args.N if args.level is None else args.level
    value = infoflow.exact_mutual_information(args.d, args.N, args.family, args.target, schedule, level, T,
                                              _mode(args))
    budget = infoflow.cutset_budget(T, args.d, _mode(args))
    _emit(args, _dump({"d": args.d, "N": args.N, "level": level, "T": T, "I_exact": value,
                       "cutset_budget": budget, "H_M": infoflow.message_entropy(args.d, args.N)}))
    return EXIT_OK


# -------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--capacity-mode", default="routing", choices=["routing", "full"])
    common.add_argument("--unsafe", action="store_true", help="permit illegal actions so violations can be observed")
    common.add_argument("--out", help="output file (default: stdout)")

    parser = argparse.ArgumentParser(prog="htr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate a random instance")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--family", default="CHECKSUM", choices=[f.value for f in Family])
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("encode", parents=[common], help="instance file -> payload file")
    p.add_argument("instance")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", parents=[common], help="payload file -> instance file")
    p.add_argument("payload")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--family", default="CHECKSUM", choices=[f.value for f in Family])
    p.add_argument("--target", type=int, default=0)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("run", parents=[common], help="execute an instance")
    p.add_argument("instance")
    p.add_argument("--mode", default="sequential", choices=["sequential", "causal"])
    p.add_argument("--schedule", help="JSON list of HOP/NOOP/HALT (causal mode)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", parents=[common], help="scaling table over (d, N) as CSV")
    p.add_argument("--d", type=int, nargs="+", default=[2])
    p.add_argument("--N", type=int, nargs="*", default=[1, 2, 3, 4])
    p.add_argument("--family", default="CHECKSUM", choices=[f.value for f in Family])
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("audit", parents=[common], help="audit a causal trace against capacity and cut-set")
    p.add_argument("trace")
    p.add_argument("--d", type=int)
    p.add_argument("--i-exact", type=float)
    p.add_argument("--p-e", type=float, default=0.0)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("circuit", parents=[common], help="build, check or evaluate layered circuits")
    p.add_argument("action", choices=["build", "check", "eval"])
    p.add_argument("file", nargs="?")
    p.add_argument("--d", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--family", choices=[f.value for f in Family])
    p.add_argument("--target", type=int)
    p.add_argument("--flat", action="store_true", help="build the log-depth flat exhibit instead")
    p.add_argument("--bits")
    p.add_argument("--payload")
    p.add_argument("--instance")
    p.set_defaults(func=cmd_circuit)

    p = sub.add_parser("mi", parents=[common], help="exact mutual information by enumeration")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--family", default="CHECKSUM", choices=[f.value for f in Family])
    p.add_argument("--target", type=int, default=0)
    p.add_argument("--schedule")
    p.add_argument("--level", type=int)
    p.add_argument("--T", type=int)
    p.set_defaults(func=cmd_mi)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    args.mode_given = any(a.startswith("--capacity-mode") for a in argv)
    try:
        return args.func(args)
    except (UsageError, InstanceError, circuit.WireError, circuit.AnnotationMissing,
            circuit.UnsupportedBranching, causal.SearchSpaceTooLarge, infoflow.EnumerationTooLarge,
            ConstraintViolation, ValueError, OSError) as exc:
        print(f"htr {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
