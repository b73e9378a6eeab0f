"""Layered Boolean circuits read as causal executions.

Layer ``t`` of a circuit is causal tick ``t``; every wire spans exactly one
layer boundary and every gate has fan-in at most 2.  A circuit *accepts* an
input when all of its output gates evaluate to 1.

Gates may carry a ``token_level`` annotation.  Annotated gates hold the token
state; the checker verifies that the annotated gates trace out a legal HTR
execution (one level per layer, unit advances, locality of routing data and
bounded crossing width).  Unannotated gates are free input taps: they may read
input bits anywhere but may never read token state.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from importlib import resources
from typing import Sequence

import numpy as np

from .causal import CapacityMode, Rule, hop_capacity
from .instance import Family, block_width
from .sequential import run_payload

__all__ = [
    "Op",
    "Gate",
    "LayeredCircuit",
    "WireError",
    "AnnotationMissing",
    "UnsupportedBranching",
    "CausalCertificate",
    "ViolationReport",
    "validate_circuit",
    "evaluate_batch",
    "evaluate_circuit",
    "circuit_accepts",
    "build_canonical_circuit",
    "build_flat_circuit",
    "strip_annotations",
    "check_implements_htr",
    "load_flat_exhibit",
    "FUNCTIONAL_SAMPLES",
]

FUNCTIONAL_SAMPLES = 10_000
_EXHAUSTIVE_CAP = 4096


class Op(str, Enum):
    AND = "AND"
    OR = "OR"
    XOR = "XOR"
    XNOR = "XNOR"
    NOT = "NOT"
    COPY = "COPY"
    CONST = "CONST"
    INPUT = "INPUT"


ARITY = {Op.AND: 2, Op.OR: 2, Op.XOR: 2, Op.XNOR: 2, Op.NOT: 1, Op.COPY: 1, Op.CONST: 0, Op.INPUT: 0}


class WireError(ValueError):
    pass


class AnnotationMissing(ValueError):
    pass


class UnsupportedBranching(ValueError):
    pass


@dataclass(frozen=True)
class Gate:
    op: Op
    inputs: tuple[int, ...] = ()
    input_bit: int | None = None
    value: int | None = None
    token_level: int | None = None

    def to_dict(self) -> dict:
        out = {"op": self.op.value, "inputs": list(self.inputs)}
        if self.input_bit is not None:
            out["input_bit"] = self.input_bit
        if self.value is not None:
            out["value"] = self.value
        if self.token_level is not None:
            out["token_level"] = self.token_level
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "Gate":
        try:
            op = Op(str(obj["op"]).upper())
        except (KeyError, ValueError):
            raise WireError(f"bad gate op in {obj!r}") from None
        return cls(
            op=op,
            inputs=tuple(int(i) for i in obj.get("inputs", ())),
            input_bit=obj.get("input_bit"),
            value=obj.get("value"),
            token_level=obj.get("token_level"),
        )


@dataclass
class LayeredCircuit:
    layers: list[list[Gate]]
    outputs: list[int]
    meta: dict = field(default_factory=dict)

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def annotated(self) -> bool:
        return any(g.token_level is not None for layer in self.layers for g in layer)

    def n_input_bits(self) -> int:
        bits = [g.input_bit for layer in self.layers for g in layer if g.op is Op.INPUT]
        return 1 + max(bits) if bits else 0

    def to_dict(self) -> dict:
        out = {"layers": [[g.to_dict() for g in layer] for layer in self.layers],
               "outputs": list(self.outputs)}
        if self.meta:
            out["meta"] = dict(self.meta)
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "LayeredCircuit":
        try:
            layers = [[Gate.from_dict(g) for g in layer] for layer in obj["layers"]]
            outputs = [int(i) for i in obj["outputs"]]
        except (KeyError, TypeError):
            raise WireError("circuit object needs 'layers' and 'outputs'") from None
        return cls(layers, outputs, dict(obj.get("meta", {})))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True) + "\n"


def validate_circuit(circuit: LayeredCircuit, n_bits: int | None = None) -> None:
    """Structural checks; raises :class:`WireError` on the first problem."""
    if not circuit.layers:
        raise WireError("circuit has no layers")
    for t, layer in enumerate(circuit.layers):
        prev = len(circuit.layers[t - 1]) if t > 0 else 0
        for k, g in enumerate(layer):
            if len(g.inputs) != ARITY[g.op]:
                raise WireError(f"layer {t} gate {k}: {g.op.value} takes {ARITY[g.op]} inputs, got {len(g.inputs)}")
            for src in g.inputs:
                if not 0 <= src < prev:
                    raise WireError(f"layer {t} gate {k}: dangling input {src}")
            if g.op is Op.INPUT:
                if g.input_bit is None or g.input_bit < 0:
                    raise WireError(f"layer {t} gate {k}: INPUT without bit index")
                if n_bits is not None and g.input_bit >= n_bits:
                    raise WireError(f"layer {t} gate {k}: input bit {g.input_bit} beyond {n_bits} supplied")
            if g.op is Op.CONST and g.value not in (0, 1):
                raise WireError(f"layer {t} gate {k}: CONST needs value 0 or 1")
    last = len(circuit.layers[-1])
    if not circuit.outputs:
        raise WireError("circuit has no outputs")
    for o in circuit.outputs:
        if not 0 <= o < last:
            raise WireError(f"output {o} is not a gate of the final layer")


def evaluate_batch(circuit: LayeredCircuit, inputs: np.ndarray) -> np.ndarray:
    """Evaluate on many inputs at once.

    ``inputs`` has shape ``(n, n_bits)``; the result has shape
    ``(n, len(outputs))`` with dtype ``uint8``.
    """
    X = np.atleast_2d(np.asarray(inputs, dtype=bool))
    validate_circuit(circuit, X.shape[1])
    n = X.shape[0]
    prev: list[np.ndarray] = []
    for layer in circuit.layers:
        cur = []
        for g in layer:
            a = [prev[i] for i in g.inputs]
            if g.op is Op.INPUT:
                v = X[:, g.input_bit]
            elif g.op is Op.CONST:
                v = np.full(n, bool(g.value))
            elif g.op is Op.COPY:
                v = a[0]
            elif g.op is Op.NOT:
                v = ~a[0]
            elif g.op is Op.AND:
                v = a[0] & a[1]
            elif g.op is Op.OR:
                v = a[0] | a[1]
            elif g.op is Op.XOR:
                v = a[0] ^ a[1]
            else:
                v = ~(a[0] ^ a[1])
            cur.append(v)
        prev = cur
    return np.stack([prev[o] for o in circuit.outputs], axis=1).astype(np.uint8)


def evaluate_circuit(circuit: LayeredCircuit, input_bits: Sequence[int]) -> list[int]:
    return [int(v) for v in evaluate_batch(circuit, np.asarray([list(input_bits)]))[0]]


def circuit_accepts(circuit: LayeredCircuit, input_bits: Sequence[int]) -> int:
    return int(all(evaluate_circuit(circuit, input_bits)))


def strip_annotations(circuit: LayeredCircuit) -> LayeredCircuit:
    layers = [[Gate(g.op, g.inputs, g.input_bit, g.value, None) for g in layer] for layer in circuit.layers]
    return LayeredCircuit(layers, list(circuit.outputs), dict(circuit.meta))


# ---------------------------------------------------------------- builders

class _Builder:
    """Appends steps to a circuit, turning small gate DAGs into strict layers.

    A step is a dict ``name -> (op, (arg, ...))``.  Arguments name either a
    live signal of the current last layer, another node of the step, or an
    input bit written ``("in", bit)``.  Each node sits at its longest-path
    depth; values needed later are forwarded by COPY gates, and input bits are
    tapped by unannotated INPUT gates in the layer just before their reader.
    """

    def __init__(self):
        self.layers: list[list[Gate]] = [[]]
        self.live: dict[str, int] = {}

    def add(self, t: int, gate: Gate) -> int:
        self.layers[t].append(gate)
        return len(self.layers[t]) - 1

    def seed(self, name: str, gate: Gate) -> None:
        self.live[name] = self.add(0, gate)

    def step(self, nodes: dict, outputs: Sequence[str], level: int) -> None:
        depth: dict = {}

        def dep(x) -> int:
            if isinstance(x, tuple) or x in self.live:
                return 0
            if x not in depth:
                depth[x] = 1 + max(dep(a) for a in nodes[x][1])
            return depth[x]

        K = max(dep(o) for o in outputs)
        req: dict[int, dict] = {K: dict.fromkeys(outputs)}
        taps: dict[int, dict] = {}
        for k in range(K, 0, -1):
            req[k - 1] = {}
            taps[k - 1] = {}
            for v in req[k]:
                if v in nodes and depth[v] == k:
                    for a in nodes[v][1]:
                        (taps if isinstance(a, tuple) else req)[k - 1][a] = None
                else:
                    req[k - 1][v] = None
        base = len(self.layers) - 1
        idx = {0: dict(self.live)}
        tap_idx = {}
        self.layers.extend([] for _ in range(K))
        for k in range(1, K + 1):
            tap_idx[k - 1] = {a: self.add(base + k - 1, Gate(Op.INPUT, input_bit=a[1])) for a in taps[k - 1]}
            idx[k] = {}
            for v in req[k]:
                if v in nodes and depth[v] == k:
                    op, args = nodes[v]
                    srcs = tuple(tap_idx[k - 1][a] if isinstance(a, tuple) else idx[k - 1][a] for a in args)
                    gate = Gate(op, srcs, token_level=level)
                else:
                    gate = Gate(Op.COPY, (idx[k - 1][v],), token_level=level)
                idx[k][v] = self.add(base + k, gate)
        self.live = {o: idx[K][o] for o in outputs}


def _reduce(nodes: dict, leaves: list, op: Op, prefix: str, root_op: Op | None = None):
    """Balanced fan-in-2 tree over ``leaves``; returns the root name."""
    level = 0
    while len(leaves) > 1:
        nxt = []
        for k in range(0, len(leaves) - 1, 2):
            name = f"{prefix}{level}_{k}"
            last = len(leaves) == 2
            nodes[name] = ((root_op or op) if last else op, (leaves[k], leaves[k + 1]))
            nxt.append(name)
        if len(leaves) % 2:
            nxt.append(leaves[-1])
        leaves = nxt
        level += 1
    return leaves[0]


def _bit_index(i: int, j: int, w: int) -> tuple:
    """Input bit holding bit ``j`` (LSB = 0) of block ``i`` (1-based)."""
    return ("in", 1 + (i - 1) * w + (w - 1 - j))


def _checksum_step(i: int, w: int, final: bool, target: int):
    nodes: dict = {}
    s = [f"s{j}" for j in range(w)]
    a = [_bit_index(i, j, w) for j in range(w)]
    out_def = {}
    for j in range(w):
        nodes[f"g{j}"] = (Op.AND, (s[j], a[j]))
    out_def[0] = (s[0], a[0])
    carry = "g0"
    for j in range(1, w):
        nodes[f"p{j}"] = (Op.XOR, (s[j], a[j]))
        out_def[j] = (f"p{j}", carry)
        if j < w - 1:
            nodes[f"c{j}"] = (Op.AND, (f"p{j}", carry))
            nodes[f"k{j}"] = (Op.OR, (f"g{j}", f"c{j}"))
            carry = f"k{j}"
    if not final:
        for j in range(w):
            nodes[f"n{j}"] = (Op.XOR, out_def[j])
        return nodes, [f"n{j}" for j in range(w)]
    for j in range(w):
        want = (target >> j) & 1
        nodes[f"e{j}"] = (Op.XOR if want else Op.XNOR, out_def[j])
    root = _reduce(nodes, [f"e{j}" for j in range(w)], Op.AND, "and")
    return nodes, [root]


def _parity_step(i: int, w: int, final: bool, target: int):
    nodes: dict = {}
    leaves = ["s0"] + [_bit_index(i, j, w) for j in range(w)]
    if final:
        root = _reduce(nodes, leaves, Op.XOR, "x", root_op=Op.XOR if target else Op.XNOR)
    else:
        root = _reduce(nodes, leaves, Op.XOR, "x")
    return nodes, [root]


def build_canonical_circuit(d: int, N: int, family=Family.CHECKSUM, target: int = 0) -> LayeredCircuit:
    """Token-annotated circuit that walks the token one level per step.

    For ``d == 2`` every step is a single layer, giving depth ``N + 1``.
    Wider blocks need a short plateau of layers per step (ripple carry or an
    XOR tree) during which the token stays at the same level.  Outputs are
    the final check and the header bit.
    """
    family = Family(family)
    if d < 2 or d & (d - 1):
        raise UnsupportedBranching(f"d={d} is not a power of two")
    if N < 1:
        raise ValueError("N must be >= 1")
    w = block_width(d)
    b = _Builder()
    width = w if family is Family.CHECKSUM else 1
    for j in range(width):
        b.seed(f"s{j}", Gate(Op.CONST, value=0, token_level=0))
    make = _checksum_step if family is Family.CHECKSUM else _parity_step
    for i in range(1, N + 1):
        nodes, outs = make(i, w, i == N, target)
        b.step(nodes, outs, level=i)
        if i < N:
            b.live = {f"s{j}": b.live[o] for j, o in enumerate(outs)}
    check = b.live[outs[0]]
    header = b.add(len(b.layers) - 1, Gate(Op.INPUT, input_bit=0, token_level=N))
    meta = {"d": d, "N": N, "family": family.value, "target": target, "kind": "canonical"}
    return LayeredCircuit(b.layers, [check, header], meta)


def build_flat_circuit(d: int, N: int, family=Family.CHECKSUM, target: int = 0) -> LayeredCircuit:
    """Log-depth XOR tree over all address bits, for ``d == 2``.

    Functionally equal to the HTR predicate, but its token claim advances as
    fast as the tree aggregates blocks (level ``min(N, 2**t)`` at layer t).
    """
    family = Family(family)
    if d != 2:
        raise UnsupportedBranching("flat exhibits are built for d=2 only")
    layers: list[list[Gate]] = [[Gate(Op.INPUT, input_bit=0, token_level=0)]]
    for k in range(1, N + 1):
        layers[0].append(Gate(Op.INPUT, input_bit=k))
    cur = list(range(1, N + 1))
    header = 0
    t = 0
    if len(cur) == 1:
        op = Op.COPY if target else Op.NOT
        layers.append([Gate(op, (cur[0],), token_level=N), Gate(Op.COPY, (header,), token_level=N)])
    while len(cur) > 1:
        t += 1
        last = len(cur) <= 2
        level = N if last else min(N, 2 ** t)
        layer: list[Gate] = []
        nxt = []
        for k in range(0, len(cur) - 1, 2):
            op = (Op.XOR if target else Op.XNOR) if last else Op.XOR
            layer.append(Gate(op, (cur[k], cur[k + 1]), token_level=level))
            nxt.append(len(layer) - 1)
        if len(cur) % 2:
            layer.append(Gate(Op.COPY, (cur[-1],), token_level=level))
            nxt.append(len(layer) - 1)
        layer.append(Gate(Op.COPY, (header,), token_level=level))
        header = len(layer) - 1
        layers.append(layer)
        cur = nxt
    outputs = [0, len(layers[-1]) - 1]
    meta = {"d": d, "N": N, "family": family.value, "target": target, "kind": "flat"}
    return LayeredCircuit(layers, outputs, meta)


def load_flat_exhibit(N: int, target: int = 0) -> LayeredCircuit:
    """Bundled flat circuit for ``d = 2``, CHECKSUM."""
    name = f"flat_d2_N{N}_t{target}.json"
    text = resources.files("htrelay").joinpath("data", name).read_text()
    return LayeredCircuit.from_dict(json.loads(text))


# ----------------------------------------------------------------- checker

@dataclass
class CausalCertificate:
    token_trajectory: list[int]
    crossings: list[tuple[int, int, int]]
    depth: int
    verdict: str = "IMPLEMENTS"

    def to_dict(self) -> dict:
        out = asdict(self)
        out["crossings"] = [{"layer": l, "boundary": b, "bits": n} for l, b, n in self.crossings]
        return out


@dataclass
class ViolationReport:
    layer: int
    rule: Rule
    detail: str
    depth: int
    verdict: str = "VIOLATION"

    def to_dict(self) -> dict:
        return {"layer": self.layer, "rule": self.rule.value, "detail": self.detail,
                "depth": self.depth, "verdict": self.verdict}


def _all_inputs(n_bits: int) -> np.ndarray:
    codes = np.arange(2 ** n_bits, dtype=np.int64)
    shifts = np.arange(n_bits - 1, -1, -1, dtype=np.int64)
    return ((codes[:, None] >> shifts) & 1).astype(np.uint8)


def _functional_inputs(d: int, N: int, samples: int, seed: int) -> np.ndarray:
    n_bits = 1 + N * block_width(d)
    if d ** N <= _EXHAUSTIVE_CAP:
        return _all_inputs(n_bits)
    rng = np.random.default_rng(seed)
    return rng.integers(0, 2, size=(samples, n_bits), dtype=np.uint8)


def check_implements_htr(circuit: LayeredCircuit, d: int, N: int, family=Family.CHECKSUM, target: int = 0,
                         capacity_mode=CapacityMode.ROUTING_ONLY, samples: int = FUNCTIONAL_SAMPLES,
                         seed: int = 0) -> CausalCertificate | ViolationReport:
    """Certify or refute that ``circuit`` implements the HTR process.

    Checks, in order: functional agreement with the sequential reference
    (exhaustive when ``d**N <= 4096``, else ``samples`` seeded inputs); a
    well-formed token trajectory; locality of every token gate's inputs and
    the width of each boundary crossing.

    Raises :class:`AnnotationMissing` if no gate carries a token claim.
    """
    family = Family(family)
    mode = CapacityMode.parse(capacity_mode)
    w = block_width(d)
    n_bits = 1 + N * w
    validate_circuit(circuit, n_bits)
    if not circuit.annotated:
        raise AnnotationMissing("circuit carries no token annotations")
    depth = circuit.depth
    layers = circuit.layers

    # (a) functional agreement
    X = _functional_inputs(d, N, samples, seed)
    got = evaluate_batch(circuit, X).all(axis=1)
    for row, g in zip(X, got):
        want = run_payload(tuple(int(b) for b in row), d, N, family, target).accepted
        if bool(g) != want:
            bits = "".join(map(str, row))
            return ViolationReport(depth - 1, Rule.FUNCTIONAL_MISMATCH,
                                   f"input {bits}: circuit {int(g)}, reference {int(want)}", depth)

    # (b) token trajectory
    trajectory: list[int] = []
    for t, layer in enumerate(layers):
        levels = {g.token_level for g in layer if g.token_level is not None}
        if not levels:
            return ViolationReport(t, Rule.NO_TOKEN_ANNOTATION, "no gate holds the token", depth)
        if len(levels) > 1:
            return ViolationReport(t, Rule.TOKEN_DUPLICATION, f"token claimed at levels {sorted(levels)}", depth)
        (L,) = levels
        if t == 0 and L != 0:
            return ViolationReport(t, Rule.BYPASS_BOUNDARY, f"token starts at level {L}, not 0", depth)
        if t > 0:
            step = L - trajectory[-1]
            if step > 1:
                return ViolationReport(t, Rule.MULTI_HOP_PER_TICK,
                                       f"token advanced {trajectory[-1]} -> {L} in one layer", depth)
            if step < 0:
                return ViolationReport(t, Rule.BYPASS_BOUNDARY, f"token moved back {trajectory[-1]} -> {L}", depth)
        trajectory.append(L)
    if trajectory[-1] != N:
        return ViolationReport(depth - 1, Rule.BYPASS_BOUNDARY,
                               f"token ends at level {trajectory[-1]}, not {N}", depth)
    for o in circuit.outputs:
        if layers[-1][o].token_level is None:
            return ViolationReport(depth - 1, Rule.BYPASS_BOUNDARY, f"output {o} is computed off the token", depth)

    # (c) locality and crossing width
    def block_of(bit: int) -> int:
        return 0 if bit == 0 else (bit - 1) // w + 1

    capacity = hop_capacity(d, mode)
    deps_prev: list[frozenset] = []
    crossings = []
    for t, layer in enumerate(layers):
        L = trajectory[t]
        deps_cur = []
        routing, state = set(), set()
        for k, g in enumerate(layer):
            if g.op is Op.INPUT:
                deps = frozenset({block_of(g.input_bit)})
            else:
                deps = frozenset().union(*(deps_prev[i] for i in g.inputs)) if g.inputs else frozenset()
            deps_cur.append(deps)
            token = g.token_level is not None
            if token and g.op is Op.INPUT and not deps <= {0, L}:
                return ViolationReport(t, Rule.NONLOCAL_DEPENDENCE,
                                       f"gate {k} at level {L} reads block {block_of(g.input_bit)}", depth)
            for src in g.inputs:
                src_token = layers[t - 1][src].token_level is not None
                if not token and src_token:
                    return ViolationReport(t, Rule.TOKEN_DUPLICATION,
                                           f"off-token gate {k} copies token state from gate {src}", depth)
                if token and not src_token:
                    if not deps_prev[src] <= {0, L}:
                        return ViolationReport(
                            t, Rule.NONLOCAL_DEPENDENCE,
                            f"gate {k} at level {L} reads blocks {sorted(deps_prev[src])}", depth)
                    if L in deps_prev[src] and L > 0:
                        routing.add(src)
                elif token:
                    state.add(src)
        if t > 0 and L == trajectory[t - 1] + 1:
            bits = len(routing) + (len(state) if mode is CapacityMode.FULL else 0)
            if bits > capacity:
                return ViolationReport(t, Rule.CAPACITY_EXCEEDED,
                                       f"{bits} wires cross boundary {L - 1}->{L}, capacity {capacity}", depth)
            crossings.append((t, L - 1, bits))
        deps_prev = deps_cur

    return CausalCertificate(trajectory, crossings, depth)
