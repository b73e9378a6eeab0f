"""Reference sequential execution: one predicate evaluation per handoff.

Families
--------
CHECKSUM
    ``s_1 = 0``; intermediate steps accept any in-range digit and move to
    ``(s + a) mod d``; the last step also requires ``(s + a) mod d == target``.
PARITY
    ``s_1 = 0``; intermediate steps accept any in-range digit and move to
    ``s XOR parity(a)``; the last step also requires that value to equal
    ``target``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .instance import BitPayload, Family, HtrInstance, block_width, new_instance

__all__ = [
    "ACCEPT",
    "REJECT",
    "StepRecord",
    "ExecutionTrace",
    "initial_state",
    "eval_predicate",
    "transition",
    "run_sequential",
    "run_blocks",
    "run_payload",
    "accepting_target",
    "with_accepting_target",
]

ACCEPT = "ACCEPT"
REJECT = "REJECT"


@dataclass(frozen=True)
class StepRecord:
    step: int
    state_before: int
    digit: int
    predicate_result: int
    state_after: int | None

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "state_before": self.state_before,
            "digit": self.digit,
            "predicate_result": self.predicate_result,
            "state_after": self.state_after,
        }


@dataclass
class ExecutionTrace:
    steps: list[StepRecord] = field(default_factory=list)
    outcome: str = REJECT
    reject_step: int | None = None

    @property
    def accepted(self) -> bool:
        return self.outcome == ACCEPT

    @property
    def handoff_count(self) -> int:
        """Number of successful validations."""
        return sum(r.predicate_result for r in self.steps)

    @property
    def predicate_evaluations(self) -> int:
        return len(self.steps)

    def to_dict(self) -> dict:
        return {
            "steps": [r.to_dict() for r in self.steps],
            "outcome": self.outcome,
            "reject_step": self.reject_step,
            "handoff_count": self.handoff_count,
        }


def _parity(x: int) -> int:
    return bin(x).count("1") & 1


def initial_state(family) -> int:
    return 0


def eval_predicate(family, i: int, N: int, state: int, digit: int, d: int, target: int) -> int:
    """``f_i(s, a_i)`` for the given family; out-of-range digits yield 0."""
    if not 0 <= digit < d:
        return 0
    if i < N:
        return 1
    return int(transition(family, i, state, digit, d) == target)


def transition(family, i: int, state: int, digit: int, d: int) -> int:
    if Family(family) is Family.CHECKSUM:
        return (state + digit) % d
    return state ^ _parity(digit)


def run_blocks(digits: Sequence[int], d: int, N: int, family, target: int) -> ExecutionTrace:
    """Execute on raw block values, which may exceed ``d - 1``.

    Halts at the first failing predicate; the number of predicate evaluations
    equals the index of that step, or ``N``.
    """
    family = Family(family)
    if len(digits) != N:
        raise ValueError(f"expected {N} blocks, got {len(digits)}")
    trace = ExecutionTrace()
    state = initial_state(family)
    for i, a in enumerate(digits, start=1):
        ok = eval_predicate(family, i, N, state, a, d, target)
        if not ok:
            trace.steps.append(StepRecord(i, state, a, 0, None))
            trace.outcome = REJECT
            trace.reject_step = i
            return trace
        nxt = transition(family, i, state, a, d)
        trace.steps.append(StepRecord(i, state, a, 1, nxt))
        state = nxt
    trace.outcome = ACCEPT
    return trace


def run_sequential(instance: HtrInstance) -> ExecutionTrace:
    return run_blocks(instance.address, instance.d, instance.N, instance.family, instance.target)


def run_payload(payload: BitPayload | Sequence[int], d: int, N: int, family, target: int) -> ExecutionTrace:
    """Run directly on a canonical bit string.

    A zero header rejects at step 0 before any predicate is evaluated. The
    payload length must match ``1 + N * w``.
    """
    bits = payload.bits if isinstance(payload, BitPayload) else tuple(payload)
    w = block_width(d)
    if len(bits) != 1 + N * w:
        raise ValueError(f"payload has {len(bits)} bits, expected {1 + N * w}")
    if bits[0] != 1:
        return ExecutionTrace(outcome=REJECT, reject_step=0)
    digits = []
    for i in range(N):
        value = 0
        for b in bits[1 + i * w: 1 + (i + 1) * w]:
            value = (value << 1) | b
        digits.append(value)
    return run_blocks(digits, d, N, family, target)


def accepting_target(d: int, address: Sequence[int], family) -> int:
    """The target value that makes ``address`` accept."""
    family = Family(family)
    state = initial_state(family)
    for i, a in enumerate(address, start=1):
        state = transition(family, i, state, a, d)
    return state


def with_accepting_target(instance: HtrInstance) -> HtrInstance:
    t = accepting_target(instance.d, instance.address, instance.family)
    return new_instance(instance.d, instance.N, instance.address, instance.family, t)
