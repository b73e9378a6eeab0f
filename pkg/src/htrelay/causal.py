"""Execution of HTR instances under explicit causal time.

A :class:`CausalWorld` is an immutable snapshot of one run: the tick counter,
where the (single) token is, what each level has received, and the bit ledger
for every boundary crossing.  Schedulers only choose *when* the token moves;
the branch it takes is always dictated by the instance address.

Legal actions are HOP, NOOP and HALT.  With ``unsafe=True`` the engine also
accepts a handful of deliberately illegal actions so that every
:class:`Rule` can be triggered and observed:

======================  ===============================================
action                  rule it breaks
======================  ===============================================
``DUPLICATE``           TOKEN_DUPLICATION (token state cloned)
``DOUBLE_HOP``          MULTI_HOP_PER_TICK (two boundaries in one tick)
``LEAK``                BYPASS_BOUNDARY (bits delivered without token)
``OVERSEND``            CAPACITY_EXCEEDED (crossing carries > C bits)
any action after HALT   ACTION_AFTER_HALT
======================  ===============================================

Detection does not look at the action name; :func:`check_transition`
compares consecutive worlds only.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .instance import HtrInstance, block_width, state_space_size
from .sequential import ACCEPT, REJECT, eval_predicate, initial_state, transition

__all__ = [
    "Action",
    "LEGAL_ACTIONS",
    "CapacityMode",
    "Rule",
    "ConstraintViolation",
    "SearchSpaceTooLarge",
    "CausalWorld",
    "TickRecord",
    "CausalTrace",
    "hop_capacity",
    "routing_bits",
    "init_world",
    "apply_tick",
    "check_transition",
    "run_schedule",
    "canonical_schedule",
    "parse_schedule",
    "completion_times",
    "min_causal_time",
    "level_view",
    "T_MAX_CAP",
]

T_MAX_CAP = 16


class Action(str, Enum):
    HOP = "HOP"
    NOOP = "NOOP"
    HALT = "HALT"
    DUPLICATE = "DUPLICATE"
    DOUBLE_HOP = "DOUBLE_HOP"
    LEAK = "LEAK"
    OVERSEND = "OVERSEND"


LEGAL_ACTIONS = frozenset({Action.HOP, Action.NOOP, Action.HALT})


class CapacityMode(str, Enum):
    ROUTING_ONLY = "ROUTING_ONLY"
    FULL = "FULL"

    @classmethod
    def parse(cls, value) -> "CapacityMode":
        if isinstance(value, cls):
            return value
        aliases = {"routing": cls.ROUTING_ONLY, "full": cls.FULL}
        key = str(value)
        return aliases.get(key.lower()) or cls(key.upper())


class Rule(str, Enum):
    TOKEN_DUPLICATION = "TOKEN_DUPLICATION"
    MULTI_HOP_PER_TICK = "MULTI_HOP_PER_TICK"
    BYPASS_BOUNDARY = "BYPASS_BOUNDARY"
    CAPACITY_EXCEEDED = "CAPACITY_EXCEEDED"
    ACTION_AFTER_HALT = "ACTION_AFTER_HALT"
    # raised only by the circuit checker
    NO_TOKEN_ANNOTATION = "NO_TOKEN_ANNOTATION"
    NONLOCAL_DEPENDENCE = "NONLOCAL_DEPENDENCE"
    FUNCTIONAL_MISMATCH = "FUNCTIONAL_MISMATCH"


class ConstraintViolation(Exception):
    """An attempted step that breaks a causal constraint.

    ``world`` holds the offending post-state when the engine ran in unsafe
    mode and actually performed the illegal action.
    """

    def __init__(self, tick: int, rule: Rule, detail: str = "", world: "CausalWorld | None" = None):
        self.tick = tick
        self.rule = Rule(rule)
        self.detail = detail
        self.world = world
        super().__init__(f"tick {tick}: {self.rule.value}: {detail}")

    def to_dict(self) -> dict:
        return {"tick": self.tick, "rule": self.rule.value, "detail": self.detail}


class SearchSpaceTooLarge(ValueError):
    pass


def hop_capacity(d: int, mode=CapacityMode.ROUTING_ONLY) -> int:
    """Bits one crossing may carry: routing block, plus token state in FULL mode."""
    mode = CapacityMode.parse(mode)
    w = block_width(d)
    if mode is CapacityMode.ROUTING_ONLY:
        return w
    return w + math.ceil(math.log2(state_space_size(d)))


def _bits(value: int, width: int) -> str:
    return format(value, f"0{width}b") if width else ""


def routing_bits(instance: HtrInstance) -> str:
    """Concatenated address blocks (the canonical payload minus its header)."""
    return "".join(_bits(a, instance.w) for a in instance.address)


@dataclass(frozen=True)
class CausalWorld:
    tick: int
    token_level: int
    token_state: int
    views: tuple[tuple[tuple[int, str], ...], ...]
    crossings: tuple[tuple[int, int, int], ...] = ()
    token_copies: int = 1
    halted: str | None = None
    outcome: str | None = None

    @property
    def N(self) -> int:
        return len(self.views) - 1

    def ledger_matrix(self) -> np.ndarray:
        """Bits per (boundary, tick); row ``i`` is boundary ``i -> i+1``."""
        out = np.zeros((self.N, self.tick), dtype=np.int64)
        for t, b, nbits in self.crossings:
            if 0 <= b < self.N and 0 <= t < self.tick:
                out[b, t] += nbits
        return out

    def ledger_row(self, t: int) -> list[int]:
        row = [0] * self.N
        for tt, b, nbits in self.crossings:
            if tt == t and 0 <= b < self.N:
                row[b] += nbits
        return row


def init_world(instance: HtrInstance) -> CausalWorld:
    """Token at the root with the initial state; only level 0 knows the address."""
    views = ((0, routing_bits(instance)),), *(() for _ in range(instance.N))
    return CausalWorld(
        tick=0,
        token_level=0,
        token_state=initial_state(instance.family),
        views=tuple(views),
    )


def _cross(world, instance, mode, t, views, crossings, level, state, extra=""):
    """Attempt the handoff from ``level`` to ``level + 1`` at tick ``t``.

    Returns ``(crossed, ok, new_state, views, crossings)``.  Intermediate
    predicate failures keep the token where it is.  At the final step the
    token is delivered to the leaf whenever ``a_N`` names a real branch, and
    the terminal predicate only decides the verdict.
    """
    N, d = instance.N, instance.d
    step = level + 1
    digit = instance.address[level]
    ok = eval_predicate(instance.family, step, N, state, digit, d, instance.target)
    if not ok and (step < N or not 0 <= digit < d):
        return False, False, state, views, crossings
    new_state = transition(instance.family, step, state, digit, d)
    payload = _bits(digit, instance.w)
    if mode is CapacityMode.FULL:
        payload += _bits(new_state, math.ceil(math.log2(state_space_size(d))))
    payload += extra
    views = views[:step] + (views[step] + ((t, payload),),) + views[step + 1:]
    crossings = crossings + ((t, level, len(payload)),)
    return True, bool(ok), new_state, views, crossings


def _perform(world: CausalWorld, action: Action, instance: HtrInstance, mode: CapacityMode) -> CausalWorld:
    t = world.tick
    N = instance.N
    level = world.token_level
    if action is Action.NOOP:
        return replace(world, tick=t + 1)
    if action is Action.HALT:
        return replace(world, tick=t + 1, halted="HALT")
    if action is Action.DUPLICATE:
        return replace(world, tick=t + 1, token_copies=world.token_copies + 1)

    hops = 2 if action is Action.DOUBLE_HOP else 1
    if level + hops > N:
        raise ConstraintViolation(t, Rule.BYPASS_BOUNDARY,
                                  f"{action.value} from level {level}: no boundary beyond level {N}")
    views, crossings = world.views, world.crossings

    if action is Action.LEAK:
        digit = instance.address[level]
        payload = _bits(digit, instance.w)
        views = views[:level + 1] + (views[level + 1] + ((t, payload),),) + views[level + 2:]
        crossings = crossings + ((t, level, len(payload)),)
        return replace(world, tick=t + 1, views=views, crossings=crossings)

    extra = ""
    if action is Action.OVERSEND:
        extra = _bits(instance.address[level + 1], instance.w) if level + 1 < N else _bits(instance.address[level], instance.w)

    state = world.token_state
    for k in range(hops):
        crossed, ok, state, views, crossings = _cross(world, instance, mode, t, views, crossings, level, state, extra)
        if not crossed:
            return replace(world, tick=t + 1, views=views, crossings=crossings, token_level=level,
                           token_state=state, halted=REJECT, outcome=REJECT)
        level += 1
        if level == N:
            return replace(world, tick=t + 1, views=views, crossings=crossings, token_level=level,
                           token_state=state, outcome=ACCEPT if ok else REJECT)
    return replace(world, tick=t + 1, views=views, crossings=crossings, token_level=level, token_state=state)


def check_transition(prev: CausalWorld, new: CausalWorld, capacity: int) -> None:
    """Raise :class:`ConstraintViolation` if ``prev -> new`` breaks a constraint.

    Only the two snapshots are inspected, never the action that produced them.
    """
    t = prev.tick
    if new.token_copies > 1:
        raise ConstraintViolation(t, Rule.TOKEN_DUPLICATION, f"{new.token_copies} token copies", new)
    if new.token_level - prev.token_level > 1:
        raise ConstraintViolation(
            t, Rule.MULTI_HOP_PER_TICK,
            f"token moved {prev.token_level} -> {new.token_level} in one tick", new)
    fresh = new.crossings[len(prev.crossings):]
    if new.token_level < prev.token_level:
        raise ConstraintViolation(t, Rule.BYPASS_BOUNDARY, "token moved backwards", new)
    if len(fresh) > 1:
        raise ConstraintViolation(t, Rule.BYPASS_BOUNDARY, f"{len(fresh)} crossings in one tick", new)
    for tt, b, nbits in fresh:
        if tt != t or b != prev.token_level or new.token_level != b + 1:
            raise ConstraintViolation(
                t, Rule.BYPASS_BOUNDARY,
                f"bits crossed boundary {b}->{b + 1} without the token crossing it", new)
    for j in range(new.token_level + 1, len(new.views)):
        if new.views[j]:
            raise ConstraintViolation(t, Rule.BYPASS_BOUNDARY, f"level {j} received bits before the token", new)
    for tt, b, nbits in fresh:
        if nbits > capacity:
            raise ConstraintViolation(
                t, Rule.CAPACITY_EXCEEDED, f"{nbits} bits across boundary {b}->{b + 1}, capacity {capacity}", new)


def apply_tick(world: CausalWorld, action, instance: HtrInstance,
               capacity_mode=CapacityMode.ROUTING_ONLY, unsafe: bool = False) -> CausalWorld:
    """Advance the world by one causal tick.

    Raises :class:`ConstraintViolation` for illegal steps.  Actions outside
    :data:`LEGAL_ACTIONS` are refused with ``ValueError`` unless ``unsafe``.
    """
    action = Action(action)
    mode = CapacityMode.parse(capacity_mode)
    if action not in LEGAL_ACTIONS and not unsafe:
        raise ValueError(f"action {action.value} requires unsafe mode")
    if world.halted is not None:
        raise ConstraintViolation(world.tick, Rule.ACTION_AFTER_HALT,
                                  f"{action.value} after run halted ({world.halted})")
    new = _perform(world, action, instance, mode)
    check_transition(world, new, hop_capacity(instance.d, mode))
    return new


@dataclass(frozen=True)
class TickRecord:
    tick: int
    action: str
    token_level: int
    ledger: tuple[int, ...]

    def to_dict(self) -> dict:
        return {"tick": self.tick, "action": self.action, "token_level": self.token_level,
                "ledger": list(self.ledger)}


@dataclass
class CausalTrace:
    instance: HtrInstance
    capacity_mode: CapacityMode
    world: CausalWorld
    records: list[TickRecord] = field(default_factory=list)
    violation: ConstraintViolation | None = None

    @property
    def outcome(self) -> str | None:
        return self.world.outcome

    @property
    def T(self) -> int:
        return len(self.records)

    @property
    def T_complete(self) -> int | None:
        if self.world.outcome != ACCEPT:
            return None
        for r in self.records:
            if r.token_level == self.instance.N:
                return r.tick + 1
        return None

    def ledger_matrix(self) -> np.ndarray:
        if not self.records:
            return np.zeros((self.instance.N, 0), dtype=np.int64)
        return np.array([r.ledger for r in self.records], dtype=np.int64).T

    def to_dict(self) -> dict:
        from .instance import instance_to_dict

        return {
            "instance": instance_to_dict(self.instance),
            "d": self.instance.d,
            "N": self.instance.N,
            "capacity_mode": self.capacity_mode.value,
            "ticks": [r.to_dict() for r in self.records],
            "outcome": self.outcome,
            "T_complete": self.T_complete,
            "violation": None if self.violation is None else self.violation.to_dict(),
        }


def parse_schedule(items: Iterable) -> tuple[Action, ...]:
    return tuple(a if isinstance(a, Action) else Action(str(a).upper()) for a in items)


def canonical_schedule(N: int) -> tuple[Action, ...]:
    """``N`` consecutive hops."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return (Action.HOP,) * N


def run_schedule(instance: HtrInstance, schedule: Sequence, capacity_mode=CapacityMode.ROUTING_ONLY,
                 unsafe: bool = False) -> CausalTrace:
    """Fold :func:`apply_tick` over ``schedule``.

    In safe mode violations propagate.  In unsafe mode the first violation is
    recorded on the trace (including the ledger row of the offending tick)
    and the run stops there.
    """
    mode = CapacityMode.parse(capacity_mode)
    world = init_world(instance)
    trace = CausalTrace(instance, mode, world)
    for action in parse_schedule(schedule):
        try:
            new = apply_tick(world, action, instance, mode, unsafe=unsafe)
        except ConstraintViolation as exc:
            if not unsafe:
                raise
            trace.violation = exc
            if exc.world is not None:
                trace.records.append(TickRecord(world.tick, action.value, exc.world.token_level,
                                                tuple(exc.world.ledger_row(world.tick))))
                trace.world = exc.world
            break
        trace.records.append(TickRecord(world.tick, action.value, new.token_level,
                                        tuple(new.ledger_row(world.tick))))
        world = new
        trace.world = world
    return trace


def completion_times(instance: HtrInstance, T_max: int,
                     capacity_mode=CapacityMode.ROUTING_ONLY) -> Counter:
    """Count length-``T_max`` schedules over {HOP, NOOP} by the tick they accept.

    Every shorter schedule is a prefix of some length-``T_max`` schedule, so
    this covers all lengths ``<= T_max``.  The prefix tree is walked
    depth-first; a branch is closed once it completes, and the number of
    full-length schedules below it (``2 ** (T_max - t)``) is credited at once.
    """
    if T_max > T_MAX_CAP:
        raise SearchSpaceTooLarge(f"T_max={T_max} exceeds cap {T_MAX_CAP}")
    if T_max < 0:
        raise ValueError("T_max must be >= 0")
    mode = CapacityMode.parse(capacity_mode)
    found: Counter = Counter()
    stack = [init_world(instance)]
    while stack:
        world = stack.pop()
        if world.token_level == instance.N or world.halted is not None:
            if world.outcome == ACCEPT:
                found[world.tick] += 2 ** (T_max - world.tick)
            continue
        if world.tick == T_max:
            continue
        for action in (Action.NOOP, Action.HOP):
            stack.append(apply_tick(world, action, instance, mode))
    return found


def min_causal_time(instance: HtrInstance, T_max: int,
                    capacity_mode=CapacityMode.ROUTING_ONLY) -> int | None:
    """Least completion tick over all schedules of length ``<= T_max``, or None."""
    found = completion_times(instance, T_max, capacity_mode)
    return min(found) if found else None


def level_view(world: CausalWorld, level: int) -> tuple:
    """What the system holds at or beyond ``level`` (``X_level`` of the world).

    Level 0 is the root and always holds the address.  For ``level >= 1`` the
    view is empty until the token has reached ``level``; afterwards it is the
    list of crossing records along the token's path together with the verdict
    or halt reason, if any.  The path prefix is visible downstream because the
    node now holding the token is identified by that prefix; only the newest
    block actually crossed a boundary, which is what the ledger counts.
    """
    if level == 0:
        return (world.views[0], world.outcome, world.halted)
    if world.token_level < level:
        return ()
    records = tuple((t, j, bits) for j in range(1, world.token_level + 1) for t, bits in world.views[j])
    return (records, world.outcome, world.halted)
