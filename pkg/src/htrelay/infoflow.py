"""Information accounting for causal runs: entropy, capacity, cut-set and Fano.

All logarithms are base 2.  Because every execution is a deterministic
function of the address ``M``, the mutual information between ``M`` and a
level's view ``V`` equals ``H(V)``, which is computed exactly by enumerating
all ``d**N`` addresses.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .causal import (
    CapacityMode,
    CausalTrace,
    Rule,
    apply_tick,
    hop_capacity,
    init_world,
    level_view,
    parse_schedule,
)
from .instance import Family, new_instance

__all__ = [
    "ENUMERATION_CAP",
    "EnumerationTooLarge",
    "DomainError",
    "InfoReport",
    "message_entropy",
    "min_capacity",
    "cutset_budget",
    "binary_entropy",
    "fano_residual",
    "time_lower_bound",
    "time_lower_bound_real",
    "entropy_of_counts",
    "mutual_information_table",
    "exact_mutual_information",
    "audit_run",
    "audit_trace_dict",
    "REPORT_CSV_FIELDS",
]

ENUMERATION_CAP = 4096


class EnumerationTooLarge(ValueError):
    pass


class DomainError(ValueError):
    pass


def message_entropy(d: int, N: int) -> float:
    """``H(M) = N log2 d`` for a uniform address."""
    if d < 2 or N < 1:
        raise ValueError("need d >= 2 and N >= 1")
    return N * math.log2(d)


def min_capacity(d: int, mode=CapacityMode.ROUTING_ONLY) -> int:
    """Per-tick capacity of every hop; the chain is homogeneous so this is the minimum."""
    return hop_capacity(d, mode)


def cutset_budget(T: int, d: int, mode=CapacityMode.ROUTING_ONLY) -> int:
    if T < 0:
        raise ValueError("T must be >= 0")
    return T * min_capacity(d, mode)


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def fano_residual(P_e: float, M_size: int) -> float:
    """Upper bound on ``H(M | X)`` given error probability ``P_e``."""
    if not 0.0 <= P_e <= 1.0:
        raise DomainError(f"P_e={P_e} outside [0, 1]")
    if M_size < 2:
        raise DomainError("message set needs at least two elements")
    return binary_entropy(P_e) + P_e * math.log2(M_size - 1)


def time_lower_bound_real(d: int, N: int, P_e: float, mode=CapacityMode.ROUTING_ONLY) -> float:
    """``(H(M) - fano_residual) / C`` before rounding.

    An error rate of ``P_e`` permits any smaller one, and the Fano term peaks
    at ``1 - 1/|M|`` (blind guessing), so ``P_e`` is clipped there first.
    """
    H = message_entropy(d, N)
    size = d ** N
    if not 0.0 <= P_e <= 1.0:
        raise DomainError(f"P_e={P_e} outside [0, 1]")
    p = min(P_e, 1.0 - 1.0 / size)
    gap = H - fano_residual(p, size)
    # at the clip point the two terms agree up to rounding
    return (gap if gap > 1e-12 else 0.0) / min_capacity(d, mode)


def time_lower_bound(d: int, N: int, P_e: float = 0.0, mode=CapacityMode.ROUTING_ONLY) -> int:
    """Fewest ticks compatible with decoding ``M`` at error rate ``P_e``."""
    return max(0, math.ceil(time_lower_bound_real(d, N, P_e, mode)))


def entropy_of_counts(counts) -> float:
    c = np.asarray(list(counts), dtype=np.float64)
    c = c[c > 0]
    if c.size == 0:
        return 0.0
    p = c / c.sum()
    return float(-(p * np.log2(p)).sum()) + 0.0


def _check_enumeration(d: int, N: int) -> None:
    if d ** N > ENUMERATION_CAP:
        raise EnumerationTooLarge(f"d**N = {d ** N} exceeds cap {ENUMERATION_CAP}")


def mutual_information_table(d: int, N: int, family, target: int, schedule: Sequence,
                             capacity_mode=CapacityMode.ROUTING_ONLY) -> np.ndarray:
    """``I(M; X_level^(T))`` for every ``T in [0, len(schedule)]`` and level.

    Returns an array of shape ``(len(schedule) + 1, N + 1)``.  Each address is
    run once and its view at every (tick, level) pair is tallied.
    """
    _check_enumeration(d, N)
    family = Family(family)
    actions = parse_schedule(schedule)
    mode = CapacityMode.parse(capacity_mode)
    L = len(actions)
    tallies = [[Counter() for _ in range(N + 1)] for _ in range(L + 1)]
    for address in itertools.product(range(d), repeat=N):
        inst = new_instance(d, N, address, family, target)
        world = init_world(inst)
        for T in range(L + 1):
            if T > 0:
                world = apply_tick(world, actions[T - 1], inst, mode)
            for level in range(N + 1):
                tallies[T][level][level_view(world, level)] += 1
    return np.array([[entropy_of_counts(c.values()) for c in row] for row in tallies])


def exact_mutual_information(d: int, N: int, family, target: int, schedule: Sequence, level: int, T: int,
                             capacity_mode=CapacityMode.ROUTING_ONLY) -> float:
    """Exact ``I(M; X_level^(T))`` under a fixed schedule, by enumeration."""
    _check_enumeration(d, N)
    actions = parse_schedule(schedule)
    if T < 0 or len(actions) < T:
        raise ValueError(f"schedule has {len(actions)} actions, need at least T={T}")
    if not 0 <= level <= N:
        raise ValueError(f"level must be in [0, {N}]")
    mode = CapacityMode.parse(capacity_mode)
    counts: Counter = Counter()
    for address in itertools.product(range(d), repeat=N):
        inst = new_instance(d, N, address, family, target)
        world = init_world(inst)
        for action in actions[:T]:
            world = apply_tick(world, action, inst, mode)
        counts[level_view(world, level)] += 1
    return entropy_of_counts(counts.values())


@dataclass
class InfoReport:
    d: int
    N: int
    capacity_mode: str
    H_M: float
    min_capacity: int
    T: int
    cutset_budget: int
    delivered: list[int]
    I_exact: float | None
    P_e: float
    fano_residual: float
    T_lower: int
    violations: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        out = asdict(self)
        out["status"] = "OK" if self.ok else "VIOLATION"
        return out

    def csv_row(self, schedule_id: str = "") -> dict:
        return {
            "d": self.d,
            "N": self.N,
            "T": self.T,
            "schedule_id": schedule_id,
            "capacity_mode": self.capacity_mode,
            "H_M": f"{self.H_M:.12g}",
            "min_capacity": self.min_capacity,
            "cutset_budget": self.cutset_budget,
            "I_exact": "" if self.I_exact is None else f"{self.I_exact:.12g}",
            "fano_residual": f"{self.fano_residual:.12g}",
            "T_lower": self.T_lower,
            "status": "OK" if self.ok else "VIOLATION",
        }


REPORT_CSV_FIELDS = ["d", "N", "T", "schedule_id", "capacity_mode", "H_M", "min_capacity",
                     "cutset_budget", "I_exact", "fano_residual", "T_lower", "status"]


def _report(d, N, mode, ledger: np.ndarray, recorded: dict | None, I_exact, P_e) -> InfoReport:
    C = min_capacity(d, mode)
    T = ledger.shape[1]
    budget = cutset_budget(T, d, mode)
    violations = []
    for b, t in zip(*np.nonzero(ledger > C)):
        violations.append({"rule": Rule.CAPACITY_EXCEEDED.value, "tick": int(t), "boundary": int(b),
                           "detail": f"{int(ledger[b, t])} bits > capacity {C}"})
    if recorded is not None and not any(v["rule"] == recorded["rule"] and v["tick"] == recorded["tick"]
                                        for v in violations):
        violations.append(dict(recorded))
    if I_exact is not None and I_exact > budget + 1e-12:
        violations.append({"rule": "CUTSET_EXCEEDED", "tick": T,
                           "detail": f"I_exact {I_exact:.6f} > budget {budget}"})
    return InfoReport(
        d=d, N=N, capacity_mode=mode.value,
        H_M=message_entropy(d, N), min_capacity=C, T=T, cutset_budget=budget,
        delivered=[int(x) for x in ledger.sum(axis=1)],
        I_exact=I_exact, P_e=P_e, fano_residual=fano_residual(P_e, d ** N),
        T_lower=time_lower_bound(d, N, P_e, mode), violations=violations,
    )


def audit_run(trace: CausalTrace, d: int | None = None, mode=None, I_exact: float | None = None,
              P_e: float = 0.0) -> InfoReport:
    """Check a run's ledger against per-tick capacity and the cut-set budget.

    ``mode`` defaults to the mode the run was executed in.
    """
    d = trace.instance.d if d is None else d
    mode = trace.capacity_mode if mode is None else CapacityMode.parse(mode)
    recorded = None if trace.violation is None else trace.violation.to_dict()
    return _report(d, trace.instance.N, mode, trace.ledger_matrix(), recorded, I_exact, P_e)


def audit_trace_dict(obj: dict, d: int | None = None, mode=None, I_exact: float | None = None,
                     P_e: float = 0.0) -> InfoReport:
    """Same as :func:`audit_run` for a trace loaded from its JSON export."""
    N = int(obj["N"])
    d = int(obj["d"]) if d is None else d
    mode = CapacityMode.parse(obj.get("capacity_mode", "ROUTING_ONLY") if mode is None else mode)
    ticks = obj.get("ticks", [])
    ledger = np.zeros((N, len(ticks)), dtype=np.int64)
    for t, rec in enumerate(ticks):
        row = rec["ledger"]
        if len(row) != N:
            raise ValueError(f"tick {t}: ledger row has {len(row)} entries, expected {N}")
        ledger[:, t] = row
    return _report(d, N, mode, ledger, obj.get("violation"), I_exact, P_e)
