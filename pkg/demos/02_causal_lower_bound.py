"""No scheduler can deliver the token in fewer than N ticks.

The causal engine lets a scheduler pick, tick by tick, whether the token hops
or waits.  Searching every HOP/NOOP schedule up to a horizon shows that the
earliest accepting completion is always exactly N, and that every illegal
shortcut is caught.
"""
import itertools

from htrelay.causal import Action, canonical_schedule, completion_times, min_causal_time, run_schedule
from htrelay.instance import Family, new_instance
from htrelay.sequential import ACCEPT, run_sequential

# %% Exhaustive search at small N
for N in range(1, 5):
    results = set()
    for address in itertools.product(range(2), repeat=N):
        inst = new_instance(2, N, address, Family.CHECKSUM, sum(address) % 2)
        results.add(min_causal_time(inst, N + 2))
    print(f"N={N}: earliest completion over all accepting instances = {sorted(results)}")

# %% How schedules distribute over completion ticks
inst = new_instance(2, 3, [0, 1, 1], Family.CHECKSUM, 0)
census = completion_times(inst, 6)
print("\nlength-6 schedules by completion tick:", dict(sorted(census.items())))

# %% The canonical run and a delayed one
trace = run_schedule(inst, canonical_schedule(3))
assert trace.outcome == run_sequential(inst).outcome == ACCEPT
print("canonical run completes at tick", trace.T_complete)
print("ledger (boundary x tick):")
print(trace.ledger_matrix())
print("one idle tick first:", run_schedule(inst, ["NOOP", "HOP", "HOP", "HOP"]).T_complete)

# %% Shortcuts are refused
for bad in (Action.DOUBLE_HOP, Action.DUPLICATE, Action.LEAK, Action.OVERSEND):
    t = run_schedule(inst, [Action.HOP, bad], unsafe=True)
    print(f"{bad.value:10s} -> {t.violation.rule.value} at tick {t.violation.tick}")
